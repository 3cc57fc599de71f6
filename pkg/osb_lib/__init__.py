from .errors import *
from .reports import *
from .convex_core import *
from .symplectic import *
from .bodies import *
from .billiard import *
from .measure import *
from .hypersurface import *
from .osb_checks import *
from .suite import *
