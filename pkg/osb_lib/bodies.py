"""
Body factories and the BodySpec text format.

Every example family is built here: balls, l_p balls, intervals (as
ingredients only), l2-sums, Lagrangian sums K (+)2 K°, symplectic l2-sums,
linear images, numeric polars and the patched self-polar body.
BodySpec is a JSON tree with a "type" discriminator and a mandatory "v": 1
at the top level, e.g. {"type": "lagrangian_sum", "k": {"type": "lp_ball",
"p": 4.0, "dim": 2}, "v": 1}.
"""

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from typing import Any, ClassVar, Dict, Optional, Tuple, Union

import numpy as np
from scipy.optimize import brentq

from .convex_core import (
    SMOOTHNESS_ORDER,
    ConvexBody,
    ToleranceConfig,
    convexity_probe,
    gauge_batch,
    gauge_gradient,
    gauge_hessian,
    is_numeric_body,
    support,
    support_point,
)
from .errors import (
    ConstructionRejectedError,
    GateFailureError,
    InvalidInputError,
    SpecParseError,
)
from .symplectic import apply_J, is_symplectic_matrix, self_polarity_defect

SPEC_VERSION = 1


# ---------------------------------------------------------------------------
# BodySpec tree

@dataclass(frozen=True)
class Ball:
    TAG: ClassVar[str] = 'ball'
    dim: int


@dataclass(frozen=True)
class LpBall:
    TAG: ClassVar[str] = 'lp_ball'
    p: float
    dim: int


@dataclass(frozen=True)
class Interval:
    TAG: ClassVar[str] = 'interval'
    half_width: float


@dataclass(frozen=True)
class L2Sum:
    TAG: ClassVar[str] = 'l2_sum'
    left: 'BodySpec'
    right: 'BodySpec'


@dataclass(frozen=True)
class LagrangianSum:
    TAG: ClassVar[str] = 'lagrangian_sum'
    k: 'BodySpec'


@dataclass(frozen=True)
class SymplecticL2Sum:
    TAG: ClassVar[str] = 'symplectic_l2_sum'
    left: 'BodySpec'
    right: 'BodySpec'


@dataclass(frozen=True)
class LinearImage:
    TAG: ClassVar[str] = 'linear_image'
    inner: 'BodySpec'
    matrix: Tuple[Tuple[float, ...], ...]


@dataclass(frozen=True)
class PatchedSelfPolar:
    TAG: ClassVar[str] = 'patched_self_polar'
    n: int
    epsilon: float
    delta: float
    seed: int


@dataclass(frozen=True)
class NumericPolar:
    TAG: ClassVar[str] = 'numeric_polar'
    inner: 'BodySpec'


BodySpec = Union[Ball, LpBall, Interval, L2Sum, LagrangianSum, SymplecticL2Sum,
                 LinearImage, PatchedSelfPolar, NumericPolar]

# tag -> (class, {field: kind})
_SCHEMA: Dict[str, Tuple[type, Dict[str, str]]] = {
    cls.TAG: (cls, kinds) for cls, kinds in [
        (Ball, {'dim': 'int'}),
        (LpBall, {'p': 'float', 'dim': 'int'}),
        (Interval, {'half_width': 'float'}),
        (L2Sum, {'left': 'spec', 'right': 'spec'}),
        (LagrangianSum, {'k': 'spec'}),
        (SymplecticL2Sum, {'left': 'spec', 'right': 'spec'}),
        (LinearImage, {'inner': 'spec', 'matrix': 'matrix'}),
        (PatchedSelfPolar, {'n': 'int', 'epsilon': 'float', 'delta': 'float', 'seed': 'int'}),
        (NumericPolar, {'inner': 'spec'}),
    ]
}


def _parse_field(value: Any, kind: str, path: str) -> Any:
    if kind == 'int':
        if isinstance(value, bool) or not isinstance(value, int):
            raise SpecParseError(f"expected an integer, got {json.dumps(value)}", path)
        return value
    if kind == 'float':
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not np.isfinite(value):
            raise SpecParseError(f"expected a finite number, got {json.dumps(value)}", path)
        return float(value)
    if kind == 'spec':
        return _spec_from_dict(value, path)
    if kind == 'matrix':
        if not isinstance(value, list) or not value:
            raise SpecParseError("expected a non-empty array of rows", path)
        rows = []
        for i, row in enumerate(value):
            if not isinstance(row, list) or len(row) != len(value):
                raise SpecParseError(f"matrix must be square with {len(value)} columns", f"{path}[{i}]")
            rows.append(tuple(_parse_field(entry, 'float', f"{path}[{i}][{j}]") for j, entry in enumerate(row)))
        return tuple(rows)
    raise SpecParseError(f"unknown field kind {kind}", path)


def _spec_from_dict(data: Any, path: str = '$') -> BodySpec:
    if not isinstance(data, dict):
        raise SpecParseError(f"expected an object, got {type(data).__name__}", path)
    tag = data.get('type')
    if tag is None:
        raise SpecParseError("missing 'type' discriminator", path)
    if tag not in _SCHEMA:
        raise SpecParseError(f"unknown body type {tag!r}; expected one of {sorted(_SCHEMA)}", f"{path}.type")
    cls, kinds = _SCHEMA[tag]
    allowed = set(kinds) | {'type'} | ({'v'} if path == '$' else set())
    for key in data:
        if key not in allowed:
            raise SpecParseError(f"unexpected field for {tag!r}", f"{path}.{key}")
    values = {}
    for name, kind in kinds.items():
        if name not in data:
            raise SpecParseError(f"missing field {name!r} for {tag!r}", f"{path}.{name}")
        values[name] = _parse_field(data[name], kind, f"{path}.{name}")
    spec = cls(**values)
    _check_ranges(spec, path)
    return spec


def _check_ranges(spec: BodySpec, path: str):
    if isinstance(spec, (Ball, LpBall)) and spec.dim < 2:
        raise SpecParseError("dim must be >= 2 (one-dimensional ingredients are intervals)", f"{path}.dim")
    if isinstance(spec, LpBall) and not spec.p > 1.0:
        raise SpecParseError(f"p must satisfy 1 < p < inf, got {spec.p}", f"{path}.p")
    if isinstance(spec, Interval) and not spec.half_width > 0.0:
        raise SpecParseError("half_width must be positive", f"{path}.half_width")
    if isinstance(spec, PatchedSelfPolar):
        if spec.n < 1:
            raise SpecParseError("n must be >= 1", f"{path}.n")
        if not 0.0 < spec.epsilon < 1.0 / np.sqrt(2 * spec.n):
            raise SpecParseError(f"epsilon must lie in (0, 1/sqrt(2n)), got {spec.epsilon}", f"{path}.epsilon")
        if not 0.0 <= spec.delta < 1.0:
            raise SpecParseError(f"delta must lie in [0, 1), got {spec.delta}", f"{path}.delta")


def parse_spec(text: str) -> BodySpec:
    """
    Parse BodySpec JSON text.

    Raises:
        SpecParseError: JSON syntax (with line/column) or schema violation (with field path).
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise SpecParseError(f"invalid JSON: {e.msg}", '$', line=e.lineno, column=e.colno)
    if not isinstance(data, dict):
        raise SpecParseError("top level must be an object", '$')
    if 'v' not in data:
        raise SpecParseError("version field 'v' is mandatory", '$.v')
    if isinstance(data['v'], bool) or data['v'] != SPEC_VERSION:
        raise SpecParseError(f"unsupported version {data['v']!r}, expected {SPEC_VERSION}", '$.v')
    return _spec_from_dict(data, '$')


def _spec_to_dict(spec: BodySpec) -> Dict[str, Any]:
    out: Dict[str, Any] = {'type': spec.TAG}
    for f in dataclasses.fields(spec):
        value = getattr(spec, f.name)
        if dataclasses.is_dataclass(value):
            out[f.name] = _spec_to_dict(value)
        elif f.name == 'matrix':
            out[f.name] = [list(row) for row in value]
        else:
            out[f.name] = value
    return out


def serialize_spec(spec: BodySpec) -> str:
    data = _spec_to_dict(spec)
    data['v'] = SPEC_VERSION
    return json.dumps(data)


def spec_hash(spec: BodySpec) -> str:
    return hashlib.sha256(serialize_spec(spec).encode('utf-8')).hexdigest()


# ---------------------------------------------------------------------------
# Factories

def _eval_gauge(body: ConvexBody, v: np.ndarray):
    if v.ndim == 1:
        return float(body.gauge(v))
    flat = v.reshape(-1, body.dim)
    return gauge_batch(body, flat).reshape(v.shape[:-1])


def _tolerances(numeric: bool) -> ToleranceConfig:
    return ToleranceConfig.numeric() if numeric else ToleranceConfig.analytic()


def _check_dim(dim: int, phase_space: bool, what: str):
    if not isinstance(dim, (int, np.integer)) or dim < 2:
        raise InvalidInputError(f"{what} needs dim >= 2 (one-dimensional ingredients are intervals), got {dim}")
    if phase_space and dim % 2:
        raise InvalidInputError(f"{what} in phase space needs an even dimension, got {dim}")


def make_ball(dim: int, phase_space: bool = True) -> ConvexBody:
    """Unit Euclidean ball; ``phase_space=False`` admits odd dimensions for ingredients"""
    _check_dim(dim, phase_space, 'ball')
    eye = np.eye(dim)

    def gauge_fn(v):
        return np.linalg.norm(v, axis=-1)

    def gradient_fn(x):
        return x / np.linalg.norm(x)

    def hessian_fn(x):
        r = np.linalg.norm(x)
        u = x / r
        return (eye - np.outer(u, u)) / r

    def support_fn(u):
        return u / np.linalg.norm(u)

    return ConvexBody(dim=dim, gauge=gauge_fn, gradient=gradient_fn, hessian=hessian_fn,
                      support_point=support_fn, smoothness='Cinf', label=f'ball{dim}',
                      dual=lambda: make_ball(dim, phase_space=False),
                      meta={'family': 'ball', 'quadratic': True})


def make_lp_ball(p: float, dim: int, phase_space: bool = True) -> ConvexBody:
    """
    Unit ball of the l_p norm, 1 < p < inf.

    Analytic Hessian for p >= 2; bodies with p < 2 are tagged C1.
    """
    if not (np.isfinite(p) and p > 1.0):
        raise InvalidInputError(f"l_p ball needs 1 < p < inf, got p={p}")
    _check_dim(dim, phase_space, 'l_p ball')
    if p == 2.0:
        return make_ball(dim, phase_space)
    p = float(p)
    q = p / (p - 1.0)

    def norm_p(v, r):
        return np.sum(np.abs(v) ** r, axis=-1) ** (1.0 / r)

    def gauge_fn(v):
        return norm_p(v, p)

    def gradient_fn(x):
        g = norm_p(x, p)
        return np.sign(x) * (np.abs(x) / g) ** (p - 1.0)

    def hessian_fn(x):
        g = norm_p(x, p)
        grad = gradient_fn(x)
        return (p - 1.0) / g * (np.diag((np.abs(x) / g) ** (p - 2.0)) - np.outer(grad, grad))

    def support_fn(u):
        h = norm_p(u, q)
        return np.sign(u) * (np.abs(u) / h) ** (q - 1.0)

    if p >= 2.0:
        smoothness = 'Cinf' if float(p).is_integer() and int(p) % 2 == 0 else 'C2'
    else:
        smoothness = 'C1'
    return ConvexBody(dim=dim, gauge=gauge_fn, gradient=gradient_fn,
                      hessian=hessian_fn if p >= 2.0 else None,
                      support_point=support_fn, smoothness=smoothness, label=f'l{p:g}_ball{dim}',
                      dual=lambda: make_lp_ball(q, dim, phase_space=False),
                      meta={'family': 'lp_ball', 'p': p, 'quadratic': False})


def make_interval(half_width: float) -> ConvexBody:
    """[-a, a] in R^1, an ingredient for l2-sums only"""
    a = float(half_width)
    if not (np.isfinite(a) and a > 0.0):
        raise InvalidInputError(f"interval half-width must be positive, got {half_width}")

    def gauge_fn(v):
        return np.abs(np.asarray(v)[..., 0]) / a

    def gradient_fn(x):
        return np.sign(x) / a

    def hessian_fn(x):
        return np.zeros((1, 1))

    def support_fn(u):
        return a * np.sign(u)

    return ConvexBody(dim=1, gauge=gauge_fn, gradient=gradient_fn, hessian=hessian_fn,
                      support_point=support_fn, smoothness='Cinf', label=f'interval({a:g})',
                      dual=lambda: make_interval(1.0 / a),
                      meta={'family': 'interval', 'quadratic': True})


def _half_square_hessian(body: ConvexBody, x: np.ndarray) -> np.ndarray:
    """Hessian of G^2/2; constant for quadratic gauges, so the origin is evaluated off-center"""
    if not np.any(x):
        x = np.eye(body.dim)[0]
    grad = gauge_gradient(body, x)
    return np.outer(grad, grad) + float(body.gauge(x)) * gauge_hessian(body, x)


def polar_of(body: ConvexBody) -> ConvexBody:
    """Closed-form polar when the factory knows it, numeric polar otherwise"""
    if body.dual is not None:
        return body.dual()
    return numeric_polar(body)


def make_l2_sum(a: ConvexBody, b: ConvexBody) -> ConvexBody:
    """
    l2-sum on concatenated coordinates: G(x, y) = sqrt(Ga(x)^2 + Gb(y)^2).

    Smooth beyond C1 only when both squared gauges are quadratic forms.
    """
    da, db = a.dim, b.dim
    quadratic = bool(a.meta.get('quadratic')) and bool(b.meta.get('quadratic'))
    numeric = is_numeric_body(a) or is_numeric_body(b)
    if quadratic:
        smoothness = min((a.smoothness, b.smoothness), key=SMOOTHNESS_ORDER.get)
    else:
        smoothness = 'C1'

    def gauge_fn(v):
        v = np.asarray(v, dtype=float)
        ga = _eval_gauge(a, v[..., :da])
        gb = _eval_gauge(b, v[..., da:])
        return np.sqrt(np.square(ga) + np.square(gb))

    def parts(x):
        xa, xb = x[:da], x[da:]
        ga = float(a.gauge(xa)) if np.any(xa) else 0.0
        gb = float(b.gauge(xb)) if np.any(xb) else 0.0
        wa = ga * gauge_gradient(a, xa) if ga > 0.0 else np.zeros(da)
        wb = gb * gauge_gradient(b, xb) if gb > 0.0 else np.zeros(db)
        return np.sqrt(ga * ga + gb * gb), np.concatenate([wa, wb])

    def gradient_fn(x):
        g, weighted = parts(x)
        return weighted / g

    def hessian_fn(x):
        g, weighted = parts(x)
        grad = weighted / g
        block = np.zeros((da + db, da + db))
        block[:da, :da] = _half_square_hessian(a, x[:da])
        block[da:, da:] = _half_square_hessian(b, x[da:])
        return (block - np.outer(grad, grad)) / g

    def support_fn(u):
        ua, ub = u[:da], u[da:]
        ha, pa = support_point(a, ua) if np.any(ua) else (0.0, np.zeros(da))
        hb, pb = support_point(b, ub) if np.any(ub) else (0.0, np.zeros(db))
        h = np.hypot(ha, hb)
        return np.concatenate([(ha / h) * pa, (hb / h) * pb])

    def dual_fn():
        return make_l2_sum(polar_of(a), polar_of(b))

    return ConvexBody(dim=da + db, gauge=gauge_fn, gradient=gradient_fn,
                      hessian=hessian_fn if smoothness != 'C1' else None,
                      support_point=support_fn, smoothness=smoothness,
                      label=f'({a.label} (+)2 {b.label})', tolerances=_tolerances(numeric),
                      dual=dual_fn if (a.dual is not None and b.dual is not None) else None,
                      meta={'family': 'l2_sum', 'quadratic': quadratic, 'numeric': numeric,
                            'split': da})


def make_lagrangian_sum(k: ConvexBody) -> ConvexBody:
    """K (+)2 K°: x-block gauge of K, y-block support function of K"""
    body = make_l2_sum(k, polar_of(k))
    meta = dict(body.meta, family='lagrangian_sum')
    return dataclasses.replace(body, label=f'lagrangian_sum({k.label})', meta=meta)


def _layout_permutation(n: int, m: int) -> np.ndarray:
    """Index map from the joint layout (x^X, x^Y, y^X, y^Y) to concatenated (x^X, y^X, x^Y, y^Y)"""
    big = n + m
    return np.concatenate([np.arange(0, n), np.arange(big, big + n),
                           np.arange(n, big), np.arange(big + n, 2 * big)])


def make_symplectic_l2_sum(x_body: ConvexBody, y_body: ConvexBody, n_check: int = 64,
                           seed: int = 0) -> ConvexBody:
    """
    Symplectic l2-sum of two self-polar bodies in R^{2n} and R^{2m}.

    The joint body lives in the standard layout of R^{2(n+m)}; the coordinate
    permutation is stored in meta['permutation'].

    Raises:
        InvalidInputError: an input fails the self-polarity gate.
    """
    for which, body in (('left', x_body), ('right', y_body)):
        if not body.is_phase_space:
            raise InvalidInputError(f"{which} summand must live in an even dimension, got {body.dim}")
        report = self_polarity_defect(body, n_check, seed)
        if not report.passed:
            raise InvalidInputError(
                f"{which} summand '{body.label}' is not symplectically self-polar",
                {'summand': which, 'defect': report.defect, 'alpha': report.alpha},
            )
    n, m = x_body.half_dim, y_body.half_dim
    perm = _layout_permutation(n, m)
    concat = make_l2_sum(x_body, y_body)
    select = np.eye(2 * (n + m))[perm]
    body = make_linear_image(concat, select.T)
    meta = dict(body.meta, family='symplectic_l2_sum', permutation=perm.tolist())
    return dataclasses.replace(body, label=f'({x_body.label} (+)w {y_body.label})', meta=meta)


def make_linear_image(inner: ConvexBody, matrix: Any) -> ConvexBody:
    """
    L(inner) with gauge G(L^-1 v); meta['is_symplectic'] records L^T J L = J.

    Raises:
        InvalidInputError: L is not square of the inner dimension, or singular.
    """
    mat = np.asarray(matrix, dtype=float)
    if mat.shape != (inner.dim, inner.dim):
        raise InvalidInputError(f"matrix must be {inner.dim}x{inner.dim}, got shape {mat.shape}")
    if not np.all(np.isfinite(mat)):
        raise InvalidInputError("matrix entries must be finite")
    if np.linalg.matrix_rank(mat) < inner.dim or np.linalg.cond(mat) > 1e12:
        raise InvalidInputError("matrix is singular")
    inv = np.linalg.inv(mat)
    inv_t = inv.T

    def gauge_fn(v):
        return _eval_gauge(inner, np.asarray(v, dtype=float) @ inv_t)

    def gradient_fn(x):
        return inv_t @ gauge_gradient(inner, inv @ x)

    def hessian_fn(x):
        return inv_t @ gauge_hessian(inner, inv @ x) @ inv

    def support_fn(u):
        _, point = support_point(inner, mat.T @ u)
        return mat @ point

    def dual_fn():
        return make_linear_image(polar_of(inner), inv_t)

    symplectic = inner.dim % 2 == 0 and is_symplectic_matrix(mat, inner.tolerances.eq_tol)
    return ConvexBody(dim=inner.dim, gauge=gauge_fn, gradient=gradient_fn,
                      hessian=hessian_fn if inner.smooth_at_least('C2') else None,
                      support_point=support_fn, smoothness=inner.smoothness,
                      label=f'L({inner.label})', tolerances=inner.tolerances,
                      dual=dual_fn if inner.dual is not None else None,
                      meta={'family': 'linear_image', 'quadratic': bool(inner.meta.get('quadratic')),
                            'numeric': is_numeric_body(inner), 'is_symplectic': symplectic,
                            'matrix': mat.tolist()})


_DOWNGRADE = {'Cinf': 'C2', 'C2': 'C1', 'C1': 'C1'}


def numeric_polar(inner: ConvexBody) -> ConvexBody:
    """
    Polar body with gauge v -> h_inner(v).

    The gradient is the support point (the maximizer), the support point of
    the polar is the gradient of the inner gauge, so the bipolar is exact.
    """
    numeric = inner.support_point is None or is_numeric_body(inner)

    def gauge_fn(v):
        v = np.asarray(v, dtype=float)
        if not np.any(v):
            return 0.0
        return support(inner, v)

    def gradient_fn(x):
        _, point = support_point(inner, x)
        return point

    def support_fn(u):
        return gauge_gradient(inner, u)

    return ConvexBody(dim=inner.dim, gauge=gauge_fn, gradient=gradient_fn,
                      support_point=support_fn, smoothness=_DOWNGRADE[inner.smoothness],
                      label=f'polar({inner.label})', tolerances=_tolerances(numeric),
                      batched=False, dual=lambda: inner,
                      meta={'family': 'numeric_polar', 'quadratic': bool(inner.meta.get('quadratic')),
                            'numeric': numeric})


# ---------------------------------------------------------------------------
# Patched C-infinity self-polar body

# Below this the exp(-1/s) edge underflows; treat it as zero
_EDGE_CUTOFF = 1.0 / 700.0


def _edge(s: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """exp(-1/s) for s > 0, else 0, with its derivative"""
    s = np.asarray(s, dtype=float)
    value = np.zeros_like(s)
    slope = np.zeros_like(s)
    pos = s > _EDGE_CUTOFF
    e = np.exp(-1.0 / s[pos])
    value[pos] = e
    slope[pos] = e / s[pos] ** 2
    return value, slope


def smoothstep(s: Any) -> np.ndarray:
    """C-infinity step: 0 for s <= 0, 1 for s >= 1"""
    a, _ = _edge(s)
    b, _ = _edge(1.0 - np.asarray(s, dtype=float))
    return a / (a + b)


def smoothstep_derivative(s: Any) -> np.ndarray:
    a, da = _edge(s)
    b, db = _edge(1.0 - np.asarray(s, dtype=float))
    return (da * b + a * db) / (a + b) ** 2


@dataclass(frozen=True)
class ConeBump:
    """
    Bump psi on the unit sphere supported on {min_i u_i > eps} and its antipode.

    psi(u) = prod_i S((u_i - eps)/w) + prod_i S((-u_i - eps)/w), where S is the
    exp(-1/s) smoothstep and w = 2 (1/sqrt(dim) - eps), so each factor reaches
    S = 1/2 on the cone axis.
    """

    dim: int
    epsilon: float

    @property
    def width(self) -> float:
        return 2.0 * (1.0 / np.sqrt(self.dim) - self.epsilon)

    def __call__(self, u: np.ndarray) -> np.ndarray:
        total = 0.0
        for sign in (1.0, -1.0):
            total = total + np.prod(smoothstep((sign * u - self.epsilon) / self.width), axis=-1)
        return total

    def gradient(self, u: np.ndarray) -> np.ndarray:
        grad = np.zeros(self.dim)
        for sign in (1.0, -1.0):
            s = (sign * u - self.epsilon) / self.width
            values = smoothstep(s)
            slopes = smoothstep_derivative(s)
            for j in range(self.dim):
                others = np.prod(np.delete(values, j))
                grad[j] += sign * slopes[j] / self.width * others
        return grad


def make_bumped_ball(dim: int, epsilon: float, delta: float) -> ConvexBody:
    """Ball with radial function r(u) = 1 + delta psi(u)"""
    bump = ConeBump(dim, epsilon)

    def gauge_fn(v):
        v = np.asarray(v, dtype=float)
        rho = np.linalg.norm(v, axis=-1)
        safe = np.where(rho > 0.0, rho, 1.0)
        u = v / (safe[..., None] if v.ndim > 1 else safe)
        return np.where(rho > 0.0, rho / (1.0 + delta * bump(u)), 0.0)

    def gradient_fn(x):
        rho = float(np.linalg.norm(x))
        u = x / rho
        r = 1.0 + delta * float(bump(u))
        dpsi = bump.gradient(u)
        return u / r - (delta / r ** 2) * (dpsi - float(dpsi @ u) * u)

    return ConvexBody(dim=dim, gauge=gauge_fn, gradient=gradient_fn, smoothness='Cinf',
                      label=f'bumped_ball{dim}(eps={epsilon:g}, delta={delta:g})',
                      tolerances=ToleranceConfig.numeric(),
                      meta={'family': 'bumped_ball', 'numeric': True, 'bump': bump})


class _PatchRegions:
    """Classifies directions into the +-U cone, the +-JU cone, or the rest"""

    def __init__(self, dim: int, epsilon: float):
        self.dim = dim
        self.n = dim // 2
        self.epsilon = epsilon

    def _j(self, v: np.ndarray) -> np.ndarray:
        return np.concatenate([-v[..., self.n:], v[..., :self.n]], axis=-1)

    def classify(self, v: np.ndarray) -> np.ndarray:
        """0: rest, 1: +-U, 2: +-JU (rows of an (N, dim) array)"""
        rho = np.linalg.norm(v, axis=-1, keepdims=True)
        u = v / np.where(rho > 0.0, rho, 1.0)
        eps = self.epsilon
        in_u = np.all(u > eps, axis=-1) | np.all(u < -eps, axis=-1)
        ju = -self._j(u)
        in_ju = np.all(ju > eps, axis=-1) | np.all(ju < -eps, axis=-1)
        labels = np.zeros(v.shape[0], dtype=int)
        labels[in_u] = 1
        labels[in_ju & ~in_u] = 2
        return labels


def _seam_points(regions: _PatchRegions, rng: np.random.Generator, count: int) -> np.ndarray:
    """Unit points on the boundary of the U cone, reached along great circles from the cone axis"""
    dim = regions.dim
    axis = np.ones(dim) / np.sqrt(dim)
    points = []
    while len(points) < count:
        direction = rng.standard_normal(dim)
        direction -= float(direction @ axis) * axis
        direction /= np.linalg.norm(direction)

        def margin(t):
            p = np.cos(t) * axis + np.sin(t) * direction
            return float(np.min(p)) - regions.epsilon

        # margin > 0 on the axis, < 0 at a quarter turn
        t_star = brentq(margin, 0.0, np.pi / 2.0, xtol=1e-14)
        points.append(np.cos(t_star) * axis + np.sin(t_star) * direction)
    return np.array(points)


def seam_continuity_defect(body: ConvexBody, n_points: int, seed: int, offset: float = 1e-6) -> float:
    """Max gradient jump across the U and JU cone boundaries of a patched body"""
    regions = body.meta['regions']
    rng = np.random.default_rng(seed)
    axis = np.ones(body.dim) / np.sqrt(body.dim)
    worst = 0.0
    for seam in _seam_points(regions, rng, n_points):
        across = seam - float(seam @ axis) * axis
        across -= float(across @ seam) * seam
        across /= np.linalg.norm(across)
        # v in JU iff -Jv in U, so J maps the U seam onto the JU seam
        for point, normal in ((seam, across), (apply_J(seam), apply_J(across))):
            inside = point - offset * normal
            outside = point + offset * normal
            jump = np.linalg.norm(gauge_gradient(body, outside) - gauge_gradient(body, inside))
            worst = max(worst, float(jump))
    return worst


def make_patched_selfpolar(n: int, epsilon: float, delta: float, seed: int,
                           validate: bool = True) -> ConvexBody:
    """
    Patched C-infinity symplectically self-polar body Z in R^{2n}.

    X is the unit ball with a radial bump on the cone {min_i u_i > eps} and its
    antipode; Z agrees with X on +-U, with J X° on +-JU, and with the ball
    elsewhere. Validation runs the convexity probe, the self-polarity detector
    and a seam-continuity check.

    Raises:
        InvalidInputError: parameters out of range.
        ConstructionRejectedError: a validation metric exceeds its threshold.
    """
    if n < 1:
        raise InvalidInputError(f"n must be >= 1, got {n}")
    dim = 2 * n
    if not 0.0 < epsilon < 1.0 / np.sqrt(dim):
        raise InvalidInputError(f"epsilon must lie in (0, 1/sqrt(2n)) = (0, {1.0 / np.sqrt(dim):.6f}), got {epsilon}")
    if not (np.isfinite(delta) and 0.0 <= delta < 1.0):
        raise InvalidInputError(f"delta must lie in [0, 1), got {delta}")

    x_body = make_ball(dim) if delta == 0.0 else make_bumped_ball(dim, epsilon, delta)
    regions = _PatchRegions(dim, epsilon)

    def gauge_fn(v):
        v = np.asarray(v, dtype=float)
        flat = np.atleast_2d(v)
        labels = regions.classify(flat)
        out = np.linalg.norm(flat, axis=-1)
        cone = labels == 1
        if np.any(cone):
            out[cone] = gauge_batch(x_body, flat[cone])
        for i in np.nonzero(labels == 2)[0]:
            out[i] = support(x_body, -apply_J(flat[i]))
        return float(out[0]) if v.ndim == 1 else out

    def gradient_fn(x):
        label = int(regions.classify(x[None, :])[0])
        if label == 1:
            return gauge_gradient(x_body, x)
        if label == 2:
            _, point = support_point(x_body, -apply_J(x))
            return apply_J(point)
        return x / np.linalg.norm(x)

    body = ConvexBody(dim=dim, gauge=gauge_fn, gradient=gradient_fn, smoothness='Cinf',
                      label=f'patched{dim}(eps={epsilon:g}, delta={delta:g})',
                      tolerances=ToleranceConfig.numeric(),
                      meta={'family': 'patched_self_polar', 'numeric': True, 'regions': regions,
                            'x_body': x_body, 'epsilon': epsilon, 'delta': delta, 'seed': seed})
    if not validate:
        return body

    convexity = convexity_probe(body, 1000, seed)
    if not convexity.passed:
        raise ConstructionRejectedError('convexity', convexity.max_violation, body.tolerances.eq_tol)
    polarity = self_polarity_defect(body, 64, seed)
    if polarity.defect > 1e-5:
        raise ConstructionRejectedError('self_polarity', polarity.defect, 1e-5)
    seams = seam_continuity_defect(body, 16, seed)
    if seams > 1e-4:
        raise ConstructionRejectedError('seam_continuity', seams, 1e-4)
    meta = dict(body.meta, validation={'convexity': convexity.max_violation,
                                       'self_polarity': polarity.defect,
                                       'seam_continuity': seams})
    return dataclasses.replace(body, meta=meta)


# ---------------------------------------------------------------------------
# Realization

def _build(spec: BodySpec, phase_space: bool) -> ConvexBody:
    if isinstance(spec, Ball):
        body = make_ball(spec.dim, phase_space)
    elif isinstance(spec, LpBall):
        body = make_lp_ball(spec.p, spec.dim, phase_space)
    elif isinstance(spec, Interval):
        body = make_interval(spec.half_width)
    elif isinstance(spec, L2Sum):
        body = make_l2_sum(_build(spec.left, False), _build(spec.right, False))
    elif isinstance(spec, LagrangianSum):
        body = make_lagrangian_sum(_build(spec.k, False))
    elif isinstance(spec, SymplecticL2Sum):
        body = make_symplectic_l2_sum(_build(spec.left, True), _build(spec.right, True))
    elif isinstance(spec, LinearImage):
        body = make_linear_image(_build(spec.inner, phase_space), spec.matrix)
    elif isinstance(spec, PatchedSelfPolar):
        body = make_patched_selfpolar(spec.n, spec.epsilon, spec.delta, spec.seed)
    elif isinstance(spec, NumericPolar):
        body = numeric_polar(_build(spec.inner, phase_space))
    else:
        raise InvalidInputError(f"not a BodySpec: {spec!r}")
    return dataclasses.replace(body, spec=spec)


def realize(spec: BodySpec, tolerances: Optional[Dict[str, Any]] = None) -> ConvexBody:
    """
    Build the body a spec describes; deterministic given the spec.

    Args:
        spec (BodySpec): Parsed spec.
        tolerances (dict, optional): ToleranceConfig field overrides.

    Raises:
        InvalidInputError: the result is not a body in an even dimension >= 2.
    """
    body = _build(spec, True)
    if not body.is_phase_space:
        raise InvalidInputError(f"realized body has dimension {body.dim}; phase space needs an even dimension >= 2")
    if tolerances:
        body = body.with_tolerances(body.tolerances.with_overrides(**tolerances))
    return dataclasses.replace(body, meta=dict(body.meta, spec_hash=spec_hash(spec)))


def normalize_self_polar(body: ConvexBody, n_samples: int = 64, seed: int = 0) -> ConvexBody:
    """
    Rescale a body with X = alpha X^omega to the self-polar (1/sqrt(alpha)) X.

    Returns:
        ConvexBody: the linear image, with meta['alpha'] and meta['constancy_defect'].

    Raises:
        GateFailureError: ||f(x)||_X is not constant, so no rescaling is self-polar.
    """
    report = self_polarity_defect(body, n_samples, seed)
    tol = 1e-5 if is_numeric_body(body) else 1e-8
    if report.constancy_defect * report.alpha > tol:
        raise GateFailureError(
            f"||f(x)||_X is not constant on '{body.label}'; no multiple of it is self-polar",
            {'constancy_defect': report.constancy_defect, 'alpha': report.alpha},
        )
    scale = 1.0 / np.sqrt(report.alpha)
    matrix = scale * np.eye(body.dim)
    normalized = make_linear_image(body, matrix)
    meta = dict(normalized.meta, alpha=report.alpha, constancy_defect=report.constancy_defect)
    spec = None
    if body.spec is not None:
        rows = tuple(tuple(float(v) for v in row) for row in matrix)
        spec = LinearImage(inner=body.spec, matrix=rows)
    return dataclasses.replace(normalized, meta=meta, spec=spec)
