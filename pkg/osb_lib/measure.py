"""
Areas, volumes and the Mahler-type diagnostics.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Optional

import numpy as np

from .convex_core import ConvexBody, as_vector, boundary_array, gauge_batch, sample_directions
from .errors import GateFailureError, InvalidInputError
from .reports import Report
from .symplectic import omega

# Monte Carlo work is split into this many shards regardless of the thread count
MC_SHARDS = 16
MC_CHUNK = 65536


@dataclass(frozen=True)
class VolumeEstimate(Report):
    value: float
    stderr: float
    n_samples: int
    method: str
    seed: Optional[int] = None
    box_radius: Optional[float] = None


@dataclass(frozen=True)
class MahlerReport(Report):
    vol_estimate: float
    stderr: float
    bound: float
    margin: float
    flagged: bool
    note: str


@dataclass(frozen=True)
class VolumeRatioReport(Report):
    ratio: float
    stderr: float
    n_dirs: int
    seed: Optional[int]


def _vertices(curve: Any) -> np.ndarray:
    vertices = np.asarray(getattr(curve, 'vertices', curve), dtype=float)
    if vertices.ndim != 2 or vertices.shape[1] != 2 or vertices.shape[0] < 3:
        raise InvalidInputError(f"expected at least 3 planar vertices, got shape {vertices.shape}")
    return vertices


def signed_area(curve: Any) -> float:
    """Shoelace sum; positive for counter-clockwise vertex order"""
    v = _vertices(curve)
    nxt = np.roll(v, -1, axis=0)
    return 0.5 * float(np.sum(v[:, 0] * nxt[:, 1] - nxt[:, 0] * v[:, 1]))


def shoelace_area(curve: Any) -> float:
    """Enclosed area of a closed polygon (closing vertex implicit)"""
    return abs(signed_area(curve))


def symplectic_parallelogram_area(z1: Any, z2: Any, z3: Any, z4: Any, tol: float = 1e-9) -> float:
    """
    omega(z2 - z1, z4 - z1) for a parallelogram z1 z2 z3 z4.

    Raises:
        InvalidInputError: z1 + z3 != z2 + z4 beyond tol.
    """
    z1, z2, z3, z4 = (as_vector(z, name=f'z{i + 1}') for i, z in enumerate((z1, z2, z3, z4)))
    scale = max(1.0, *(float(np.linalg.norm(z)) for z in (z1, z2, z3, z4)))
    gap = float(np.linalg.norm(z1 + z3 - z2 - z4))
    if gap > tol * scale:
        raise InvalidInputError(f"not a parallelogram: |z1 + z3 - z2 - z4| = {gap:.3e}")
    return omega(z2 - z1, z4 - z1)


def bounding_radius(body: ConvexBody, seed: int = 0, n_check: int = 256) -> float:
    """
    1.5 times the largest coordinate-axis radius, checked against boundary samples.

    Raises:
        GateFailureError: a sampled boundary point escapes the box.
    """
    axes = np.eye(body.dim)
    radius = 1.5 * float(np.max(1.0 / gauge_batch(body, axes)))
    escape = float(np.max(np.abs(boundary_array(body, n_check, seed))))
    if escape > radius:
        raise GateFailureError(
            f"boundary of '{body.label}' leaves the bounding box",
            {'radius': radius, 'max_coordinate': escape},
        )
    return radius


def _count_hits(body: ConvexBody, seed_seq: np.random.SeedSequence, count: int, radius: float) -> int:
    rng = np.random.Generator(np.random.Philox(seed_seq))
    hits = 0
    remaining = count
    while remaining > 0:
        size = min(remaining, MC_CHUNK)
        points = rng.uniform(-radius, radius, (size, body.dim))
        hits += int(np.count_nonzero(gauge_batch(body, points) <= 1.0))
        remaining -= size
    return hits


def mc_volume(body: ConvexBody, n_samples: int, seed: int, threads: int = 1) -> VolumeEstimate:
    """
    Hit-fraction Monte Carlo volume in a verified bounding box.

    Shards get independent Philox streams from SeedSequence(seed).spawn and are
    merged in shard order, so the estimate does not depend on ``threads``.
    """
    if n_samples < 1:
        raise InvalidInputError(f"n_samples must be positive, got {n_samples}")
    if threads < 1:
        raise InvalidInputError(f"threads must be positive, got {threads}")
    radius = bounding_radius(body, seed)
    children = np.random.SeedSequence(seed).spawn(MC_SHARDS)
    counts = [n_samples // MC_SHARDS + (1 if k < n_samples % MC_SHARDS else 0) for k in range(MC_SHARDS)]
    with ThreadPoolExecutor(max_workers=threads) as executor:
        hits = list(executor.map(lambda k: _count_hits(body, children[k], counts[k], radius), range(MC_SHARDS)))
    fraction = sum(hits) / n_samples
    box = (2.0 * radius) ** body.dim
    return VolumeEstimate(value=box * fraction,
                          stderr=box * math.sqrt(fraction * (1.0 - fraction) / n_samples),
                          n_samples=n_samples, method='monte_carlo', seed=seed, box_radius=radius)


def mahler_bound(n: int) -> float:
    """Conjectured lower bound 2^n / n! for self-polar bodies in R^{2n}"""
    return 2.0 ** n / math.factorial(n)


def mahler_diagnostic(body: ConvexBody, n_samples: int = 200000, seed: int = 0, threads: int = 1,
                      estimate: Optional[VolumeEstimate] = None) -> MahlerReport:
    """Volume against 2^n/n!, margin in standard errors; advisory only"""
    if estimate is None:
        estimate = mc_volume(body, n_samples, seed, threads)
    bound = mahler_bound(body.half_dim)
    gap = estimate.value - bound
    margin = gap / estimate.stderr if estimate.stderr > 0.0 else math.copysign(math.inf, gap)
    flagged = margin < 0.0
    note = 'conjecture-violating: check construction' if flagged else 'consistent with the conjectured bound'
    return MahlerReport(vol_estimate=estimate.value, stderr=estimate.stderr, bound=bound,
                        margin=margin, flagged=flagged, note=note)


def radial_volume_ratio(body: ConvexBody, n_dirs: int, seed: int) -> VolumeRatioReport:
    """
    vol(region bounded by Y) / vol(X) from one set of directions.

    Both regions are star-shaped, so each volume is vol(B) E[r(u)^{2n}]; r_X = 1/G(u)
    and r_Y comes from the exact radial solver. In the plane the directions are
    a uniform angle grid and the ratio is a quadrature.
    """
    from .hypersurface import y_radius

    dirs = sample_directions(body.dim, n_dirs, seed)
    r_x = 1.0 / gauge_batch(body, dirs)
    r_y = np.array([y_radius(body, u)[0] for u in dirs])
    a = r_y ** body.dim
    b = r_x ** body.dim
    ratio = float(np.mean(a) / np.mean(b))
    if n_dirs > 1:
        cov = np.cov(a, b)
        variance = (cov[0, 0] - 2.0 * ratio * cov[0, 1] + ratio ** 2 * cov[1, 1]) / (n_dirs * np.mean(b) ** 2)
        stderr = float(np.sqrt(max(variance, 0.0)))
    else:
        stderr = math.inf
    return VolumeRatioReport(ratio=ratio, stderr=stderr, n_dirs=n_dirs, seed=seed)
