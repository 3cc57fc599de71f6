"""
The invariant hypersurface Y = {x + f(x) : x in the boundary} and its checks.

Y is made of the 4-periodic orbits: T(x + f(x)) = f(x) - x, which is again of
the form y + f(y) with y = f(x). The planar area construction inverts the
picture: the boundary is the set of midpoints of chords of Y cutting off a
fixed area (A - 4)/4.
"""

from dataclasses import dataclass
from typing import Any, Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import brentq
from scipy.spatial import cKDTree

from .billiard import outer_map
from .convex_core import (
    ConvexBody,
    as_boundary_point,
    as_vector,
    boundary_project,
    gauge_gradient,
    sample_boundary,
    tangent_frame,
)
from .errors import InvalidInputError, NumericFailureError
from .measure import shoelace_area, signed_area
from .reports import Report
from .symplectic import apply_J, char_flow, char_jacobian, char_map

# Two images closer than this with distinct sources count as a collision
COLLISION_TOL = 1e-9


@dataclass(frozen=True)
class HypersurfaceSample(Report):
    """
    Boundary samples x and their images y = x + f(x), in boundary sampling order.

    In the plane ``order`` sorts the images by polar angle and ``angles``/``radii``
    hold the sorted polar coordinates.
    """

    sources: np.ndarray
    images: np.ndarray
    dim: int
    order: Optional[np.ndarray] = None
    angles: Optional[np.ndarray] = None
    radii: Optional[np.ndarray] = None

    @property
    def n_samples(self) -> int:
        return int(self.sources.shape[0])


@dataclass(frozen=True)
class PlanarCurve(Report):
    vertices: np.ndarray
    closed: bool = True


@dataclass(frozen=True)
class StarShapeReport(Report):
    dim: int
    n_samples: int
    passed: bool
    monotonicity_defect: Optional[float] = None
    winding: Optional[float] = None
    min_jacobian_sv: Optional[float] = None
    ray_multiplicity: Optional[int] = None


@dataclass(frozen=True)
class LineCheckReport(Report):
    count: int
    crossings: List[float]
    max_offset: float
    passed: bool


@dataclass(frozen=True)
class PlanarityReport(Report):
    gamma_defect: float
    delta_char_defect: float
    steps: int
    t_max: float


@dataclass(frozen=True)
class InjectivityReport(Report):
    min_ratio: float
    min_image_separation: float
    collisions: int
    n_samples: int
    passed: bool


def _polar(points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    return np.arctan2(points[:, 1], points[:, 0]), np.linalg.norm(points, axis=1)


def sample_Y(body: ConvexBody, n_samples: int, seed: Optional[int] = None) -> HypersurfaceSample:
    """Map boundary samples through g(x) = x + f(x); planar samples use the angle grid"""
    points = sample_boundary(body, n_samples, seed)
    sources = np.array([p.x for p in points])
    images = np.array([p.x + char_map(body, p) for p in points])
    if body.dim != 2:
        return HypersurfaceSample(sources=sources, images=images, dim=body.dim)
    angles, radii = _polar(images)
    order = np.argsort(angles, kind='stable')
    return HypersurfaceSample(sources=sources, images=images, dim=2, order=order,
                              angles=angles[order], radii=radii[order])


def invariance_defect(body: ConvexBody, x: Any) -> float:
    """|T(x + f(x)) - (f(x) - x)|"""
    point = as_boundary_point(body, x)
    fvec = char_map(body, point)
    return float(np.linalg.norm(outer_map(body, point.x + fvec) - (fvec - point.x)))


def radial_function_2d(sample: HypersurfaceSample, theta: Any) -> Any:
    """
    Radius of the sampled planar Y in direction theta.

    The sampled curve is treated as the polygon through the angle-sorted images;
    the ray is intersected with the edge that brackets its angle.

    Raises:
        InvalidInputError: not planar, or the sorted angles repeat (not star-shaped).
    """
    if sample.dim != 2 or sample.angles is None:
        raise InvalidInputError("radial_function_2d needs a planar hypersurface sample")
    angles = sample.angles
    if not np.all(np.diff(angles) > 0.0):
        raise InvalidInputError("Y sample is not star-shaped: polar angles are not strictly monotone")
    vertices = sample.images[sample.order]
    theta = np.asarray(theta, dtype=float)
    wrapped = np.mod(theta - angles[0], 2.0 * np.pi) + angles[0]
    k = np.searchsorted(angles, wrapped, side='right') - 1
    k = np.clip(k, 0, len(angles) - 1)
    p = vertices[k]
    q = vertices[(k + 1) % len(angles)]
    edge = q - p
    direction = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    cross_pe = p[..., 0] * edge[..., 1] - p[..., 1] * edge[..., 0]
    cross_de = direction[..., 0] * edge[..., 1] - direction[..., 1] * edge[..., 0]
    radius = cross_pe / cross_de
    return float(radius) if radius.ndim == 0 else radius


def _y_newton(body: ConvexBody, v_hat: np.ndarray, x: np.ndarray) -> Tuple[float, np.ndarray, float]:
    """Damped Newton on (x + f(x) - s v, G(x) - 1) in the unknowns (x, s)"""
    tol = body.tolerances
    dim = body.dim
    eye = np.eye(dim)

    def residual(x_, s_):
        fvec = apply_J(gauge_gradient(body, x_))
        r = np.concatenate([x_ + fvec - s_ * v_hat, [float(body.gauge(x_)) - 1.0]])
        return float(np.linalg.norm(r)), r, fvec

    s = float((x + apply_J(gauge_gradient(body, x))) @ v_hat)
    norm, res, fvec = residual(x, s)
    for _ in range(tol.newton_max_iter):
        if norm <= tol.newton_tol:
            break
        jac = np.zeros((dim + 1, dim + 1))
        jac[:dim, :dim] = eye + char_jacobian(body, x)
        jac[:dim, dim] = -v_hat
        jac[dim, :dim] = gauge_gradient(body, x)
        try:
            delta = np.linalg.solve(jac, -res)
        except np.linalg.LinAlgError:
            break
        scale = 1.0
        improved = False
        for _ in range(30):
            x_new = x + scale * delta[:dim]
            s_new = s + scale * delta[dim]
            if np.any(x_new):
                new_norm, new_res, new_f = residual(x_new, s_new)
                if new_norm < norm:
                    improved = True
                    break
            scale *= 0.5
        if not improved:
            break
        x, s, norm, res, fvec = x_new, s_new, new_norm, new_res, new_f
    return s, x, norm


def y_radius(body: ConvexBody, v: Any, x_guess: Optional[Any] = None) -> Tuple[float, np.ndarray]:
    """
    Exact radial function of Y: s > 0 and x on the boundary with x + f(x) = s v/|v|.

    The default start boundary_project(v - Jv) is exact for the ball.

    Raises:
        NumericFailureError: Newton did not reach the stall floor.
    """
    v = as_vector(v, body.dim, 'v')
    nv = float(np.linalg.norm(v))
    if nv == 0.0:
        raise InvalidInputError("y_radius needs a nonzero direction")
    v_hat = v / nv
    if x_guess is None:
        start = boundary_project(body, v_hat - apply_J(v_hat)).x
    else:
        start = boundary_project(body, x_guess).x
    s, x, norm = _y_newton(body, v_hat, start)
    floor = max(body.tolerances.newton_tol, 1e-2 * body.tolerances.eq_tol)
    if not (s > 0.0 and norm <= floor):
        raise NumericFailureError(
            f"radial solve on Y failed in direction {v_hat.tolist()}",
            best_value=s, residual=norm,
        )
    return float(s), x


def _unwrapped_increments(points: np.ndarray) -> np.ndarray:
    angles, _ = _polar(points)
    closed = np.append(angles, angles[0])
    return np.diff(np.unwrap(closed))


def _ray_solutions(body: ConvexBody, v_hat: np.ndarray, rng: np.random.Generator,
                   n_starts: int) -> List[float]:
    """Radii found from the ball-exact start and random boundary starts"""
    starts = [boundary_project(body, v_hat - apply_J(v_hat)).x]
    starts += [boundary_project(body, rng.standard_normal(body.dim)).x for _ in range(n_starts - 1)]
    floor = max(body.tolerances.newton_tol, 1e-2 * body.tolerances.eq_tol)
    radii = []
    for start in starts:
        s, _, norm = _y_newton(body, v_hat, start)
        if s > 0.0 and norm <= floor:
            radii.append(s)
    return radii


def _clusters(values: Sequence[float], tol: float) -> int:
    count = 0
    last = None
    for value in sorted(values):
        if last is None or value - last > tol:
            count += 1
        last = value
    return count


def star_shape_check(body: ConvexBody, n_samples: int, seed: int = 0, n_rays: int = 100) -> StarShapeReport:
    """
    Star-shapedness of Y about the origin.

    Plane: the polar angle of g(x(theta)) increases strictly along the boundary
    angle grid and winds once. Higher dimensions: the differential of g on the
    tangent space plus the radial direction stays nonsingular, and each random
    ray meets Y in one radius cluster across multistart solves.
    """
    if body.dim == 2:
        sample = sample_Y(body, n_samples, seed)
        increments = _unwrapped_increments(sample.images)
        winding = float(np.sum(increments))
        defect = float(max(0.0, -np.min(increments)))
        passed = bool(np.min(increments) > 0.0 and abs(winding - 2.0 * np.pi) < 1e-6)
        return StarShapeReport(dim=2, n_samples=n_samples, passed=passed,
                               monotonicity_defect=defect, winding=winding)

    rng = np.random.default_rng(seed)
    min_sv = np.inf
    for point in sample_boundary(body, n_samples, seed):
        frame = tangent_frame(body, point)
        pushed = (np.eye(body.dim) + char_jacobian(body, point.x)) @ frame
        image = point.x + char_map(body, point)
        columns = np.column_stack([pushed, image / np.linalg.norm(image)])
        min_sv = min(min_sv, float(np.linalg.svd(columns, compute_uv=False)[-1]))
    multiplicity = 0
    for _ in range(n_rays):
        v_hat = rng.standard_normal(body.dim)
        v_hat /= np.linalg.norm(v_hat)
        radii = _ray_solutions(body, v_hat, rng, body.dim + 1)
        multiplicity = max(multiplicity, _clusters(radii, 1e-6))
    return StarShapeReport(dim=body.dim, n_samples=n_samples, passed=bool(min_sv > 0.0 and multiplicity == 1),
                           min_jacobian_sv=min_sv, ray_multiplicity=multiplicity)


def radial_transversality(body: ConvexBody, x: Any) -> float:
    """
    |det| of the unit columns [dg(e_1) .. dg(e_{2n-1}), g(x)/|g(x)|] for a tangent frame e.

    1 for the ball, where g = Id + J is conformal; 0 means a radial ray is tangent to Y.
    """
    point = as_boundary_point(body, x)
    frame = tangent_frame(body, point)
    pushed = (np.eye(body.dim) + char_jacobian(body, point.x)) @ frame
    image = point.x + char_map(body, point)
    columns = np.column_stack([pushed, image])
    columns /= np.linalg.norm(columns, axis=0, keepdims=True)
    return float(abs(np.linalg.det(columns)))


def _refine_crossing(exact: Callable[[float], float], a: float, b: float, step: float) -> float:
    """brentq on the exact residual; the bracket is widened when the exact signs do not differ"""
    for _ in range(3):
        fa, fb = exact(a), exact(b)
        if fa == 0.0:
            return a
        if fb == 0.0:
            return b
        if fa * fb < 0.0:
            return float(brentq(exact, a, b, xtol=1e-13))
        # the grid sign change came from the sampled radius or a root on a grid point
        a, b = a - step, b + step
    return 0.5 * (a + b)


def line_two_point_check(body: ConvexBody, x: Any, t_range: Tuple[float, float] = (-3.0, 3.0),
                         resolution: int = 241, sample: Optional[HypersurfaceSample] = None) -> LineCheckReport:
    """
    Crossings of the characteristic line {x + t f(x)} with Y.

    Sign changes of |p(t)| - r_Y(p(t)) on a t grid, each refined by brentq on
    the exact radial function. The grid uses the sampled planar radius when a
    sample is given, the exact radius otherwise. Expected: two crossings at t = +-1.
    """
    point = as_boundary_point(body, x)
    fvec = char_map(body, point)
    if resolution < 3:
        raise InvalidInputError(f"resolution must be at least 3, got {resolution}")

    def exact(t):
        p = point.x + t * fvec
        return float(np.linalg.norm(p)) - y_radius(body, p)[0]

    grid = np.linspace(t_range[0], t_range[1], resolution)
    lines = point.x[None, :] + grid[:, None] * fvec[None, :]
    if sample is not None and body.dim == 2:
        theta = np.arctan2(lines[:, 1], lines[:, 0])
        values = np.linalg.norm(lines, axis=1) - radial_function_2d(sample, theta)
    else:
        values = np.array([exact(t) for t in grid])

    step = float(grid[1] - grid[0])
    crossings: List[float] = []
    for k in range(resolution - 1):
        if values[k] == 0.0:
            root = float(grid[k])
        elif values[k] * values[k + 1] < 0.0:
            root = _refine_crossing(exact, float(grid[k]), float(grid[k + 1]), step)
        else:
            continue
        if not crossings or abs(root - crossings[-1]) > 1e-9:
            crossings.append(root)
    expected = np.array([-1.0, 1.0])
    if len(crossings) == 2:
        offset = float(np.max(np.abs(np.sort(crossings) - expected)))
    else:
        offset = np.inf
    return LineCheckReport(count=len(crossings), crossings=crossings, max_offset=offset,
                           passed=len(crossings) == 2 and offset <= 1e-6)


def _line_angle(a: np.ndarray, b: np.ndarray) -> float:
    """Unsigned angle between the lines spanned by a and b"""
    a_hat = a / np.linalg.norm(a)
    b_hat = b / np.linalg.norm(b)
    cos = abs(float(a_hat @ b_hat))
    sin = float(np.linalg.norm(a_hat - float(a_hat @ b_hat) * b_hat))
    return float(np.arctan2(sin, cos))


def planarity_defect(body: ConvexBody, x0: Any, t_max: float, steps: int) -> PlanarityReport:
    """
    Planarity of a characteristic and whether its f-image is characteristic.

    gamma_defect: max distance of gamma(t) from span{gamma(0), f(gamma(0))}.
    delta_char_defect: max angle between d/dt f(gamma(t)) = Df f and f(f(gamma(t))).
    """
    trace = char_flow(body, x0, t_max, steps)
    start = trace.points[0]
    basis, _ = np.linalg.qr(np.column_stack([start, apply_J(gauge_gradient(body, start))]))
    gamma_defect = 0.0
    delta_defect = 0.0
    for p in trace.points:
        gamma_defect = max(gamma_defect, float(np.linalg.norm(p - basis @ (basis.T @ p))))
        fvec = apply_J(gauge_gradient(body, p))
        velocity = char_jacobian(body, p) @ fvec
        delta_defect = max(delta_defect, _line_angle(velocity, apply_J(gauge_gradient(body, fvec))))
    return PlanarityReport(gamma_defect=gamma_defect, delta_char_defect=delta_defect,
                           steps=steps, t_max=float(t_max))


def char_image_defect(body: ConvexBody, x: Any, sign: int = 1) -> float:
    """
    Angle between d psi(f(x)) and the characteristic direction of Y at psi(x), psi = Id + sign f.

    The normal of Y is the null space of d psi(T_x), the characteristic
    direction is J times that normal. Zero for linear images of the ball.
    """
    if sign not in (1, -1):
        raise InvalidInputError(f"sign must be +1 or -1, got {sign}")
    point = as_boundary_point(body, x)
    fvec = char_map(body, point)
    dpsi = np.eye(body.dim) + sign * char_jacobian(body, point.x)
    pushed = dpsi @ tangent_frame(body, point)
    normal = null_space(pushed.T)
    if normal.shape[1] != 1:
        raise NumericFailureError(f"Y is degenerate at the image of {point.x.tolist()}")
    return _line_angle(dpsi @ fvec, apply_J(normal[:, 0]))


def injectivity_check(sample: HypersurfaceSample) -> InjectivityReport:
    """Nearest-neighbour distortion of g and image collisions, via KD-trees"""
    sources, images = sample.sources, sample.images
    source_tree = cKDTree(sources)
    dist, idx = source_tree.query(sources, k=2)
    source_gap = dist[:, 1]
    image_gap = np.linalg.norm(images - images[idx[:, 1]], axis=1)
    ratios = image_gap[source_gap > 0.0] / source_gap[source_gap > 0.0]
    image_tree = cKDTree(images)
    image_dist, _ = image_tree.query(images, k=2)
    collisions = sum(1 for a, b in image_tree.query_pairs(COLLISION_TOL)
                     if np.linalg.norm(sources[a] - sources[b]) > COLLISION_TOL)
    min_ratio = float(np.min(ratios)) if ratios.size else 0.0
    return InjectivityReport(min_ratio=min_ratio, min_image_separation=float(np.min(image_dist[:, 1])),
                             collisions=collisions, n_samples=sample.n_samples,
                             passed=collisions == 0 and min_ratio > 0.0)


def y_grid_distance(sample: HypersurfaceSample, p: Any) -> float:
    """Distance from p to the nearest sampled point of Y"""
    p = as_vector(p, sample.dim, 'p')
    distance, _ = cKDTree(sample.images).query(p)
    return float(distance)


def _check_star_curve(vertices: np.ndarray) -> np.ndarray:
    """Positively oriented copy of a curve that winds once around the origin with monotone angle"""
    if np.any(np.linalg.norm(vertices, axis=1) == 0.0):
        raise InvalidInputError("curve passes through the origin")
    increments = _unwrapped_increments(vertices)
    total = float(np.sum(increments))
    if abs(abs(total) - 2.0 * np.pi) > 1e-6:
        raise InvalidInputError(f"curve must wind once around the origin, winding angle {total:.6f}")
    if total < 0.0:
        vertices = vertices[::-1].copy()
        increments = _unwrapped_increments(vertices)
    if not np.all(increments > 0.0):
        raise InvalidInputError("curve is not star-shaped about the origin (polar angle is not monotone)")
    return vertices


def _constant_area_chords(vertices: np.ndarray, cut: float) -> np.ndarray:
    """
    For each vertex P_i the point Q_i ahead of it on the polygon such that the
    chord [P_i, Q_i] cuts off area ``cut``.

    With prefix sums C_k of cross(P_j, P_{j+1}), the cut area with Q on edge m,
    Q = P_m + l d, is linear in l:
        2 area = C_m - C_i + cross(P_m, P_i) + l cross(P_m - P_i, d).
    The edge index is advanced monotonically (two pointers); when the
    monotone sweep breaks, that vertex falls back to a scan over all edges.
    """
    n = len(vertices)
    doubled = np.vstack([vertices, vertices, vertices[:1]])
    crosses = doubled[:-1, 0] * doubled[1:, 1] - doubled[:-1, 1] * doubled[1:, 0]
    prefix = np.concatenate([[0.0], np.cumsum(crosses)])
    target = 2.0 * cut

    def cross(a, b):
        return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]

    def full_area(i, m):
        # twice the area cut when Q = P_{m+1}
        return prefix[m + 1] - prefix[i] + cross(doubled[m + 1], doubled[i])

    def solve_on_edge(i, m):
        d = doubled[m + 1] - doubled[m]
        base = prefix[m] - prefix[i] + cross(doubled[m], doubled[i])
        slope = cross(doubled[m] - doubled[i], d)
        if slope <= 0.0:
            return None
        lam = (target - base) / slope
        if -1e-12 <= lam <= 1.0 + 1e-12:
            return doubled[m] + min(max(lam, 0.0), 1.0) * d
        return None

    def scan(i):
        m = np.arange(i + 1, i + n)
        d = doubled[m + 1] - doubled[m]
        base = prefix[m] - prefix[i] + cross(doubled[m], doubled[i])
        slope = cross(doubled[m] - doubled[i], d)
        with np.errstate(divide='ignore', invalid='ignore'):
            lam = (target - base) / slope
        ok = np.nonzero((slope > 0.0) & (lam >= 0.0) & (lam <= 1.0))[0]
        if ok.size == 0:
            raise InvalidInputError(f"no chord from vertex {i} cuts off area {cut:.6g}")
        k = ok[0]
        return doubled[m[k]] + lam[k] * d[k]

    chords = np.empty_like(vertices)
    m = 1
    for i in range(n):
        m = max(m, i + 1)
        while m < i + n - 1 and full_area(i, m) < target:
            m += 1
        q = solve_on_edge(i, m)
        chords[i] = q if q is not None else scan(i)
    return chords


def area_construction_2d(y_curve: Any) -> PlanarCurve:
    """
    Recover the boundary from Y as midpoints of constant-area chords.

    Args:
        y_curve (PlanarCurve or array): Closed curve star-shaped about the origin.

    Returns:
        PlanarCurve: positively oriented midpoint curve (y + z(y))/2.

    Raises:
        InvalidInputError: the curve is not star-shaped or encloses area <= 4.
    """
    vertices = np.asarray(getattr(y_curve, 'vertices', y_curve), dtype=float)
    if vertices.ndim != 2 or vertices.shape[1] != 2 or vertices.shape[0] < 3:
        raise InvalidInputError(f"expected at least 3 planar vertices, got shape {vertices.shape}")
    vertices = _check_star_curve(vertices)
    area = signed_area(vertices)
    if area <= 4.0:
        raise InvalidInputError(f"enclosed area {area:.17g} <= 4: segment area would be <= 0",
                                {'area': area})
    chords = _constant_area_chords(vertices, (area - 4.0) / 4.0)
    return PlanarCurve(vertices=0.5 * (vertices + chords), closed=True)


def area_ratio_2d(body: ConvexBody, n_samples: int) -> float:
    """Area bounded by Y over the area of X, both from the same boundary-angle grid"""
    if body.dim != 2:
        raise InvalidInputError(f"area_ratio_2d needs a planar body, got dimension {body.dim}")
    sample = sample_Y(body, n_samples)
    return shoelace_area(sample.images) / shoelace_area(sample.sources)


def _distance_to_polyline(points: np.ndarray, polyline: np.ndarray) -> np.ndarray:
    """Distance from each point to the closed polyline, checking both edges at the nearest vertex"""
    tree = cKDTree(polyline)
    _, idx = tree.query(points)
    n = len(polyline)
    best = np.full(len(points), np.inf)
    for shift in (-1, 0):
        a = polyline[(idx + shift) % n]
        b = polyline[(idx + shift + 1) % n]
        ab = b - a
        denom = np.maximum(np.sum(ab * ab, axis=1), 1e-300)
        lam = np.clip(np.sum((points - a) * ab, axis=1) / denom, 0.0, 1.0)
        proj = a + lam[:, None] * ab
        best = np.minimum(best, np.linalg.norm(points - proj, axis=1))
    return best


def hausdorff_distance(curve_a: Any, curve_b: Any) -> float:
    """Symmetric Hausdorff distance between two closed polylines"""
    a = np.asarray(getattr(curve_a, 'vertices', curve_a), dtype=float)
    b = np.asarray(getattr(curve_b, 'vertices', curve_b), dtype=float)
    return float(max(np.max(_distance_to_polyline(a, b)), np.max(_distance_to_polyline(b, a))))
