"""
Standard symplectic structure and the characteristic map of a body.

Convention, fixed everywhere: coordinates (x_1..x_n, y_1..y_n),
J(x, y) = (-y, x) and omega(u, v) = <Ju, v>. With it the characteristic map
is f(x) = J grad G(x), and omega(x, f(x)) = <grad G(x), x> = 1 on the boundary
by Euler's identity. The symplectic polar has gauge y -> h_X(-Jy).
"""

from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy.linalg import expm

from .convex_core import (
    BoundaryPoint,
    ConvexBody,
    as_boundary_point,
    as_vector,
    boundary_project,
    gate_tolerance,
    gauge,
    gauge_batch,
    gauge_gradient,
    gauge_hessian,
    require_smoothness,
    sample_boundary,
    support,
    tangent_frame,
)
from .errors import InvalidInputError, NumericFailureError
from .reports import Report

# Radial reprojection larger than this rejects the flow step
FLOW_REPROJECTION_LIMIT = 1e-3

# Difference step (relative to |x|) for the solver Jacobian of C1 bodies
C1_JACOBIAN_STEP = 1e-5


def _half(dim: int) -> int:
    if dim < 2 or dim % 2:
        raise InvalidInputError(f"symplectic operations need an even dimension >= 2, got {dim}")
    return dim // 2


def j_matrix(dim: int) -> np.ndarray:
    n = _half(dim)
    jm = np.zeros((dim, dim))
    jm[:n, n:] = -np.eye(n)
    jm[n:, :n] = np.eye(n)
    return jm


def apply_J(v: Any) -> np.ndarray:
    """(x, y) -> (-y, x)"""
    v = as_vector(v)
    n = _half(v.shape[0])
    return np.concatenate([-v[n:], v[:n]])


def omega(u: Any, v: Any) -> float:
    """Standard symplectic form <Ju, v>"""
    u = as_vector(u, name='u')
    v = as_vector(v, name='v')
    if u.shape != v.shape:
        raise InvalidInputError(f"dimension mismatch: {u.shape[0]} vs {v.shape[0]}")
    return float(apply_J(u) @ v)


@dataclass(frozen=True)
class SymplecticStructure:
    """R^{2n} with the standard form in the fixed block layout"""

    n: int

    def __post_init__(self):
        if self.n < 1:
            raise InvalidInputError(f"half-dimension must be positive, got {self.n}")

    @property
    def dim(self) -> int:
        return 2 * self.n

    @property
    def matrix(self) -> np.ndarray:
        return j_matrix(self.dim)

    def J(self, v: Any) -> np.ndarray:
        return apply_J(as_vector(v, self.dim))

    def omega(self, u: Any, v: Any) -> float:
        return omega(as_vector(u, self.dim, 'u'), as_vector(v, self.dim, 'v'))


@dataclass(frozen=True)
class CharFlowTrace(Report):
    times: np.ndarray
    points: np.ndarray
    method: str
    max_gauge_defect: float


@dataclass(frozen=True)
class InvolutionCheck(Report):
    defect: float
    gauge_defect: float


@dataclass(frozen=True)
class PositivityReport(Report):
    min_value: float
    n_samples: int
    seed: int
    passed: bool


@dataclass(frozen=True)
class CurvatureReport(Report):
    min_curvature: float
    max_curvature: float
    n_samples: int
    passed: bool


@dataclass(frozen=True)
class SelfPolarityReport(Report):
    defect: float
    alpha: float
    constancy_defect: float
    n_samples: int
    passed: bool


def char_point(body: ConvexBody, x: Any) -> BoundaryPoint:
    """Boundary point with f(x) filled in"""
    point = as_boundary_point(body, x)
    if point.fvec is not None:
        return point
    return point.with_fvec(char_map(body, point))


def char_map(body: ConvexBody, x: Any) -> np.ndarray:
    """
    Characteristic map f(x) = J grad G(x).

    Args:
        body (ConvexBody): Body in R^{2n}.
        x (BoundaryPoint or array): Point with G(x) = 1.

    Returns:
        ndarray: f(x), spanning the characteristic line with omega(x, f(x)) = 1.

    Raises:
        NumericFailureError: the normalization omega(x, f(x)) = 1 fails.
    """
    point = as_boundary_point(body, x)
    if point.fvec is not None:
        return point.fvec
    fvec = apply_J(point.grad)
    pairing = omega(point.x, fvec)
    if abs(pairing - 1.0) > max(body.tolerances.eq_tol, 1e-9):
        raise NumericFailureError(
            f"omega(x, f(x)) = {pairing:.17g} at {point.x.tolist()}",
            best_value=pairing, residual=abs(pairing - 1.0),
        )
    return fvec


def check_involution(body: ConvexBody, x: Any) -> InvolutionCheck:
    """
    Defect |f(f(x)) + x| of the involution identity.

    When f(x) leaves the boundary the gauge defect is reported alongside; the
    gradient is 0-homogeneous so f(f(x)) is still well defined.
    """
    point = as_boundary_point(body, x)
    fx = apply_J(point.grad)
    gauge_defect = abs(gauge(body, fx) - 1.0)
    ffx = apply_J(gauge_gradient(body, fx))
    return InvolutionCheck(defect=float(np.linalg.norm(ffx + point.x)), gauge_defect=gauge_defect)


def char_map_derivative(body: ConvexBody, x: Any, xi: Any) -> np.ndarray:
    """
    Directional derivative of f along a tangent vector: J Hess G(x) xi.

    Raises:
        SmoothnessError: body is only C1.
        InvalidInputError: xi is not tangent at x.
    """
    require_smoothness(body, 'C2', 'char_map_derivative')
    point = as_boundary_point(body, x)
    xi = as_vector(xi, body.dim, 'xi')
    normal_part = abs(float(xi @ point.normal))
    if normal_part > 1e-8 * max(float(np.linalg.norm(xi)), 1.0):
        raise InvalidInputError(f"xi is not tangent at x: normal component {normal_part:.3e}")
    return apply_J(gauge_hessian(body, point.x) @ xi)


def char_jacobian(body: ConvexBody, x: Any) -> np.ndarray:
    """
    Matrix of Df at x, for use as a solver Jacobian.

    J Hess G for C2 bodies; central differences of f for C1 bodies.
    """
    x = as_vector(x, body.dim, 'x')
    jm = j_matrix(body.dim)
    if body.smooth_at_least('C2'):
        return jm @ gauge_hessian(body, x)
    h = C1_JACOBIAN_STEP * float(np.linalg.norm(x))
    jac = np.empty((body.dim, body.dim))
    for i in range(body.dim):
        step = np.zeros(body.dim)
        step[i] = h
        jac[:, i] = jm @ (gauge_gradient(body, x + step) - gauge_gradient(body, x - step)) / (2.0 * h)
    return jac


def _random_tangent(body: ConvexBody, point: BoundaryPoint, rng: np.random.Generator) -> np.ndarray:
    xi = rng.standard_normal(body.dim)
    xi -= float(xi @ point.normal) * point.normal
    return xi / np.linalg.norm(xi)


def positivity_scan(body: ConvexBody, n_samples: int, seed: int) -> PositivityReport:
    """Minimum of omega(xi, D_xi f) over random boundary points and unit tangents"""
    require_smoothness(body, 'C2', 'positivity_scan')
    rng = np.random.default_rng(seed)
    worst = np.inf
    for _ in range(n_samples):
        point = boundary_project(body, rng.standard_normal(body.dim))
        xi = _random_tangent(body, point, rng)
        worst = min(worst, omega(xi, char_map_derivative(body, point, xi)))
    return PositivityReport(min_value=float(worst), n_samples=n_samples, seed=seed, passed=worst > 0.0)


def curvature_scan(body: ConvexBody, n_samples: int, seed: int) -> CurvatureReport:
    """Extreme principal curvatures of the boundary over random points"""
    require_smoothness(body, 'C2', 'curvature_scan')
    rng = np.random.default_rng(seed)
    lo, hi = np.inf, -np.inf
    for _ in range(n_samples):
        point = boundary_project(body, rng.standard_normal(body.dim))
        frame = tangent_frame(body, point)
        shape = frame.T @ gauge_hessian(body, point.x) @ frame / np.linalg.norm(point.grad)
        eig = np.linalg.eigvalsh(0.5 * (shape + shape.T))
        lo = min(lo, float(eig[0]))
        hi = max(hi, float(eig[-1]))
    return CurvatureReport(min_curvature=lo, max_curvature=hi, n_samples=n_samples, passed=lo > 0.0)


def symplectic_polar_gauge(body: ConvexBody, y: Any) -> float:
    """Gauge of X^omega = J X°, i.e. h_X(-Jy)"""
    y = as_vector(y, body.dim, 'y')
    if not np.any(y):
        return 0.0
    return support(body, -apply_J(y))


def self_polarity_defect(body: ConvexBody, n_samples: int, seed: int) -> SelfPolarityReport:
    """
    Self-polarity detector.

    defect: max |gauge of X^omega - 1| on boundary samples.
    alpha: mean of 1/||f(x)||_X; when ||f(x)||_X is constant, X = alpha X^omega.
    constancy_defect: max deviation of ||f(x)||_X from its mean.
    """
    points = sample_boundary(body, n_samples, seed)
    deviations = np.empty(len(points))
    f_gauges = np.empty(len(points))
    for i, point in enumerate(points):
        deviations[i] = abs(symplectic_polar_gauge(body, point.x) - 1.0)
        f_gauges[i] = gauge(body, apply_J(point.grad))
    defect = float(np.max(deviations))
    mean_f = float(np.mean(f_gauges))
    return SelfPolarityReport(
        defect=defect,
        alpha=float(np.mean(1.0 / f_gauges)),
        constancy_defect=float(np.max(np.abs(f_gauges - mean_f))),
        n_samples=n_samples,
        passed=defect <= gate_tolerance(body, 1e-8, 1e-5),
    )


def char_flow(body: ConvexBody, x0: Any, t_max: float, steps: int) -> CharFlowTrace:
    """
    Integrate x' = f(x) by RK4 with radial reprojection after every step.

    Raises:
        NumericFailureError: a step needs a reprojection larger than 1e-3.
    """
    require_smoothness(body, 'C2', 'char_flow')
    if steps < 1:
        raise InvalidInputError(f"steps must be positive, got {steps}")
    if not np.isfinite(t_max) or t_max == 0.0:
        raise InvalidInputError(f"t_max must be finite and nonzero, got {t_max}")
    point = as_boundary_point(body, x0)
    h = float(t_max) / steps

    def rhs(z):
        return apply_J(gauge_gradient(body, z))

    x = point.x.copy()
    points = np.empty((steps + 1, body.dim))
    points[0] = x
    for k in range(steps):
        k1 = rhs(x)
        k2 = rhs(x + 0.5 * h * k1)
        k3 = rhs(x + 0.5 * h * k2)
        k4 = rhs(x + h * k3)
        stepped = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        projected = stepped / gauge(body, stepped)
        jump = float(np.linalg.norm(projected - stepped))
        if jump > FLOW_REPROJECTION_LIMIT:
            raise NumericFailureError(
                f"flow step {k} rejected: reprojection moved the point by {jump:.3e}",
                residual=jump, iterations=k, details={'step_size': h},
            )
        x = projected
        points[k + 1] = x
    defect = float(np.max(np.abs(gauge_batch(body, points) - 1.0)))
    return CharFlowTrace(times=h * np.arange(steps + 1), points=points, method='RK4+reproject',
                         max_gauge_defect=defect)


def is_symplectic_matrix(matrix: Any, tol: float = 1e-10) -> bool:
    """L^T J L = J entrywise within tol"""
    mat = np.asarray(matrix, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        return False
    if mat.shape[0] < 2 or mat.shape[0] % 2:
        return False
    jm = j_matrix(mat.shape[0])
    return bool(np.max(np.abs(mat.T @ jm @ mat - jm)) <= tol)


def random_symplectic_matrix(n: int, seed: int, scale: float = 0.5) -> np.ndarray:
    """
    Random linear symplectomorphism of R^{2n}: expm(J S) with S symmetric.

    The scale is halved on validation failure, up to eight times.
    """
    rng = np.random.default_rng(seed)
    dim = 2 * n
    jm = j_matrix(dim)
    sym = rng.standard_normal((dim, dim))
    sym = 0.5 * (sym + sym.T)
    for _ in range(8):
        candidate = expm(jm @ (scale * sym))
        if is_symplectic_matrix(candidate, 1e-10):
            return candidate
        scale *= 0.5
    raise NumericFailureError(f"could not generate a symplectic matrix in dimension {dim}")
