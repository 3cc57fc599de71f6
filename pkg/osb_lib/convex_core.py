"""
Convex core for the outer billiard library

Gauge, gradient, Hessian and support-function primitives for centrally
symmetric convex bodies given by evaluators, plus boundary sampling and the
convexity and invariant probes every constructed body must pass.
"""

import dataclasses
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy.linalg import null_space

from .errors import (
    DegenerateBoundaryError,
    InvalidInputError,
    NumericFailureError,
    SingularPointError,
    SmoothnessError,
)
from .reports import Report

SMOOTHNESS_ORDER = {'C1': 1, 'C2': 2, 'Cinf': 3}

# Stalled Newton polish is still accepted below this KKT residual
SUPPORT_NOISE_FLOOR = 1e-9


@dataclass(frozen=True)
class ToleranceConfig:
    """Numeric thresholds shared by every operation on a body"""

    eq_tol: float = 1e-9
    newton_tol: float = 1e-12
    newton_max_iter: int = 50
    fd_step: float = 1e-6
    hess_step: float = 1e-4

    def __post_init__(self):
        for name in ('eq_tol', 'newton_tol', 'fd_step', 'hess_step'):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and np.isfinite(value) and value > 0):
                raise InvalidInputError(f"tolerance {name} must be positive, got {value!r}")
        if int(self.newton_max_iter) < 1:
            raise InvalidInputError(f"newton_max_iter must be positive, got {self.newton_max_iter!r}")

    @classmethod
    def analytic(cls) -> 'ToleranceConfig':
        return cls()

    @classmethod
    def numeric(cls) -> 'ToleranceConfig':
        return cls(eq_tol=1e-6)

    def with_overrides(self, **overrides) -> 'ToleranceConfig':
        clean = {k: v for k, v in overrides.items() if v is not None}
        if not clean:
            return self
        if 'newton_max_iter' in clean:
            clean['newton_max_iter'] = int(clean['newton_max_iter'])
        return dataclasses.replace(self, **clean)

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)


@dataclass(frozen=True, eq=False)
class ConvexBody:
    """
    Evaluator bundle for a centrally symmetric convex body containing 0.

    ``gauge`` accepts a vector or, when ``batched`` is set, an (N, dim) array.
    ``gradient`` and ``hessian`` take single vectors. ``support_point`` maps a
    direction u to the maximizer of <x, u> over the body, when known in closed form.
    """

    dim: int
    gauge: Callable[[np.ndarray], Any]
    gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None
    hessian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    support_point: Optional[Callable[[np.ndarray], np.ndarray]] = None
    smoothness: str = 'C1'
    label: str = ''
    tolerances: ToleranceConfig = field(default_factory=ToleranceConfig)
    batched: bool = True
    dual: Optional[Callable[[], 'ConvexBody']] = None
    meta: Dict[str, Any] = field(default_factory=dict)
    spec: Any = None

    def __post_init__(self):
        if self.dim < 1:
            raise InvalidInputError(f"body dimension must be positive, got {self.dim}")
        if self.smoothness not in SMOOTHNESS_ORDER:
            raise InvalidInputError(f"unknown smoothness tag {self.smoothness!r}")

    @property
    def is_phase_space(self) -> bool:
        return self.dim >= 2 and self.dim % 2 == 0

    @property
    def half_dim(self) -> int:
        return self.dim // 2

    def smooth_at_least(self, tag: str) -> bool:
        return SMOOTHNESS_ORDER[self.smoothness] >= SMOOTHNESS_ORDER[tag]

    def with_tolerances(self, tolerances: ToleranceConfig) -> 'ConvexBody':
        return dataclasses.replace(self, tolerances=tolerances)


@dataclass(frozen=True, eq=False)
class BoundaryPoint:
    """A point with gauge 1 and its cached derivative data"""

    x: np.ndarray
    grad: np.ndarray
    normal: np.ndarray
    fvec: Optional[np.ndarray] = None

    def with_fvec(self, fvec: np.ndarray) -> 'BoundaryPoint':
        return dataclasses.replace(self, fvec=np.asarray(fvec, dtype=float))


@dataclass(frozen=True)
class ConvexityReport(Report):
    max_violation: float
    n_samples: int
    seed: int
    passed: bool


@dataclass(frozen=True)
class InvariantReport(Report):
    homogeneity: float
    evenness: float
    euler: float
    gradient_consistency: Optional[float]
    n_samples: int
    passed: bool


def as_vector(v: Any, dim: Optional[int] = None, name: str = 'v') -> np.ndarray:
    """Validate and convert input to a finite float vector"""
    arr = np.asarray(v, dtype=float)
    if arr.ndim != 1:
        raise InvalidInputError(f"{name} must be a vector, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise InvalidInputError(f"{name} has dimension {arr.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} must be finite, got {arr.tolist()}")
    return arr


def require_smoothness(body: ConvexBody, tag: str, operation: str):
    if not body.smooth_at_least(tag):
        raise SmoothnessError(
            f"{operation} needs a {tag} body, '{body.label}' is only {body.smoothness}",
            {'body': body.label, 'smoothness': body.smoothness, 'required': tag},
        )


def gauge(body: ConvexBody, v: Any) -> float:
    """
    Minkowski functional of the body.

    Args:
        body (ConvexBody): The body.
        v (array): Finite vector of the body's dimension.

    Returns:
        float: G(v) >= 0, zero only at the origin.
    """
    v = as_vector(v, body.dim)
    return float(body.gauge(v))


def gauge_batch(body: ConvexBody, points: np.ndarray) -> np.ndarray:
    """Gauge of every row of an (N, dim) array"""
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[1] != body.dim:
        raise InvalidInputError(f"expected an (N, {body.dim}) array, got shape {points.shape}")
    if body.batched:
        return np.asarray(body.gauge(points), dtype=float).reshape(points.shape[0])
    return np.array([float(body.gauge(row)) for row in points], dtype=float)


def _fd_gradient(body: ConvexBody, x: np.ndarray, h: float) -> np.ndarray:
    steps = h * np.eye(body.dim)
    if body.batched:
        forward = gauge_batch(body, x + steps)
        backward = gauge_batch(body, x - steps)
        return (forward - backward) / (2.0 * h)
    grad = np.empty(body.dim)
    for i in range(body.dim):
        grad[i] = (float(body.gauge(x + steps[i])) - float(body.gauge(x - steps[i]))) / (2.0 * h)
    return grad


def gauge_gradient(body: ConvexBody, x: Any) -> np.ndarray:
    """
    Gradient of the gauge.

    Uses the analytic evaluator when the body has one, otherwise central
    differences with step fd_step * |x|.
    """
    x = as_vector(x, body.dim, 'x')
    nx = float(np.linalg.norm(x))
    if nx == 0.0:
        raise SingularPointError("gauge gradient is undefined at the origin")
    if body.gradient is not None:
        return np.asarray(body.gradient(x), dtype=float)
    return _fd_gradient(body, x, body.tolerances.fd_step * nx)


def gauge_hessian(body: ConvexBody, x: Any) -> np.ndarray:
    """Hessian of the gauge: analytic, or central differences of the gradient with step hess_step * |x|"""
    x = as_vector(x, body.dim, 'x')
    nx = float(np.linalg.norm(x))
    if nx == 0.0:
        raise SingularPointError("gauge Hessian is undefined at the origin")
    if body.hessian is not None:
        return np.asarray(body.hessian(x), dtype=float)
    h = body.tolerances.hess_step * nx
    hess = np.empty((body.dim, body.dim))
    for i in range(body.dim):
        step = np.zeros(body.dim)
        step[i] = h
        hess[:, i] = (gauge_gradient(body, x + step) - gauge_gradient(body, x - step)) / (2.0 * h)
    return 0.5 * (hess + hess.T)


def boundary_project(body: ConvexBody, v: Any) -> BoundaryPoint:
    """
    Radially project a nonzero vector to the boundary: x = v / G(v).

    Args:
        body (ConvexBody): The body.
        v (array): Nonzero direction.

    Returns:
        BoundaryPoint: x with cached gradient and unit outward normal.
    """
    v = as_vector(v, body.dim)
    if not np.any(v):
        raise InvalidInputError("cannot project the zero vector to the boundary")
    g = float(body.gauge(v))
    if not (np.isfinite(g) and g > 0.0):
        raise InvalidInputError(f"gauge of {v.tolist()} is {g}; body is unbounded in this direction")
    x = v / g
    grad = gauge_gradient(body, x)
    gnorm = float(np.linalg.norm(grad))
    if gnorm == 0.0:
        raise DegenerateBoundaryError(f"zero gauge gradient at boundary point {x.tolist()}")
    return BoundaryPoint(x=x, grad=grad, normal=grad / gnorm)


def as_boundary_point(body: ConvexBody, x: Any) -> BoundaryPoint:
    """Accept a BoundaryPoint or a raw vector that should already lie on the boundary"""
    if isinstance(x, BoundaryPoint):
        return x
    x = as_vector(x, body.dim, 'x')
    g = gauge(body, x)
    tol = max(body.tolerances.eq_tol, 1e-9)
    if abs(g - 1.0) > tol:
        raise InvalidInputError(f"point {x.tolist()} has gauge {g:.17g}, not on the boundary")
    return boundary_project(body, x)


def tangent_frame(body: ConvexBody, x: Any) -> np.ndarray:
    """Orthonormal basis (dim x dim-1) of the tangent space of the boundary at x"""
    point = as_boundary_point(body, x)
    return null_space(point.normal[None, :])


def _kkt_residual(body: ConvexBody, x: np.ndarray, lam: float, u_hat: np.ndarray) -> Tuple[float, np.ndarray]:
    grad = gauge_gradient(body, x)
    residual = np.concatenate([lam * grad - u_hat, [float(body.gauge(x)) - 1.0]])
    return float(np.linalg.norm(residual)), residual


def _ascend_support(body: ConvexBody, u_hat: np.ndarray, start: np.ndarray,
                    handover: float) -> Tuple[float, np.ndarray, float, int]:
    """
    Projected gradient ascent of phi(w) = <w, u>/G(w) on the unit sphere.

    Stops when the accepted direction step drops below ``handover``.
    Returns (value, boundary point, tangent gradient norm, iterations).
    """
    tol = body.tolerances
    w = start / np.linalg.norm(start)
    step = 0.5
    max_iter = 20 * tol.newton_max_iter
    g_norm = np.inf
    iterations = 0

    def phi(direction):
        return float(direction @ u_hat) / float(body.gauge(direction))

    value = phi(w)
    for iterations in range(1, max_iter + 1):
        gw = float(body.gauge(w))
        grad = gauge_gradient(body, w)
        g = u_hat / gw - float(w @ u_hat) * grad / gw ** 2
        g_t = g - float(g @ w) * w
        g_norm = float(np.linalg.norm(g_t))
        if g_norm == 0.0:
            break
        accepted = False
        while step > 1e-16:
            candidate = w + step * g_t
            candidate /= np.linalg.norm(candidate)
            candidate_value = phi(candidate)
            if candidate_value > value:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        moved = float(np.linalg.norm(candidate - w))
        w, value = candidate, candidate_value
        step = min(2.0 * step, 1.0)
        if moved < handover:
            break
    return value, w / float(body.gauge(w)), g_norm, iterations


def _polish_support(body: ConvexBody, u_hat: np.ndarray, x: np.ndarray) -> Tuple[np.ndarray, float, int]:
    """Damped Newton on the KKT system lam * grad G(x) = u, G(x) = 1"""
    tol = body.tolerances
    lam = float(x @ u_hat)
    residual_norm, residual = _kkt_residual(body, x, lam, u_hat)
    iterations = 0
    for iterations in range(1, tol.newton_max_iter + 1):
        if residual_norm <= tol.newton_tol:
            break
        grad = gauge_gradient(body, x)
        hess = gauge_hessian(body, x)
        n = body.dim
        kkt = np.zeros((n + 1, n + 1))
        kkt[:n, :n] = lam * hess
        kkt[:n, n] = grad
        kkt[n, :n] = grad
        try:
            delta = np.linalg.solve(kkt, -residual)
        except np.linalg.LinAlgError:
            break
        scale = 1.0
        improved = False
        for _ in range(30):
            x_new = x + scale * delta[:n]
            lam_new = lam + scale * delta[n]
            if np.any(x_new):
                new_norm, new_residual = _kkt_residual(body, x_new, lam_new, u_hat)
                if new_norm < residual_norm:
                    improved = True
                    break
            scale *= 0.5
        if not improved:
            break
        x, lam, residual_norm, residual = x_new, lam_new, new_norm, new_residual
    if lam <= 0.0:
        residual_norm = np.inf
    return x, residual_norm, iterations


def _support_from_start(body: ConvexBody, u_hat: np.ndarray, start: np.ndarray) -> Tuple[float, np.ndarray, float]:
    tol = body.tolerances
    value, x, g_norm, _ = _ascend_support(body, u_hat, start, handover=1e-4)
    x_polished, residual, _ = _polish_support(body, u_hat, x)
    if residual <= SUPPORT_NOISE_FLOOR and float(x_polished @ u_hat) >= value - 1e-12:
        return float(x_polished @ u_hat), x_polished, residual
    # Newton polish failed; finish with the ascent down to the direction-step criterion
    value, x, g_norm, iterations = _ascend_support(body, u_hat, x, handover=tol.newton_tol)
    return value, x, g_norm


def support_point(body: ConvexBody, u: Any) -> Tuple[float, np.ndarray]:
    """
    Support value h_X(u) = max <x, u> and the maximizing boundary point.

    Closed form when the body provides one. Otherwise projected gradient
    ascent on directions, polished by Newton on the optimality system.

    Starts are u itself plus the 2n coordinate directions signed toward u. u
    is always ascended. A coordinate start is ascended only when its radial
    value <e, u>/G(e) already beats the incumbent by eq_tol; the maximizer of
    a linear function over a strictly convex body is unique, so a start that
    cannot improve on the incumbent leads to the same point.

    Raises:
        InvalidInputError: u is zero or not finite.
        NumericFailureError: no start converged; carries best value and residual.
    """
    u = as_vector(u, body.dim, 'u')
    nu = float(np.linalg.norm(u))
    if nu == 0.0:
        raise InvalidInputError("support function needs a nonzero direction")
    if body.support_point is not None:
        x = np.asarray(body.support_point(u), dtype=float)
        return float(x @ u), x
    u_hat = u / nu
    value, x, residual = _support_from_start(body, u_hat, u_hat)
    for i in range(body.dim):
        start = np.zeros(body.dim)
        start[i] = 1.0 if u_hat[i] >= 0 else -1.0
        if float(start @ u_hat) / float(body.gauge(start)) > value + body.tolerances.eq_tol:
            cand_value, cand_x, cand_residual = _support_from_start(body, u_hat, start)
            if cand_value > value:
                value, x, residual = cand_value, cand_x, cand_residual
    if not residual <= max(SUPPORT_NOISE_FLOOR, body.tolerances.newton_tol):
        raise NumericFailureError(
            f"support maximization did not converge for body '{body.label}'",
            best_value=value * nu, residual=residual,
        )
    return value * nu, x


def support(body: ConvexBody, u: Any) -> float:
    """Support function h_X(u), the gauge of the polar body"""
    value, _ = support_point(body, u)
    return value


def sample_directions(dim: int, n_samples: int, seed: Optional[int] = None) -> np.ndarray:
    """Unit directions: a uniform angle grid in the plane, normalized Gaussians otherwise"""
    if n_samples < 1:
        raise InvalidInputError(f"n_samples must be positive, got {n_samples}")
    if dim == 2:
        theta = 2.0 * np.pi * np.arange(n_samples) / n_samples
        return np.column_stack([np.cos(theta), np.sin(theta)])
    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((n_samples, dim))
    return dirs / np.linalg.norm(dirs, axis=1, keepdims=True)


def sample_boundary(body: ConvexBody, n_samples: int, seed: Optional[int] = None) -> List[BoundaryPoint]:
    """Boundary points from sample_directions, projected radially"""
    return [boundary_project(body, d) for d in sample_directions(body.dim, n_samples, seed)]


def boundary_array(body: ConvexBody, n_samples: int, seed: Optional[int] = None) -> np.ndarray:
    """Boundary points as an (N, dim) array, without derivative data"""
    dirs = sample_directions(body.dim, n_samples, seed)
    return dirs / gauge_batch(body, dirs)[:, None]


def convexity_probe(body: ConvexBody, n_samples: int, seed: int) -> ConvexityReport:
    """
    Sampled convexity test.

    Half the pairs are global Gaussian pairs, half are nearby boundary pairs at
    log-uniform separation so thin non-convex bands are caught. Reports the max
    of G(la + (1-l)b) - l G(a) - (1-l) G(b).
    """
    if n_samples < 1:
        raise InvalidInputError(f"n_samples must be positive, got {n_samples}")
    rng = np.random.default_rng(seed)
    dim = body.dim
    n_global = (n_samples + 1) // 2
    n_local = n_samples // 2

    a = rng.standard_normal((n_global, dim))
    b = rng.standard_normal((n_global, dim))
    lam = rng.uniform(0.0, 1.0, n_global)
    mid = lam[:, None] * a + (1.0 - lam)[:, None] * b
    violations = gauge_batch(body, mid) - lam * gauge_batch(body, a) - (1.0 - lam) * gauge_batch(body, b)

    if n_local:
        base = rng.standard_normal((n_local, dim))
        base /= gauge_batch(body, base)[:, None]
        offset = rng.standard_normal((n_local, dim))
        offset /= np.linalg.norm(offset, axis=1, keepdims=True)
        separation = 10.0 ** rng.uniform(-3.0, -0.3, n_local)
        other = base + separation[:, None] * offset
        other /= gauge_batch(body, other)[:, None]
        lam_local = rng.uniform(0.0, 1.0, n_local)
        mid_local = lam_local[:, None] * base + (1.0 - lam_local)[:, None] * other
        local = (gauge_batch(body, mid_local) - lam_local * gauge_batch(body, base)
                 - (1.0 - lam_local) * gauge_batch(body, other))
        violations = np.concatenate([violations, local])

    worst = float(np.max(violations))
    return ConvexityReport(max_violation=worst, n_samples=n_samples, seed=seed,
                           passed=worst <= body.tolerances.eq_tol)


def invariant_probe(body: ConvexBody, n_samples: int, seed: int) -> InvariantReport:
    """Homogeneity, evenness, Euler identity and analytic-vs-difference gradient agreement"""
    rng = np.random.default_rng(seed)
    tol = body.tolerances
    v = rng.standard_normal((n_samples, body.dim))
    s = rng.uniform(0.1, 10.0, n_samples)
    gv = gauge_batch(body, v)
    homogeneity = float(np.max(np.abs(gauge_batch(body, s[:, None] * v) - s * gv) / (s * gv)))
    evenness = float(np.max(np.abs(gauge_batch(body, -v) - gv)))

    euler = 0.0
    consistency = None
    for row, g in zip(v, gv):
        grad = gauge_gradient(body, row)
        euler = max(euler, abs(float(grad @ row) - g) / g)
        if body.gradient is not None:
            fd = _fd_gradient(body, row, tol.fd_step * float(np.linalg.norm(row)))
            rel = float(np.linalg.norm(fd - grad) / max(np.linalg.norm(grad), 1e-300))
            consistency = rel if consistency is None else max(consistency, rel)

    euler_tol = 1e-6 if body.gradient is None else max(tol.eq_tol, 1e-9)
    passed = (homogeneity <= max(tol.eq_tol, 1e-12) * 10 and evenness <= tol.eq_tol
              and euler <= euler_tol and (consistency is None or consistency <= 1e-5))
    return InvariantReport(homogeneity=homogeneity, evenness=evenness, euler=euler,
                           gradient_consistency=consistency, n_samples=n_samples, passed=passed)


def is_numeric_body(body: ConvexBody) -> bool:
    """Bodies whose gauge involves an iterative solve get the looser gate thresholds"""
    return bool(body.meta.get('numeric', False))


def gate_tolerance(body: ConvexBody, analytic: float, numeric: float) -> float:
    return numeric if is_numeric_body(body) else analytic
