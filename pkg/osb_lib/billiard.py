"""
Symplectic outer billiard map.

For z outside X the forward tangency point x in the boundary has z on the
characteristic line x + R f(x) with omega(x, x - z) > 0, i.e. z = x - t f(x)
with t > 0. Then T(z) = 2x - z. The inverse map uses the reversed orientation,
z = x + t f(x).
"""

from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy.optimize import brentq

from .convex_core import (
    ConvexBody,
    as_boundary_point,
    as_vector,
    boundary_project,
    gate_tolerance,
    gauge,
    gauge_gradient,
)
from .errors import GateFailureError, InvalidInputError, NumericFailureError, OSBError
from .reports import Report, rows_to_csv
from .symplectic import apply_J, char_jacobian, char_map, j_matrix, omega

ORIENTATIONS = {'forward': 1.0, 'backward': -1.0}

# Points with G(z) <= 1 + this are on the boundary to working precision
BOUNDARY_MARGIN = 1e-9

# Perturbation size for multistart initial guesses
MULTISTART_SPREAD = 0.3

# Boundary-angle grid for the planar bracketing fallback
BISECTION_GRID = 720


@dataclass(frozen=True)
class TangencySolution(Report):
    x: np.ndarray
    fvec: np.ndarray
    t: float
    residual: float
    iterations: int
    method: str


@dataclass(frozen=True)
class OrbitTrace(Report):
    points: np.ndarray
    tangencies: List[TangencySolution]
    body_label: str
    start: np.ndarray
    inverse: bool = False
    failure: Optional[Dict[str, Any]] = None

    @property
    def steps(self) -> int:
        return len(self.tangencies)


@dataclass(frozen=True)
class FourPeriodicFamily(Report):
    base: np.ndarray
    vertices: np.ndarray
    edge_defects: np.ndarray
    area: float
    symmetry_defect: float
    f_gauge: float

    @property
    def max_edge_defect(self) -> float:
        return float(np.max(self.edge_defects))


@dataclass(frozen=True)
class PeriodicityReport(Report):
    period: int
    defect: float
    symmetry_defect: Optional[float]
    n_points: int


@dataclass(frozen=True)
class BoundednessStats(Report):
    max_norm: float
    min_norm: float
    drift: float
    n_points: int


def _orientation_sign(orientation: str) -> float:
    if orientation not in ORIENTATIONS:
        raise InvalidInputError(f"orientation must be one of {sorted(ORIENTATIONS)}, got {orientation!r}")
    return ORIENTATIONS[orientation]


def _exterior_point(body: ConvexBody, z: Any) -> Tuple[np.ndarray, float]:
    z = as_vector(z, body.dim, 'z')
    j_matrix(body.dim)  # raises for odd dimensions
    gz = gauge(body, z)
    if gz <= 1.0 + BOUNDARY_MARGIN:
        raise InvalidInputError(
            f"z = {z.tolist()} is not outside the body (gauge {gz:.17g})",
            {'gauge': gz},
        )
    return z, gz


def _tangency_residual(body: ConvexBody, z: np.ndarray, sigma: float, x: np.ndarray,
                       t: float) -> Tuple[float, np.ndarray, np.ndarray]:
    fvec = apply_J(gauge_gradient(body, x))
    residual = np.concatenate([x - sigma * t * fvec - z, [float(body.gauge(x)) - 1.0]])
    return float(np.linalg.norm(residual)), residual, fvec


def _newton_tangency(body: ConvexBody, z: np.ndarray, sigma: float,
                     x: np.ndarray) -> Tuple[np.ndarray, float, float, int]:
    """
    Damped Newton on F(x, t) = (x - sigma t f(x) - z, G(x) - 1).

    Jacobian [[I - sigma t Df, -sigma f], [grad G^T, 0]]; the step is halved up
    to 30 times until the residual norm decreases.
    """
    tol = body.tolerances
    dim = body.dim
    fvec = apply_J(gauge_gradient(body, x))
    t = abs(float((x - z) @ fvec)) / float(fvec @ fvec)
    norm, residual, fvec = _tangency_residual(body, z, sigma, x, t)
    eye = np.eye(dim)
    iterations = 0
    for iterations in range(1, tol.newton_max_iter + 1):
        if norm <= tol.newton_tol:
            break
        jac = np.zeros((dim + 1, dim + 1))
        jac[:dim, :dim] = eye - sigma * t * char_jacobian(body, x)
        jac[:dim, dim] = -sigma * fvec
        jac[dim, :dim] = gauge_gradient(body, x)
        try:
            delta = np.linalg.solve(jac, -residual)
        except np.linalg.LinAlgError:
            break
        scale = 1.0
        improved = False
        for _ in range(30):
            x_new = x + scale * delta[:dim]
            t_new = t + scale * delta[dim]
            if np.any(x_new):
                new_norm, new_residual, new_f = _tangency_residual(body, z, sigma, x_new, t_new)
                if new_norm < norm:
                    improved = True
                    break
            scale *= 0.5
        if not improved:
            break
        x, t, norm, residual, fvec = x_new, t_new, new_norm, new_residual, new_f
    return x, t, norm, iterations


def _acceptance_floor(body: ConvexBody, z: np.ndarray) -> float:
    """Residual accepted from a stalled Newton solve"""
    tol = body.tolerances
    return max(tol.newton_tol, 1e-2 * tol.eq_tol) * max(1.0, float(np.linalg.norm(z)))


def _initial_guess(body: ConvexBody, z: np.ndarray, gz: float, sigma: float) -> np.ndarray:
    """Exact for the ball: cos(a) z/|z| + sin(a) Jz/|z| with cos(a) = 1/|z|"""
    p = z / gz
    jz = apply_J(z)
    q = jz / gauge(body, jz)
    guess = p / gz + sigma * np.sqrt(max(1.0 - 1.0 / gz ** 2, 0.0)) * q
    return boundary_project(body, guess).x


def _planar_bracketing(body: ConvexBody, z: np.ndarray, sigma: float) -> Optional[Tuple[np.ndarray, int]]:
    """
    Roots of psi(theta) = <grad G(x(theta)), z> - 1 on the boundary angle circle.

    psi vanishes exactly where the tangent line at x(theta) passes through z;
    of the two roots the one with sigma * omega(x, x - z) > 0 is returned.
    """
    def point(theta):
        return boundary_project(body, np.array([np.cos(theta), np.sin(theta)])).x

    def psi(theta):
        x = point(theta)
        return float(gauge_gradient(body, x) @ z) - 1.0

    grid = 2.0 * np.pi * np.arange(BISECTION_GRID + 1) / BISECTION_GRID
    values = np.array([psi(theta) for theta in grid])
    evaluations = len(grid)
    for k in range(BISECTION_GRID):
        if values[k] == 0.0 or values[k] * values[k + 1] < 0.0:
            theta = grid[k] if values[k] == 0.0 else brentq(psi, grid[k], grid[k + 1], xtol=1e-15)
            x = point(theta)
            if sigma * omega(x, x - z) > 0.0:
                return x, evaluations
    return None


def tangency_solve(body: ConvexBody, z: Any, orientation: str = 'forward') -> TangencySolution:
    """
    Tangency point of the characteristic line through an exterior point.

    Solves x - sigma t f(x) = z, G(x) = 1 with t > 0 (sigma = +1 forward, -1
    backward). Starts from a ball-exact guess and the radial projection, then
    2n+1 perturbed starts; planar bodies fall back to bracketing in the
    boundary angle.

    Raises:
        InvalidInputError: z is inside or on the body.
        NumericFailureError: no start converged; carries the best residual.
    """
    sigma = _orientation_sign(orientation)
    z, gz = _exterior_point(body, z)
    floor = _acceptance_floor(body, z)
    best = (np.inf, None, None, 0)

    def attempt(start):
        nonlocal best
        x, t, norm, iterations = _newton_tangency(body, z, sigma, start)
        if t > 0.0 and norm < best[0]:
            best = (norm, x, t, iterations)
        return t > 0.0 and norm <= floor

    starts = [_initial_guess(body, z, gz, sigma), boundary_project(body, z).x]
    method = 'newton'
    converged = any(attempt(start) for start in starts)
    if not converged:
        method = 'multistart'
        rng = np.random.default_rng(0)
        base = starts[0]
        for _ in range(body.dim + 1):
            normal = gauge_gradient(body, base)
            normal /= np.linalg.norm(normal)
            xi = rng.standard_normal(body.dim)
            xi -= float(xi @ normal) * normal
            xi *= MULTISTART_SPREAD / np.linalg.norm(xi)
            if attempt(boundary_project(body, base + xi).x):
                converged = True
                break
    if not converged and body.dim == 2:
        bracketed = _planar_bracketing(body, z, sigma)
        if bracketed is not None:
            x, evaluations = bracketed
            fvec = apply_J(gauge_gradient(body, x))
            t = sigma * float((x - z) @ fvec) / float(fvec @ fvec)
            norm, _, _ = _tangency_residual(body, z, sigma, x, t)
            if t > 0.0 and norm <= max(floor, 1e-9 * max(1.0, float(np.linalg.norm(z)))):
                best = (norm, x, t, evaluations)
                converged = True
                method = 'bisection'
    if not converged:
        raise NumericFailureError(
            f"tangency solve failed for z = {z.tolist()} on '{body.label}'",
            best_value=best[2], residual=best[0], iterations=best[3],
            details={'orientation': orientation},
        )
    norm, x, t, iterations = best
    fvec = apply_J(gauge_gradient(body, x))
    return TangencySolution(x=x, fvec=fvec, t=float(t), residual=float(norm),
                            iterations=int(iterations), method=method)


def outer_step(body: ConvexBody, z: Any, inverse: bool = False) -> Tuple[np.ndarray, TangencySolution]:
    """One application of T (or T^-1) together with its tangency record"""
    solution = tangency_solve(body, z, 'backward' if inverse else 'forward')
    return 2.0 * solution.x - as_vector(z, body.dim, 'z'), solution


def outer_map(body: ConvexBody, z: Any) -> np.ndarray:
    """T(z) = 2x - z for the forward tangency point x"""
    image, _ = outer_step(body, z)
    return image


def outer_map_inverse(body: ConvexBody, z: Any) -> np.ndarray:
    image, _ = outer_step(body, z, inverse=True)
    return image


def iterate(body: ConvexBody, z0: Any, n_steps: int, inverse: bool = False,
            on_step: Optional[Callable[[int, np.ndarray, TangencySolution], None]] = None) -> OrbitTrace:
    """
    Orbit z_0, T(z_0), ..., T^N(z_0).

    A solver failure or an iterate that falls inside the body truncates the
    trace; the cause is recorded in ``failure``.

    Raises:
        InvalidInputError: z0 is not outside the body or n_steps < 1.
    """
    if int(n_steps) < 1:
        raise InvalidInputError(f"number of steps must be positive, got {n_steps}")
    z, _ = _exterior_point(body, z0)
    points = [z]
    tangencies: List[TangencySolution] = []
    failure = None
    for k in range(int(n_steps)):
        try:
            z_next, solution = outer_step(body, z, inverse)
        except OSBError as e:
            failure = dict(e.to_dict(), step=k)
            break
        points.append(z_next)
        tangencies.append(solution)
        if on_step is not None:
            on_step(k, z_next, solution)
        if gauge(body, z_next) <= 1.0 + BOUNDARY_MARGIN:
            failure = {'error_type': 'InteriorIterate', 'step': k + 1,
                       'error_message': f"iterate {k + 1} fell inside the body"}
            break
        z = z_next
    return OrbitTrace(points=np.array(points), tangencies=tangencies, body_label=body.label,
                      start=points[0], inverse=inverse, failure=failure)


def _family(body: ConvexBody, x: np.ndarray, y: np.ndarray, f_gauge: float) -> FourPeriodicFamily:
    vertices = np.array([x + y, -x + y, -x - y, x - y])
    defects = np.empty(4)
    for i in range(4):
        defects[i] = np.linalg.norm(outer_map(body, vertices[i]) - vertices[(i + 1) % 4])
    area = omega(vertices[1] - vertices[0], vertices[3] - vertices[0])
    symmetry = max(float(np.linalg.norm(vertices[2] + vertices[0])),
                   float(np.linalg.norm(vertices[3] + vertices[1])))
    return FourPeriodicFamily(base=x, vertices=vertices, edge_defects=defects, area=float(area),
                              symmetry_defect=symmetry, f_gauge=f_gauge)


def four_periodic_family(body: ConvexBody, x: Any) -> FourPeriodicFamily:
    """
    The centrally symmetric 4-periodic orbit through x + f(x).

    Vertices x + f, -x + f, -x - f, x - f; every edge is checked with outer_map
    and the symplectic area of the parallelogram is 4 omega(x, f(x)) = 4.

    Raises:
        GateFailureError: f(x) is off the boundary or f(f(x)) != -x, so the
            body is not self-polar at x.
    """
    point = as_boundary_point(body, x)
    fvec = char_map(body, point)
    f_gauge = gauge(body, fvec)
    involution = float(np.linalg.norm(apply_J(gauge_gradient(body, fvec)) + point.x))
    tol = gate_tolerance(body, 1e-8, 1e-5)
    if abs(f_gauge - 1.0) > tol or involution > tol:
        raise GateFailureError(
            f"'{body.label}' is not self-polar at x: ||f(x)|| = {f_gauge:.17g}",
            {'f_gauge_defect': abs(f_gauge - 1.0), 'involution_defect': involution},
        )
    return _family(body, point.x, fvec, f_gauge)


def scaled_four_periodic_family(body: ConvexBody, x: Any) -> FourPeriodicFamily:
    """
    Family through x + y with y = f(x)/||f(x)||_X, for bodies with X = alpha X^omega.

    No self-polarity gate; the symplectic area is 4/||f(x)||_X.
    """
    point = as_boundary_point(body, x)
    fvec = char_map(body, point)
    f_gauge = gauge(body, fvec)
    return _family(body, point.x, fvec / f_gauge, f_gauge)


def periodicity_defect(trace: OrbitTrace, period: int) -> PeriodicityReport:
    """max_k |z_{k+p} - z_k|, plus the central-symmetry defect |z_{k+p/2} + z_k| for even p"""
    points = np.asarray(trace.points)
    if period < 1:
        raise InvalidInputError(f"period must be positive, got {period}")
    if len(points) <= period:
        raise InvalidInputError(f"trace has {len(points)} points, period {period} needs more")
    defect = float(np.max(np.linalg.norm(points[period:] - points[:-period], axis=1)))
    symmetry = None
    if period % 2 == 0:
        half = period // 2
        symmetry = float(np.max(np.linalg.norm(points[half:] + points[:-half], axis=1)))
    return PeriodicityReport(period=period, defect=defect, symmetry_defect=symmetry, n_points=len(points))


def boundedness_stats(trace: OrbitTrace) -> BoundednessStats:
    norms = np.linalg.norm(np.asarray(trace.points), axis=1)
    return BoundednessStats(max_norm=float(np.max(norms)), min_norm=float(np.min(norms)),
                            drift=float(norms[-1] - norms[0]), n_points=len(norms))


def orbit_header(dim: int) -> List[str]:
    return (['step'] + [f'z_{i + 1}' for i in range(dim)] + [f'x_{i + 1}' for i in range(dim)]
            + ['t', 'residual'])


def orbit_rows(trace: OrbitTrace) -> List[List[Any]]:
    """Row k holds z_k and the tangency that maps it to z_{k+1}; the last row has no tangency"""
    points = np.asarray(trace.points)
    dim = points.shape[1]
    rows = []
    for k, z in enumerate(points):
        row: List[Any] = [k] + [float(v) for v in z]
        if k < len(trace.tangencies):
            sol = trace.tangencies[k]
            row += [float(v) for v in sol.x] + [sol.t, sol.residual]
        else:
            row += [None] * (dim + 2)
        rows.append(row)
    return rows


def orbit_to_csv(trace: OrbitTrace) -> str:
    return rows_to_csv(orbit_header(trace.points.shape[1]), orbit_rows(trace))


def orbit_to_json(trace: OrbitTrace, body_hash: Optional[str], tolerances: Dict[str, Any],
                  seed: Optional[int]) -> Dict[str, Any]:
    """JSON mirror of the CSV with run metadata"""
    return {
        'body': trace.body_label,
        'body_hash': body_hash,
        'tolerances': tolerances,
        'seed': seed,
        'inverse': trace.inverse,
        'steps': trace.steps,
        'failure': trace.failure,
        'header': orbit_header(trace.points.shape[1]),
        'rows': orbit_rows(trace),
    }
