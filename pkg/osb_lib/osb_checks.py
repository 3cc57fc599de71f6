"""
Runnable checks and their registry.

Every ``verify_*`` function takes a realized body plus sample count and seed
and returns a CheckResult. The registry in get_checks_dict describes each one
for ``osb_cli.py checks`` and is what the verification suites are built from.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from .billiard import four_periodic_family, outer_step
from .bodies import make_linear_image
from .convex_core import (
    ConvexBody,
    convexity_probe,
    gate_tolerance,
    gauge,
    invariant_probe,
    sample_boundary,
)
from .hypersurface import (
    area_construction_2d,
    area_ratio_2d,
    char_image_defect,
    hausdorff_distance,
    injectivity_check,
    invariance_defect,
    line_two_point_check,
    planarity_defect,
    radial_transversality,
    sample_Y,
    star_shape_check,
)
from .measure import mahler_diagnostic, radial_volume_ratio
from .reports import Report
from .symplectic import (
    check_involution,
    curvature_scan,
    omega,
    positivity_scan,
    random_symplectic_matrix,
    self_polarity_defect,
)


@dataclass(frozen=True)
class CheckResult(Report):
    check: str
    body_hash: Optional[str]
    n_samples: int
    worst_value: float
    threshold: Optional[float]
    passed: bool
    details: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        data = super().to_dict()
        data['pass'] = data.pop('passed')
        return data


def _result(name: str, body: ConvexBody, n_samples: int, worst: float, threshold: Optional[float],
            passed: bool, /, **details) -> CheckResult:
    body_hash = body.meta.get('spec_hash')
    return CheckResult(check=name, body_hash=body_hash, n_samples=int(n_samples), worst_value=float(worst),
                       threshold=threshold, passed=bool(passed), details=details)


def _exterior_points(body: ConvexBody, n: int, seed: int) -> np.ndarray:
    """Boundary samples pushed out by a random factor in [1.1, 3]"""
    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((n, body.dim))
    points = dirs / np.array([gauge(body, d) for d in dirs])[:, None]
    return points * rng.uniform(1.1, 3.0, n)[:, None]


# ---------------------------------------------------------------------------
# Convex core

def verify_invariants(body: ConvexBody, samples: int, seed: int) -> CheckResult:
    report = invariant_probe(body, samples, seed)
    worst = max(report.homogeneity, report.evenness, report.euler)
    return _result('invariants', body, samples, worst, None, report.passed, **report.to_dict())


def verify_convexity(body: ConvexBody, samples: int, seed: int) -> CheckResult:
    report = convexity_probe(body, samples, seed)
    return _result('convexity', body, samples, report.max_violation, body.tolerances.eq_tol, report.passed)


# ---------------------------------------------------------------------------
# Symplectic

def verify_involution(body: ConvexBody, samples: int, seed: int) -> CheckResult:
    """max |f(f(x)) + x| over boundary samples"""
    worst = 0.0
    gauge_defect = 0.0
    for point in sample_boundary(body, samples, seed):
        result = check_involution(body, point)
        worst = max(worst, result.defect)
        gauge_defect = max(gauge_defect, result.gauge_defect)
    threshold = gate_tolerance(body, 1e-8, 1e-5)
    return _result('involution', body, samples, worst, threshold, worst <= threshold,
                   max_gauge_defect=gauge_defect)


def verify_self_polarity(body: ConvexBody, samples: int, seed: int) -> CheckResult:
    report = self_polarity_defect(body, samples, seed)
    return _result('self_polarity', body, samples, report.defect, gate_tolerance(body, 1e-8, 1e-5),
                   report.passed, alpha=report.alpha, constancy_defect=report.constancy_defect)


def verify_positivity(body: ConvexBody, samples: int, seed: int) -> CheckResult:
    report = positivity_scan(body, samples, seed)
    return _result('positivity', body, samples, report.min_value, 0.0, report.passed)


def verify_curvature(body: ConvexBody, samples: int, seed: int) -> CheckResult:
    report = curvature_scan(body, samples, seed)
    return _result('curvature', body, samples, report.min_curvature, 0.0, report.passed,
                   max_curvature=report.max_curvature)


# ---------------------------------------------------------------------------
# Billiard

def verify_four_periodic(body: ConvexBody, samples: int, seed: int) -> CheckResult:
    """Edges T(z_i) = z_{i+1} and area 4 of the family through every boundary sample"""
    worst_edge = 0.0
    worst_area = 0.0
    worst_symmetry = 0.0
    for point in sample_boundary(body, samples, seed):
        family = four_periodic_family(body, point)
        worst_edge = max(worst_edge, family.max_edge_defect)
        worst_area = max(worst_area, abs(family.area - 4.0))
        worst_symmetry = max(worst_symmetry, family.symmetry_defect)
    edge_tol = gate_tolerance(body, 1e-7, 1e-5)
    area_tol = gate_tolerance(body, 1e-9, 1e-6)
    return _result('four_periodic', body, samples, worst_edge, edge_tol,
                   worst_edge <= edge_tol and worst_area <= area_tol,
                   area_defect=worst_area, area_threshold=area_tol, symmetry_defect=worst_symmetry)


def verify_inverse(body: ConvexBody, samples: int, seed: int) -> CheckResult:
    """T^-1(T(z)) = z, midpoints on the boundary and positive orientation on exterior samples"""
    worst = 0.0
    midpoint = 0.0
    orientation = np.inf
    for z in _exterior_points(body, samples, seed):
        image, solution = outer_step(body, z)
        back, _ = outer_step(body, image, inverse=True)
        worst = max(worst, float(np.linalg.norm(back - z)))
        midpoint = max(midpoint, abs(gauge(body, 0.5 * (z + image)) - 1.0))
        orientation = min(orientation, omega(solution.x, solution.x - z))
    threshold = gate_tolerance(body, 1e-8, 1e-5)
    return _result('inverse', body, samples, worst, threshold,
                   worst <= threshold and midpoint <= threshold and orientation > 0.0,
                   midpoint_defect=midpoint, min_orientation=orientation)


def verify_equivariance(body: ConvexBody, samples: int, seed: int, matrices: int = 10) -> CheckResult:
    """|T_{LX}(Lz) - L T_X(z)| for random linear symplectomorphisms L"""
    worst = 0.0
    for k in range(matrices):
        mat = random_symplectic_matrix(body.half_dim, seed + k)
        image_body = make_linear_image(body, mat)
        for z in _exterior_points(body, samples, seed + k):
            expected = mat @ outer_step(body, z)[0]
            actual = outer_step(image_body, mat @ z)[0]
            worst = max(worst, float(np.linalg.norm(actual - expected)))
    threshold = gate_tolerance(body, 1e-7, 1e-5)
    return _result('equivariance', body, samples * matrices, worst, threshold, worst <= threshold,
                   matrices=matrices)


# ---------------------------------------------------------------------------
# Hypersurface

def verify_invariance(body: ConvexBody, samples: int, seed: int) -> CheckResult:
    worst = max(invariance_defect(body, p) for p in sample_boundary(body, samples, seed))
    threshold = gate_tolerance(body, 1e-7, 1e-5)
    return _result('invariance', body, samples, worst, threshold, worst <= threshold)


def verify_star_shape(body: ConvexBody, samples: int, seed: int, rays: int = 100) -> CheckResult:
    report = star_shape_check(body, samples, seed, n_rays=rays)
    if body.dim == 2:
        worst = report.monotonicity_defect
    else:
        worst = report.min_jacobian_sv
    return _result('star', body, samples, worst, None, report.passed, **report.to_dict())


def verify_two_point(body: ConvexBody, samples: int, seed: int, resolution: int = 241) -> CheckResult:
    """Every characteristic line through x meets Y exactly at t = +-1"""
    grid_sample = sample_Y(body, 4096) if body.dim == 2 else None
    threshold = gate_tolerance(body, 1e-6, 1e-5)
    worst = 0.0
    counts = set()
    for point in sample_boundary(body, samples, seed):
        report = line_two_point_check(body, point, resolution=resolution, sample=grid_sample)
        counts.add(report.count)
        worst = max(worst, report.max_offset)
    return _result('two-point', body, samples, worst, threshold, counts == {2} and worst <= threshold,
                   crossing_counts=sorted(counts))


def verify_transversality(body: ConvexBody, samples: int, seed: int) -> CheckResult:
    worst = min(radial_transversality(body, p) for p in sample_boundary(body, samples, seed))
    return _result('transversality', body, samples, worst, 0.0, worst > 0.0)


def verify_injectivity(body: ConvexBody, samples: int, seed: int) -> CheckResult:
    report = injectivity_check(sample_Y(body, samples, seed))
    return _result('injectivity', body, samples, report.min_ratio, 0.0, report.passed,
                   collisions=report.collisions, min_image_separation=report.min_image_separation)


def verify_planarity(body: ConvexBody, samples: int, seed: int, steps: int = 400) -> CheckResult:
    """Diagnostic: planarity of characteristics and of their f-images; never fails"""
    gamma = 0.0
    delta = 0.0
    for point in sample_boundary(body, samples, seed):
        report = planarity_defect(body, point, 2.0 * np.pi, steps)
        gamma = max(gamma, report.gamma_defect)
        delta = max(delta, report.delta_char_defect)
    return _result('planarity', body, samples, delta, None, True, gamma_defect=gamma, diagnostic=True)


def verify_char_image(body: ConvexBody, samples: int, seed: int) -> CheckResult:
    """Diagnostic: do x +- f(x) carry characteristics of the boundary to characteristics of Y"""
    worst = 0.0
    for point in sample_boundary(body, samples, seed):
        worst = max(worst, char_image_defect(body, point, 1), char_image_defect(body, point, -1))
    return _result('char-image', body, samples, worst, None, True, diagnostic=True)


def verify_area_roundtrip(body: ConvexBody, samples: int, seed: int) -> CheckResult:
    """Area construction applied to sampled Y recovers the sampled boundary"""
    sample = sample_Y(body, samples, seed)
    recovered = area_construction_2d(sample.images)
    distance = hausdorff_distance(recovered, sample.sources)
    threshold = gate_tolerance(body, 1e-5, 1e-4)
    return _result('area-roundtrip', body, samples, distance, threshold, distance <= threshold)


def verify_area_ratio(body: ConvexBody, samples: int, seed: int) -> CheckResult:
    ratio = area_ratio_2d(body, samples)
    return _result('area-ratio', body, samples, abs(ratio - 2.0), 1e-4, abs(ratio - 2.0) <= 1e-4, ratio=ratio)


def verify_volume_ratio(body: ConvexBody, samples: int, seed: int) -> CheckResult:
    """Planar bodies must give 2; higher dimensions are measured only"""
    report = radial_volume_ratio(body, samples, seed)
    if body.dim == 2:
        passed = abs(report.ratio - 2.0) <= 1e-4
        threshold = 1e-4
    else:
        passed, threshold = True, None
    return _result('volume-ratio', body, samples, abs(report.ratio - 2.0), threshold, passed,
                   ratio=report.ratio, stderr=report.stderr, diagnostic=body.dim != 2)


def verify_volume(body: ConvexBody, samples: int, seed: int, threads: int = 1) -> CheckResult:
    """Advisory: Monte Carlo volume against the conjectured 2^n/n!"""
    report = mahler_diagnostic(body, samples, seed, threads)
    return _result('volume', body, samples, report.margin, None, True, **report.to_dict())


def get_checks_dict() -> Dict[str, Dict[str, Dict[str, Any]]]:
    """
    Define and return a dictionary of all available checks.

    Each entry names its function, the parameters besides the body, what it
    returns and what it needs from the body (smoothness, self-polarity, planarity).

    Returns:
        dict: Check definitions organized by category.
    """
    samples = {"name": "samples", "required": True, "type": "integer", "description": "number of boundary samples"}
    seed = {"name": "seed", "required": True, "type": "integer", "description": "random seed (unused on planar angle grids)"}
    return {
        "convex_checks": {
            "invariants": {
                "function": "verify_invariants",
                "description": "Homogeneity, evenness, Euler identity and gradient agreement of the gauge",
                "parameters": [samples, seed],
                "returns": "worst of the homogeneity, evenness and Euler defects",
                "requires": {},
            },
            "convexity": {
                "function": "verify_convexity",
                "description": "Sampled convexity probe with global and nearby boundary pairs",
                "parameters": [samples, seed],
                "returns": "max of G(la + (1-l)b) - l G(a) - (1-l) G(b)",
                "requires": {},
            },
        },
        "symplectic_checks": {
            "involution": {
                "function": "verify_involution",
                "description": "Involution identity f(f(x)) = -x of the characteristic map",
                "parameters": [samples, seed],
                "returns": "max |f(f(x)) + x|",
                "requires": {},
            },
            "self_polarity": {
                "function": "verify_self_polarity",
                "description": "Gauge of the symplectic polar on the boundary",
                "parameters": [samples, seed],
                "returns": "max |h_X(-Jx) - 1|, with alpha and the constancy defect of ||f(x)||",
                "requires": {},
            },
            "positivity": {
                "function": "verify_positivity",
                "description": "omega(xi, D_xi f) > 0 on random boundary points and tangents",
                "parameters": [samples, seed],
                "returns": "minimum of omega(xi, D_xi f)",
                "requires": {"smoothness": "C2"},
            },
            "curvature": {
                "function": "verify_curvature",
                "description": "Principal curvatures of the boundary",
                "parameters": [samples, seed],
                "returns": "minimum principal curvature",
                "requires": {"smoothness": "C2"},
            },
        },
        "billiard_checks": {
            "four_periodic": {
                "function": "verify_four_periodic",
                "description": "The 4-periodic family through every boundary sample: edges and symplectic area 4",
                "parameters": [samples, seed],
                "returns": "max edge defect |T(z_i) - z_{i+1}|",
                "requires": {"self_polar": True},
            },
            "inverse": {
                "function": "verify_inverse",
                "description": "T^-1(T(z)) = z with midpoint and orientation checks on exterior points",
                "parameters": [samples, seed],
                "returns": "max |T^-1(T(z)) - z|",
                "requires": {},
            },
            "equivariance": {
                "function": "verify_equivariance",
                "description": "T_{LX}(Lz) = L T_X(z) for random linear symplectomorphisms",
                "parameters": [samples, seed,
                               {"name": "matrices", "required": False, "type": "integer",
                                "description": "number of random symplectic matrices (defaults to 10)"}],
                "returns": "max |T_{LX}(Lz) - L T_X(z)|",
                "requires": {},
            },
        },
        "hypersurface_checks": {
            "invariance": {
                "function": "verify_invariance",
                "description": "T(x + f(x)) = f(x) - x, invariance of Y",
                "parameters": [samples, seed],
                "returns": "max invariance defect",
                "requires": {"self_polar": True},
            },
            "star": {
                "function": "verify_star_shape",
                "description": "Y is star-shaped: monotone polar angle in the plane, nonsingular radial chart and single ray radius above",
                "parameters": [samples, seed,
                               {"name": "rays", "required": False, "type": "integer",
                                "description": "random rays for the multiplicity probe (defaults to 100)"}],
                "returns": "monotonicity defect (plane) or minimum singular value",
                "requires": {"self_polar": True},
            },
            "two-point": {
                "function": "verify_two_point",
                "description": "Characteristic lines meet Y exactly at x + f(x) and x - f(x)",
                "parameters": [samples, seed,
                               {"name": "resolution", "required": False, "type": "integer",
                                "description": "grid points on the line (defaults to 241)"}],
                "returns": "max offset of the crossings from t = +-1",
                "requires": {"self_polar": True},
            },
            "transversality": {
                "function": "verify_transversality",
                "description": "Radial rays are transversal to Y",
                "parameters": [samples, seed],
                "returns": "minimum normalized determinant",
                "requires": {"self_polar": True},
            },
            "injectivity": {
                "function": "verify_injectivity",
                "description": "x -> x + f(x) is injective at sample scale",
                "parameters": [samples, seed],
                "returns": "minimum nearest-neighbour distortion ratio",
                "requires": {"self_polar": True},
            },
            "planarity": {
                "function": "verify_planarity",
                "description": "Diagnostic: planarity of characteristics and whether f maps them to characteristics",
                "parameters": [samples, seed,
                               {"name": "steps", "required": False, "type": "integer",
                                "description": "flow steps over one period (defaults to 400)"}],
                "returns": "max angle between d/dt f(gamma) and f(f(gamma))",
                "requires": {"smoothness": "C2", "self_polar": True, "diagnostic": True},
            },
            "char-image": {
                "function": "verify_char_image",
                "description": "Diagnostic: x +- f(x) maps characteristics of the boundary to characteristics of Y",
                "parameters": [samples, seed],
                "returns": "max angle defect",
                "requires": {"self_polar": True, "diagnostic": True},
            },
            "volume-ratio": {
                "function": "verify_volume_ratio",
                "description": "Volume bounded by Y over volume of X (2 in the plane, measured above)",
                "parameters": [samples, seed],
                "returns": "|ratio - 2|",
                "requires": {"self_polar": True},
            },
            "area-roundtrip": {
                "function": "verify_area_roundtrip",
                "description": "Area construction on sampled Y recovers the boundary",
                "parameters": [samples, seed],
                "returns": "Hausdorff distance between recovered and sampled boundary",
                "requires": {"self_polar": True, "planar": True},
            },
            "area-ratio": {
                "function": "verify_area_ratio",
                "description": "Shoelace area of Y over the area of X equals 2",
                "parameters": [samples, seed],
                "returns": "|ratio - 2|",
                "requires": {"self_polar": True, "planar": True},
            },
        },
        "measure_checks": {
            "volume": {
                "function": "verify_volume",
                "description": "Advisory Monte Carlo volume against 2^n/n!",
                "parameters": [samples, seed,
                               {"name": "threads", "required": False, "type": "integer",
                                "description": "worker threads (defaults to 1)"}],
                "returns": "margin above the bound in standard errors",
                "requires": {"diagnostic": True},
            },
        },
    }


def find_check(name: str) -> Optional[Dict[str, Any]]:
    for category_checks in get_checks_dict().values():
        if name in category_checks:
            return category_checks[name]
    return None


def list_checks() -> List[str]:
    return [name for category_checks in get_checks_dict().values() for name in category_checks]


def checks_to_string(checks_dict: Dict[str, Dict[str, Dict[str, Any]]]) -> str:
    """
    Convert the checks dictionary to a formatted string representation.

    Args:
        checks_dict (dict): Dictionary containing check definitions.

    Returns:
        str: Formatted string describing all checks.
    """
    result = ""
    for category, category_checks in checks_dict.items():
        result += f"[{category}]\n"
        for check_name, info in category_checks.items():
            result += f"-{check_name}: {info['description']}\n"
            result += "    Parameters:\n"
            for param in info['parameters']:
                required = "(required, " if param.get("required", True) else "(optional, "
                result += f"    - {param['name']} {required}{param['type']}): {param['description']}\n"
            if info['requires']:
                needs = ', '.join(f"{k}={v}" for k, v in info['requires'].items())
                result += f"    Requires: {needs}\n"
            result += f"    Returns: {info['returns']}\n\n"
    return result
