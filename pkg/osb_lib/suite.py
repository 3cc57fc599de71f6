"""
Verification suites: the registry checks run in a fixed order at fixed sizes.

``quick`` exercises every applicable check at small sample counts; ``full``
runs the acceptance-sized counts and adds the diagnostics.
"""

import time
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, List, Optional

from . import osb_checks
from .convex_core import ConvexBody
from .errors import NumericFailureError, OSBError
from .osb_checks import CheckResult, find_check
from .reports import Report

SUITE_ORDER = [
    'invariants', 'convexity', 'self_polarity', 'involution', 'positivity', 'curvature',
    'four_periodic', 'inverse', 'equivariance',
    'invariance', 'star', 'two-point', 'transversality', 'injectivity',
    'area-roundtrip', 'area-ratio',
    'planarity', 'char-image', 'volume-ratio', 'volume',
]

LEVELS: Dict[str, Dict[str, int]] = {
    'quick': {
        'invariants': 64, 'convexity': 400, 'self_polarity': 32, 'involution': 64,
        'positivity': 64, 'curvature': 32, 'four_periodic': 16, 'inverse': 16,
        'equivariance': 4, 'invariance': 16, 'star': 64, 'two-point': 4,
        'transversality': 16, 'injectivity': 256, 'area-roundtrip': 2000, 'area-ratio': 2000,
    },
    'full': {
        'invariants': 1000, 'convexity': 4000, 'self_polarity': 200, 'involution': 1000,
        'positivity': 1000, 'curvature': 200, 'four_periodic': 1000, 'inverse': 1000,
        'equivariance': 100, 'invariance': 1000, 'star': 1000, 'two-point': 100,
        'transversality': 1000, 'injectivity': 2000, 'area-roundtrip': 10000, 'area-ratio': 100000,
        'planarity': 2, 'char-image': 50, 'volume-ratio': 400, 'volume': 1000000,
    },
}

EXTRA_ARGS: Dict[str, Dict[str, Dict[str, Any]]] = {
    'quick': {'star': {'rays': 8}, 'equivariance': {'matrices': 2}},
    'full': {'star': {'rays': 100}, 'equivariance': {'matrices': 10}},
}


@dataclass(frozen=True)
class SuiteReport(Report):
    level: str
    seed: int
    body: str
    body_hash: Optional[str]
    results: List[CheckResult]
    skipped: List[Dict[str, str]] = field(default_factory=list)
    passed: bool = True

    @property
    def solver_failure(self) -> bool:
        return any(r.details.get('error_type') in _SOLVER_ERRORS for r in self.results)

    @property
    def failed_checks(self) -> List[str]:
        return [r.check for r in self.results if not r.passed]


_SOLVER_ERRORS = {cls.__name__ for cls in (NumericFailureError, *NumericFailureError.__subclasses__())}


def _skip_reason(body: ConvexBody, requires: Dict[str, Any], self_polar: Optional[bool]) -> Optional[str]:
    needed = requires.get('smoothness')
    if needed and not body.smooth_at_least(needed):
        return f"needs {needed}, body is {body.smoothness}"
    if requires.get('planar') and body.dim != 2:
        return "planar bodies only"
    if requires.get('self_polar') and self_polar is False:
        return "body failed the self-polarity gate"
    return None


def run_check(name: str, body: ConvexBody, samples: int, seed: int, **kwargs) -> CheckResult:
    """Run one registry check; library errors become a failed result carrying the error"""
    info = find_check(name)
    if info is None:
        raise ValueError(f"Unknown check: {name}")
    check = getattr(osb_checks, info['function'])
    try:
        result = check(body, samples, seed, **kwargs)
    except OSBError as e:
        return CheckResult(check=name, body_hash=body.meta.get('spec_hash'), n_samples=samples,
                           worst_value=float('nan'), threshold=None, passed=False, details=e.to_dict())
    return replace(result, check=name)


def run_suite(body: ConvexBody, level: str, seed: int, threads: int = 1,
              on_check: Optional[Callable[[CheckResult, float], None]] = None) -> SuiteReport:
    """
    Run every applicable check of a level on one body.

    Args:
        body (ConvexBody): Realized body.
        level (str): 'quick' or 'full'.
        seed (int): Seed shared by all checks.
        threads (int): Worker threads for Monte Carlo checks.
        on_check (callable, optional): Called with each result and its wall time in ms.

    Returns:
        SuiteReport: results in suite order plus skipped checks with reasons.
    """
    if level not in LEVELS:
        raise ValueError(f"Unknown level: {level}")
    sizes = LEVELS[level]
    extras = dict(EXTRA_ARGS[level])
    if 'volume' in sizes:
        extras['volume'] = {'threads': threads}
    results: List[CheckResult] = []
    skipped: List[Dict[str, str]] = []
    self_polar: Optional[bool] = None
    for name in SUITE_ORDER:
        if name not in sizes:
            continue
        info = find_check(name)
        reason = _skip_reason(body, info['requires'], self_polar)
        if reason is not None:
            skipped.append({'check': name, 'reason': reason})
            continue
        start_ms = time.time() * 1000
        result = run_check(name, body, sizes[name], seed, **extras.get(name, {}))
        elapsed_ms = time.time() * 1000 - start_ms
        if name == 'self_polarity':
            self_polar = result.passed
        results.append(result)
        if on_check is not None:
            on_check(result, elapsed_ms)
    return SuiteReport(level=level, seed=seed, body=body.label, body_hash=body.meta.get('spec_hash'),
                       results=results, skipped=skipped, passed=all(r.passed for r in results))
