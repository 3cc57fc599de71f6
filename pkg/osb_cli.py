"""
Command line front end for the outer billiard toolkit.

Builds bodies from BodySpec JSON, iterates the outer billiard map, runs the
registered checks and verification suites, and writes plot data (CSV) or
deterministic JSON reports. Exit codes: 0 pass, 2 input error, 3 failed
mathematical gate, 4 solver failure, 1 anything unexpected.
"""

import functools
import json
import math
import os
import sys
import time
import traceback
from dataclasses import dataclass, replace
from typing import Any, Dict, Optional

import click
import numpy as np
from colorama import Fore, Style, just_fix_windows_console
from dotenv import load_dotenv

import osb_lib
from run_logger import get_logger, new_session_id
from streaming_logger import get_streaming_logger

DEFAULT_SEED = 20240917
DEFAULT_SAMPLES = 200
DEFAULT_THREADS = 1

TOLERANCE_FLAGS = ('eq_tol', 'newton_tol', 'newton_max_iter', 'fd_step')


@dataclass(frozen=True)
class RunConfig:
    spec_source: Optional[str]
    tolerances: Dict[str, Any]
    seed: int
    output: Optional[str]
    output_format: Optional[str]
    samples: int
    threads: int


def _env_int(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw.strip() == '':
        return default
    try:
        return int(raw)
    except ValueError:
        raise osb_lib.InvalidInputError(f"{name} must be an integer, got {raw!r}")


def load_configuration(spec_source: Optional[str] = None, seed: Optional[int] = None,
                       samples: Optional[int] = None, threads: Optional[int] = None,
                       output: Optional[str] = None, output_format: Optional[str] = None,
                       **tolerance_flags) -> RunConfig:
    """Load configuration from command line flags with .env fallback"""
    load_dotenv()

    seed = seed if seed is not None else _env_int('OSB_SEED', DEFAULT_SEED)
    samples = samples if samples is not None else _env_int('OSB_SAMPLES', DEFAULT_SAMPLES)
    threads = threads if threads is not None else _env_int('OSB_THREADS', DEFAULT_THREADS)
    tolerances = {k: v for k, v in tolerance_flags.items() if k in TOLERANCE_FLAGS and v is not None}

    if samples < 1:
        raise osb_lib.InvalidInputError(f"samples must be at least 1, got {samples}")
    if threads < 1:
        raise osb_lib.InvalidInputError(f"threads must be at least 1, got {threads}")
    if output_format not in (None, 'csv', 'json'):
        raise osb_lib.InvalidInputError(f"output format must be csv or json, got {output_format!r}")
    for name, value in tolerances.items():
        if not (math.isfinite(value) and value > 0):
            raise osb_lib.InvalidInputError(f"--{name.replace('_', '-')} must be positive, got {value}")

    click.echo("Configuration loaded:", err=True)
    click.echo(f"  Seed: {seed}", err=True)
    click.echo(f"  Threads: {threads}", err=True)
    click.echo(f"  Samples: {samples}", err=True)
    click.echo(f"  Tolerances: {tolerances or 'body defaults'}", err=True)

    return RunConfig(spec_source=spec_source, tolerances=tolerances, seed=seed, output=output,
                     output_format=output_format, samples=samples, threads=threads)


def read_spec_source(source: str) -> str:
    """A spec argument is inline JSON when it starts with '{', otherwise a file path"""
    if source.lstrip().startswith('{'):
        return source
    try:
        with open(source, 'r', encoding='utf-8') as f:
            return f.read()
    except OSError as e:
        raise osb_lib.InvalidInputError(f"cannot read spec file {source}: {e.strerror}")


def load_body(config: RunConfig) -> osb_lib.ConvexBody:
    spec = osb_lib.parse_spec(read_spec_source(config.spec_source))
    return osb_lib.realize(spec, config.tolerances)


def parse_vector(text: str, name: str) -> np.ndarray:
    try:
        values = [float(part) for part in text.split(',')]
    except ValueError:
        raise osb_lib.InvalidInputError(f"{name} must be comma separated numbers, got {text!r}")
    return osb_lib.as_vector(values, name=name)


def execute_check(check_name: str, body: osb_lib.ConvexBody, samples: int, seed: int,
                  check_input: Optional[Dict[str, Any]] = None) -> osb_lib.CheckResult:
    """
    Executes the registered check with the given input parameters.

    Args:
        check_name (str): Registry name of the check.
        body (ConvexBody): Realized body.
        samples (int): Sample count.
        seed (int): Random seed.
        check_input (dict, optional): Extra keyword parameters of the check.

    Returns:
        CheckResult: The result of the check.

    Raises:
        InvalidInputError: The check is unknown or not callable.
    """
    info = osb_lib.find_check(check_name)
    if info is None:
        raise osb_lib.InvalidInputError(f"Unknown check: {check_name}")
    function_name = info['function']
    if not hasattr(osb_lib, function_name) or not callable(getattr(osb_lib, function_name)):
        raise osb_lib.InvalidInputError(f"Unknown or uncallable check function: {function_name}")
    check = getattr(osb_lib, function_name)
    return replace(check(body, samples, seed, **(check_input or {})), check=check_name)


def emit(config: RunConfig, text: str):
    """Write the command output to --output atomically, or to stdout"""
    if config.output:
        osb_lib.write_atomic(config.output, text)
        click.echo(f"Wrote {config.output}", err=True)
    else:
        click.echo(text, nl=False)


def result_exit_code(result: Dict[str, Any]) -> int:
    if result.get('pass'):
        return 0
    return 4 if result.get('details', {}).get('exit_code') == 4 else 3


def paint(passed: Optional[bool], text: str) -> str:
    if passed is None:
        return f"{Fore.YELLOW}{text}{Style.RESET_ALL}"
    return f"{Fore.GREEN if passed else Fore.RED}{text}{Style.RESET_ALL}"


def run_options(default_format: Optional[str] = None, spec: bool = True):
    """Options shared by every command that realizes a body"""
    def decorator(fn):
        options = [
            click.option('--seed', type=int, default=None, help='Random seed (env OSB_SEED)'),
            click.option('--samples', type=int, default=None, help='Sample count (env OSB_SAMPLES)'),
            click.option('--threads', type=int, default=None, help='Worker threads (env OSB_THREADS)'),
            click.option('--output', '-o', type=click.Path(dir_okay=False), default=None,
                         help='Write output here instead of stdout'),
            click.option('--format', 'output_format', type=click.Choice(['csv', 'json']),
                         default=default_format, show_default=True),
            click.option('--eq-tol', type=float, default=None, help='Equality tolerance override'),
            click.option('--newton-tol', type=float, default=None, help='Newton residual tolerance override'),
            click.option('--newton-max-iter', type=int, default=None, help='Newton iteration cap override'),
            click.option('--fd-step', type=float, default=None, help='Finite difference step override'),
        ]
        if spec:
            options.append(click.option('--spec', 'spec_source', required=True,
                                        help='BodySpec JSON file or inline JSON'))
        for option in reversed(options):
            fn = option(fn)
        return fn
    return decorator


def reported(command: str):
    """Wrap a command: configuration, run logging and the exception-to-exit-code mapping"""
    def decorator(fn):
        @functools.wraps(fn)
        def wrapper(**kwargs):
            logger = get_logger()
            session_id = new_session_id()
            run_keys = ('spec_source', 'seed', 'samples', 'threads', 'output', 'output_format') + TOLERANCE_FLAGS
            try:
                config = load_configuration(**{k: kwargs.pop(k) for k in run_keys if k in kwargs})
                exit_code = fn(session_id, config, **kwargs) or 0
            except osb_lib.OSBError as e:
                logger.log_error(session_id, type(e).__name__, e.message, dict(e.details, command=command))
                logger.log_run_complete(session_id, 'error')
                click.echo(osb_lib.dumps_report(e.to_dict()), err=True, nl=False)
                sys.exit(e.exit_code)
            except Exception as e:
                logger.log_error(session_id, type(e).__name__, str(e), {'command': command, 'traceback': traceback.format_exc()})
                logger.log_run_complete(session_id, 'error')
                click.echo(f"Error: {type(e).__name__}: {e}", err=True)
                sys.exit(1)
            logger.log_run_complete(session_id, 'completed' if exit_code == 0 else 'failed')
            if exit_code:
                sys.exit(exit_code)
        return wrapper
    return decorator


def begin_run(session_id: str, command: str, config: RunConfig, body: Optional[osb_lib.ConvexBody],
              **parameters):
    body_hash = body.meta.get('spec_hash') if body is not None else None
    params = dict(parameters, seed=config.seed, samples=config.samples, threads=config.threads,
                  tolerances=config.tolerances)
    get_logger().log_run_start(session_id, command, params, body_hash)


@click.group()
def cli():
    """Symplectically self-polar bodies and their outer billiards."""


@cli.command('body')
@run_options(default_format='csv')
@click.option('--eval', 'eval_points', multiple=True, help='Comma separated point; repeatable')
@click.option('--boundary-samples', type=int, default=None, help='Emit this many boundary samples')
@reported('body')
def cmd_body(session_id, config, eval_points, boundary_samples):
    """Realize a spec; print gauge values, boundary samples or a summary."""
    body = load_body(config)
    begin_run(session_id, 'body', config, body, eval=list(eval_points), boundary_samples=boundary_samples)
    if eval_points and boundary_samples is not None:
        raise osb_lib.InvalidInputError("--eval and --boundary-samples are exclusive")

    if eval_points:
        points = [parse_vector(text, 'eval point') for text in eval_points]
        values = [osb_lib.gauge(body, p) for p in points]
        if config.output_format == 'json':
            emit(config, osb_lib.dumps_report([{'point': p, 'gauge': v} for p, v in zip(points, values)]))
        else:
            emit(config, ''.join(osb_lib.format_float(v) + '\n' for v in values))
        return 0

    if boundary_samples is not None:
        if boundary_samples < 1:
            raise osb_lib.InvalidInputError(f"--boundary-samples must be positive, got {boundary_samples}")
        points = osb_lib.boundary_array(body, boundary_samples, config.seed)
        values = osb_lib.gauge_batch(body, points)
        header = [f'x_{i + 1}' for i in range(body.dim)] + ['gauge']
        rows = [list(map(float, p)) + [float(v)] for p, v in zip(points, values)]
        if config.output_format == 'json':
            emit(config, osb_lib.dumps_report({'header': header, 'rows': rows}))
        else:
            emit(config, osb_lib.rows_to_csv(header, rows))
        return 0

    summary = {
        'label': body.label,
        'dim': body.dim,
        'smoothness': body.smoothness,
        'body_hash': body.meta.get('spec_hash'),
        'spec': json.loads(osb_lib.serialize_spec(body.spec)),
        'tolerances': body.tolerances.to_dict(),
    }
    emit(config, osb_lib.dumps_report(summary))
    return 0


@cli.command('orbit')
@run_options(default_format='csv')
@click.option('--start', required=True, help='Comma separated exterior starting point')
@click.option('--steps', type=int, required=True, help='Number of iterations')
@click.option('--inverse', is_flag=True, help='Iterate the inverse map')
@click.option('--stream', is_flag=True, help='Mirror iterates to logs/streaming/<session>.csv while running')
@reported('orbit')
def cmd_orbit(session_id, config, start, steps, inverse, stream):
    """Iterate the outer billiard map from an exterior point."""
    body = load_body(config)
    z0 = parse_vector(start, 'start')
    begin_run(session_id, 'orbit', config, body, start=z0, steps=steps, inverse=inverse)

    on_step = None
    streamer = get_streaming_logger() if stream else None
    if streamer is not None:
        streamer.cleanup_old_sessions()
        streamer.start_session(session_id, osb_lib.orbit_header(body.dim))
        previous = [osb_lib.as_vector(z0, body.dim, 'start')]

        def on_step(k, z_next, solution):
            streamer.append_row(session_id, [k] + [float(v) for v in previous[0]]
                                + [float(v) for v in solution.x] + [solution.t, solution.residual])
            previous[0] = z_next

    try:
        trace = osb_lib.iterate(body, z0, steps, inverse=inverse, on_step=on_step)
    finally:
        if streamer is not None:
            streamer.complete_session(session_id)

    stats = osb_lib.boundedness_stats(trace)
    if config.output_format == 'json':
        payload = osb_lib.orbit_to_json(trace, body.meta.get('spec_hash'), body.tolerances.to_dict(), config.seed)
        payload['boundedness'] = stats
        emit(config, osb_lib.dumps_report(payload))
    else:
        emit(config, osb_lib.orbit_to_csv(trace))
    click.echo(f"Boundedness: max |z| {stats.max_norm:.6g}, min |z| {stats.min_norm:.6g}, "
               f"drift {stats.drift:.3g} over {stats.n_points} points", err=True)

    if trace.failure is not None:
        get_logger().log_solver_failure(session_id, 'iterate', trace.failure)
        click.echo(paint(False, f"Orbit truncated at step {trace.failure.get('step')}: "
                                f"{trace.failure.get('error_message')}"), err=True)
        return 4
    return 0


def _base_point(body: osb_lib.ConvexBody, boundary_angle: Optional[float], direction: Optional[str]) -> np.ndarray:
    """Boundary point from an angle in the (e_1, e_2) plane or from a direction"""
    if boundary_angle is not None and direction is not None:
        raise osb_lib.InvalidInputError("--boundary-angle and --direction are exclusive")
    if direction is not None:
        v = parse_vector(direction, 'direction')
    else:
        theta = boundary_angle or 0.0
        v = np.zeros(body.dim)
        v[0], v[1] = math.cos(theta), math.sin(theta)
    return osb_lib.boundary_project(body, v).x


@cli.command('periodic4')
@run_options(default_format='json')
@click.option('--boundary-angle', type=float, default=None, help='Angle of the base point in the (e1, e2) plane')
@click.option('--direction', default=None, help='Comma separated direction of the base point')
@click.option('--scaled', is_flag=True, help='Use f(x)/||f(x)|| (bodies with X = alpha X^omega)')
@reported('periodic4')
def cmd_periodic4(session_id, config, boundary_angle, direction, scaled):
    """Build and verify the centrally symmetric 4-periodic orbit through a boundary point."""
    body = load_body(config)
    x = _base_point(body, boundary_angle, direction)
    begin_run(session_id, 'periodic4', config, body, base=x, scaled=scaled)

    if scaled:
        family = osb_lib.scaled_four_periodic_family(body, x)
        expected_area = 4.0 / family.f_gauge
    else:
        family = osb_lib.four_periodic_family(body, x)
        expected_area = 4.0
    threshold = osb_lib.gate_tolerance(body, 1e-7, 1e-5)
    area_defect = abs(family.area - expected_area)
    passed = family.max_edge_defect <= threshold and area_defect <= 1e-9 * max(1.0, expected_area)

    payload = dict(family.to_dict(), body_hash=body.meta.get('spec_hash'), scaled=scaled,
                   max_edge_defect=family.max_edge_defect, expected_area=expected_area,
                   area_defect=area_defect, threshold=threshold)
    payload['pass'] = passed
    emit(config, osb_lib.dumps_report(payload))
    click.echo(paint(passed, f"{'PASS' if passed else 'FAIL'} max edge defect {family.max_edge_defect:.3e}, "
                             f"area {family.area:.12g}"), err=True)
    return 0 if passed else 3


# curvature is registered with the symplectic checks but is offered here too
HYPERSURFACE_CHECKS = list(osb_lib.get_checks_dict()['hypersurface_checks']) + ['curvature']


@cli.command('hypersurface')
@run_options(default_format='json')
@click.option('--check', 'check_name', type=click.Choice(HYPERSURFACE_CHECKS), required=True)
@reported('hypersurface')
def cmd_hypersurface(session_id, config, check_name):
    """Run one check of the invariant hypersurface Y."""
    body = load_body(config)
    begin_run(session_id, 'hypersurface', config, body, check=check_name)
    start_ms = _now_ms()
    result = execute_check(check_name, body, config.samples, config.seed).to_dict()
    get_logger().log_check_execution(session_id, check_name, {'samples': config.samples, 'seed': config.seed},
                                     result, _now_ms() - start_ms, True)
    emit(config, osb_lib.dumps_report(result))
    click.echo(paint(result['pass'], f"{'PASS' if result['pass'] else 'FAIL'} {check_name}: "
                                     f"worst {result['worst_value']:.3e}"), err=True)
    return result_exit_code(result)


def _read_curve(path: str) -> np.ndarray:
    try:
        with open(path, 'r', encoding='utf-8') as f:
            return osb_lib.read_curve_csv(f.read())
    except OSError as e:
        raise osb_lib.InvalidInputError(f"cannot read curve file {path}: {e.strerror}")


@cli.command('recover')
@run_options(default_format='csv', spec=False)
@click.option('--y-curve', required=True, help='CSV of the closed curve Y (x,y per row)')
@click.option('--truth', default=None, help='CSV of the true boundary; adds a Hausdorff report')
@reported('recover')
def cmd_recover(session_id, config, y_curve, truth):
    """Recover the boundary from Y by the area construction."""
    begin_run(session_id, 'recover', config, None, y_curve=y_curve, truth=truth)
    vertices = _read_curve(y_curve)
    recovered = osb_lib.area_construction_2d(vertices)

    report = None
    if truth is not None:
        report = {
            'hausdorff': osb_lib.hausdorff_distance(recovered, _read_curve(truth)),
            'n_vertices': int(len(vertices)),
            'y_area': osb_lib.shoelace_area(vertices),
            'recovered_area': osb_lib.shoelace_area(recovered),
        }

    if config.output_format == 'json':
        emit(config, osb_lib.dumps_report({'vertices': recovered.vertices, 'report': report}))
    else:
        emit(config, osb_lib.curve_to_csv(recovered.vertices))
        if report is not None:
            click.echo(osb_lib.dumps_report(report), err=True, nl=False)
    return 0


@cli.command('verify')
@run_options(default_format='json')
@click.option('--level', type=click.Choice(sorted(osb_lib.LEVELS)), default='quick', show_default=True)
@reported('verify')
def cmd_verify(session_id, config, level):
    """Run the verification suite; exit 0 iff every check passes."""
    body = load_body(config)
    begin_run(session_id, 'verify', config, body, level=level)
    logger = get_logger()

    def on_check(result, elapsed_ms):
        data = result.to_dict()
        logger.log_check_execution(session_id, result.check, {'samples': result.n_samples, 'seed': config.seed},
                                   data, elapsed_ms, 'error_type' not in data['details'])
        if data['details'].get('exit_code') == 4:
            logger.log_solver_failure(session_id, result.check, data['details'])
        click.echo(paint(result.passed, f"  {'PASS' if result.passed else 'FAIL'}  {result.check}"), err=True)

    click.echo(f"Running {level} suite on {body.label}", err=True)
    suite = osb_lib.run_suite(body, level, config.seed, threads=config.threads, on_check=on_check)
    for skipped in suite.skipped:
        click.echo(paint(None, f"  SKIP  {skipped['check']} ({skipped['reason']})"), err=True)

    payload = dict(suite.to_dict(), failed_checks=suite.failed_checks, tolerances=body.tolerances.to_dict())
    emit(config, osb_lib.dumps_report(payload))
    click.echo(paint(suite.passed, 'ALL CHECKS PASSED' if suite.passed
                     else f"FAILED: {', '.join(suite.failed_checks)}"), err=True)
    if suite.passed:
        return 0
    return 4 if suite.solver_failure else 3


@cli.command('volume')
@run_options(default_format='json')
@click.option('--n', 'n_samples', type=int, default=1000000, show_default=True, help='Monte Carlo points')
@reported('volume')
def cmd_volume(session_id, config, n_samples):
    """Monte Carlo volume with the Mahler-bound diagnostic."""
    body = load_body(config)
    begin_run(session_id, 'volume', config, body, n=n_samples)
    estimate = osb_lib.mc_volume(body, n_samples, config.seed, threads=config.threads)
    diagnostic = osb_lib.mahler_diagnostic(body, seed=config.seed, estimate=estimate)
    emit(config, osb_lib.dumps_report(dict(estimate.to_dict(), body_hash=body.meta.get('spec_hash'),
                                           mahler_diagnostic=diagnostic)))
    click.echo(paint(not diagnostic.flagged, f"volume {estimate.value:.6g} +- {estimate.stderr:.2g}, "
                                             f"bound {diagnostic.bound:.6g}: {diagnostic.note}"), err=True)
    return 0


@cli.command('checks')
def cmd_checks():
    """List the registered checks."""
    click.echo(osb_lib.checks_to_string(osb_lib.get_checks_dict()))


@cli.command('normalize')
@run_options(default_format='json')
@reported('normalize')
def cmd_normalize(session_id, config):
    """Rescale a body with X = alpha X^omega to its self-polar multiple."""
    body = load_body(config)
    begin_run(session_id, 'normalize', config, body)
    normalized = osb_lib.normalize_self_polar(body, config.samples, config.seed)
    payload = {
        'alpha': normalized.meta['alpha'],
        'constancy_defect': normalized.meta['constancy_defect'],
        'scale': 1.0 / math.sqrt(normalized.meta['alpha']),
        'spec': json.loads(osb_lib.serialize_spec(normalized.spec)) if normalized.spec is not None else None,
    }
    emit(config, osb_lib.dumps_report(payload))
    return 0


def _now_ms() -> float:
    return time.time() * 1000


def main():
    just_fix_windows_console()
    cli()


if __name__ == '__main__':
    main()
