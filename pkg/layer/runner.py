import csv
import io
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

from rest_framework.renderers import JSONRenderer

from layer import __version__
from layer.bs_operator import ResonanceSystem
from layer.checks import run_checks
from layer.exceptions import SolverError
from layer.geometry import r_min, scale_surface
from layer.greens import KernelEvalConfig, calibrate_tail_constant
from layer.resonance import embedded_eigenvalues, find_pole, im_mu_closed_form, mu_lowest_order, sweep_delta
from layer.serializer import (
    CheckResultSerializer, EigenvalueSerializer, PoleResultSerializer, PowerLawFitSerializer,
    SweepPointSerializer,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2

EIGENVALUE_COLUMNS = ['n', 'energy', 'classification', 'window']
POLE_COLUMNS = [
    'l', 'k', 'delta', 're_z', 'im_z', 're_mu', 'im_mu', 'width', 're_mu_lowest_order', 'im_mu_lowest_order',
    'im_mu_closed_form', 'residual', 'iterations', 'method', 'condition_free', 'condition_inner', 'n_max',
]
SWEEP_COLUMNS = [
    'delta', 're_z', 'im_z', 're_mu', 'im_mu', 'im_mu_closed_form', 'residual', 'iterations', 'status', 'width',
]
CHECK_COLUMNS = ['name', 'status', 'error', 'bound', 'message']


@dataclass
class RunReport:
    """What a run produced; written out by ``write_report``."""
    columns: list
    rows: list
    exit_code: int = EXIT_OK
    n_max: object = None
    tail_constant: object = None
    summary: dict = field(default_factory=dict)
    lines: list = field(default_factory=list)


def format_value(value):
    if value is None:
        return ''
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, float):
        if math.isnan(value):
            return 'nan'
        return format(value, '.17g')
    return str(value)


def _tail_constant(params, surface, l, numerics):
    k = params.window(l)
    cfg = KernelEvalConfig.for_surface(r_min(surface), k, tail_tol=numerics.tail_tol, n_max=numerics.n_max)
    return cfg.n_max, calibrate_tail_constant(cfg, k)


def run_eigenvalues(config):
    entries = embedded_eigenvalues(config.params, config.n_range)
    rows = EigenvalueSerializer(entries, many=True).data
    lines = [f"n={row['n']:>3}  epsilon={row['energy']: .12f}  {row['classification']}"
             + (f"  window {row['window']}" if row['window'] is not None else '') for row in rows]
    return RunReport(EIGENVALUE_COLUMNS, rows, lines=lines)


def run_pole(config):
    numerics, l = config.numerics, config.l
    delta = config.surface.delta
    surface = scale_surface(config.surface.build(), delta)
    system = ResonanceSystem.build(config.params, surface, l, order=numerics.quad_order,
                                   tail_tol=numerics.tail_tol, n_max=numerics.n_max)
    constant = calibrate_tail_constant(system.cfg)
    pole = find_pole(l, delta, system, seed=config.seed, tol=numerics.root_tol)
    lowest = mu_lowest_order(l, delta, system, neumann_terms=numerics.neumann_terms)
    closed = im_mu_closed_form(l, delta, system, bilinear=numerics.bilinear_closed_form)

    row = dict(PoleResultSerializer(pole).data)
    row.update({'re_mu_lowest_order': lowest.real, 'im_mu_lowest_order': lowest.imag, 'im_mu_closed_form': closed})
    lines = [
        f'pole z = {pole.z.real:.15g} {pole.z.imag:+.6e}i  (window J_{pole.k}, {pole.method}, '
        f'{pole.iterations} steps)',
        f'mu = {pole.mu.real:.6e} {pole.mu.imag:+.6e}i  width {pole.width:.6e}',
        f'lowest order mu = {lowest.real:.6e} {lowest.imag:+.6e}i  closed-form Im mu = {closed:.6e}',
    ]
    return RunReport(POLE_COLUMNS, [row], n_max=system.cfg.n_max, tail_constant=constant, lines=lines)


def run_sweep(config):
    numerics, l = config.numerics, config.l
    surface = config.surface.build()
    n_max, constant = _tail_constant(config.params, surface, l, numerics)
    result = sweep_delta(
        l, config.surface.deltas, config.params, surface, order=numerics.quad_order, tail_tol=numerics.tail_tol,
        n_max=numerics.n_max, tol=numerics.root_tol, threads=numerics.threads,
        seed_from_previous=config.surface.seed_from_previous, bilinear=numerics.bilinear_closed_form,
    )
    rows = SweepPointSerializer(result.points, many=True).data
    converged = result.converged
    summary = {
        'converged': len(converged),
        'points': len(result.points),
        'fit_im': PowerLawFitSerializer(result.fit_im).data if result.fit_im else None,
        'fit_re': PowerLawFitSerializer(result.fit_re).data if result.fit_re else None,
    }
    lines = [f'{len(converged)} of {len(result.points)} sweep points converged']
    for label, fit in (('|Im mu|', result.fit_im), ('|Re mu|', result.fit_re)):
        if fit is not None:
            lines.append(f'{label} ~ {fit.prefactor:.6e} delta^{fit.exponent:.4f}  (R^2 = {fit.r_squared:.6f})')
    exit_code = EXIT_OK if result.fit_im is not None else EXIT_FAILURE
    n_used = max((point.pole.n_max for point in converged), default=n_max)
    return RunReport(SWEEP_COLUMNS, rows, exit_code=exit_code, n_max=n_used, tail_constant=constant,
                     summary=summary, lines=lines)


def run_validate(config):
    results = run_checks()
    rows = CheckResultSerializer(results, many=True).data
    failed = [result for result in results if not result.passed]
    lines = [f"{'PASS' if result.passed else 'FAIL'}  {result.name}  error {result.error:.3e} (bound {result.bound:.0e})"
             + (f'  {result.message}' if result.message else '') for result in results]
    lines.append(f'{len(results) - len(failed)} passed, {len(failed)} failed')
    summary = {'passed': len(results) - len(failed), 'failed': len(failed)}
    return RunReport(CHECK_COLUMNS, rows, exit_code=EXIT_FAILURE if failed else EXIT_OK, summary=summary,
                     lines=lines)


MODES = {
    'eigenvalues': run_eigenvalues,
    'pole': run_pole,
    'sweep': run_sweep,
    'validate': run_validate,
}


def metadata(config, report):
    return {
        'tool': f'layer {__version__}',
        'config': config.as_dict(),
        'n_max': report.n_max,
        'tail_constant': report.tail_constant,
        'summary': report.summary,
    }


def render_csv(config, report):
    buffer = io.StringIO()
    renderer = JSONRenderer()
    for key, value in metadata(config, report).items():
        buffer.write(f'# {key}: {renderer.render(value).decode() or "null"}\n')
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(report.columns)
    for row in report.rows:
        writer.writerow([format_value(row.get(column)) for column in report.columns])
    return buffer.getvalue()


def render_json(config, report):
    payload = {
        'metadata': metadata(config, report),
        'columns': report.columns,
        'rows': [{column: row.get(column) for column in report.columns} for row in report.rows],
    }
    return JSONRenderer().render(payload).decode() + '\n'


def plot_script(config, report):
    """gnuplot commands for the CSV output, addressing columns by header name."""
    data = Path(config.output.path).name
    head = [
        f'# {metadata(config, report)["tool"]}: {config.mode} plot',
        "set datafile separator ','",
        "set datafile commentschars '#'",
        'set key autotitle columnhead',
        'set grid',
    ]
    if config.mode == 'sweep':
        body = [
            'set logscale xy',
            "set xlabel 'delta'",
            "set ylabel '|mu|'",
            f"plot '{data}' using 'delta':(abs(column('im_mu'))) with linespoints title '|Im mu|', \\",
            f"     '{data}' using 'delta':(abs(column('re_mu'))) with linespoints title '|Re mu|', \\",
            f"     '{data}' using 'delta':(abs(column('im_mu_closed_form'))) with lines dashtype 2 "
            "title '|Im mu| closed form'",
        ]
    elif config.mode == 'pole':
        body = [
            "set xlabel 'Re z'",
            "set ylabel 'Im z'",
            f"plot '{data}' using 're_z':'im_z' with points pointtype 7 title 'pole'",
        ]
    else:
        body = [
            "set xlabel 'n'",
            "set ylabel 'epsilon_n'",
            f"plot '{data}' using 'n':'energy' with points pointtype 7 title 'epsilon_n'",
        ]
    return '\n'.join(head + body) + '\n'


def write_report(config, report):
    """Write the output file and, when asked for, the plot script; returns the paths written."""
    path = Path(config.output.path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True)
    render = render_json if config.output.format == 'json' else render_csv
    with path.open('w', encoding='utf-8', newline='\n') as handle:
        handle.write(render(config, report))
    written = [path]
    if config.output.emit_plot_script:
        if config.output.format != 'csv' or config.mode == 'validate':
            logger.warning('plot scripts need CSV output of eigenvalues, pole or sweep; skipped')
        else:
            script = Path(config.output.plot_script_path)
            with script.open('w', encoding='utf-8', newline='\n') as handle:
                handle.write(plot_script(config, report))
            written.append(script)
    return written


def run(config, stdout=None):
    """Execute a validated config; returns the exit code."""
    try:
        report = MODES[config.mode](config)
    except SolverError as exc:
        logger.error('%s run failed: %s', config.mode, exc)
        if stdout is not None:
            stdout.write(f'{config.mode} failed: {exc}')
        return EXIT_FAILURE
    for path in write_report(config, report):
        logger.info('wrote %s', path)
    if stdout is not None:
        for line in report.lines:
            stdout.write(line)
    return report.exit_code
