"""
Command-line front end. Every subcommand builds a RunConfig, runs, and writes one CSV table.

Exit codes: 0 when every run completed, 1 on resource limits or failed asserted invariants,
2 on configuration and usage errors.
"""
import sys
import math
import time
import logging
import argparse
import concurrent.futures

import numpy as np
import tqdm

from qspectral.config import ESTIMATION_SUBCOMMANDS, RunConfig, build_config, load_config_file
from qspectral.consts import ROUNDOFF_FLOOR
from qspectral.corpus import get_entry, hessian_quadratic_entry, sparse_lattice_entry
from qspectral.exceptions import ConfigError, ParameterError, RecoveryError, ResourceLimitError
from qspectral.findiff import (FindiffParams, abs_sum_check, coeff_bound_check, error_bound_1d,
                               second_order_coeffs, select_findiff_params, stencil_field, stencil_offset_constant,
                               violation_fraction)
from qspectral.gradient import GradientEstimator
from qspectral.hessian import HessianEstimator, HessianJob
from qspectral.oracle import FunctionOracle, QueryLedger, cost_of_phase_oracle
from qspectral.results import (BoundReport, LedgerReport, ResultTable, SweepReport, above_roundoff,
                               result_row)
from qspectral.sparse import estimate_hessian_sparse
from qspectral.spectral import SpectralParams, gradient_form, measured_kappa, select_N, spectral_error_bound

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2


def _run_id(config: RunConfig):
    return f'{config.subcommand}:{config.resolved_function}:{config.resolved_method}:{config.epsilon:g}'


def _map_seeds(fn, config: RunConfig):
    """fn(seed) for every seed, up to config.jobs at a time, results in seed order."""
    with concurrent.futures.ThreadPoolExecutor(max_workers=config.jobs) as executor:
        return list(tqdm.tqdm(executor.map(fn, config.seeds), total=len(config.seeds),
                              disable=not config.verbose, desc='seeds'))


def _radius_kappa(oracle):
    truth = oracle.truth
    r = truth.radius if truth is not None and truth.radius is not None else 1.0
    kappa = truth.kappa if truth is not None and truth.kappa is not None else 1.0
    return r, kappa


def _findiff_override(config: RunConfig, oracle):
    if config.m is None and config.a is None:
        return None
    if config.m is None:
        raise ConfigError('overriding a needs m as well')
    r, _ = _radius_kappa(oracle)
    params = select_findiff_params(oracle.d, 0.0, config.epsilon, r, m=config.m)
    return FindiffParams(params.m, config.a if config.a is not None else params.a, 'probe')


def gradient_params(config: RunConfig, oracle, method):
    """Method parameters fixed by the N, m and a overrides, or None to let the planner choose."""
    if method == 'findiff':
        return _findiff_override(config, oracle)
    if config.N is None:
        return None
    r, kappa = _radius_kappa(oracle)
    return SpectralParams.for_gradient(r, kappa, N=config.N)


def hessian_params(config: RunConfig, oracle, method):
    if method.startswith('findiff'):
        return _findiff_override(config, oracle)
    if config.N is None:
        return None
    r, kappa = _radius_kappa(oracle)
    return SpectralParams.for_hessian(r, kappa, N=config.N)


def run_gradient(config: RunConfig) -> ResultTable:
    """One row per seed with the l_inf error against the known gradient."""
    entry = get_entry(config.resolved_function)
    method = config.resolved_method
    oracle = entry.oracle
    params = gradient_params(config, oracle, method)
    estimator = GradientEstimator(oracle, method, cap=config.cap, c_T=config.c_T, kappa_mode=config.kappa_mode,
                                  log_base=config.log_base)

    def one(seed):
        base = dict(run_id=_run_id(config), seed=seed, function=entry.name, method=method, d=oracle.d,
                    epsilon=config.epsilon, rho=config.rho)
        start = time.perf_counter()
        try:
            res = estimator.estimate(config.epsilon, config.rho, np.random.default_rng(seed), M=config.M,
                                     params=params, ledger=QueryLedger())
        except ResourceLimitError as err:
            logging.error(f'seed {seed}: {err}')
            return result_row(**base)
        wall = (time.perf_counter() - start) * 1000
        error = float(np.abs(res.g - entry.truth.gradient).max())
        return result_row(**base, n=res.plan.n, N_or_m=res.plan.N_or_m, a=res.plan.a, error_linf=error,
                          success=error <= config.epsilon, sim_calls=res.ledger.simulated_oracle_calls,
                          theory_cost=res.ledger.theoretical_cost, wall_ms=wall)

    table = ResultTable.from_rows(f'gradient of {entry.name}', _map_seeds(one, config))
    logging.info(f'{table}: {table.success_count()}/{len(table)} runs within epsilon')
    return table


def run_hessian(config: RunConfig) -> ResultTable:
    """Dense (hessian) or sparse (sparse-hessian) estimation, one row per seed."""
    entry = get_entry(config.resolved_function)
    method = config.resolved_method
    oracle = entry.oracle
    params = hessian_params(config, oracle, method)
    dense = None
    if not method.endswith('sparse'):
        dense = HessianEstimator(oracle, method, progress=False, cap=config.cap, findiff_path=config.findiff_path,
                                 c_T=config.c_T, log_base=config.log_base)

    def one(seed):
        base = dict(run_id=_run_id(config), seed=seed, function=entry.name, method=method, d=oracle.d,
                    epsilon=config.epsilon, rho=config.rho)
        rng = np.random.default_rng(seed)
        start = time.perf_counter()
        try:
            if dense is not None:
                res = dense.estimate(config.epsilon, config.rho, rng, M=config.M, params=params, ledger=QueryLedger())
                extra = dict(n=res.plan.grid.n, N_or_m=res.plan.N_or_m, a=res.plan.grid.a)
            else:
                job = HessianJob(oracle.with_ledger(), method, config.epsilon, config.rho, config.M, s=config.s,
                                 m_total=config.m_total, q=config.q, params=params, probe_mode=config.probe_mode,
                                 alpha=config.alpha, probe_count=config.probe_count,
                                 probe_repeats=config.probe_repeats, c_T=config.c_T, c_q=config.c_q,
                                 c_k=config.c_k, log_base=config.log_base)
                try:
                    res = estimate_hessian_sparse(job, rng, cap=config.cap)
                except RecoveryError as err:
                    logging.warning(f'seed {seed}: {err}')
                    snap = job.oracle.ledger.snapshot()
                    return result_row(**base, sim_calls=snap.simulated_oracle_calls,
                                      theory_cost=snap.theoretical_cost,
                                      wall_ms=(time.perf_counter() - start) * 1000)
                form = res.params.form
                extra = dict(N_or_m=form.N if isinstance(form, SpectralParams) else form.m, a=res.params.a,
                             q=res.params.q)
        except ResourceLimitError as err:
            logging.error(f'seed {seed}: {err}')
            return result_row(**base)
        wall = (time.perf_counter() - start) * 1000
        error = float(np.abs(res.H - entry.truth.hessian).max())
        return result_row(**base, **extra, error_maxnorm=error, success=error <= config.epsilon,
                          sim_calls=res.ledger.simulated_oracle_calls, theory_cost=res.ledger.theoretical_cost,
                          wall_ms=wall)

    table = ResultTable.from_rows(f'{config.subcommand} of {entry.name}', _map_seeds(one, config))
    logging.info(f'{table}: {table.success_count()}/{len(table)} runs within epsilon')
    return table


def _bound_row(check, lhs, rhs, holds, asserted, m=None, k=None, N=None, delta=None, x=None):
    return {'check': check, 'm': m, 'k': k, 'N': N, 'delta': delta, 'x': x, 'lhs': float(lhs),
            'rhs': float(rhs), 'holds': bool(holds), 'asserted': bool(asserted)}


def run_verify_bounds(config: RunConfig) -> BoundReport:
    """
    Evaluates the stencil and spectral inequalities over the configured ranges. Rows flagged
    as not asserted record comparisons that are known not to hold for every m.
    """
    rows = []
    for m in range(config.m_min, config.m_max + 1):
        for k in range(2 * m, 2 * m + config.k_extra + 1):
            check = coeff_bound_check(m, k)
            rows.append(_bound_row('coeff_bound', check.lhs, check.rhs, check.holds, True, m=m, k=k))
        offset = stencil_offset_constant(second_order_coeffs(m), 1.0)
        rows.append(_bound_row('offset_constant', abs(offset), 0.0, offset == 0, True, m=m))
    for m in range(1, config.abs_sum_max + 1):
        check = abs_sum_check(m)
        rows.append(_bound_row('abs_sum', check.sum, 2 * check.partial_zeta, check.holds, True, m=m))
        rows.append(_bound_row('abs_sum_partial_zeta', check.sum, check.partial_zeta, check.holds_partial_zeta,
                               False, m=m))
        rows.append(_bound_row('abs_sum_cap', check.sum, math.pi ** 2 / 6, check.holds_cap, False, m=m))

    # no declared radius: the stencil reaches beyond the unit polydisc on purpose
    exp1 = FunctionOracle(get_entry('exp_d1').oracle.evaluator, 1, name='exp')
    for m in range(1, config.stencil_m_max + 1):
        coeffs = second_order_coeffs(m)
        for x in np.linspace(-config.x_max, config.x_max, 7):
            measured = abs(x * x - float(stencil_field(exp1, np.array([x]), coeffs)))
            # f = exp: the (2m+1)-th derivative on the stencil's reach [-m|x|, m|x|] is at most e^{m|x|}
            bound = error_bound_1d(m, abs(x), math.exp(m * abs(x)))
            slack = 64 * np.finfo(float).eps * coeffs.abs_sum() * math.exp(m * abs(x))
            rows.append(_bound_row('stencil_1d', measured, bound, measured <= bound + slack, True, m=m, x=x))

    for N in range(config.N_min, config.N_max + 1):
        sp = SpectralParams(N, config.delta, config.r_tilde, 1.0)
        x = np.array([0.25])
        kappa = measured_kappa(exp1, x, sp)
        sp = SpectralParams(N, config.delta, config.r_tilde, kappa)
        measured = abs(float(gradient_form(exp1, x, sp)) - 0.25)
        bound = spectral_error_bound(sp, 1)
        rows.append(_bound_row('spectral', measured, bound, measured <= bound + ROUNDOFF_FLOOR, True, N=N,
                               delta=config.delta, x=0.25))

    gev = get_entry('gevrey_d4')
    fp = select_findiff_params(gev.oracle.d, gev.truth.deriv_bound, config.epsilon, 1.0, path='gevrey',
                               c=gev.truth.gevrey_c)
    frac = violation_fraction(gev.oracle, gev.truth.hessian, fp.m, fp.a, gev.truth.gevrey_c, 8, config.samples,
                              np.random.default_rng(config.seeds[0]))
    rows.append(_bound_row('violation_fraction', frac, 1e-3, frac <= 1e-3, True, m=fp.m, delta=fp.a))

    report = BoundReport.from_rows('inequality checks', rows)
    summary = report.summary()
    report.footer.append(' '.join(f'{k}={v}' for k, v in summary.items()))
    logging.info(f'verify-bounds: {summary}')
    return report


def run_spectral_error_sweep(config: RunConfig) -> SweepReport:
    """|F(x) - grad f(0) . x| and its bound for N over the configured range."""
    entry = get_entry(config.resolved_function)
    oracle = entry.oracle
    x = np.full(oracle.d, config.sweep_x)
    exact = float(entry.truth.gradient @ x)
    rows = []
    for N in range(config.N_min, config.N_max + 1):
        sp = SpectralParams(N, config.delta, config.r_tilde, entry.truth.kappa or 1.0)
        if config.kappa_mode == 'measured':
            sp = SpectralParams(N, config.delta, config.r_tilde, measured_kappa(oracle, x, sp))
        measured = abs(float(gradient_form(oracle, x, sp)) - exact)
        bound = spectral_error_bound(sp, 1)
        rows.append({'function': entry.name, 'N': N, 'delta': config.delta, 'r_tilde': config.r_tilde,
                     'x': config.sweep_x, 'measured': measured, 'bound': bound,
                     'holds': bool(measured <= bound * (1 + 1e-9) + ROUNDOFF_FLOOR),
                     'above_roundoff': above_roundoff(measured)})
    report = SweepReport.from_rows(f'spectral error of {entry.name}', rows)
    slope = report.decay_slope()
    report.footer.append(f'slope {slope:.6g} expected {math.log(config.delta / config.r_tilde):.6g}')
    return report


def _ledger_row(name, d, epsilon, calls, cost, s=None, q=None):
    return {'config': name, 'd': d, 'epsilon': epsilon, 's': s, 'q': q, 'sim_calls': calls, 'theory_cost': cost}


def gradient_theory_cost(oracle, epsilon, eta=0.01):
    """Per-application cost of the spectral gradient phase oracle, from the planned N and delta."""
    r, kappa = _radius_kappa(oracle)
    base = SpectralParams.for_gradient(r, kappa)
    N = select_N(epsilon, base.delta, base.r_tilde, kappa)
    return cost_of_phase_oracle('spectral', epsilon=epsilon, N=N, delta=base.delta, eta=eta).per_application


def run_query_ledger(config: RunConfig) -> LedgerReport:
    """
    Counted simulated calls and theoretical costs: dense spectral Hessians over config.dims,
    sparse spectral and finite-difference Hessians over config.sparse_dims, and the gradient
    phase-oracle cost at epsilon and epsilon/2.
    """
    rng = np.random.default_rng(config.seeds[0])
    rows = []
    dense_calls = []
    scale = max(0.25, 2 * config.epsilon)
    for d in config.dims:
        entry = hessian_quadratic_entry(f'ledger_quad_d{d}', scale * np.eye(d))
        res = HessianEstimator(entry.oracle, 'spectral-dense', cap=config.cap, c_T=config.c_T).estimate(
            config.epsilon, config.rho, rng, ledger=QueryLedger())
        dense_calls.append(res.ledger.simulated_oracle_calls)
        rows.append(_ledger_row('dense-spectral', d, config.epsilon, res.ledger.simulated_oracle_calls,
                                res.ledger.theoretical_cost))

    q = config.q if config.q is not None else 7
    s = config.s if config.s is not None else 2
    sparse_calls = {'spectral-sparse': [], 'findiff-sparse': []}
    for d in config.sparse_dims:
        entry = sparse_lattice_entry(d, q)
        for method in sparse_calls:
            job = HessianJob(entry.oracle.with_ledger(), method, 1.0 / q, config.rho, 1.0, s=s, q=q,
                             c_T=config.c_T, c_k=config.c_k)
            try:
                estimate_hessian_sparse(job, rng)
            except RecoveryError as err:
                logging.warning(f'{method} d={d}: {err}')
            snap = job.oracle.ledger.snapshot()
            sparse_calls[method].append(snap.simulated_oracle_calls)
            rows.append(_ledger_row(method, d, 1.0 / q, snap.simulated_oracle_calls, snap.theoretical_cost, s=s, q=q))

    grad_oracle = get_entry(config.resolved_function).oracle
    for eps in (config.epsilon, config.epsilon / 2):
        rows.append(_ledger_row('gradient-spectral-theory', grad_oracle.d, eps, None,
                                gradient_theory_cost(grad_oracle, eps)))

    report = LedgerReport.from_rows('query ledger', rows)
    if len(config.dims) > 1:
        report.add_slope('dense-spectral calls vs d', config.dims, dense_calls)
    if len(config.sparse_dims) > 1:
        for method, calls in sparse_calls.items():
            report.add_slope(f'{method} calls vs log(qd)', [s * math.log(q * d) for d in config.sparse_dims], calls)
    return report


RUNNERS = {
    'gradient': run_gradient,
    'hessian': run_hessian,
    'sparse-hessian': run_hessian,
    'verify-bounds': run_verify_bounds,
    'spectral-error-sweep': run_spectral_error_sweep,
    'query-ledger': run_query_ledger,
}


def exit_code(config: RunConfig, report) -> int:
    if config.subcommand in ESTIMATION_SUBCOMMANDS:
        return EXIT_FAILURE if report.failed_runs() else EXIT_OK
    if config.subcommand == 'verify-bounds':
        return EXIT_FAILURE if len(report.asserted_failures()) else EXIT_OK
    if config.subcommand == 'spectral-error-sweep':
        return EXIT_OK if report.table['holds'].all() else EXIT_FAILURE
    return EXIT_OK


def _seed_list(args):
    if args.seeds is not None:
        if ',' in args.seeds:
            return [int(v) for v in args.seeds.split(',') if v.strip()]
        return list(range(int(args.seeds)))
    if args.seed is not None:
        return [args.seed]
    return None


def _int_csv(raw):
    return [int(v) for v in raw.split(',') if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', type=str, help='flat key = value config file; flags override it')
    common.add_argument('--seed', type=int, help='single seed')
    common.add_argument('--seeds', type=str, help='seed count K (seeds 0..K-1) or a comma-separated list')
    common.add_argument('--out', type=str, help='CSV path; stdout when omitted')
    common.add_argument('--jobs', type=int, help='seeds run concurrently')
    common.add_argument('--function', type=str, help='corpus member, e.g. poly_d2 or fjk:1,2:0.1:1')
    common.add_argument('--method', type=str, help='spectral or findiff (or a full Hessian method name)')
    common.add_argument('--epsilon', type=float)
    common.add_argument('--rho', type=float)
    common.add_argument('--M', type=float, help='bound on the gradient (inf norm) or the Hessian (max norm)')
    common.add_argument('--N', type=int, help='circle samples')
    common.add_argument('--m', type=int, help='stencil half-width')
    common.add_argument('--a', type=float, help='grid scale of the finite-difference path')
    common.add_argument('--q', type=int, help='prime of the S_q grid')
    common.add_argument('--s', type=int, help='nonzeros per row and column')
    common.add_argument('--m-total', dest='m_total', type=int, help='total nonzeros; enables basis-probe rows')
    common.add_argument('--probe-count', dest='probe_count', type=int)
    common.add_argument('--probe-repeats', dest='probe_repeats', type=int)
    common.add_argument('--probe-mode', dest='probe_mode', choices=['plain', 'scaled'])
    common.add_argument('--findiff-path', dest='findiff_path', choices=['probe', 'gevrey'])
    common.add_argument('--kappa-mode', dest='kappa_mode', choices=['global', 'measured'])
    common.add_argument('--c-T', dest='c_T', type=float)
    common.add_argument('--c-q', dest='c_q', type=float)
    common.add_argument('--c-k', dest='c_k', type=float)
    common.add_argument('--cap', type=int, help='amplitude cap (overrides QSPECTRAL_AMPLITUDE_CAP)')
    common.add_argument('--log-base', dest='log_base', type=float)
    common.add_argument('--m-min', dest='m_min', type=int)
    common.add_argument('--m-max', dest='m_max', type=int)
    common.add_argument('--N-min', dest='N_min', type=int)
    common.add_argument('--N-max', dest='N_max', type=int)
    common.add_argument('--delta', type=float)
    common.add_argument('--r-tilde', dest='r_tilde', type=float)
    common.add_argument('--sweep-x', dest='sweep_x', type=float)
    common.add_argument('--samples', type=int)
    common.add_argument('--dims', type=_int_csv)
    common.add_argument('--sparse-dims', dest='sparse_dims', type=_int_csv)
    common.add_argument('--verbose', action='store_true', default=None)
    common.add_argument('--debug', action='store_true', default=None)

    parser = argparse.ArgumentParser(prog='qspectral', description='Simulated quantum gradient and Hessian estimation.')
    sub = parser.add_subparsers(dest='subcommand', required=True)
    sub.add_parser('gradient', parents=[common], help='estimate grad f(0) per seed')
    sub.add_parser('hessian', parents=[common], help='dense Hessian estimation per seed')
    sub.add_parser('sparse-hessian', parents=[common], help='sparse Hessian recovery over Z_q per seed')
    sub.add_parser('verify-bounds', parents=[common], help='stencil and spectral inequality sweeps')
    sub.add_parser('spectral-error-sweep', parents=[common], help='spectral gradient error against N')
    sub.add_parser('query-ledger', parents=[common], help='counted calls against theoretical costs')
    return parser


def config_from_args(args) -> RunConfig:
    file_values = load_config_file(args.config) if args.config else {}
    overrides = {k: v for k, v in vars(args).items() if k not in ('config', 'seed', 'seeds')}
    overrides['seeds'] = _seed_list(args)
    return build_config(file_values, overrides)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return EXIT_USAGE if err.code else EXIT_OK
    level = logging.DEBUG if args.debug else logging.INFO if args.verbose else logging.WARNING
    logging.basicConfig(level=level, format='%(levelname)s %(message)s', force=True)
    try:
        config = config_from_args(args)
        report = RUNNERS[config.subcommand](config)
    except (ConfigError, ParameterError) as err:
        print(f'qspectral: error: {err}', file=sys.stderr)
        return EXIT_USAGE
    except ResourceLimitError as err:
        print(f'qspectral: resource limit: {err}', file=sys.stderr)
        return EXIT_FAILURE
    text = report.to_csv(config.out)
    if config.out is None:
        sys.stdout.write(text)
    return exit_code(config, report)


if __name__ == '__main__':
    sys.exit(main())
