"""End-to-end experiment pipelines and their CSV reports.

Every pipeline takes an ExperimentSpec, runs the factor-once iteration on
the requested family, and returns a RunReport whose tables are lists of
pre-formatted rows (error columns use scientific notation with four
significant digits).  Wall-clock measurements always land in a separate
timings table so the value tables stay byte-identical across re-runs.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from .experiments import (
    DEFAULT_SEEDS,
    ErrorContext,
    ExperimentSpec,
    choose_a0,
    convdiff_1d_problem,
    convergence_order,
    double_glazing_2d,
    draw_mu_samples,
    draw_uniform,
    expectation_factor,
    mc_expectation,
    random_diffusion_problem,
    test1_family,
    test2_family,
    wind_field,
)
from .fem import (
    FeFunction,
    SubdomainField,
    VectorField,
    apply_dirichlet,
    assemble_boundary_load,
    assemble_convection,
    assemble_diffusion,
    assemble_load,
    error_vs_exact,
    fe_space,
    probe_points,
)
from .grouping import group_samples
from .mesh import structured_rectangle, uniform_interval
from .sparse import estimate_speedup, factorize, from_scipy
from .splitter import (
    ScaledMatrix,
    assemble_system,
    build_split_system,
    compute_rho,
    compute_rho_hat,
    estimate_rate,
    iterate_columns,
)

TEST1_MESHES = tuple(2.0**-k for k in range(7, 11))
SWEEP_MESHES = (0.2, 0.1, 0.05, 0.025)
GROUP_SWEEP = (5, 10, 20, 40, 80, 160)


@dataclass
class RunReport:
    name: str
    config: dict
    tables: dict = dc_field(default_factory=dict)    # name -> (header, rows)
    metrics: dict = dc_field(default_factory=dict)
    timings: dict = dc_field(default_factory=dict)
    seed: int = 0


def _fe(v) -> str:
    """Scientific notation, four significant digits."""
    return f"{v:.3e}"


def _fg(v) -> str:
    return f"{v:.6g}"


# ---------------------------------------------------------------------------
# shared helpers

def _add_sp(A, B):
    return from_scipy(A.to_scipy() + B.to_scipy())


def _scale_sp(A, c):
    mat = A.to_scipy().copy()
    mat.data = mat.data * c
    return from_scipy(mat)


def _solve_individual(space, A_raw, load):
    Ad, rhs = apply_dirichlet(A_raw, load, space)
    return factorize(Ad).solve(rhs)


def _loads_from_terms(space, load_terms):
    """Assemble each load term once; columns are their coefficient mixes."""
    total = None
    for kind, payload, coeffs in load_terms:
        if kind == "source":
            vec = assemble_load(space, payload)
        elif kind == "boundary":
            side, g = payload
            vec = assemble_boundary_load(space, side, g)
        else:
            raise ValueError(f"unknown load term kind {kind!r}")
        contrib = np.outer(vec, np.asarray(coeffs, dtype=float))
        total = contrib if total is None else total + contrib
    return total


# ---------------------------------------------------------------------------
# five fixed diffusion problems (oscillatory manufactured solution)

def run_test1(spec: ExperimentSpec) -> RunReport:
    """Mesh sweep with per-problem exact errors, iteration counts, and rates."""
    hs = [spec.h] if spec.h else list(TEST1_MESHES)
    nprob = spec.samples or 5
    degree = spec.degree or 2
    fam = test1_family(nprob)
    a0f = choose_a0(spec.a0, fam.samples)

    report = RunReport("test1", _cfg(spec), seed=spec.seed)
    err_rows, hist_per_h, iters_per_h, errors_matrix = [], [], [], []
    finest = None
    t_it_total = 0.0
    for h in hs:
        mesh1 = uniform_interval(0.0, 1.0, round(1.0 / h))
        space = fe_space(mesh1, degree)
        ectx = ErrorContext(space)

        # reference solutions from individual factorizations, for the
        # per-iteration convergence traces
        U_ind = np.empty((space.num_dofs, nprob))
        for j, s in enumerate(fam.samples):
            A_raw = assemble_diffusion(space, s.a)
            U_ind[:, j] = _solve_individual(space, A_raw, assemble_load(space, s.f))

        t0 = time.perf_counter()
        sysm = build_split_system(space, a0f, fam.samples)
        U, hist = iterate_columns(
            sysm, tol=spec.tol, max_iter=spec.max_iter,
            errors_fn=lambda M: ectx.fe_difference(M, U_ind, "H1"),
        )
        t_it_total += time.perf_counter() - t0

        E = np.array([
            error_vs_exact(FeFunction(space, U[:, j]), fam.exact[j],
                           fam.exact_grad[j], "H1")
            for j in range(nprob)
        ])
        errors_matrix.append(E)
        err_rows.append([_fg(h)] + [_fe(e) for e in E])
        iters_per_h.append(hist.iterations_used)
        hist_per_h.append(hist)
        finest = (space, sysm, hist)

    space, sysm, hist = finest
    probes = probe_points(space)
    rho = compute_rho(a0f, None, fam.samples, probes)
    rho_hat = compute_rho_hat(a0f, fam.samples, probes)
    traces = np.array(hist.sample_errors)          # (niters+1, nprob)
    rates = np.array([
        estimate_rate(traces[traces[:, j] > 1e-13, j]) for j in range(nprob)
    ])

    errors_matrix = np.array(errors_matrix)
    report.tables["errors"] = (
        ["h"] + [f"E{j + 1}" for j in range(nprob)], err_rows)
    if len(hs) > 1:
        orows = []
        for k in range(len(hs) - 1):
            orders = np.log2(errors_matrix[k] / errors_matrix[k + 1])
            orows.append([_fg(hs[k + 1])] + [f"{o:.3f}" for o in orders])
        report.tables["orders"] = (
            ["h"] + [f"order_E{j + 1}" for j in range(nprob)], orows)
    report.tables["history"] = _history_table(hist)
    report.tables["rates"] = (
        ["problem", "rho", "rho_hat", "fitted_rate"],
        [[str(j + 1), f"{rho[j]:.4f}", f"{rho_hat[j]:.4f}", _fe(rates[j])]
         for j in range(nprob)],
    )
    report.metrics.update(
        hs=hs, errors=errors_matrix, iterations=iters_per_h, rho=rho,
        rho_hat=rho_hat, rates=rates, diffs=hist.diffs,
        error_traces=traces, histories=hist_per_h,
    )
    report.timings["iterate_total"] = t_it_total
    return report


def _history_table(hist):
    header = ["iteration", "max_diff"]
    nerr = len(hist.sample_errors[0]) if hist.sample_errors else 0
    header += [f"err_{j + 1}" for j in range(nerr)]
    rows = []
    nrows = max(len(hist.diffs) + 1, len(hist.sample_errors))
    for n in range(nrows):
        row = [str(n), "" if n == 0 else _fe(hist.diffs[n - 1])]
        if n < len(hist.sample_errors):
            row += [_fe(e) for e in hist.sample_errors[n]]
        rows.append(row)
    return header, rows


# ---------------------------------------------------------------------------
# disk-inclusion conductivity on the square, grouped by parameter

def run_test2(spec: ExperimentSpec, sweep: bool = False) -> RunReport:
    """Grouped iterative solve of the two-parameter conductivity family."""
    nx = spec.nx or 64
    ny = spec.ny or nx
    n_s = spec.samples or (2500 if sweep else 500)
    n_c = spec.centers or 10
    mesh2 = structured_rectangle(-1, 1, -1, 1, nx, ny, disk=((0.0, 0.0), 0.5))
    space = fe_space(mesh2, 1, dirichlet_sides=("top",))
    mu1, mu2 = draw_mu_samples(n_s, spec.seed)

    K_out = assemble_diffusion(space, SubdomainField(mesh2, [1.0, 0.0]))
    K_disk = assemble_diffusion(space, SubdomainField(mesh2, [0.0, 1.0]))
    L_bottom = assemble_boundary_load(space, "bottom", 1.0)
    ectx = ErrorContext(space)

    U_ind = None
    t_ind = 0.0
    if spec.compare_individual:
        U_ind = np.empty((space.num_dofs, n_s))
        t0 = time.perf_counter()
        for j in range(n_s):
            A_raw = _add_sp(K_out, _scale_sp(K_disk, mu1[j]))
            U_ind[:, j] = _solve_individual(space, A_raw, mu2[j] * L_bottom)
        t_ind = time.perf_counter() - t0

    report = RunReport(spec.name, _cfg(spec), seed=spec.seed)

    def grouped_solve(n_centers):
        result = group_samples(mu1, n_centers, iter_max=200)
        rows = []
        U_all = np.empty((space.num_dofs, n_s))
        t_total = 0.0
        iters, maxerrs, times, histories = [], [], [], []
        for g in range(n_centers):
            members = result.members(g)
            mu0 = result.centers[g]
            t0 = time.perf_counter()
            A0_raw = _add_sp(K_out, _scale_sp(K_disk, mu0))
            ops = [ScaledMatrix(K_disk, mu1[j] - mu0) for j in members]
            loads = np.outer(L_bottom, mu2[members])
            sysm = assemble_system(space, A0_raw, ops, loads, symmetric=True)
            U, hist = iterate_columns(sysm, tol=spec.tol, max_iter=spec.max_iter)
            tg = time.perf_counter() - t0
            t_total += tg
            U_all[:, members] = U
            err = (float(ectx.fe_difference(U, U_ind[:, members], "H1").max())
                   if U_ind is not None else np.nan)
            vals = mu1[members]
            rows.append([
                str(g + 1), str(len(members)), _fg(vals.min()), _fg(vals.max()),
                _fg(mu0), f"{result.per_group_rho[g]:.4f}",
                str(hist.iterations_used), _fe(err) if U_ind is not None else "",
            ])
            iters.append(hist.iterations_used)
            maxerrs.append(err)
            times.append(tg)
            histories.append(hist)
        return result, rows, U_all, t_total, iters, maxerrs, times, histories

    if not sweep:
        result, rows, U_all, t_it, iters, maxerrs, times, histories = grouped_solve(n_c)
        report.tables["groups"] = (
            ["group", "size", "region_min", "region_max", "center", "rho",
             "iterations", "max_err"], rows)
        report.metrics.update(
            grouping=result, iterations=iters, max_errors=np.array(maxerrs),
            per_group_rho=result.per_group_rho, histories=histories,
            solutions=U_all, space=space,
        )
        report.timings.update(T_it=t_it, T_ind=t_ind, group_times=times)
        if U_ind is not None:
            report.metrics["max_diff_vs_individual"] = float(
                ectx.fe_difference(U_all, U_ind, "H1").max())
    else:
        trend_rows = []
        trend = {}
        for nc in GROUP_SWEEP:
            result, _, U_all, t_it, iters, maxerrs, _, _ = grouped_solve(nc)
            max_rho = float(result.per_group_rho.max())
            maxdiff = (float(ectx.fe_difference(U_all, U_ind, "H1").max())
                       if U_ind is not None else np.nan)
            trend_rows.append([str(nc), f"{max_rho:.4f}", str(max(iters)),
                               _fe(maxdiff) if U_ind is not None else ""])
            trend[nc] = dict(max_rho=max_rho, T_it=t_it, iters=max(iters),
                             max_diff=maxdiff)
        report.tables["trend"] = (
            ["n_c", "max_rho", "max_iterations", "max_diff"], trend_rows)
        report.metrics["trend"] = trend
        report.timings.update(
            T_ind=t_ind, T_it_by_nc={nc: trend[nc]["T_it"] for nc in trend})
    return report


# ---------------------------------------------------------------------------
# random diffusion on the interval (two shared-coefficient strategies)

def _rand_diff_setup(spec, approach):
    eps = spec.eps if spec.eps is not None else (0.1 if approach == 1 else 2.0)
    J = spec.samples or 10_000
    draws = draw_uniform(J, spec.seed)
    fam = random_diffusion_problem(draws.values, eps)
    x = draws.values
    if approach == 1:
        a0c = 1.0
    elif isinstance(spec.a0, (int, float)):
        a0c = float(spec.a0)
    elif isinstance(spec.a0, str) and spec.a0.startswith("value:"):
        a0c = float(spec.a0.split(":", 1)[1])
    elif spec.a0 == "max":
        a0c = 1.0 + eps * x.max()
    else:
        a0c = 1.0 + eps * x.mean()
    scales = (1.0 + eps * x) - a0c
    rho = np.abs(scales) / a0c
    return eps, J, x, fam, a0c, scales, rho


def _run_separable_sweep(spec, report, hs, build_system, fam, n_fixed,
                         per_sample_errors):
    """Mesh sweep at a fixed iteration count; H1/L2 errors and orders."""
    h1_errs, l2_errs = [], []
    diffs_per_h = []
    for h in hs:
        space, sysm = build_system(h)
        U, hist = iterate_columns(sysm, tol=0.0, max_iter=n_fixed)
        diffs_per_h.append(hist.diffs)
        if per_sample_errors:
            ectx = ErrorContext(space)
            h1 = float(ectx.separable(U, fam.exact_factors, fam.shape,
                                      fam.shape_grad, "H1").mean())
            l2 = float(ectx.separable(U, fam.exact_factors, fam.shape,
                                      fam.shape_grad, "L2").mean())
        else:
            mean_fn = FeFunction(space, mc_expectation(U))
            h1 = error_vs_exact(mean_fn, fam.mean_exact, fam.mean_exact_grad, "H1")
            l2 = error_vs_exact(mean_fn, fam.mean_exact, kind="L2")
        h1_errs.append(h1)
        l2_errs.append(l2)

    h1_errs = np.array(h1_errs)
    l2_errs = np.array(l2_errs)
    rows = []
    for k, h in enumerate(hs):
        o1 = f"{np.log2(h1_errs[k - 1] / h1_errs[k]):.3f}" if k else ""
        o2 = f"{np.log2(l2_errs[k - 1] / l2_errs[k]):.3f}" if k else ""
        rows.append([_fg(h), _fe(h1_errs[k]), o1, _fe(l2_errs[k]), o2])
    report.tables["orders"] = (
        ["h", "H1_err", "H1_order", "L2_err", "L2_order"], rows)
    report.metrics.update(
        hs=list(hs), h1_errors=h1_errs, l2_errors=l2_errs,
        h1_orders=convergence_order(h1_errs), l2_orders=convergence_order(l2_errs),
        diffs_per_h=diffs_per_h,
    )


def run_rand_diff(spec: ExperimentSpec, approach: int) -> RunReport:
    """Random-diffusion pipeline; approach 1 fixes a0 = 1, approach 2 pools samples."""
    eps, J, x, fam, a0c, scales, rho = _rand_diff_setup(spec, approach)
    name = f"rand-diff-a{approach}"
    report = RunReport(name, _cfg(spec), seed=spec.seed)
    report.metrics.update(rho=rho, rho_max=float(rho.max()), a0=a0c, eps=eps)
    n_fixed = spec.iters or 10

    def build_system(h):
        mesh1 = uniform_interval(0.0, 1.0, round(1.0 / h))
        space = fe_space(mesh1, spec.degree or 1)
        K = assemble_diffusion(space, 1.0)
        A0_raw = _scale_sp(K, a0c)
        ops = [ScaledMatrix(K, s) for s in scales]
        loads = _loads_from_terms(space, fam.load_terms)
        return space, assemble_system(space, A0_raw, ops, loads, symmetric=True)

    if spec.h is None:
        hs = list(SWEEP_MESHES)
        _run_separable_sweep(spec, report, hs, build_system, fam, n_fixed,
                             per_sample_errors=(approach == 1))
        return report

    # single mesh: per-iteration error trace plus a tolerance-stopped run
    space, sysm = build_system(spec.h)
    ectx = ErrorContext(space)

    def errs(U):
        if approach == 1:
            h1 = ectx.separable(U, fam.exact_factors, fam.shape, fam.shape_grad, "H1").mean()
            l2 = ectx.separable(U, fam.exact_factors, fam.shape, fam.shape_grad, "L2").mean()
        else:
            mean_fn = FeFunction(space, mc_expectation(U))
            h1 = error_vs_exact(mean_fn, fam.mean_exact, fam.mean_exact_grad, "H1")
            l2 = error_vs_exact(mean_fn, fam.mean_exact, kind="L2")
        return np.array([h1, l2])

    U, hist = iterate_columns(sysm, tol=0.0, max_iter=n_fixed, errors_fn=errs)
    trace = np.array(hist.sample_errors)           # (n_fixed+1, 2)
    rows = [[str(n), _fe(trace[n, 0]), _fe(trace[n, 1])]
            for n in range(len(trace))]
    report.tables["trace"] = (["iteration", "H1_err", "L2_err"], rows)

    rule = "mean_norm" if approach == 1 else "mean"
    _, hist_tol = iterate_columns(sysm, tol=spec.tol or 1e-4,
                                  max_iter=spec.max_iter, stop_rule=rule,
                                  rho=float(rho.max()))
    report.metrics.update(
        trace=trace, diffs=hist.diffs, final_h1=float(trace[-1, 0]),
        final_l2=float(trace[-1, 1]), iterations_tol=hist_tol.iterations_used,
        converged_tol=hist_tol.converged, diffs_tol=hist_tol.diffs,
    )
    return report


# ---------------------------------------------------------------------------
# 1-D random convection-diffusion

def run_convdiff(spec: ExperimentSpec) -> RunReport:
    eps = spec.eps if spec.eps is not None else 0.005
    J = spec.samples or 10_000
    h = spec.h or 0.01
    n_fixed = spec.iters or 10
    draws = draw_uniform(J, spec.seed)
    fam = convdiff_1d_problem(draws.values, eps)
    x = draws.values
    a0c = 1.0 + eps * x.mean()
    scales = (1.0 + eps * x) - a0c

    mesh1 = uniform_interval(0.0, 1.0, round(1.0 / h))
    space = fe_space(mesh1, spec.degree or 1)
    K = assemble_diffusion(space, 1.0)
    C = assemble_convection(space, 1.0)
    base = _add_sp(K, _scale_sp(C, 100.0))
    A0_raw = _scale_sp(base, a0c)
    ops = [ScaledMatrix(base, s) for s in scales]
    loads = _loads_from_terms(space, fam.load_terms)
    sysm = assemble_system(space, A0_raw, ops, loads, symmetric=False)

    # dominance ratio: diffusion and convection perturbations both scale
    # with the same per-sample factor
    rho = (np.abs(scales) + 100.0 * np.abs(scales)) / a0c
    rho_max = float(rho.max())

    U, hist = iterate_columns(sysm, tol=0.0, max_iter=n_fixed, rho=rho_max)
    mean_fn = FeFunction(space, mc_expectation(U))
    h1 = error_vs_exact(mean_fn, fam.mean_exact, fam.mean_exact_grad, "H1")
    l2 = error_vs_exact(mean_fn, fam.mean_exact, kind="L2")

    report = RunReport("convdiff-1d", _cfg(spec), seed=spec.seed)
    report.tables["errors"] = (
        ["eps", "rho", "H1_err", "L2_err"],
        [[_fg(eps), f"{rho_max:.4f}", _fe(h1), _fe(l2)]],
    )
    report.metrics.update(
        rho=rho, rho_max=rho_max, h1_error=h1, l2_error=l2,
        diffs=hist.diffs, non_contractive=hist.non_contractive, a0=a0c,
    )
    return report


# ---------------------------------------------------------------------------
# 2-D randomized recirculating-wind problem

def run_double_glazing(spec: ExperimentSpec) -> RunReport:
    eps = spec.eps if spec.eps is not None else 2.0
    delta = spec.delta
    J = spec.samples or 10_000
    n_fixed = spec.iters or 10
    draws = draw_uniform(J, spec.seed)
    fam = double_glazing_2d(draws.values, eps, delta)
    x = draws.values
    scales = eps * (x - x.mean())
    b0 = VectorField(lambda pts, c=1.0 + eps * x.mean(): c * wind_field(pts))

    report = RunReport("double-glazing-2d", _cfg(spec), seed=spec.seed)

    def build_system(h):
        n = round(1.0 / h)
        mesh2 = structured_rectangle(0.0, 1.0, 0.0, 1.0, n, n)
        space = fe_space(mesh2, 1)
        K = assemble_diffusion(space, 1.0)
        C = assemble_convection(space, VectorField(wind_field))
        A0_raw = _add_sp(_scale_sp(K, delta), _scale_sp(C, 1.0 + eps * x.mean()))
        ops = [ScaledMatrix(C, s) for s in scales]
        loads = _loads_from_terms(space, fam.load_terms)
        return space, assemble_system(space, A0_raw, ops, loads, symmetric=False)

    # dominance ratio over the quadrature probe grid of the finest mesh used
    probe_mesh = structured_rectangle(0, 1, 0, 1, 20, 20)
    probes = probe_points(fe_space(probe_mesh, 1))
    wind_max = float(np.linalg.norm(wind_field(probes), axis=1).max())
    rho = np.abs(scales) * wind_max / delta
    rho_max = float(rho.max())
    report.metrics.update(rho=rho, rho_max=rho_max, eps=eps)

    if spec.h is None:
        hs = list(SWEEP_MESHES)
        _run_separable_sweep(spec, report, hs, build_system, fam, n_fixed,
                             per_sample_errors=False)
        return report

    space, sysm = build_system(spec.h)
    U, hist = iterate_columns(sysm, tol=0.0, max_iter=n_fixed, rho=rho_max)
    mean_fn = FeFunction(space, mc_expectation(U))
    h1 = error_vs_exact(mean_fn, fam.mean_exact, fam.mean_exact_grad, "H1")
    l2 = error_vs_exact(mean_fn, fam.mean_exact, kind="L2")
    _, hist_tol = iterate_columns(sysm, tol=spec.tol or 1e-4,
                                  max_iter=spec.max_iter, stop_rule="mean",
                                  rho=rho_max)
    report.tables["errors"] = (
        ["eps", "rho", "H1_err", "L2_err"],
        [[_fg(eps), f"{rho_max:.4f}", _fe(h1), _fe(l2)]],
    )
    report.metrics.update(
        h1_error=h1, l2_error=l2, diffs=hist.diffs,
        iterations_tol=hist_tol.iterations_used, diffs_tol=hist_tol.diffs,
        non_contractive=hist.non_contractive,
    )
    return report


# ---------------------------------------------------------------------------
# speedup measurement

def run_speedup(spec: ExperimentSpec) -> RunReport:
    """Batched-vs-individual wall clock on the 2-D mesh, against the cost model."""
    nx = spec.nx or 32
    counts = [1, 10, 100, spec.samples or 500]
    mesh2 = structured_rectangle(-1, 1, -1, 1, nx, nx, disk=((0.0, 0.0), 0.5))
    space = fe_space(mesh2, 1, dirichlet_sides=("top",))
    K_out = assemble_diffusion(space, SubdomainField(mesh2, [1.0, 0.0]))
    K_disk = assemble_diffusion(space, SubdomainField(mesh2, [0.0, 1.0]))
    L_bottom = assemble_boundary_load(space, "bottom", 1.0)
    N = space.num_dofs
    p = 1.5
    Cs = N * max(np.log2(N), 1.0)

    report = RunReport("speedup-bench", _cfg(spec), seed=spec.seed)
    rows, timing_rows = [], []
    for J in counts:
        mu1, mu2 = draw_mu_samples(J, spec.seed)
        mu0 = float(mu1.mean())

        t0 = time.perf_counter()
        A0_raw = _add_sp(K_out, _scale_sp(K_disk, mu0))
        ops = [ScaledMatrix(K_disk, m - mu0) for m in mu1]
        loads = np.outer(L_bottom, mu2)
        sysm = assemble_system(space, A0_raw, ops, loads, symmetric=True)
        _, hist = iterate_columns(sysm, tol=spec.tol, max_iter=spec.max_iter)
        t_it = time.perf_counter() - t0

        t0 = time.perf_counter()
        for j in range(J):
            A_raw = _add_sp(K_out, _scale_sp(K_disk, mu1[j]))
            _solve_individual(space, A_raw, mu2[j] * L_bottom)
        t_ind = time.perf_counter() - t0

        K_used = hist.iterations_used + 1     # solves per problem incl. start
        sf = estimate_speedup(N, J, K_used, p, Cs)
        rows.append([str(N), str(J), str(K_used), f"{sf:.3f}"])
        timing_rows.append([str(N), str(J), str(K_used), f"{t_it:.4f}",
                            f"{t_ind:.4f}", f"{t_ind / t_it:.3f}", f"{sf:.3f}"])
        report.metrics.setdefault("measurements", []).append(
            dict(N=N, J=J, K=K_used, T_it=t_it, T_ind=t_ind, S_f=sf))
    report.tables["speedup"] = (["N", "J", "K", "S_f_formula"], rows)
    report.timings["rows"] = (
        ["N", "J", "K", "T_it", "T_ind", "S_f_measured", "S_f_formula"],
        timing_rows,
    )
    return report


# ---------------------------------------------------------------------------
# dispatch, CSV output, and the command-line summary

PIPELINES = {
    "test1": run_test1,
    "test2": lambda spec: run_test2(spec, sweep=False),
    "group-bench": lambda spec: run_test2(spec, sweep=spec.centers is None),
    "rand-diff-a1": lambda spec: run_rand_diff(spec, 1),
    "rand-diff-a2": lambda spec: run_rand_diff(spec, 2),
    "convdiff-1d": run_convdiff,
    "double-glazing-2d": run_double_glazing,
    "speedup-bench": run_speedup,
}


def _cfg(spec: ExperimentSpec) -> dict:
    return {k: v for k, v in vars(spec).items() if v is not None}


def run(name: str, overrides: dict | None = None, out_dir=None) -> RunReport:
    """Run one named experiment and optionally write its CSV tables."""
    spec = ExperimentSpec(name=name, **(overrides or {}))
    report = PIPELINES[name](spec)
    if out_dir is not None:
        write_report(report, out_dir)
    return report


def write_report(report: RunReport, out_dir) -> list:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for tname, (header, rows) in report.tables.items():
        path = out / f"{report.name}_{tname}.csv"
        _write_csv(path, header, rows)
        written.append(path)
    if report.timings:
        path = out / f"{report.name}_timings.csv"
        if "rows" in report.timings:
            header, rows = report.timings["rows"]
            _write_csv(path, header, rows)
        else:
            items = [(k, v) for k, v in report.timings.items()
                     if isinstance(v, (int, float))]
            _write_csv(path, ["quantity", "seconds"],
                       [[k, f"{v:.4f}"] for k, v in items])
        written.append(path)
    return written


def _write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def summarize(report: RunReport) -> str:
    """Human-oriented one-screen digest of a run."""
    lines = [f"experiment: {report.name} (seed {report.seed})"]
    m = report.metrics
    if "iterations" in m:
        lines.append(f"  iterations: {m['iterations']}")
    if "iterations_tol" in m:
        lines.append(f"  iterations to tolerance: {m['iterations_tol']}")
    if "rho_max" in m:
        lines.append(f"  max dominance ratio rho: {m['rho_max']:.4f}")
    elif "rho" in m and np.ndim(m["rho"]):
        lines.append(f"  rho by problem: {np.round(np.asarray(m['rho']), 4)}")
    if "rates" in m:
        lines.append(f"  fitted decay bases: {np.round(m['rates'], 4)}")
    if "h1_errors" in m:
        lines.append(f"  H1 errors: {[f'{e:.3e}' for e in m['h1_errors']]}")
        lines.append(f"  H1 orders: {np.round(m['h1_orders'], 3)}")
        lines.append(f"  L2 orders: {np.round(m['l2_orders'], 3)}")
    if "h1_error" in m:
        lines.append(f"  H1 error: {m['h1_error']:.4e}  L2 error: {m['l2_error']:.4e}")
    if "errors" in m:
        lines.append(f"  max H1 error at finest mesh: {np.asarray(m['errors'])[-1].max():.3e}")
    if "max_errors" in m and np.ndim(m["max_errors"]):
        arr = np.asarray(m["max_errors"], dtype=float)
        if np.isfinite(arr).any():
            lines.append(f"  max error vs individual solves: {np.nanmax(arr):.3e}")
    if "per_group_rho" in m:
        lines.append(f"  per-group rho: {np.round(m['per_group_rho'], 3)}")
    if "non_contractive" in m and m["non_contractive"]:
        lines.append("  warning: dominance ratio >= 1, iteration not contractive")
    for k, v in report.timings.items():
        if isinstance(v, (int, float)):
            lines.append(f"  {k}: {v:.3f}s")
    return "\n".join(lines)
