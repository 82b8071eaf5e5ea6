"""Fixed-point engine: one factorization drives all samples and iterations.

Each sample j keeps its own remainder operator and load; every update solves
the shared factorized system against the batch of per-sample right-hand
sides.  The stopping rule tracks the full H1 norm of successive differences.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field as dc_field

import numpy as np

from .fem import (
    FeFunction,
    ScalarField,
    SubdomainField,
    apply_dirichlet,
    as_scalar_field,
    assemble_boundary_load,
    assemble_convection,
    assemble_diffusion,
    assemble_load,
    eval_scalar,
    gram_h1,
    zero_rows,
)
from .sparse import CsrMatrix, Factorization, factorize, solve_many, spmv


class EllipticityError(ValueError):
    """Shared coefficient is not strictly positive on the probe grid."""


class DivergenceError(RuntimeError):
    """An iterate went non-finite; expected when the remainder dominates."""

    def __init__(self, sample: int, iteration: int):
        self.sample = sample
        self.iteration = iteration
        super().__init__(
            f"iterate became non-finite for sample {sample} at iteration {iteration}"
        )


@dataclass
class ScaledMatrix:
    """Per-sample remainder of the form scale * (shared matrix)."""

    base: CsrMatrix
    scale: float

    def matvec(self, u):
        return self.scale * spmv(self.base, u)


def _op_matvec(op, u):
    if isinstance(op, ScaledMatrix):
        return op.matvec(u)
    return spmv(op, u)


@dataclass
class SplitSystem:
    """Factored shared operator plus per-sample remainders and loads."""

    space: object
    A0: CsrMatrix
    fact: Factorization
    a1: list
    loads: np.ndarray            # (ndof, nsamples)
    gram: CsrMatrix              # full-H1 Gram matrix for difference norms

    @property
    def num_samples(self) -> int:
        return self.loads.shape[1]

    @property
    def dirichlet_dofs(self):
        if self.space is None:
            return np.zeros(0, dtype=np.int64)
        return self.space.dirichlet_dofs


@dataclass
class IterationHistory:
    diffs: list = dc_field(default_factory=list)
    sample_diffs: list = dc_field(default_factory=list)
    sample_errors: list = dc_field(default_factory=list)
    solutions: list = dc_field(default_factory=list)
    converged: bool = False
    non_contractive: bool = False

    @property
    def iterations_used(self) -> int:
        return len(self.diffs)

    def to_csv(self, path):
        """(iteration, max_diff, per-sample errors) rows; iteration 0 is the start."""
        lines = []
        nerr = len(self.sample_errors[0]) if self.sample_errors else 0
        header = ["iteration", "max_diff"] + [f"err_{j + 1}" for j in range(nerr)]
        lines.append(",".join(header))
        nrows = max(len(self.diffs) + 1, len(self.sample_errors))
        for n in range(nrows):
            row = [str(n)]
            row.append("" if n == 0 else f"{self.diffs[n - 1]:.3e}")
            if n < len(self.sample_errors):
                row.extend(f"{e:.3e}" for e in self.sample_errors[n])
            lines.append(",".join(row))
        text = "\n".join(lines) + "\n"
        with open(path, "w") as fh:
            fh.write(text)
        return text


@dataclass
class RhoEstimate:
    """Per-sample dominance ratios and the fitted per-sample decay bases."""

    rho: np.ndarray
    rho_hat: np.ndarray
    regression_rate: np.ndarray | None = None


# ---------------------------------------------------------------------------
# system construction

def _field_difference(fa, fb):
    if isinstance(fa, SubdomainField) and isinstance(fb, SubdomainField):
        return SubdomainField(fa.mesh, fa.values_by_tag - fb.values_by_tag)
    fa = as_scalar_field(fa)
    fb = as_scalar_field(fb)
    if isinstance(fa, SubdomainField) or isinstance(fb, SubdomainField):
        raise TypeError("cannot mix subdomain and pointwise coefficient fields")
    return ScalarField(lambda pts: fa(pts) - fb(pts), smoothness=fa.smoothness)


def _vector_difference(fa, fb):
    if fb is None:
        return fa
    if fa is None:
        return lambda pts: -np.asarray(fb(pts), dtype=float)
    return lambda pts: np.asarray(fa(pts), dtype=float) - np.asarray(fb(pts), dtype=float)


def check_ellipticity(space, a0):
    vals = eval_scalar(space, a0)
    if not np.all(vals > 0.0):
        raise EllipticityError(
            f"shared diffusion coefficient must be positive, min {vals.min()!r}"
        )
    return vals


def _zeroed_a1_ops(a1_ops, dirichlet):
    """Clear Dirichlet rows of each distinct underlying matrix exactly once."""
    cache = {}
    out = []
    for op in a1_ops:
        if isinstance(op, ScaledMatrix):
            key = id(op.base)
            if key not in cache:
                cache[key] = zero_rows(op.base, dirichlet)
            out.append(ScaledMatrix(cache[key], op.scale))
        else:
            out.append(zero_rows(op, dirichlet))
    return out


def assemble_system(space, A0_raw: CsrMatrix, a1_ops, loads, symmetric: bool) -> SplitSystem:
    """Apply boundary conditions, factorize once, and package the batch."""
    loads = np.ascontiguousarray(loads, dtype=float)
    if loads.ndim == 1:
        loads = loads[:, None]
    A0d, _ = apply_dirichlet(A0_raw, np.zeros(A0_raw.nrows), space, symmetric=symmetric)
    fact = factorize(A0d)
    dd = space.dirichlet_dofs
    a1_ops = _zeroed_a1_ops(a1_ops, dd)
    loads = loads.copy()
    loads[dd, :] = 0.0
    return SplitSystem(space, A0d, fact, a1_ops, loads, gram_h1(space))


@dataclass
class SampleProblem:
    """One member of the family: coefficients, source, optional flux data."""

    a: object
    f: object
    b: object = None
    neumann: tuple = None     # (side, g)


def build_split_system(space, a0, samples, b0=None) -> SplitSystem:
    """Assemble the shared operator and all per-sample remainders and loads.

    The shared coefficient must be positive everywhere; each remainder keeps
    only interior rows so iterates stay exactly zero on the Dirichlet set.
    """
    check_ellipticity(space, a0)
    A0 = assemble_diffusion(space, a0)
    any_convection = b0 is not None or any(s.b is not None for s in samples)
    if b0 is not None:
        A0 = _add(A0, assemble_convection(space, b0))
    a1_ops = []
    load_cols = []
    for s in samples:
        A1 = assemble_diffusion(space, _field_difference(s.a, a0))
        if s.b is not None or b0 is not None:
            A1 = _add(A1, assemble_convection(space, _vector_difference(s.b, b0)))
        a1_ops.append(A1)
        load = assemble_load(space, s.f)
        if s.neumann is not None:
            side, g = s.neumann
            load = load + assemble_boundary_load(space, side, g)
        load_cols.append(load)
    loads = np.column_stack(load_cols)
    return assemble_system(space, A0, a1_ops, loads, symmetric=not any_convection)


def _add(A: CsrMatrix, B: CsrMatrix) -> CsrMatrix:
    from .sparse import from_scipy

    return from_scipy(A.to_scipy() + B.to_scipy())


# ---------------------------------------------------------------------------
# iteration

def _apply_a1_batch(a1_ops, U):
    """Column j of the result is (remainder_j) @ U[:, j]."""
    out = np.empty_like(U)
    groups = defaultdict(list)
    for j, op in enumerate(a1_ops):
        if isinstance(op, ScaledMatrix):
            groups[id(op.base)].append(j)
        else:
            out[:, j] = spmv(op, U[:, j])
    for idx in groups.values():
        base = a1_ops[idx[0]].base
        scales = np.array([a1_ops[j].scale for j in idx])
        cols = np.asarray(idx)
        out[:, cols] = spmv(base, U[:, cols]) * scales[None, :]
    return out


def _h1_columns(gram: CsrMatrix, D):
    g = gram.to_scipy()
    return np.sqrt(np.maximum(np.einsum("ij,ij->j", D, g @ D), 0.0))


def _h1_single(gram: CsrMatrix, d):
    return float(np.sqrt(max(d @ (gram.to_scipy() @ d), 0.0)))


def iterate_columns(sys: SplitSystem, tol: float = 1e-4, max_iter: int = 100,
                    stop_rule: str = "max", errors_fn=None, record_solutions=False,
                    rho: float = None):
    """Run the shared-factorization fixed-point update on all samples at once.

    Returns the final dof matrix (ndof x nsamples) and the history.  The
    stopping metric is built from H1 norms of successive differences: the
    maximum over samples ("max", default), the norm of the sample-mean
    difference ("mean"), or the sample mean of the per-sample difference
    norms ("mean_norm").  Pass ``tol=0`` to run a fixed number of updates.
    """
    if tol <= 0 and not np.isfinite(max_iter):
        raise ValueError("need a positive tolerance or a finite iteration cap")
    if stop_rule not in ("max", "mean", "mean_norm"):
        raise ValueError(f"unknown stop rule {stop_rule!r}")
    history = IterationHistory()
    if rho is not None and rho >= 1.0:
        history.non_contractive = True
    dd = sys.dirichlet_dofs

    U = solve_many(sys.fact, sys.loads)
    if U.ndim == 1:
        U = U[:, None]
    U[dd, :] = 0.0
    _check_finite(U, 0)
    if errors_fn is not None:
        history.sample_errors.append(np.asarray(errors_fn(U), dtype=float))
    if record_solutions:
        history.solutions.append(U.copy())

    for n in range(1, max_iter + 1):
        B = sys.loads - _apply_a1_batch(sys.a1, U)
        Unew = solve_many(sys.fact, B)
        if Unew.ndim == 1:
            Unew = Unew[:, None]
        Unew[dd, :] = 0.0
        _check_finite(Unew, n)
        D = Unew - U
        per_sample = _h1_columns(sys.gram, D)
        history.sample_diffs.append(per_sample)
        if stop_rule == "max":
            metric = float(per_sample.max())
        elif stop_rule == "mean_norm":
            metric = float(per_sample.mean())
        else:
            metric = _h1_single(sys.gram, D.mean(axis=1))
        history.diffs.append(metric)
        U = Unew
        if errors_fn is not None:
            history.sample_errors.append(np.asarray(errors_fn(U), dtype=float))
        if record_solutions:
            history.solutions.append(U.copy())
        if metric < tol:
            history.converged = True
            break
    return U, history


def iterate(sys: SplitSystem, tol: float = 1e-4, max_iter: int = 100, **kwargs):
    """As iterate_columns, but wraps the final iterate per sample."""
    U, history = iterate_columns(sys, tol=tol, max_iter=max_iter, **kwargs)
    if sys.space is None:
        funcs = [U[:, j] for j in range(U.shape[1])]
    else:
        funcs = [FeFunction(sys.space, U[:, j]) for j in range(U.shape[1])]
    return funcs, history


def _check_finite(U, iteration):
    if np.isfinite(U).all():
        return
    bad = int(np.where(~np.isfinite(U).all(axis=0))[0][0])
    raise DivergenceError(bad, iteration)


# ---------------------------------------------------------------------------
# dominance ratios and decay rates

def _as_ab(sample):
    if isinstance(sample, SampleProblem):
        return sample.a, sample.b
    if isinstance(sample, tuple):
        return sample
    return sample, None


def _probe_scalar(field, probes):
    field = as_scalar_field(field)
    if isinstance(field, SubdomainField):
        # Per-element constants: every element value is attained somewhere.
        return field.values_on_elements(np.arange(len(field.mesh.subdomain)))
    return field(probes)


def _probe_vector_mag(field, probes):
    vals = np.asarray(field(probes), dtype=float)
    if vals.ndim == 1:
        return np.abs(vals)
    return np.linalg.norm(vals, axis=1)


def compute_rho(a0, b0, samples, probes) -> np.ndarray:
    """Per-sample dominance ratio max_x(|eta_a| + |eta_b|) / min_x a0."""
    a0_vals = _probe_scalar(a0, probes)
    if not np.all(a0_vals > 0):
        raise EllipticityError("shared coefficient must be positive at all probes")
    floor = a0_vals.min()
    rhos = np.empty(len(samples))
    for j, s in enumerate(samples):
        a, b = _as_ab(s)
        eta_a = np.abs(_probe_scalar(_field_difference(a, a0), probes))
        if b is not None or b0 is not None:
            eta_b = _probe_vector_mag(_vector_difference(b, b0), probes)
            if eta_a.shape != eta_b.shape:
                # subdomain a-parts probe per element, smooth b-parts per point
                rhos[j] = (eta_a.max() + eta_b.max()) / floor
                continue
            eta_a = eta_a + eta_b
        rhos[j] = eta_a.max() / floor
    return rhos


def compute_rho_hat(a0, samples, probes) -> np.ndarray:
    """Per-sample pointwise ratio max_x |a_j - a0| / a0."""
    a0_vals = _probe_scalar(a0, probes)
    if not np.all(a0_vals > 0):
        raise EllipticityError("shared coefficient must be positive at all probes")
    out = np.empty(len(samples))
    for j, s in enumerate(samples):
        a, _ = _as_ab(s)
        eta = np.abs(_probe_scalar(_field_difference(a, a0), probes))
        out[j] = (eta / a0_vals).max()
    return out


def estimate_rate(errors) -> float:
    """Base of the geometric decay fitted to a positive error sequence."""
    errors = np.asarray(errors, dtype=float)
    if errors.ndim != 1 or len(errors) < 2:
        raise ValueError("need at least two error values")
    if np.any(errors <= 0):
        raise ValueError("errors must be strictly positive")
    n = np.arange(1, len(errors) + 1, dtype=float)
    slope = np.polyfit(n, np.log(errors), 1)[0]
    return float(np.exp(slope))
