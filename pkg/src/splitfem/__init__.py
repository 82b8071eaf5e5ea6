"""Factor-once fixed-point solver for families of convection-diffusion problems.

The coefficient operator of every problem in a family is split into a shared,
parameter-independent part (assembled and factorized a single time) and a
per-sample remainder that only ever touches right-hand sides.  All samples
are then advanced together by a plain fixed-point iteration whose linear
solves share the one factorization across samples and iterations.
"""

from .mesh import Mesh1D, Mesh2D, uniform_interval, structured_rectangle
from .sparse import (
    CsrMatrix,
    Factorization,
    SingularMatrixError,
    assemble_from_triplets,
    estimate_speedup,
    factorize,
    solve_many,
    spmv,
)
from .fem import (
    FeFunction,
    FeSpace,
    ScalarField,
    SubdomainField,
    VectorField,
    apply_dirichlet,
    assemble_boundary_load,
    assemble_convection,
    assemble_diffusion,
    assemble_load,
    error_vs_exact,
    fe_space,
    norm,
)
from .splitter import (
    DivergenceError,
    EllipticityError,
    IterationHistory,
    RhoEstimate,
    SplitSystem,
    build_split_system,
    compute_rho,
    compute_rho_hat,
    estimate_rate,
    iterate,
)
from .grouping import GroupingResult, group_samples

__all__ = [name for name in dir() if not name.startswith("_")]
