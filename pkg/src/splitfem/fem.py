"""Conforming P1/P2 elements: spaces, form assembly, Dirichlet handling, norms.

Assembly is vectorized over elements.  Quadrature is Gauss-Legendre with 5
points per interval in 1-D and a 6-point degree-4 triangle rule in 2-D, which
integrates every product of shape functions that the supported degrees can
produce exactly; error norms accept a finer rule for stability checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
import scipy.sparse as sp

from .mesh import Mesh1D, Mesh2D
from .sparse import CsrMatrix, assemble_from_triplets, from_scipy


# ---------------------------------------------------------------------------
# coefficient fields

@dataclass
class ScalarField:
    """Point evaluator x -> real with a declared smoothness hint."""

    fn: callable
    smoothness: str = "smooth"   # "smooth" or "subdomain"

    def __call__(self, pts):
        out = np.asarray(self.fn(pts), dtype=float)
        n = np.shape(pts)[0]
        if out.ndim == 0:
            out = np.full(n, float(out))
        return out


@dataclass
class VectorField:
    """Point evaluator x -> R^d with a declared smoothness hint."""

    fn: callable
    smoothness: str = "smooth"

    def __call__(self, pts):
        return np.asarray(self.fn(pts), dtype=float)


class SubdomainField(ScalarField):
    """Piecewise constant per subdomain tag; evaluated per element."""

    def __init__(self, mesh: Mesh2D, values_by_tag):
        self.mesh = mesh
        self.values_by_tag = np.asarray(values_by_tag, dtype=float)
        super().__init__(fn=None, smoothness="subdomain")

    def values_on_elements(self, elem_idx):
        return self.values_by_tag[self.mesh.subdomain[elem_idx]]

    def __call__(self, pts):
        raise TypeError("subdomain fields are evaluated per element, not per point")


def as_scalar_field(obj) -> ScalarField:
    if isinstance(obj, ScalarField):
        return obj
    if callable(obj):
        return ScalarField(obj)
    value = float(obj)
    return ScalarField(lambda pts, v=value: np.full(np.shape(pts)[0], v))


def as_vector_field(obj) -> VectorField:
    if isinstance(obj, VectorField):
        return obj
    return VectorField(obj)


# ---------------------------------------------------------------------------
# quadrature rules

def _gauss_legendre_01(npoints):
    x, w = np.polynomial.legendre.leggauss(npoints)
    return (x + 1.0) / 2.0, w / 2.0


# Dunavant rules on the reference triangle, barycentric orbits (a, a, 1-2a).
_TRI_RULES = {
    # degree 4, 6 points
    6: [(0.445948490915965, 0.223381589678011),
        (0.091576213509771, 0.109951743655322)],
    # degree 5, 7 points (first entry is the centroid)
    7: [(1.0 / 3.0, 0.225),
        (0.470142064105115, 0.132394152788506),
        (0.101286507323456, 0.125939180544827)],
}


def _triangle_rule(npoints):
    bary = []
    weights = []
    for a, w in _TRI_RULES[npoints]:
        if a == 1.0 / 3.0:
            orbit = [(a, a)]
        else:
            c = 1.0 - 2.0 * a
            orbit = [(a, a), (a, c), (c, a)]
        for xi, eta in orbit:
            bary.append((xi, eta))
            weights.append(w / 2.0)   # reference triangle has area 1/2
    return np.array(bary), np.array(weights)


def _basis_1d(degree, xi):
    if degree == 1:
        phi = np.stack([1.0 - xi, xi], axis=1)
        dphi = np.stack([np.full_like(xi, -1.0), np.full_like(xi, 1.0)], axis=1)
    elif degree == 2:
        phi = np.stack([(1.0 - xi) * (1.0 - 2.0 * xi),
                        4.0 * xi * (1.0 - xi),
                        xi * (2.0 * xi - 1.0)], axis=1)
        dphi = np.stack([4.0 * xi - 3.0, 4.0 - 8.0 * xi, 4.0 * xi - 1.0], axis=1)
    else:
        raise ValueError(f"unsupported degree {degree}")
    return phi, dphi


def _basis_tri(pts):
    xi, eta = pts[:, 0], pts[:, 1]
    phi = np.stack([1.0 - xi - eta, xi, eta], axis=1)
    gref = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    dphi = np.broadcast_to(gref, (len(pts), 3, 2)).copy()
    return phi, dphi


# ---------------------------------------------------------------------------
# finite element space

@dataclass
class FeSpace:
    """Degree 1 or 2 conforming space with its dof map and Dirichlet set."""

    mesh: object
    degree: int
    dof_coords: np.ndarray
    dof_map: np.ndarray          # (nelem, nloc) local-to-global
    dirichlet_dofs: np.ndarray   # sorted
    # default quadrature caches
    quad_pts: np.ndarray = dc_field(repr=False, default=None)    # (ne, nq, dim)
    quad_wdet: np.ndarray = dc_field(repr=False, default=None)   # (ne, nq)
    basis: np.ndarray = dc_field(repr=False, default=None)       # (nq, nloc)
    basis_grad: np.ndarray = dc_field(repr=False, default=None)  # (ne, nq, nloc, dim)

    @property
    def num_dofs(self) -> int:
        return len(self.dof_coords)

    @property
    def dim(self) -> int:
        return self.mesh.dim


def _quad_data_1d(mesh: Mesh1D, degree, npoints):
    xi, w = _gauss_legendre_01(npoints)
    phi, dphi = _basis_1d(degree, xi)
    h = mesh.element_lengths()                       # (ne,)
    pts = mesh.nodes[:-1, None] + np.outer(h, xi)    # (ne, nq)
    wdet = np.outer(h, w)
    grad = dphi[None, :, :, None] / h[:, None, None, None]
    return pts[:, :, None], wdet, phi, grad


def _quad_data_2d(mesh: Mesh2D, npoints):
    ref, w = _triangle_rule(npoints)
    phi, dref = _basis_tri(ref)
    p = mesh.vertices[mesh.triangles]                # (ne, 3, 2)
    jac = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)  # (ne, 2, 2)
    det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
    inv_t = np.empty_like(jac)                       # inverse transpose of jac
    inv_t[:, 0, 0] = jac[:, 1, 1]
    inv_t[:, 0, 1] = -jac[:, 1, 0]
    inv_t[:, 1, 0] = -jac[:, 0, 1]
    inv_t[:, 1, 1] = jac[:, 0, 0]
    inv_t /= det[:, None, None]
    pts = p[:, None, 0, :] + np.einsum("qr,erd->eqd", ref, jac.transpose(0, 2, 1))
    wdet = np.outer(det, w)
    grad = np.einsum("qir,edr->eqid", dref, inv_t)
    return pts, wdet, phi, grad


def _quad_data(space: FeSpace, npoints):
    if space.dim == 1:
        return _quad_data_1d(space.mesh, space.degree, npoints)
    return _quad_data_2d(space.mesh, npoints)


def fe_space(mesh, degree: int = 1, dirichlet_sides=None) -> FeSpace:
    """Build a P1/P2 space on the mesh with Dirichlet dofs on the given sides.

    1-D sides are "left"/"right" (default both).  2-D sides are the rectangle
    side tags (default all four).  Pass an empty tuple for a pure Neumann set.
    """
    if isinstance(mesh, Mesh1D):
        if degree == 1:
            coords = mesh.nodes.copy()
            dof_map = np.column_stack([np.arange(mesh.num_elements),
                                       np.arange(1, mesh.num_elements + 1)])
        elif degree == 2:
            mids = 0.5 * (mesh.nodes[:-1] + mesh.nodes[1:])
            coords = np.empty(2 * mesh.num_elements + 1)
            coords[0::2] = mesh.nodes
            coords[1::2] = mids
            base = 2 * np.arange(mesh.num_elements)
            dof_map = np.column_stack([base, base + 1, base + 2])
        else:
            raise ValueError(f"unsupported degree {degree}")
        if dirichlet_sides is None:
            dirichlet_sides = ("left", "right")
        dd = []
        if "left" in dirichlet_sides:
            dd.append(0)
        if "right" in dirichlet_sides:
            dd.append(len(coords) - 1)
        space = FeSpace(mesh, degree, coords, dof_map, np.array(sorted(dd), dtype=np.int64))
    elif isinstance(mesh, Mesh2D):
        if degree != 1:
            raise NotImplementedError("2-D supports linear elements only")
        if dirichlet_sides is None:
            dirichlet_sides = ("bottom", "right", "top", "left")
        dd = set()
        for side in dirichlet_sides:
            dd.update(mesh.edges_of_side(side).ravel().tolist())
        space = FeSpace(mesh, 1, mesh.vertices.copy(), mesh.triangles.copy(),
                        np.array(sorted(dd), dtype=np.int64))
    else:
        raise TypeError(f"unsupported mesh type {type(mesh)!r}")

    npoints = 5 if space.dim == 1 else 6
    space.quad_pts, space.quad_wdet, space.basis, space.basis_grad = _quad_data(space, npoints)
    return space


@dataclass
class FeFunction:
    """Coefficient vector over the dofs of a space."""

    space: FeSpace
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (self.space.num_dofs,):
            raise ValueError("coefficient length must match the dof count")


# ---------------------------------------------------------------------------
# field evaluation on quadrature points

def _flatten_pts(space, pts):
    if space.dim == 1:
        return pts[..., 0].reshape(-1)
    return pts.reshape(-1, 2)


def eval_scalar(space: FeSpace, field, pts=None) -> np.ndarray:
    """Evaluate a scalar field on quadrature points, shape (ne, nq)."""
    if pts is None:
        pts = space.quad_pts
    ne, nq = pts.shape[:2]
    field = as_scalar_field(field)
    if isinstance(field, SubdomainField):
        vals = field.values_on_elements(np.arange(ne))
        return np.broadcast_to(vals[:, None], (ne, nq)).copy()
    return field(_flatten_pts(space, pts)).reshape(ne, nq)


def eval_vector(space: FeSpace, field, pts=None) -> np.ndarray:
    """Evaluate a velocity-like field on quadrature points, (ne, nq, dim)."""
    if pts is None:
        pts = space.quad_pts
    ne, nq = pts.shape[:2]
    if space.dim == 1:
        return eval_scalar(space, field, pts)[:, :, None]
    field = as_vector_field(field)
    out = np.asarray(field(pts.reshape(-1, 2)), dtype=float)
    return out.reshape(ne, nq, 2)


def probe_points(space: FeSpace) -> np.ndarray:
    """All quadrature points, flattened; the probe grid for coefficient maxima."""
    return _flatten_pts(space, space.quad_pts)


# ---------------------------------------------------------------------------
# assembly

def _scatter_matrix(space, local) -> CsrMatrix:
    n = space.num_dofs
    nloc = space.dof_map.shape[1]
    rows = np.repeat(space.dof_map, nloc, axis=1)
    cols = np.tile(space.dof_map, (1, nloc))
    return assemble_from_triplets(n, n, (rows.ravel(), cols.ravel(), local.ravel()))


def _scatter_vector(space, local) -> np.ndarray:
    out = np.zeros(space.num_dofs)
    np.add.at(out, space.dof_map, local)
    return out


def assemble_diffusion(space: FeSpace, a) -> CsrMatrix:
    """Matrix of the weighted gradient-gradient form; exactly symmetric."""
    avals = eval_scalar(space, a)
    gdot = np.einsum("eqid,eqjd->eqij", space.basis_grad, space.basis_grad)
    local = np.einsum("eq,eqij->eij", space.quad_wdet * avals, gdot)
    return _scatter_matrix(space, local)


def assemble_convection(space: FeSpace, b) -> CsrMatrix:
    """Matrix of the transport form: trial gradients against test values."""
    bvals = eval_vector(space, b)
    bdotg = np.einsum("eqd,eqjd->eqj", bvals, space.basis_grad)
    local = np.einsum("eq,qi,eqj->eij", space.quad_wdet, space.basis, bdotg)
    return _scatter_matrix(space, local)


def assemble_load(space: FeSpace, f) -> np.ndarray:
    """Vector of the source form against all test functions."""
    fvals = eval_scalar(space, f)
    local = np.einsum("eq,qi->ei", space.quad_wdet * fvals, space.basis)
    return _scatter_vector(space, local)


def assemble_gradient_load(space: FeSpace, g) -> np.ndarray:
    """Vector with entries of the form (g, grad test function)."""
    gvals = eval_vector(space, g)
    local = np.einsum("eq,eqd,eqid->ei", space.quad_wdet, gvals, space.basis_grad)
    return _scatter_vector(space, local)


def assemble_boundary_load(space: FeSpace, side: str, g) -> np.ndarray:
    """Line integral of g against test functions along one tagged side."""
    if space.dim != 2:
        raise ValueError("boundary loads need a 2-D mesh side with edges")
    edges = space.mesh.edges_of_side(side)
    if len(edges) == 0:
        raise ValueError(f"side {side!r} has no edges")
    t, w = _gauss_legendre_01(3)
    p0 = space.mesh.vertices[edges[:, 0]]
    p1 = space.mesh.vertices[edges[:, 1]]
    pts = p0[:, None, :] + t[None, :, None] * (p1 - p0)[:, None, :]
    lengths = np.linalg.norm(p1 - p0, axis=1)
    gfield = as_scalar_field(g)
    gvals = gfield(pts.reshape(-1, 2)).reshape(len(edges), len(t))
    shape = np.stack([1.0 - t, t], axis=1)          # (nq, 2)
    local = np.einsum("eq,qi,e->ei", gvals * w[None, :], shape, lengths)
    out = np.zeros(space.num_dofs)
    np.add.at(out, edges, local)
    return out


def apply_dirichlet(A: CsrMatrix, rhs: np.ndarray, space: FeSpace,
                    value: float = 0.0, symmetric: bool = False):
    """Replace Dirichlet rows by identity rows and zero their rhs entries.

    The symmetric variant also clears the matching columns (safe for the
    homogeneous data enforced here) and is meant for pure-diffusion systems.
    """
    if value != 0.0:
        raise ValueError("only homogeneous Dirichlet values are supported")
    dd = space.dirichlet_dofs
    rhs = np.array(rhs, dtype=float, copy=True)
    if len(dd) == 0:
        return A, rhs
    mat = A.to_scipy().copy()
    for r in dd:
        mat.data[mat.indptr[r]:mat.indptr[r + 1]] = 0.0
    if symmetric:
        mat.data[np.isin(mat.indices, dd)] = 0.0
    diag = sp.coo_matrix((np.ones(len(dd)), (dd, dd)), shape=(A.nrows, A.ncols))
    out = (mat + diag).tocsr()
    out.eliminate_zeros()
    rhs[dd] = 0.0
    return from_scipy(out), rhs


def zero_rows(A: CsrMatrix, rows) -> CsrMatrix:
    """Return a copy of A with the given rows cleared (no diagonal insert)."""
    rows = np.asarray(rows, dtype=np.int64)
    if len(rows) == 0:
        return A
    mat = A.to_scipy().copy()
    for r in rows:
        mat.data[mat.indptr[r]:mat.indptr[r + 1]] = 0.0
    mat.eliminate_zeros()
    return from_scipy(mat)


# ---------------------------------------------------------------------------
# norms and errors

def mass_matrix(space: FeSpace) -> CsrMatrix:
    local = np.einsum("eq,qi,qj->eij", space.quad_wdet, space.basis, space.basis)
    return _scatter_matrix(space, local)


def stiffness_matrix(space: FeSpace) -> CsrMatrix:
    return assemble_diffusion(space, 1.0)


def gram_h1(space: FeSpace) -> CsrMatrix:
    """Matrix G with u' G u = (full H1 norm of the FE function) squared."""
    return from_scipy(mass_matrix(space).to_scipy() + stiffness_matrix(space).to_scipy())


def _norm_parts(space, coeffs, exact=None, exact_grad=None, npoints=None):
    """Quadrature of (u - exact)^2 and |grad u - exact_grad|^2."""
    if npoints is None:
        pts, wdet, phi, grad = (space.quad_pts, space.quad_wdet,
                                space.basis, space.basis_grad)
    else:
        pts, wdet, phi, grad = _quad_data(space, npoints)
    uloc = coeffs[space.dof_map]                       # (ne, nloc)
    uq = np.einsum("qi,ei->eq", phi, uloc)
    gq = np.einsum("eqid,ei->eqd", grad, uloc)
    if exact is not None:
        uq = uq - eval_scalar(space, exact, pts)
    if exact_grad is not None:
        gq = gq - eval_vector(space, exact_grad, pts)
    l2_sq = float(np.sum(wdet * uq**2))
    semi_sq = float(np.sum(wdet * np.sum(gq**2, axis=2)))
    return l2_sq, semi_sq


def _combine(kind, l2_sq, semi_sq):
    if kind == "L2":
        return np.sqrt(l2_sq)
    if kind == "H1semi":
        return np.sqrt(semi_sq)
    if kind == "H1":
        return np.sqrt(l2_sq + semi_sq)
    raise ValueError(f"unknown norm kind {kind!r}")


def norm(u: FeFunction, kind: str = "H1", npoints=None) -> float:
    """Quadrature evaluation of the L2, H1 seminorm, or full H1 norm."""
    l2_sq, semi_sq = _norm_parts(u.space, u.coeffs, npoints=npoints)
    return _combine(kind, l2_sq, semi_sq)


def error_vs_exact(u: FeFunction, exact, exact_grad=None, kind: str = "H1",
                   npoints=None) -> float:
    """Quadrature norm of (u - exact); gradient field needed for H1 kinds."""
    if kind in ("H1", "H1semi") and exact_grad is None:
        raise ValueError("H1 error needs the exact gradient")
    l2_sq, semi_sq = _norm_parts(u.space, u.coeffs, exact=exact,
                                 exact_grad=exact_grad, npoints=npoints)
    return _combine(kind, l2_sq, semi_sq)
