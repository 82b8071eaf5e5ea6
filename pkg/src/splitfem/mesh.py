"""Interval meshes and structured triangulations of rectangles."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

#: Boundary side names used for edge tags, in counter-clockwise order.
SIDES = ("bottom", "right", "top", "left")


@dataclass
class Mesh1D:
    """Partition of an interval into the elements [nodes[i], nodes[i+1]].

    Nodes are strictly increasing; the first and last node are the domain
    endpoints.
    """

    nodes: np.ndarray

    def __post_init__(self):
        self.nodes = np.ascontiguousarray(self.nodes, dtype=float)
        if self.nodes.ndim != 1 or len(self.nodes) < 2:
            raise ValueError("mesh needs at least two nodes")
        if not np.all(np.diff(self.nodes) > 0):
            raise ValueError("nodes must be strictly increasing")

    @property
    def dim(self) -> int:
        return 1

    @property
    def num_elements(self) -> int:
        return len(self.nodes) - 1

    def element_lengths(self) -> np.ndarray:
        return np.diff(self.nodes)

    def dump_text(self) -> str:
        """Line-oriented listing, one node / element per line."""
        lines = [f"nodes {len(self.nodes)}"]
        lines += [f"node {i} {float(x)!r}" for i, x in enumerate(self.nodes)]
        lines.append(f"elements {self.num_elements}")
        lines += [f"element {i} {i} {i + 1}" for i in range(self.num_elements)]
        return "\n".join(lines) + "\n"


@dataclass
class Mesh2D:
    """Triangulation of a rectangle with tagged boundary edges.

    Triangles are counter-clockwise vertex index triples.  Boundary edges
    carry the side tag they lie on, and every triangle carries a subdomain
    tag (1 inside the configured disk, else 0).
    """

    vertices: np.ndarray          # (nv, 2)
    triangles: np.ndarray         # (nt, 3), CCW
    boundary_edges: np.ndarray    # (ne, 2) vertex pairs
    edge_tags: list = field(default_factory=list)   # side name per edge
    subdomain: np.ndarray = None  # (nt,) int, 0 or 1

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=float)
        self.triangles = np.ascontiguousarray(self.triangles, dtype=np.int64)
        self.boundary_edges = np.ascontiguousarray(self.boundary_edges, dtype=np.int64)
        if self.subdomain is None:
            self.subdomain = np.zeros(len(self.triangles), dtype=np.int64)
        self.subdomain = np.ascontiguousarray(self.subdomain, dtype=np.int64)
        if np.any(self.signed_areas() <= 0):
            raise ValueError("all triangles must be counter-clockwise with positive area")

    @property
    def dim(self) -> int:
        return 2

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_triangles(self) -> int:
        return len(self.triangles)

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]          # (nt, 3, 2)
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    def edges_of_side(self, side: str) -> np.ndarray:
        if side not in SIDES:
            raise ValueError(f"unknown side {side!r}, expected one of {SIDES}")
        keep = [i for i, tag in enumerate(self.edge_tags) if tag == side]
        return self.boundary_edges[keep]

    def dump_text(self) -> str:
        lines = [f"vertices {self.num_vertices}"]
        lines += [f"vertex {i} {float(x)!r} {float(y)!r}"
                  for i, (x, y) in enumerate(self.vertices)]
        lines.append(f"triangles {self.num_triangles}")
        lines += [
            f"triangle {i} {t[0]} {t[1]} {t[2]} subdomain {s}"
            for i, (t, s) in enumerate(zip(self.triangles, self.subdomain))
        ]
        lines.append(f"boundary_edges {len(self.boundary_edges)}")
        lines += [
            f"edge {i} {e[0]} {e[1]} {tag}"
            for i, (e, tag) in enumerate(zip(self.boundary_edges, self.edge_tags))
        ]
        return "\n".join(lines) + "\n"


def uniform_interval(left: float, right: float, num_elems: int) -> Mesh1D:
    """Uniform partition of [left, right] into num_elems elements."""
    if num_elems < 1:
        raise ValueError(f"num_elems must be >= 1, got {num_elems}")
    if not left < right:
        raise ValueError(f"need left < right, got [{left}, {right}]")
    return Mesh1D(np.linspace(left, right, num_elems + 1))


def structured_rectangle(
    xmin: float,
    xmax: float,
    ymin: float,
    ymax: float,
    nx: int,
    ny: int,
    disk: tuple | None = None,
) -> Mesh2D:
    """Criss-cross triangulation of a rectangle on an nx-by-ny cell grid.

    Each grid cell is split along its lower-left to upper-right diagonal
    (fixed convention, so meshes are reproducible bit for bit).  When
    ``disk=(center, radius)`` is given, triangles whose centroid falls
    strictly inside the disk get subdomain tag 1.
    """
    if nx < 1 or ny < 1:
        raise ValueError(f"nx and ny must be >= 1, got {nx}, {ny}")
    if not (xmin < xmax and ymin < ymax):
        raise ValueError("degenerate rectangle")
    if disk is not None:
        (_, radius) = disk
        if radius <= 0:
            raise ValueError(f"disk radius must be positive, got {radius}")

    xs = np.linspace(xmin, xmax, nx + 1)
    ys = np.linspace(ymin, ymax, ny + 1)
    xv, yv = np.meshgrid(xs, ys, indexing="xy")   # vertex id = j*(nx+1) + i
    vertices = np.column_stack([xv.ravel(), yv.ravel()])

    def vid(i, j):
        return j * (nx + 1) + i

    triangles = []
    for j in range(ny):
        for i in range(nx):
            a = vid(i, j)
            b = vid(i + 1, j)
            c = vid(i + 1, j + 1)
            d = vid(i, j + 1)
            triangles.append((a, b, c))
            triangles.append((a, c, d))
    triangles = np.array(triangles, dtype=np.int64)

    edges = []
    tags = []
    for i in range(nx):
        edges.append((vid(i, 0), vid(i + 1, 0)))
        tags.append("bottom")
    for j in range(ny):
        edges.append((vid(nx, j), vid(nx, j + 1)))
        tags.append("right")
    for i in range(nx):
        edges.append((vid(i + 1, ny), vid(i, ny)))
        tags.append("top")
    for j in range(ny):
        edges.append((vid(0, j + 1), vid(0, j)))
        tags.append("left")

    mesh = Mesh2D(vertices, triangles, np.array(edges, dtype=np.int64), tags)

    if disk is not None:
        (cx, cy), radius = disk
        cent = mesh.centroids()
        inside = (cent[:, 0] - cx) ** 2 + (cent[:, 1] - cy) ** 2 < radius**2
        mesh.subdomain = inside.astype(np.int64)
    return mesh
