"""Admissible finite-volume meshes: 1D intervals and 2D tensor-product rectangles.

All geometry is stored as flat numpy arrays.  Interior edges are numbered
first, boundary edges after them, so global edge ``j`` is interior iff
``j < mesh.n_interior``.  For an interior edge the normal points from
``edge_K`` to ``edge_L``; for a boundary edge it points out of the domain.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DimensionMismatch, InvalidArgument


@dataclass(frozen=True)
class Cell:
    id: int
    center: np.ndarray
    measure: float


@dataclass(frozen=True)
class Edge:
    id: int
    interior: bool
    K: int
    L: int | None
    measure: float
    distance: float
    transmissibility: float
    normal: np.ndarray
    dist_K_to_face: float
    dual_measure: float


@dataclass(frozen=True, eq=False)
class Mesh:
    dimension: int
    centers: np.ndarray  # (n_cells, d)
    measures: np.ndarray  # (n_cells,)
    # interior edges
    edge_K: np.ndarray
    edge_L: np.ndarray
    edge_measure: np.ndarray
    edge_distance: np.ndarray
    edge_normal: np.ndarray  # (n_interior, d), from K to L
    dist_K_face: np.ndarray
    dist_L_face: np.ndarray
    # boundary edges
    bnd_K: np.ndarray
    bnd_measure: np.ndarray
    bnd_distance: np.ndarray
    bnd_normal: np.ndarray
    halfwidths: np.ndarray  # (n_cells, d); every cell is an axis-aligned box
    dx: float
    domain_measure: float
    bounds: tuple

    @property
    def n_cells(self) -> int:
        return self.measures.shape[0]

    @property
    def n_interior(self) -> int:
        return self.edge_K.shape[0]

    @property
    def n_boundary(self) -> int:
        return self.bnd_K.shape[0]

    @property
    def n_edges(self) -> int:
        return self.n_interior + self.n_boundary

    @cached_property
    def transmissibility(self) -> np.ndarray:
        return self.edge_measure / self.edge_distance

    @cached_property
    def diamond_measure(self) -> np.ndarray:
        # orthogonality: m(sigma) d(x_K, x_L) = d m(T_{K,sigma})
        return self.edge_measure * self.edge_distance / self.dimension

    @cached_property
    def triangle_measure(self) -> np.ndarray:
        return self.bnd_measure * self.bnd_distance / self.dimension

    @cached_property
    def zeta(self) -> float:
        """Regularity constant: min over (K, sigma) of d(x_K, sigma) / d_sigma, capped at 1/2."""
        ratios = [self.dist_K_face / self.edge_distance, self.dist_L_face / self.edge_distance]
        if self.n_boundary:
            ratios.append(np.ones(1))  # boundary edges: d_sigma = d(x_K, sigma)
        return float(min(0.5, min(r.min() for r in ratios if r.size)))

    @cached_property
    def xi(self) -> float:
        return float(self.edge_distance.min() / self.dx)

    @cached_property
    def cell_edges(self) -> list:
        """Global edge ids adjacent to each cell."""
        adj = [[] for _ in range(self.n_cells)]
        for j, (K, L) in enumerate(zip(self.edge_K.tolist(), self.edge_L.tolist())):
            adj[K].append(j)
            adj[L].append(j)
        for j, K in enumerate(self.bnd_K.tolist()):
            adj[K].append(self.n_interior + j)
        return adj

    def cell(self, k: int) -> Cell:
        return Cell(k, self.centers[k].copy(), float(self.measures[k]))

    def edge(self, j: int) -> Edge:
        if j < self.n_interior:
            return Edge(j, True, int(self.edge_K[j]), int(self.edge_L[j]),
                        float(self.edge_measure[j]), float(self.edge_distance[j]),
                        float(self.transmissibility[j]), self.edge_normal[j].copy(),
                        float(self.dist_K_face[j]), float(self.diamond_measure[j]))
        b = j - self.n_interior
        if not 0 <= b < self.n_boundary:
            raise IndexError(j)
        return Edge(j, False, int(self.bnd_K[b]), None, float(self.bnd_measure[b]),
                    float(self.bnd_distance[b]), float(self.bnd_measure[b] / self.bnd_distance[b]),
                    self.bnd_normal[b].copy(), float(self.bnd_distance[b]),
                    float(self.triangle_measure[b]))

    def edges(self):
        return [self.edge(j) for j in range(self.n_edges)]

    def cells(self):
        return [self.cell(k) for k in range(self.n_cells)]

    def diff(self, v):
        """``D_{K,sigma} v = v_L - v_K`` on interior edges (leading axis = cells)."""
        v = np.asarray(v)
        return v[self.edge_L] - v[self.edge_K]


def _interval(x, c, h, dK, dL, dist, bdist) -> Mesh:
    N = c.size
    ones = np.ones(N - 1)
    return Mesh(
        dimension=1,
        centers=c[:, None],
        measures=h,
        edge_K=np.arange(N - 1), edge_L=np.arange(1, N),
        edge_measure=ones,
        edge_distance=dist,
        edge_normal=ones[:, None].copy(),
        dist_K_face=dK,
        dist_L_face=dL,
        bnd_K=np.array([0, N - 1]),
        bnd_measure=np.ones(2),
        bnd_distance=bdist,
        bnd_normal=np.array([[-1.0], [1.0]]),
        halfwidths=0.5 * h[:, None],
        dx=float(h.max()),
        domain_measure=float(x[-1] - x[0]),
        bounds=(float(x[0]), float(x[-1])),
    )


def build_graded_interval_mesh(nodes) -> Mesh:
    """1D mesh from strictly increasing cell boundaries; centers at midpoints."""
    x = np.asarray(nodes, dtype=float)
    if x.ndim != 1 or x.size < 3:
        raise InvalidArgument("need at least 3 nodes (2 cells)")
    h = np.diff(x)
    if np.any(h <= 0) or not np.all(np.isfinite(x)):
        raise InvalidArgument("nodes must be finite and strictly increasing")
    c = 0.5 * (x[:-1] + x[1:])
    return _interval(x, c, h, x[1:-1] - c[:-1], c[1:] - x[1:-1], c[1:] - c[:-1],
                     np.array([c[0] - x[0], x[-1] - c[-1]]))


def build_interval_mesh(N: int, a: float = 0.0, b: float = 1.0) -> Mesh:
    """Uniform mesh of ``(a, b)`` with ``N`` cells."""
    if int(N) != N or N < 2:
        raise InvalidArgument(f"N must be an integer >= 2, got {N}")
    if not a < b:
        raise InvalidArgument(f"need a < b, got ({a}, {b})")
    N = int(N)
    h = (b - a) / N
    x = a + h * np.arange(N + 1)
    x[-1] = b
    c = a + h * (np.arange(N) + 0.5)
    # uniform spacing stored exactly so that ratios are exactly 1/2
    return _interval(x, c, np.full(N, h), np.full(N - 1, h / 2), np.full(N - 1, h / 2),
                     np.full(N - 1, h), np.full(2, h / 2))


def build_rect_mesh(Nx: int, Ny: int, domain=(0.0, 1.0, 0.0, 1.0)) -> Mesh:
    """Uniform ``Nx x Ny`` grid on ``domain = (x0, x1, y0, y1)``.

    Cell ``(i, j)`` has index ``i + Nx * j``.
    """
    if int(Nx) != Nx or int(Ny) != Ny or Nx < 2 or Ny < 2:
        raise InvalidArgument(f"Nx, Ny must be integers >= 2, got ({Nx}, {Ny})")
    x0, x1, y0, y1 = map(float, domain)
    if not (x0 < x1 and y0 < y1):
        raise InvalidArgument(f"degenerate rectangle {domain}")
    Nx, Ny = int(Nx), int(Ny)
    hx, hy = (x1 - x0) / Nx, (y1 - y0) / Ny
    I, J = np.meshgrid(np.arange(Nx), np.arange(Ny), indexing="xy")
    I, J = I.ravel(), J.ravel()  # index = i + Nx*j
    centers = np.column_stack([x0 + (I + 0.5) * hx, y0 + (J + 0.5) * hy])
    idx = lambda i, j: i + Nx * j  # noqa: E731

    # vertical faces (between (i,j) and (i+1,j)): measure hy, distance hx
    iv, jv = np.meshgrid(np.arange(Nx - 1), np.arange(Ny), indexing="xy")
    iv, jv = iv.ravel(), jv.ravel()
    # horizontal faces (between (i,j) and (i,j+1)): measure hx, distance hy
    ih, jh = np.meshgrid(np.arange(Nx), np.arange(Ny - 1), indexing="xy")
    ih, jh = ih.ravel(), jh.ravel()
    nv, nh = iv.size, ih.size
    K = np.concatenate([idx(iv, jv), idx(ih, jh)])
    L = np.concatenate([idx(iv + 1, jv), idx(ih, jh + 1)])
    e_meas = np.concatenate([np.full(nv, hy), np.full(nh, hx)])
    e_dist = np.concatenate([np.full(nv, hx), np.full(nh, hy)])
    half = 0.5 * e_dist
    normals = np.concatenate([np.tile([1.0, 0.0], (nv, 1)), np.tile([0.0, 1.0], (nh, 1))])

    j_all, i_all = np.arange(Ny), np.arange(Nx)
    bK = np.concatenate([idx(0, j_all), idx(Nx - 1, j_all), idx(i_all, 0), idx(i_all, Ny - 1)])
    b_meas = np.concatenate([np.full(Ny, hy), np.full(Ny, hy), np.full(Nx, hx), np.full(Nx, hx)])
    b_dist = np.concatenate([np.full(2 * Ny, hx / 2), np.full(2 * Nx, hy / 2)])
    b_norm = np.concatenate([np.tile([-1.0, 0.0], (Ny, 1)), np.tile([1.0, 0.0], (Ny, 1)),
                             np.tile([0.0, -1.0], (Nx, 1)), np.tile([0.0, 1.0], (Nx, 1))])
    return Mesh(
        dimension=2,
        centers=centers,
        measures=np.full(Nx * Ny, hx * hy),
        edge_K=K, edge_L=L,
        edge_measure=e_meas, edge_distance=e_dist, edge_normal=normals,
        dist_K_face=half, dist_L_face=half.copy(),
        bnd_K=bK, bnd_measure=b_meas, bnd_distance=b_dist, bnd_normal=b_norm,
        halfwidths=np.tile([hx / 2, hy / 2], (Nx * Ny, 1)),
        dx=float(np.hypot(hx, hy)),
        domain_measure=(x1 - x0) * (y1 - y0),
        bounds=(x0, x1, y0, y1),
    )


def build_mesh(spec) -> Mesh:
    """Build from a config mapping ``{type: interval|rect, n: [...], domain: [...]}``."""
    kind = spec["type"]
    n = list(spec["n"])
    dom = list(spec["domain"])
    if kind == "interval":
        if len(n) != 1 or len(dom) != 2:
            raise InvalidArgument("interval mesh needs n = [N], domain = [a, b]")
        return build_interval_mesh(n[0], dom[0], dom[1])
    if kind == "rect":
        if len(n) != 2 or len(dom) != 4:
            raise InvalidArgument("rect mesh needs n = [Nx, Ny], domain = [x0, x1, y0, y1]")
        return build_rect_mesh(n[0], n[1], dom)
    raise InvalidArgument(f"unknown mesh type {kind!r}")


def discrete_gradient(mesh: Mesh, field) -> np.ndarray:
    """Dual-mesh gradient: one d-vector per edge (global edge order).

    Interior diamonds carry ``m(sigma)/m(T) * (v_L - v_K) * nu_{K,sigma}``;
    boundary triangles carry zero.
    """
    v = np.asarray(field, dtype=float)
    if v.shape != (mesh.n_cells,):
        raise DimensionMismatch(f"expected {mesh.n_cells} cell values, got shape {v.shape}")
    g = np.zeros((mesh.n_edges, mesh.dimension))
    scale = mesh.edge_measure / mesh.diamond_measure * mesh.diff(v)
    g[: mesh.n_interior] = scale[:, None] * mesh.edge_normal
    return g
