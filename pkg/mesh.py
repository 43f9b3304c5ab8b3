# cosserat_dem/mesh.py
"""
Cell/facet complex used by every other module.

Cells carry a barycenter dof; facets carry the geometry needed by the
reconstructions (barycenter, measure, diameter, unit normal) and their
adjacency. Interior facet normals point from c_minus to c_plus, boundary
normals point outward.
"""
import itertools
import logging
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np
from scipy.spatial import cKDTree

import config
from errors import MeshError

logger = logging.getLogger(__name__)

BOUNDARY = -1

# Degree-2 rules in barycentric coordinates.
_TRI_BARY = np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]])
_TET_A, _TET_B = 0.5854101966249685, 0.1381966011250105
_TET_BARY = np.array([
    [_TET_A, _TET_B, _TET_B, _TET_B],
    [_TET_B, _TET_A, _TET_B, _TET_B],
    [_TET_B, _TET_B, _TET_A, _TET_B],
    [_TET_B, _TET_B, _TET_B, _TET_A],
])
_GAUSS2 = 0.5 / np.sqrt(3.0)


@dataclass(frozen=True)
class Cell:
    vertices: tuple
    barycenter: np.ndarray
    measure: float
    facets: tuple
    signs: tuple


@dataclass(frozen=True)
class Facet:
    vertices: tuple
    barycenter: np.ndarray
    measure: float
    diameter: float
    normal: np.ndarray
    cells: tuple  # (c_minus, c_plus) or (c_F, BOUNDARY)
    tag: str | None = None

    @property
    def is_boundary(self) -> bool:
        return self.cells[1] == BOUNDARY

    def sign(self, cell: int) -> int:
        """Orientation iota_{c,F}: +1 for c_minus (or the boundary cell), -1 for c_plus."""
        if cell == self.cells[0]:
            return 1
        if cell == self.cells[1]:
            return -1
        raise MeshError(f"Cell {cell} is not adjacent to facet with cells {self.cells}.")


@dataclass(frozen=True)
class FacetPartition:
    interior: np.ndarray
    dirichlet: np.ndarray
    neumann: np.ndarray

    def tags_of(self, mesh: "Mesh", facets: np.ndarray) -> list:
        return [mesh.boundary_tags[int(f)] for f in facets]


@dataclass(frozen=True)
class Quadrature:
    points: np.ndarray
    weights: np.ndarray
    owner: np.ndarray  # facet or cell index of each point


@dataclass(frozen=True)
class Mesh:
    dim: int
    vertices: np.ndarray
    cell_vertices: tuple
    facet_vertices: tuple
    cell_centers: np.ndarray
    cell_volumes: np.ndarray
    facet_centers: np.ndarray
    facet_areas: np.ndarray
    facet_diameters: np.ndarray
    facet_normals: np.ndarray
    facet_cells: np.ndarray
    cell_facets: tuple
    cell_facet_signs: tuple
    boundary_tags: dict = field(default_factory=dict)
    # Triangles of each facet (3D only), used for quadrature.
    facet_triangles: tuple = ()

    @property
    def n_cells(self) -> int:
        return len(self.cell_vertices)

    @property
    def n_facets(self) -> int:
        return len(self.facet_vertices)

    @property
    def interior_facets(self) -> np.ndarray:
        return np.flatnonzero(self.facet_cells[:, 1] != BOUNDARY)

    @property
    def boundary_facets(self) -> np.ndarray:
        return np.flatnonzero(self.facet_cells[:, 1] == BOUNDARY)

    @property
    def tags(self) -> set:
        return {t for t in self.boundary_tags.values() if t is not None}

    @property
    def h(self) -> float:
        return float(self.facet_diameters.max())

    @property
    def is_simplicial(self) -> bool:
        return all(len(v) == self.dim + 1 for v in self.cell_vertices)

    def cell(self, c: int) -> Cell:
        return Cell(
            vertices=self.cell_vertices[c],
            barycenter=self.cell_centers[c],
            measure=float(self.cell_volumes[c]),
            facets=tuple(int(f) for f in self.cell_facets[c]),
            signs=tuple(int(s) for s in self.cell_facet_signs[c]),
        )

    def facet(self, f: int) -> Facet:
        return Facet(
            vertices=self.facet_vertices[f],
            barycenter=self.facet_centers[f],
            measure=float(self.facet_areas[f]),
            diameter=float(self.facet_diameters[f]),
            normal=self.facet_normals[f],
            cells=(int(self.facet_cells[f, 0]), int(self.facet_cells[f, 1])),
            tag=self.boundary_tags.get(f),
        )

    @property
    def cells(self) -> list:
        return [self.cell(c) for c in range(self.n_cells)]

    @property
    def facets(self) -> list:
        return [self.facet(f) for f in range(self.n_facets)]

    def neighbors(self, c: int) -> list:
        out = []
        for f in self.cell_facets[c]:
            a, b = self.facet_cells[f]
            if b == BOUNDARY:
                continue
            out.append(int(b) if a == c else int(a))
        return out

    def facets_with_tag(self, tag: str) -> np.ndarray:
        return np.array(sorted(f for f, t in self.boundary_tags.items() if t == tag), dtype=int)

    def closure_defect(self) -> np.ndarray:
        """Per-cell |sum_F |F| n_{F,c}| relative to sum_F |F|."""
        out = np.empty(self.n_cells)
        for c in range(self.n_cells):
            fs = self.cell_facets[c]
            vec = (self.cell_facet_signs[c][:, None] * self.facet_areas[fs][:, None] * self.facet_normals[fs]).sum(axis=0)
            out[c] = np.linalg.norm(vec) / self.facet_areas[fs].sum()
        return out


# --- Geometry helpers ---

def _polygon_area_centroid(pts: np.ndarray) -> tuple[float, np.ndarray]:
    x, y = pts[:, 0], pts[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    area2 = cross.sum()
    if abs(area2) == 0.0:
        return 0.0, pts.mean(axis=0)
    cx = ((x + xn) * cross).sum() / (3.0 * area2)
    cy = ((y + yn) * cross).sum() / (3.0 * area2)
    return abs(area2) / 2.0, np.array([cx, cy])


def _fan(pts: np.ndarray) -> list:
    """Triangles (as point triples) fanning a planar polygon around its vertex mean."""
    if len(pts) == 3:
        return [pts]
    center = pts.mean(axis=0)
    return [np.array([center, pts[i], pts[(i + 1) % len(pts)]]) for i in range(len(pts))]


def _facet_geometry_3d(pts: np.ndarray) -> tuple[float, np.ndarray, np.ndarray, list]:
    tris = _fan(pts)
    area_vec = np.zeros(3)
    weighted = np.zeros(3)
    total = 0.0
    for tri in tris:
        av = 0.5 * np.cross(tri[1] - tri[0], tri[2] - tri[0])
        a = np.linalg.norm(av)
        area_vec += av
        weighted += a * tri.mean(axis=0)
        total += a
    area = np.linalg.norm(area_vec)
    if area == 0.0:
        return 0.0, pts.mean(axis=0), np.zeros(3), tris
    return total, weighted / total, area_vec / area, tris


def _diameter(pts: np.ndarray) -> float:
    diffs = pts[:, None, :] - pts[None, :, :]
    return float(np.sqrt((diffs ** 2).sum(axis=-1)).max())


def _local_facets(dim: int, cell: tuple, faces: list | None) -> list:
    if faces is not None:
        return [tuple(f) for f in faces]
    if dim == 2:
        n = len(cell)
        return [(cell[i], cell[(i + 1) % n]) for i in range(n)]
    if len(cell) != 4:
        raise MeshError(f"3D cell {cell} is not a tetrahedron and no face list was given.")
    return [tuple(cell[j] for j in range(4) if j != skip) for skip in range(4)]


def _cell_geometry(dim: int, pts: np.ndarray, faces_pts: list) -> tuple[float, np.ndarray]:
    if dim == 2:
        return _polygon_area_centroid(pts)
    if len(pts) == 4 and len(faces_pts) == 4:
        vol = abs(np.linalg.det(pts[1:] - pts[0])) / 6.0
        return vol, pts.mean(axis=0)
    ref = pts.mean(axis=0)
    vol = 0.0
    weighted = np.zeros(3)
    for fp in faces_pts:
        for tri in _fan(fp):
            v = abs(np.linalg.det(np.array([tri[0] - ref, tri[1] - ref, tri[2] - ref]))) / 6.0
            vol += v
            weighted += v * (ref + tri[0] + tri[1] + tri[2]) / 4.0
    if vol == 0.0:
        return 0.0, ref
    return vol, weighted / vol


def build_mesh(vertices, cells, boundary_tags: dict | None = None,
               labeler: Callable[[np.ndarray, np.ndarray], str | None] | None = None,
               cell_faces: list | None = None) -> Mesh:
    """
    Builds a Mesh with all derived quantities.

    Args:
        vertices: (nv, d) coordinates, d in {2, 3}.
        cells: vertex-id lists. 2D polygons are ordered; 3D cells are tetrahedra
            unless cell_faces gives their face vertex lists.
        boundary_tags: tag -> list of facet vertex-id lists.
        labeler: fallback tag rule called with (facet barycenter, outward normal).
        cell_faces: per-cell face lists for general polyhedra.

    Returns:
        Mesh: immutable mesh.
    """
    vertices = np.asarray(vertices, dtype=float)
    if vertices.ndim != 2 or vertices.shape[1] not in (2, 3):
        raise MeshError(f"Vertices must have shape (n, 2) or (n, 3), got {vertices.shape}.")
    dim = vertices.shape[1]
    cells = [tuple(int(v) for v in c) for c in cells]
    if not cells:
        raise MeshError("Mesh has no cells.")
    nv = len(vertices)
    for c in cells:
        if min(c) < 0 or max(c) >= nv:
            raise MeshError(f"Cell {c} references a vertex outside [0, {nv}).")

    scale = float(np.ptp(vertices, axis=0).max()) or 1.0

    facet_index: dict = {}
    facet_vertices: list = []
    facet_cells: list = []
    cell_facets: list = []
    for ci, c in enumerate(cells):
        faces = _local_facets(dim, c, None if cell_faces is None else cell_faces[ci])
        ids = []
        for fv in faces:
            key = tuple(sorted(fv))
            f = facet_index.get(key)
            if f is None:
                f = len(facet_vertices)
                facet_index[key] = f
                facet_vertices.append(tuple(fv))
                facet_cells.append([ci, BOUNDARY])
            else:
                if facet_cells[f][1] != BOUNDARY:
                    raise MeshError(f"Facet {key} is shared by more than two cells.")
                facet_cells[f][1] = ci
            ids.append(f)
        cell_facets.append(ids)

    nc, nf = len(cells), len(facet_vertices)
    cell_centers = np.empty((nc, dim))
    cell_volumes = np.empty(nc)
    for ci, c in enumerate(cells):
        pts = vertices[list(c)]
        faces_pts = [vertices[list(facet_vertices[f])] for f in cell_facets[ci]]
        vol, bary = _cell_geometry(dim, pts, faces_pts)
        if vol <= config.MIN_MEASURE_TOL * scale ** dim:
            raise MeshError(f"Cell {ci} {c} has zero measure.")
        cell_volumes[ci] = vol
        cell_centers[ci] = bary

    facet_centers = np.empty((nf, dim))
    facet_areas = np.empty(nf)
    facet_diameters = np.empty(nf)
    facet_normals = np.empty((nf, dim))
    facet_triangles = []
    for f, fv in enumerate(facet_vertices):
        pts = vertices[list(fv)]
        if dim == 2:
            t = pts[1] - pts[0]
            length = float(np.linalg.norm(t))
            area, center, normal = length, pts.mean(axis=0), np.array([t[1], -t[0]]) / (length or 1.0)
            tris = []
        else:
            area, center, normal, tris = _facet_geometry_3d(pts)
        diam = _diameter(pts)
        if area <= config.MIN_MEASURE_TOL * scale ** (dim - 1):
            raise MeshError(f"Facet {f} {fv} has zero measure.")
        if dim == 3 and len(pts) > 3:
            deviation = np.abs((pts - center) @ normal).max()
            if deviation > config.PLANARITY_TOL * diam:
                raise MeshError(f"Facet {f} {fv} is not planar (deviation {deviation:.3e}).")
        c0 = facet_cells[f][0]
        if np.dot(normal, center - cell_centers[c0]) < 0:
            normal = -normal
        facet_centers[f] = center
        facet_areas[f] = area
        facet_diameters[f] = diam
        facet_normals[f] = normal
        facet_triangles.append(tuple(tris))

    facet_cells_arr = np.array(facet_cells, dtype=int)
    signs = []
    for ci in range(nc):
        signs.append(np.array([1 if facet_cells_arr[f, 0] == ci else -1 for f in cell_facets[ci]], dtype=int))

    tags: dict = {}
    explicit: dict = {}
    for tag, lists in (boundary_tags or {}).items():
        for fv in lists:
            explicit[tuple(sorted(int(v) for v in fv))] = tag
    for f in np.flatnonzero(facet_cells_arr[:, 1] == BOUNDARY):
        tag = explicit.get(tuple(sorted(facet_vertices[f])))
        if tag is None and labeler is not None:
            tag = labeler(facet_centers[f], facet_normals[f])
        tags[int(f)] = tag

    for arr in (vertices, cell_centers, cell_volumes, facet_centers, facet_areas,
                facet_diameters, facet_normals, facet_cells_arr):
        arr.setflags(write=False)

    mesh = Mesh(
        dim=dim,
        vertices=vertices,
        cell_vertices=tuple(cells),
        facet_vertices=tuple(facet_vertices),
        cell_centers=cell_centers,
        cell_volumes=cell_volumes,
        facet_centers=facet_centers,
        facet_areas=facet_areas,
        facet_diameters=facet_diameters,
        facet_normals=facet_normals,
        facet_cells=facet_cells_arr,
        cell_facets=tuple(np.array(ids, dtype=int) for ids in cell_facets),
        cell_facet_signs=tuple(signs),
        boundary_tags=tags,
        facet_triangles=tuple(facet_triangles),
    )
    defect = mesh.closure_defect()
    worst = int(np.argmax(defect))
    if defect[worst] > config.CLOSURE_TOL:
        raise MeshError(f"Cell {worst} is not closed (relative defect {defect[worst]:.3e}).")
    logger.debug(f"Mesh: built {nc} cells, {nf} facets ({len(mesh.boundary_facets)} on the boundary), dim={dim}.")
    return mesh


# --- Generators ---

def label_by_normal(center: np.ndarray, normal: np.ndarray) -> str:
    """Tags axis-aligned boundary facets: left/right (x), bottom/top (y), front/back (z)."""
    axis = int(np.argmax(np.abs(normal)))
    names = (("left", "right"), ("bottom", "top"), ("front", "back"))
    return names[axis][0 if normal[axis] < 0 else 1]


def _jitter(points: np.ndarray, spacing: np.ndarray, interior: np.ndarray, jitter: float, seed: int) -> np.ndarray:
    if jitter <= 0.0:
        return points
    rng = np.random.default_rng(seed)
    moved = points.copy()
    moved[interior] += rng.uniform(-jitter, jitter, size=(int(interior.sum()), points.shape[1])) * spacing
    return moved


def generate_rect_mesh(lx: float, ly: float, nx: int, ny: int, origin=(0.0, 0.0),
                       labeler: Callable | None = None, jitter: float = 0.0, seed: int = 0) -> Mesh:
    """Structured triangulation of [0,lx]x[0,ly] + origin, each rectangle split in two."""
    if nx < 1 or ny < 1 or lx <= 0 or ly <= 0:
        raise MeshError(f"Invalid rectangle mesh parameters lx={lx}, ly={ly}, nx={nx}, ny={ny}.")
    xs = origin[0] + np.linspace(0.0, lx, nx + 1)
    ys = origin[1] + np.linspace(0.0, ly, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    points = np.column_stack([X.ravel(), Y.ravel()])
    ii, jj = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1), indexing="xy")
    interior = ((ii > 0) & (ii < nx) & (jj > 0) & (jj < ny)).ravel()
    points = _jitter(points, np.array([lx / nx, ly / ny]), interior, jitter, seed)

    def vid(i, j):
        return j * (nx + 1) + i

    cells = []
    for j in range(ny):
        for i in range(nx):
            v00, v10, v11, v01 = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            cells.append((v00, v10, v11))
            cells.append((v00, v11, v01))
    return build_mesh(points, cells, labeler=labeler or label_by_normal)


def generate_box_mesh(lx: float, ly: float, lz: float, nx: int, ny: int, nz: int, origin=(0.0, 0.0, 0.0),
                      labeler: Callable | None = None, jitter: float = 0.0, seed: int = 0) -> Mesh:
    """Structured tetrahedral mesh, six tetrahedra per box along the main diagonal."""
    if min(nx, ny, nz) < 1 or min(lx, ly, lz) <= 0:
        raise MeshError(f"Invalid box mesh parameters {(lx, ly, lz)}, {(nx, ny, nz)}.")
    xs = origin[0] + np.linspace(0.0, lx, nx + 1)
    ys = origin[1] + np.linspace(0.0, ly, ny + 1)
    zs = origin[2] + np.linspace(0.0, lz, nz + 1)
    X, Y, Z = np.meshgrid(xs, ys, zs, indexing="ij")
    points = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])
    I, J, K = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1), np.arange(nz + 1), indexing="ij")
    interior = ((I > 0) & (I < nx) & (J > 0) & (J < ny) & (K > 0) & (K < nz)).ravel()
    points = _jitter(points, np.array([lx / nx, ly / ny, lz / nz]), interior, jitter, seed)

    def vid(i, j, k):
        return (i * (ny + 1) + j) * (nz + 1) + k

    unit = np.eye(3, dtype=int)
    cells = []
    for i in range(nx):
        for j in range(ny):
            for k in range(nz):
                for perm in itertools.permutations(range(3)):
                    corner = np.array([i, j, k])
                    tet = [vid(*corner)]
                    for axis in perm:
                        corner = corner + unit[axis]
                        tet.append(vid(*corner))
                    cells.append(tuple(tet))
    return build_mesh(points, cells, labeler=labeler or label_by_normal)


# --- Classification ---

def facet_classification(mesh: Mesh, dirichlet: Callable[[str], bool] | Iterable[str]) -> FacetPartition:
    """
    Splits facets into interior, Dirichlet and Neumann sets.

    `dirichlet` is either a predicate on tags or a collection of Dirichlet tags.
    """
    if not callable(dirichlet):
        tag_set = set(dirichlet)
        predicate = lambda tag: tag in tag_set  # noqa: E731
    else:
        predicate = dirichlet
    d_list, n_list = [], []
    for f in mesh.boundary_facets:
        tag = mesh.boundary_tags.get(int(f))
        if tag is None:
            raise MeshError(f"Boundary facet {int(f)} at {mesh.facet_centers[f]} has no tag.")
        (d_list if predicate(tag) else n_list).append(int(f))
    return FacetPartition(
        interior=mesh.interior_facets,
        dirichlet=np.array(d_list, dtype=int),
        neumann=np.array(n_list, dtype=int),
    )


# --- Quadrature ---

def facet_quadrature(mesh: Mesh, facets: np.ndarray | None = None) -> Quadrature:
    """Degree-2 facet rule: 2-point Gauss on edges, 3-point rule on triangles."""
    facets = np.arange(mesh.n_facets) if facets is None else np.asarray(facets, dtype=int)
    if len(facets) == 0:
        return Quadrature(np.zeros((0, mesh.dim)), np.zeros(0), np.zeros(0, dtype=int))
    if mesh.dim == 2:
        p0 = mesh.vertices[[mesh.facet_vertices[f][0] for f in facets]]
        p1 = mesh.vertices[[mesh.facet_vertices[f][1] for f in facets]]
        mid = 0.5 * (p0 + p1)
        t = p1 - p0
        pts = np.stack([mid - _GAUSS2 * t, mid + _GAUSS2 * t], axis=1).reshape(-1, 2)
        w = np.repeat(mesh.facet_areas[facets] / 2.0, 2)
        return Quadrature(pts, w, np.repeat(facets, 2))
    pts, w, owner = [], [], []
    for f in facets:
        for tri in mesh.facet_triangles[f]:
            area = 0.5 * np.linalg.norm(np.cross(tri[1] - tri[0], tri[2] - tri[0]))
            pts.append(_TRI_BARY @ tri)
            w.append(np.full(3, area / 3.0))
            owner.append(np.full(3, f))
    return Quadrature(np.vstack(pts), np.concatenate(w), np.concatenate(owner))


def cell_quadrature(mesh: Mesh) -> Quadrature:
    """Degree-2 cell rule: 3 points per triangle, 4 per tetrahedron, fans for polytopes."""
    pts, w, owner = [], [], []
    for c, verts in enumerate(mesh.cell_vertices):
        vp = mesh.vertices[list(verts)]
        if len(verts) == mesh.dim + 1:
            bary = _TRI_BARY if mesh.dim == 2 else _TET_BARY
            pts.append(bary @ vp)
            w.append(np.full(len(bary), mesh.cell_volumes[c] / len(bary)))
            owner.append(np.full(len(bary), c))
            continue
        center = mesh.cell_centers[c]
        if mesh.dim == 2:
            pieces = [np.array([center, vp[i], vp[(i + 1) % len(vp)]]) for i in range(len(vp))]
            for tri in pieces:
                e1, e2 = tri[1] - tri[0], tri[2] - tri[0]
                area = 0.5 * abs(e1[0] * e2[1] - e1[1] * e2[0])
                pts.append(_TRI_BARY @ tri)
                w.append(np.full(3, area / 3.0))
                owner.append(np.full(3, c))
        else:
            for f in mesh.cell_facets[c]:
                for tri in mesh.facet_triangles[f]:
                    tet = np.vstack([center, tri])
                    vol = abs(np.linalg.det(tet[1:] - tet[0])) / 6.0
                    pts.append(_TET_BARY @ tet)
                    w.append(np.full(4, vol / 4.0))
                    owner.append(np.full(4, c))
    return Quadrature(np.vstack(pts), np.concatenate(w), np.concatenate(owner))


# --- Point location ---

def locate_cells(mesh: Mesh, points, k: int = 8) -> np.ndarray:
    """Containing cell of each point; nearest barycenter when no simplex contains it."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    tree = cKDTree(mesh.cell_centers)
    k = min(k, mesh.n_cells)
    _, candidates = tree.query(points, k=k)
    candidates = np.atleast_2d(candidates.reshape(len(points), k))
    out = candidates[:, 0].copy()
    for i, x in enumerate(points):
        for c in candidates[i]:
            verts = mesh.cell_vertices[c]
            if len(verts) != mesh.dim + 1:
                continue
            vp = mesh.vertices[list(verts)]
            T = (vp[1:] - vp[0]).T
            lam = np.linalg.solve(T, x - vp[0])
            if lam.min() >= -1e-12 and lam.sum() <= 1 + 1e-12:
                out[i] = c
                break
    return out


if __name__ == '__main__':
    logging.basicConfig(level=config.LOG_LEVEL)
    demo = generate_rect_mesh(1.0, 1.0, 2, 2)
    print(f"{demo.n_cells} cells, {demo.n_facets} facets, tags {sorted(demo.tags)}")
    print(f"max closure defect: {demo.closure_defect().max():.2e}")
