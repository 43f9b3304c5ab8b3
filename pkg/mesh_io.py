# cosserat_dem/mesh_io.py
import json
import logging
import os
from collections import defaultdict

import meshio
import numpy as np

from errors import MeshError
from mesh import Mesh, build_mesh

logger = logging.getLogger(__name__)

MESH_FORMATS = ("gmsh-msh", "internal-json")

_VOLUME_TYPES = {2: ("triangle",), 3: ("tetra",)}
_FACET_TYPES = {2: ("line",), 3: ("triangle",)}


def _infer_format(path: str) -> str:
    ext = os.path.splitext(path)[1].lower()
    if ext == ".msh":
        return "gmsh-msh"
    if ext == ".json":
        return "internal-json"
    raise MeshError(f"Cannot infer mesh format from extension '{ext}' of {path}.")


def load_mesh(path: str, format: str | None = None) -> Mesh:
    """
    Loads a simplicial mesh file.

    Args:
        path: file path.
        format: "gmsh-msh" (MSH 2.2 ASCII, physical groups -> tags) or
            "internal-json"; inferred from the extension when None.

    Returns:
        Mesh with all derived quantities.
    """
    if not os.path.exists(path):
        raise MeshError(f"Mesh file not found: {path}")
    fmt = format or _infer_format(path)
    if fmt == "internal-json":
        mesh = _load_json(path)
    elif fmt == "gmsh-msh":
        mesh = _load_gmsh(path)
    else:
        raise MeshError(f"Unknown mesh format '{fmt}'. Expected one of {MESH_FORMATS}.")
    logger.info(f"Mesh: loaded {mesh.n_cells} cells, {mesh.n_facets} facets from {path}")
    return mesh


def _load_json(path: str) -> Mesh:
    try:
        with open(path) as fh:
            data = json.load(fh)
        dim = int(data["dim"])
        vertices = np.asarray(data["vertices"], dtype=float)
        cells = data["cells"]
        tags = data.get("boundary_tags", {})
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise MeshError(f"Failed to parse internal JSON mesh {path}: {exc}") from exc
    if dim not in (2, 3) or vertices.ndim != 2 or vertices.shape[1] != dim:
        raise MeshError(f"Mesh {path}: dim={dim} does not match vertex shape {vertices.shape}.")
    return build_mesh(vertices, cells, boundary_tags=tags)


def _load_gmsh(path: str) -> Mesh:
    try:
        raw = meshio.read(path, file_format="gmsh")
    except Exception as exc:  # meshio raises several unrelated types on bad input
        raise MeshError(f"Failed to parse Gmsh mesh {path}: {exc}") from exc

    types = {block.type for block in raw.cells}
    dim = 3 if "tetra" in types else 2
    if not any(t in types for t in _VOLUME_TYPES[dim]):
        raise MeshError(f"Gmsh mesh {path} has no triangle or tetrahedron cells.")
    points = np.asarray(raw.points, dtype=float)[:, :dim]

    names = {int(v[0]): k for k, v in (raw.field_data or {}).items() if int(v[1]) == dim - 1}
    physical = raw.cell_data.get("gmsh:physical")

    cells = []
    tags = defaultdict(list)
    for i, block in enumerate(raw.cells):
        if block.type in _VOLUME_TYPES[dim]:
            cells.extend(block.data.tolist())
        elif block.type in _FACET_TYPES[dim] and physical is not None:
            for fv, tag in zip(block.data.tolist(), physical[i]):
                tags[names.get(int(tag), str(int(tag)))].append(fv)

    # Drop vertices not referenced by any cell (e.g. geometry points).
    used = np.unique(np.concatenate([np.asarray(c) for c in cells]))
    remap = -np.ones(len(points), dtype=int)
    remap[used] = np.arange(len(used))
    cells = [[int(remap[v]) for v in c] for c in cells]
    tags = {k: [[int(remap[v]) for v in fv] for fv in lists if np.all(remap[fv] >= 0)] for k, lists in tags.items()}
    return build_mesh(points[used], cells, boundary_tags=tags)


def save_mesh_json(mesh: Mesh, path: str) -> None:
    tags = defaultdict(list)
    for f, tag in mesh.boundary_tags.items():
        if tag is not None:
            tags[tag].append(list(mesh.facet_vertices[f]))
    payload = {
        "dim": mesh.dim,
        "vertices": mesh.vertices.tolist(),
        "cells": [list(c) for c in mesh.cell_vertices],
        "boundary_tags": dict(tags),
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)
    logger.info(f"Mesh: saved internal JSON to {path}")


def _vtk_type(dim: int, n: int) -> str:
    if dim == 3:
        if n != 4:
            raise MeshError("VTK output supports tetrahedral 3D cells only.")
        return "tetra"
    return {3: "triangle", 4: "quad"}.get(n, "polygon")


def write_vtk(mesh: Mesh, path: str, cell_data: dict) -> None:
    """Writes legacy ASCII VTK with one cell-data array per entry (shape (n_cells,) or (n_cells, k))."""
    groups = defaultdict(list)
    for c, verts in enumerate(mesh.cell_vertices):
        groups[len(verts)].append(c)
    order = [c for n in sorted(groups) for c in groups[n]]
    blocks = [(_vtk_type(mesh.dim, n), np.array([mesh.cell_vertices[c] for c in groups[n]], dtype=int))
              for n in sorted(groups)]
    points = mesh.vertices if mesh.dim == 3 else np.column_stack([mesh.vertices, np.zeros(len(mesh.vertices))])

    data = {}
    for name, values in cell_data.items():
        values = np.asarray(values, dtype=float)
        if values.shape[0] != mesh.n_cells:
            raise MeshError(f"Cell data '{name}' has {values.shape[0]} rows for {mesh.n_cells} cells.")
        values = values.reshape(mesh.n_cells, -1)[order]
        if values.shape[1] == 1:
            values = values[:, 0]
        split, start = [], 0
        for n in sorted(groups):
            split.append(values[start:start + len(groups[n])])
            start += len(groups[n])
        data[name] = split
    meshio.write(path, meshio.Mesh(points, blocks, cell_data=data), file_format="vtk", binary=False)
    logger.info(f"Output: wrote VTK fields {sorted(cell_data)} to {path}")
