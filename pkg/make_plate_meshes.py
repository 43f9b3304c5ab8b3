# cosserat_dem/make_plate_meshes.py
"""
Offline writer for the plate-with-hole meshes shipped under data/meshes/.

The quarter plate [0, L]^2 minus the disk of radius r is covered by a
log-polar O-grid: ray i at angle theta_i runs from the hole to the square
side it hits, and node j sits at r (R_i / r)^(j / n_radial). Cells stay
close to square from the hole to the outer sides. Each quad is split in two
triangles, mirrored across the diagonal.
"""
import argparse
import logging
import os

import numpy as np

import config
from errors import MeshError
from mesh import Mesh, build_mesh
from mesh_io import save_mesh_json

logger = logging.getLogger(__name__)

# file name -> (radius, n_theta, n_radial)
PLATE_MESHES = {
    "plate_hole_r0216.json": (0.216e-3, 96, 264),
    "plate_hole_r0864.json": (0.864e-3, 96, 179),
    "plate_hole_r0216_ci.json": (0.216e-3, 48, 132),
    "plate_hole_r0864_ci.json": (0.864e-3, 48, 90),
}


def radial_count(half_side: float, radius: float, n_theta: int) -> int:
    """Radial layers giving near-unit aspect ratio: 2 ln(L/r) n_theta / pi."""
    return int(round(2.0 * np.log(half_side / radius) * n_theta / np.pi))


def plate_hole_mesh(half_side: float, radius: float, n_theta: int, n_radial: int | None = None) -> Mesh:
    """Quarter plate with a hole at the origin; tags hole, bottom (y=0), left (x=0), right, top."""
    if n_theta < 2 or n_theta % 2:
        raise MeshError(f"n_theta must be even and >= 2, got {n_theta}.")
    if not 0.0 < radius < half_side:
        raise MeshError(f"Radius {radius} must lie in (0, {half_side}).")
    n_radial = n_radial or radial_count(half_side, radius, n_theta)

    i = np.arange(n_theta + 1)
    theta = 0.5 * np.pi * i / n_theta
    c, s = np.cos(theta), np.sin(theta)
    c[0], s[0], c[-1], s[-1] = 1.0, 0.0, 0.0, 1.0
    outer = half_side / np.maximum(c, s)

    t = np.arange(n_radial + 1)[:, None] / n_radial
    rho = radius * np.exp(t * np.log(outer / radius)[None, :])
    rho[0], rho[-1] = radius, outer
    x, y = rho * c, rho * s
    x[-1, 2 * i <= n_theta] = half_side
    y[-1, 2 * i >= n_theta] = half_side
    points = np.column_stack([x.ravel(), y.ravel()])

    def vid(a, b):
        return b * (n_theta + 1) + a

    cells = []
    for b in range(n_radial):
        for a in range(n_theta):
            v00, v10, v11, v01 = vid(a, b), vid(a + 1, b), vid(a + 1, b + 1), vid(a, b + 1)
            if 2 * a < n_theta:
                cells.extend([(v00, v10, v11), (v00, v11, v01)])
            else:
                cells.extend([(v00, v10, v01), (v10, v11, v01)])

    half = n_theta // 2
    tags = {
        "hole": [[vid(a, 0), vid(a + 1, 0)] for a in range(n_theta)],
        "bottom": [[vid(0, b), vid(0, b + 1)] for b in range(n_radial)],
        "left": [[vid(n_theta, b), vid(n_theta, b + 1)] for b in range(n_radial)],
        "right": [[vid(a, n_radial), vid(a + 1, n_radial)] for a in range(half)],
        "top": [[vid(a, n_radial), vid(a + 1, n_radial)] for a in range(half, n_theta)],
    }
    return build_mesh(points, cells, boundary_tags=tags)


def write_plate_meshes(out_dir: str = config.MESH_DIR, half_side: float | None = None) -> list:
    half_side = half_side or config.CASE_SPECIFIC_PARAMS["plate_hole"]["HALF_SIDE"]
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for name, (radius, n_theta, n_radial) in PLATE_MESHES.items():
        mesh = plate_hole_mesh(half_side, radius, n_theta, n_radial)
        path = os.path.join(out_dir, name)
        save_mesh_json(mesh, path)
        logger.info(f"Plate mesh {name}: {mesh.n_cells} cells, r={radius:g}")
        paths.append(path)
    return paths


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description="Write the plate-with-hole JSON meshes")
    parser.add_argument("--out-dir", type=str, default=config.MESH_DIR)
    args = parser.parse_args()
    logging.basicConfig(level=config.LOG_LEVEL, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    write_plate_meshes(args.out_dir)
