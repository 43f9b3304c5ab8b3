# cosserat_dem/config.py
import math
import os

from dotenv import load_dotenv

load_dotenv()

# --- Logging / Output ---
LOG_LEVEL = os.getenv("COSSERAT_DEM_LOG_LEVEL", "INFO").upper()
RESULTS_BASE_DIR = os.getenv("COSSERAT_DEM_RESULTS_DIR", "Simulation_Results")
MESH_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "data", "meshes")
DEFAULT_EMIT = ["vtk", "csv", "report"]
EMIT_CHOICES = ("vtk", "csv", "report")
SAVE_PLOTS = True

# --- Linear Solver ---
SOLVER_METHOD = os.getenv("COSSERAT_DEM_SOLVER", "direct")  # "direct" or "krylov"
SOLVER_CHOICES = ("direct", "krylov")
DIRECT_RTOL = 1e-10
RESIDUAL_FAIL_RTOL = 1e-6  # solve_static raises above this relative residual
KRYLOV_RTOL = 1e-10
KRYLOV_MAXITER_FACTOR = 10  # maxiter = factor * n
ILU_DROP_TOL = 1e-5
ILU_FILL_FACTOR = 20

# --- Threads (case sweeps) ---
THREADS = int(os.getenv("COSSERAT_DEM_THREADS", "1"))

# --- Geometry Tolerances ---
PLANARITY_TOL = 1e-9  # relative to h_F
CLOSURE_TOL = 1e-12  # relative to sum of |F| over the cell
MIN_MEASURE_TOL = 1e-14  # relative to bounding-box scale ** dim

# --- Reconstruction ---
STENCIL_DEGENERACY_FACTOR = 1e-10  # simplex volume threshold = factor * h_F ** d
STENCIL_EXPANSION_ROUNDS = 2
STENCIL_EMERGENCY_ROUNDS = 1

# --- Dynamics ---
DT_DIVISOR = 2000  # default dt = T / DT_DIVISOR

# --- Condition Number Estimation ---
CONDITION_METHOD = "power"  # "power" or "lsmr"
CONDITION_MAXITER = 200
CONDITION_STAGNATION = 1e-4

# --- Probes / Wave Picking ---
ARRIVAL_THRESHOLD = 0.05  # fraction of the probe's own peak

ACTIVE_CASE_NAME = "patch1"

# Patch tests share the domain and material.
_PATCH_COMMON = {
    "LX": 0.24,
    "LY": 0.12,
    "ORIGIN": (-0.12, 0.0),
    "NX": 50,
    "NY": 25,
    "G": 1.0e3,
    "NU": 0.25,
    "A": 0.5,
    "ELL": 0.1,
    "RHO": 1.0,
    "INERTIA": 1.0,
}

CASE_SPECIFIC_PARAMS = {
    "patch1": dict(_PATCH_COMMON, PHI_MODE="plus"),
    "patch2": dict(_PATCH_COMMON, PHI_MODE="minus"),
    "patch3": dict(_PATCH_COMMON, PHI_MODE="affine"),
    "boundary_layer": {
        "H": 1.0e-3,
        "NX": 10,
        "NY": 50,
        "G": 1.0e10,
        "NU": 0.0,
        "A": 2.0,
        "ELL": 5.0e-5,
        "U_TOP": -0.1,
        "PHI_TOP_FACTOR": 0.01,  # phi_top = factor * H
        "ORACLE_POINTS": 10000,
        "PROFILE_TOLERANCE": 0.10,
    },
    "plate_hole": {
        "HALF_SIDE": 16.2e-3,
        "G": 1.0e3,
        "NU": 0.3,
        "SIGMA": 1.0,
        "TEST": 1,
        "MESH_LEVEL": "fine",  # "fine" or "ci" (half the resolution per direction)
        "MESH_FILES": {
            0.216e-3: {"fine": os.path.join(MESH_DIR, "plate_hole_r0216.json"),
                       "ci": os.path.join(MESH_DIR, "plate_hole_r0216_ci.json")},
            0.864e-3: {"fine": os.path.join(MESH_DIR, "plate_hole_r0864.json"),
                       "ci": os.path.join(MESH_DIR, "plate_hole_r0864_ci.json")},
        },
        "TOLERANCE": {"fine": 0.02, "ci": 0.05},
        # (radius, r/ell, a) -> analytic max hoop stress / Sigma
        "SWEEPS": {
            1: {"RADIUS": 0.216e-3, "R_OVER_ELL": [1.063], "A": [0.0, 0.0667, 0.3333, 1.2857, 4.2632],
                "EXPECTED": [3.000, 2.849, 2.555, 2.287, 2.158]},
            2: {"RADIUS": 0.216e-3, "R_OVER_ELL": [10.63], "A": [0.0, 0.0667, 0.3333, 1.2857, 4.2632],
                "EXPECTED": [3.000, 2.956, 2.935, 2.927, 2.923]},
            3: {"RADIUS": 0.864e-3, "R_OVER_ELL": [1.0, 2.0, 3.0, 4.0, 6.0, 8.0, 10.0], "A": [0.3333],
                "EXPECTED": [2.549, 2.641, 2.719, 2.779, 2.857, 2.902, 2.929]},
        },
    },
    "beam_flexion": {
        "LENGTH": 1.0e-3,
        "WIDTH": 4.0e-5,
        "NX": 20,
        "NY": 2,
        "NZ": 2,
        "K": 16.67e9,
        "G": 10.0e9,
        "GC": 5.0e9,
        "RHO": 2500.0,
        "T_END": 6.3e-5,
        "T_C": 3.2e-8,
        "LOAD_FACTOR": 1.0e-6,
        "STEPS": 2000,
        # Static cantilever deflection under the peak ramp load is 2.5e-6 m.
        "TIP_BOUND": 1.0e-5,
    },
    "lamb_desk": {
        "LX": 2000.0,
        "LY": 1000.0,
        "NX": 100,
        "NY": 50,
        "G": 7.52e9,
        "GC": 7.52e9,
        "LAMBDA": 3.76e9,
        "RHO": 2500.0,
        "F_C": 14.5,
        "T0": 0.1,
        "SOURCE_DEPTH": 100.0,
        "SOURCE_RADIUS": 50.0,
        "PROBE_DISTANCES": [200.0, 500.0],
        "SURFACE_OFFSET": 400.0,
        "DT": 5.0e-4,
        "T_END": 0.5,
        "SPEED_TOLERANCE": 0.10,
    },
}

# --- Validation ---
if LOG_LEVEL not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
    raise ValueError(f"Invalid LOG_LEVEL '{LOG_LEVEL}'.")
if SOLVER_METHOD not in SOLVER_CHOICES:
    raise ValueError(f"Invalid SOLVER_METHOD '{SOLVER_METHOD}'. Expected one of {SOLVER_CHOICES}.")
if THREADS < 1:
    raise ValueError(f"THREADS must be >= 1, got {THREADS}.")


def lamb_length_scale(lx: float, nx: int) -> float:
    """ell = h / sqrt(2) with h the grid spacing of the desk-scale mesh."""
    return (lx / nx) / math.sqrt(2.0)
