# cosserat_dem/run_config.py
"""
YAML run configuration -> CaseSpec. The schema is documented in
docs/run_config.md.

Field data (boundary values, loads, initial conditions, expected stresses)
is given as numbers or as expressions in x, y, z and t, for instance
"1e-3 * sin(pi * x) * t". Vector fields are lists with one entry per
component.
"""
import ast
import logging
import os

import numpy as np
import yaml

from cases.base_case import CaseSpec
from errors import ConfigError, CosseratDEMError
from material import CosseratMaterial2D, CosseratMaterial3D
from probes import Probe, ricker_source
from system import BodyLoads, BoundaryCondition

logger = logging.getLogger(__name__)

FUNCTIONS = {
    "sin": np.sin, "cos": np.cos, "tan": np.tan, "exp": np.exp, "log": np.log, "sqrt": np.sqrt,
    "tanh": np.tanh, "sinh": np.sinh, "cosh": np.cosh, "abs": np.abs, "arctan2": np.arctan2,
    "hypot": np.hypot, "where": np.where, "minimum": np.minimum, "maximum": np.maximum,
}
CONSTANTS = {"pi": np.pi, "e": np.e}
VARIABLES = ("x", "y", "z", "t")
_ALLOWED_NODES = (
    ast.Expression, ast.BinOp, ast.UnaryOp, ast.Compare, ast.Call, ast.Name, ast.Load, ast.Constant,
    ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.Mod, ast.USub, ast.UAdd,
    ast.Lt, ast.LtE, ast.Gt, ast.GtE, ast.Eq, ast.NotEq,
)
TOP_LEVEL_KEYS = {"name", "mode", "mesh", "material", "boundary", "loads", "time", "initial", "probes",
                  "expected", "include_penalty"}


def _number(value, where: str) -> float:
    """YAML reads 1e3 as a string; accept it as a number."""
    if isinstance(value, bool):
        raise ConfigError(f"{where}: expected a number, got {value!r}.")
    if isinstance(value, (int, float)):
        return float(value)
    try:
        return float(str(value).strip())
    except ValueError:
        raise ConfigError(f"{where}: expected a number, got {value!r}.") from None


def compile_expression(expr, where: str = "expression"):
    """
    Compiles a scalar expression into f(x, t) -> (n,) array.

    Only arithmetic, comparisons, the names in VARIABLES and CONSTANTS and
    calls to FUNCTIONS are accepted.
    """
    if isinstance(expr, (int, float)) and not isinstance(expr, bool):
        value = float(expr)
        return lambda x, t: np.full(len(x), value)
    if not isinstance(expr, str):
        raise ConfigError(f"{where}: expected a number or an expression string, got {expr!r}.")
    try:
        tree = ast.parse(expr.strip(), mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"{where}: cannot parse '{expr}': {exc.msg}.") from None
    for node in ast.walk(tree):
        if not isinstance(node, _ALLOWED_NODES):
            raise ConfigError(f"{where}: '{type(node).__name__}' is not allowed in '{expr}'.")
        if isinstance(node, ast.Call) and not (isinstance(node.func, ast.Name) and node.func.id in FUNCTIONS):
            raise ConfigError(f"{where}: only calls to {sorted(FUNCTIONS)} are allowed in '{expr}'.")
        if isinstance(node, ast.Name) and node.id not in FUNCTIONS and node.id not in CONSTANTS \
                and node.id not in VARIABLES:
            raise ConfigError(f"{where}: unknown name '{node.id}' in '{expr}'.")
    code = compile(tree, where, "eval")

    def field(x, t):
        x = np.asarray(x, dtype=float)
        env = {"__builtins__": {}, **FUNCTIONS, **CONSTANTS, "t": float(t)}
        for k, name in enumerate("xyz"):
            env[name] = x[:, k] if k < x.shape[1] else np.zeros(len(x))
        return np.broadcast_to(np.asarray(eval(code, env), dtype=float), (len(x),))

    return field


def compile_field(spec, ncomp: int, where: str):
    """Number, expression or list of ncomp of them -> f(x, t) -> (n, ncomp)."""
    if spec is None:
        return None
    items = spec if isinstance(spec, (list, tuple)) else [spec]
    if len(items) != ncomp:
        raise ConfigError(f"{where}: expected {ncomp} component(s), got {len(items)}.")
    parts = [compile_expression(item, f"{where}[{k}]") for k, item in enumerate(items)]
    return lambda x, t: np.column_stack([p(x, t) for p in parts])


# --- Sections ---

def _mesh_dim(mesh: dict, material: dict) -> int:
    if "dim" in material:
        return int(material["dim"])
    kind = mesh.get("generator")
    if kind in ("rect", "box"):
        return 2 if kind == "rect" else 3
    if "file" in mesh:
        return 3 if any(k in material for k in ("K", "Gc", "Mc")) else 2
    raise ConfigError(f"mesh: expected 'generator' (rect | box) or 'file', got {sorted(mesh)}.")


def _parse_mesh(block: dict, base_dir: str) -> dict:
    if not isinstance(block, dict):
        raise ConfigError("mesh: expected a mapping.")
    out = dict(block)
    if "file" in out:
        path = str(out["file"])
        out["file"] = path if os.path.isabs(path) else os.path.join(base_dir, path)
        return out
    required = {"rect": ("lx", "ly", "nx", "ny"), "box": ("lx", "ly", "lz", "nx", "ny", "nz")}
    kind = out.get("generator")
    if kind not in required:
        raise ConfigError(f"mesh: unknown generator '{kind}'. Expected rect or box.")
    missing = [k for k in required[kind] if k not in out]
    if missing:
        raise ConfigError(f"mesh: generator '{kind}' needs {missing}.")
    for key in ("lx", "ly", "lz", "jitter"):
        if key in out:
            out[key] = _number(out[key], f"mesh.{key}")
    return out


def _parse_material(block: dict, dim: int):
    if not isinstance(block, dict):
        raise ConfigError("material: expected a mapping.")
    num = {k: _number(v, f"material.{k}") for k, v in block.items() if k != "dim"}
    try:
        if dim == 2:
            G = num["G"]
            nu = num["nu"] if "nu" in num else num["lambda"] / (2.0 * (num["lambda"] + G))
            a = num["a"] if "a" in num else num["Gc"] / G
            ell = num.get("l", num.get("ell"))
            if ell is None:
                raise ConfigError("material: 2D material needs 'l' (or 'ell').")
            return CosseratMaterial2D(G=G, nu=nu, a=a, ell=ell, rho=num.get("rho", 1.0), I=num.get("I", 1.0))
        common = dict(G=num["G"], Gc=num["Gc"], L=num["L"], M=num["M"], Mc=num["Mc"],
                      rho=num.get("rho", 1.0), I=num.get("I", 1.0), ell=num.get("ell", num.get("l")))
        if "K" in num:
            return CosseratMaterial3D(K=num["K"], **common)
        return CosseratMaterial3D.from_lame(num["lambda"], **common)
    except KeyError as exc:
        raise ConfigError(f"material: missing key {exc.args[0]} for a {dim}D material.") from None


def _parse_constrain(value, where: str):
    if isinstance(value, (list, tuple)):
        return tuple(_number(v, where) for v in value)
    return str(value)


def _parse_boundary(block: dict, dim: int, n_rot: int) -> dict:
    if not isinstance(block, dict) or not block:
        raise ConfigError("boundary: expected a non-empty mapping tag -> condition.")
    bcs = {}
    for tag, entry in block.items():
        where = f"boundary.{tag}"
        entry = dict(entry or {})
        kind = entry.pop("type", "dirichlet")
        fields = {
            "displacement": dim, "rotation": n_rot, "velocity": dim, "rotation_rate": n_rot,
            "traction": dim, "couple": n_rot,
        }
        kwargs = {k: compile_field(entry.pop(k, None), n, f"{where}.{k}") for k, n in fields.items()}
        if "constrain" in entry:
            kwargs["constrain"] = _parse_constrain(entry.pop("constrain"), f"{where}.constrain")
        if "constrain_rotation" in entry:
            kwargs["constrain_rotation"] = bool(entry.pop("constrain_rotation"))
        if entry:
            raise ConfigError(f"{where}: unknown keys {sorted(entry)}.")
        bcs[str(tag)] = BoundaryCondition(str(tag), kind, **kwargs)
    return bcs


def _parse_loads(block: dict | None, dim: int, n_rot: int) -> BodyLoads:
    block = dict(block or {})
    force = compile_field(block.pop("force", None), dim, "loads.force")
    couple = compile_field(block.pop("couple", None), n_rot, "loads.couple")
    ricker = block.pop("ricker", None)
    if block:
        raise ConfigError(f"loads: unknown keys {sorted(block)}.")
    if ricker is not None:
        source = ricker_source(_number(ricker["f_c"], "loads.ricker.f_c"), _number(ricker["t0"], "loads.ricker.t0"),
                               [_number(c, "loads.ricker.center") for c in ricker["center"]],
                               _number(ricker["radius"], "loads.ricker.radius"), ricker.get("direction"),
                               _number(ricker.get("amplitude", 1.0), "loads.ricker.amplitude"))
        if force is None:
            force = source
        else:
            base = force
            force = lambda x, t: base(x, t) + source(x, t)  # noqa: E731
    return BodyLoads(force=force, couple=couple)


def _parse_initial(block: dict | None, dim: int, n_rot: int):
    block = block or {}

    def _pair(u_key: str, phi_key: str):
        if u_key not in block and phi_key not in block:
            return None
        u = compile_field(block.get(u_key, [0.0] * dim), dim, f"initial.{u_key}")
        phi = compile_field(block.get(phi_key, [0.0] * n_rot), n_rot, f"initial.{phi_key}")
        return lambda x: (u(x, 0.0), phi(x, 0.0))

    return _pair("displacement", "rotation"), _pair("velocity", "rotation_rate")


def _parse_expected(block: dict | None) -> dict:
    expected = {}
    for name, value in (block or {}).items():
        if isinstance(value, str):
            fn = compile_expression(value, f"expected.{name}")
            expected[name] = lambda x, fn=fn: fn(x, 0.0)
        else:
            expected[name] = _number(value, f"expected.{name}")
    return expected


def parse_run_config(data: dict, base_dir: str = ".") -> CaseSpec:
    """Builds a CaseSpec from parsed YAML; every failure surfaces as ConfigError."""
    try:
        return _build_spec(data, base_dir)
    except ConfigError:
        raise
    except KeyError as exc:
        raise ConfigError(f"Missing key {exc.args[0]!r}.") from None
    except CosseratDEMError as exc:
        raise ConfigError(str(exc)) from exc


def _build_spec(data: dict, base_dir: str) -> CaseSpec:
    if not isinstance(data, dict):
        raise ConfigError("Run config must be a mapping at the top level.")
    unknown = sorted(set(data) - TOP_LEVEL_KEYS)
    if unknown:
        raise ConfigError(f"Unknown top-level keys {unknown}. Expected a subset of {sorted(TOP_LEVEL_KEYS)}.")
    for key in ("mesh", "material", "boundary"):
        if key not in data:
            raise ConfigError(f"Run config is missing the '{key}' section.")

    mesh_source = _parse_mesh(data["mesh"], base_dir)
    dim = _mesh_dim(mesh_source, data["material"])
    if dim not in (2, 3):
        raise ConfigError(f"material.dim must be 2 or 3, got {dim}.")
    n_rot = 1 if dim == 2 else 3
    material = _parse_material(data["material"], dim)
    time_block = data.get("time") or {}
    initial, initial_velocity = _parse_initial(data.get("initial"), dim, n_rot)
    probes = [Probe(str(p["name"]), tuple(_number(c, f"probes.{p['name']}.point") for c in p["point"]),
                    str(p.get("field", "u")), int(p.get("component", 0))) for p in data.get("probes") or []]

    spec = CaseSpec(
        name=str(data.get("name", "run")),
        mesh_source=mesh_source,
        material=material,
        bcs=_parse_boundary(data["boundary"], dim, n_rot),
        body=_parse_loads(data.get("loads"), dim, n_rot),
        mode=str(data.get("mode", "static")),
        t_end=_number(time_block["T"], "time.T") if "T" in time_block else None,
        dt=_number(time_block["dt"], "time.dt") if "dt" in time_block else None,
        initial=initial,
        initial_velocity=initial_velocity,
        probes=probes,
        expected=_parse_expected(data.get("expected")),
        include_penalty=bool(data.get("include_penalty", True)),
        store_every=int(time_block.get("store_every", 1)),
    )
    spec.validate()
    return spec


def load_run_config(path: str) -> CaseSpec:
    """Reads a YAML run configuration into a CaseSpec; relative mesh paths resolve against the file."""
    if not os.path.exists(path):
        raise ConfigError(f"Run config {path} not found.")
    with open(path, "r") as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"Run config {path}: invalid YAML: {exc}") from None
    try:
        spec = parse_run_config(data, os.path.dirname(os.path.abspath(path)))
    except ConfigError as exc:
        raise ConfigError(f"Run config {path}: {exc}") from exc
    logger.info(f"Config: loaded case '{spec.name}' ({spec.mode}) from {path}")
    return spec
