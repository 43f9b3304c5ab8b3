# cosserat_dem/reporting.py
import json
import logging
import os
from dataclasses import asdict, dataclass, field

import numpy as np
import pandas as pd

from material import StressState

logger = logging.getLogger(__name__)

SEPARATOR = "--------------------------------------------------"
AXES = "xyz"


@dataclass
class ComponentError:
    computed_min: float
    computed_max: float
    expected_min: float | None = None
    expected_max: float | None = None
    max_rel_error: float | None = None  # fraction of |expected|; None when expected vanishes
    max_abs_error: float | None = None


@dataclass
class ErrorReport:
    case: str
    n_cells: int
    n_dofs: int
    components: dict = field(default_factory=dict)
    l2_errors: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    @property
    def max_rel_error(self) -> float | None:
        vals = [c.max_rel_error for c in self.components.values() if c.max_rel_error is not None]
        return max(vals) if vals else None

    def to_dict(self) -> dict:
        out = asdict(self)
        out["passed"] = self.passed
        return _plain(out)

    def to_frame(self) -> pd.DataFrame:
        rows = [{"component": name, **asdict(err)} for name, err in self.components.items()]
        return pd.DataFrame(rows)

    def to_text(self) -> str:
        lines = [
            SEPARATOR,
            f"Case Report for: {self.case}",
            f"Cells: {self.n_cells}    Dofs: {self.n_dofs}",
            SEPARATOR,
        ]
        for name, err in self.components.items():
            line = f"{name:<10} min {err.computed_min: .6e}  max {err.computed_max: .6e}"
            if err.expected_min is not None:
                line += f"  expected [{err.expected_min: .4e}, {err.expected_max: .4e}]"
            if err.max_rel_error is not None:
                line += f"  max rel err {100.0 * err.max_rel_error:.4g}%"
            elif err.max_abs_error is not None:
                line += f"  max abs err {err.max_abs_error:.3e}"
            lines.append(line)
        if self.l2_errors:
            lines.append(SEPARATOR)
            for name, value in self.l2_errors.items():
                lines.append(f"Relative L2 error ({name}): {value:.3e}")
        if self.metrics:
            lines.append(SEPARATOR)
            for name, value in self.metrics.items():
                lines.append(f"{name}: {_fmt(value)}")
        if self.checks:
            lines.append(SEPARATOR)
            for name, ok in self.checks.items():
                lines.append(f"[{'PASS' if ok else 'FAIL'}] {name}")
        if self.timings:
            lines.append(SEPARATOR)
            lines.append("Timings: " + ", ".join(f"{k} {v:.2f}s" for k, v in self.timings.items()))
        lines.append(SEPARATOR)
        return "\n".join(lines)


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def component_fields(stresses: StressState, dim: int) -> dict:
    """Flat per-cell arrays named sigma_xy, mu_x (2D) or mu_xy (3D), ..."""
    out = {}
    for i in range(dim):
        for j in range(dim):
            out[f"sigma_{AXES[i]}{AXES[j]}"] = stresses.sigma[:, i, j]
    mu = stresses.mu
    if mu.ndim == 2:
        for j in range(mu.shape[1]):
            out[f"mu_{AXES[j]}"] = mu[:, j]
    else:
        for i in range(mu.shape[1]):
            for j in range(mu.shape[2]):
                out[f"mu_{AXES[i]}{AXES[j]}"] = mu[:, i, j]
    return out


def compare_component(computed: np.ndarray, expected) -> ComponentError:
    computed = np.asarray(computed, dtype=float)
    err = ComponentError(computed_min=float(computed.min()), computed_max=float(computed.max()))
    if expected is None:
        return err
    target = np.broadcast_to(np.asarray(expected, dtype=float), computed.shape)
    diff = np.abs(computed - target)
    err.expected_min, err.expected_max = float(target.min()), float(target.max())
    err.max_abs_error = float(diff.max())
    if np.all(np.abs(target) > 0.0):
        err.max_rel_error = float((diff / np.abs(target)).max())
    return err


def relative_l2(volumes: np.ndarray, computed: np.ndarray, exact: np.ndarray) -> float:
    w = volumes.reshape(-1, *([1] * (computed.ndim - 1)))
    num = np.sqrt(np.sum(w * (computed - exact) ** 2))
    den = np.sqrt(np.sum(w * exact ** 2))
    return float(num / den) if den > 0 else float(num)


def error_report(result) -> ErrorReport:
    """Min/max of every stress component, errors against spec.expected and against spec.exact."""
    spec, mesh = result.spec, result.mesh
    fields = component_fields(result.stresses, mesh.dim)
    components = {}
    for name, values in fields.items():
        expected = spec.expected.get(name)
        if callable(expected):
            expected = expected(mesh.cell_centers)
        components[name] = compare_component(values, expected)

    l2 = {}
    if spec.exact is not None:
        U, Phi = result.fields()
        u_ex, phi_ex = spec.exact(mesh.cell_centers)
        l2["u"] = relative_l2(mesh.cell_volumes, U, np.asarray(u_ex, dtype=float).reshape(U.shape))
        phi_ex = np.asarray(phi_ex, dtype=float).reshape(Phi.shape)
        if np.any(phi_ex):
            l2["phi"] = relative_l2(mesh.cell_volumes, Phi, phi_ex)

    metrics = {"cell balance (interior, relative)": result.balance.interior_max}
    return ErrorReport(case=spec.name, n_cells=mesh.n_cells, n_dofs=result.dofmap.n_dofs,
                       components=components, l2_errors=l2, metrics=metrics, timings=dict(result.timings))


def cell_table(result) -> pd.DataFrame:
    mesh = result.mesh
    U, Phi = result.fields()
    cols = {"cell": np.arange(mesh.n_cells)}
    for j in range(mesh.dim):
        cols[AXES[j]] = mesh.cell_centers[:, j]
    for j in range(U.shape[1]):
        cols[f"u_{AXES[j]}"] = U[:, j]
    for k in range(Phi.shape[1]):
        cols["phi" if Phi.shape[1] == 1 else f"phi_{AXES[k]}"] = Phi[:, k]
    cols.update(component_fields(result.stresses, mesh.dim))
    return pd.DataFrame(cols)


def write_report(report: ErrorReport, session_path: str) -> tuple[str, str]:
    os.makedirs(session_path, exist_ok=True)
    text_path = os.path.join(session_path, "report.txt")
    json_path = os.path.join(session_path, "report.json")
    with open(text_path, "w") as fh:
        fh.write(report.to_text() + "\n")
    with open(json_path, "w") as fh:
        json.dump(report.to_dict(), fh, indent=2)
    logger.info(f"Output: report written to {text_path}")
    return text_path, json_path


def write_cells_csv(result, path: str) -> None:
    cell_table(result).to_csv(path, index=False)
    logger.info(f"Output: wrote cell fields to {path}")


def sweep_table(rows: list) -> pd.DataFrame:
    """One row per sweep entry; rows are flat dicts of parameters and metrics."""
    return pd.DataFrame(rows)


def consolidated_text(reports: list) -> str:
    return "\n\n".join(r.to_text() for r in reports)
