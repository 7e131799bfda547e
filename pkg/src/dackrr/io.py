"""Dataset ingestion, model persistence and run configuration.

Model files are versioned JSON. Floats are written with Python's ``repr``,
the shortest decimal string that round-trips to the same double, so a loaded
model predicts bit-for-bit like the saved one. With ``sidecar=True`` the
anchors and coefficients go to ``<model>.bin`` instead: little-endian IEEE-754
doubles, row-major, each local's anchors (``S x d``) followed by its
coefficients (``S``), locals in order.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
from pathlib import Path
from typing import Any

import numpy as np
import yaml
from numpy.typing import NDArray

from dackrr.band import BandResult
from dackrr.dac import AveragedModel, PartitionPlan
from dackrr.errors import ParameterError, ParseError
from dackrr.kernel import DEFAULT_LENGTHSCALE, KernelSpec
from dackrr.krr import LocalEstimate

FORMAT_VERSION = 1


def ingest_csv(path: str | Path) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Read feature columns followed by a final ``y`` column; header required."""
    path = Path(path)
    if not path.is_file():
        raise ParseError(f"no such file: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("missing header row", line=1) from None
        header = [h.strip() for h in header]
        if len(header) < 2 or header[-1] != "y":
            raise ParseError("header must list feature columns then 'y'", line=1)
        width = len(header)
        rows = []
        for record in reader:
            line = reader.line_num
            if not record or all(not c.strip() for c in record):
                continue
            if len(record) != width:
                raise ParseError(f"expected {width} columns, got {len(record)}", line=line)
            try:
                rows.append([float(c) for c in record])
            except ValueError:
                raise ParseError(f"non-numeric cell in {record!r}", line=line) from None
    if not rows:
        raise ParseError("no rows")
    data = np.array(rows, dtype=np.float64)
    return data[:, :-1], data[:, -1].copy()


def save_model(model: AveragedModel, path: str | Path, sidecar: bool = False) -> None:
    path = Path(path)
    doc: dict[str, Any] = {
        "format_version": FORMAT_VERSION,
        "kernel": model.kernel.to_dict(),
        "rho": model.rho,
        "plan": {"n": model.plan.n, "P": model.plan.P, "assignment": model.plan.assignment.tolist()},
        "sizes": [est.size for est in model.locals],
    }
    if sidecar:
        blob = np.concatenate([np.concatenate([e.anchors.ravel(), e.coefficients]) for e in model.locals])
        path.with_suffix(".bin").write_bytes(blob.astype("<f8").tobytes())
        doc["sidecar"] = path.with_suffix(".bin").name
    else:
        doc["locals"] = [
            {"anchors": est.anchors.tolist(), "coefficients": est.coefficients.tolist()} for est in model.locals
        ]
    path.write_text(json.dumps(doc) + "\n")


def load_model(path: str | Path) -> AveragedModel:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read model {path}: {exc}") from exc
    if doc.get("format_version") != FORMAT_VERSION:
        raise ParseError(f"unsupported model format_version {doc.get('format_version')!r}")
    kernel = KernelSpec.from_dict(doc["kernel"])
    rho = float(doc["rho"])
    d = kernel.dim
    if "sidecar" in doc:
        blob = np.frombuffer((path.parent / doc["sidecar"]).read_bytes(), dtype="<f8").astype(np.float64)
        parts, offset = [], 0
        for S in doc["sizes"]:
            anchors = blob[offset : offset + S * d].reshape(S, d)
            offset += S * d
            parts.append((anchors, blob[offset : offset + S]))
            offset += S
        if offset != blob.size:
            raise ParseError("sidecar length does not match model sizes")
    else:
        parts = [
            (np.array(loc["anchors"], dtype=np.float64).reshape(-1, d), np.array(loc["coefficients"], dtype=np.float64))
            for loc in doc["locals"]
        ]
    locals_ = [LocalEstimate(anchors=a.copy(), coefficients=c.copy(), kernel=kernel, rho=rho) for a, c in parts]
    plan_doc = doc["plan"]
    plan = PartitionPlan(n=plan_doc["n"], P=plan_doc["P"], assignment=np.array(plan_doc["assignment"], dtype=np.int64))
    return AveragedModel(locals=locals_, rho=rho, kernel=kernel, plan=plan)


def write_band(band: BandResult, out_dir: str | Path) -> tuple[Path, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = out_dir / "band.json"
    summary.write_text(json.dumps(band.to_dict(), indent=2) + "\n")
    norms = out_dir / "band_norms.csv"
    norms.write_text("norm\n" + "".join(f"{float(v)!r}\n" for v in band.norms))
    return summary, norms


@dataclasses.dataclass
class RunConfig:
    """Every tunable of the four CLI commands.

    Loaded from a YAML mapping; any key that is not a field is rejected.
    """

    # paths
    data: str | None = None
    model: str | None = None
    out: str = "."
    sidecar: bool = False
    # kernel
    kernel: str = "matern"
    alpha: float = 2.5
    lengthscale: float = DEFAULT_LENGTHSCALE
    dim: int = 1
    # fit
    rho: float | None = None
    P: int = 1
    seed: int = 0
    s_override: float | None = None
    s0: float | None = None
    partition_mode: str = "random"
    # band
    B: int = 1000
    beta: float = 0.95
    scheme: str = "resample"
    grid: str = "uniform"
    grid_size: int = 1024
    box_lo: float = 0.0
    box_hi: float = 1.0
    # simulate
    n: int = 2**13
    P_list: list[int] = dataclasses.field(default_factory=lambda: [2**5, 2**7])
    sigma: float = 1.0
    trials: int = 200
    noise: str = "gaussian"
    # diagnose
    nystrom_m: int = 512
    rho_sweep: list[float] = dataclasses.field(default_factory=lambda: [1e-2, 1e-3, 1e-4, 1e-5, 1e-6])
    # runtime
    threads: int | None = None

    def kernel_spec(self) -> KernelSpec:
        if self.kernel == "matern":
            return KernelSpec.matern(self.alpha, self.lengthscale, self.dim)
        if self.kernel in ("se", "squared_exponential"):
            return KernelSpec.squared_exponential(self.lengthscale, self.dim)
        raise ParameterError(f"unknown kernel {self.kernel!r}")

    @classmethod
    def field_types(cls) -> dict[str, str]:
        return {f.name: str(f.type) for f in dataclasses.fields(cls)}


def coerce_field(name: str, value: Any) -> Any:
    """Convert a YAML or command-line value to the type of field ``name``."""
    kind = RunConfig.field_types()[name]
    if isinstance(value, str) and value.strip().lower() in ("none", "null"):
        value = None
    if value is None:
        if "None" in kind:
            return None
        raise ParseError(f"{name} may not be null")
    try:
        if kind.startswith("list["):
            items = value.split(",") if isinstance(value, str) else list(value)
            conv = int if "int" in kind else float
            return [conv(v) for v in items]
        if kind.startswith("bool"):
            if isinstance(value, str):
                if value.lower() in ("1", "true", "yes", "on"):
                    return True
                if value.lower() in ("0", "false", "no", "off"):
                    return False
                raise ValueError(value)
            return bool(value)
        if kind.startswith("int"):
            if isinstance(value, float) and not value.is_integer():
                raise ValueError(value)
            return int(value)
        if kind.startswith("float"):
            out = float(value)
            if math.isnan(out):
                raise ValueError(value)
            return out
        return str(value)
    except (TypeError, ValueError):
        raise ParseError(f"invalid value for {name}: {value!r}") from None


def load_run_config(path: str | Path | None, overrides: dict[str, Any] | None = None) -> RunConfig:
    """Config file values, then ``overrides`` (already-set CLI flags) on top."""
    values: dict[str, Any] = {}
    if path is not None:
        try:
            raw = yaml.safe_load(Path(path).read_text())
        except OSError as exc:
            raise ParseError(f"cannot read config {path}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ParseError(f"config {path} is not valid YAML: {exc}") from exc
        raw = raw or {}
        if not isinstance(raw, dict):
            raise ParseError(f"config {path} must be a mapping")
        values.update(raw)
    values.update(overrides or {})
    known = RunConfig.field_types()
    unknown = sorted(set(values) - set(known))
    if unknown:
        raise ParseError(f"unknown config keys: {', '.join(unknown)}")
    return RunConfig(**{k: coerce_field(k, v) for k, v in values.items()})
