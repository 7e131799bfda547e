"""``dackrr`` command line: fit, band, simulate, diagnose.

Every RunConfig field can be set in the YAML file given by ``--config`` and
overridden by a flag of the same name (underscores become dashes, e.g.
``--grid-size 512``, ``--P-list 32,128``).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from dackrr import rng
from dackrr.band import BootstrapConfig, bootstrap_band, empirical_grid, uniform_grid
from dackrr.dac import (
    AveragedModel,
    FitConfig,
    admissible_partition_range,
    eval_matrix,
    fit_averaged,
    undersmoothing_note,
)
from dackrr.errors import DackrrError, ParameterError
from dackrr.io import RunConfig, ingest_csv, load_model, load_run_config, save_model, write_band
from dackrr.kernel import effective_dimension, nystrom_eigendecay
from dackrr.simulate import SimConfig, run_coverage

COMMANDS = ("fit", "band", "simulate", "diagnose")


def _threads(cfg: RunConfig) -> int:
    return cfg.threads if cfg.threads else (os.cpu_count() or 1)


def _warn(msg: str) -> None:
    print(f"warning: {msg}", file=sys.stderr)


def _advise(cfg: RunConfig, n: int, s_kernel: float | None) -> None:
    s = cfg.s_override if cfg.s_override is not None else s_kernel
    if s is None:
        return
    s0 = cfg.s0 if cfg.s0 is not None else s
    rng_ = admissible_partition_range(n, s, s0)
    print(f"admissible P range (advisory, constants unknown): [{rng_.lower:.6g}, {rng_.upper:.6g}]", file=sys.stderr)
    if rng_.warning:
        _warn(rng_.warning)
    if cfg.s_override is not None and cfg.s0 is not None:
        note = undersmoothing_note(cfg.s_override, cfg.s0)
        if note:
            _warn(note)


def _fit(cfg: RunConfig) -> AveragedModel:
    if cfg.data is None:
        raise ParameterError("no input data: set 'data' in the config or pass --data")
    X, y = ingest_csv(cfg.data)
    cfg.dim = X.shape[1]
    kernel = cfg.kernel_spec()
    _advise(cfg, X.shape[0], kernel.smoothness_index)
    fit_cfg = FitConfig(rho=cfg.rho, P=cfg.P, seed=cfg.seed, s_override=cfg.s_override, partition_mode=cfg.partition_mode)
    return fit_averaged(kernel, fit_cfg, X, y, threads=_threads(cfg))


def cmd_fit(cfg: RunConfig) -> None:
    model = _fit(cfg)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    save_model(model, out / "model.json", sidecar=cfg.sidecar)
    print(f"fit P={model.P} n={model.plan.n} rho={model.rho!r} -> {out / 'model.json'}")


def cmd_band(cfg: RunConfig) -> None:
    model = load_model(cfg.model) if cfg.model else _fit(cfg)
    if cfg.grid == "uniform":
        grid = uniform_grid(model.kernel.dim, cfg.grid_size, (cfg.box_lo, cfg.box_hi))
    elif cfg.grid == "empirical":
        grid = empirical_grid(np.vstack([est.anchors for est in model.locals]))
    else:
        raise ParameterError(f"unknown grid {cfg.grid!r}")
    threads = _threads(cfg)
    evals = eval_matrix(model, grid.points, threads=threads)
    band = bootstrap_band(evals, grid, BootstrapConfig(cfg.B, cfg.beta, cfg.scheme, cfg.seed), threads=threads)
    summary, _ = write_band(band, cfg.out)
    print(f"radius={band.radius!r} beta={cfg.beta!r} B={cfg.B} scheme={cfg.scheme} -> {summary}")


def cmd_simulate(cfg: RunConfig) -> None:
    kernel = cfg.kernel_spec()
    sim = SimConfig(
        n=cfg.n,
        P_list=tuple(cfg.P_list),
        sigma=cfg.sigma,
        beta=cfg.beta,
        B=cfg.B,
        trials=cfg.trials,
        kernel=kernel,
        seed=cfg.seed,
        noise=cfg.noise,
        grid_size=cfg.grid_size,
        scheme=cfg.scheme,
    )
    _advise(cfg, cfg.n, kernel.smoothness_index)
    report = run_coverage(sim, threads=_threads(cfg))
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "coverage.csv").write_text(report.to_csv())
    (out / "coverage.json").write_text(report.to_json())
    sys.stdout.write(report.to_csv())


def cmd_diagnose(cfg: RunConfig) -> None:
    kernel = cfg.kernel_spec()
    sample = rng.substream(cfg.seed, rng.DESIGN).uniform(cfg.box_lo, cfg.box_hi, size=(cfg.nystrom_m, kernel.dim))
    report = nystrom_eigendecay(kernel, sample)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "eigendecay.json").write_text(json.dumps(report.to_dict(), indent=2) + "\n")

    s = cfg.s_override if cfg.s_override is not None else kernel.smoothness_index
    lines = ["rho,effective_dimension,scaled"]
    if s is not None:
        for rho in cfg.rho_sweep:
            ed = effective_dimension(s, rho)
            lines.append(f"{rho!r},{ed!r},{ed * rho ** (1.0 / (2.0 * s))!r}")
    (out / "effective_dimension.csv").write_text("\n".join(lines) + "\n")

    expected = f" (theory {-2 * kernel.smoothness_index:g})" if kernel.smoothness_index else ""
    print(f"fitted_slope={report.fitted_slope!r}{expected} window={list(report.window)}")
    _advise(cfg, cfg.n, kernel.smoothness_index)


HANDLERS = {"fit": cmd_fit, "band": cmd_band, "simulate": cmd_simulate, "diagnose": cmd_diagnose}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dackrr", allow_abbrev=False, description="Divide-and-conquer KRR with bootstrap L2 bands.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="YAML run configuration")
    for name in RunConfig.field_types():
        parser.add_argument("--" + name.replace("_", "-"), dest=name, default=argparse.SUPPRESS, metavar="VALUE")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = vars(build_parser().parse_args(argv))
    command = args.pop("command")
    config_path = args.pop("config", None)
    try:
        cfg = load_run_config(config_path, args)
        HANDLERS[command](cfg)
    except (DackrrError, OSError) as exc:
        msg = " ".join(str(exc).split())
        print(f"dackrr: error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
