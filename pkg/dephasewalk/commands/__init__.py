"""
Shared plumbing for the subcommands: common flags, config resolution, model and
initial-state construction, manifest and optional archive bookkeeping.
"""
from __future__ import annotations

import argparse
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from dephasewalk.channels import DensityMatrix
from dephasewalk.config import FLAG_PATHS, ExperimentConfig, Settings, load_config
from dephasewalk.dynamics import ProbabilityVector
from dephasewalk.errors import ConfigError
from dephasewalk.models import CoinedWalkModel, RingModel, WalkModel
from dephasewalk.output import sha256_file, utc_now, write_manifest

logger = logging.getLogger("dephasewalk.commands")


@dataclass
class CommandResult:
    outputs: List[Path] = field(default_factory=list)
    table: Optional[Any] = None


Compute = Callable[[ExperimentConfig, Settings, Path], CommandResult]


def add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON experiment config")
    p.add_argument("--out", help="output directory (default: config out_dir)")
    p.add_argument("--threads", type=int, help="worker threads (default: DEPHASEWALK_THREADS or CPU count)")
    p.add_argument("--grid", type=int, help="number of window points")
    p.add_argument("--lo", type=float, help="window lower end")
    p.add_argument("--hi", type=float, help="window upper end")
    p.add_argument("--model", choices=["ring", "coined"])
    p.add_argument("--j1", type=float)
    p.add_argument("--j2", type=float)
    p.add_argument("--j3", type=float)
    p.add_argument("--phi", type=float, help="gauge flux (radians)")
    p.add_argument("--L", type=int, help="coined-walk size")
    p.add_argument("--beta", type=float, help="control parameter value")
    p.add_argument("--q", type=float, help="dephasing probability")
    p.add_argument("--steps", type=int)
    p.add_argument("--archive", action="store_true", help="record the run in the archive database")


def overrides_from(args: argparse.Namespace) -> Dict[str, object]:
    return {flag: getattr(args, flag, None) for flag in FLAG_PATHS}


def build_model(cfg: ExperimentConfig) -> WalkModel:
    if cfg.model == "ring":
        r = cfg.ring
        return RingModel(j1=r.j1, j2=r.j2, j3=r.j3, phi=r.phi)
    return CoinedWalkModel(L=cfg.coined.L, beta=cfg.beta if cfg.beta is not None else 0.0)


def initial_populations(cfg: ExperimentConfig) -> ProbabilityVector:
    n = cfg.dimension()
    init = cfg.initial
    if init.kind == "uniform":
        return ProbabilityVector.uniform(n)
    if init.kind == "site":
        if init.site > n:
            raise ConfigError(f"initial.site={init.site} outside 1..{n}")
        return ProbabilityVector.site(init.site - 1, n)
    v = np.asarray(init.vector, dtype=float)
    if v.shape[0] != n:
        raise ConfigError(f"initial.vector has {v.shape[0]} entries, model dimension is {n}")
    return ProbabilityVector(v / v.sum())


def initial_density(cfg: ExperimentConfig) -> DensityMatrix:
    return DensityMatrix.diagonal(initial_populations(cfg).data)


def thread_count(cfg: ExperimentConfig, settings: Settings) -> int:
    return max(1, cfg.threads or settings.threads)


def execute(name: str, args: argparse.Namespace, settings: Settings, compute: Compute) -> int:
    cfg = load_config(args.config, overrides_from(args))
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    started = utc_now()
    result = compute(cfg, settings, out_dir)
    outputs = result.outputs
    finished = utc_now()
    manifest = write_manifest(out_dir, name, cfg.model_dump(mode="json"), outputs, started, finished)
    for p in outputs:
        logger.info("wrote %s", p)

    if getattr(args, "archive", False):
        from dephasewalk.archive import archive_run

        archive_run(
            command=name,
            config_json=cfg.canonical_json(),
            started_at=started,
            finished_at=finished,
            manifest_sha256=sha256_file(manifest),
            table=result.table,
        )
    return 0
