from __future__ import annotations

import argparse
import math
from pathlib import Path

import numpy as np

from dephasewalk.commands import CommandResult, add_common_flags, build_model, execute, thread_count
from dephasewalk.config import ExperimentConfig, Settings
from dephasewalk.models import CoinedWalkModel
from dephasewalk.output import write_csv
from dephasewalk.transitions import SweepTable, sweep

SWEEP_HEADER = ["beta", "re_lambda2", "im_lambda2", "re_lambda3", "im_lambda3", "g", "db_residual"]


def sweep_rows(table: SweepTable):
    for r in table.records:
        yield [r.beta, r.lambda2.real, r.lambda2.imag, r.lambda3.real, r.lambda3.imag, r.g, r.db_residual]


def branch_rows(table: SweepTable, n_branches: int):
    nan = complex(math.nan, math.nan)
    for r in table.records:
        padded = list(r.branches[:n_branches]) + [nan] * max(0, n_branches - len(r.branches))
        row = [r.beta]
        for z in padded:
            row.extend([z.real, z.imag])
        yield row


def compute(cfg: ExperimentConfig, settings: Settings, out_dir: Path) -> CommandResult:
    window = cfg.require_window()
    model = build_model(cfg)
    grid = np.linspace(window.lo, window.hi, window.points)
    table = sweep(model, grid, cfg.q, threads=thread_count(cfg, settings))

    outputs = [write_csv(out_dir / "sweep.csv", SWEEP_HEADER, sweep_rows(table))]
    if isinstance(model, CoinedWalkModel):
        # ramas que decaen: lambda_3 .. lambda_2L
        n = 2 * model.L - 2
        header = ["beta"]
        for k in range(3, 3 + n):
            header.extend([f"re_lambda{k}", f"im_lambda{k}"])
        outputs.append(write_csv(out_dir / "sweep_branches.csv", header, branch_rows(table, n)))
    return CommandResult(outputs=outputs, table=table)


def run(args: argparse.Namespace, settings: Settings) -> int:
    return execute("sweep", args, settings, compute)


def register(subparsers) -> None:
    p = subparsers.add_parser("sweep", help="leading decay pair across a control-parameter window")
    add_common_flags(p)
    p.set_defaults(func=run)
