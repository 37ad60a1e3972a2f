from __future__ import annotations

import argparse
import logging
from pathlib import Path
from typing import Any, Dict, List

from dephasewalk.channels import one_step_map
from dephasewalk.commands import CommandResult, add_common_flags, build_model, execute
from dephasewalk.config import ExperimentConfig, Settings
from dephasewalk.errors import NumericalError
from dephasewalk.models import CoinedWalkModel
from dephasewalk.output import write_json
from dephasewalk.spectral import (
    biorthonormality_residual,
    decay_modes,
    detailed_balance_residual,
    eigen_residual,
    eigenvector_snapshots,
    full_spectrum,
    leading_pair,
    overlap_g,
    pairing_check,
)
from dephasewalk.transitions import uses_pairing

logger = logging.getLogger("dephasewalk.commands.spectrum")


def _columns(a) -> List[Any]:
    return [a[:, s] for s in range(a.shape[1])]


def compute(cfg: ExperimentConfig, settings: Settings, out_dir: Path) -> CommandResult:
    beta = cfg.require_beta()
    model = build_model(cfg)
    m = one_step_map(model, beta, cfg.q)
    d = full_spectrum(m)
    pairing = uses_pairing(model, cfg.q)

    report: Dict[str, Any] = {
        "model": cfg.model,
        "beta": beta,
        "q": cfg.q,
        "dimension": d.dimension,
        "eigenvalues": list(d.eigenvalues),
        "exponents": list(d.exponents),
        "right_eigenvectors": _columns(d.right),
        "left_eigenvectors": _columns(d.left),
        "biorthonormal": d.biorthonormal,
        "near_ep": d.near_ep,
        "condition": d.condition,
        "eigen_residual": eigen_residual(d),
        "biorthonormality_residual": biorthonormality_residual(d),
        "db_residual": detailed_balance_residual(m),
        "decay_modes": decay_modes(d, pairing),
        "leading_pair": None,
        "g": None,
    }
    try:
        pair = leading_pair(d, pairing)
        report["leading_pair"] = list(pair)
        report["g"] = overlap_g(d, pair).g
    except NumericalError as exc:
        logger.info("no leading decay pair at beta=%g: %s", beta, exc.detail)
    if isinstance(model, CoinedWalkModel) and cfg.q == 1.0:
        report["pairing_residual"] = pairing_check(d, model.L)

    outputs = [write_json(out_dir / "spectrum.json", report)]
    if cfg.snapshots:
        snaps = eigenvector_snapshots(model, cfg.snapshots, cfg.q, pairing)
        outputs.append(write_json(out_dir / "snapshots.json", snaps))
    return CommandResult(outputs=outputs)


def run(args: argparse.Namespace, settings: Settings) -> int:
    return execute("spectrum", args, settings, compute)


def register(subparsers) -> None:
    p = subparsers.add_parser("spectrum", help="eigenvalues, Floquet exponents and eigenvectors at one point")
    add_common_flags(p)
    p.add_argument("--snapshots", type=float, nargs="+", help="also dump r2, r3 at these control values")
    p.set_defaults(func=run)
