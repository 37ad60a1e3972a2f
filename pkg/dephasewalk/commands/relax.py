from __future__ import annotations

import argparse
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from dephasewalk.channels import StochasticMatrix, one_step_map
from dephasewalk.commands import (
    CommandResult,
    add_common_flags,
    build_model,
    execute,
    initial_density,
    initial_populations,
)
from dephasewalk.config import ExperimentConfig, Settings
from dephasewalk.dynamics import (
    Trajectory,
    is_oscillatory,
    late_time_rate,
    marginal_trajectory,
    relax_classical,
    relax_quantum,
    relaxation_residuals,
)
from dephasewalk.errors import InvariantError
from dephasewalk.models import CoinedWalkModel, RingModel
from dephasewalk.output import write_csv, write_json

logger = logging.getLogger("dephasewalk.commands.relax")


def _rates(res: np.ndarray) -> List[Optional[float]]:
    out: List[Optional[float]] = []
    for n in range(res.shape[1]):
        try:
            out.append(late_time_rate(res[:, n]))
        except InvariantError:
            out.append(None)
    return out


def _summary(traj: Trajectory) -> Dict[str, Any]:
    res = relaxation_residuals(traj)
    return {"late_time_rates": _rates(res), "oscillatory": is_oscillatory(res)}


def compute(cfg: ExperimentConfig, settings: Settings, out_dir: Path) -> CommandResult:
    beta = cfg.require_beta()
    model = build_model(cfg)
    m = one_step_map(model, beta, cfg.q)
    tau = model.tau_for(beta) if isinstance(model, RingModel) else 1.0
    cap = settings.trajectory_cap

    if isinstance(m, StochasticMatrix):
        traj = relax_classical(m, initial_populations(cfg), cfg.steps, tau=tau, cap=cap)
        header = ["step"] + [f"p_{n}" for n in range(1, m.dimension + 1)]
        rows = ([k] + list(p) for k, p in zip(traj.steps, traj.populations()))
    else:
        traj = relax_quantum(m, initial_density(cfg), cfg.steps, tau=tau, cap=cap)
        n = m.hilbert_dimension
        header = ["step"] + [f"p_{i}" for i in range(1, n + 1)] + ["coh_norm"]
        rows = ([k] + list(p) + [c] for k, p, c in zip(traj.steps, traj.populations(), traj.coherence_norms()))

    outputs = [write_csv(out_dir / "relax.csv", header, rows)]
    summary: Dict[str, Any] = {"beta": beta, "q": cfg.q, "tau": tau, "steps": cfg.steps, "sites": _summary(traj)}

    if isinstance(model, CoinedWalkModel):
        marg = marginal_trajectory(traj, model.L)
        mheader = ["step"] + [f"p_site_{l}" for l in range(1, model.L + 1)]
        mrows = ([k] + list(p) for k, p in zip(marg.steps, marg.populations()))
        outputs.append(write_csv(out_dir / "relax_marginal.csv", mheader, mrows))
        summary["marginals"] = _summary(marg)

    outputs.append(write_json(out_dir / "relax_summary.json", summary))
    return CommandResult(outputs=outputs)


def run(args: argparse.Namespace, settings: Settings) -> int:
    return execute("relax", args, settings, compute)


def register(subparsers) -> None:
    p = subparsers.add_parser("relax", help="relaxation trajectory from an initial state")
    add_common_flags(p)
    p.set_defaults(func=run)
