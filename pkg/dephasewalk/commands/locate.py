from __future__ import annotations

import argparse
from pathlib import Path

from dephasewalk.commands import CommandResult, add_common_flags, build_model, execute, thread_count
from dephasewalk.config import ExperimentConfig, Settings
from dephasewalk.errors import ConfigError
from dephasewalk.output import write_json
from dephasewalk.transitions import QC_WINDOW, SIZE_WINDOW, locate_crossing, locate_qc, size_scan


def compute(cfg: ExperimentConfig, settings: Settings, out_dir: Path) -> CommandResult:
    if cfg.scan == "size":
        window = (cfg.window.lo, cfg.window.hi) if cfg.window else SIZE_WINDOW
        entries = size_scan(cfg.L_values, q=cfg.q, window=window, threads=thread_count(cfg, settings))
        payload = {"scan": "size", "entries": [e.to_dict() for e in entries]}
    elif cfg.scan == "qc":
        if cfg.model != "ring":
            raise ConfigError("the q_c scan is defined for the ring model")
        window = (cfg.window.lo, cfg.window.hi) if cfg.window else QC_WINDOW
        report = locate_qc(build_model(cfg), beta_window=window)
        payload = {"scan": "qc", **report.to_dict()}
    else:
        window = cfg.require_window()
        report = locate_crossing(build_model(cfg), (window.lo, window.hi), cfg.q)
        payload = {"scan": "beta", **report.to_dict()}
    return CommandResult(outputs=[write_json(out_dir / "locate.json", payload)])


def run(args: argparse.Namespace, settings: Settings) -> int:
    return execute("locate", args, settings, compute)


def register(subparsers) -> None:
    p = subparsers.add_parser("locate", help="critical point, transition order, q_c or size dependence")
    add_common_flags(p)
    p.add_argument("--scan", choices=["beta", "qc", "size"])
    p.add_argument("--L-values", dest="L_values", type=int, nargs="+", help="sizes for --scan size")
    p.set_defaults(func=run)
