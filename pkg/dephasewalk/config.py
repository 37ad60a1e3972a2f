from __future__ import annotations

import json
import logging
import math
import os
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from dephasewalk.errors import ConfigError

logger = logging.getLogger("dephasewalk.config")

# carga .env de la raiz del repo (si existe) y luego el del cwd
load_dotenv(Path(__file__).resolve().parent.parent / ".env")
load_dotenv()


class Settings(BaseModel):
    log_level: str = "INFO"
    threads: int = 1
    database_url: str = "sqlite:///./dephasewalk.db"
    trajectory_cap: int = 500


def load_settings() -> Settings:
    return Settings(
        log_level=os.environ.get("DEPHASEWALK_LOG_LEVEL", "INFO").upper(),
        threads=int(os.environ.get("DEPHASEWALK_THREADS", str(os.cpu_count() or 1))),
        database_url=os.environ.get("DATABASE_URL", "sqlite:///./dephasewalk.db"),
        trajectory_cap=int(os.environ.get("DEPHASEWALK_TRAJECTORY_CAP", "500")),
    )


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class RingParams(_Strict):
    j1: float = Field(1.0, ge=0.0)
    j2: float = Field(1.0, ge=0.0)
    j3: float = Field(0.5, ge=0.0)
    phi: float = 0.0


class CoinedParams(_Strict):
    L: int = Field(3, ge=2)


class WindowSpec(_Strict):
    lo: float
    hi: float
    points: int = Field(201, ge=2)

    @model_validator(mode="after")
    def _non_empty(self) -> "WindowSpec":
        if not (self.hi > self.lo):
            raise ValueError(f"empty window: lo={self.lo} hi={self.hi}")
        return self


class InitialState(_Strict):
    """
    kind="site": all weight on basis index `site` (1-based).
    kind="uniform": stationary distribution.
    kind="vector": explicit populations (normalised on load).
    """

    kind: Literal["site", "uniform", "vector"] = "site"
    site: int = Field(1, ge=1)
    vector: Optional[List[float]] = None

    @model_validator(mode="after")
    def _vector_present(self) -> "InitialState":
        if self.kind == "vector":
            if not self.vector:
                raise ValueError("initial.kind='vector' requires initial.vector")
            if any(v < 0 for v in self.vector) or sum(self.vector) <= 0:
                raise ValueError("initial.vector must be non-negative with positive sum")
        return self


class ExperimentConfig(_Strict):
    model: Literal["ring", "coined"] = "ring"
    ring: Optional[RingParams] = None
    coined: Optional[CoinedParams] = None
    beta: Optional[float] = None
    q: float = Field(1.0, ge=0.0, le=1.0)
    window: Optional[WindowSpec] = None
    initial: InitialState = Field(default_factory=InitialState)
    steps: int = Field(200, ge=0)
    scan: Literal["beta", "qc", "size"] = "beta"
    L_values: List[int] = Field(default_factory=lambda: [3, 4, 5])
    snapshots: List[float] = Field(default_factory=list)
    threads: Optional[int] = Field(None, ge=1)
    out_dir: str = "out"

    @model_validator(mode="after")
    def _model_params(self) -> "ExperimentConfig":
        if self.model == "ring" and self.ring is None:
            raise ValueError("model 'ring' requires a 'ring' section (j1, j2, j3, phi)")
        if self.model == "coined" and self.coined is None:
            raise ValueError("model 'coined' requires a 'coined' section (L)")
        if any(L < 3 for L in self.L_values):
            raise ValueError("L_values entries must be >= 3")
        return self

    def canonical_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))

    def dimension(self) -> int:
        if self.model == "ring":
            return 3
        return 2 * self.coined.L  # type: ignore[union-attr]

    def require_beta(self) -> float:
        if self.beta is None or not math.isfinite(self.beta):
            raise ConfigError("this command needs a single parameter point: set 'beta' or --beta")
        return float(self.beta)

    def require_window(self) -> WindowSpec:
        if self.window is None:
            raise ConfigError("this command needs a control-parameter window: set 'window' {lo, hi, points}")
        return self.window


# flag name -> ruta dentro del config
FLAG_PATHS: Dict[str, tuple] = {
    "model": ("model",),
    "j1": ("ring", "j1"),
    "j2": ("ring", "j2"),
    "j3": ("ring", "j3"),
    "phi": ("ring", "phi"),
    "L": ("coined", "L"),
    "beta": ("beta",),
    "q": ("q",),
    "grid": ("window", "points"),
    "lo": ("window", "lo"),
    "hi": ("window", "hi"),
    "steps": ("steps",),
    "scan": ("scan",),
    "L_values": ("L_values",),
    "snapshots": ("snapshots",),
    "threads": ("threads",),
    "out": ("out_dir",),
}


def _raise_config(exc: Exception, source: str) -> None:
    if isinstance(exc, ValidationError):
        parts = []
        for err in exc.errors():
            loc = ".".join(str(p) for p in err.get("loc", ())) or "<root>"
            parts.append(f"{loc}: {err.get('msg')}")
        raise ConfigError(f"invalid config ({source}): " + "; ".join(parts)) from exc
    raise ConfigError(f"invalid config ({source}): {exc}") from exc


def parse_config(raw: Dict[str, Any], source: str = "<dict>") -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(raw)
    except (ValidationError, ValueError) as exc:
        _raise_config(exc, source)
    raise AssertionError("unreachable")


def read_config_file(path: str | Path) -> Dict[str, Any]:
    p = Path(path)
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {p}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {p}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config root must be an object: {p}")
    return data


def merge_overrides(raw: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    """Flags win over the file. `overrides` maps flag names (see FLAG_PATHS) to values; None means unset."""
    merged = json.loads(json.dumps(raw))
    for flag, value in overrides.items():
        if value is None:
            continue
        path = FLAG_PATHS.get(flag)
        if path is None:
            raise ConfigError(f"unknown override: {flag}")
        node = merged
        for key in path[:-1]:
            if not isinstance(node.get(key), dict):
                node[key] = {}
            node = node[key]
        node[path[-1]] = value
    # si falta la seccion del modelo se usan los parametros por defecto
    section = merged.get("model", "ring")
    if section in ("ring", "coined"):
        merged.setdefault(section, {})
    return merged


def load_config(path: Optional[str | Path], overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    raw: Dict[str, Any] = read_config_file(path) if path else {}
    merged = merge_overrides(raw, overrides or {})
    cfg = parse_config(merged, source=str(path) if path else "<flags>")
    logger.debug("resolved config: %s", cfg.canonical_json())
    return cfg
