"""Run configuration: plain-text ``key = value`` files plus overrides."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping

from .engines import ENGINES, LINKAGES, EngineParams


class ConfigError(ValueError):
    pass


def parse_kv(text: str, origin: str = "<config>") -> dict[str, str]:
    """``key = value`` lines; ``#`` comments and blank lines are ignored."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"{origin}:{lineno}: expected 'key = value', got {raw!r}")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def _split(v: str) -> tuple[str, ...]:
    return tuple(p.strip() for p in str(v).split(",") if p.strip())


@dataclass(frozen=True)
class RunConfig:
    input: str = ""
    schema: str = ""
    out: str = ""
    seed: int = 0
    delimiter: str = ","
    missing_tokens: tuple[str, ...] = ("", "NA")
    tnm_attribute: str = "tnm"
    survival_attribute: str = "survival"
    tnm_stages: tuple[int, ...] = ()
    imputation: str = "auto"
    max_missing: float = 1.0
    corr_threshold: float = 1.0
    drop_list: tuple[str, ...] = ()
    restarts: int = 32
    max_iter: int = 300
    pam_max_iter: int = 100
    linkage: str = "average"
    fuzzifier: float = 2.0
    fcm_eps: float = 1e-6
    fcm_restarts: int = 4
    k_min: int = 2
    k_max: int = 15
    agg_min: int = 2
    agg_max: int = 10
    diff_mode: str = "elbow"
    engines: tuple[str, ...] = ENGINES
    reference: str = "kmeans"
    agreement: int = 0
    include_unassigned: bool = False
    coassignment: bool = False
    truth: str = ""
    sweep_step: int = 10
    sweep_floor: int = 30
    min_attributes: int = 2
    force: bool = False

    def validate(self, need_input: bool = True) -> "RunConfig":
        if need_input and not self.input:
            raise ConfigError("no input table given")
        if need_input and not self.schema:
            raise ConfigError("no schema file given")
        if not 1 <= self.k_min <= self.k_max:
            raise ConfigError(f"invalid k sweep range {self.k_min}..{self.k_max}")
        if not 1 <= self.agg_min <= self.agg_max:
            raise ConfigError(f"invalid aggregation range {self.agg_min}..{self.agg_max}")
        if self.agg_min < self.k_min or self.agg_max > self.k_max:
            raise ConfigError(
                f"aggregation range {self.agg_min}..{self.agg_max} must lie inside "
                f"the sweep range {self.k_min}..{self.k_max}"
            )
        if self.restarts < 1 or self.max_iter < 1 or self.pam_max_iter < 1:
            raise ConfigError("restarts and iteration limits must be >= 1")
        if self.linkage not in LINKAGES:
            raise ConfigError(f"unknown linkage {self.linkage!r}")
        if self.fuzzifier <= 1:
            raise ConfigError("fuzzifier must exceed 1")
        if self.fcm_eps <= 0:
            raise ConfigError("fcm_eps must be positive")
        if self.diff_mode not in ("elbow", "forward"):
            raise ConfigError(f"unknown diff_mode {self.diff_mode!r}")
        unknown = set(self.engines) - set(ENGINES)
        if unknown or len(self.engines) < 2:
            raise ConfigError(f"engines must be >= 2 of {ENGINES}, got {self.engines}")
        if self.reference not in self.engines:
            raise ConfigError(f"reference engine {self.reference!r} is not among the engines")
        if self.agreement and not 1 <= self.agreement <= len(self.engines):
            raise ConfigError(f"agreement must lie in 1..{len(self.engines)}")
        if not 0 <= self.max_missing <= 1:
            raise ConfigError("max_missing must lie in [0, 1]")
        if not 0 < self.corr_threshold <= 1:
            raise ConfigError("corr_threshold must lie in (0, 1]")
        if any(s not in (1, 2, 3, 4) for s in self.tnm_stages):
            raise ConfigError("tnm_stages must be drawn from 1..4")
        if self.sweep_step < 1 or self.sweep_floor < 1 or self.min_attributes < 1:
            raise ConfigError("sweep_step, sweep_floor and min_attributes must be >= 1")
        return self

    @property
    def engine_params(self) -> EngineParams:
        return EngineParams(
            restarts=self.restarts,
            max_iter=self.max_iter,
            pam_max_iter=self.pam_max_iter,
            linkage=self.linkage,
            fuzzifier=self.fuzzifier,
            fcm_eps=self.fcm_eps,
            fcm_restarts=self.fcm_restarts,
        )

    @property
    def threshold(self) -> int:
        return self.agreement or len(self.engines) - 1

    @property
    def sweep_range(self) -> tuple[int, int]:
        return (self.k_min, self.k_max)

    @property
    def agg_range(self) -> tuple[int, int]:
        return (self.agg_min, self.agg_max)

    def resolved(self) -> dict[str, Any]:
        """Every field with defaults materialised, JSON-ready."""
        out = asdict(self)
        for k, v in out.items():
            if isinstance(v, tuple):
                out[k] = list(v)
        out["agreement"] = self.threshold
        return out

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any], base: "RunConfig | None" = None) -> "RunConfig":
        base = base or cls()
        known = {f.name: f for f in fields(cls)}
        updates = {}
        for key, raw in data.items():
            key = key.replace("-", "_")
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            if raw is None:
                continue
            current = getattr(base, key)
            try:
                updates[key] = _coerce(key, raw, current)
            except ValueError as exc:
                raise ConfigError(f"bad value for {key!r}: {raw!r} ({exc})") from None
        return replace(base, **updates)

    @classmethod
    def load(cls, path: str | Path, overrides: Mapping[str, Any] | None = None) -> "RunConfig":
        text = Path(path).read_text(encoding="utf-8")
        cfg = cls.from_mapping(parse_kv(text, str(path)))
        base_dir = Path(path).parent
        # relative paths in a config file are relative to the file
        rel = {k: str(base_dir / v) for k in ("input", "schema", "truth", "out")
               if (v := getattr(cfg, k)) and not Path(v).is_absolute()}
        cfg = replace(cfg, **rel)
        return cls.from_mapping(overrides or {}, base=cfg)


def _coerce(key: str, raw: Any, current: Any):
    if isinstance(current, bool):
        if isinstance(raw, bool):
            return raw
        s = str(raw).strip().lower()
        if s in ("1", "true", "yes", "on"):
            return True
        if s in ("0", "false", "no", "off"):
            return False
        raise ValueError("expected a boolean")
    if isinstance(current, int):
        return int(raw)
    if isinstance(current, float):
        return float(raw)
    if isinstance(current, tuple):
        items = raw if isinstance(raw, (list, tuple)) else _split(raw)
        if key == "missing_tokens":
            return tuple("" if t in ("''", '""', "<empty>") else t for t in items) or ("",)
        if key == "tnm_stages":
            return tuple(int(v) for v in items)
        return tuple(str(v) for v in items)
    return str(raw)
