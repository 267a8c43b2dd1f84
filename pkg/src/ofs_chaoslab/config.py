"""Run configuration: presets, key = value config files and flag overrides."""

from __future__ import annotations

import configparser
import math
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

from .ofs import parse_temperature

OUT_ENV = "OFS_CHAOSLAB_OUT"

# couplings shown in the level-spacing and partial-sum figures
LEVELSTATS_LAMBDAS = (2.5e-4, 1.75e-3, 3.0e-3, 1.0e-2)
PARTIAL_LAMBDAS = (9.2e-5, 2.5e-4, 2.0e-3, 1.0e-2)


@dataclass(frozen=True)
class RunConfig:
    K: int = 60
    K_prime: int = 66
    lambda_min: float = 1e-5
    lambda_max: float = 1e-2
    lambda_count: int = 48
    # explicit couplings; when set they replace the generated grid
    lambda_values: tuple[float, ...] = ()
    spacing: str = "composite"
    tol: float = 1e-3
    t_list: tuple[float, ...] = (100.0, 200.0, 400.0)
    temperature_list: tuple[float, ...] = (1.0, 2.0, 4.5, math.inf)
    dc_policy: str = "auto"
    output_dir: str = "runs"
    seed: int = 12345
    profile: str = "desk"
    jobs: int = 1
    unfold_window: int = 25
    bins: int = 25
    s_max: float = 4.0
    levelstats_lambdas: tuple[float, ...] = LEVELSTATS_LAMBDAS
    partial_lambdas: tuple[float, ...] = PARTIAL_LAMBDAS
    partial_temperature: float = 4.5
    store_vectors: bool = False
    oracle_K: tuple[int, ...] = (6, 8, 10)
    oracle_lambdas: tuple[float, ...] = (1e-4, 1e-3)
    oracle_t: tuple[float, ...] = (5.0, 10.0)
    oracle_temperatures: tuple[float, ...] = (4.5, math.inf)
    oracle_delta_lambda: float = 1e-6
    oracle_threshold: float = 1e-3

    def validate(self) -> "RunConfig":
        def bad(name, why):
            raise ValueError(f"invalid config field {name!r}: {why}")

        if self.K < 0:
            bad("K", "must be >= 0")
        if not self.K_prime > self.K:
            bad("K_prime", f"must exceed K={self.K}")
        if not self.lambda_min > 0:
            bad("lambda_min", "must be > 0")
        if not self.lambda_max > self.lambda_min:
            bad("lambda_max", "must exceed lambda_min")
        if any(not x > 0 for x in self.lambda_values):
            bad("lambda_values", "couplings must be > 0")
        if self.lambda_count < 2:
            bad("lambda_count", "must be >= 2")
        if self.spacing not in ("linear", "geometric", "composite"):
            bad("spacing", "must be linear, geometric or composite")
        if not self.tol >= 0:
            bad("tol", "must be >= 0")
        if not self.t_list or any(not t > 0 for t in self.t_list):
            bad("t_list", "all times must be > 0")
        if not self.temperature_list or any(not T > 0 for T in self.temperature_list):
            bad("temperature_list", "temperatures must be > 0 or inf")
        if self.dc_policy != "auto":
            try:
                if int(self.dc_policy) < 1:
                    raise ValueError
            except ValueError:
                bad("dc_policy", "must be 'auto' or a positive integer")
        if self.profile not in ("desk", "full", "custom"):
            bad("profile", "must be desk, full or custom")
        if self.jobs < 0:
            bad("jobs", "must be >= 0 (0 = all cores)")
        if self.unfold_window < 1:
            bad("unfold_window", "must be >= 1")
        if self.bins < 4:
            bad("bins", "must be >= 4")
        if not self.s_max > 0:
            bad("s_max", "must be > 0")
        return self

    def physics(self) -> dict[str, Any]:
        """Fields that determine numerical results (hashed into the run directory name)."""
        skip = {"output_dir", "jobs", "profile"}
        return {k: _jsonable(v) for k, v in asdict(self).items() if k not in skip}

    def as_dict(self) -> dict[str, Any]:
        return {k: _jsonable(v) for k, v in asdict(self).items()}


def _jsonable(v):
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    if isinstance(v, tuple):
        return [_jsonable(x) for x in v]
    return v


PROFILES: dict[str, RunConfig] = {
    "desk": RunConfig(),
    "full": RunConfig(
        K=120,
        K_prime=126,
        lambda_count=96,
        tol=1e-6,
        profile="full",
    ),
}


def _parse_list(raw: str, conv) -> tuple:
    return tuple(conv(x.strip()) for x in raw.replace(";", ",").split(",") if x.strip())


_CONVERTERS = {
    int: int,
    float: float,
    str: str,
    bool: lambda s: str(s).strip().lower() in ("1", "true", "yes", "on"),
}


def coerce(name: str, raw: Any) -> Any:
    """Convert a textual value to the type of ``RunConfig.<name>``."""
    ftypes = {f.name: f.type for f in fields(RunConfig)}
    if name not in ftypes:
        raise ValueError(f"unknown config field {name!r}")
    ftype = str(ftypes[name])
    if not isinstance(raw, str):
        return tuple(raw) if isinstance(raw, list) else raw
    try:
        if ftype.startswith("tuple[int"):
            return _parse_list(raw, int)
        if name in ("temperature_list", "oracle_temperatures"):
            return _parse_list(raw, parse_temperature)
        if ftype.startswith("tuple[float"):
            return _parse_list(raw, float)
        if name == "partial_temperature":
            return parse_temperature(raw)
        return _CONVERTERS[{"int": int, "float": float, "str": str, "bool": bool}[ftype]](raw)
    except (ValueError, KeyError) as exc:
        raise ValueError(f"invalid config field {name!r}: cannot parse {raw!r}") from exc


def read_config_file(path: str | Path) -> dict[str, Any]:
    """``key = value`` lines; an optional ``[run]`` header is accepted; ``#`` comments."""
    text = Path(path).read_text(encoding="utf-8")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    parser.optionxform = str
    if not any(line.strip().startswith("[") for line in text.splitlines()):
        text = "[run]\n" + text
    parser.read_string(text)
    out = {}
    for section in parser.sections():
        for key, value in parser.items(section):
            out[key] = coerce(key, value)
    return out


def load_config(
    profile: str | None = None,
    path: str | Path | None = None,
    overrides: dict[str, Any] | None = None,
) -> RunConfig:
    """Preset, then config file, then explicit overrides, then the output-root env var."""
    file_values = read_config_file(path) if path else {}
    name = profile or file_values.get("profile", "desk")
    if name not in PROFILES:
        raise ValueError(f"unknown profile {name!r}")
    cfg = replace(PROFILES[name], **file_values)
    over = {k: coerce(k, v) for k, v in (overrides or {}).items() if v is not None}
    env_out = os.environ.get(OUT_ENV)
    if env_out and "output_dir" not in over:
        over["output_dir"] = env_out
    cfg = replace(cfg, **over)
    return cfg.validate()
