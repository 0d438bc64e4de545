"""Run configuration: flat ``key = value`` files, overridable from the command line."""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    seed: int = 0
    jobs: int = 1
    registry: str = ""  # empty: bundled 38-group table
    checkpoint: str = ""  # empty: freshly seeded encoder
    # tokenizer training
    gamma: float = 2.0
    beta: float = 0.25
    mask_rate: float = 0.15
    steps: int = 200
    step_size: float = 1e-3
    batch_size: int = 8
    atom_codebook_size: int = 512
    motif_codebook_size: int = 512
    hidden: int = 300
    layers: int = 5
    normalize_commitment: bool = False
    # token streams
    mode: str = "hight"
    adapter_dim: int = 308
    # benchmark generation
    n_neg: int = 6
    k_neg: int = 4

    def render(self) -> str:
        # jobs never changes results, so it is left out to keep echoes identical.
        lines = []
        for f in fields(self):
            if f.name == "jobs":
                continue
            v = getattr(self, f.name)
            lines.append(f"{f.name} = {str(v).lower() if isinstance(v, bool) else v}")
        return "\n".join(lines) + "\n"


DEFAULTS = RunConfig()
FIELD_TYPES = {f.name: type(getattr(DEFAULTS, f.name)) for f in fields(RunConfig)}


def coerce(key: str, raw: str):
    if key not in FIELD_TYPES:
        raise ConfigError(f"unknown config key {key!r}")
    typ = FIELD_TYPES[key]
    raw = raw.strip()
    try:
        if typ is bool:
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return low in ("true", "1", "yes")
        return typ(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot read {raw!r} as {typ.__name__}") from None


def read_config(path: str | Path) -> dict:
    """Parse a config file into a dict of typed values; ``#`` starts a comment."""
    path = Path(path)
    out = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        try:
            out[key.strip()] = coerce(key.strip(), value)
        except ConfigError as exc:
            raise ConfigError(f"{path}:{lineno}: {exc}") from None
    return out


def build_config(file_values: dict, overrides: dict) -> RunConfig:
    values = {**file_values, **{k: v for k, v in overrides.items() if v is not None}}
    cfg = RunConfig(**values)
    if cfg.jobs < 1:
        raise ConfigError("jobs must be >= 1")
    if cfg.mode not in ("node", "hight"):
        raise ConfigError(f"mode must be 'node' or 'hight', got {cfg.mode!r}")
    if not 0 <= cfg.seed < 2**64:
        raise ConfigError("seed must fit in 64 bits")
    return cfg
