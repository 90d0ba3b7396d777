"""Flat ``key = value`` configuration files.

One pair per line, ``#`` starts a comment, blank lines are ignored.  The same
format carries the environment and training settings inside checkpoints.
"""

from __future__ import annotations

from dataclasses import fields

from .dqn import TrainConfig
from .env import EnvConfig

ENV_KEYS = (
    "width", "height", "n_obstacles", "max_steps", "mode", "fov_deg", "n_slices",
    "move_scale", "turn_scale", "near_threshold", "reach_threshold", "seed",
)


class ConfigParseError(ValueError):
    pass


def parse_kv(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigParseError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigParseError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigParseError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def dump_kv(pairs: dict) -> str:
    return "".join(f"{k} = {format_value(v)}\n" for k, v in pairs.items())


def _bool(s: str) -> bool:
    low = s.lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ConfigParseError(f"not a boolean: {s!r}")


def env_to_kv(cfg: EnvConfig) -> dict:
    return {
        "width": cfg.width,
        "height": cfg.height,
        "n_obstacles": cfg.n_obstacles,
        "max_steps": cfg.max_steps,
        "mode": cfg.mode,
        "fov_deg": float(cfg.fov_deg),
        "n_slices": cfg.n_slices,
        "move_scale": float(cfg.move_scale),
        "turn_scale": float(cfg.turn_scale),
        "near_threshold": float(cfg.near_threshold),
        "reach_threshold": float(cfg.reach_threshold),
        "seed": cfg.seed,
    }


def env_from_kv(kv: dict[str, str], base: EnvConfig | None = None) -> EnvConfig:
    """Build an ``EnvConfig``; keys absent from ``kv`` keep the values of ``base``."""
    base = base or EnvConfig()
    vals = {f.name: getattr(base, f.name) for f in fields(EnvConfig)}
    try:
        for key in ("width", "height", "n_obstacles", "max_steps", "n_slices", "seed"):
            if key in kv:
                vals[key] = int(kv[key])
        for key in ("fov_deg", "move_scale", "turn_scale", "near_threshold", "reach_threshold"):
            if key in kv:
                vals[key] = float(kv[key])
        if "mode" in kv:
            vals["mode"] = kv["mode"]
        return EnvConfig(**vals)
    except ValueError as e:
        raise ConfigParseError(str(e)) from e


def format_phases(phases) -> str:
    return ",".join(f"{o}:{n}" for o, n in phases)


def parse_phases(s: str) -> tuple[tuple[int, int], ...]:
    try:
        out = []
        for part in s.split(","):
            o, n = part.split(":")
            out.append((int(o), int(n)))
        return tuple(out)
    except ValueError as e:
        raise ConfigParseError(f"phases must look like '0:12000,3:6000', got {s!r}") from e


_TRAIN_INT = ("eval_interval", "eval_maps", "buffer_capacity", "episode_capacity", "batch_size",
              "seq_len", "target_sync_interval", "train_every", "hidden_dim", "train_seed")
_TRAIN_FLOAT = ("lr", "gamma", "epsilon_start", "epsilon_end")


def train_to_kv(cfg: TrainConfig) -> dict:
    out = {"phases": format_phases(cfg.phases)}
    for f in fields(TrainConfig):
        name = f.name
        if name == "phases":
            continue
        key = "train_seed" if name == "seed" else name
        v = getattr(cfg, name)
        out[key] = "none" if v is None else v
    return out


def train_from_kv(kv: dict[str, str], base: TrainConfig | None = None) -> TrainConfig:
    base = base or TrainConfig()
    vals = {f.name: getattr(base, f.name) for f in fields(TrainConfig)}
    try:
        if "phases" in kv:
            vals["phases"] = parse_phases(kv["phases"])
        for key in _TRAIN_INT:
            if key in kv:
                vals["seed" if key == "train_seed" else key] = int(kv[key])
        for key in _TRAIN_FLOAT:
            if key in kv:
                vals[key] = float(kv[key])
        if "epsilon_decay_steps" in kv:
            v = kv["epsilon_decay_steps"]
            vals["epsilon_decay_steps"] = None if v.lower() == "none" else int(v)
        if "clear_buffer_on_phase" in kv:
            vals["clear_buffer_on_phase"] = _bool(kv["clear_buffer_on_phase"])
        return TrainConfig(**vals)
    except ValueError as e:
        raise ConfigParseError(str(e)) from e


KNOWN_KEYS = frozenset(ENV_KEYS) | frozenset(
    ("phases", "epsilon_decay_steps", "clear_buffer_on_phase") + _TRAIN_INT + _TRAIN_FLOAT
)


def load_run_config(text: str, env_base: EnvConfig | None = None,
                    train_base: TrainConfig | None = None) -> tuple[EnvConfig, TrainConfig]:
    """Split one config file into environment and training settings.

    ``train_seed`` defaults to ``seed`` when only the latter is given.
    """
    kv = parse_kv(text)
    unknown = sorted(set(kv) - KNOWN_KEYS)
    if unknown:
        raise ConfigParseError(f"unknown config keys: {', '.join(unknown)}")
    if "seed" in kv and "train_seed" not in kv:
        kv = dict(kv, train_seed=kv["seed"])
    return env_from_kv(kv, env_base), train_from_kv(kv, train_base)
