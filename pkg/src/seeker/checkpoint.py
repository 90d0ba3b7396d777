"""Versioned plain-text checkpoints.

Layout::

    seeker-checkpoint 1
    [arch]
    kind = dqn
    ...
    mode = impure
    [env]
    width = 10
    ...
    [train]            (optional)
    ...
    [tensors]
    tensor fc1.W 70 128
    <one matrix row per line, values with 17 significant digits>
    ...
    end

Floats are written with 17 significant digits so every float64 survives a
save/load round trip, and saving a loaded checkpoint reproduces the file
byte for byte.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import ConfigParseError, dump_kv, env_from_kv, env_to_kv, parse_kv, train_from_kv, train_to_kv
from .dqn import TrainConfig
from .env import EnvConfig
from .nn import ArchDescriptor, QNetParams, ShapeError, param_shapes

MAGIC = "seeker-checkpoint"
FORMAT_VERSION = 1


class CheckpointError(Exception):
    pass


class UnsupportedVersionError(CheckpointError):
    pass


class CorruptCheckpointError(CheckpointError):
    pass


class CheckpointShapeError(CorruptCheckpointError, ShapeError):
    pass


@dataclass
class Checkpoint:
    params: QNetParams
    env: EnvConfig
    train: TrainConfig | None = None
    version: int = FORMAT_VERSION

    @property
    def arch(self) -> ArchDescriptor:
        return self.params.arch

    @property
    def mode(self) -> str:
        return self.env.mode


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def dumps(ck: Checkpoint) -> str:
    arch = ck.params.arch
    parts = [f"{MAGIC} {FORMAT_VERSION}\n", "[arch]\n"]
    parts.append(dump_kv({"kind": arch.kind, "input_dim": arch.input_dim,
                          "hidden_dim": arch.hidden_dim, "n_actions": arch.n_actions,
                          "mode": ck.env.mode}))
    parts.append("[env]\n")
    parts.append(dump_kv(env_to_kv(ck.env)))
    if ck.train is not None:
        parts.append("[train]\n")
        parts.append(dump_kv(train_to_kv(ck.train)))
    parts.append("[tensors]\n")
    for name, t in ck.params.tensors.items():
        parts.append(f"tensor {name} {' '.join(str(d) for d in t.shape)}\n")
        rows = t.reshape(1, -1) if t.ndim == 1 else t
        for row in rows:
            parts.append(" ".join(_fmt(v) for v in row) + "\n")
    parts.append("end\n")
    return "".join(parts)


def loads(text: str) -> Checkpoint:
    lines = text.split("\n")
    if not lines or not lines[0].startswith(MAGIC + " "):
        raise CorruptCheckpointError("not a seeker checkpoint (bad header)")
    try:
        version = int(lines[0][len(MAGIC) + 1:])
    except ValueError:
        raise CorruptCheckpointError("unreadable format version") from None
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(f"checkpoint format {version} is not supported (expected {FORMAT_VERSION})")
    if "end" not in lines:
        raise CorruptCheckpointError("checkpoint is truncated (no end marker)")

    sections: dict[str, list[str]] = {}
    current = None
    i = 1
    while i < len(lines) and current != "tensors":
        line = lines[i]
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1]
            sections[current] = []
        elif current is None:
            raise CorruptCheckpointError(f"line {i + 1}: content before the first section")
        else:
            sections[current].append(line)
        i += 1
    for need in ("arch", "env", "tensors"):
        if need not in sections:
            raise CorruptCheckpointError(f"missing [{need}] section")

    try:
        akv = parse_kv("\n".join(sections["arch"]))
        arch = ArchDescriptor(akv["kind"], int(akv["input_dim"]), int(akv["hidden_dim"]), int(akv["n_actions"]))
        env = env_from_kv(parse_kv("\n".join(sections["env"])))
        train = None
        if "train" in sections:
            train = train_from_kv(parse_kv("\n".join(sections["train"])))
    except (KeyError, ValueError, ConfigParseError) as e:
        raise CorruptCheckpointError(f"bad header section: {e}") from e
    if akv.get("mode", env.mode) != env.mode:
        raise CorruptCheckpointError("arch mode disagrees with env mode")

    expected = param_shapes(arch)
    tensors: dict[str, np.ndarray] = {}
    while i < len(lines):
        line = lines[i]
        i += 1
        if line == "end":
            break
        head = line.split()
        if len(head) < 3 or head[0] != "tensor":
            raise CorruptCheckpointError(f"line {i}: expected a tensor header")
        name = head[1]
        try:
            shape = tuple(int(d) for d in head[2:])
        except ValueError:
            raise CorruptCheckpointError(f"line {i}: bad tensor shape") from None
        if name not in expected:
            raise CheckpointShapeError(f"unexpected tensor {name!r} for a {arch.kind} network")
        if shape != expected[name]:
            raise CheckpointShapeError(f"tensor {name} has shape {shape}, architecture needs {expected[name]}")
        n_rows = 1 if len(shape) == 1 else shape[0]
        block = lines[i:i + n_rows]
        i += n_rows
        try:
            values = np.array([[float(v) for v in row.split()] for row in block], dtype=np.float64)
        except ValueError:
            raise CorruptCheckpointError(f"tensor {name}: unreadable values") from None
        if values.size != int(np.prod(shape)) or len(block) != n_rows:
            raise CorruptCheckpointError(f"tensor {name}: expected {int(np.prod(shape))} values")
        tensors[name] = values.reshape(shape)
    if list(tensors) != list(expected):
        missing = [k for k in expected if k not in tensors]
        raise CheckpointShapeError(f"missing tensors: {', '.join(missing)}")
    if any(line.strip() for line in lines[i:]):
        raise CorruptCheckpointError("trailing data after end marker")
    if env.obs_dim != arch.input_dim:
        raise CheckpointShapeError(f"env observations have {env.obs_dim} features, network takes {arch.input_dim}")
    return Checkpoint(QNetParams(arch, tensors), env, train, version)


def save_checkpoint(path, ck: Checkpoint) -> None:
    """Write atomically so an interrupted save never clobbers the previous file."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="\n") as f:
        f.write(dumps(ck))
        f.flush()
        os.fsync(f.fileno())
    os.replace(tmp, path)


def load_checkpoint(path) -> Checkpoint:
    with open(path, newline="\n") as f:
        return loads(f.read())
