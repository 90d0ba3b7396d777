"""Q-networks in plain numpy: dense, GRU and LSTM layers with exact backprop and Adam.

All three architectures share a four-stage layout::

    dqn       fc1 -relu-> fc2 -relu-> fc3 -relu-> out
    dqn-gru   fc1 -relu-> gru1 -----> gru2 -----> out
    dqn-lstm  fc1 -relu-> lstm1 ----> lstm2 ----> out

Weights multiply on the right (``y = x @ W + b``).  Recurrent layers store
their gates concatenated along the output axis: GRU ``[update, reset, cand]``
and LSTM ``[input, forget, cell, output]``.  Sequences are ``(T, B, features)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

KINDS = ("dqn", "dqn-gru", "dqn-lstm")
_GATES = {"dqn-gru": 3, "dqn-lstm": 4}

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


class ShapeError(ValueError):
    pass


@dataclass(frozen=True)
class ArchDescriptor:
    kind: str
    input_dim: int
    hidden_dim: int = 128
    n_actions: int = 5

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown architecture {self.kind!r}; expected one of {KINDS}")
        if min(self.input_dim, self.hidden_dim, self.n_actions) < 1:
            raise ValueError("layer widths must be positive")

    @property
    def recurrent(self) -> bool:
        return self.kind != "dqn"

    @property
    def cell(self) -> str | None:
        return {"dqn-gru": "gru", "dqn-lstm": "lstm"}.get(self.kind)


@dataclass
class QNetParams:
    arch: ArchDescriptor
    tensors: dict[str, np.ndarray] = field(default_factory=dict)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def count(self) -> int:
        return sum(t.size for t in self.tensors.values())

    def equals(self, other: "QNetParams") -> bool:
        return (
            self.arch == other.arch
            and list(self.tensors) == list(other.tensors)
            and all(np.array_equal(self.tensors[k], other.tensors[k]) for k in self.tensors)
        )


def param_shapes(arch: ArchDescriptor) -> dict[str, tuple[int, ...]]:
    i, h, a = arch.input_dim, arch.hidden_dim, arch.n_actions
    shapes: dict[str, tuple[int, ...]] = {"fc1.W": (i, h), "fc1.b": (h,)}
    if arch.recurrent:
        g = _GATES[arch.kind]
        for layer in ("rnn1", "rnn2"):
            shapes[f"{layer}.Wx"] = (h, g * h)
            shapes[f"{layer}.Wh"] = (h, g * h)
            shapes[f"{layer}.b"] = (g * h,)
    else:
        shapes.update({"fc2.W": (h, h), "fc2.b": (h,), "fc3.W": (h, h), "fc3.b": (h,)})
    shapes.update({"out.W": (h, a), "out.b": (a,)})
    return shapes


def init_bound(arch: ArchDescriptor, name: str) -> float:
    """Glorot-uniform half-width; recurrent matrices use the per-gate block as fan-out."""
    shape = param_shapes(arch)[name]
    if len(shape) == 1:
        return 0.0
    fan_in, fan_out = shape
    if name.startswith("rnn"):
        fan_out = arch.hidden_dim
    return float(np.sqrt(6.0 / (fan_in + fan_out)))


def init_params(arch: ArchDescriptor, rng: np.random.Generator) -> QNetParams:
    tensors = {}
    for name, shape in param_shapes(arch).items():
        if len(shape) == 1:
            tensors[name] = np.zeros(shape)
        else:
            bound = init_bound(arch, name)
            tensors[name] = rng.uniform(-bound, bound, size=shape)
    return QNetParams(arch, tensors)


def zeros_like_params(params: QNetParams) -> dict[str, np.ndarray]:
    return {k: np.zeros_like(v) for k, v in params.tensors.items()}


def clone_params(params: QNetParams) -> QNetParams:
    return QNetParams(params.arch, {k: v.copy() for k, v in params.tensors.items()})


# -- hidden state ----------------------------------------------------------

Hidden = tuple  # per recurrent layer: (h,) for GRU, (h, c) for LSTM


def zero_hidden(arch: ArchDescriptor, batch: int = 1) -> Hidden | None:
    if not arch.recurrent:
        return None
    n = 1 if arch.cell == "gru" else 2
    return tuple(tuple(np.zeros((batch, arch.hidden_dim)) for _ in range(n)) for _ in range(2))


def select_hidden(hidden: Hidden | None, rows) -> Hidden | None:
    if hidden is None:
        return None
    return tuple(tuple(s[rows] for s in layer) for layer in hidden)


# -- forward ---------------------------------------------------------------

def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _relu(x):
    return np.maximum(x, 0.0)


def _check_hidden(arch: ArchDescriptor, hidden, batch: int):
    if not arch.recurrent:
        if hidden is not None:
            raise ShapeError("dqn takes no hidden state")
        return
    if hidden is None:
        raise ShapeError(f"{arch.kind} needs a hidden state")
    want = len(zero_hidden(arch, 1)[0])
    if len(hidden) != 2 or any(len(layer) != want for layer in hidden):
        raise ShapeError("hidden state has the wrong structure")
    for layer in hidden:
        for s in layer:
            if s.shape != (batch, arch.hidden_dim):
                raise ShapeError(f"hidden state shape {s.shape} != {(batch, arch.hidden_dim)}")


def _gru_forward(gx, h, Wh, H):
    """gx: (T, B, 3H) input projections incl. bias."""
    T = gx.shape[0]
    hs = np.empty((T + 1,) + h.shape)
    zs, rs, ns = (np.empty((T,) + h.shape) for _ in range(3))
    hs[0] = h
    Wzr, Wn = Wh[:, :2 * H], Wh[:, 2 * H:]
    for t in range(T):
        hp = hs[t]
        zr = _sigmoid(gx[t, :, :2 * H] + hp @ Wzr)
        z, r = zr[:, :H], zr[:, H:]
        n = np.tanh(gx[t, :, 2 * H:] + (r * hp) @ Wn)
        hs[t + 1] = (1.0 - z) * n + z * hp
        zs[t], rs[t], ns[t] = z, r, n
    return hs, (zs, rs, ns)


def _lstm_forward(gx, h, c, Wh, H):
    T = gx.shape[0]
    hs = np.empty((T + 1,) + h.shape)
    cs = np.empty((T + 1,) + c.shape)
    gates = np.empty(gx.shape)
    hs[0], cs[0] = h, c
    for t in range(T):
        a = gx[t] + hs[t] @ Wh
        i = _sigmoid(a[:, :H])
        f = _sigmoid(a[:, H:2 * H])
        g = np.tanh(a[:, 2 * H:3 * H])
        o = _sigmoid(a[:, 3 * H:])
        cs[t + 1] = f * cs[t] + i * g
        hs[t + 1] = o * np.tanh(cs[t + 1])
        gates[t] = np.concatenate([i, f, g, o], axis=1)
    return hs, cs, gates


def forward_sequence(params: QNetParams, xs: np.ndarray, hidden: Hidden | None = None,
                     keep_cache: bool = False):
    """Run a ``(T, B, input_dim)`` sequence.

    Returns ``(q, hidden_out)`` with ``q`` of shape ``(T, B, n_actions)``, or
    ``(q, hidden_out, cache)`` when ``keep_cache`` is set.  The dense
    architecture treats every time step independently.
    """
    arch = params.arch
    xs = np.asarray(xs, dtype=np.float64)
    if xs.ndim != 3 or xs.shape[2] != arch.input_dim:
        raise ShapeError(f"expected (T, B, {arch.input_dim}) input, got {xs.shape}")
    T, B, _ = xs.shape
    _check_hidden(arch, hidden, B)
    p = params.tensors
    H = arch.hidden_dim
    cache: dict = {"xs": xs}

    z1 = xs @ p["fc1.W"] + p["fc1.b"]
    a1 = _relu(z1)
    cache["z1"] = z1
    if not arch.recurrent:
        z2 = a1 @ p["fc2.W"] + p["fc2.b"]
        a2 = _relu(z2)
        z3 = a2 @ p["fc3.W"] + p["fc3.b"]
        top = _relu(z3)
        cache.update(a1=a1, z2=z2, a2=a2, z3=z3)
        hidden_out = None
    else:
        layer_in = a1
        new_hidden = []
        for li, layer in enumerate(("rnn1", "rnn2")):
            gx = layer_in @ p[f"{layer}.Wx"] + p[f"{layer}.b"]
            if arch.cell == "gru":
                hs, gates = _gru_forward(gx, hidden[li][0], p[f"{layer}.Wh"], H)
                new_hidden.append((hs[-1].copy(),))
                cache[layer] = {"in": layer_in, "hs": hs, "gates": gates}
            else:
                hs, cs, gates = _lstm_forward(gx, hidden[li][0], hidden[li][1], p[f"{layer}.Wh"], H)
                new_hidden.append((hs[-1].copy(), cs[-1].copy()))
                cache[layer] = {"in": layer_in, "hs": hs, "cs": cs, "gates": gates}
            layer_in = hs[1:]
        top = layer_in
        hidden_out = tuple(new_hidden)
    q = top @ p["out.W"] + p["out.b"]
    cache["top"] = top
    if keep_cache:
        return q, hidden_out, cache
    return q, hidden_out


def forward(params: QNetParams, obs_batch: np.ndarray, hidden: Hidden | None = None):
    """One time step: ``(B, input_dim)`` -> ``(q (B, n_actions), hidden')``."""
    obs_batch = np.asarray(obs_batch, dtype=np.float64)
    if obs_batch.ndim != 2:
        raise ShapeError(f"expected (B, {params.arch.input_dim}) input, got {obs_batch.shape}")
    q, h = forward_sequence(params, obs_batch[None], hidden)
    return q[0], h


# -- backward --------------------------------------------------------------

def _gru_backward(dhs_out, cache, Wh, H):
    """dhs_out: (T, B, H) gradient on each emitted state. Returns (dgx, dWh)."""
    hs = cache["hs"]
    zs, rs, ns = cache["gates"]
    T = dhs_out.shape[0]
    Wzr, Wn = Wh[:, :2 * H], Wh[:, 2 * H:]
    dgx = np.empty((T, hs.shape[1], 3 * H))
    dWh = np.zeros_like(Wh)
    dh = np.zeros_like(hs[0])
    for t in range(T - 1, -1, -1):
        dh = dh + dhs_out[t]
        hp, z, r, n = hs[t], zs[t], rs[t], ns[t]
        dn_pre = dh * (1.0 - z) * (1.0 - n * n)
        dz_pre = dh * (hp - n) * z * (1.0 - z)
        drh = dn_pre @ Wn.T
        dr_pre = drh * hp * r * (1.0 - r)
        dzr = np.concatenate([dz_pre, dr_pre], axis=1)
        dWh[:, 2 * H:] += (r * hp).T @ dn_pre
        dWh[:, :2 * H] += hp.T @ dzr
        dh = dh * z + drh * r + dzr @ Wzr.T
        dgx[t, :, :2 * H] = dzr
        dgx[t, :, 2 * H:] = dn_pre
    return dgx, dWh


def _lstm_backward(dhs_out, cache, Wh, H):
    hs, cs, gates = cache["hs"], cache["cs"], cache["gates"]
    T = dhs_out.shape[0]
    dgx = np.empty(gates.shape)
    dWh = np.zeros_like(Wh)
    dh = np.zeros_like(hs[0])
    dc = np.zeros_like(cs[0])
    for t in range(T - 1, -1, -1):
        dh = dh + dhs_out[t]
        i, f, g, o = (gates[t, :, k * H:(k + 1) * H] for k in range(4))
        tc = np.tanh(cs[t + 1])
        dc = dc + dh * o * (1.0 - tc * tc)
        da = np.concatenate([
            dc * g * i * (1.0 - i),
            dc * cs[t] * f * (1.0 - f),
            dc * i * (1.0 - g * g),
            dh * tc * o * (1.0 - o),
        ], axis=1)
        dWh += hs[t].T @ da
        dh = da @ Wh.T
        dc = dc * f
        dgx[t] = da
    return dgx, dWh


def _flat(a):
    return a.reshape(-1, a.shape[-1])


def backward(params: QNetParams, cache: dict, dq: np.ndarray) -> dict[str, np.ndarray]:
    """Exact gradients of ``sum(dq * q)`` w.r.t. every tensor, through the whole sequence."""
    arch = params.arch
    p = params.tensors
    H = arch.hidden_dim
    if dq.shape != cache["top"].shape[:-1] + (arch.n_actions,):
        raise ShapeError(f"dq shape {dq.shape} does not match the forward output")
    g: dict[str, np.ndarray] = {}

    g["out.W"] = _flat(cache["top"]).T @ _flat(dq)
    g["out.b"] = _flat(dq).sum(axis=0)
    dtop = dq @ p["out.W"].T

    if not arch.recurrent:
        dz3 = dtop * (cache["z3"] > 0)
        g["fc3.W"] = _flat(cache["a2"]).T @ _flat(dz3)
        g["fc3.b"] = _flat(dz3).sum(axis=0)
        dz2 = (dz3 @ p["fc3.W"].T) * (cache["z2"] > 0)
        g["fc2.W"] = _flat(cache["a1"]).T @ _flat(dz2)
        g["fc2.b"] = _flat(dz2).sum(axis=0)
        da1 = dz2 @ p["fc2.W"].T
    else:
        dout = dtop
        for layer in ("rnn2", "rnn1"):
            c = cache[layer]
            if arch.cell == "gru":
                dgx, dWh = _gru_backward(dout, c, p[f"{layer}.Wh"], H)
            else:
                dgx, dWh = _lstm_backward(dout, c, p[f"{layer}.Wh"], H)
            g[f"{layer}.Wh"] = dWh
            g[f"{layer}.Wx"] = _flat(c["in"]).T @ _flat(dgx)
            g[f"{layer}.b"] = _flat(dgx).sum(axis=0)
            dout = dgx @ p[f"{layer}.Wx"].T
        da1 = dout

    dz1 = da1 * (cache["z1"] > 0)
    g["fc1.W"] = _flat(cache["xs"]).T @ _flat(dz1)
    g["fc1.b"] = _flat(dz1).sum(axis=0)
    return {k: g[k] for k in p}


# -- optimiser -------------------------------------------------------------

@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def for_params(cls, params: QNetParams) -> "AdamState":
        return cls(zeros_like_params(params), zeros_like_params(params), 0)


def adam_step(params: QNetParams, grads: dict[str, np.ndarray], state: AdamState, lr: float) -> QNetParams:
    """One bias-corrected Adam update, applied in place; returns ``params``."""
    state.t += 1
    c1 = 1.0 - ADAM_BETA1 ** state.t
    c2 = 1.0 - ADAM_BETA2 ** state.t
    for k, w in params.tensors.items():
        gk = grads[k]
        m = state.m[k]
        v = state.v[k]
        m *= ADAM_BETA1
        m += (1.0 - ADAM_BETA1) * gk
        v *= ADAM_BETA2
        v += (1.0 - ADAM_BETA2) * gk * gk
        w -= lr * (m / c1) / (np.sqrt(v / c2) + ADAM_EPS)
    return params
