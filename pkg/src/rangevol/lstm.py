"""Stacked vanilla-RNN / LSTM sequence classifier in plain numpy.

Shapes: a batch of windows is ``(B, T, n)``; hidden states are ``(B, h)``.
Each layer holds ``W`` (h x n), ``U`` (h x h) and ``b`` (h) per gate
(``i, f, o, c`` for the LSTM, a single ``h`` for the tanh RNN). The readout
head is ``p = sigmoid(w . h_T + b)`` on the top layer's final hidden state.

Dropout masks multiply layer outputs that feed the next layer or the head,
one mask per window held fixed across time steps; the recurrent ``h_{t-1}``
path is never masked.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .io import atomic_write_text

LSTM_GATES = ("i", "f", "o", "c")


class CellKind(enum.Enum):
    VANILLA = "vanilla"
    LSTM = "lstm"


def layer_param_names(cell: CellKind) -> tuple[str, ...]:
    gates = LSTM_GATES if cell is CellKind.LSTM else ("h",)
    return tuple(f"{m}_{g}" for m in ("W", "U", "b") for g in gates)


def sigmoid(z):
    # tanh form stays finite for any z and is exactly 0.5 at 0
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=float)))


def _check_shapes(params: dict, n: int, x: np.ndarray, h_prev: np.ndarray, gates):
    for g in gates:
        W, U, b = params[f"W_{g}"], params[f"U_{g}"], params[f"b_{g}"]
        hdim = U.shape[0]
        if W.shape != (hdim, n) or U.shape != (hdim, hdim) or b.shape != (hdim,):
            raise ValueError(f"inconsistent shapes for gate {g}: W{W.shape} U{U.shape} b{b.shape}")
    if x.shape[-1] != n or h_prev.shape[-1] != params[f"U_{gates[0]}"].shape[0]:
        raise ValueError(f"input {x.shape} / state {h_prev.shape} do not match parameters")


def vanilla_step(params: dict, x, h_prev) -> np.ndarray:
    """One tanh-RNN step: ``tanh(W_h x + U_h h_prev + b_h)``."""
    x, h_prev = np.asarray(x, dtype=float), np.asarray(h_prev, dtype=float)
    _check_shapes(params, params["W_h"].shape[1], x, h_prev, ("h",))
    return np.tanh(x @ params["W_h"].T + h_prev @ params["U_h"].T + params["b_h"])


@dataclass(frozen=True)
class LstmState:
    h: np.ndarray
    c: np.ndarray

    @classmethod
    def zeros(cls, hidden: int, batch: tuple = ()) -> "LstmState":
        return cls(np.zeros(batch + (hidden,)), np.zeros(batch + (hidden,)))


def lstm_step(params: dict, x, state: LstmState) -> LstmState:
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite LSTM input")
    _check_shapes(params, params["W_i"].shape[1], x, state.h, LSTM_GATES)

    def pre(g):
        return x @ params[f"W_{g}"].T + state.h @ params[f"U_{g}"].T + params[f"b_{g}"]

    i, f, o = sigmoid(pre("i")), sigmoid(pre("f")), sigmoid(pre("o"))
    c = f * state.c + i * np.tanh(pre("c"))
    return LstmState(o * np.tanh(c), c)


@dataclass(eq=False)
class LstmModel:
    """Layered recurrent parameters plus the logistic readout head.

    ``params`` maps ``"layer{k}.W_i"``-style names (and ``"head.w"``,
    ``"head.b"``) to arrays; its insertion order is the canonical order used
    by the optimizer, gradient checks and the model file format.
    """

    cell: CellKind
    input_size: int
    hidden_sizes: tuple[int, ...]
    params: dict[str, np.ndarray] = field(repr=False)
    seed: int | None = None

    @classmethod
    def init(
        cls,
        input_size: int = 1,
        hidden_sizes=(10, 10),
        cell: CellKind = CellKind.LSTM,
        seed: int = 0,
        forget_bias: float = 1.0,
    ) -> "LstmModel":
        """Uniform(+-1/sqrt(h)) weights, zero biases, forget-gate bias ``forget_bias``."""
        rng = np.random.default_rng(seed)
        hidden_sizes = tuple(int(h) for h in hidden_sizes)
        params: dict[str, np.ndarray] = {}
        n = input_size
        for k, h in enumerate(hidden_sizes):
            bound = 1.0 / math.sqrt(h)
            for name in layer_param_names(cell):
                kind, gate = name.split("_")
                if kind == "W":
                    val = rng.uniform(-bound, bound, (h, n))
                elif kind == "U":
                    val = rng.uniform(-bound, bound, (h, h))
                else:
                    val = np.full(h, forget_bias if gate == "f" else 0.0)
                params[f"layer{k}.{name}"] = val
            n = h
        params["head.w"] = rng.uniform(-1.0 / math.sqrt(n), 1.0 / math.sqrt(n), n)
        params["head.b"] = np.zeros(1)
        return cls(cell, input_size, hidden_sizes, params, seed)

    @property
    def num_layers(self) -> int:
        return len(self.hidden_sizes)

    def layer(self, k: int) -> dict[str, np.ndarray]:
        prefix = f"layer{k}."
        return {name[len(prefix):]: v for name, v in self.params.items() if name.startswith(prefix)}

    def copy(self) -> "LstmModel":
        return LstmModel(self.cell, self.input_size, self.hidden_sizes,
                         {k: v.copy() for k, v in self.params.items()}, self.seed)

    def predict_proba(self, X, batch_size: int = 4096) -> np.ndarray:
        """Probabilities for a ``(B, T, n)`` batch, without dropout."""
        X = np.asarray(X, dtype=float)
        out = [forward_sequence(self, X[s:s + batch_size])[0] for s in range(0, len(X), batch_size)]
        return np.concatenate(out) if out else np.zeros(0)


@dataclass
class Tape:
    """Activations cached by :func:`forward_sequence` for the backward pass."""

    inputs: list  # per layer (B, T, n_k), already masked
    caches: list  # per layer dict of (B, T, h) arrays
    masks: list | None
    final: np.ndarray  # (B, h_top) masked final hidden state fed to the head
    logit: np.ndarray  # (B,)
    prob: np.ndarray  # (B,)
    single: bool
    cell: CellKind
    hidden_sizes: tuple


def _stack(layer: dict, cell: CellKind):
    gates = LSTM_GATES if cell is CellKind.LSTM else ("h",)
    W = np.concatenate([layer[f"W_{g}"] for g in gates], axis=0)
    U = np.concatenate([layer[f"U_{g}"] for g in gates], axis=0)
    b = np.concatenate([layer[f"b_{g}"] for g in gates])
    return W, U, b


def _lstm_layer_forward(X, W, U, b, h):
    B, T, _ = X.shape
    proj = X @ W.T + b
    Ut = U.T
    ig, fg, og, gg, cs, tc, hs = (np.empty((B, T, h)) for _ in range(7))
    h_t, c_t = np.zeros((B, h)), np.zeros((B, h))
    for t in range(T):
        z = proj[:, t] + h_t @ Ut
        i = sigmoid(z[:, :h])
        f = sigmoid(z[:, h:2 * h])
        o = sigmoid(z[:, 2 * h:3 * h])
        g = np.tanh(z[:, 3 * h:])
        c_t = f * c_t + i * g
        th = np.tanh(c_t)
        h_t = o * th
        ig[:, t], fg[:, t], og[:, t], gg[:, t], cs[:, t], tc[:, t], hs[:, t] = i, f, o, g, c_t, th, h_t
    return hs, dict(i=ig, f=fg, o=og, g=gg, c=cs, tanh_c=tc, h=hs)


def _vanilla_layer_forward(X, W, U, b, h):
    B, T, _ = X.shape
    proj = X @ W.T + b
    hs = np.empty((B, T, h))
    h_t = np.zeros((B, h))
    for t in range(T):
        h_t = np.tanh(proj[:, t] + h_t @ U.T)
        hs[:, t] = h_t
    return hs, dict(h=hs)


def forward_sequence(model: LstmModel, window, dropout_masks=None):
    """Run the stacked network over one window ``(T, n)`` or a batch ``(B, T, n)``.

    ``dropout_masks`` is ``None`` or one array per layer with shape
    ``(B, h_k)`` (``(h_k,)`` for a single window). Returns ``(p, tape)``;
    ``p`` is a float for a single window, else shape ``(B,)``.
    """
    X = np.asarray(window, dtype=float)
    single = X.ndim == 2
    if single:
        X = X[None]
    if X.ndim != 3 or X.shape[1] == 0 or X.shape[2] != model.input_size:
        raise ValueError(f"window shape {np.shape(window)} incompatible with input_size {model.input_size}")
    B = X.shape[0]
    masks = None
    if dropout_masks is not None:
        if len(dropout_masks) != model.num_layers:
            raise ValueError("need one dropout mask per layer")
        masks = []
        for k, m in enumerate(dropout_masks):
            m = np.asarray(m, dtype=float)
            if single and m.ndim == 1:
                m = m[None]
            if m.shape != (B, model.hidden_sizes[k]):
                raise ValueError(f"mask {k} has shape {m.shape}, expected {(B, model.hidden_sizes[k])}")
            masks.append(m)

    layer_fwd = _lstm_layer_forward if model.cell is CellKind.LSTM else _vanilla_layer_forward
    inputs, caches = [], []
    cur = X
    for k, h in enumerate(model.hidden_sizes):
        inputs.append(cur)
        W, U, b = _stack(model.layer(k), model.cell)
        hs, cache = layer_fwd(cur, W, U, b, h)
        caches.append(cache)
        cur = hs * masks[k][:, None, :] if masks is not None else hs
    final = cur[:, -1]
    logit = final @ model.params["head.w"] + model.params["head.b"][0]
    prob = sigmoid(logit)
    tape = Tape(inputs, caches, masks, final, logit, prob, single, model.cell, model.hidden_sizes)
    return (float(prob[0]) if single else prob), tape


def bce_from_logits(logit, y) -> np.ndarray:
    """Per-window binary cross entropy computed from the logit (never takes log 0)."""
    logit = np.asarray(logit, dtype=float)
    return np.logaddexp(0.0, logit) - np.asarray(y, dtype=float) * logit


def _lstm_layer_backward(dH, X, cache, W, U, h):
    B, T, _ = X.shape
    dZ = np.empty((B, T, 4 * h))
    dh_next = np.zeros((B, h))
    dc_next = np.zeros((B, h))
    i, f, o, g, c, tc = (cache[k] for k in ("i", "f", "o", "g", "c", "tanh_c"))
    for t in range(T - 1, -1, -1):
        dh = dH[:, t] + dh_next
        do = dh * tc[:, t]
        dc = dc_next + dh * o[:, t] * (1.0 - tc[:, t] ** 2)
        c_prev = c[:, t - 1] if t > 0 else 0.0
        dZ[:, t, :h] = dc * g[:, t] * i[:, t] * (1.0 - i[:, t])
        dZ[:, t, h:2 * h] = dc * c_prev * f[:, t] * (1.0 - f[:, t])
        dZ[:, t, 2 * h:3 * h] = do * o[:, t] * (1.0 - o[:, t])
        dZ[:, t, 3 * h:] = dc * i[:, t] * (1.0 - g[:, t] ** 2)
        dc_next = dc * f[:, t]
        dh_next = dZ[:, t] @ U
    return dZ


def _vanilla_layer_backward(dH, X, cache, W, U, h):
    B, T, _ = X.shape
    hs = cache["h"]
    dZ = np.empty((B, T, h))
    dh_next = np.zeros((B, h))
    for t in range(T - 1, -1, -1):
        dZ[:, t] = (dH[:, t] + dh_next) * (1.0 - hs[:, t] ** 2)
        dh_next = dZ[:, t] @ U
    return dZ


def backward_sequence(model: LstmModel, tape: Tape, target) -> dict[str, np.ndarray]:
    """Gradients of the mean BCE loss over the taped batch, keyed like ``model.params``."""
    if tape.cell is not model.cell or tuple(tape.hidden_sizes) != tuple(model.hidden_sizes):
        raise ValueError("tape was recorded with a different model layout")
    y = np.broadcast_to(np.asarray(target, dtype=float), tape.prob.shape)
    B = len(tape.prob)
    dlogit = (tape.prob - y) / B
    grads: dict[str, np.ndarray] = {}
    head_w = model.params["head.w"]
    head_grads = {"head.w": tape.final.T @ dlogit, "head.b": np.array([dlogit.sum()])}

    top = model.num_layers - 1
    dH = np.zeros(tape.caches[top]["h"].shape)
    dH[:, -1] = dlogit[:, None] * head_w[None, :]
    if tape.masks is not None:
        dH[:, -1] *= tape.masks[top]

    layer_bwd = _lstm_layer_backward if model.cell is CellKind.LSTM else _vanilla_layer_backward
    gates = LSTM_GATES if model.cell is CellKind.LSTM else ("h",)
    per_layer = {}
    for k in range(top, -1, -1):
        h = model.hidden_sizes[k]
        X = tape.inputs[k]
        W, U, _ = _stack(model.layer(k), model.cell)
        dZ = layer_bwd(dH, X, tape.caches[k], W, U, h)
        hs = tape.caches[k]["h"]
        h_prev = np.concatenate([np.zeros_like(hs[:, :1]), hs[:, :-1]], axis=1)
        dW = np.einsum("btg,btn->gn", dZ, X)
        dU = np.einsum("btg,btj->gj", dZ, h_prev)
        db = dZ.sum(axis=(0, 1))
        for j, g in enumerate(gates):
            sl = slice(j * h, (j + 1) * h)
            per_layer[f"layer{k}.W_{g}"] = dW[sl]
            per_layer[f"layer{k}.U_{g}"] = dU[sl]
            per_layer[f"layer{k}.b_{g}"] = db[sl]
        if k > 0:
            dH = dZ @ W
            if tape.masks is not None:
                dH = dH * tape.masks[k - 1][:, None, :]
    for name in model.params:
        grads[name] = per_layer[name] if name in per_layer else head_grads[name]
    return grads


def loss_and_grads(model: LstmModel, X, y, dropout_masks=None):
    """Mean BCE over a batch and its exact gradients."""
    _, tape = forward_sequence(model, X, dropout_masks)
    loss = float(np.mean(bce_from_logits(tape.logit, np.broadcast_to(y, tape.logit.shape))))
    return loss, backward_sequence(model, tape, y)


# -- model files ----------------------------------------------------------

MODEL_MAGIC = "rangevol-rnn 1"


def save_model(model: LstmModel, path) -> None:
    """Write a plain-text tensor container.

    Layout: the magic line, ``cell``, ``input_size``, ``hidden_sizes`` and
    ``seed`` header lines, then for every parameter in canonical order a
    ``param <name> <dims...>`` line followed by its values, one row per line
    in row-major order. Floats use ``repr`` so a reload is bit-exact.
    """
    lines = [
        MODEL_MAGIC,
        f"cell {model.cell.value}",
        f"input_size {model.input_size}",
        "hidden_sizes " + " ".join(map(str, model.hidden_sizes)),
        f"seed {model.seed if model.seed is not None else 'none'}",
    ]
    for name, arr in model.params.items():
        lines.append(f"param {name} " + " ".join(map(str, arr.shape)))
        rows = arr.reshape(arr.shape[0], -1) if arr.ndim > 1 else arr[None]
        lines += [" ".join(repr(float(v)) for v in row) for row in rows]
    atomic_write_text(path, "\n".join(lines) + "\n")


def load_model(path) -> LstmModel:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != MODEL_MAGIC:
        raise ValueError(f"{path}: not a model file")
    header = dict(line.split(" ", 1) for line in lines[1:5])
    cell = CellKind(header["cell"])
    hidden = tuple(int(v) for v in header["hidden_sizes"].split())
    seed = None if header["seed"] == "none" else int(header["seed"])
    ref = LstmModel.init(int(header["input_size"]), hidden, cell, seed=0)
    params = {}
    pos = 5
    while pos < len(lines):
        tag, name, *dims = lines[pos].split()
        if tag != "param":
            raise ValueError(f"{path}:{pos + 1}: expected a param line")
        shape = tuple(int(d) for d in dims)
        n_rows = shape[0] if len(shape) > 1 else 1
        rows = [[float(v) for v in lines[pos + 1 + r].split()] for r in range(n_rows)]
        params[name] = np.array(rows, dtype=float).reshape(shape)
        pos += 1 + n_rows
    if list(params) != list(ref.params) or any(params[k].shape != ref.params[k].shape for k in params):
        raise ValueError(f"{path}: parameter blocks do not match the declared layout")
    return LstmModel(cell, int(header["input_size"]), hidden, params, seed)
