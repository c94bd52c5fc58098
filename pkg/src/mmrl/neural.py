"""Feed-forward Q-network: two ReLU hidden layers, Adam, optional dueling heads.

Dependency-light on purpose: forward and backward passes are plain numpy so
gradients can be checked against finite differences. With dueling enabled
the output layer splits into an advantage head and a value head aggregated
as Q(s,a) = V(s) + (A(s,a) - mean_a' A(s,a')).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import CorruptCheckpoint, DimensionMismatch, InvalidSpec, NonFiniteInput, ShapeMismatch

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
DEFAULT_LR = 1e-3


@dataclass(frozen=True)
class NetSpec:
    input_dim: int
    hidden_dims: tuple[int, int]
    output_dim: int
    dueling: bool = False
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(self.hidden_dims))
        if len(self.hidden_dims) != 2:
            raise InvalidSpec("exactly two hidden layers")
        if min(self.input_dim, *self.hidden_dims, self.output_dim) < 1:
            raise InvalidSpec("all layer dims must be >= 1")


class QNetwork:
    """Parameter container plus Adam moment estimates.

    ``params`` is the flat parameter list [W1, b1, W2, b2, <heads>] where
    the heads are [W_out, b_out] for a plain net and
    [W_adv, b_adv, W_val, b_val] for a dueling net.
    """

    def __init__(self, spec: NetSpec, params: list[np.ndarray]):
        self.spec = spec
        self.params = params
        self.adam_m = [np.zeros_like(p) for p in params]
        self.adam_v = [np.zeros_like(p) for p in params]
        self.adam_t = 0

    def num_params(self) -> int:
        return sum(p.size for p in self.params)

    def clone(self) -> "QNetwork":
        other = QNetwork(self.spec, [p.copy() for p in self.params])
        other.adam_m = [m.copy() for m in self.adam_m]
        other.adam_v = [v.copy() for v in self.adam_v]
        other.adam_t = self.adam_t
        return other


def _uniform_layer(rng: np.random.Generator, fan_in: int, fan_out: int) -> tuple[np.ndarray, np.ndarray]:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    w = rng.uniform(-limit, limit, size=(fan_in, fan_out))
    return w, np.zeros(fan_out)


def init(spec: NetSpec) -> QNetwork:
    """Fresh network with seeded scaled-uniform weights and zero Adam state."""
    rng = np.random.default_rng(spec.seed)
    h1, h2 = spec.hidden_dims
    params: list[np.ndarray] = []
    params.extend(_uniform_layer(rng, spec.input_dim, h1))
    params.extend(_uniform_layer(rng, h1, h2))
    if spec.dueling:
        params.extend(_uniform_layer(rng, h2, spec.output_dim))  # advantage
        params.extend(_uniform_layer(rng, h2, 1))                # value
    else:
        params.extend(_uniform_layer(rng, h2, spec.output_dim))
    return QNetwork(spec, params)


def _forward_full(net: QNetwork, x: np.ndarray):
    """Batch forward pass returning q-values and the backprop cache."""
    w1, b1, w2, b2 = net.params[:4]
    z1 = x @ w1 + b1
    a1 = np.maximum(z1, 0.0)
    z2 = a1 @ w2 + b2
    a2 = np.maximum(z2, 0.0)
    if net.spec.dueling:
        wa, ba, wv, bv = net.params[4:]
        adv = a2 @ wa + ba
        val = a2 @ wv + bv
        q = val + adv - adv.mean(axis=1, keepdims=True)
    else:
        w3, b3 = net.params[4:]
        q = a2 @ w3 + b3
    return q, (x, z1, a1, z2, a2)


def forward_batch(net: QNetwork, states: np.ndarray) -> np.ndarray:
    states = np.asarray(states, dtype=float)
    if states.ndim != 2 or states.shape[1] != net.spec.input_dim:
        raise DimensionMismatch(
            f"expected (batch, {net.spec.input_dim}) states, got {states.shape}")
    if not np.isfinite(states).all():
        raise NonFiniteInput("states contain NaN/inf")
    q, _ = _forward_full(net, states)
    return q


def forward(net: QNetwork, state: np.ndarray) -> np.ndarray:
    """Q-values for one state vector."""
    state = np.asarray(state, dtype=float)
    if state.ndim != 1 or state.shape[0] != net.spec.input_dim:
        raise DimensionMismatch(
            f"expected state of length {net.spec.input_dim}, got shape {state.shape}")
    if not np.isfinite(state).all():
        raise NonFiniteInput("state contains NaN/inf")
    q, _ = _forward_full(net, state[None, :])
    return q[0]


def gradients(net: QNetwork, states: np.ndarray, actions: np.ndarray,
              targets: np.ndarray) -> tuple[float, list[np.ndarray]]:
    """MSE loss over taken-action outputs and its gradient per parameter.

    Only the Q-value of each sample's taken action receives gradient; the
    other outputs are masked out, matching the per-sample target loss.
    """
    states = np.asarray(states, dtype=float)
    actions = np.asarray(actions, dtype=int)
    targets = np.asarray(targets, dtype=float)
    if states.ndim != 2 or states.shape[1] != net.spec.input_dim:
        raise ShapeMismatch(f"bad states shape {states.shape}")
    batch = states.shape[0]
    if actions.shape != (batch,) or targets.shape != (batch,):
        raise ShapeMismatch("states/actions/targets batch sizes differ")
    if not np.isfinite(targets).all():
        raise ShapeMismatch("targets contain NaN/inf")
    if actions.min() < 0 or actions.max() >= net.spec.output_dim:
        raise ShapeMismatch("action index out of range")

    q, (x, z1, a1, z2, a2) = _forward_full(net, states)
    taken = q[np.arange(batch), actions]
    err = taken - targets
    loss = float(np.mean(err ** 2))

    g_q = np.zeros_like(q)
    g_q[np.arange(batch), actions] = 2.0 * err / batch

    if net.spec.dueling:
        wa, ba, wv, bv = net.params[4:]
        row = g_q.sum(axis=1, keepdims=True)
        g_adv = g_q - row / net.spec.output_dim
        g_val = row
        g_wa = a2.T @ g_adv
        g_ba = g_adv.sum(axis=0)
        g_wv = a2.T @ g_val
        g_bv = g_val.sum(axis=0)
        g_a2 = g_adv @ wa.T + g_val @ wv.T
        head_grads = [g_wa, g_ba, g_wv, g_bv]
    else:
        w3, _ = net.params[4:]
        g_w3 = a2.T @ g_q
        g_b3 = g_q.sum(axis=0)
        g_a2 = g_q @ w3.T
        head_grads = [g_w3, g_b3]

    w2 = net.params[2]
    g_z2 = g_a2 * (z2 > 0)
    g_w2 = a1.T @ g_z2
    g_b2 = g_z2.sum(axis=0)
    g_z1 = (g_z2 @ w2.T) * (z1 > 0)
    g_w1 = x.T @ g_z1
    g_b1 = g_z1.sum(axis=0)
    return loss, [g_w1, g_b1, g_w2, g_b2, *head_grads]


def train_step(net: QNetwork, states: np.ndarray, actions: np.ndarray,
               targets: np.ndarray, lr: float = DEFAULT_LR) -> float:
    """One Adam update on the masked MSE loss; returns the pre-update loss."""
    loss, grads = gradients(net, states, actions, targets)
    net.adam_t += 1
    t = net.adam_t
    for p, g, m, v in zip(net.params, grads, net.adam_m, net.adam_v):
        m *= ADAM_BETA1
        m += (1 - ADAM_BETA1) * g
        v *= ADAM_BETA2
        v += (1 - ADAM_BETA2) * g * g
        m_hat = m / (1 - ADAM_BETA1 ** t)
        v_hat = v / (1 - ADAM_BETA2 ** t)
        p -= lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
    return loss


def save(net: QNetwork) -> bytes:
    """Versioned JSON checkpoint; round-trips forward outputs bit-exactly."""
    spec = net.spec
    layers = [{"w": net.params[i].tolist(), "b": net.params[i + 1].tolist()}
              for i in (0, 2)]
    if spec.dueling:
        heads = {
            "advantage": {"w": net.params[4].tolist(), "b": net.params[5].tolist()},
            "value": {"w": net.params[6].tolist(), "b": net.params[7].tolist()},
        }
    else:
        layers.append({"w": net.params[4].tolist(), "b": net.params[5].tolist()})
        heads = {}
    doc = {
        "version": 1,
        "spec": {
            "input_dim": spec.input_dim,
            "hidden_dims": list(spec.hidden_dims),
            "output_dim": spec.output_dim,
            "dueling": spec.dueling,
            "seed": spec.seed,
        },
        "layers": layers,
        "heads": heads,
    }
    return json.dumps(doc).encode("utf-8")


def load(blob: bytes) -> QNetwork:
    try:
        doc = json.loads(blob.decode("utf-8"))
        if doc["version"] != 1:
            raise CorruptCheckpoint(f"unsupported version {doc['version']}")
        s = doc["spec"]
        spec = NetSpec(int(s["input_dim"]), tuple(s["hidden_dims"]),
                       int(s["output_dim"]), bool(s["dueling"]), int(s["seed"]))
        params: list[np.ndarray] = []
        for layer in doc["layers"]:
            params.append(np.asarray(layer["w"], dtype=float))
            params.append(np.asarray(layer["b"], dtype=float))
        if spec.dueling:
            for name in ("advantage", "value"):
                params.append(np.asarray(doc["heads"][name]["w"], dtype=float))
                params.append(np.asarray(doc["heads"][name]["b"], dtype=float))
    except CorruptCheckpoint:
        raise
    except Exception as exc:
        raise CorruptCheckpoint(f"unreadable checkpoint: {exc}") from exc

    h1, h2 = spec.hidden_dims
    shapes = [(spec.input_dim, h1), (h1,), (h1, h2), (h2,)]
    if spec.dueling:
        shapes += [(h2, spec.output_dim), (spec.output_dim,), (h2, 1), (1,)]
    else:
        shapes += [(h2, spec.output_dim), (spec.output_dim,)]
    if len(params) != len(shapes) or any(p.shape != s for p, s in zip(params, shapes)):
        raise CorruptCheckpoint("parameter shapes inconsistent with spec")
    return QNetwork(spec, params)


def save_file(net: QNetwork, path) -> None:
    with open(path, "wb") as fh:
        fh.write(save(net))


def load_file(path) -> QNetwork:
    with open(path, "rb") as fh:
        return load(fh.read())
