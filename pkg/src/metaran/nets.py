"""Minimal dense-network substrate: forward, backprop, Adam, soft updates.

Networks are tanh MLPs with either a tanh head (actor) or identity head
(critic). Parameters live as a flat list [W1, b1, W2, b2, ...] of float64
arrays; gradients use the same layout. Everything is double precision.
"""

import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ContractViolation

SNAPSHOT_VERSION = 1


@dataclass
class DenseNetwork:
    layer_sizes: tuple
    weights: list  # per-layer (fan_in, fan_out) matrices
    biases: list  # per-layer (fan_out,) vectors
    output_activation: str = "tanh"  # "tanh" or "identity"

    def parameters(self) -> list:
        """Canonical flat list [W1, b1, W2, b2, ...] (views, not copies)."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend([w, b])
        return out

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def copy(self) -> "DenseNetwork":
        return DenseNetwork(
            layer_sizes=self.layer_sizes,
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            output_activation=self.output_activation,
        )


def init_network(layer_sizes, seed: int, output_activation: str = "tanh") -> DenseNetwork:
    """Uniform +-1/sqrt(fan_in) weights, zero biases; deterministic per seed."""
    sizes = tuple(int(s) for s in layer_sizes)
    if len(sizes) < 2:
        raise ConfigurationError("need at least an input and an output layer")
    if any(s <= 0 for s in sizes):
        raise ConfigurationError("layer sizes must be positive")
    if output_activation not in ("tanh", "identity"):
        raise ConfigurationError(f"unknown output activation {output_activation!r}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return DenseNetwork(sizes, weights, biases, output_activation)


def forward(net: DenseNetwork, x: np.ndarray):
    """Returns (output, tape). Accepts a single vector or a (B, d) batch."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.shape[1] != net.layer_sizes[0]:
        raise ContractViolation(
            f"input width {x.shape[1]} != first layer size {net.layer_sizes[0]}"
        )
    inputs, preacts = [], []
    h = x
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        inputs.append(h)
        z = h @ w + b
        preacts.append(z)
        if i < last or net.output_activation == "tanh":
            h = np.tanh(z)
        else:
            h = z
    tape = {"inputs": inputs, "preacts": preacts, "single": single}
    return (h[0] if single else h), tape


def backward(net: DenseNetwork, tape, output_grad: np.ndarray):
    """Reverse-mode gradients.

    output_grad is dL/d(output) with the same shape forward produced.
    Returns (param_grads in the parameters() layout, input_grad).
    """
    g = np.asarray(output_grad, dtype=float)
    if tape["single"]:
        g = g[None, :]
    last = len(net.weights) - 1
    if g.shape != tape["preacts"][last].shape:
        raise ContractViolation("output_grad shape does not match the forward pass")
    grads = [None] * (2 * len(net.weights))
    for i in range(last, -1, -1):
        z = tape["preacts"][i]
        if i < last or net.output_activation == "tanh":
            g = g * (1.0 - np.tanh(z) ** 2)
        grads[2 * i] = tape["inputs"][i].T @ g
        grads[2 * i + 1] = g.sum(axis=0)
        g = g @ net.weights[i].T
    input_grad = g[0] if tape["single"] else g
    return grads, input_grad


@dataclass
class AdamState:
    m: list
    v: list
    step_count: int = 0
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8


def init_adam(params: list, lr: float = 1e-4, beta1: float = 0.9,
              beta2: float = 0.999, epsilon: float = 1e-8) -> AdamState:
    return AdamState(
        m=[np.zeros_like(p) for p in params],
        v=[np.zeros_like(p) for p in params],
        lr=lr,
        beta1=beta1,
        beta2=beta2,
        epsilon=epsilon,
    )


def adam_step(params: list, grads: list, state: AdamState) -> list:
    """Bias-corrected Adam update, in place; returns params."""
    if len(params) != len(grads) or any(
        p.shape != g.shape for p, g in zip(params, grads)
    ):
        raise ContractViolation("parameter/gradient shape mismatch")
    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        m_hat = m / (1.0 - b1**t)
        v_hat = v / (1.0 - b2**t)
        p -= state.lr * m_hat / (np.sqrt(v_hat) + state.epsilon)
    return params


def soft_update(target_params: list, source_params: list, tau: float) -> list:
    """target <- (1 - tau) * target + tau * source, in place."""
    if len(target_params) != len(source_params) or any(
        t.shape != s.shape for t, s in zip(target_params, source_params)
    ):
        raise ContractViolation("target/source shape mismatch")
    for t, s in zip(target_params, source_params):
        t *= 1.0 - tau
        t += tau * s
    return target_params


def params_as_vector(net: DenseNetwork) -> np.ndarray:
    return np.concatenate([p.ravel() for p in net.parameters()])


def vector_as_params(net: DenseNetwork, vec: np.ndarray) -> DenseNetwork:
    """New network with net's shape and vec's values."""
    out = net.copy()
    set_params_from_vector(out, vec)
    return out


def set_params_from_vector(net: DenseNetwork, vec: np.ndarray) -> None:
    vec = np.asarray(vec, dtype=float)
    if vec.shape != (net.num_parameters(),):
        raise ContractViolation(
            f"vector length {vec.size} != parameter count {net.num_parameters()}"
        )
    offset = 0
    for p in net.parameters():
        p[...] = vec[offset : offset + p.size].reshape(p.shape)
        offset += p.size


def save_network(path, net: DenseNetwork) -> None:
    """Versioned snapshot: layer sizes header + flat parameter vector."""
    np.savez(
        path,
        format_version=SNAPSHOT_VERSION,
        layer_sizes=np.array(net.layer_sizes),
        output_activation=net.output_activation,
        params=params_as_vector(net),
    )


def load_network(path) -> DenseNetwork:
    with np.load(path) as data:
        if int(data["format_version"]) != SNAPSHOT_VERSION:
            raise ConfigurationError("unsupported snapshot version")
        sizes = tuple(int(s) for s in data["layer_sizes"])
        net = init_network(sizes, seed=0, output_activation=str(data["output_activation"]))
        set_params_from_vector(net, data["params"])
    return net


def state_as_blob(state: AdamState) -> dict:
    """Adam state as arrays + a JSON scalar header (for checkpoints)."""
    header = json.dumps(
        {
            "step_count": state.step_count,
            "lr": state.lr,
            "beta1": state.beta1,
            "beta2": state.beta2,
            "epsilon": state.epsilon,
            "n": len(state.m),
        }
    )
    blob = {"header": header}
    for i, (m, v) in enumerate(zip(state.m, state.v)):
        blob[f"m{i}"] = m
        blob[f"v{i}"] = v
    return blob


def state_from_blob(blob) -> AdamState:
    meta = json.loads(str(blob["header"]))
    m = [np.array(blob[f"m{i}"]) for i in range(meta["n"])]
    v = [np.array(blob[f"v{i}"]) for i in range(meta["n"])]
    return AdamState(
        m=m,
        v=v,
        step_count=meta["step_count"],
        lr=meta["lr"],
        beta1=meta["beta1"],
        beta2=meta["beta2"],
        epsilon=meta["epsilon"],
    )
