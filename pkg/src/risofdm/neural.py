"""Neural reflector configurator: features, forward pass, hand backprop.

The network maps the per-subcarrier phase misalignment between the direct
and the reflected channel (an N x K feature matrix) to one phase per
reflector.  Input layer: multiply the features by a learnable K x N matrix,
sum the columns of the product, pass through ReLU and add a bias.  Each of
the L hidden layers is an elementwise multiply, ReLU and bias add.  The
configured weights are ``exp(j theta_L)``.

Training minimizes the negative achievable rate under uniform power.  The
architecture is fixed, so gradients are spelled out by hand instead of
pulling in an autodiff framework; the ReLU subgradient at exactly zero is
taken as zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelRealization, block_spectra
from .configurators import RisConfiguration
from .scene import Scenario, wrap_phase


@dataclass(frozen=True)
class NnParameters:
    """Learnable parameters: input matrix/bias plus L per-element layers."""

    w0: np.ndarray                      # (K, N)
    b0: np.ndarray                      # (N,)
    layer_weights: tuple[np.ndarray, ...]  # L x (N,)
    layer_biases: tuple[np.ndarray, ...]   # L x (N,)

    def __post_init__(self):
        if self.w0.ndim != 2 or self.b0.ndim != 1 or self.w0.shape[1] != self.b0.shape[0]:
            raise ValueError("w0 must be (K, N) and b0 (N,)")
        if len(self.layer_weights) != len(self.layer_biases) or not self.layer_weights:
            raise ValueError("need matching, non-empty layer weight/bias lists")
        for w, b in zip(self.layer_weights, self.layer_biases):
            if w.shape != self.b0.shape or b.shape != self.b0.shape:
                raise ValueError("layer vectors must all be (N,)")
        for arr in (self.w0, self.b0, *self.layer_weights, *self.layer_biases):
            if not np.all(np.isfinite(arr)):
                raise ValueError("parameters must be finite")

    @property
    def depth(self) -> int:
        return len(self.layer_weights)

    def copy(self) -> "NnParameters":
        return NnParameters(
            self.w0.copy(), self.b0.copy(),
            tuple(w.copy() for w in self.layer_weights),
            tuple(b.copy() for b in self.layer_biases),
        )


@dataclass(frozen=True)
class TrainSettings:
    learn_rate: float = 0.03  # output phases are order-pi quantities
    lr_final_fraction: float = 1e-3  # geometric decay target over the epochs
    batch_size: int = 16
    epochs: int = 150
    val_fraction: float = 0.2
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    depth: int = 2
    w0_init_scale: float | None = None  # default 0.01/K
    w0_decay: float = 4.0  # decoupled shrinkage of the feature path, x lr


def init_params(n_subcarriers: int, n_reflectors: int, depth: int,
                rng: np.random.Generator, w0_scale: float | None = None) -> NnParameters:
    """Start as a near-constant map: the input matrix injects almost no
    feature noise, so early training settles the biases before the feature
    path earns its weight."""
    scale = 0.01 / n_subcarriers if w0_scale is None else w0_scale
    return NnParameters(
        w0=scale * rng.standard_normal((n_subcarriers, n_reflectors)),
        b0=np.zeros(n_reflectors),
        layer_weights=tuple(np.ones(n_reflectors) for _ in range(depth)),
        layer_biases=tuple(np.zeros(n_reflectors) for _ in range(depth)),
    )


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(0.0, x)


def build_features(chan: ChannelRealization, block: int, n_subcarriers: int) -> np.ndarray:
    """Phase misalignment per reflector and subcarrier, (N, K) in [-pi, pi).

    Entry (n, i) is the phase the reflected response of element n must turn
    through to line up with the direct response on subcarrier i.  Responses
    of zero magnitude contribute a zero reference phase.
    """
    d, q = block_spectra(chan, block, n_subcarriers)
    return wrap_phase(np.angle(d)[None, :] - np.angle(q).T)


def forward(params: NnParameters, features: np.ndarray):
    """Network output ``theta_L`` (N,) and the cache needed for backprop."""
    if features.shape != (params.b0.shape[0], params.w0.shape[0]):
        raise ValueError(
            f"features shape {features.shape} does not match parameters "
            f"({params.b0.shape[0]}, {params.w0.shape[0]})"
        )
    col_sum_w = params.w0.sum(axis=1)          # summing the product's columns
    pre_input = features @ col_sum_w           # (N,)
    theta = relu(pre_input) + params.b0
    pre_layers = []
    for w, b in zip(params.layer_weights, params.layer_biases):
        z = theta * w
        pre_layers.append((theta, z))
        theta = relu(z) + b
    cache = (features, pre_input, pre_layers)
    return theta, cache


def _rate_weighted_phase_grad(theta, d, q, powers, noise, prefactor):
    """Rate and its gradient w.r.t. the output phases for one block."""
    omega = np.exp(1j * theta)
    combined = d + q @ omega
    snr = powers * np.abs(combined) ** 2 / noise
    rate = prefactor * float(np.sum(np.log2(1.0 + snr)))
    lam = prefactor * powers / (noise * np.log(2.0) * (1.0 + snr))
    grad_theta = -2.0 * np.imag(omega * (q.T @ (lam * np.conj(combined))))
    return rate, grad_theta


def _zero_grads(params: NnParameters) -> dict:
    return {
        "w0": np.zeros_like(params.w0),
        "b0": np.zeros_like(params.b0),
        "layer_weights": [np.zeros_like(w) for w in params.layer_weights],
        "layer_biases": [np.zeros_like(b) for b in params.layer_biases],
    }


def _backprop(params: NnParameters, cache, grad_theta: np.ndarray, grads: dict) -> None:
    features, pre_input, pre_layers = cache
    g = grad_theta
    for idx in range(params.depth - 1, -1, -1):
        theta_prev, z = pre_layers[idx]
        grads["layer_biases"][idx] += g
        gated = g * (z > 0.0)
        grads["layer_weights"][idx] += gated * theta_prev
        g = gated * params.layer_weights[idx]
    grads["b0"] += g
    gated = g * (pre_input > 0.0)
    # every column of w0 receives the same gradient: only the column sum
    # enters the forward pass
    grads["w0"] += np.outer(features.T @ gated, np.ones(params.w0.shape[1]))


def loss_and_gradients(params: NnParameters, chan: ChannelRealization,
                       scenario: Scenario, alloc=None):
    """Negative achievable rate of the network's configuration and its
    gradients w.r.t. every parameter.

    Power is uniform unless an explicit allocation is supplied.  Returns
    ``(loss, grads)`` with ``grads`` keyed like the parameter fields.
    """
    k = scenario.n_subcarriers
    noise = scenario.bandwidth_hz * scenario.noise_density
    xi = k + chan.n_taps - 1
    prefactor = scenario.bandwidth_hz / xi
    if alloc is None:
        powers = np.full((chan.n_blocks, k), scenario.power_budget / k)
    else:
        powers = np.asarray(alloc.powers, dtype=float)
    grads = _zero_grads(params)
    total_rate = 0.0
    for block in range(1, chan.n_blocks + 1):
        d, q = block_spectra(chan, block, k)
        features = build_features(chan, block, k)
        theta, cache = forward(params, features)
        rate, grad_theta = _rate_weighted_phase_grad(
            theta, d, q, powers[block - 1], noise, prefactor
        )
        total_rate += rate
        _backprop(params, cache, -grad_theta, grads)  # loss = -rate
    loss = -total_rate
    if not np.isfinite(loss):
        raise RuntimeError(f"non-finite training loss {loss}")
    return loss, grads


def infer_config(params: NnParameters, chan: ChannelRealization, n_subcarriers: int,
                 time_invariant: bool = False) -> RisConfiguration:
    """Run the network per block (or once, replicated) and wrap the phases."""
    if time_invariant:
        theta, _ = forward(params, build_features(chan, 1, n_subcarriers))
        rows = np.tile(wrap_phase(theta), (chan.n_blocks, 1))
        return RisConfiguration(rows, time_invariant=True)
    rows = []
    for block in range(1, chan.n_blocks + 1):
        theta, _ = forward(params, build_features(chan, block, n_subcarriers))
        rows.append(wrap_phase(theta))
    return RisConfiguration(np.vstack(rows), time_invariant=False)


def mean_rate(params: NnParameters, dataset, scenario: Scenario) -> float:
    """Average per-realization rate of the network's configurations."""
    total = 0.0
    for chan in dataset:
        loss, _ = loss_and_gradients(params, chan, scenario)
        total -= loss
    return total / len(dataset)


def train(dataset, scenario: Scenario, settings: TrainSettings,
          rng: np.random.Generator) -> NnParameters:
    """Mini-batch adaptive-moment descent; returns the best-validation
    parameters seen.  Deterministic for a given generator state."""
    if not dataset:
        raise ValueError("training needs at least one channel realization")
    params = init_params(scenario.n_subcarriers, scenario.n_reflectors,
                         settings.depth, rng, settings.w0_init_scale)
    order = rng.permutation(len(dataset))
    n_val = int(round(settings.val_fraction * len(dataset)))
    val_idx = order[:n_val] if n_val else order[: min(1, len(order))]
    train_idx = order[n_val:] if n_val and len(order) > n_val else order
    train_set = [dataset[i] for i in train_idx]
    val_set = [dataset[i] for i in val_idx]

    moments1 = _zero_grads(params)
    moments2 = _zero_grads(params)
    step = 0
    best = params.copy()
    best_rate = mean_rate(best, val_set, scenario)
    for epoch in range(settings.epochs):
        # geometric decay lets the parameters settle instead of diffusing
        # around the optimum under the adaptive step normalization
        decay = settings.lr_final_fraction ** (epoch / max(settings.epochs - 1, 1))
        lr = settings.learn_rate * decay
        perm = rng.permutation(len(train_set))
        for start in range(0, len(train_set), settings.batch_size):
            batch = [train_set[i] for i in perm[start:start + settings.batch_size]]
            grads = _zero_grads(params)
            for chan in batch:
                _, g = loss_and_gradients(params, chan, scenario)
                for key in ("w0", "b0"):
                    grads[key] += g[key] / len(batch)
                for idx in range(params.depth):
                    grads["layer_weights"][idx] += g["layer_weights"][idx] / len(batch)
                    grads["layer_biases"][idx] += g["layer_biases"][idx] / len(batch)
            step += 1
            params = _adam_step(params, grads, moments1, moments2, step, lr, settings)
        val_rate = mean_rate(params, val_set, scenario)
        if val_rate > best_rate:
            best, best_rate = params.copy(), val_rate
    return best


def _adam_update(m, v, g, step, lr, settings):
    m[:] = settings.adam_beta1 * m + (1.0 - settings.adam_beta1) * g
    v[:] = settings.adam_beta2 * v + (1.0 - settings.adam_beta2) * g * g
    m_hat = m / (1.0 - settings.adam_beta1 ** step)
    v_hat = v / (1.0 - settings.adam_beta2 ** step)
    return lr * m_hat / (np.sqrt(v_hat) + settings.adam_eps)


def _adam_step(params: NnParameters, grads: dict, m1: dict, m2: dict, step: int,
               lr: float, settings: TrainSettings) -> NnParameters:
    # only the column sum of w0 enters the forward pass and all columns get
    # identical gradients, so their steps add up: scale by the column count
    # to move that effective weight at the nominal rate
    lr_w0 = lr / params.w0.shape[1]
    new_w0 = params.w0 - _adam_update(m1["w0"], m2["w0"], grads["w0"], step, lr_w0, settings)
    # the feature path sits on a nearly flat direction of the rate landscape;
    # without shrinkage it diffuses under the adaptive steps and feeds input
    # noise straight into the configured phases
    new_w0 = new_w0 * (1.0 - lr * settings.w0_decay)
    new_b0 = params.b0 - _adam_update(m1["b0"], m2["b0"], grads["b0"], step, lr, settings)
    new_w, new_b = [], []
    for idx in range(params.depth):
        new_w.append(params.layer_weights[idx] - _adam_update(
            m1["layer_weights"][idx], m2["layer_weights"][idx],
            grads["layer_weights"][idx], step, lr, settings))
        new_b.append(params.layer_biases[idx] - _adam_update(
            m1["layer_biases"][idx], m2["layer_biases"][idx],
            grads["layer_biases"][idx], step, lr, settings))
    return NnParameters(new_w0, new_b0, tuple(new_w), tuple(new_b))


def save_params(params: NnParameters, path) -> None:
    """Plain-text layout: a shape line ``K N L`` followed by the row-major
    w0 rows, b0, then alternating per-layer weight and bias rows."""
    k, n = params.w0.shape
    lines = [f"{k} {n} {params.depth}"]
    for row in params.w0:
        lines.append(" ".join(repr(float(x)) for x in row))
    lines.append(" ".join(repr(float(x)) for x in params.b0))
    for w, b in zip(params.layer_weights, params.layer_biases):
        lines.append(" ".join(repr(float(x)) for x in w))
        lines.append(" ".join(repr(float(x)) for x in b))
    try:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write parameters to {path}: {exc}") from exc


def load_params(path) -> NnParameters:
    try:
        with open(path, "r", encoding="ascii") as fh:
            lines = [ln.strip() for ln in fh if ln.strip()]
    except OSError as exc:
        raise OSError(f"cannot read parameters from {path}: {exc}") from exc
    k, n, depth = (int(x) for x in lines[0].split())
    rows = [np.array([float(x) for x in ln.split()]) for ln in lines[1:]]
    w0 = np.vstack(rows[:k])
    b0 = rows[k]
    weights, biases = [], []
    for idx in range(depth):
        weights.append(rows[k + 1 + 2 * idx])
        biases.append(rows[k + 2 + 2 * idx])
    return NnParameters(w0, b0, tuple(weights), tuple(biases))
