"""Dense tanh networks with hand-written backprop, Adam, and finite-difference checks."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError


class DenseNetwork:
    """Fully connected chain: tanh on hidden layers, identity on the output layer.

    Weights are stored as ``(fan_in, fan_out)`` so a batch ``(B, fan_in)`` maps
    with ``x @ W + b``.
    """

    def __init__(self, layer_sizes, weights=None, biases=None, seed=0):
        self.layer_sizes = [int(s) for s in layer_sizes]
        if len(self.layer_sizes) < 2 or any(s <= 0 for s in self.layer_sizes):
            raise InvalidArgumentError(f"bad layer sizes {layer_sizes}")
        if weights is None:
            rng = np.random.default_rng(seed)
            weights = [rng.normal(0.0, 1.0 / np.sqrt(a), size=(a, b))
                       for a, b in zip(self.layer_sizes[:-1], self.layer_sizes[1:])]
            biases = [np.zeros(b) for b in self.layer_sizes[1:]]
        self.weights = [np.array(w, dtype=float) for w in weights]
        self.biases = [np.array(b, dtype=float) for b in biases]
        for w, b, a, c in zip(self.weights, self.biases, self.layer_sizes[:-1], self.layer_sizes[1:]):
            if w.shape != (a, c) or b.shape != (c,):
                raise InvalidArgumentError("parameter shapes do not match layer sizes")

    @property
    def n_in(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_out(self) -> int:
        return self.layer_sizes[-1]

    def params(self) -> list:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def copy(self) -> "DenseNetwork":
        return DenseNetwork(self.layer_sizes, [w.copy() for w in self.weights],
                            [b.copy() for b in self.biases])

    def forward(self, x, keep=False):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.n_in:
            raise InvalidArgumentError(f"input width {x.shape[-1]} != {self.n_in}")
        acts = [x]
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < last:
                h = np.tanh(h)
            acts.append(h)
        return (h, acts) if keep else h

    def backward(self, acts, upstream):
        """Gradients for the cached forward pass ``acts``.

        Returns ``(param_grads, input_grad)`` with ``param_grads`` ordered like
        :meth:`params`. Batched activations sum their gradients over the batch.
        """
        g = np.asarray(upstream, dtype=float)
        if g.shape != acts[-1].shape:
            raise InvalidArgumentError(f"upstream shape {g.shape} != output shape {acts[-1].shape}")
        grads = [None] * (2 * len(self.weights))
        for i in range(len(self.weights) - 1, -1, -1):
            if i < len(self.weights) - 1:
                g = g * (1.0 - acts[i + 1] ** 2)
            a = acts[i]
            if a.ndim == 1:
                grads[2 * i] = np.outer(a, g)
                grads[2 * i + 1] = g.copy()
            else:
                grads[2 * i] = a.T @ g
                grads[2 * i + 1] = g.sum(axis=0)
            g = g @ self.weights[i].T
        return grads, g

    def __call__(self, x):
        return self.forward(x)

    def to_dict(self) -> dict:
        return {"layer_sizes": self.layer_sizes,
                "weights": [w.tolist() for w in self.weights],
                "biases": [b.tolist() for b in self.biases]}

    @classmethod
    def from_dict(cls, d: dict) -> "DenseNetwork":
        return cls(d["layer_sizes"], d["weights"], d["biases"])

    def equals(self, other: "DenseNetwork") -> bool:
        return (self.layer_sizes == other.layer_sizes
                and all(np.array_equal(a, b) for a, b in zip(self.params(), other.params())))


@dataclass
class AdamState:
    m: list = field(repr=False)
    v: list = field(repr=False)
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0

    @classmethod
    def zeros_like(cls, params, **hyper) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params], **hyper)


def adam_step(params: list, grads: list, state: AdamState):
    """In-place bias-corrected Adam update of ``params``; returns ``(params, state)``.

    ``params`` can be a network's :meth:`DenseNetwork.params` list or any list
    of arrays updated together.
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise InvalidArgumentError("gradients do not match the parameter list")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if g.shape != p.shape:
            raise InvalidArgumentError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
        if not np.all(np.isfinite(p)):
            raise FloatingPointError("non-finite parameter after Adam update")
    return params, state


def gradient_check(loss_fn, params: list, analytic: list, h: float = 1e-5,
                   max_entries: int | None = None, seed: int = 0, floor: float = 1e-6) -> float:
    """Max relative error between ``analytic`` gradients and central differences.

    ``loss_fn()`` must read the arrays in ``params`` (they are perturbed in place
    and restored). ``max_entries`` samples a subset of coordinates per array.
    The relative error is ``|a - n| / max(|a| + |n|, floor)``; the floor keeps
    near-zero entries from being judged on round-off alone.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for p, g in zip(params, analytic):
        flat = p.reshape(-1)
        gflat = np.asarray(g).reshape(-1)
        idx = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            idx = rng.choice(flat.size, size=max_entries, replace=False)
        for i in idx:
            orig = flat[i]
            flat[i] = orig + h
            up = loss_fn()
            flat[i] = orig - h
            down = loss_fn()
            flat[i] = orig
            num = (up - down) / (2.0 * h)
            err = abs(gflat[i] - num) / max(abs(gflat[i]) + abs(num), floor)
            worst = max(worst, err)
    return worst
