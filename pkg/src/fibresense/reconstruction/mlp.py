"""Small fully connected regressor with hand-written backpropagation.

Parameters are plain numpy arrays. The training loss mirrors the usual Keras
setup: mean squared error over samples and outputs plus per-layer kernel
penalties ``l1 * sum|W| + l2 * sum W^2`` (biases are never penalised).
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

FORMAT_VERSION = 1
ACTIVATIONS = ("tanh", "relu", "linear")


class TrainingDiverged(RuntimeError):
    pass


def _act(name, z):
    if name == "tanh":
        return np.tanh(z)
    if name == "relu":
        return np.maximum(z, 0.0)
    return z


def _act_grad(name, z, a):
    if name == "tanh":
        return 1.0 - a * a
    if name == "relu":
        return (z > 0).astype(z.dtype)
    return np.ones_like(z)


@dataclass
class MLPModel:
    """Layer ``k`` maps ``sizes[k] -> sizes[k + 1]``; weights are ``(in, out)``."""

    sizes: list
    activations: list
    weights: list
    biases: list
    l1: list
    l2: list
    x_mean: np.ndarray
    x_std: np.ndarray

    def __post_init__(self):
        nl = len(self.sizes) - 1
        if not (len(self.activations) == len(self.weights) == len(self.biases) == nl):
            raise ValueError("one activation, weight and bias per layer")
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (self.sizes[k], self.sizes[k + 1]) or b.shape != (self.sizes[k + 1],):
                raise ValueError(f"layer {k} dimensions do not chain")
        bad = [a for a in self.activations if a not in ACTIVATIONS]
        if bad:
            raise ValueError(f"unknown activations {bad}")
        self.l1 = list(self.l1) if self.l1 else [0.0] * nl
        self.l2 = list(self.l2) if self.l2 else [0.0] * nl

    @property
    def n_in(self):
        return self.sizes[0]

    @property
    def n_out(self):
        return self.sizes[-1]

    def penalty(self):
        return sum(a * np.abs(w).sum() + b * np.square(w).sum()
                   for w, a, b in zip(self.weights, self.l1, self.l2))

    def param_list(self):
        return [p for wb in zip(self.weights, self.biases) for p in wb]

    def copy(self):
        return MLPModel(list(self.sizes), list(self.activations),
                        [w.copy() for w in self.weights], [b.copy() for b in self.biases],
                        list(self.l1), list(self.l2), self.x_mean.copy(), self.x_std.copy())

    def to_dict(self):
        return {
            "format": "fibresense-mlp",
            "version": FORMAT_VERSION,
            "sizes": list(map(int, self.sizes)),
            "activations": list(self.activations),
            "l1": [float(x) for x in self.l1],
            "l2": [float(x) for x in self.l2],
            "x_mean": [float(x) for x in self.x_mean],
            "x_std": [float(x) for x in self.x_std],
            # kernels flattened row-major, shape (in, out)
            "weights": [[float(x) for x in w.ravel(order="C")] for w in self.weights],
            "biases": [[float(x) for x in b] for b in self.biases],
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != "fibresense-mlp" or d.get("version") != FORMAT_VERSION:
            raise ValueError("not a fibresense MLP model file (or unsupported version)")
        sizes = d["sizes"]
        weights = [np.array(w, dtype=float).reshape(sizes[k], sizes[k + 1])
                   for k, w in enumerate(d["weights"])]
        return cls(sizes, d["activations"], weights, [np.array(b, dtype=float) for b in d["biases"]],
                   d["l1"], d["l2"], np.array(d["x_mean"]), np.array(d["x_std"]))

    def save(self, path):
        from ..io import atomic_write_text

        atomic_write_text(path, json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def init_mlp(sizes, activations, rng, l1=None, l2=None, x_mean=None, x_std=None):
    """Fan-in scaled uniform weights ``U(-sqrt(3 / fan_in), +)``, zero biases."""
    weights, biases = [], []
    for a, b in zip(sizes[:-1], sizes[1:]):
        lim = math.sqrt(3.0 / a)
        weights.append(rng.uniform(-lim, lim, size=(a, b)))
        biases.append(np.zeros(b))
    nl = len(sizes) - 1
    return MLPModel(
        list(sizes), list(activations), weights, biases,
        l1 or [0.0] * nl, l2 or [0.0] * nl,
        np.zeros(sizes[0]) if x_mean is None else np.asarray(x_mean, dtype=float),
        np.ones(sizes[0]) if x_std is None else np.asarray(x_std, dtype=float),
    )


def normalize(m, x):
    return (x - m.x_mean) / m.x_std


def mlp_forward(m, x):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != m.n_in:
        raise ValueError(f"model expects {m.n_in} inputs, got {x.shape[1]}")
    a = normalize(m, x)
    for w, b, act in zip(m.weights, m.biases, m.activations):
        a = _act(act, a @ w + b)
    return a[0] if single else a


def loss_and_grads(m, xn, y, with_penalty=True, l1_grad=True):
    """Training loss and parameter gradients on already-normalised inputs.

    Returns ``(loss, [dW0, db0, dW1, db1, ...])``. The l1 subgradient at
    exactly zero is taken as zero. ``with_penalty=False`` leaves the
    regularisation term out of the returned loss (not the gradients);
    ``l1_grad=False`` drops the l1 subgradient for proximal training.
    """
    zs, acts = [], [xn]
    a = xn
    for w, b, act in zip(m.weights, m.biases, m.activations):
        z = a @ w + b
        a = _act(act, z)
        zs.append(z)
        acts.append(a)
    err = a - y
    scale = 2.0 / err.size
    loss = float(np.mean(err * err))
    if with_penalty:
        loss += m.penalty()
    delta = scale * err
    grads = [None] * (2 * len(m.weights))
    for k in range(len(m.weights) - 1, -1, -1):
        delta = delta * _act_grad(m.activations[k], zs[k], acts[k + 1])
        gw = acts[k].T @ delta
        if l1_grad and m.l1[k]:
            gw = gw + m.l1[k] * np.sign(m.weights[k])
        if m.l2[k]:
            gw = gw + 2.0 * m.l2[k] * m.weights[k]
        grads[2 * k] = gw
        grads[2 * k + 1] = delta.sum(axis=0)
        if k:
            delta = delta @ m.weights[k].T
    return loss, grads


class Adagrad:
    def __init__(self, params, lr=0.1, eps=1e-8):
        self.lr, self.eps = lr, eps
        self.acc = [np.zeros_like(p) for p in params]

    def step(self, params, grads):
        for p, g, s in zip(params, grads, self.acc):
            s += g * g
            p -= self.lr * g / (np.sqrt(s) + self.eps)


class Adam:
    def __init__(self, params, lr=0.005, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        c1 = 1 - self.b1 ** self.t
        c2 = 1 - self.b2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.b1
            m += (1 - self.b1) * g
            v *= self.b2
            v += (1 - self.b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


class SGD:
    def __init__(self, params, lr=0.01):
        self.lr = lr

    def step(self, params, grads):
        for p, g in zip(params, grads):
            p -= self.lr * g


OPTIMIZERS = {"adagrad": Adagrad, "adam": Adam, "sgd": SGD}


@dataclass
class TrainConfig:
    batch_size: int = 256
    optimizer: str = "adagrad"
    lr: float = 0.1
    patience: int = 50
    max_epochs: int = 2000
    output_weights: tuple = ()
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1 or self.patience < 1 or self.max_epochs < 1:
            raise ValueError("batch_size, patience and max_epochs must be >= 1")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.output_weights and not math.isclose(sum(self.output_weights), 1.0, rel_tol=1e-9):
            raise ValueError("output weights must sum to 1")

    @classmethod
    def from_dict(cls, d):
        d = dict(d or {})
        if "output_weights" in d:
            d["output_weights"] = tuple(float(x) for x in d["output_weights"])
        return cls(**d)

    def to_dict(self):
        return {"batch_size": self.batch_size, "optimizer": self.optimizer, "lr": self.lr,
                "patience": self.patience, "max_epochs": self.max_epochs,
                "output_weights": list(self.output_weights), "seed": self.seed}


@dataclass
class Architecture:
    hidden: tuple = (16, 32)
    activations: tuple = ("tanh", "relu", "linear")
    l1: tuple = (0.0, 0.0, 0.0)
    l2: tuple = (0.0, 1e-5, 0.0)

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: tuple(v) for k, v in (d or {}).items()})

    def to_dict(self):
        return {k: list(getattr(self, k)) for k in ("hidden", "activations", "l1", "l2")}


# recipes from the bench (strain) and garment (joint-angle) experiments; the
# epoch caps are compute bounds, early stopping usually ends runs first
STRAIN_ARCH = Architecture()
STRAIN_TRAIN = TrainConfig(batch_size=256, optimizer="adagrad", lr=0.1, patience=50,
                           max_epochs=500)
JOINT_ARCH = Architecture(activations=("relu", "relu", "linear"),
                          l1=(0.0, 0.04, 0.0), l2=(0.0, 0.15, 0.0))
JOINT_TRAIN = TrainConfig(batch_size=64, optimizer="adam", lr=0.005, patience=250,
                          max_epochs=600, output_weights=(0.25, 0.25, 0.5))


@dataclass
class History:
    train_loss: list = field(default_factory=list)
    val_score: list = field(default_factory=list)
    best_epoch: int = -1
    stopped_epoch: int = -1


def _val_score(m, xn, y, weights):
    pred = xn
    for w, b, act in zip(m.weights, m.biases, m.activations):
        pred = _act(act, pred @ w + b)
    mse = np.mean((pred - y) ** 2, axis=0)
    return float(mse @ weights) if weights is not None else float(mse.mean())


def _shrink(m, lr):
    # proximal l1 step: the subgradient alone leaves weights hovering around
    # zero, soft-thresholding sets them exactly to zero
    for w, a in zip(m.weights, m.l1):
        if a:
            np.copyto(w, np.sign(w) * np.maximum(np.abs(w) - lr * a, 0.0))


def mlp_train(x_train, y_train, x_val, y_val, arch=STRAIN_ARCH, cfg=STRAIN_TRAIN):
    """Mini-batch training with early stopping on validation MSE.

    Inputs are Z-scored with training-split statistics stored in the model.
    The best-validation parameters are restored at the end. l1 acts through a
    soft-threshold of ``lr * l1`` after every optimizer step, l2 through the
    gradient. Deterministic for a given ``cfg.seed``.
    """
    x_train = np.asarray(x_train, dtype=float)
    y_train = np.atleast_2d(np.asarray(y_train, dtype=float).T).T
    x_val = np.asarray(x_val, dtype=float)
    y_val = np.atleast_2d(np.asarray(y_val, dtype=float).T).T
    if len(x_train) == 0:
        raise ValueError("empty training split")
    if len(x_val) == 0:
        raise ValueError("empty validation split")
    if not (np.all(np.isfinite(y_train)) and np.all(np.isfinite(y_val))):
        raise ValueError("non-finite targets")
    init_ss, shuffle_ss = np.random.SeedSequence(cfg.seed).spawn(2)
    mean = x_train.mean(axis=0)
    std = x_train.std(axis=0)
    std[std == 0] = 1.0
    sizes = [x_train.shape[1], *arch.hidden, y_train.shape[1]]
    m = init_mlp(sizes, arch.activations, np.random.default_rng(init_ss),
                 list(arch.l1), list(arch.l2), mean, std)
    xn = normalize(m, x_train)
    xv = normalize(m, x_val)
    weights = np.asarray(cfg.output_weights) if cfg.output_weights else None
    if weights is not None and len(weights) != y_train.shape[1]:
        raise ValueError("one output weight per target column")
    params = m.param_list()
    opt = OPTIMIZERS[cfg.optimizer](params, lr=cfg.lr)
    shuffle = np.random.default_rng(shuffle_ss)
    hist = History()
    best, best_score, since = m.copy(), math.inf, 0
    n = len(xn)
    for epoch in range(cfg.max_epochs):
        order = shuffle.permutation(n)
        total = 0.0
        for a in range(0, n, cfg.batch_size):
            idx = order[a:a + cfg.batch_size]
            loss, grads = loss_and_grads(m, xn[idx], y_train[idx], with_penalty=False, l1_grad=False)
            if not math.isfinite(loss):
                raise TrainingDiverged(f"loss became {loss} at epoch {epoch}")
            opt.step(params, grads)
            _shrink(m, cfg.lr)
            total += loss * len(idx)
        hist.train_loss.append(total / n + m.penalty())
        score = _val_score(m, xv, y_val, weights)
        hist.val_score.append(score)
        if not math.isfinite(score):
            raise TrainingDiverged(f"validation loss became {score} at epoch {epoch}")
        if score < best_score:
            best, best_score, since = m.copy(), score, 0
            hist.best_epoch = epoch
        else:
            since += 1
            if since >= cfg.patience:
                break
    hist.stopped_epoch = epoch
    return best, hist
