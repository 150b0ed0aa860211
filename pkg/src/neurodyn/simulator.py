"""Discrete SGD on the one-hidden-layer ReLU classifier.

``P(x) = o(Z^T (W x)_+)`` with ``o`` the sigmoid (BCE), identity (hinge) or
a softmax over ``C`` outputs. Updates use plain ReLU-gated backprop, so
mode independence is something the checks observe rather than assume.
Randomness comes from numpy's PCG64 generator seeded per run.
"""
from dataclasses import dataclass, field, replace
import csv
import json
import math

import numpy as np
from scipy.special import expit, softmax

from .errors import DomainError, HorizonError

DATASET_SCHEMA_VERSION = 1


# -- data -------------------------------------------------------------------


@dataclass(frozen=True)
class SeparableDataset:
    """Per-class point sets; construction checks within-class products > 0, cross-class <= 0."""

    classes: tuple

    def __post_init__(self):
        arrays = tuple(np.atleast_2d(np.asarray(c, dtype=float)) for c in self.classes)
        object.__setattr__(self, "classes", arrays)
        if len(arrays) < 2:
            raise DomainError("a dataset needs at least two classes")
        dims = {a.shape[1] for a in arrays}
        if len(dims) != 1:
            raise DomainError("all points must share one dimension")
        problem = separability_violation(arrays)
        if problem:
            raise DomainError(f"dataset is not separable in the required sense: {problem}")

    @property
    def class1(self):
        return self.classes[0]

    @property
    def class2(self):
        return self.classes[1]

    @property
    def n_classes(self):
        return len(self.classes)

    @property
    def dim(self):
        return self.classes[0].shape[1]

    def to_json(self):
        return {
            "version": DATASET_SCHEMA_VERSION,
            "dim": self.dim,
            "classes": [c.tolist() for c in self.classes],
        }

    @classmethod
    def from_json(cls, data):
        if data.get("version") != DATASET_SCHEMA_VERSION:
            raise DomainError(f"unsupported dataset schema version {data.get('version')!r}")
        return cls(tuple(np.asarray(c, dtype=float) for c in data["classes"]))


def separability_violation(classes):
    """Describe the first violated inner-product condition, or return ``None``."""
    for k, a in enumerate(classes):
        gram = a @ a.T
        if np.any(gram <= 0):
            i, j = np.argwhere(gram <= 0)[0]
            return f"class {k + 1} points {i} and {j} have inner product {gram[i, j]:.3g}"
        for m in range(k + 1, len(classes)):
            cross = a @ classes[m].T
            if np.any(cross > 0):
                i, j = np.argwhere(cross > 0)[0]
                return f"class {k + 1} point {i} and class {m + 1} point {j} are positively aligned"
    return None


def save_dataset(dataset, path):
    with open(path, "w") as fh:
        json.dump(dataset.to_json(), fh, indent=1)


def load_dataset(path):
    with open(path) as fh:
        return SeparableDataset.from_json(json.load(fh))


def _unit(v):
    return v / np.linalg.norm(v)


def _cone_sample(rng, axis, n, half_angle, norm_range):
    """``n`` vectors at angle <= ``half_angle`` from the unit ``axis``."""
    d = axis.size
    out = np.empty((n, d))
    for i in range(n):
        perp = rng.standard_normal(d)
        perp -= (perp @ axis) * axis
        perp = _unit(perp)
        angle = half_angle * rng.uniform(0.0, 1.0)
        direction = math.cos(angle) * axis + math.sin(angle) * perp
        out[i] = rng.uniform(*norm_range) * direction
    return out


def make_dataset(seed, d, n_per_class, cone_half_angle_deg=30.0, norm_range=(0.5, 1.5)):
    """Two-class dataset drawn from opposite cones about a random axis.

    Cones narrower than 45 degrees guarantee positive within-class products;
    class 2 is the negation of an independent cone sample, so cross-class
    products are negative.
    """
    if d < 2:
        raise DomainError("dimension must be at least 2")
    if not 0 <= cone_half_angle_deg < 45:
        raise DomainError(f"cone half-angle must be below 45 degrees, got {cone_half_angle_deg!r}")
    rng = np.random.default_rng(seed)
    axis = _unit(rng.standard_normal(d))
    half = math.radians(cone_half_angle_deg)
    c1 = _cone_sample(rng, axis, n_per_class, half, norm_range)
    c2 = -_cone_sample(rng, axis, n_per_class, half, norm_range)
    return SeparableDataset((c1, c2))


def make_multiclass_dataset(seed, d, n_per_class, n_classes=3, cone_half_angle_deg=10.0,
                            norm_range=(0.5, 1.5)):
    """``C`` classes in cones about axes spread evenly on a random plane.

    Axes are ``360 / C`` degrees apart, so the half-angle must stay below
    ``(360 / C - 90) / 2`` degrees for cross-class products to stay non-positive.
    """
    if n_classes < 3:
        raise DomainError("use make_dataset for two classes")
    spacing = 360.0 / n_classes
    limit = min(45.0, (spacing - 90.0) / 2.0)
    if not 0 <= cone_half_angle_deg < limit:
        raise DomainError(f"cone half-angle must be below {limit:.3g} degrees for {n_classes} classes")
    rng = np.random.default_rng(seed)
    basis, _ = np.linalg.qr(rng.standard_normal((d, 2)))
    half = math.radians(cone_half_angle_deg)
    classes = []
    for k in range(n_classes):
        phi = 2.0 * math.pi * k / n_classes
        axis = math.cos(phi) * basis[:, 0] + math.sin(phi) * basis[:, 1]
        classes.append(_cone_sample(rng, axis, n_per_class, half, norm_range))
    return SeparableDataset(tuple(classes))


# -- network ------------------------------------------------------------------


@dataclass(frozen=True)
class NetworkParams:
    """Hidden weights ``w`` (h x d), output weights ``z`` (h,) or (C, h), and the hidden-unit partition."""

    w: np.ndarray
    z: np.ndarray
    partition: tuple

    def __post_init__(self):
        h = self.w.shape[0]
        if h < 2:
            raise DomainError("the network needs at least two hidden units")
        cells = [set(c) for c in self.partition]
        if set().union(*cells) != set(range(h)) or sum(len(c) for c in cells) != h:
            raise DomainError("partition cells must be disjoint and cover every hidden unit")
        if self.z.shape[-1] != h:
            raise DomainError("output weights do not match the hidden width")

    @property
    def multiclass(self):
        return self.z.ndim == 2

    def _evolved(self, w, z):
        # same partition and shapes, so the constructor checks can be skipped
        out = object.__new__(NetworkParams)
        object.__setattr__(out, "w", w)
        object.__setattr__(out, "z", z)
        object.__setattr__(out, "partition", self.partition)
        return out


def forward(params, x):
    """Pre-activation output (logit, or logit vector in multi-class mode)."""
    return params.z @ np.maximum(params.w @ x, 0.0)


def _output_gradient(out, label, loss):
    # Gradient of the log-likelihood (or negated hinge) w.r.t. the network output.
    if out.ndim == 0 or np.isscalar(out):
        if loss == "bce":
            return (1.0 if label == 0 else 0.0) - expit(out)
        if loss == "hinge":
            if label == 0:
                return 1.0 if out < 1.0 else 0.0
            return -1.0 if out > -1.0 else 0.0
        raise DomainError(f"unknown loss {loss!r}")
    if loss != "bce":
        raise DomainError("multi-class mode supports the cross-entropy loss only")
    grad = -softmax(out)
    grad[label] += 1.0
    return grad


def _update(w, z, x, label, lr, loss):
    pre = w @ x
    act = np.maximum(pre, 0.0)
    out = z @ act
    g = _output_gradient(out, label, loss)
    gate = (pre > 0.0).astype(float)
    if z.ndim == 1:
        back = g * z * gate
        z_new = z + lr * g * act
    else:
        back = (z.T @ g) * gate
        z_new = z + lr * np.outer(g, act)
    w_new = w + lr * np.outer(back, x)
    return w_new, z_new


def sgd_step(params, x, label, learning_rate, loss="bce"):
    """One SGD update on the single example ``x``; returns new parameters.

    ``label`` is the 0-based class index. For BCE the output gradient is
    ``[label is class 1] - sigma(u)``, for hinge it is the subgradient,
    which vanishes once the margin of 1 is met.
    """
    w, z = _update(params.w, params.z, np.asarray(x, dtype=float), label, learning_rate, loss)
    return params._evolved(w, z)


def init_params(dataset, units_per_class=1, seed=0, z_range=(0.05, 0.5), w_scale=1.0):
    """Initialization satisfying the class-disjoint activation and sign-matched output conditions.

    Rows assigned to class ``k`` point along that class's mean direction
    plus noise small enough to keep every within-class product positive
    and every other product negative.
    """
    rng = np.random.default_rng(seed)
    C, d = dataset.n_classes, dataset.dim
    h = C * units_per_class
    partition = tuple(tuple(range(k * units_per_class, (k + 1) * units_per_class)) for k in range(C))
    w = np.empty((h, d))
    for k, pts in enumerate(dataset.classes):
        axis = _unit(pts.mean(axis=0))
        units = pts / np.linalg.norm(pts, axis=1, keepdims=True)
        others = np.vstack([p for m, p in enumerate(dataset.classes) if m != k])
        others = others / np.linalg.norm(others, axis=1, keepdims=True)
        margin = min(np.min(units @ axis), np.min(-(others @ axis)))
        for i in partition[k]:
            noise = rng.standard_normal(d)
            noise *= 0.5 * margin * w_scale / np.linalg.norm(noise)
            w[i] = w_scale * axis + noise
    lo, hi = z_range
    if C == 2:
        z = np.empty(h)
        z[list(partition[0])] = rng.uniform(lo, hi, len(partition[0]))
        z[list(partition[1])] = -rng.uniform(lo, hi, len(partition[1]))
    else:
        z = -rng.uniform(0.0, lo, (C, h))
        for k in range(C):
            z[k, list(partition[k])] = rng.uniform(lo, hi, len(partition[k]))
    return NetworkParams(w, z, partition)


def break_h2(params, dataset):
    """Copy of ``params`` whose first class-1 unit also fires on the first class-2 point."""
    w = params.w.copy()
    i = params.partition[0][0]
    w[i] = _unit(dataset.class1.mean(axis=0)) + 2.0 * _unit(dataset.class2[0])
    return replace(params, w=w)


def degenerate_pair_network(norm1, u0, norm2=None, v0=None):
    """Two single-point classes ``norm1 e1`` and ``-norm2 e1`` on the degenerate hyperbola.

    Each class owns one hidden unit with ``y0 = |x| z0``, giving initial
    logits ``u0 > 0`` and ``v0 < 0``.
    """
    norm2 = norm1 if norm2 is None else norm2
    v0 = -u0 if v0 is None else v0
    x1, x2 = np.array([norm1, 0.0]), np.array([-norm2, 0.0])
    z1 = math.sqrt(u0 / norm1)
    z2 = -math.sqrt(-v0 / norm2)
    w = np.array([
        (norm1 * z1) / norm1**2 * x1,
        (norm2 * -z2) / norm2**2 * x2,
    ])
    dataset = SeparableDataset((x1[None, :], x2[None, :]))
    return NetworkParams(w, np.array([z1, z2]), ((0,), (1,))), dataset


# -- training -------------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    """``sampling`` is ``"uniform"`` over all points or a class-1 rate ``p`` (binary only)."""

    learning_rate: float
    steps: int
    seed: int = 0
    sampling: object = "uniform"
    loss: str = "bce"

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise DomainError(f"learning rate must be positive, got {self.learning_rate!r}")
        if self.steps < 0:
            raise DomainError("steps must be non-negative")
        if self.sampling != "uniform" and not 0.0 < float(self.sampling) < 1.0:
            raise DomainError(f"class-1 sampling rate must lie in (0, 1), got {self.sampling!r}")
        if self.loss not in ("bce", "hinge"):
            raise DomainError(f"loss must be 'bce' or 'hinge', got {self.loss!r}")


@dataclass
class TrainResult:
    params: NetworkParams
    logits: np.ndarray  # (steps + 1, n_classes): own-class logit of each class's first point
    labels: np.ndarray  # class index sampled at each step
    history: list = field(default_factory=list)

    def class_time(self, label, learning_rate):
        """Continuous time experienced by ``label`` after each step (lr times its sample count)."""
        counts = np.concatenate([[0], np.cumsum(self.labels == label)])
        return learning_rate * counts


def _draw_labels(rng, dataset, config):
    if config.sampling == "uniform":
        sizes = np.array([len(c) for c in dataset.classes])
        flat = rng.integers(0, sizes.sum(), config.steps)
        bounds = np.cumsum(sizes)
        labels = np.searchsorted(bounds, flat, side="right")
        index = flat - np.concatenate([[0], bounds[:-1]])[labels]
    else:
        if dataset.n_classes != 2:
            raise DomainError("class-rate sampling is defined for two classes")
        labels = (rng.random(config.steps) >= float(config.sampling)).astype(int)
        sizes = np.array([len(c) for c in dataset.classes])
        index = np.floor(rng.random(config.steps) * sizes[labels]).astype(int)
    return labels, index


def _own_logits(w, z, reps):
    out = np.empty(len(reps))
    for k, x in enumerate(reps):
        o = z @ np.maximum(w @ x, 0.0)
        out[k] = o if np.ndim(o) == 0 else o[k]
    return out


def train(params0, dataset, config, record_params=False):
    """Run ``config.steps`` SGD updates on seeded samples.

    Records, after every step, the output logit of the first point of
    each class (the ``k``-th output in multi-class mode).
    """
    if params0.multiclass and config.loss != "bce":
        raise DomainError("multi-class training uses the cross-entropy loss")
    rng = np.random.default_rng(config.seed)
    labels, index = _draw_labels(rng, dataset, config)
    reps = [c[0] for c in dataset.classes]
    params = params0
    logits = np.empty((config.steps + 1, dataset.n_classes))
    logits[0] = _own_logits(params.w, params.z, reps)
    history = [params0] if record_params else []
    lr, loss = config.learning_rate, config.loss
    for step in range(config.steps):
        k = labels[step]
        params = sgd_step(params, dataset.classes[k][index[step]], k, lr, loss)
        logits[step + 1] = _own_logits(params.w, params.z, reps)
        if record_params:
            history.append(params)
    return TrainResult(params, logits, labels, history)


def write_history_csv(result, path):
    """Columns ``step, class, logit, confidence`` (classes numbered from 1)."""
    n_classes = result.logits.shape[1]
    rows = 0
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "class", "logit", "confidence"])
        for step, row in enumerate(result.logits):
            for k, u in enumerate(row):
                if n_classes == 2:
                    conf = expit(u) if k == 0 else expit(-u)
                else:
                    conf = float("nan")
                writer.writerow([step, k + 1, repr(float(u)), repr(float(conf))])
                rows += 1
    return rows


# -- mode independence ------------------------------------------------------------


@dataclass(frozen=True)
class ModeReport:
    steps_checked: int
    violations: int
    first_violation: str = None

    @property
    def ok(self):
        return self.violations == 0


def check_mode_independence(history, dataset):
    """Count steps where activations or output-weight signs leave their class partition.

    For every recorded parameter set: each point of class ``k`` must
    activate exactly the units of cell ``k``, and each output weight must
    keep the sign its cell prescribes (binary: positive for class 1,
    negative for class 2; multi-class: positive on a class's own cell,
    non-positive elsewhere).
    """
    violations = 0
    first = None
    for step, params in enumerate(history):
        bad = _step_violation(params, dataset)
        if bad:
            violations += 1
            if first is None:
                first = f"step {step}: {bad}"
    return ModeReport(len(history), violations, first)


def _step_violation(params, dataset):
    h = params.w.shape[0]
    for k, pts in enumerate(dataset.classes):
        expected = np.zeros(h, dtype=bool)
        expected[list(params.partition[k])] = True
        active = (pts @ params.w.T) > 0
        mismatch = np.any(active != expected, axis=1)
        if mismatch.any():
            return f"class {k + 1} point {int(np.argmax(mismatch))} activates units {np.flatnonzero(active[np.argmax(mismatch)]).tolist()}"
    z = params.z
    if z.ndim == 1:
        cell1 = list(params.partition[0])
        cell2 = list(params.partition[1])
        if np.any(z[cell1] <= 0) or np.any(z[cell2] >= 0):
            return "output weight changed sign"
    else:
        for k, cell in enumerate(params.partition):
            own = np.zeros(h, dtype=bool)
            own[list(cell)] = True
            if np.any(z[k, own] <= 0) or np.any(z[k, ~own] > 0):
                return f"output row {k + 1} changed sign pattern"
    return None


# -- starvation experiment ------------------------------------------------------------


@dataclass(frozen=True)
class StarvationOutcome:
    conf_x1: float
    conf_both: float
    conf_x2: float
    steps: int


def starvation_experiment(lam, delta, seed, lr=0.05, max_steps=1_000_000,
                          alpha0=None, beta0=None, z0=None):
    """Train on a frequent feature ``e1`` and a rare feature ``e2`` until class 1 is confident.

    Class-1 samples are ``e1 + e2`` with probability ``lam`` and ``e1``
    otherwise; class 2 is ``-e1``. Training stops once both class-1 input
    types reach confidence ``1 - delta``; the result reports the
    confidence on the probe ``e2`` alone.

    Without explicit initial values, ``alpha0 = z0 = 0.1`` and ``beta0`` is
    drawn in ``(0, lam alpha0]``.
    """
    if not 0.0 < lam <= 1.0:
        raise DomainError(f"lambda must lie in (0, 1], got {lam!r}")
    if not 0.0 < delta < 0.5:
        raise DomainError(f"delta must lie in (0, 0.5), got {delta!r}")
    rng = np.random.default_rng(seed)
    alpha0 = 0.1 if alpha0 is None else alpha0
    z0 = 0.1 if z0 is None else z0
    beta0 = lam * alpha0 * rng.uniform(0.05, 1.0) if beta0 is None else beta0
    e1, e2 = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    both, only, probe, neg = e1 + e2, e1, e2, -e1
    w = np.array([alpha0 * e1 + beta0 * e2, -0.1 * e1])
    z = np.array([z0, -z0])
    target = math.log((1.0 - delta) / delta)

    def logit(x):
        return float(z @ np.maximum(w @ x, 0.0))

    for step in range(1, max_steps + 1):
        if rng.random() < 0.5:
            x = both if rng.random() < lam else only
            w, z = _update(w, z, x, 0, lr, "bce")
        else:
            w, z = _update(w, z, neg, 1, lr, "bce")
        if min(logit(both), logit(only)) >= target:
            return StarvationOutcome(float(expit(logit(only))), float(expit(logit(both))),
                                     float(expit(logit(probe))), step)
    raise HorizonError(f"class 1 did not reach confidence {1 - delta} within {max_steps} steps")
