"""Training loops: the condition-aware network and the static GRAPE baseline.

Both share one optimizer (Adam with cosine step decay and global-norm
clipping) and one gradient engine; they differ only in how parameters map to
waveforms.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .controller import ControllerParams, init_params
from .crosstalk import ConditionVector, NOMINAL, as_condition_array
from .gradients import Problem, grape_waveforms, loss_and_grad
from .objectives import build_ensemble
from .seeding import derive_rng


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 400
    step_size: float = 3e-3
    step_floor: float = 1e-5
    clip_norm: float = 1.0
    seed: int = 0
    pool_size: int = 24
    per_run: int = 3
    c_i_range: tuple = (0.0, 0.25)
    c_q_range: tuple = (0.0, 0.25)
    c_f_range: tuple = (-0.25, 0.0)
    n_haar_train: int = 4

    def __post_init__(self):
        for name in ("c_i_range", "c_q_range", "c_f_range"):
            object.__setattr__(self, name, tuple(float(x) for x in getattr(self, name)))
        if int(self.epochs) < 1:
            raise ValueError("epochs must be >= 1")
        if not self.step_size > 0:
            raise ValueError("step_size must be > 0")
        if not 0 <= self.step_floor <= self.step_size:
            raise ValueError("step_floor must lie in [0, step_size]")
        if not self.clip_norm > 0:
            raise ValueError("clip_norm must be > 0")
        if self.per_run < 0 or self.pool_size < self.per_run:
            raise ValueError("pool_size must be >= per_run >= 0")
        if self.n_haar_train < 0:
            raise ValueError("n_haar_train must be >= 0")
        for name in ("c_i_range", "c_q_range", "c_f_range"):
            lo, hi = getattr(self, name)
            if not -1.0 <= lo <= hi <= 1.0:
                raise ValueError(f"{name} must satisfy -1 <= lo <= hi <= 1")

    @property
    def box(self):
        return np.array([self.c_i_range, self.c_q_range, self.c_f_range])


@dataclass
class GrapeParams:
    """Pre-saturation node values, shape (7, n_nodes), waveform channel order."""

    nodes: np.ndarray

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float)
        if self.nodes.ndim != 2 or self.nodes.shape[0] != 7 or self.nodes.shape[1] < 2:
            raise ValueError(f"GRAPE nodes must have shape (7, n>=2), got {self.nodes.shape}")

    def waveforms(self, problem):
        return np.asarray(grape_waveforms(self.nodes, problem.controller, problem.model))

    @classmethod
    def init(cls, rng, n_nodes, scale=0.1):
        return cls(rng.uniform(-scale, scale, size=(7, n_nodes)))


class TrainingDiverged(FloatingPointError):
    """Raised on a non-finite objective; carries the last finite parameters."""

    def __init__(self, message, params, history):
        super().__init__(message)
        self.params = params
        self.history = history


class Adam:
    def __init__(self, size, beta1=0.9, beta2=0.999, eps=1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def update(self, grad, lr):
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad**2
        m_hat = self.m / (1 - self.beta1**self.t)
        v_hat = self.v / (1 - self.beta2**self.t)
        return -lr * m_hat / (np.sqrt(v_hat) + self.eps)


def cosine_step(epoch, epochs, lr0, floor):
    """Cosine decay from ``lr0`` at epoch 0 to ``floor`` at the last epoch."""
    if epochs <= 1:
        return lr0
    return floor + 0.5 * (lr0 - floor) * (1.0 + math.cos(math.pi * epoch / (epochs - 1)))


def clip_global_norm(grad, max_norm):
    norm = float(np.linalg.norm(grad))
    if norm > max_norm:
        return grad * (max_norm / norm), norm
    return grad, norm


def sample_training_conditions(rng, cfg):
    """Uniform pool in the training box, ``per_run`` picks without replacement, plus nominal."""
    box = cfg.box
    pool = rng.uniform(box[:, 0], box[:, 1], size=(cfg.pool_size, 3))
    picks = rng.choice(cfg.pool_size, size=cfg.per_run, replace=False)
    return [ConditionVector.from_array(pool[i]) for i in picks] + [NOMINAL]


def training_ensemble(cfg, problem):
    return build_ensemble(derive_rng(cfg.seed, "train-ensemble"), cfg.n_haar_train, problem.model.n_levels)


def _optimize(x0, conditions, ensemble, problem, cfg, kind, to_params, callback=None):
    x = np.array(x0, dtype=float)
    opt = Adam(x.size)
    history = []
    best = math.inf
    for epoch in range(int(cfg.epochs)):
        try:
            res = loss_and_grad(x, conditions, ensemble, problem, kind=kind)
        except FloatingPointError as err:
            raise TrainingDiverged(f"epoch {epoch}: {err}", to_params(x), history) from err
        grad, gnorm = clip_global_norm(res.grad, cfg.clip_norm)
        lr = cosine_step(epoch, cfg.epochs, cfg.step_size, cfg.step_floor)
        best = min(best, res.value)
        d = res.diagnostics
        history.append(
            {
                "epoch": epoch + 1,
                "objective": res.value,
                "best_objective": best,
                "avg_fidelity": [float(f) for f in d["avg_fidelity"]],
                "leakage": float(np.mean(d["leakage"])),
                "smoothness": float(np.mean(d["smoothness"])),
                "grad_norm": gnorm,
                "step_size": lr,
            }
        )
        x = x + opt.update(grad, lr)
        if callback is not None:
            callback(epoch + 1, to_params(x), history)
    return to_params(x), history


def train_pgnc(cfg=None, problem=None, callback=None):
    """Train the conditioned controller; returns ``(ControllerParams, history)``."""
    cfg = cfg or TrainConfig()
    problem = problem or Problem()
    theta0 = init_params(derive_rng(cfg.seed, "pgnc-init"), problem.controller)
    conditions = sample_training_conditions(derive_rng(cfg.seed, "train-conditions"), cfg)
    ensemble = training_ensemble(cfg, problem)
    to_params = lambda x: ControllerParams.unflatten(x, problem.controller)  # noqa: E731
    params, history = _optimize(theta0.flatten(), conditions, ensemble, problem, cfg, "pgnc", to_params, callback)
    return params, history


def train_grape(cfg=None, condition=NOMINAL, problem=None, callback=None, init_scale=0.1):
    """Optimize a static piecewise-linear waveform at one fixed condition."""
    cfg = cfg or TrainConfig()
    problem = problem or Problem()
    c = ConditionVector.from_array(as_condition_array(condition))
    key = [round(float(x) * 1e6) for x in c.as_array()]
    init = GrapeParams.init(derive_rng(cfg.seed, "grape-init", *key), problem.model.n_steps, init_scale)
    ensemble = training_ensemble(cfg, problem)
    to_params = lambda x: GrapeParams(x.reshape(7, -1))  # noqa: E731
    return _optimize(init.nodes.ravel(), [c], ensemble, problem, cfg, "grape", to_params, callback)
