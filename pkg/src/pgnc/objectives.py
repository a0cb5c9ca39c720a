"""Gate-quality metrics and how they are combined into a training objective."""

import math
from dataclasses import dataclass, field

import jax.numpy as jnp
import numpy as np

from .quantum import computational_indices, density_matrix, embed_state, haar_random_two_qubit_state, to_coords

CZ = np.diag([1.0, 1.0, 1.0, -1.0]).astype(complex)

_SINGLE = {
    "0": np.array([1.0, 0.0], dtype=complex),
    "1": np.array([0.0, 1.0], dtype=complex),
    "+": np.array([1.0, 1.0], dtype=complex) / np.sqrt(2.0),
    "-": np.array([1.0, -1.0], dtype=complex) / np.sqrt(2.0),
}

AGGREGATIONS = ("mean", "max", "cvar")


@dataclass(frozen=True)
class ObjectiveWeights:
    w_leak: float = 0.05
    w_smooth: float = 0.01
    mode: str = "mean"
    alpha: float = 1.0

    def __post_init__(self):
        if self.w_leak < 0 or self.w_smooth < 0:
            raise ValueError("objective weights must be non-negative")
        if self.mode not in AGGREGATIONS:
            raise ValueError(f"aggregation mode must be one of {AGGREGATIONS}, got {self.mode!r}")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"cvar alpha must lie in (0, 1], got {self.alpha}")


@dataclass
class StateEnsemble:
    """Pure two-qubit inputs and their CZ targets embedded in the transmon space."""

    inputs: np.ndarray  # (M, 4)
    tags: list
    n_levels: int
    gate: np.ndarray = field(default_factory=lambda: CZ.copy())

    def __post_init__(self):
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=complex))
        if self.inputs.shape[0] < 1 or self.inputs.shape[1] != 4:
            raise ValueError("ensemble needs at least one 4-component input")
        norms = np.linalg.norm(self.inputs, axis=1)
        if np.max(np.abs(norms - 1.0)) > 1e-12:
            raise ValueError("ensemble inputs must be normalized")

    def __len__(self):
        return self.inputs.shape[0]

    @property
    def targets(self):
        return embed_state(self.inputs @ self.gate.T, self.n_levels)

    @property
    def embedded_inputs(self):
        return embed_state(self.inputs, self.n_levels)

    def input_coords(self):
        """Coordinates of the input density matrices on the 16 computational-block basis elements."""
        full = np.asarray(to_coords(density_matrix(self.embedded_inputs)))
        return full[:, comp_coord_index(self.n_levels)]

    def target_coords(self):
        return np.asarray(to_coords(density_matrix(self.targets)))

    def duplicated(self):
        return StateEnsemble(np.concatenate([self.inputs, self.inputs]), self.tags + self.tags, self.n_levels, self.gate)

    def digest(self):
        import hashlib

        return hashlib.sha256(np.ascontiguousarray(self.inputs).tobytes()).hexdigest()[:16]


def comp_coord_index(n_levels):
    comp = computational_indices(n_levels)
    d = n_levels * n_levels
    return np.array([d * i + j for i in comp for j in comp])


def product_states():
    labels, states = [], []
    for a in "01+-":
        for b in "01+-":
            labels.append(a + b)
            states.append(np.kron(_SINGLE[a], _SINGLE[b]))
    return labels, np.array(states)


def build_ensemble(rng, n_haar, n_levels):
    """The 16 {0,1,+,-} product states followed by ``n_haar`` Haar-random states."""
    if n_haar < 0:
        raise ValueError("n_haar must be >= 0")
    labels, states = product_states()
    tags = [f"product:{lab}" for lab in labels]
    if n_haar:
        haar = np.array([haar_random_two_qubit_state(rng) for _ in range(n_haar)])
        states = np.concatenate([states, haar])
        tags += ["haar"] * n_haar
    return StateEnsemble(states, tags, n_levels)


def haar_ensemble(rng, n_states, n_levels):
    if n_states < 1:
        raise ValueError("n_states must be >= 1")
    states = np.array([haar_random_two_qubit_state(rng) for _ in range(n_states)])
    return StateEnsemble(states, ["haar"] * n_states, n_levels)


def state_fidelity(rho_final, target):
    """<target| rho |target> (raw, not clamped)."""
    target = jnp.asarray(target)
    return jnp.real(jnp.conj(target) @ jnp.asarray(rho_final) @ target)


def clamp_unit(x):
    return np.clip(x, 0.0, 1.0)


def avg_fidelity(fids):
    if len(fids) == 0:
        raise ValueError("avg_fidelity of an empty list")
    return jnp.mean(jnp.asarray(fids))


def leakage(rhos_final, p_comp):
    """Mean population outside the computational subspace."""
    rhos = jnp.asarray(rhos_final)
    if rhos.ndim == 2:
        rhos = rhos[None]
    if rhos.shape[0] == 0:
        raise ValueError("leakage of an empty list")
    pops = jnp.real(jnp.einsum("ij,mji->m", jnp.asarray(p_comp), rhos))
    return jnp.mean(1.0 - pops)


def smoothness(u, gate_time):
    """Time-averaged squared first difference quotient, summed over channels."""
    u = jnp.asarray(getattr(u, "u", u))
    n = u.shape[-1]
    if n < 2:
        raise ValueError("smoothness needs at least two samples")
    dt = gate_time / n
    diffs = u[..., 1:] - u[..., :-1]
    return jnp.sum(diffs**2) / dt / gate_time


def per_condition_objective(avg_f, leak, smooth, w):
    return (1.0 - avg_f) + w.w_leak * leak + w.w_smooth * smooth


def cvar_count(n, alpha):
    return max(1, math.ceil(alpha * n - 1e-12))


def aggregate(js, mode="mean", alpha=1.0):
    """Combine per-condition objectives; ``cvar`` averages the ceil(alpha*S) largest."""
    if isinstance(mode, ObjectiveWeights):
        mode, alpha = mode.mode, mode.alpha
    js = jnp.asarray(js)
    if js.shape[0] == 0:
        raise ValueError("cannot aggregate an empty list")
    if mode == "mean":
        return jnp.mean(js)
    if mode == "max":
        return jnp.max(js)
    if mode == "cvar":
        if not 0.0 < alpha <= 1.0:
            raise ValueError(f"cvar alpha must lie in (0, 1], got {alpha}")
        k = cvar_count(js.shape[0], alpha)
        return jnp.mean(jnp.sort(js)[-k:])
    raise ValueError(f"unknown aggregation mode {mode!r}")


@dataclass
class EvalReport:
    """Per-condition evaluation of one controller."""

    condition: np.ndarray
    fidelities: np.ndarray
    leakage: float
    smoothness: float
    objective: float
    controller: str = ""
    ensemble_digest: str = ""

    @property
    def avg_fidelity(self):
        return float(np.mean(self.fidelities))

    def summary(self):
        f = np.asarray(self.fidelities)
        return {
            "controller": self.controller,
            "c_i": float(self.condition[0]),
            "c_q": float(self.condition[1]),
            "c_f": float(self.condition[2]),
            "n_states": int(f.size),
            "avg_fidelity": float(np.mean(f)),
            "std_fidelity": float(np.std(f)),
            "min_fidelity": float(np.min(f)),
            "p5_fidelity": float(np.percentile(f, 5)),
            "leakage": float(self.leakage),
            "smoothness": float(self.smoothness),
            "objective": float(self.objective),
        }
