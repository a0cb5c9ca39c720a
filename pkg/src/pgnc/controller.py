"""Fourier-featured MLP waveform generator.

The generator maps a time ``t`` and a condition ``c`` to seven bounded control
channels. Bounds and zero endpoints hold by construction: every channel is
``bound * env(t) * tanh(latent)``.
"""

from dataclasses import dataclass

import jax.numpy as jnp
import numpy as np

from .crosstalk import as_condition_array
from .units import mhz_to_rad_per_ns

# Latent order produced by the network; WAVEFORM_FROM_LATENT[k] is the latent
# index feeding waveform channel k of [x1, y1, x2, y2, d1, d2, J].
LATENT_CHANNELS = ("p_x1", "p_y1", "p_d1", "p_x2", "p_y2", "p_d2", "p_j")
WAVEFORM_FROM_LATENT = (0, 1, 3, 4, 2, 5, 6)


@dataclass(frozen=True)
class ControllerConfig:
    k_harmonics: int = 4
    hidden_sizes: tuple = (64, 64)
    env_steepness: float = 40.0
    omega_max: float = mhz_to_rad_per_ns(30.0)
    delta_max: float = mhz_to_rad_per_ns(30.0)
    j_max: float = mhz_to_rad_per_ns(15.0)

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        if int(self.k_harmonics) < 1:
            raise ValueError("k_harmonics must be >= 1")
        if len(self.hidden_sizes) != 2 or min(self.hidden_sizes) < 1:
            raise ValueError("hidden_sizes must be two positive integers")
        for name in ("env_steepness", "omega_max", "delta_max", "j_max"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")

    @property
    def input_dim(self):
        return 1 + 2 * self.k_harmonics + 3

    @property
    def bounds(self):
        """Amplitude bound per waveform channel."""
        o, d, j = self.omega_max, self.delta_max, self.j_max
        return np.array([o, o, o, o, d, d, j])

    def layer_shapes(self):
        h1, h2 = self.hidden_sizes
        return (
            ("w1", (h1, self.input_dim)),
            ("b1", (h1,)),
            ("w2", (h2, h1)),
            ("b2", (h2,)),
            ("w3", (7, h2)),
            ("b3", (7,)),
        )

    @property
    def n_params(self):
        return sum(int(np.prod(shape)) for _, shape in self.layer_shapes())


@dataclass(frozen=True)
class ControllerParams:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    w3: np.ndarray
    b3: np.ndarray

    def flatten(self):
        """Concatenate all weights in layout order (row-major)."""
        return np.concatenate([np.asarray(getattr(self, n), dtype=float).ravel() for n in _NAMES])

    @classmethod
    def unflatten(cls, flat, cfg):
        return cls(**{k: np.asarray(v) for k, v in unflatten_params(np.asarray(flat, float), cfg).items()})

    def check(self, cfg):
        for name, shape in cfg.layer_shapes():
            got = np.shape(getattr(self, name))
            if got != shape:
                raise ValueError(f"parameter {name} has shape {got}, expected {shape}")


_NAMES = ("w1", "b1", "w2", "b2", "w3", "b3")


def unflatten_params(flat, cfg):
    """Split a flat vector into named layers; works on traced arrays."""
    if flat.shape[0] != cfg.n_params:
        raise ValueError(f"flat parameter vector has length {flat.shape[0]}, expected {cfg.n_params}")
    out = {}
    i = 0
    for name, shape in cfg.layer_shapes():
        n = int(np.prod(shape))
        out[name] = flat[i : i + n].reshape(shape)
        i += n
    return out


@dataclass(frozen=True)
class WaveformGrid:
    """Seven control channels sampled at step midpoints, rad/ns."""

    u: np.ndarray
    t_grid: np.ndarray

    @property
    def n_steps(self):
        return self.u.shape[1]


def fourier_features(t, c, cfg, gate_time):
    """[tau, sin/cos(2 pi k tau) for k=1..K, c_I, c_Q, c_f] with tau = t / T.

    ``t`` may be a scalar or a 1-D array; the feature axis is last.
    """
    t = jnp.asarray(t, dtype=float)
    tau = t / gate_time
    k = jnp.arange(1, cfg.k_harmonics + 1)
    arg = 2.0 * jnp.pi * k * tau[..., None]
    trig = jnp.stack([jnp.sin(arg), jnp.cos(arg)], axis=-1).reshape(tau.shape + (2 * cfg.k_harmonics,))
    c = jnp.broadcast_to(jnp.asarray(as_condition_array(c), dtype=float), tau.shape + (3,))
    return jnp.concatenate([tau[..., None], trig, c], axis=-1)


def mlp_forward(theta, phi):
    """Two tanh hidden layers and a linear read-out to the 7 latents."""
    if isinstance(theta, ControllerParams):
        theta = {n: getattr(theta, n) for n in _NAMES}
    phi = jnp.asarray(phi)
    if phi.shape[-1] != theta["w1"].shape[1]:
        raise ValueError(f"feature length {phi.shape[-1]} does not match w1 {theta['w1'].shape}")
    h = jnp.tanh(phi @ theta["w1"].T + theta["b1"])
    h = jnp.tanh(h @ theta["w2"].T + theta["b2"])
    return h @ theta["w3"].T + theta["b3"]


def flattop_env(t, gate_time, s):
    """Analytic flattop window, zero at t=0 and t=T and close to 1 inside."""
    t = jnp.asarray(t, dtype=float)
    a = jnp.tanh(s * t / (4.0 * gate_time))
    b = jnp.tanh(s * (t - gate_time) / (4.0 * gate_time))
    return (a - b) / jnp.tanh(s / 4.0) - 1.0


def latent_to_physical(p, env_val, cfg):
    """Saturate latents and reorder to [x1, y1, x2, y2, d1, d2, J] along the last axis."""
    p = jnp.asarray(p)
    reordered = p[..., list(WAVEFORM_FROM_LATENT)]
    return jnp.asarray(cfg.bounds) * jnp.asarray(env_val)[..., None] * jnp.tanh(reordered)


def step_midpoints(gate_time, n_steps):
    return (np.arange(n_steps) + 0.5) * (gate_time / n_steps)


def controller_waveform_array(theta, c, cfg, gate_time, n_steps):
    """Traceable core of :func:`sample_waveforms`; returns a (7, N) array."""
    if isinstance(theta, ControllerParams):
        layers = {n: jnp.asarray(getattr(theta, n)) for n in _NAMES}
    elif isinstance(theta, dict):
        layers = theta
    else:
        layers = unflatten_params(theta, cfg)
    t = step_midpoints(gate_time, n_steps)
    phi = fourier_features(t, c, cfg, gate_time)
    p = mlp_forward(layers, phi)
    env = flattop_env(t, gate_time, cfg.env_steepness)
    return latent_to_physical(p, env, cfg).T


def sample_waveforms(theta, c, cfg, gate_time, n_steps):
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    u = controller_waveform_array(theta, c, cfg, gate_time, n_steps)
    return WaveformGrid(u=np.asarray(u), t_grid=step_midpoints(gate_time, n_steps))


def init_params(rng, cfg):
    """Uniform weights in +-1/sqrt(fan_in), zero biases."""
    layers = {}
    for name, shape in cfg.layer_shapes():
        if name.startswith("w"):
            scale = 1.0 / np.sqrt(shape[1])
            layers[name] = rng.uniform(-scale, scale, size=shape)
        else:
            layers[name] = np.zeros(shape)
    return ControllerParams(**layers)
