"""Condition-augmented effective controls.

A condition vector ``c = [c_I, c_Q, c_f]`` biases the coupling, the drive
mixing ratio and the detunings through a first-order affine model, injects a
windowed narrowband tone on the drive channels and, independently of ``c``, a
coupler pulse leaks into the qubit detunings.

All functions are written against ``jax.numpy`` so they can be traced inside
the differentiable simulator; they accept plain numpy inputs too.
"""

from dataclasses import dataclass, field

import jax
import jax.numpy as jnp
import numpy as np

from .units import mhz_to_rad_per_ns

# Channel layout shared by waveforms and Hamiltonian coefficients.
CHANNELS = ("omega_x1", "omega_y1", "omega_x2", "omega_y2", "delta_1", "delta_2", "j_zz")


@dataclass(frozen=True)
class ConditionVector:
    c_i: float = 0.0
    c_q: float = 0.0
    c_f: float = 0.0

    def __post_init__(self):
        for name in ("c_i", "c_q", "c_f"):
            v = getattr(self, name)
            if not np.isfinite(v) or abs(v) > 1.0:
                raise ValueError(f"condition component {name}={v} outside [-1, 1]")

    def as_array(self):
        return np.array([self.c_i, self.c_q, self.c_f], dtype=float)

    @classmethod
    def from_array(cls, arr):
        a = np.asarray(arr, dtype=float).reshape(3)
        return cls(float(a[0]), float(a[1]), float(a[2]))


NOMINAL = ConditionVector()


def as_condition_array(c):
    if isinstance(c, ConditionVector):
        return c.as_array()
    return c


def _vec(values_mhz):
    return tuple(float(mhz_to_rad_per_ns(v)) for v in values_mhz)


def _default_d_mat():
    d0 = mhz_to_rad_per_ns(1.0)
    rows = ((1, 0, 0), (0, 1, 0), (1, 0, 0), (0, 1, 0))
    return tuple(tuple(d0 * x for x in row) for row in rows)


@dataclass(frozen=True)
class CrosstalkParams:
    """Sensitivities of the effective control parameters (rad/ns unless noted).

    Vectors are stored as tuples so instances hash and can be used as static
    configuration inside jitted code.
    """

    r0: float = 0.05
    g_j: tuple = field(default_factory=lambda: _vec((0.0, 0.0, 2.0)))
    g_r: tuple = (0.0, 0.0, 0.2)
    g_d1: tuple = field(default_factory=lambda: _vec((3.0, 0.0, -0.5)))
    g_d2: tuple = field(default_factory=lambda: _vec((0.0, 3.0, -0.5)))
    d_mat: tuple = field(default_factory=_default_d_mat)
    kappa: tuple = field(default_factory=lambda: _vec((0.0, 0.0, -20.0)))
    eps_1: float = 0.05
    eps_2: float = 0.05

    def __post_init__(self):
        for name in ("g_j", "g_r", "g_d1", "g_d2", "kappa"):
            v = tuple(float(x) for x in getattr(self, name))
            if len(v) != 3:
                raise ValueError(f"{name} must have 3 components, got {len(v)}")
            object.__setattr__(self, name, v)
        d = tuple(tuple(float(x) for x in row) for row in self.d_mat)
        if len(d) != 4 or any(len(row) != 3 for row in d):
            raise ValueError("d_mat must be 4x3")
        object.__setattr__(self, "d_mat", d)
        # r_eff is affine in c, so its extremes over [-1, 1]^3 sit at the corners.
        worst = abs(self.r0) + sum(abs(x) for x in self.g_r)
        if worst >= 1.0:
            raise ValueError(f"r_eff reaches {worst:.3g} on the condition box; need |r_eff| < 1")

    def arrays(self):
        return {
            "g_j": np.array(self.g_j),
            "g_r": np.array(self.g_r),
            "g_d1": np.array(self.g_d1),
            "g_d2": np.array(self.g_d2),
            "d_mat": np.array(self.d_mat),
            "kappa": np.array(self.kappa),
        }


def condition_bias(xtalk, jzz_t, c):
    """Affine condition bias b(c) = b0 + G c.

    Returns ``(jzz_eff, r_eff, dd1, dd2)``.
    """
    c = jnp.asarray(as_condition_array(c))
    jzz_eff = jzz_t + jnp.dot(jnp.asarray(xtalk.g_j), c)
    r_eff = xtalk.r0 + jnp.dot(jnp.asarray(xtalk.g_r), c)
    dd1 = jnp.dot(jnp.asarray(xtalk.g_d1), c)
    dd2 = jnp.dot(jnp.asarray(xtalk.g_d2), c)
    return jzz_eff, r_eff, dd1, dd2


def mixing_matrix(r_eff):
    """Symmetric like-quadrature drive mixing on [x1, y1, x2, y2]."""
    if not isinstance(r_eff, jax.core.Tracer) and abs(float(r_eff)) >= 1.0:
        raise ValueError(f"|r_eff| = {abs(float(r_eff))} must be < 1")
    eye = jnp.eye(4)
    swap = jnp.array(
        [[0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0], [1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]]
    )
    return eye + r_eff * swap


def bleed_frequency(c, xtalk):
    """Offset frequency of the injected tone, kappa . c."""
    return jnp.dot(jnp.asarray(xtalk.kappa), jnp.asarray(as_condition_array(c)))


def bleed_amplitudes(c, xtalk):
    """Per-channel injection amplitudes D c on [x1, y1, x2, y2]."""
    return jnp.asarray(xtalk.d_mat) @ jnp.asarray(as_condition_array(c))


def bleedthrough(t, c, xtalk, env_val):
    """Injected drive components D c env(t) sin(kappa.c t)."""
    return bleed_amplitudes(c, xtalk) * env_val * jnp.sin(bleed_frequency(c, xtalk) * t)


def coupler_zshift(jzz_t, xtalk):
    return xtalk.eps_1 * jzz_t, xtalk.eps_2 * jzz_t


def control_coefficients(u, c, xtalk):
    """Hamiltonian coefficients without the bleed-through tone.

    ``u`` has the waveform layout ``[x1, y1, x2, y2, d1, d2, J]`` along its
    first axis (any trailing shape). The result has the same layout, i.e. the
    coefficients multiplying ``[H_1I, H_1Q, H_2I, H_2Q, n_1, n_2, n_1 n_2]``.
    """
    u = jnp.asarray(u)
    omega = u[:4]
    jzz = u[6]
    jzz_eff, r_eff, dd1, dd2 = condition_bias(xtalk, jzz, c)
    omega_lin = jnp.tensordot(mixing_matrix(r_eff), omega, axes=1)
    z1, z2 = coupler_zshift(jzz, xtalk)
    d1 = u[4] + dd1 + z1
    d2 = u[5] + dd2 + z2
    return jnp.concatenate([omega_lin, jnp.stack([d1, d2, jzz_eff])], axis=0)


def bleed_direction(c, xtalk):
    """Coefficient direction scaled by env(t) sin(kappa.c t) for the injected tone."""
    return jnp.concatenate([bleed_amplitudes(c, xtalk), jnp.zeros(3)])


def assemble_hamiltonian(t, u_step, c, ops, xtalk, env_val):
    """Full condition-augmented Hamiltonian at time ``t`` for one control sample."""
    coeffs = control_coefficients(u_step, c, xtalk)
    coeffs = coeffs + bleed_direction(c, xtalk) * env_val * jnp.sin(bleed_frequency(c, xtalk) * t)
    return ops.h0 + jnp.tensordot(coeffs, ops.control_stack(), axes=1)


def bare_hamiltonian(u_step, ops):
    """Control Hamiltonian without any crosstalk channel, for reference."""
    return ops.h0 + jnp.tensordot(jnp.asarray(u_step), ops.control_stack(), axes=1)
