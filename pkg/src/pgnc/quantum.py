"""Two truncated transmons under Lindblad dynamics.

Basis ordering is row-major over (n1, n2): full index ``n_L * n1 + n2``.

Propagation works on the real coordinates of Hermitian operators in an
orthonormal Hermitian basis, so each RK4 stage is a single real matrix
product with a Liouvillian assembled as drift + sum(coeff_j * generator_j).
The generators are obtained by applying :func:`lindblad_rhs` to the basis,
which keeps one definition of the dynamics.
"""

import functools
from dataclasses import dataclass

import jax
import jax.numpy as jnp
import numpy as np

from .controller import flattop_env
from .crosstalk import (
    as_condition_array,
    bleed_direction,
    bleed_frequency,
    control_coefficients,
)
from .units import mhz_to_rad_per_ns


@dataclass(frozen=True)
class DeviceModel:
    omega_1: float = mhz_to_rad_per_ns(4380.0)
    omega_2: float = mhz_to_rad_per_ns(4614.0)
    alpha_1: float = mhz_to_rad_per_ns(-240.0)
    alpha_2: float = mhz_to_rad_per_ns(-243.0)
    t1_1: float = 70_000.0
    t1_2: float = 70_000.0
    t2_1: float = 80_000.0
    t2_2: float = 80_000.0
    n_levels: int = 3
    gate_time: float = 50.0
    n_steps: int = 50

    def __post_init__(self):
        if int(self.n_levels) != self.n_levels or self.n_levels < 3:
            raise ValueError(f"n_levels must be an integer >= 3, got {self.n_levels}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError(f"n_steps must be an integer >= 1, got {self.n_steps}")
        if not self.gate_time > 0:
            raise ValueError(f"gate_time must be > 0, got {self.gate_time}")
        for name in ("alpha_1", "alpha_2"):
            if not getattr(self, name) < 0:
                raise ValueError(f"{name} must be negative")
        for name in ("t1_1", "t1_2", "t2_1", "t2_2"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0 (use inf to switch a channel off)")

    @property
    def dim(self):
        return self.n_levels**2

    @property
    def dt(self):
        return self.gate_time / self.n_steps


def ladder_operator(n_levels):
    if n_levels < 2:
        raise ValueError(f"n_levels must be >= 2, got {n_levels}")
    return np.diag(np.sqrt(np.arange(1, n_levels, dtype=float)), k=1).astype(complex)


def computational_indices(n_levels):
    if n_levels < 2:
        raise ValueError(f"n_levels must be >= 2, got {n_levels}")
    return np.array([0, 1, n_levels, n_levels + 1])


@dataclass(frozen=True)
class OperatorSet:
    b1: np.ndarray
    b2: np.ndarray
    n1: np.ndarray
    n2: np.ndarray
    h1I: np.ndarray
    h1Q: np.ndarray
    h2I: np.ndarray
    h2Q: np.ndarray
    p_comp: np.ndarray
    h0: np.ndarray

    def control_stack(self):
        """Operators multiplying the coefficients [x1, y1, x2, y2, d1, d2, J]."""
        return np.stack([self.h1I, self.h1Q, self.h2I, self.h2Q, self.n1, self.n2, self.n1 @ self.n2])


def build_operators(model):
    nl = model.n_levels
    b = ladder_operator(nl)
    eye = np.eye(nl)
    b1 = np.kron(b, eye)
    b2 = np.kron(eye, b)
    n1 = b1.conj().T @ b1
    n2 = b2.conj().T @ b2
    dim = nl * nl
    ident = np.eye(dim)
    h0 = 0.5 * model.alpha_1 * n1 @ (n1 - ident) + 0.5 * model.alpha_2 * n2 @ (n2 - ident)
    p = np.zeros((dim, dim), dtype=complex)
    idx = computational_indices(nl)
    p[idx, idx] = 1.0
    return OperatorSet(
        b1=b1,
        b2=b2,
        n1=n1,
        n2=n2,
        h1I=0.5 * (b1 + b1.conj().T),
        h1Q=(b1.conj().T - b1) / 2j,
        h2I=0.5 * (b2 + b2.conj().T),
        h2Q=(b2.conj().T - b2) / 2j,
        p_comp=p,
        h0=h0.astype(complex),
    )


def dephasing_rate(t1, t2):
    """Pure-dephasing rate, clamped at zero so the channel stays physical."""
    return max(0.0, 1.0 / t2 - 1.0 / (2.0 * t1))


def build_jump_operators(model, ops=None):
    """[sqrt(1/T1_1) b1, sqrt(1/T1_2) b2, sqrt(g_phi_1) n1, sqrt(g_phi_2) n2]."""
    ops = build_operators(model) if ops is None else ops
    return [
        np.sqrt(1.0 / model.t1_1) * ops.b1,
        np.sqrt(1.0 / model.t1_2) * ops.b2,
        np.sqrt(dephasing_rate(model.t1_1, model.t2_1)) * ops.n1,
        np.sqrt(dephasing_rate(model.t1_2, model.t2_2)) * ops.n2,
    ]


def lindblad_rhs(rho, h, jumps):
    """-i[H, rho] + sum_k (L rho L^dag - {L^dag L, rho} / 2); ``rho`` may carry batch axes."""
    rho = jnp.asarray(rho)
    h = jnp.asarray(h)
    d = h.shape[-1]
    if h.shape != (d, d) or rho.shape[-2:] != (d, d):
        raise ValueError(f"dimension mismatch: H {h.shape}, rho {rho.shape}")
    out = -1j * (h @ rho - rho @ h)
    for L in jumps:
        L = jnp.asarray(L)
        if L.shape != (d, d):
            raise ValueError(f"dimension mismatch: jump {L.shape}, H {h.shape}")
        Ld = L.conj().T
        LdL = Ld @ L
        out = out + L @ rho @ Ld - 0.5 * (LdL @ rho + rho @ LdL)
    return out


# --- Hermitian-basis coordinates -------------------------------------------

def hermitian_basis(dim):
    """Orthonormal Hermitian basis G_k, k = dim*i + j, with Tr(G_k G_l) = delta_kl."""
    basis = np.zeros((dim * dim, dim, dim), dtype=complex)
    s = 1.0 / np.sqrt(2.0)
    for i in range(dim):
        for j in range(dim):
            g = basis[dim * i + j]
            if i == j:
                g[i, i] = 1.0
            elif i < j:
                g[i, j] = g[j, i] = s
            else:
                g[i, j] = 1j * s
                g[j, i] = -1j * s
    return basis


def to_coords(rho):
    """Real coordinates Tr(G_k rho) of Hermitian matrices (batch axes allowed)."""
    rho = jnp.asarray(rho)
    d = rho.shape[-1]
    i, j = np.indices((d, d))
    r2 = np.sqrt(2.0)
    v = jnp.where(i == j, rho.real, jnp.where(i < j, r2 * rho.real, r2 * rho.imag))
    return v.reshape(rho.shape[:-2] + (d * d,))


def from_coords(v):
    v = jnp.asarray(v)
    d = int(round(np.sqrt(v.shape[-1])))
    m = v.reshape(v.shape[:-1] + (d, d))
    upper = jnp.triu(m, 1) / np.sqrt(2.0)
    lower = jnp.tril(m, -1) / np.sqrt(2.0)
    diag = jnp.diagonal(m, axis1=-2, axis2=-1)
    re = upper + jnp.swapaxes(upper, -1, -2) + diag[..., None] * jnp.eye(d)
    im = lower - jnp.swapaxes(lower, -1, -2)
    return re + 1j * im


def liouvillian_matrix(h, jumps):
    """Real matrix of rho -> lindblad_rhs(rho, h, jumps) in Hermitian coordinates."""
    d = np.shape(h)[-1]
    basis = hermitian_basis(d)
    with jax.ensure_compile_time_eval():
        images = lindblad_rhs(basis, h, jumps)
        # column l holds the coordinates of L(G_l)
        return np.asarray(to_coords(images)).T.copy()


@dataclass(frozen=True)
class Generators:
    drift: np.ndarray
    controls: np.ndarray
    comp_coord_index: np.ndarray


@functools.lru_cache(maxsize=32)
def generators(model):
    ops = build_operators(model)
    jumps = build_jump_operators(model, ops)
    drift = liouvillian_matrix(ops.h0, jumps)
    controls = np.stack([liouvillian_matrix(o, []) for o in ops.control_stack()])
    comp = computational_indices(model.n_levels)
    d = model.dim
    comp_coord_index = np.array([d * i + j for i in comp for j in comp])
    return Generators(drift=drift, controls=controls, comp_coord_index=comp_coord_index)


def stage_times(model, substeps):
    """Times of the RK4 stages: shape (N, substeps, 3) for t, t + h/2, t + h."""
    h = model.dt / substeps
    starts = (np.arange(model.n_steps)[:, None] * model.dt) + np.arange(substeps)[None, :] * h
    return starts[..., None] + np.array([0.0, 0.5 * h, h])


def _rk4_step(u, c, model, xtalk, substeps, env_steepness):
    """Build the per-control-step RK4 map and its scan inputs.

    Controls are held constant on each step; the injected bleed-through tone
    is evaluated at every RK4 stage time.
    """
    gens = generators(model)
    drift = jnp.asarray(gens.drift)
    ctrl = jnp.asarray(gens.controls)
    coeffs = control_coefficients(u, c, xtalk).T  # (N, 7)
    bleed_gen = jnp.tensordot(bleed_direction(c, xtalk), ctrl, axes=1)
    times = stage_times(model, substeps)
    with jax.ensure_compile_time_eval():
        env = np.asarray(flattop_env(times, model.gate_time, env_steepness))
    sigma = env * jnp.sin(bleed_frequency(c, xtalk) * times)
    h = model.dt / substeps

    def substep(v, sig, L):
        l0 = L + sig[0] * bleed_gen
        l1 = L + sig[1] * bleed_gen
        l2 = L + sig[2] * bleed_gen
        k1 = l0 @ v
        k2 = l1 @ (v + 0.5 * h * k1)
        k3 = l1 @ (v + 0.5 * h * k2)
        k4 = l2 @ (v + h * k3)
        return v + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    def step(v, xs):
        a, sig = xs
        L = drift + jnp.tensordot(a, ctrl, axes=1)
        v, _ = jax.lax.scan(lambda vv, s: (substep(vv, s, L), None), v, sig)
        return v

    return step, (coeffs, sigma)


def propagate_coords(v0, u, c, model, xtalk, substeps, env_steepness):
    """Integrate coordinates ``v0`` (D, B) through the gate; traceable.

    Each control step is a checkpoint: reverse mode stores one state per step
    and recomputes the RK4 stages on the way back.
    """
    step, xs = _rk4_step(u, c, model, xtalk, substeps, env_steepness)
    v, _ = jax.lax.scan(jax.checkpoint(lambda v, x: (step(v, x), None)), v0, xs)
    return v


def propagate_coords_trace(v0, u, c, model, xtalk, substeps, env_steepness):
    """Like :func:`propagate_coords` but also returns the state after every step."""
    step, xs = _rk4_step(u, c, model, xtalk, substeps, env_steepness)

    def body(v, x):
        v = step(v, x)
        return v, v

    return jax.lax.scan(body, v0, xs)


@functools.partial(jax.jit, static_argnames=("model", "xtalk", "substeps", "env_steepness"))
def _propagate_jit(v0, u, c, model, xtalk, substeps, env_steepness):
    return propagate_coords(v0, u, c, model, xtalk, substeps, env_steepness)


@functools.partial(jax.jit, static_argnames=("model", "xtalk", "substeps", "env_steepness"))
def _trace_jit(v0, u, c, model, xtalk, substeps, env_steepness):
    return propagate_coords_trace(v0, u, c, model, xtalk, substeps, env_steepness)[1]


class NonFiniteError(FloatingPointError):
    pass


def check_waveforms_finite(u):
    bad = np.argwhere(~np.isfinite(np.asarray(u)))
    if bad.size:
        ch, k = bad[0]
        raise NonFiniteError(f"non-finite control sample at step {k}, channel {ch}")


def propagate(rho0, waveforms, condition, model, xtalk, substeps=8, env_steepness=40.0):
    """Evolve density matrices ``rho0`` (d, d) or (B, d, d) through the gate; returns rho(T)."""
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    u = np.asarray(getattr(waveforms, "u", waveforms), dtype=float)
    if u.shape != (7, model.n_steps):
        raise ValueError(f"waveforms must have shape (7, {model.n_steps}), got {u.shape}")
    check_waveforms_finite(u)
    c = np.asarray(as_condition_array(condition), dtype=float)
    rho0 = np.asarray(rho0, dtype=complex)
    single = rho0.ndim == 2
    batch = rho0[None] if single else rho0
    v0 = np.asarray(to_coords(batch)).T
    v = _propagate_jit(v0, u, c, model, xtalk, int(substeps), float(env_steepness))
    v = np.asarray(v)
    if not np.all(np.isfinite(v)):
        trace = np.asarray(_trace_jit(v0, u, c, model, xtalk, int(substeps), float(env_steepness)))
        step = int(np.argmax(~np.all(np.isfinite(trace), axis=(1, 2))))
        ch = int(np.argmax(np.abs(u[:, step])))
        raise NonFiniteError(f"non-finite state at step {step} (largest control channel {ch})")
    out = np.asarray(from_coords(v.T))
    return out[0] if single else out


def haar_random_two_qubit_state(rng):
    z = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    return z / np.linalg.norm(z)


def embed_state(psi4, n_levels):
    """Place a two-qubit state into the truncated two-transmon space."""
    idx = computational_indices(n_levels)
    psi4 = np.asarray(psi4, dtype=complex)
    out = np.zeros(psi4.shape[:-1] + (n_levels * n_levels,), dtype=complex)
    out[..., idx] = psi4
    return out


def density_matrix(psi):
    psi = np.asarray(psi)
    return psi[..., :, None] * psi[..., None, :].conj()
