"""Differentiable forward pass and exact reverse-mode gradients.

The forward pass propagates the 16 Hermitian basis elements of the
computational block once per condition; any input ensemble then follows by
linearity of the (discretized) dynamics. Gradients are taken by JAX reverse
mode through that exact discrete computation, with one checkpoint per control
step inside the propagator.
"""

import functools
from dataclasses import dataclass, field

import jax
import jax.numpy as jnp
import numpy as np

from .controller import ControllerConfig, ControllerParams, controller_waveform_array, flattop_env, step_midpoints
from .crosstalk import CrosstalkParams, as_condition_array
from .objectives import ObjectiveWeights, aggregate, comp_coord_index, per_condition_objective, smoothness
from .quantum import DeviceModel, propagate_coords

TERMS = ("objective", "infidelity", "leakage", "smoothness")


@dataclass(frozen=True)
class Problem:
    """Everything static about a simulation: physics, controller shape, weights."""

    model: DeviceModel = field(default_factory=DeviceModel)
    xtalk: CrosstalkParams = field(default_factory=CrosstalkParams)
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    weights: ObjectiveWeights = field(default_factory=ObjectiveWeights)
    substeps: int = 8


@dataclass
class GradientResult:
    value: float
    grad: np.ndarray
    diagnostics: dict


def _comp_block_basis(model):
    d = model.dim
    idx = comp_coord_index(model.n_levels)
    v0 = np.zeros((d * d, idx.size))
    v0[idx, np.arange(idx.size)] = 1.0
    return v0


def _p_comp_coords(model):
    d = model.dim
    nl = model.n_levels
    p = np.zeros(d * d)
    for i in (0, 1, nl, nl + 1):
        p[d * i + i] = 1.0
    return p


def condition_terms(u, c, inputs, targets, problem):
    """Per-state fidelities, leakage and smoothness for one condition (traceable).

    ``inputs`` are (M, 16) computational-block coordinates of the initial
    states and ``targets`` are (M, D) coordinates of the target projectors.
    """
    model = problem.model
    phi = propagate_coords(
        jnp.asarray(_comp_block_basis(model)),
        u,
        c,
        model,
        problem.xtalk,
        problem.substeps,
        problem.controller.env_steepness,
    )
    final = phi @ inputs.T  # (D, M)
    fids = jnp.sum(targets.T * final, axis=0)
    pops = jnp.asarray(_p_comp_coords(model)) @ final
    leak = jnp.mean(1.0 - pops)
    smooth = smoothness(u, model.gate_time)
    avg_f = jnp.mean(fids)
    obj = per_condition_objective(avg_f, leak, smooth, problem.weights)
    return {"fidelities": fids, "avg_fidelity": avg_f, "leakage": leak, "smoothness": smooth, "objective": obj}


def _aggregate_terms(per_cond, weights):
    total = aggregate(per_cond["objective"], weights.mode, weights.alpha)
    aux = dict(per_cond)
    aux["total"] = total
    return total, aux


def pgnc_waveforms(theta_flat, c, problem):
    m = problem.model
    return controller_waveform_array(theta_flat, c, problem.controller, m.gate_time, m.n_steps)


def _pgnc_loss(theta_flat, conditions, inputs, targets, problem):
    def one(c):
        return condition_terms(pgnc_waveforms(theta_flat, c, problem), c, inputs, targets, problem)

    return _aggregate_terms(jax.vmap(one)(conditions), problem.weights)


# --- GRAPE parameterisation -----------------------------------------------

def grape_node_times(gate_time, n_nodes):
    return np.linspace(0.0, gate_time, n_nodes)


def grape_waveforms(nodes, controller, model):
    """Linear interpolation of node latents at step midpoints, then envelope and tanh bounds.

    ``nodes`` is (7, N) in waveform channel order.
    """
    nodes = jnp.asarray(nodes)
    tn = grape_node_times(model.gate_time, nodes.shape[1])
    tm = step_midpoints(model.gate_time, model.n_steps)
    # interpolation weights are fixed, so the map is a constant matrix
    w = np.stack([np.interp(tm, tn, np.eye(tn.size)[k]) for k in range(tn.size)])  # (nodes, N)
    latent = nodes @ jnp.asarray(w)
    with jax.ensure_compile_time_eval():
        env = np.asarray(flattop_env(tm, model.gate_time, controller.env_steepness))
    return jnp.asarray(controller.bounds)[:, None] * env[None, :] * jnp.tanh(latent)


def _grape_loss(nodes_flat, conditions, inputs, targets, problem):
    nodes = nodes_flat.reshape(7, -1)
    u = grape_waveforms(nodes, problem.controller, problem.model)

    def one(c):
        return condition_terms(u, c, inputs, targets, problem)

    return _aggregate_terms(jax.vmap(one)(conditions), problem.weights)


_LOSSES = {"pgnc": _pgnc_loss, "grape": _grape_loss}


@functools.partial(jax.jit, static_argnames=("kind", "problem"))
def _value_and_grad(params, conditions, inputs, targets, kind, problem):
    return jax.value_and_grad(_LOSSES[kind], has_aux=True)(params, conditions, inputs, targets, problem)


@functools.partial(jax.jit, static_argnames=("kind", "problem"))
def _value(params, conditions, inputs, targets, kind, problem):
    return _LOSSES[kind](params, conditions, inputs, targets, problem)


@functools.partial(jax.jit, static_argnames=("problem",))
def _evaluate_waveform(u, c, inputs, targets, problem):
    return condition_terms(u, c, inputs, targets, problem)


def _flat_params(theta):
    if isinstance(theta, ControllerParams):
        return theta.flatten()
    return np.asarray(getattr(theta, "nodes", theta), dtype=float).ravel()


def _stack_conditions(conditions):
    conds = np.array([np.asarray(as_condition_array(c), dtype=float) for c in conditions])
    if conds.ndim != 2 or conds.shape[0] < 1 or conds.shape[1] != 3:
        raise ValueError("need at least one 3-component condition")
    return conds


def _prepare(theta, conditions, ensemble):
    flat = _flat_params(theta)
    if not np.all(np.isfinite(flat)):
        raise FloatingPointError("non-finite parameters")
    return flat, _stack_conditions(conditions), ensemble.input_coords(), ensemble.target_coords()


def _diagnostics(aux):
    d = {k: np.asarray(v) for k, v in aux.items()}
    d["infidelity"] = 1.0 - d["avg_fidelity"]
    return d


def _check_finite(value, grad, diag):
    for term in TERMS:
        if not np.all(np.isfinite(diag[term])):
            raise FloatingPointError(f"non-finite {term} term")
    if not np.isfinite(value):
        raise FloatingPointError("non-finite total objective")
    if not np.all(np.isfinite(grad)):
        raise FloatingPointError("non-finite gradient")


def loss_and_grad(theta, conditions, ensemble, problem, kind="pgnc"):
    """Aggregated objective and its exact gradient w.r.t. the flat parameter vector.

    ``kind`` selects the parameterisation: ``"pgnc"`` (controller weights in
    :meth:`ControllerParams.flatten` order) or ``"grape"`` (7 x N node latents).
    """
    flat, conds, inputs, targets = _prepare(theta, conditions, ensemble)
    (value, aux), grad = _value_and_grad(flat, conds, inputs, targets, kind, problem)
    value = float(value)
    grad = np.asarray(grad)
    diag = _diagnostics(aux)
    _check_finite(value, grad, diag)
    return GradientResult(value=value, grad=grad, diagnostics=diag)


def objective_value(theta, conditions, ensemble, problem, kind="pgnc"):
    """Forward-only evaluation of the aggregated objective."""
    flat, conds, inputs, targets = _prepare(theta, conditions, ensemble)
    value, aux = _value(flat, conds, inputs, targets, kind, problem)
    return float(value), _diagnostics(aux)


def evaluate_waveform(u, c, ensemble, problem):
    """Forward terms for a fixed waveform under condition ``c`` (no gradient)."""
    c = np.asarray(as_condition_array(c), dtype=float)
    out = _evaluate_waveform(
        np.asarray(u, dtype=float), c, ensemble.input_coords(), ensemble.target_coords(), problem
    )
    return {k: np.asarray(v) for k, v in out.items()}


def finite_diff_grad(fun, x, step=1e-5, coords=None):
    """Central-difference gradient of scalar ``fun`` at ``x`` (optionally only ``coords``)."""
    if not step > 0:
        raise ValueError("step must be > 0")
    x = np.asarray(x, dtype=float)
    coords = range(x.size) if coords is None else coords
    g = np.zeros(x.size)
    for i in coords:
        xp = x.copy()
        xm = x.copy()
        xp[i] += step
        xm[i] -= step
        g[i] = (fun(xp) - fun(xm)) / (2.0 * step)
    return g
