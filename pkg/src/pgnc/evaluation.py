"""Evaluation protocols: fidelity distributions, condition scans, detuning maps.

All protocols draw their Haar ensembles through :func:`eval_ensemble`, keyed
by the master seed and the rounded condition coordinates. Two controllers
evaluated at the same condition therefore always see the same input states,
and a condition reached by two different grids gets the same states too.
"""

from dataclasses import dataclass

import numpy as np

from .crosstalk import ConditionVector, NOMINAL, as_condition_array
from .gradients import Problem, evaluate_waveform, pgnc_waveforms
from .objectives import EvalReport, clamp_unit, haar_ensemble
from .seeding import cell_index, derive_rng
from .trainers import TrainConfig, train_grape

# Declared evaluation conditions c0..c3.
EVAL_CONDITIONS = (
    ConditionVector(0.0, 0.0, 0.0),
    ConditionVector(0.1, 0.1, -0.1),
    ConditionVector(0.25, 0.0, 0.0),
    ConditionVector(0.25, 0.25, -0.25),
)


@dataclass
class PGNCController:
    params: object
    problem: Problem
    name: str = "pgnc"

    def waveform(self, c):
        c = np.asarray(as_condition_array(c), dtype=float)
        return np.asarray(pgnc_waveforms(self.params.flatten(), c, self.problem))


@dataclass
class StaticController:
    """A fixed waveform, applied unchanged under every condition."""

    u: np.ndarray
    name: str = "static"

    def waveform(self, c):
        return np.asarray(self.u)


def cz_oracle_waveform(model):
    """Constant coupling J = pi/T, all other channels off."""
    u = np.zeros((7, model.n_steps))
    u[6] = np.pi / model.gate_time
    return u


def eval_ensemble(seed, c, n_states, n_levels):
    c = np.asarray(as_condition_array(c), dtype=float)
    return haar_ensemble(derive_rng(seed, "eval-ensemble", cell_index(*c)), n_states, n_levels)


def evaluate(controller, c, ensemble, problem, detuning=(0.0, 0.0)):
    """One controller on one ensemble; detuning offsets shift the two delta channels."""
    c_arr = np.asarray(as_condition_array(c), dtype=float)
    u = np.array(controller.waveform(c_arr), dtype=float)
    u[4] += detuning[0]
    u[5] += detuning[1]
    out = evaluate_waveform(u, c_arr, ensemble, problem)
    return EvalReport(
        condition=c_arr,
        fidelities=clamp_unit(out["fidelities"]),
        leakage=float(out["leakage"]),
        smoothness=float(out["smoothness"]),
        objective=float(out["objective"]),
        controller=getattr(controller, "name", ""),
        ensemble_digest=ensemble.digest(),
    )


def eval_distribution(controller, c, n_states, seed, problem):
    """Fidelity distribution over ``n_states`` Haar inputs at condition ``c``."""
    if n_states < 1:
        raise ValueError("n_states must be >= 1")
    ens = eval_ensemble(seed, c, n_states, problem.model.n_levels)
    return evaluate(controller, c, ens, problem)


def offgrid_scan(pgnc, baselines, c_i_values, c_q_values, c_f_values, n_states, seed, problem):
    """Paired avgF over a (c_I, c_Q) grid for each fixed c_f.

    Returns a list of row dicts: avgF for every controller and PGNC minus each
    baseline.
    """
    rows = []
    for c_f in c_f_values:
        for c_i in c_i_values:
            for c_q in c_q_values:
                c = np.array([c_i, c_q, c_f], dtype=float)
                ens = eval_ensemble(seed, c, n_states, problem.model.n_levels)
                ref = evaluate(pgnc, c, ens, problem)
                row = {"c_i": c[0], "c_q": c[1], "c_f": c[2], "ensemble": ens.digest(), f"avgF_{pgnc.name}": ref.avg_fidelity}
                for b in baselines:
                    rep = evaluate(b, c, ens, problem)
                    row[f"avgF_{b.name}"] = rep.avg_fidelity
                    row[f"delta_{b.name}"] = ref.avg_fidelity - rep.avg_fidelity
                rows.append(row)
    return rows


def detuning_scan(controller, offsets_1, offsets_2, n_states, seed, problem, threshold=0.99):
    """avgF over additive detuning offsets (rad/ns) at the nominal condition."""
    ens = eval_ensemble(seed, NOMINAL, n_states, problem.model.n_levels)
    rows = []
    for d1 in offsets_1:
        for d2 in offsets_2:
            rep = evaluate(controller, NOMINAL, ens, problem, detuning=(float(d1), float(d2)))
            rows.append(
                {
                    "delta_1": float(d1),
                    "delta_2": float(d2),
                    "avg_fidelity": rep.avg_fidelity,
                    "leakage": rep.leakage,
                    "above_threshold": rep.avg_fidelity > threshold,
                }
            )
    return rows


def per_condition_benchmark(conditions, pgnc, problem, grape_cfg=None, n_states=128, seed=0, init_scale=0.1, grape_trainer=None):
    """Conditioned PGNC (trained once, passed in) against GRAPE re-optimized per condition.

    Returns ``(rows, grape_params)`` where rows hold one fidelity per
    (condition, controller, state), sorted within each group.
    """
    grape_cfg = grape_cfg or TrainConfig(seed=seed)
    trainer = grape_trainer or train_grape
    rows, grape_params = [], []
    for k, c in enumerate(conditions):
        c = ConditionVector.from_array(as_condition_array(c))
        params, _ = trainer(grape_cfg, c, problem, init_scale=init_scale)
        grape_params.append((c, params))
        ens = eval_ensemble(seed, c, n_states, problem.model.n_levels)
        for ctrl in (pgnc, StaticController(params.waveforms(problem), name="grape")):
            rep = evaluate(ctrl, c, ens, problem)
            for i, f in enumerate(np.sort(rep.fidelities)):
                rows.append(
                    {
                        "condition": k,
                        "c_i": c.c_i,
                        "c_q": c.c_q,
                        "c_f": c.c_f,
                        "trained_at": "offline" if ctrl is pgnc else f"{c.c_i:.6g},{c.c_q:.6g},{c.c_f:.6g}",
                        "controller": ctrl.name,
                        "rank": i,
                        "fidelity": float(f),
                    }
                )
    return rows, grape_params
