"""Self-checks shared by the CLI and the test suite."""

from dataclasses import replace

import numpy as np

from .controller import init_params
from .crosstalk import CrosstalkParams, NOMINAL
from .evaluation import StaticController, cz_oracle_waveform, evaluate
from .gradients import Problem, finite_diff_grad, loss_and_grad, objective_value
from .objectives import build_ensemble, haar_ensemble
from .quantum import generators
from .seeding import derive_rng


def quiet_crosstalk():
    """Crosstalk model with every sensitivity and the coupler shift switched off."""
    zero = (0.0, 0.0, 0.0)
    return CrosstalkParams(
        r0=0.0, g_j=zero, g_r=zero, g_d1=zero, g_d2=zero, d_mat=(zero,) * 4, kappa=zero, eps_1=0.0, eps_2=0.0
    )


def closed_system(model):
    inf = float("inf")
    return replace(model, t1_1=inf, t1_2=inf, t2_1=inf, t2_2=inf)


def cz_oracle(problem, tol=1e-6):
    """Constant J = pi/T with no drives, no crosstalk and no dissipation must give CZ."""
    pr = replace(problem, model=closed_system(problem.model), xtalk=quiet_crosstalk())
    ens = build_ensemble(np.random.default_rng(0), 0, pr.model.n_levels)
    rep = evaluate(StaticController(cz_oracle_waveform(pr.model), "cz-oracle"), NOMINAL, ens, pr)
    err = abs(1.0 - rep.avg_fidelity)
    return {"avg_fidelity": rep.avg_fidelity, "error": err, "tol": tol, "passed": bool(err <= tol)}


def gradcheck(problem, seeds=(0, 1, 2), coords_per_seed=17, n_steps=10, substeps=2, n_states=4, step=1e-5, rtol=1e-4, gmin=1e-8):
    """Reverse-mode gradient against central differences on random coordinates.

    Each seed draws fresh weights, a random condition, a Haar ensemble and the
    coordinates to probe. Returns ``(rows, passed)``.
    """
    pr = replace(problem, model=replace(problem.model, n_steps=n_steps), substeps=substeps)
    rows = []
    for seed in seeds:
        rng = derive_rng(seed, "gradcheck")
        theta = init_params(rng, pr.controller).flatten()
        theta = theta + rng.normal(scale=0.1, size=theta.size)
        c = rng.uniform(-0.25, 0.25, size=3)
        ens = haar_ensemble(rng, n_states, pr.model.n_levels)
        coords = rng.choice(theta.size, size=coords_per_seed, replace=False)
        g = loss_and_grad(theta, [c], ens, pr).grad
        fd = finite_diff_grad(lambda x: objective_value(x, [c], ens, pr)[0], theta, step, coords)
        for i in coords:
            checked = bool(abs(g[i]) > gmin)
            rel = float(abs(fd[i] - g[i]) / abs(g[i])) if checked else 0.0
            rows.append(
                {
                    "seed": seed,
                    "coord": int(i),
                    "grad": float(g[i]),
                    "fd": float(fd[i]),
                    "rel_err": rel,
                    "checked": checked,
                    "passed": (not checked) or rel <= rtol,
                }
            )
    return rows, all(r["passed"] for r in rows)


# RK4 is stable on the imaginary axis for |h * lambda| below 2*sqrt(2).
RK4_IMAG_LIMIT = 2.0 * np.sqrt(2.0)


def rk4_stability_product(problem):
    """Substep size times the drift Liouvillian's spectral radius (controls add to this)."""
    rho = float(np.max(np.abs(np.linalg.eigvals(generators(problem.model).drift))))
    return problem.model.dt / problem.substeps * rho


def random_density_matrix(rng, dim, rank=None):
    rank = rank or dim
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def propagation_invariants(problem, theta, c, rho0):
    """Violations of trace, Hermiticity and positivity after one gate, plus
    the purity drift of the same pure input in the closed system.

    ``rho0`` is a (2, d, d) pair: a mixed input and a pure input.
    """
    from .gradients import pgnc_waveforms
    from .quantum import propagate

    u = np.asarray(pgnc_waveforms(np.asarray(theta, float), np.asarray(c, float), problem))
    kw = dict(substeps=problem.substeps, env_steepness=problem.controller.env_steepness)
    out = propagate(rho0, u, c, problem.model, problem.xtalk, **kw)
    closed = propagate(rho0[1], u, c, closed_system(problem.model), problem.xtalk, **kw)
    eig = min(float(np.min(np.linalg.eigvalsh(0.5 * (r + r.conj().T)))) for r in out)
    p0 = float(np.real(np.trace(rho0[1] @ rho0[1])))
    return {
        "trace_err": float(max(abs(np.trace(r) - 1.0) for r in out)),
        "herm_err": float(max(np.max(np.abs(r - r.conj().T)) for r in out)),
        "min_eig": eig,
        "purity_err": abs(float(np.real(np.trace(closed @ closed))) - p0),
    }


def invariant_draw(problem, rng, full_space=False):
    """One random (weights, condition, inputs) draw for :func:`propagation_invariants`.

    Weights come from the controller's initialisation distribution and the
    condition is uniform over [-1, 1]^3. Inputs are an embedded Haar state and
    an even mixture of two, unless ``full_space`` asks for states spread over
    all levels (a stress case that resolves RK4 truncation at 8 substeps).
    """
    from .quantum import density_matrix, embed_state, haar_random_two_qubit_state

    n = problem.model.n_levels
    theta = init_params(rng, problem.controller).flatten()
    c = rng.uniform(-1.0, 1.0, size=3)
    if full_space:
        psi = rng.standard_normal(n * n) + 1j * rng.standard_normal(n * n)
        psi /= np.linalg.norm(psi)
        return theta, c, np.stack([random_density_matrix(rng, n * n, int(rng.integers(1, n * n + 1))), np.outer(psi, psi.conj())])
    a = density_matrix(embed_state(haar_random_two_qubit_state(rng), n))
    b = density_matrix(embed_state(haar_random_two_qubit_state(rng), n))
    return theta, c, np.stack([0.5 * (a + b), b])
