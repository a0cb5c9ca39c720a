import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pgnc.objectives import (
    CZ,
    ObjectiveWeights,
    StateEnsemble,
    aggregate,
    avg_fidelity,
    build_ensemble,
    cvar_count,
    leakage,
    per_condition_objective,
    smoothness,
    state_fidelity,
)
from pgnc.quantum import DeviceModel, build_operators, density_matrix, embed_state

P_COMP = build_operators(DeviceModel()).p_comp
finite = st.floats(-10, 10, allow_nan=False)


def test_weights_validation():
    with pytest.raises(ValueError):
        ObjectiveWeights(w_leak=-1.0)
    with pytest.raises(ValueError, match="mode"):
        ObjectiveWeights(mode="median")
    with pytest.raises(ValueError, match="alpha"):
        ObjectiveWeights(mode="cvar", alpha=0.0)


def test_ensemble_composition(rng):
    ens = build_ensemble(rng, 0, 3)
    assert len(ens) == 16
    assert all(t.startswith("product:") for t in ens.tags)
    ens = build_ensemble(rng, 4, 3)
    assert len(ens) == 20 and ens.tags[-1] == "haar"
    with pytest.raises(ValueError):
        build_ensemble(rng, -1, 3)


def test_cz_target_of_plus_plus(rng):
    ens = build_ensemble(rng, 0, 3)
    k = ens.tags.index("product:++")
    np.testing.assert_allclose(ens.inputs[k] @ CZ.T, [0.5, 0.5, 0.5, -0.5])


def test_cz_targets_on_basis_states(rng):
    ens = build_ensemble(rng, 0, 3)
    for lab, sign in (("00", 1), ("01", 1), ("10", 1), ("11", -1)):
        k = ens.tags.index(f"product:{lab}")
        np.testing.assert_allclose(ens.targets[k], sign * ens.embedded_inputs[k])


def test_ensemble_rejects_unnormalized():
    with pytest.raises(ValueError, match="normalized"):
        StateEnsemble(np.ones((1, 4)), ["x"], 3)


def test_state_fidelity_examples():
    tgt = embed_state(np.array([0.5, 0.5, 0.5, -0.5]), 3)
    assert float(state_fidelity(density_matrix(tgt), tgt)) == pytest.approx(1.0)
    mixed = P_COMP / 4.0
    assert float(state_fidelity(mixed, tgt)) == pytest.approx(0.25)
    orth = embed_state(np.array([0.5, -0.5, 0.5, 0.5]), 3)
    assert float(state_fidelity(density_matrix(orth), tgt)) == pytest.approx(0.0, abs=1e-16)


def test_avg_fidelity_examples():
    assert float(avg_fidelity([1.0, 1.0, 1.0])) == 1.0
    assert float(avg_fidelity([0.9, 1.0])) == pytest.approx(0.95)
    assert float(avg_fidelity([0.37] * 5)) == pytest.approx(0.37)
    with pytest.raises(ValueError):
        avg_fidelity([])


def test_leakage_examples():
    inside = density_matrix(embed_state(np.array([0.5, 0.5, 0.5, 0.5]), 3))
    assert float(leakage([inside], P_COMP)) == pytest.approx(0.0, abs=1e-16)
    out = np.zeros((9, 9))
    out[6, 6] = 1.0  # |2>|0>
    assert float(leakage([out], P_COMP)) == 1.0
    half = 0.5 * inside + 0.5 * out
    assert float(leakage(half, P_COMP)) == pytest.approx(0.5)


def test_smoothness_constant_and_alternating():
    T, N, a = 50.0, 50, 0.02
    assert float(smoothness(np.full((7, N), 0.3), T)) == 0.0
    u = np.zeros((7, N))
    u[2] = a * (-1.0) ** np.arange(N)
    dt = T / N
    assert float(smoothness(u, T)) == pytest.approx((N - 1) * (2 * a) ** 2 / dt / T, rel=1e-14)
    with pytest.raises(ValueError):
        smoothness(np.zeros((7, 1)), T)


@given(lam=st.floats(-5, 5), seed=st.integers(0, 1000))
def test_smoothness_homogeneous(lam, seed):
    u = np.random.default_rng(seed).normal(size=(7, 20))
    assert float(smoothness(lam * u, 50.0)) == pytest.approx(lam**2 * float(smoothness(u, 50.0)), rel=1e-10, abs=1e-300)


def test_per_condition_objective_examples():
    w = ObjectiveWeights()
    assert float(per_condition_objective(1.0, 0.0, 0.0, w)) == 0.0
    assert float(per_condition_objective(0.99, 0.01, 0.0, w)) == pytest.approx(0.0105, rel=1e-12)
    w0 = ObjectiveWeights(w_leak=0.0, w_smooth=0.0)
    assert float(per_condition_objective(0.8, 0.3, 7.0, w0)) == pytest.approx(0.2)


def test_aggregate_examples():
    assert float(aggregate([0.1, 0.3], "mean")) == pytest.approx(0.2)
    assert float(aggregate([0.1, 0.3], "max")) == pytest.approx(0.3)
    assert float(aggregate([0.1, 0.2, 0.3, 0.4], "cvar", 0.5)) == pytest.approx(0.35)
    assert cvar_count(4, 0.5) == 2 and cvar_count(3, 0.01) == 1
    with pytest.raises(ValueError):
        aggregate([], "mean")
    with pytest.raises(ValueError, match="alpha"):
        aggregate([0.1], "cvar", 1.5)


@given(js=st.lists(st.floats(0, 10), min_size=1, max_size=12), alpha=st.floats(0.01, 1.0))
def test_aggregation_ordering(js, alpha):
    m = float(aggregate(js, "mean"))
    c = float(aggregate(js, "cvar", alpha))
    x = float(aggregate(js, "max"))
    assert m <= c + 1e-12 and c <= x + 1e-12


@given(f=st.floats(0, 1), leak=st.floats(0, 1), sm=st.floats(0, 10), d=st.floats(0, 0.5))
def test_objective_monotone(f, leak, sm, d):
    w = ObjectiveWeights()
    base = float(per_condition_objective(f, leak, sm, w))
    assert float(per_condition_objective(min(f + d, 1.0), leak, sm, w)) <= base + 1e-15
    assert float(per_condition_objective(f, leak + d, sm, w)) >= base - 1e-15
    assert float(per_condition_objective(f, leak, sm + d, w)) >= base - 1e-15


def test_ensemble_digest_and_duplication(rng):
    ens = build_ensemble(rng, 2, 3)
    dup = ens.duplicated()
    assert len(dup) == 2 * len(ens)
    assert ens.digest() != dup.digest()
    assert ens.input_coords().shape == (18, 16)
    assert ens.target_coords().shape == (18, 81)
