import math
from dataclasses import replace
from fractions import Fraction

import numpy as np
import pytest

from pgnc.checks import closed_system, quiet_crosstalk
from pgnc.controller import ControllerConfig, init_params, sample_waveforms
from pgnc.crosstalk import CrosstalkParams, NOMINAL
from pgnc.quantum import (
    DeviceModel,
    NonFiniteError,
    build_jump_operators,
    build_operators,
    computational_indices,
    dephasing_rate,
    density_matrix,
    embed_state,
    from_coords,
    haar_random_two_qubit_state,
    hermitian_basis,
    ladder_operator,
    lindblad_rhs,
    propagate,
    to_coords,
)
from pgnc.units import mhz_to_rad_per_ns


def comm(a, b):
    return a @ b - b @ a


def test_ladder_entries():
    b = ladder_operator(3)
    expected = np.zeros((3, 3))
    expected[0, 1] = 1.0
    expected[1, 2] = math.sqrt(2.0)
    np.testing.assert_array_equal(b, expected)


def test_ladder_rejects_single_level():
    with pytest.raises(ValueError):
        ladder_operator(1)
    with pytest.raises(ValueError):
        computational_indices(1)


def test_device_model_rejects_bad_values():
    with pytest.raises(ValueError, match="n_levels"):
        DeviceModel(n_levels=2)
    with pytest.raises(ValueError, match="alpha_1"):
        DeviceModel(alpha_1=0.1)
    with pytest.raises(ValueError, match="gate_time"):
        DeviceModel(gate_time=0.0)
    with pytest.raises(ValueError, match="t1_2"):
        DeviceModel(t1_2=-1.0)


def test_h0_doubly_excited_entry():
    ops = build_operators(DeviceModel())
    # |2>|0> sits at index 3*2 + 0; value frozen from alpha = -2 pi 0.240 rad/ns
    assert ops.h0[6, 6].real == pytest.approx(-1.5079644737231006, rel=1e-15)
    np.testing.assert_allclose(np.diag(ops.h0).imag, 0.0)
    np.testing.assert_array_equal(ops.h0, np.diag(np.diag(ops.h0)))


def test_h0_vanishes_on_computational_block():
    ops = build_operators(DeviceModel())
    idx = computational_indices(3)
    np.testing.assert_array_equal(ops.h0[np.ix_(idx, idx)], np.zeros((4, 4)))


@pytest.mark.parametrize("n_levels", [3, 4])
def test_operator_algebra(n_levels):
    ops = build_operators(DeviceModel(n_levels=n_levels))
    np.testing.assert_allclose(comm(ops.n1, ops.n2), 0.0, atol=1e-14)
    np.testing.assert_allclose(ops.b1 @ ops.n1 - ops.n1 @ ops.b1, ops.b1, atol=1e-14)
    np.testing.assert_allclose(ops.b2 @ ops.n2 - ops.n2 @ ops.b2, ops.b2, atol=1e-14)
    for h in (ops.h1I, ops.h1Q, ops.h2I, ops.h2Q, ops.h0):
        np.testing.assert_allclose(h, h.conj().T, atol=1e-15)
    p = ops.p_comp
    np.testing.assert_allclose(p @ p, p)
    assert np.trace(p).real == pytest.approx(4.0)
    assert np.linalg.matrix_rank(p) == 4


def test_dephasing_rate_table_values():
    oracle = float(Fraction(1, 80000) - Fraction(1, 140000))
    assert oracle == pytest.approx(5.357142857142857e-06, rel=1e-15)
    assert dephasing_rate(70000.0, 80000.0) == pytest.approx(oracle, rel=1e-12)


def test_dephasing_clamp():
    assert dephasing_rate(1000.0, 2000.0) == 0.0
    assert dephasing_rate(50.0, 200.0) == 0.0


def test_jump_operators():
    m = DeviceModel()
    ops = build_operators(m)
    jumps = build_jump_operators(m, ops)
    assert len(jumps) == 4
    np.testing.assert_allclose(jumps[0], ops.b1 / math.sqrt(70000.0))
    np.testing.assert_allclose(jumps[3], ops.n2 * math.sqrt(dephasing_rate(70000.0, 80000.0)))


def test_lindblad_rhs_trivial_cases():
    d = 9
    rho = np.eye(d) / d
    np.testing.assert_array_equal(np.asarray(lindblad_rhs(rho, np.zeros((d, d)), [])), 0.0)
    ops = build_operators(DeviceModel())
    ground = np.zeros((d, d), dtype=complex)
    ground[0, 0] = 1.0
    out = lindblad_rhs(ground, np.zeros((d, d)), [0.1 * ops.b1, 0.2 * ops.b2])
    np.testing.assert_allclose(np.asarray(out), 0.0, atol=1e-16)


def test_lindblad_rhs_traceless_hermitian(rng):
    d = 9

    def herm():
        a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        return a + a.conj().T

    rho = herm()
    out = np.asarray(lindblad_rhs(rho, herm(), [rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)) for _ in range(3)]))
    assert abs(np.trace(out)) < 1e-12 * np.max(np.abs(out))
    np.testing.assert_allclose(out, out.conj().T, atol=1e-12)


def test_lindblad_rhs_dimension_mismatch():
    with pytest.raises(ValueError, match="dimension"):
        lindblad_rhs(np.eye(4), np.eye(9), [])
    with pytest.raises(ValueError, match="dimension"):
        lindblad_rhs(np.eye(9), np.eye(9), [np.eye(4)])


def test_hermitian_coordinates_round_trip(rng):
    basis = hermitian_basis(4)
    gram = np.einsum("kij,lji->kl", basis, basis)
    np.testing.assert_allclose(gram, np.eye(16), atol=1e-15)
    a = rng.normal(size=(9, 9)) + 1j * rng.normal(size=(9, 9))
    h = a + a.conj().T
    np.testing.assert_allclose(np.asarray(from_coords(to_coords(h))), h, atol=1e-14)


def test_idle_closed_system_keeps_ground_state():
    m = closed_system(DeviceModel())
    rho0 = np.zeros((9, 9), dtype=complex)
    rho0[0, 0] = 1.0
    out = propagate(rho0, np.zeros((7, m.n_steps)), NOMINAL, m, CrosstalkParams())
    np.testing.assert_array_equal(out, rho0)


def test_constant_coupling_gives_cz():
    m = closed_system(DeviceModel())
    u = np.zeros((7, m.n_steps))
    u[6] = math.pi / m.gate_time
    psi = embed_state(np.full(4, 0.5), 3)
    out = propagate(density_matrix(psi), u, NOMINAL, m, quiet_crosstalk())
    target = embed_state(np.array([0.5, 0.5, 0.5, -0.5]), 3)
    assert np.real(target.conj() @ out @ target) == pytest.approx(1.0, abs=1e-6)


def test_propagate_batch_matches_single(rng):
    m = DeviceModel()
    cfg = ControllerConfig()
    u = sample_waveforms(init_params(rng, cfg), [0.1, 0.0, -0.1], cfg, m.gate_time, m.n_steps)
    psis = [embed_state(haar_random_two_qubit_state(rng), 3) for _ in range(3)]
    rhos = density_matrix(np.array(psis))
    batch = propagate(rhos, u, [0.1, 0.0, -0.1], m, CrosstalkParams())
    for k in range(3):
        single = propagate(rhos[k], u, [0.1, 0.0, -0.1], m, CrosstalkParams())
        np.testing.assert_allclose(batch[k], single, atol=1e-14)


def test_propagate_rejects_non_finite_controls():
    m = DeviceModel()
    u = np.zeros((7, m.n_steps))
    u[2, 17] = np.nan
    with pytest.raises(NonFiniteError, match="step 17, channel 2"):
        propagate(np.eye(9) / 9, u, NOMINAL, m, CrosstalkParams())


def test_propagate_diagnoses_blowup():
    # 40 ns steps, one substep and a huge detuning: far outside the RK4 stability region
    m = DeviceModel(n_steps=5, gate_time=200.0)
    u = np.zeros((7, 5))
    u[4] = 1e20
    rho0 = density_matrix(np.full(9, 1.0 / 3.0))
    with pytest.raises(NonFiniteError, match="step"):
        propagate(rho0, u, NOMINAL, m, CrosstalkParams(), substeps=1)


def test_propagate_rejects_bad_shape():
    m = DeviceModel()
    with pytest.raises(ValueError, match="shape"):
        propagate(np.eye(9) / 9, np.zeros((7, 3)), NOMINAL, m, CrosstalkParams())
    with pytest.raises(ValueError, match="substeps"):
        propagate(np.eye(9) / 9, np.zeros((7, 50)), NOMINAL, m, CrosstalkParams(), substeps=0)


def test_substep_doubling_converged_on_controller_waveforms(rng):
    m = DeviceModel()
    cfg = ControllerConfig()
    c = [0.2, 0.1, -0.2]
    u = sample_waveforms(init_params(rng, cfg), c, cfg, m.gate_time, m.n_steps)
    psi = embed_state(haar_random_two_qubit_state(rng), 3)
    rho = density_matrix(psi)
    a = propagate(rho, u, c, m, CrosstalkParams(), substeps=8)
    b = propagate(rho, u, c, m, CrosstalkParams(), substeps=16)
    fa = np.real(psi.conj() @ a @ psi)
    fb = np.real(psi.conj() @ b @ psi)
    assert abs(fa - fb) <= 1e-7


def test_haar_state_normalized_and_seeded():
    a = haar_random_two_qubit_state(np.random.default_rng(7))
    b = haar_random_two_qubit_state(np.random.default_rng(7))
    assert np.linalg.norm(a) == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_array_equal(a, b)


def test_haar_first_moment():
    rng = np.random.default_rng(2024)
    n = 100_000
    pops = np.array([abs(haar_random_two_qubit_state(rng)[0]) ** 2 for _ in range(n)])
    # |<00|psi>|^2 is Beta(1, 3): mean 1/4, variance 3/80
    sigma = math.sqrt(3.0 / 80.0 / n)
    assert abs(pops.mean() - 0.25) < 3 * sigma


def test_embed_state():
    out = embed_state(np.array([0, 0, 0, 1.0]), 3)
    assert out[4] == 1.0 and np.count_nonzero(out) == 1
    psi = np.full(4, 0.5)
    e = embed_state(psi, 3)
    p = build_operators(DeviceModel()).p_comp
    assert np.linalg.norm(e) == pytest.approx(1.0)
    assert np.real(e.conj() @ p @ e) == pytest.approx(1.0)
    np.testing.assert_array_equal((p @ e)[computational_indices(3)], psi)
    with pytest.raises(ValueError):
        embed_state(psi, 1)


def test_rates_follow_model_replace():
    m = replace(DeviceModel(), t2_1=140000.0)
    jumps = build_jump_operators(m)
    np.testing.assert_array_equal(jumps[2], 0.0)


def test_unit_conversion():
    assert mhz_to_rad_per_ns(240.0) == pytest.approx(2 * math.pi * 0.240)
