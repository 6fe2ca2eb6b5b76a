import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import unitary_group

from pszm.hardware import fold_single_qubit_runs, readout_correct, u3_angles, u3_compile
from pszm.model import ModelParams
from pszm.statevec import Circuit, Gate, build_trotter_step, circuit_unitary, phase_aligned_residual


def test_readout_identity_confusion():
    assert readout_correct([0.7, 0.3, 0.0], np.eye(3)) == pytest.approx(0.4)


def test_readout_discards_leakage():
    assert readout_correct([0.6, 0.2, 0.2], np.eye(3)) == pytest.approx(0.5)


def test_readout_inverts_confusion():
    c = np.array([[0.95, 0.04, 0.01], [0.04, 0.93, 0.05], [0.01, 0.03, 0.94]])
    true = np.array([0.8, 0.2, 0.0])
    assert readout_correct(c @ true, c) == pytest.approx(0.6)


@given(st.floats(0.0, 1.0))
def test_readout_round_trip(a):
    c = np.array([[0.9, 0.05, 0.02], [0.08, 0.9, 0.08], [0.02, 0.05, 0.9]])
    true = np.array([a, 1 - a, 0.0])
    assert readout_correct(c @ true, c) == pytest.approx(2 * a - 1, abs=1e-9)


def test_readout_validation():
    with pytest.raises(ValueError):
        readout_correct([0.5, 0.5], np.eye(3))
    with pytest.raises(ValueError):
        readout_correct([0.5, 0.6, 0.0], np.eye(3))
    with pytest.raises(ValueError):
        readout_correct([0.0, 0.0, 1.0], np.eye(3))


def test_u3_examples():
    np.testing.assert_allclose(u3_compile(0, 0, 0), np.eye(2), atol=1e-15)
    x = u3_compile(math.pi, -math.pi / 2, math.pi / 2)
    np.testing.assert_allclose(x, [[0, -1j], [-1j, 0]], atol=1e-15)


@pytest.mark.parametrize("seed", range(20))
def test_u3_angles_round_trip(seed):
    u = unitary_group.rvs(2, random_state=seed)
    theta, phi, lam, alpha = u3_angles(u)
    np.testing.assert_allclose(np.exp(1j * alpha) * u3_compile(theta, phi, lam), u, atol=1e-12)


@pytest.mark.parametrize("u", [np.eye(2), np.diag([1, 1j]), np.array([[0, 1], [1, 0]])])
def test_u3_angles_degenerate(u):
    theta, phi, lam, alpha = u3_angles(u)
    np.testing.assert_allclose(np.exp(1j * alpha) * u3_compile(theta, phi, lam), u, atol=1e-12)


def test_fold_two_x_rotations():
    c = Circuit(1)
    c.add_layer([Gate("X", (1,), (0.3,))])
    c.add_layer([Gate("X", (1,), (0.4,))])
    f = fold_single_qubit_runs(c)
    assert len(f.layers) == 1
    ref = Circuit(1)
    ref.add_layer([Gate("X", (1,), (0.7,))])
    assert phase_aligned_residual(circuit_unitary(f), circuit_unitary(ref)) < 1e-12


def test_fold_trotter_step():
    c = build_trotter_step(ModelParams(n_sites=6, j_o=1.2))
    f = fold_single_qubit_runs(c)
    assert f.two_qubit_layers == c.two_qubit_layers
    assert f.single_qubit_layers <= c.single_qubit_layers
    assert phase_aligned_residual(circuit_unitary(f), circuit_unitary(c)) < 1e-10
