import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pszm.model import (
    Couplings,
    DisorderSpec,
    ModelParams,
    build_h0,
    build_h1,
    build_hamiltonian,
    logical_operators,
    sample_disordered_params,
    stabilizer,
    symmetry_generators,
)
from pszm.pauli import commutator, multiply, to_dense

from conftest import kron_string

even_n = st.integers(2, 6).map(lambda k: 2 * k)


def test_defaults():
    p = ModelParams()
    assert (p.dt, p.j_e, p.h_x, p.v_xx) == (0.5, math.pi / 5, 0.11, 0.2)


@pytest.mark.parametrize("n", [3, 2, 7, 0])
def test_rejects_bad_sizes(n):
    with pytest.raises(ValueError):
        ModelParams(n_sites=n)


def test_rejects_bad_dt():
    with pytest.raises(ValueError):
        ModelParams(dt=0.0)


def test_dict_round_trip():
    p = ModelParams(n_sites=8, j_o=1.25, v_xx=0.0)
    assert ModelParams.from_dict(p.to_dict()) == p
    assert set(p.to_dict()) == {"n", "j_e", "j_o", "h_x", "v_xx", "dt"}
    with pytest.raises(KeyError):
        ModelParams.from_dict({**p.to_dict(), "hx": 0.1})


def test_h0_small_chain():
    p = ModelParams(n_sites=4, j_e=0.3, j_o=0.7)
    h0 = build_h0(p)
    assert len(h0) == 2
    assert h0.coeff({1: "Z", 2: "X", 3: "Z"}) == -0.3
    assert h0.coeff({2: "Z", 3: "X", 4: "Z"}) == -0.7
    assert len(build_h0(p.replace(j_e=0.0, j_o=0.0))) == 0


def test_h1_small_chain():
    p = ModelParams(n_sites=4, h_x=0.11, v_xx=0.2)
    h1 = build_h1(p)
    assert len(h1) == 7
    for i in range(1, 5):
        assert h1.coeff({i: "X"}) == 0.11
    for i in range(1, 4):
        assert h1.coeff({i: "X", i + 1: "X"}) == 0.2
    assert len(build_h1(p.replace(h_x=0.0, v_xx=0.0))) == 0


@given(even_n)
def test_term_counts(n):
    p = ModelParams(n_sites=n, j_o=0.9)
    assert len(build_h0(p)) == n - 2
    assert len(build_h1(p)) == 2 * n - 1


def test_h0_spectrum_is_symmetric():
    p = ModelParams(n_sites=8, j_e=math.pi / 2, j_o=math.pi / 2, h_x=7 * math.pi / 20, v_xx=0.0)
    w = np.linalg.eigvalsh(to_dense(build_h0(p)))
    np.testing.assert_allclose(np.sort(w), np.sort(-w), atol=1e-12)


def test_stabilizer_examples():
    p = ModelParams(n_sites=4)
    assert stabilizer(p, 1).letters() == {1: "X", 2: "Z"}
    assert stabilizer(p, 2).letters() == {1: "Z", 2: "X", 3: "Z"}
    assert stabilizer(p, 4).letters() == {3: "Z", 4: "X"}
    with pytest.raises(IndexError):
        stabilizer(p, 5)


@given(even_n)
def test_stabilizers_commute_and_square_to_one(n):
    p = ModelParams(n_sites=n)
    ks = [stabilizer(p, m) for m in range(1, n + 1)]
    for a in ks:
        sq = multiply(a, a)
        assert (sq.x_mask, sq.z_mask, sq.phase_exp) == (0, 0, 0)
        for b in ks:
            assert a.commutes_with(b)


def test_logical_algebra():
    p = ModelParams(n_sites=8)
    ops = logical_operators(p)
    assert ops["ZL"].letters() == {1: "Z"}
    assert ops["XL"].letters() == {1: "X", 2: "Z"}
    assert ops["ZR"].letters() == {8: "Z"}
    assert ops["XR"].letters() == {7: "Z", 8: "X"}
    for edge in "LR":
        z, x, y = ops["Z" + edge], ops["X" + edge], ops["Y" + edge]
        assert not z.commutes_with(x)
        assert (multiply(z, x).phase_exp - multiply(x, z).phase_exp) % 4 == 2
        # Y = i X Z
        np.testing.assert_allclose(to_dense(y), 1j * to_dense(x) @ to_dense(z), atol=1e-14)
    for a in ("ZL", "XL", "YL"):
        for b in ("ZR", "XR", "YR"):
            assert ops[a].commutes_with(ops[b])


def test_edge_z_commutes_with_h0():
    p = ModelParams(n_sites=4, j_o=0.9)
    h0 = to_dense(build_h0(p))
    z1 = kron_string(4, {1: "Z"})
    assert np.abs(h0 @ z1 - z1 @ h0).max() < 1e-14
    assert len(commutator(logical_operators(p)["ZL"].to_sum(), build_h0(p))) == 0


def test_symmetry_generators():
    p = ModelParams(n_sites=4)
    g = symmetry_generators(p)
    assert g["G_e"].letters() == {2: "X", 4: "X"}
    assert g["G_o"].letters() == {1: "X", 3: "X"}


@given(even_n, st.floats(0.1, 2.0), st.floats(0, 1), st.floats(-1, 1))
def test_hamiltonian_has_parity_symmetry(n, jo, h, v):
    p = ModelParams(n_sites=n, j_o=jo, h_x=h, v_xx=v)
    h_all = build_hamiltonian(p)
    for g in symmetry_generators(p).values():
        assert len(commutator(h_all, g.to_sum())) == 0
        assert len(commutator(build_h1(p), g.to_sum())) == 0
    gg = multiply(*symmetry_generators(p).values())
    assert len(commutator(gg.to_sum(), h_all)) == 0


@given(even_n)
def test_parity_as_edge_times_stabilizers(n):
    # G_e = Z_L (prod of even-centred K) X_R and G_o = X_L (prod of odd-centred K) Z_R
    p = ModelParams(n_sites=n)
    ops, g = logical_operators(p), symmetry_generators(p)
    acc = ops["ZL"]
    for m in range(2, n, 2):
        acc = multiply(acc, stabilizer(p, m))
    acc = multiply(acc, ops["XR"])
    assert (acc.x_mask, acc.z_mask, acc.phase_exp) == (g["G_e"].x_mask, 0, 0)
    acc = ops["XL"]
    for m in range(3, n, 2):
        acc = multiply(acc, stabilizer(p, m))
    acc = multiply(acc, ops["ZR"])
    assert (acc.x_mask, acc.z_mask, acc.phase_exp) == (g["G_o"].x_mask, 0, 0)


def test_parity_on_stabilizer_sector_dense():
    n = 6
    p = ModelParams(n_sites=n)
    dim = 2**n
    proj = np.eye(dim, dtype=complex)
    for m in range(2, n):
        proj = proj @ (np.eye(dim) + to_dense(stabilizer(p, m))) / 2
    ops = logical_operators(p)
    ge = to_dense(symmetry_generators(p)["G_e"])
    zx = to_dense(ops["ZL"]) @ to_dense(ops["XR"])
    np.testing.assert_allclose(proj @ ge @ proj, proj @ zx @ proj, atol=1e-12)


def _multiplicities(w, decimals=9):
    return Counter(np.round(w, decimals)).values()


def test_h0_levels_have_degeneracy_in_multiples_of_four():
    # uniform couplings add accidental degeneracies on top of the edge fourfold one
    w = np.linalg.eigvalsh(to_dense(build_h0(ModelParams(n_sites=6))))
    assert all(k % 4 == 0 for k in _multiplicities(w))


def test_h0_levels_exactly_fourfold_for_generic_couplings():
    c = sample_disordered_params(ModelParams(n_sites=6), DisorderSpec(seed=11))
    w = np.linalg.eigvalsh(to_dense(build_h0(c)))
    assert set(_multiplicities(w)) == {4}


def test_disorder_is_reproducible_and_in_range():
    base = ModelParams(n_sites=10)
    d = DisorderSpec(seed=123)
    a, b = sample_disordered_params(base, d), sample_disordered_params(base, d)
    np.testing.assert_array_equal(a.j, b.j)
    np.testing.assert_array_equal(a.h, b.h)
    j = a.j[1:-1]
    assert np.all((j >= math.pi / 6) & (j <= 5 * math.pi / 6))
    assert np.all((a.h >= 0.18) & (a.h <= 0.28))
    np.testing.assert_array_equal(a.v, np.full(9, 0.2))
    other = sample_disordered_params(base, d.instance(1))
    assert not np.array_equal(a.j, other.j)


def test_disorder_frozen_draws():
    c = sample_disordered_params(ModelParams(n_sites=4), DisorderSpec(seed=0))
    rng = np.random.Generator(np.random.PCG64(0))
    expect = [rng.uniform(math.pi / 6, 5 * math.pi / 6), rng.uniform(math.pi / 6, 5 * math.pi / 6)]
    np.testing.assert_array_equal(c.j[1:3], expect)


def test_zero_width_disorder_reproduces_uniform_chain():
    base = ModelParams(n_sites=8, j_e=0.4, j_o=0.9, h_x=0.2)
    d = DisorderSpec(j_o_range=(0.9, 0.9), j_e_range=(0.4, 0.4), h_x_range=(0.2, 0.2), seed=5)
    assert build_hamiltonian(sample_disordered_params(base, d)).allclose(build_hamiltonian(base), atol=0)


def test_disorder_spec_validation():
    with pytest.raises(ValueError):
        DisorderSpec(h_x_range=(0.3, 0.2))
    with pytest.raises(ValueError):
        DisorderSpec(seed=-1)


def test_couplings_validate_shapes():
    with pytest.raises(ValueError):
        Couplings(4, np.zeros(3), np.zeros(4), np.zeros(3))
