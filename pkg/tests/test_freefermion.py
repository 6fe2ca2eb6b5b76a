import itertools
import math

import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given
from hypothesis import strategies as st

from pszm.freefermion import (
    MIN_SAMPLES,
    MajoranaMonomial,
    ResolutionError,
    UnsupportedRegimeError,
    build_propagator,
    edge_time_series,
    fft_spectrum,
    initial_moments,
    jordan_wigner,
    majorana_string,
    peak_offsets,
    quasi_energies,
    sector_indices,
    spectroscopy_sweep,
    split_edge_bulk,
    to_pauli,
)
from pszm.model import ModelParams, build_h0, build_h1, logical_operators, stabilizer
from pszm.pauli import PauliString, multiply, to_dense
from pszm.statevec import InitialStateSpec, evolve, prepare_initial

from conftest import site_letters


def free(n, **kw):
    kw.setdefault("v_xx", 0.0)
    return ModelParams(n_sites=n, **kw)


def step_unitary(p):
    return sla.expm(-1j * p.dt * to_dense(build_h1(p))) @ sla.expm(-1j * p.dt * to_dense(build_h0(p)))


@pytest.mark.parametrize("n", [1, 3, 5])
def test_majoranas_anticommute_and_square_to_one(n):
    gam = [to_dense(majorana_string(n, k)) for k in range(1, 2 * n + 1)]
    eye = np.eye(2**n)
    for a, b in itertools.product(range(2 * n), repeat=2):
        np.testing.assert_allclose(gam[a] @ gam[b] + gam[b] @ gam[a], 2 * eye * (a == b), atol=1e-12)


def test_first_majoranas():
    assert majorana_string(3, 1) == PauliString(3, 0, 1, 2)
    assert majorana_string(3, 2) == PauliString.from_sites(3, {1: "Y"})
    with pytest.raises(IndexError):
        majorana_string(3, 7)


def test_x_and_stabilizer_as_majorana_pairs():
    n = 6
    for i in range(1, n + 1):
        x = multiply(majorana_string(n, 2 * i - 1), majorana_string(n, 2 * i))
        assert PauliString(n, x.x_mask, x.z_mask, x.phase_exp + 3) == PauliString.from_sites(n, {i: "X"})
    for m in range(2, n):
        k = multiply(majorana_string(n, 2 * m - 2), majorana_string(n, 2 * m + 1))
        assert PauliString(n, k.x_mask, k.z_mask, k.phase_exp + 3) == stabilizer(ModelParams(n_sites=n), m)


@given(st.integers(1, 7).flatmap(lambda n: st.tuples(st.just(n), site_letters(n), st.integers(0, 3))))
def test_jordan_wigner_round_trip(args):
    n, letters, phase = args
    base = PauliString.from_sites(n, letters)
    s = PauliString(n, base.x_mask, base.z_mask, base.phase_exp + phase)
    assert to_pauli(jordan_wigner(s)) == s


def test_monomial_validation_and_labels():
    with pytest.raises(ValueError):
        MajoranaMonomial(3, (2, 1))
    m = MajoranaMonomial(3, (1, 4), 3)
    assert m.labels() == ["a1", "b2"]
    assert str(m) == "-i a1 b2"
    assert m.phase == -1j


def test_logicals_are_single_majoranas_up_to_parity():
    p = ModelParams(n_sites=6)
    ops = logical_operators(p)
    assert jordan_wigner(ops["ZL"]).indices == (1,)
    assert jordan_wigner(ops["XL"]).indices == (3,)


@pytest.mark.parametrize("n", [4, 6])
def test_propagator_is_heisenberg_map(n):
    p = free(n, j_o=1.1, h_x=0.3)
    o = build_propagator(p).matrix
    u = step_unitary(p)
    gam = [to_dense(majorana_string(n, k)) for k in range(1, 2 * n + 1)]
    for j in range(2 * n):
        moved = u.conj().T @ gam[j] @ u
        row = [np.trace(moved @ gam[k]).real / 2**n for k in range(2 * n)]
        np.testing.assert_allclose(row, o[j], atol=1e-12)
    np.testing.assert_allclose(o @ o.T, np.eye(2 * n), atol=1e-12)


def test_chains_decouple_by_site_parity():
    o = build_propagator(free(10, j_o=0.9)).matrix
    odd, even = sector_indices(10, "odd"), sector_indices(10, "even")
    assert np.abs(o[np.ix_(odd, even)]).max() == 0
    assert np.abs(o[np.ix_(even, odd)]).max() == 0
    with pytest.raises(ValueError):
        sector_indices(10, "both")


def test_quasi_energies_build_the_many_body_spectrum():
    p = free(4, j_o=1.3, h_x=0.4)
    eps = np.sort(quasi_energies(build_propagator(p)))[-4:]
    phases = np.sort(np.angle(np.linalg.eigvals(step_unitary(p))))
    combos = [np.angle(np.exp(-1j * p.dt * np.dot(eps, np.array(s) - 0.5))) for s in itertools.product([0, 1], repeat=4)]
    np.testing.assert_allclose(np.sort(combos), phases, atol=1e-10)


def test_quasi_energies_symmetric_and_in_zone():
    p = free(10, j_o=0.8)
    q = quasi_energies(build_propagator(p))
    np.testing.assert_allclose(np.sort(-q), q, atol=1e-12)
    assert np.all(np.abs(q) <= math.pi / p.dt + 1e-12)
    qo = quasi_energies(build_propagator(p), "odd")
    qe = quasi_energies(build_propagator(p), "even")
    np.testing.assert_allclose(np.sort(np.concatenate([qo, qe])), q, atol=1e-10)


def test_odd_chain_depends_only_on_je():
    a = quasi_energies(build_propagator(free(8, j_o=0.3)), "odd")
    b = quasi_energies(build_propagator(free(8, j_o=1.7)), "odd")
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_interactions_rejected():
    with pytest.raises(UnsupportedRegimeError):
        build_propagator(ModelParams(n_sites=6, v_xx=0.1))
    c = free(6).couplings()
    with pytest.raises(ValueError):
        build_propagator(c)
    build_propagator(c, 0.5)


def test_moments_need_product_state():
    with pytest.raises(UnsupportedRegimeError):
        initial_moments(6, InitialStateSpec("cluster_z"))


@pytest.mark.parametrize("kind", ["product_z", "product_x_edges"])
@pytest.mark.parametrize("n", [6, 8])
def test_edge_series_match_statevector(kind, n):
    p = free(n, j_o=1.2, h_x=0.35)
    spec = InitialStateSpec(kind)
    ff = edge_time_series(build_propagator(p), initial_moments(p, spec), 15)
    sv = evolve(prepare_initial(p, spec), p, 15, dict(logical_operators(p).items()))
    for k in ("ZL", "ZR", "XL", "XR"):
        np.testing.assert_allclose(ff[k], sv.values[k], atol=1e-10)


def test_large_chain_runs_fast():
    p = free(128, j_o=0.9)
    s = edge_time_series(build_propagator(p), initial_moments(p, InitialStateSpec("product_z")), 200)
    assert np.all(np.abs(s["ZL"]) <= 1 + 1e-12)


def test_fft_single_tone():
    dt, size = 0.5, 128
    w0 = 2 * math.pi * 9 / (size * dt)
    sp = fft_spectrum(np.cos(w0 * dt * np.arange(size)), dt)
    np.testing.assert_allclose(sp.peaks, [-w0, w0], atol=1e-12)
    np.testing.assert_allclose(sp.refined, sp.peaks, atol=1e-12)
    assert sp.bin_width == pytest.approx(2 * math.pi / (size * dt))
    assert sp.amplitude.max() == pytest.approx(0.5)


def test_fft_errors():
    with pytest.raises(ResolutionError):
        fft_spectrum(np.zeros(MIN_SAMPLES - 1), 0.5)
    with pytest.raises(ValueError):
        fft_spectrum(np.zeros(100), 0.5, window="blackman")
    with pytest.raises(ValueError):
        fft_spectrum(np.zeros(100), 0.5, zero_pad=0)


def test_split_edge_bulk():
    edge, bulk = split_edge_bulk(np.array([-1.0, 0.1, 1.0, 2.0]))
    assert edge == 0.1
    np.testing.assert_allclose(bulk, [1.0, 2.0])
    edge, bulk = split_edge_bulk(np.array([0.9, 1.0]))
    assert edge == 0.0


def test_spectroscopy_peaks_sit_on_quasi_energies():
    base = free(8, j_e=math.pi / 2, h_x=7 * math.pi / 20)
    res = spectroscopy_sweep(base, np.linspace(0.7, 1.3, 7), cycles=150)
    offs = peak_offsets(res)
    assert offs.shape == (7,)
    assert offs.max() <= 1.0
    assert all(len(p) for p in res.peaks_l)
    threaded = spectroscopy_sweep(base, np.linspace(0.7, 1.3, 7), cycles=150, threads=3)
    np.testing.assert_array_equal(threaded.amplitude_r, res.amplitude_r)
    rows = res.summary()
    assert set(rows[0]) == {"ratio", "delta", "Delta_L", "Delta_R", "zeta", "bin_width"}


def test_spectroscopy_resolution_error():
    with pytest.raises(ResolutionError):
        spectroscopy_sweep(free(6), [1.0], cycles=40)


def test_field_only_chain_quasi_energies():
    p = free(8, j_e=0.0, j_o=0.0, h_x=0.7)
    q = quasi_energies(build_propagator(p))
    np.testing.assert_allclose(np.abs(q), 1.4, atol=1e-12)
    assert (q > 0).sum() == 8
