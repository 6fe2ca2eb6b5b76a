import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pszm.freefermion import spectroscopy_sweep
from pszm.model import ModelParams
from pszm.observables import excitation_counts, gap_fit, lifetime, linear_fit, windowed_slope
from pszm.statevec import InitialStateSpec, initial_stabilizer_signs


def test_lifetime_interpolates():
    est = lifetime([1.0, 0.8, 0.6, 0.4, 0.2], name="ZL", ratio=2.0)
    assert est.t_half == pytest.approx(2.5)
    assert not est.censored
    assert (est.name, est.ratio) == ("ZL", 2.0)


def test_lifetime_uses_magnitude():
    assert lifetime([-1.0, -0.7, -0.3]).t_half == pytest.approx(1.5)


def test_lifetime_censored_at_horizon():
    est = lifetime(np.full(31, 0.9))
    assert est.censored
    assert est.t_half == 30.0


def test_lifetime_rejects_bad_start():
    with pytest.raises(ValueError):
        lifetime([0.3, 0.2])
    with pytest.raises(ValueError):
        lifetime([])


def test_counts_of_large_chain_example():
    p = ModelParams(n_sites=100)
    signs = initial_stabilizer_signs(p, InitialStateSpec("cluster_z", (4, 19, 34, 39, 63, 69, 82, 97)))
    c = excitation_counts(signs[1:-1][None, :])
    assert (c.n[0], c.n_o[0], c.n_e[0]) == (16, 6, 10)


@given(st.lists(st.sampled_from([-1.0, 1.0]), min_size=1, max_size=40))
def test_counts_split_by_centre_parity(signs):
    k = np.array(signs)[None, :]
    c = excitation_counts(k)
    assert c.n[0] == signs.count(-1.0)
    assert c.n_e[0] == sum(s == -1.0 for j, s in enumerate(signs) if j % 2 == 0)
    assert c.n[0] == c.n_e[0] + c.n_o[0]


def test_counts_rows():
    c = excitation_counts(np.array([[1.0, -1.0, 0.0], [1.0, 1.0, 1.0]]))
    assert list(c.rows()) == [(0, 1.5, 0.5, 1.0), (1, 0.0, 0.0, 0.0)]


def test_linear_fit_exact_line():
    f = linear_fit([0, 1, 2, 3], [1, 3, 5, 7])
    assert (f.slope, f.intercept, f.r2) == pytest.approx((2.0, 1.0, 1.0))
    assert linear_fit([0, 1], [2, 2]).r2 == 1.0
    with pytest.raises(ValueError):
        linear_fit([1], [1])


def test_windowed_slope():
    y = np.concatenate([np.zeros(10), np.arange(11) * 0.5])
    assert windowed_slope(y, 10, 20) == pytest.approx(0.5)


def test_gap_fit_needs_enough_ratios():
    base = ModelParams(n_sites=8, j_e=np.pi / 2, h_x=7 * np.pi / 20, v_xx=0.0)
    res = spectroscopy_sweep(base, [0.8, 1.2], cycles=150)
    with pytest.raises(ValueError):
        gap_fit(res)


def test_gap_fit_on_sweep():
    base = ModelParams(n_sites=8, j_e=np.pi / 2, h_x=7 * np.pi / 20, v_xx=0.0)
    res = spectroscopy_sweep(base, np.linspace(0.7, 1.3, 7), cycles=150)
    g = gap_fit(res)
    assert g.zeta.r2 > 0.95
    assert g.delta_monotone
    assert g.tolerance == res.bin_width
    assert len(g.Delta_L) == 7
