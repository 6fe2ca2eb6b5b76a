import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pszm.magnus import loglog_slope
from pszm.model import ModelParams, build_h0, logical_operators
from pszm.pauli import PauliSum, commutator, frobenius_norm
from pszm.prethermal import (
    ResonanceError,
    bare_logical,
    denominators,
    mirror,
    pszm_first_order,
    resonance_scan,
    verify_pszm,
)

MODES = [(e, f) for e in ("left", "right") for f in ("z", "x")]


def base(n=10, ratio=3.17, h=0.11, v=0.2):
    return ModelParams(n_sites=n, h_x=h, v_xx=v).with_ratio(ratio)


@pytest.mark.parametrize("edge,flavor", MODES)
def test_bare_logicals_commute_with_h0(edge, flavor):
    p = base()
    psi = bare_logical(p, edge, flavor)
    assert len(psi.terms) == 1
    assert frobenius_norm(commutator(psi, build_h0(p))) == 0.0
    name = {"z": "Z", "x": "X"}[flavor] + ("L" if edge == "left" else "R")
    assert psi == logical_operators(p)[name].to_sum()


@pytest.mark.parametrize("edge,flavor", MODES)
@pytest.mark.parametrize("ratio", [0.4, 1.5, 3.17])
def test_residual_is_second_order(edge, flavor, ratio):
    p0 = base(ratio=ratio)
    scales = [1.0, 0.5, 0.25, 0.125]
    res, sq = [], []
    for s in scales:
        p = replace(p0, h_x=s * p0.h_x, v_xx=s * p0.v_xx)
        rep = verify_pszm(pszm_first_order(p, edge, flavor), p)
        res.append(rep.commutator_norm)
        sq.append(rep.square_deviation)
    assert loglog_slope(scales, res) == pytest.approx(2.0, abs=0.05)
    assert loglog_slope(scales, sq) == pytest.approx(2.0, abs=0.05)


@pytest.mark.parametrize("edge,flavor", MODES)
def test_symmetry_flags(edge, flavor):
    p = base()
    rep = verify_pszm(pszm_first_order(p, edge, flavor), p)
    assert rep.symmetry_ok
    anti = "G_o" if (edge, flavor) in (("left", "z"), ("right", "x")) else "G_e"
    other = "G_e" if anti == "G_o" else "G_o"
    assert rep.anticommutes[anti] and rep.commutes[other]
    assert rep.resonant is None
    assert set(rep.to_dict()) >= {"commutator_norm", "square_deviation", "symmetry_ok"}


def test_mixed_operator_fails_symmetry():
    p = base()
    psi = pszm_first_order(p, "left", "z") + pszm_first_order(p, "left", "x")
    assert not verify_pszm(psi, p).symmetry_ok


def test_right_modes_mirror_left_with_swapped_couplings():
    p = base(ratio=1.7)
    swapped = ModelParams(n_sites=p.n_sites, j_e=p.j_o, j_o=p.j_e, h_x=p.h_x, v_xx=p.v_xx)
    for f in ("z", "x"):
        assert pszm_first_order(p, "right", f) == mirror(pszm_first_order(swapped, "left", f))


@given(st.integers(0, (1 << 8) - 1), st.integers(0, (1 << 8) - 1))
def test_mirror_is_involution(x, z):
    op = PauliSum(8, {(x, z): 0.7})
    assert mirror(mirror(op)) == op


def test_zero_perturbation_gives_exact_mode():
    p = base(h=0.0, v=0.0)
    for e, f in MODES:
        rep = verify_pszm(pszm_first_order(p, e, f), p)
        assert rep.commutator_norm == 0.0
        assert rep.square_deviation == 0.0


@pytest.mark.parametrize(
    "ratio,edge,flavor,name",
    [(1.0, "left", "z", "d1"), (1.0, "right", "x", "d1"), (2.0, "left", "x", "d2"), (0.5, "right", "x", "d3")],
)
def test_resonances_raise(ratio, edge, flavor, name):
    with pytest.raises(ResonanceError) as err:
        pszm_first_order(base(ratio=ratio), edge, flavor)
    assert err.value.denominator == name


def test_resonances_are_flavor_dependent():
    p = base(ratio=2.0)
    pszm_first_order(p, "left", "z")
    pszm_first_order(p, "right", "z")
    pszm_first_order(p, "right", "x")
    pszm_first_order(base(ratio=0.5), "left", "x")


def test_field_only_has_no_resonance():
    pszm_first_order(base(ratio=1.0, v=0.0), "left", "z")


def test_denominators():
    d = denominators(ModelParams(n_sites=6, j_e=1.0, j_o=3.0))
    assert d == {"d1": 8.0, "d2": 5.0, "d3": -35.0}


def test_resonance_scan():
    rows = resonance_scan(base(), [0.5, 1.0, 1.5, 2.0, 3.17])
    flags = [(r.res_z, r.res_x_left, r.res_x_right) for r in rows]
    assert flags == [
        (False, False, True),
        (True, True, True),
        (False, False, False),
        (False, True, False),
        (False, False, False),
    ]
    assert rows[1].d1 == pytest.approx(0.0, abs=1e-15)


def test_argument_validation():
    with pytest.raises(ValueError):
        pszm_first_order(base(), "middle")
    with pytest.raises(ValueError):
        pszm_first_order(base(n=4))
    with pytest.raises(ValueError):
        verify_pszm(pszm_first_order(base()), base(n=12))


def test_dressing_reduces_residual():
    p = base()
    dressed = verify_pszm(pszm_first_order(p), p).commutator_norm
    bare = verify_pszm(bare_logical(p), p).commutator_norm
    assert dressed < 0.5 * bare
    assert math.isfinite(dressed) and np.isfinite(bare)
