"""Low-order Floquet-Magnus terms of the two-segment Trotter drive.

The step ``exp(-i dt H1) exp(-i dt H0)`` is generated by ``H(t) = 2 H0`` on
the first half period and ``2 H1`` on the second.  In the double integral
for ``Omega_1`` only ``t1`` in the second half and ``t2`` in the first half
give a nonzero commutator, over an area ``(dt/2)^2``, so

    Omega_1 = (1/2i) [H1, H0]

exactly, and ``H_F = Omega_0 + dt * Omega_1 + O(dt^2)`` with
``Omega_0 = H0 + H1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg as sla

from .model import Couplings, ModelParams, build_h0, build_h1
from .pauli import CapacityError, PauliSum, commutator, to_dense

__all__ = ["MagnusResult", "omega0", "omega1", "bch_residual_scan", "loglog_slope", "BCH_MAX_SITES"]

BCH_MAX_SITES = 8


def omega0(p: ModelParams | Couplings) -> PauliSum:
    return build_h0(p) + build_h1(p)


def omega1(p: ModelParams | Couplings) -> PauliSum:
    """``(1/2i) [H1, H0]`` as a real Pauli sum."""
    return commutator(build_h1(p), build_h0(p))


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    lx, ly = np.log(np.asarray(x, dtype=float)), np.log(np.asarray(y, dtype=float))
    return float(np.polyfit(lx, ly, 1)[0])


@dataclass
class MagnusResult:
    """``residual_table`` rows are ``(dt, err_with_omega1, err_omega0_only)`` in spectral norm."""

    omega0: PauliSum
    omega1: PauliSum
    residual_table: list[tuple[float, float, float]] = field(default_factory=list)

    @property
    def slope_first_order(self) -> float:
        rows = self.residual_table
        return loglog_slope([r[0] for r in rows], [r[1] for r in rows])

    @property
    def slope_zeroth_order(self) -> float:
        rows = self.residual_table
        return loglog_slope([r[0] for r in rows], [r[2] for r in rows])


def bch_residual_scan(p: ModelParams | Couplings, dts: Sequence[float]) -> MagnusResult:
    """Dense comparison of one Trotter step with the truncated Floquet Hamiltonian."""
    if p.n_sites > BCH_MAX_SITES:
        raise CapacityError(f"BCH scan is dense; limited to {BCH_MAX_SITES} sites")
    o0, o1 = omega0(p), omega1(p)
    h0, h1 = to_dense(build_h0(p)), to_dense(build_h1(p))
    d0, d1 = to_dense(o0), to_dense(o1)
    rows = []
    for dt in dts:
        u = sla.expm(-1j * dt * h1) @ sla.expm(-1j * dt * h0)
        first = np.linalg.norm(u - sla.expm(-1j * dt * (d0 + dt * d1)), 2)
        zeroth = np.linalg.norm(u - sla.expm(-1j * dt * d0), 2)
        rows.append((float(dt), float(first), float(zeroth)))
    return MagnusResult(o0, o1, rows)
