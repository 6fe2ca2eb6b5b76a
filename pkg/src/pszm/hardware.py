"""Small single-qubit and readout utilities used when compiling circuits for hardware.

``u3_compile(theta, phi, lam)`` is the rotation product
``Rz(phi) Ry(theta) Rz(lam)``; :func:`u3_angles` inverts it up to a global
phase, which lets runs of single-qubit gates collapse into one ``U3``.
"""

from __future__ import annotations

import cmath
import math

import numpy as np

from .statevec import Circuit, Gate, u3_matrix

__all__ = ["readout_correct", "u3_compile", "u3_angles", "fold_single_qubit_runs"]


def readout_correct(p_exp, c) -> float:
    """Corrected ``<Z>`` from measured ``(p0, p1, p2)`` populations.

    ``c[i, j]`` is the probability of reading ``i`` when ``j`` was prepared.
    The leaked ``|2>`` population is discarded after inversion and the
    ``{0, 1}`` block renormalised.
    """
    p = np.asarray(p_exp, dtype=float)
    c = np.asarray(c, dtype=float)
    if p.shape != (3,) or c.shape != (3, 3):
        raise ValueError("expected a 3-vector and a 3x3 matrix")
    if (p < 0).any() or abs(p.sum() - 1.0) > 1e-6:
        raise ValueError("populations must be non-negative and sum to 1")
    q = np.clip(np.linalg.solve(c, p), 0.0, None)
    s = q[0] + q[1]
    if s <= 0:
        raise ValueError("no population left in the qubit subspace")
    return float((q[0] - q[1]) / s)


def u3_compile(theta: float, phi: float, lam: float) -> np.ndarray:
    return u3_matrix(theta, phi, lam)


def u3_angles(u: np.ndarray) -> tuple[float, float, float, float]:
    """``(theta, phi, lam, alpha)`` with ``u = e^{i alpha} u3_compile(theta, phi, lam)``."""
    u = np.asarray(u, dtype=complex)
    det = np.linalg.det(u)
    alpha = 0.5 * cmath.phase(det)
    v = u * cmath.exp(-1j * alpha)
    theta = 2 * math.atan2(abs(v[1, 0]), abs(v[0, 0]))
    # v = [[e^{-i(phi+lam)/2} c, -e^{-i(phi-lam)/2} s], [e^{i(phi-lam)/2} s, e^{i(phi+lam)/2} c]]
    if abs(v[0, 0]) > 1e-12 and abs(v[1, 0]) > 1e-12:
        plus = 2 * cmath.phase(v[1, 1])
        minus = 2 * cmath.phase(v[1, 0])
    elif abs(v[1, 0]) <= 1e-12:
        plus, minus = 2 * cmath.phase(v[1, 1]), 0.0
    else:
        plus, minus = 0.0, 2 * cmath.phase(v[1, 0])
    phi, lam = 0.5 * (plus + minus), 0.5 * (plus - minus)
    ref = u3_matrix(theta, phi, lam)
    k = int(np.argmax(np.abs(ref)))
    alpha = cmath.phase(u.flat[k] / ref.flat[k])
    return theta, phi, lam, alpha


def fold_single_qubit_runs(c: Circuit) -> Circuit:
    """Merge consecutive one-qubit gates on each site into a single ``U3``.

    The result differs from ``c`` by a global phase only.
    """
    out = Circuit(c.n_sites, nonlocal_ok=c.nonlocal_ok)
    pending: dict[int, np.ndarray] = {}

    def flush(sites) -> None:
        gates = []
        for q in sorted(sites):
            if q in pending:
                theta, phi, lam, _ = u3_angles(pending.pop(q))
                gates.append(Gate("U3", (q,), (theta, phi, lam)))
        if gates:
            out.add_layer(gates)

    for layer in c.layers:
        if not layer:
            continue
        if layer[0].arity == 1:
            for g in layer:
                q = g.targets[0]
                pending[q] = g.matrix() @ pending.get(q, np.eye(2, dtype=complex))
            continue
        flush({t for g in layer for t in g.targets})
        out.add_layer(layer)
    flush(list(pending))
    return out
