"""Dense statevector backend.

Amplitudes are stored with site 1 as the most significant bit of the basis
index, so ``psi.reshape((2,) * n)`` has axis ``i - 1`` for site ``i``.

Rotation conventions: ``X(theta) = exp(-i theta/2 X)``,
``Z(phi) = exp(-i phi/2 Z)``, ``CPhase(phi) = diag(1, 1, 1, e^{i phi})``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable, Iterator, Mapping, Sequence

import numpy as np
from scipy.sparse.linalg import expm_multiply

from .model import Couplings, ModelParams, build_h0, build_h1, build_hamiltonian, logical_operators, stabilizer
from .pauli import (
    MAX_DENSE_SITES,
    CapacityError,
    DimensionError,
    PauliString,
    PauliSum,
    _popcount,
    _reverse_bits,
    multiply,
    to_dense,
    to_sparse,
)

__all__ = [
    "SpecError",
    "Statevector",
    "Gate",
    "Circuit",
    "InitialStateSpec",
    "LogicalDensityMatrix",
    "Trajectory",
    "u3_matrix",
    "apply_gate",
    "apply_circuit",
    "circuit_unitary",
    "build_trotter_step",
    "prepare_initial",
    "initial_stabilizer_signs",
    "expectation",
    "evolve",
    "iter_evolve",
    "evolve_exact",
    "ExactPropagator",
    "FloquetPropagator",
    "echo_circuit",
    "echo_evolution",
    "prepare_logical_bell",
    "assemble_logical_rho",
    "logical_tomography",
    "bell_fidelity",
    "state_fidelity",
    "bell_target",
    "normalized_stabilizers",
    "phase_aligned_residual",
    "NORMALIZE_MASK_TOL",
]

NORMALIZE_MASK_TOL = 1e-3
EIGH_MAX_SITES = 10


class SpecError(ValueError):
    """Invalid initial-state or circuit specification."""


# --------------------------------------------------------------------------
# states and gates
# --------------------------------------------------------------------------


@dataclass(eq=False)
class Statevector:
    n_sites: int
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (1 << self.n_sites,):
            raise DimensionError(f"expected {1 << self.n_sites} amplitudes")

    @classmethod
    def zeros(cls, n_sites: int) -> "Statevector":
        a = np.zeros(1 << n_sites, dtype=complex)
        a[0] = 1.0
        return cls(n_sites, a)

    @classmethod
    def product(cls, labels: Sequence[str]) -> "Statevector":
        """Product state from per-site labels in ``{"0", "1", "+", "-"}``."""
        single = {
            "0": np.array([1, 0], dtype=complex),
            "1": np.array([0, 1], dtype=complex),
            "+": np.array([1, 1], dtype=complex) / math.sqrt(2),
            "-": np.array([1, -1], dtype=complex) / math.sqrt(2),
        }
        a = np.ones(1, dtype=complex)
        for lab in labels:
            a = np.kron(a, single[lab])
        return cls(len(labels), a)

    def copy(self) -> "Statevector":
        return Statevector(self.n_sites, self.amplitudes.copy())

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def overlap(self, other: "Statevector") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))


def u3_matrix(theta: float, phi: float, lam: float) -> np.ndarray:
    """``Rz(phi) Ry(theta) Rz(lam)`` with ``R(a) = exp(-i a/2 sigma)``.

    Equals ``[[c, -e^{i lam} s], [e^{i phi} s, e^{i(phi+lam)} c]]`` (half-angle
    ``c, s``) times the global phase ``e^{-i(phi+lam)/2}``.
    """
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    ep, el = np.exp(0.5j * phi), np.exp(0.5j * lam)
    return np.array(
        [[c / (ep * el), -s * el / ep], [s * ep / el, c * ep * el]],
        dtype=complex,
    )


_H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
_ONE_QUBIT = {"U3", "X", "Z", "H"}
_TWO_QUBIT = {"CZ", "CPHASE"}


@dataclass(frozen=True)
class Gate:
    """A named gate on 1-based sites; ``params`` are angles in radians."""

    kind: str
    targets: tuple[int, ...]
    params: tuple[float, ...] = ()

    def __post_init__(self):
        kind = self.kind.upper()
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        object.__setattr__(self, "params", tuple(float(v) for v in self.params))
        arity = 1 if kind in _ONE_QUBIT else 2 if kind in _TWO_QUBIT else None
        if arity is None:
            raise SpecError(f"unknown gate kind {self.kind!r}")
        if len(self.targets) != arity:
            raise SpecError(f"{kind} takes {arity} target(s)")
        if arity == 2 and self.targets[0] == self.targets[1]:
            raise SpecError("two-qubit gate needs distinct targets")
        nparams = {"U3": 3, "X": 1, "Z": 1, "H": 0, "CZ": 0, "CPHASE": 1}[kind]
        if len(self.params) != nparams:
            raise SpecError(f"{kind} takes {nparams} parameter(s)")

    @property
    def arity(self) -> int:
        return len(self.targets)

    def matrix(self) -> np.ndarray:
        k, p = self.kind, self.params
        if k == "X":
            c, s = math.cos(p[0] / 2), math.sin(p[0] / 2)
            return np.array([[c, -1j * s], [-1j * s, c]])
        if k == "Z":
            return np.diag([np.exp(-0.5j * p[0]), np.exp(0.5j * p[0])])
        if k == "H":
            return _H.copy()
        if k == "U3":
            return u3_matrix(*p)
        if k == "CZ":
            return np.diag([1, 1, 1, -1]).astype(complex)
        return np.diag([1, 1, 1, np.exp(1j * p[0])])

    def inverse(self) -> "Gate":
        k, p = self.kind, self.params
        if k in ("X", "Z", "CPHASE"):
            return Gate(k, self.targets, (-p[0],))
        if k == "U3":
            return Gate(k, self.targets, (-p[0], -p[2], -p[1]))
        return self


def _check_targets(n: int, g: Gate) -> None:
    for t in g.targets:
        if not 1 <= t <= n:
            raise IndexError(f"gate {g.kind} target {t} outside 1..{n}")


def _apply_inplace(psi: np.ndarray, n: int, g: Gate) -> np.ndarray:
    """Apply ``g`` to the flat array ``psi``; may return a new array."""
    if g.arity == 1:
        q = g.targets[0] - 1
        view = psi.reshape(1 << q, 2, 1 << (n - q - 1))
        if g.kind == "Z":
            ph = np.exp(0.5j * g.params[0])
            view[:, 0, :] *= np.conj(ph)
            view[:, 1, :] *= ph
            return psi
        m = g.matrix()
        a0 = view[:, 0, :].copy()
        a1 = view[:, 1, :]
        view[:, 0, :] = m[0, 0] * a0 + m[0, 1] * a1
        view[:, 1, :] = m[1, 0] * a0 + m[1, 1] * a1
        return psi
    a, b = sorted(t - 1 for t in g.targets)
    view = psi.reshape(1 << a, 2, 1 << (b - a - 1), 2, 1 << (n - b - 1))
    view[:, 1, :, 1, :] *= -1.0 if g.kind == "CZ" else np.exp(1j * g.params[0])
    return psi


def apply_gate(s: Statevector, g: Gate) -> Statevector:
    """Return a new state with ``g`` applied."""
    _check_targets(s.n_sites, g)
    out = s.amplitudes.copy()
    return Statevector(s.n_sites, _apply_inplace(out, s.n_sites, g))


@dataclass
class Circuit:
    """Gates grouped into layers; a layer holds only 1- or only 2-qubit gates.

    Two-qubit gates must act on chain neighbours unless ``nonlocal_ok``.
    """

    n_sites: int
    layers: list[list[Gate]] = field(default_factory=list)
    nonlocal_ok: bool = False

    def __post_init__(self):
        for layer in self.layers:
            self._check_layer(layer)

    def _check_layer(self, layer: Sequence[Gate]) -> None:
        arities = {g.arity for g in layer}
        if len(arities) > 1:
            raise SpecError("layer mixes one- and two-qubit gates")
        for g in layer:
            _check_targets(self.n_sites, g)
            if g.arity == 2 and not self.nonlocal_ok and abs(g.targets[0] - g.targets[1]) != 1:
                raise SpecError(f"{g.kind} on non-neighbouring sites {g.targets}")

    def add_layer(self, gates: Iterable[Gate]) -> None:
        layer = list(gates)
        self._check_layer(layer)
        self.layers.append(layer)

    @property
    def gates(self) -> list[Gate]:
        return [g for layer in self.layers for g in layer]

    @property
    def two_qubit_layers(self) -> int:
        return sum(1 for layer in self.layers if layer and layer[0].arity == 2)

    @property
    def single_qubit_layers(self) -> int:
        return sum(1 for layer in self.layers if layer and layer[0].arity == 1)

    def inverse(self) -> "Circuit":
        layers = [[g.inverse() for g in reversed(layer)] for layer in reversed(self.layers)]
        return Circuit(self.n_sites, layers, self.nonlocal_ok)

    def __add__(self, other: "Circuit") -> "Circuit":
        if other.n_sites != self.n_sites:
            raise DimensionError("circuits act on different chains")
        return Circuit(self.n_sites, self.layers + other.layers, self.nonlocal_ok or other.nonlocal_ok)

    def repeat(self, k: int) -> "Circuit":
        return Circuit(self.n_sites, [list(l) for _ in range(k) for l in self.layers], self.nonlocal_ok)


def apply_circuit(s: Statevector, c: Circuit) -> Statevector:
    if c.n_sites != s.n_sites:
        raise DimensionError("circuit and state sizes differ")
    psi = s.amplitudes.copy()
    for g in c.gates:
        psi = _apply_inplace(psi, s.n_sites, g)
    return Statevector(s.n_sites, psi)


def circuit_unitary(c: Circuit) -> np.ndarray:
    """Dense unitary of ``c`` (columns are images of basis states)."""
    n = c.n_sites
    if n > MAX_DENSE_SITES:
        raise CapacityError(f"dense unitaries limited to {MAX_DENSE_SITES} sites")
    dim = 1 << n
    u = np.eye(dim, dtype=complex)
    cols = [u[:, k].copy() for k in range(dim)]
    for g in c.gates:
        cols = [_apply_inplace(v, n, g) for v in cols]
    return np.stack(cols, axis=1)


def phase_aligned_residual(a: np.ndarray, b: np.ndarray) -> float:
    """``max |a - e^{i chi} b|`` with ``chi`` fixed by the largest entry of ``b``'s largest column."""
    col = int(np.argmax(np.linalg.norm(b, axis=0)))
    row = int(np.argmax(np.abs(b[:, col])))
    chi = np.angle(a[row, col]) - np.angle(b[row, col])
    return float(np.max(np.abs(a - np.exp(1j * chi) * b)))


# --------------------------------------------------------------------------
# Trotter step
# --------------------------------------------------------------------------


def _cz_layers(n: int) -> list[list[Gate]]:
    return [
        [Gate("CZ", (i, i + 1)) for i in range(1, n, 2)],
        [Gate("CZ", (i, i + 1)) for i in range(2, n, 2)],
    ]


def build_trotter_step(p: ModelParams | Couplings, dt: float | None = None) -> Circuit:
    """Circuit for ``exp(-i dt H1) exp(-i dt H0)``, exact up to a global phase.

    H0 factor: the all-neighbour CZ product maps ``X_m`` to ``K_m``, so
    ``exp(i dt J_m K_m)`` is an ``X(-2 J_m dt)`` rotation between two CZ
    sandwiches.  H1 factor: in the Hadamard frame each ``V X_i X_{i+1}`` is
    ``CPhase(-4 V dt)`` plus ``Z(2 V dt)`` on both ends and the field is
    ``Z(2 h dt)``.  Layout: 4 CZ layers, 2 CPhase layers, 3 single-qubit
    layers.
    """
    if isinstance(p, ModelParams):
        dt = p.dt if dt is None else dt
        c = p.couplings()
    else:
        if dt is None:
            raise ValueError("dt is required with an explicit coupling table")
        c = p
    n = c.n_sites
    circ = Circuit(n)
    for layer in _cz_layers(n):
        circ.add_layer(layer)
    circ.add_layer([Gate("X", (m,), (-2.0 * c.j[m - 1] * dt,)) for m in range(2, n)])
    for layer in _cz_layers(n):
        circ.add_layer(layer)

    circ.add_layer([Gate("H", (i,)) for i in range(1, n + 1)])
    circ.add_layer([Gate("CPHASE", (i, i + 1), (-4.0 * c.v[i - 1] * dt,)) for i in range(1, n, 2)])
    circ.add_layer([Gate("CPHASE", (i, i + 1), (-4.0 * c.v[i - 1] * dt,)) for i in range(2, n, 2)])
    last = []
    for i in range(1, n + 1):
        bond = (c.v[i - 2] if i > 1 else 0.0) + (c.v[i - 1] if i < n else 0.0)
        last.append(Gate("Z", (i,), (2.0 * dt * (c.h[i - 1] + bond),)))
        last.append(Gate("H", (i,)))
    circ.add_layer(last)
    return circ


# --------------------------------------------------------------------------
# initial states
# --------------------------------------------------------------------------

_KINDS = ("cluster_z", "cluster_x", "product_z", "product_x_edges", "logical_bell")


@dataclass(frozen=True)
class InitialStateSpec:
    """Initial state: a base manifold plus optional excitation gates.

    ``excitation_gate`` is ``"X"`` (an ``X(pi)`` flips the two stabilizers
    whose Z legs touch the site) or ``"Z"`` (a ``Z(pi)`` flips the stabilizer
    centred on the site).  Sites are 1-based and must lie in ``2..N-1``.
    """

    kind: str = "cluster_z"
    excitation_sites: tuple[int, ...] = ()
    excitation_gate: str = "X"

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise SpecError(f"unknown initial state kind {self.kind!r}; expected one of {_KINDS}")
        if self.excitation_gate not in ("X", "Z"):
            raise SpecError("excitation_gate must be 'X' or 'Z'")
        object.__setattr__(self, "excitation_sites", tuple(int(s) for s in self.excitation_sites))

    @property
    def is_product(self) -> bool:
        return self.kind.startswith("product") and not self.excitation_sites

    def validate(self, n: int) -> None:
        for s in self.excitation_sites:
            if not 2 <= s <= n - 1:
                raise SpecError(f"excitation site {s} must lie strictly inside 2..{n - 1}")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "excitation_sites": list(self.excitation_sites),
            "excitation_gate": self.excitation_gate,
        }


def _excitations(n: int, spec: InitialStateSpec) -> list[Gate]:
    return [Gate(spec.excitation_gate, (s,), (math.pi,)) for s in spec.excitation_sites]


def _all_cz(n: int) -> list[Gate]:
    return [g for layer in _cz_layers(n) for g in layer]


def prepare_initial(p: ModelParams | Couplings, spec: InitialStateSpec) -> Statevector:
    n = p.n_sites
    spec.validate(n)
    if spec.kind == "logical_bell":
        return prepare_logical_bell(p, spec.excitation_sites, spec.excitation_gate)
    if spec.kind == "cluster_z":
        s = Statevector.product(["0"] + ["+"] * (n - 2) + ["0"])
        gates = _all_cz(n)
    elif spec.kind == "cluster_x":
        s = Statevector.product(["+"] * n)
        gates = _all_cz(n)
    elif spec.kind == "product_z":
        s, gates = Statevector.zeros(n), []
    else:
        s, gates = Statevector.product(["+"] + ["0"] * (n - 2) + ["+"]), []
    psi = s.amplitudes
    for g in gates + _excitations(n, spec):
        psi = _apply_inplace(psi, n, g)
    return Statevector(n, psi)


def initial_stabilizer_signs(p: ModelParams | Couplings, spec: InitialStateSpec) -> np.ndarray:
    """``<K_m>`` at t = 0 for cluster initial states, m = 1..N, via Pauli algebra.

    Works at any N (no statevector).  Edge entries are the logical X values,
    which are 0 for ``cluster_z``.
    """
    n = p.n_sites
    spec.validate(n)
    if spec.kind not in ("cluster_x", "cluster_z"):
        raise SpecError("stabilizer signs are defined for cluster states only")
    out = np.ones(n)
    if spec.kind == "cluster_z":
        out[0] = out[-1] = 0.0
    exc = [PauliString.from_sites(n, {s: spec.excitation_gate}) for s in spec.excitation_sites]
    for m in range(1, n + 1):
        k = stabilizer(p, m)
        for e in exc:
            if not k.commutes_with(e):
                out[m - 1] *= -1
    return out


# --------------------------------------------------------------------------
# observables
# --------------------------------------------------------------------------


@lru_cache(maxsize=4096)
def _string_tables(n: int, x: int, z: int):
    idx = np.arange(1 << n, dtype=np.int64)
    xi, zi = _reverse_bits(x, n), _reverse_bits(z, n)
    sign = 1.0 - 2.0 * (np.bitwise_count(idx & zi) & 1)
    return idx ^ xi, sign


def _expect_string(psi: np.ndarray, n: int, x: int, z: int, phase: complex) -> complex:
    flip, sign = _string_tables(n, x, z)
    # <psi| P |psi> = sum_b conj(psi[b ^ x]) * phase * sign(b) * psi[b]
    return phase * np.dot(np.conj(psi[flip]), sign * psi)


def expectation(s: Statevector, o: PauliString | PauliSum) -> float:
    """Exact ``<s|o|s>`` for Hermitian ``o``."""
    if o.n_sites != s.n_sites:
        raise DimensionError("operator and state sizes differ")
    n, psi = s.n_sites, s.amplitudes
    if isinstance(o, PauliString):
        val = _expect_string(psi, n, o.x_mask, o.z_mask, 1j**o.phase_exp)
    else:
        val = sum(
            c * _expect_string(psi, n, x, z, 1j ** (_popcount(x & z) % 4)) for (x, z), c in o.terms.items()
        )
        val = complex(val)
    if abs(val.imag) > 1e-10 * max(1.0, abs(val.real)):
        raise ValueError(f"operator is not Hermitian on this state (imag part {val.imag:.3g})")
    return float(val.real)


# --------------------------------------------------------------------------
# evolution
# --------------------------------------------------------------------------


@dataclass
class Trajectory:
    """Per-cycle observable values ``values[name][t]`` for ``t = 0..cycles``."""

    cycles: int
    values: dict[str, np.ndarray]
    states: list[Statevector] | None = None


def iter_evolve(
    s: Statevector, p: ModelParams | Couplings, cycles: int, dt: float | None = None, exact: bool = False
) -> Iterator[tuple[int, Statevector]]:
    """Yield ``(t, state)`` for ``t = 0..cycles``; states are independent copies.

    With ``exact=True`` each cycle is applied as :class:`FloquetPropagator`
    instead of the gate circuit.
    """
    if cycles < 0:
        raise ValueError("cycles must be >= 0")
    n = s.n_sites
    yield 0, s.copy()
    if exact:
        u = FloquetPropagator(p, dt)
        for t in range(1, cycles + 1):
            s = u.apply(s)
            yield t, s.copy()
        return
    gates = build_trotter_step(p, dt).gates
    psi = s.amplitudes.copy()
    for t in range(1, cycles + 1):
        for g in gates:
            psi = _apply_inplace(psi, n, g)
        yield t, Statevector(n, psi.copy())


def evolve(
    s: Statevector,
    p: ModelParams | Couplings,
    cycles: int,
    observables: Mapping[str, PauliString | PauliSum] | None = None,
    keep_states: bool = False,
    dt: float | None = None,
    hook: Callable[[int, Statevector], None] | None = None,
    exact: bool = False,
) -> Trajectory:
    """Apply the Trotter step ``cycles`` times, recording observables each cycle."""
    observables = dict(observables or {})
    vals = {k: np.empty(cycles + 1) for k in observables}
    states = [] if keep_states else None
    for t, st in iter_evolve(s, p, cycles, dt, exact):
        for k, o in observables.items():
            vals[k][t] = expectation(st, o)
        if keep_states:
            states.append(st)
        if hook is not None:
            hook(t, st)
    return Trajectory(cycles, vals, states)


class ExactPropagator:
    """``exp(-i H t)`` for a Hamiltonian given as a Pauli sum (default ``H0 + H1``).

    Dense eigendecomposition up to 10 sites, ``expm_multiply`` beyond that.
    """

    def __init__(self, p: ModelParams | Couplings | PauliSum):
        h = p if isinstance(p, PauliSum) else build_hamiltonian(p)
        n = h.n_sites
        if n > MAX_DENSE_SITES:
            raise CapacityError(f"exact evolution limited to {MAX_DENSE_SITES} sites")
        self.n_sites = n
        if n <= EIGH_MAX_SITES:
            self._w, self._v = np.linalg.eigh(to_dense(h))
            self._sparse = None
        else:
            self._sparse = to_sparse(h)

    def apply(self, s: Statevector, t: float) -> Statevector:
        if t == 0:
            return s.copy()
        if self._sparse is None:
            c = self._v.conj().T @ s.amplitudes
            return Statevector(self.n_sites, self._v @ (np.exp(-1j * self._w * t) * c))
        return Statevector(self.n_sites, expm_multiply(-1j * t * self._sparse, s.amplitudes))


def evolve_exact(s: Statevector, p: ModelParams | Couplings, t: float) -> Statevector:
    return ExactPropagator(p).apply(s, t)


class FloquetPropagator:
    """``exp(-i dt H1) exp(-i dt H0)`` from the Hamiltonian matrices, bypassing the gate circuit."""

    def __init__(self, p: ModelParams | Couplings, dt: float | None = None):
        self.dt = float(p.dt if dt is None else dt)
        self._u0 = ExactPropagator(build_h0(p))
        self._u1 = ExactPropagator(build_h1(p))

    def apply(self, s: Statevector) -> Statevector:
        return self._u1.apply(self._u0.apply(s, self.dt), self.dt)


def echo_circuit(p: ModelParams | Couplings, t: int, dt: float | None = None) -> Circuit:
    """``(U^dagger)^t U^t`` as an explicit circuit of ``2 t`` Trotter steps."""
    step = build_trotter_step(p, dt)
    return step.repeat(t) + step.inverse().repeat(t)


def echo_evolution(s: Statevector, p: ModelParams | Couplings, t: int, dt: float | None = None) -> Statevector:
    return apply_circuit(s, echo_circuit(p, t, dt))


# --------------------------------------------------------------------------
# logical qubits
# --------------------------------------------------------------------------


def _bell_circuit(n: int) -> Circuit:
    """Logical ``X(-pi/2)`` on the left edge, then a logical CNOT L -> R.

    ``CZ(1,2) X_1(-pi/2) CZ(1,2) = exp(i pi/4 X1 Z2)``.  The controlled
    ``Z_{N-1} X_N`` with control ``Z_1`` is ``CZ(1,N-1)`` followed by a
    Hadamard-conjugated ``CZ(1,N)``.
    """
    c = Circuit(n, nonlocal_ok=True)
    c.add_layer([Gate("CZ", (1, 2))])
    c.add_layer([Gate("X", (1,), (-math.pi / 2,))])
    c.add_layer([Gate("CZ", (1, 2))])
    c.add_layer([Gate("CZ", (1, n - 1))])
    c.add_layer([Gate("H", (n,))])
    c.add_layer([Gate("CZ", (1, n))])
    c.add_layer([Gate("H", (n,))])
    return c


def prepare_logical_bell(
    p: ModelParams | Couplings, excitation_sites: Sequence[int] = (), excitation_gate: str = "X"
) -> Statevector:
    """Edge-encoded ``(|00> + i|11>)/sqrt(2)`` on top of a cluster state.

    Excitation gates (if any) are applied to the cluster state first; sites
    touching the logical operators (2 and N-1) would rotate the encoded
    state and are rejected.
    """
    n = p.n_sites
    if n < 4:
        raise SpecError("logical Bell state needs N >= 4")
    bad = [s for s in excitation_sites if not 3 <= s <= n - 2]
    if bad:
        raise SpecError(f"Bell-state excitations must lie in 3..{n - 2}, got {bad}")
    base = prepare_initial(p, InitialStateSpec("cluster_z", tuple(excitation_sites), excitation_gate))
    return apply_circuit(base, _bell_circuit(n))


_PAULI_2 = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def bell_target() -> np.ndarray:
    """Density matrix of ``(|00> + i|11>)/sqrt(2)`` in the logical basis."""
    v = np.array([1, 0, 0, 1j], dtype=complex) / math.sqrt(2)
    return np.outer(v, v.conj())


def _logical_products(p: ModelParams | Couplings) -> dict[str, PauliString]:
    ops = logical_operators(p)
    n = p.n_sites
    left = {"I": PauliString.identity(n), "X": ops["XL"], "Y": ops["YL"], "Z": ops["ZL"]}
    right = {"I": PauliString.identity(n), "X": ops["XR"], "Y": ops["YR"], "Z": ops["ZR"]}
    return {a + b: multiply(left[a], right[b]) for a in "IXYZ" for b in "IXYZ"}


def _project_psd(rho: np.ndarray) -> np.ndarray:
    rho = 0.5 * (rho + rho.conj().T)
    rho = rho / np.trace(rho).real
    w, v = np.linalg.eigh(rho)
    if w.min() >= 0:
        return rho
    w = np.clip(w, 0.0, None)
    rho = (v * w) @ v.conj().T
    return rho / np.trace(rho).real


@dataclass
class LogicalDensityMatrix:
    """4x4 logical density matrix in the basis ``|00>, |01>, |10>, |11>``."""

    rho: np.ndarray
    expectations: dict[str, float]

    def fidelity(self, target: np.ndarray | None = None) -> float:
        return state_fidelity(self.rho, bell_target() if target is None else target)


def assemble_logical_rho(expectations: Mapping[str, float]) -> np.ndarray:
    """``(1/4) sum <P_L P_R> P_L (x) P_R`` then Hermitise, normalise, clip to PSD.

    Missing labels count as zero expectation; ``II`` defaults to 1.
    """
    rho = np.zeros((4, 4), dtype=complex)
    for a in "IXYZ":
        for b in "IXYZ":
            val = expectations.get(a + b, 1.0 if a + b == "II" else 0.0)
            rho += val * np.kron(_PAULI_2[a], _PAULI_2[b])
    return _project_psd(rho / 4)


def logical_tomography(s: Statevector, p: ModelParams | Couplings) -> LogicalDensityMatrix:
    exps = {k: expectation(s, op) for k, op in _logical_products(p).items()}
    return LogicalDensityMatrix(assemble_logical_rho(exps), exps)


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T


def state_fidelity(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Uhlmann fidelity ``(tr sqrt(sqrt(rho) sigma sqrt(rho)))**2``."""
    r = _psd_sqrt(rho)
    inner = r @ sigma @ r
    w = np.linalg.eigvalsh(0.5 * (inner + inner.conj().T))
    return float(np.sum(np.sqrt(np.clip(w, 0.0, None))) ** 2)


def bell_fidelity(s: Statevector, p: ModelParams | Couplings) -> float:
    """``(1 + <X_L Y_R> + <Y_L X_R> + <Z_L Z_R>) / 4``."""
    prods = _logical_products(p)
    return 0.25 * (1.0 + sum(expectation(s, prods[k]) for k in ("XY", "YX", "ZZ")))


# --------------------------------------------------------------------------
# normalised stabilizers
# --------------------------------------------------------------------------


def normalized_stabilizers(run_e: np.ndarray, run_g: np.ndarray, tol: float = NORMALIZE_MASK_TOL) -> np.ma.MaskedArray:
    """Elementwise ``run_e / run_g`` with ``|run_g| < tol`` entries masked.

    Inputs are ``(cycles + 1, n_stabilizers)`` tables from runs that share
    parameters.  The returned mask lists the undefined entries.
    """
    e = np.asarray(run_e, dtype=float)
    g = np.asarray(run_g, dtype=float)
    if e.shape != g.shape:
        raise DimensionError(f"run shapes differ: {e.shape} vs {g.shape}")
    mask = np.abs(g) < tol
    ratio = np.divide(e, np.where(mask, 1.0, g))
    return np.ma.MaskedArray(ratio, mask=mask)
