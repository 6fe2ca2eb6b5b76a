"""First-order prethermal strong zero modes and their diagnostics.

Left-edge modes to first order in ``h_x`` and ``v_xx``, with
``d1 = j_o^2 - j_e^2`` and ``d2 = j_o^2 - 4 j_e^2``::

    Psi^z_L = Z1 - (h/j_e) X1 X2 Z3 + (v/d1) (j_e X1 Z3 + j_o Y1 Y2 X3 Z4)
    Psi^x_L = X1 Z2 - (h/j_o) X1 X2 X3 Z4 - (v/d1) (j_o X2 X3 Z4 + j_e Z1 Z2 Z3)
              + (v j_e/d2) [Y1 Z2 Y3 + (2 j_e/j_o - j_o/j_e) X1 X2 Z4
                            - X1 Y2 Y3 X4 Z5 - (2 j_e/j_o) Y1 Y4 Z5]

Every coefficient cancels the first-order part of ``[Psi, H0 + H1]`` (checked
in the tests).  Right-edge modes come from the site reflection
``i -> N + 1 - i``, which swaps the roles of ``j_e`` and ``j_o`` on an even
chain; the mirrored ``Psi^x`` picks up ``d3 = j_e^2 - 4 j_o^2``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace
from typing import Sequence

from .model import ModelParams, build_hamiltonian, symmetry_generators
from .pauli import PauliString, PauliSum, _popcount, anticommutator, commutator, frobenius_norm

__all__ = [
    "ResonanceError",
    "PszmReport",
    "ResonanceRow",
    "RESONANCE_GUARD",
    "denominators",
    "mirror",
    "pszm_first_order",
    "bare_logical",
    "verify_pszm",
    "resonance_scan",
]

RESONANCE_GUARD = 0.05

_RESONANCE_LABEL = {"d1": "J_o=J_e", "d2": "J_o=2J_e", "d3": "J_o=J_e/2"}


class ResonanceError(ArithmeticError):
    """A first-order denominator is within the resonance guard."""

    def __init__(self, denominator: str, value: float):
        self.denominator = denominator
        self.value = value
        super().__init__(f"resonant denominator {denominator} ({_RESONANCE_LABEL[denominator]}) = {value:.3g}")


def denominators(p: ModelParams) -> dict[str, float]:
    je, jo = p.j_e, p.j_o
    return {"d1": jo**2 - je**2, "d2": jo**2 - 4 * je**2, "d3": je**2 - 4 * jo**2}


def _needed(edge: str, flavor: str) -> tuple[str, ...]:
    if flavor == "z":
        return ("d1",)
    return ("d1", "d2") if edge == "left" else ("d1", "d3")


def _guard_value(p: ModelParams, guard: float) -> float:
    return guard * max(p.j_e**2, p.j_o**2)


def mirror(op: PauliSum) -> PauliSum:
    """Reflect every term through the chain centre, ``i -> N + 1 - i``."""
    n = op.n_sites

    def flip(mask: int) -> int:
        return int(format(mask, f"0{n}b")[::-1], 2)

    return PauliSum(n, {(flip(x), flip(z)): c for (x, z), c in op.terms.items()})


def _left_z(n: int, je: float, jo: float, h: float, v: float) -> PauliSum:
    items = [(1.0, {1: "Z"})]
    if h:
        items.append((-h / je, {1: "X", 2: "X", 3: "Z"}))
    if v:
        d1 = jo**2 - je**2
        items += [(v * je / d1, {1: "X", 3: "Z"}), (v * jo / d1, {1: "Y", 2: "Y", 3: "X", 4: "Z"})]
    return PauliSum.from_list(n, items)


def _left_x(n: int, je: float, jo: float, h: float, v: float) -> PauliSum:
    items = [(1.0, {1: "X", 2: "Z"})]
    if h:
        items.append((-h / jo, {1: "X", 2: "X", 3: "X", 4: "Z"}))
    if v:
        d1 = jo**2 - je**2
        a = v * je / (jo**2 - 4 * je**2)
        items += [
            (-v * jo / d1, {2: "X", 3: "X", 4: "Z"}),
            (-v * je / d1, {1: "Z", 2: "Z", 3: "Z"}),
            (a, {1: "Y", 2: "Z", 3: "Y"}),
            (a * (2 * je / jo - jo / je), {1: "X", 2: "X", 4: "Z"}),
            (-a, {1: "X", 2: "Y", 3: "Y", 4: "X", 5: "Z"}),
            (-a * 2 * je / jo, {1: "Y", 4: "Y", 5: "Z"}),
        ]
    return PauliSum.from_list(n, items)


def pszm_first_order(p: ModelParams, edge: str = "left", flavor: str = "z", guard: float = RESONANCE_GUARD) -> PauliSum:
    """First-order dressed edge operator; raises :class:`ResonanceError` near resonance."""
    if edge not in ("left", "right") or flavor not in ("z", "x"):
        raise ValueError("edge must be 'left'/'right' and flavor 'z'/'x'")
    if p.n_sites < 6:
        raise ValueError("first-order modes span five sites; need N >= 6")
    if p.h_x or p.v_xx:
        if p.j_e == 0 or p.j_o == 0:
            raise ValueError("dressed modes need nonzero j_e and j_o")
        d = denominators(p)
        cut = _guard_value(p, guard)
        for name in _needed(edge, flavor):
            if p.v_xx and abs(d[name]) < cut:
                raise ResonanceError(name, d[name])
    build = _left_z if flavor == "z" else _left_x
    if edge == "left":
        return build(p.n_sites, p.j_e, p.j_o, p.h_x, p.v_xx)
    return mirror(build(p.n_sites, p.j_o, p.j_e, p.h_x, p.v_xx))


def bare_logical(p: ModelParams, edge: str = "left", flavor: str = "z") -> PauliSum:
    """The undressed logical operator as a one-term sum."""
    return pszm_first_order(replace(p, h_x=0.0, v_xx=0.0), edge, flavor)


@dataclass
class PszmReport:
    """Diagnostics of a candidate zero mode.

    Norms are normalised Frobenius norms.  ``anticommutes`` and ``commutes``
    record, per parity generator, whether every term anticommutes
    (commutes) with it; ``symmetry_ok`` holds when one generator
    anticommutes and the other commutes.  ``resonant`` names the smallest
    first-order denominator if it lies inside the guard.
    """

    commutator_norm: float
    square_deviation: float
    anticommutes: dict[str, bool]
    commutes: dict[str, bool]
    symmetry_ok: bool
    resonant: str | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def verify_pszm(psi: PauliSum, p: ModelParams, guard: float = RESONANCE_GUARD) -> PszmReport:
    n = p.n_sites
    if psi.n_sites != n:
        raise ValueError("operator and model sizes differ")
    comm = frobenius_norm(commutator(psi, build_hamiltonian(p)))
    sq = anticommutator(psi, psi) - PauliSum(n, {(0, 0): 1.0})
    anti, com = {}, {}
    for name, g in symmetry_generators(p).items():
        flags = [not PauliString(n, x, z, _popcount(x & z)).commutes_with(g) for x, z in psi.terms]
        anti[name] = bool(flags) and all(flags)
        com[name] = not any(flags)
    ok = (anti["G_e"] and com["G_o"]) or (anti["G_o"] and com["G_e"])
    d = denominators(p)
    cut = _guard_value(p, guard)
    close = [k for k in sorted(d, key=lambda k: abs(d[k])) if abs(d[k]) < cut]
    return PszmReport(comm, frobenius_norm(sq), anti, com, ok, close[0] if close else None)


@dataclass(frozen=True)
class ResonanceRow:
    ratio: float
    res_z: bool
    res_x_left: bool
    res_x_right: bool
    d1: float
    d2: float
    d3: float


def resonance_scan(p: ModelParams, ratios: Sequence[float], guard: float = RESONANCE_GUARD) -> list[ResonanceRow]:
    """Which first-order modes are resonant at each ``j_o / j_e`` ratio."""
    rows = []
    for r in ratios:
        q = p.with_ratio(float(r))
        d = denominators(q)
        cut = _guard_value(q, guard)
        hit = {k: abs(v) < cut for k, v in d.items()}
        rows.append(
            ResonanceRow(
                float(r),
                hit["d1"],
                hit["d1"] or hit["d2"],
                hit["d1"] or hit["d3"],
                d["d1"],
                d["d2"],
                d["d3"],
            )
        )
    return rows
