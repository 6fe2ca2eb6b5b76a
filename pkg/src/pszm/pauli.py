"""Bitmask Pauli strings and real-weighted Hermitian Pauli sums.

Sites are 1-based at every public boundary and map to bit ``i - 1`` of the
masks.  A :class:`PauliString` stores ``i**phase_exp * X^x Z^z`` with the bare
mask pair, so a site with both bits set is ``X Z = -i Y`` unless the phase
says otherwise.  A :class:`PauliSum` key ``(x, z)`` instead denotes the
Hermitian string ``i**popcount(x & z) * X^x Z^z`` (the literal product of
X/Y/Z site factors), which keeps every coefficient real.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
import scipy.sparse as sp

__all__ = [
    "MAX_SITES",
    "MAX_DENSE_SITES",
    "PRUNE_TOL",
    "DimensionError",
    "CapacityError",
    "PauliString",
    "PauliSum",
    "multiply",
    "commutator",
    "anticommutator",
    "to_dense",
    "to_sparse",
    "frobenius_norm",
    "format_sum",
    "parse_sum",
]

MAX_SITES = 128
MAX_DENSE_SITES = 14
PRUNE_TOL = 1e-14

_LETTERS = {(1, 0): "X", (1, 1): "Y", (0, 1): "Z"}
_BITS = {"X": (1, 0), "Y": (1, 1), "Z": (0, 1)}


class DimensionError(ValueError):
    """Operands act on different numbers of sites."""


class CapacityError(ValueError):
    """Requested dense object is too large to materialise."""


def _popcount(v: int) -> int:
    return bin(v).count("1")


def _check_masks(n: int, x: int, z: int) -> None:
    if not 1 <= n <= MAX_SITES:
        raise ValueError(f"n_sites must be in 1..{MAX_SITES}, got {n}")
    limit = 1 << n
    if x < 0 or z < 0 or x >= limit or z >= limit:
        raise ValueError(f"masks exceed {n} sites")


@dataclass(frozen=True)
class PauliString:
    """``i**phase_exp * X^x_mask Z^z_mask`` on ``n_sites`` qubits."""

    n_sites: int
    x_mask: int = 0
    z_mask: int = 0
    phase_exp: int = 0

    def __post_init__(self):
        _check_masks(self.n_sites, self.x_mask, self.z_mask)
        object.__setattr__(self, "phase_exp", self.phase_exp % 4)

    @classmethod
    def identity(cls, n_sites: int) -> "PauliString":
        return cls(n_sites)

    @classmethod
    def from_sites(cls, n_sites: int, ops: Mapping[int, str] | Iterable[tuple[int, str]]) -> "PauliString":
        """Literal product of site factors, e.g. ``{1: "Z", 2: "X"}``.

        Y factors are genuine Y, so the phase absorbs one ``i`` per Y site.
        """
        items = ops.items() if isinstance(ops, Mapping) else ops
        x = z = 0
        n_y = 0
        for site, letter in items:
            if not 1 <= site <= n_sites:
                raise IndexError(f"site {site} outside 1..{n_sites}")
            bx, bz = _BITS[letter.upper()]
            bit = 1 << (site - 1)
            if (x | z) & bit:
                raise ValueError(f"site {site} given twice")
            x |= bit * bx
            z |= bit * bz
            n_y += bx & bz
        return cls(n_sites, x, z, n_y)

    @property
    def is_hermitian_form(self) -> bool:
        """True when the phase is exactly the Hermitian ``i**popcount(x&z)``."""
        return self.phase_exp == _popcount(self.x_mask & self.z_mask) % 4

    def sign(self) -> complex:
        """Scalar ``c`` with ``self == c * (Hermitian string of the same masks)``."""
        return 1j ** ((self.phase_exp - _popcount(self.x_mask & self.z_mask)) % 4)

    def commutes_with(self, other: "PauliString") -> bool:
        _same_size(self.n_sites, other.n_sites)
        return _symplectic(self.x_mask, self.z_mask, other.x_mask, other.z_mask) == 0

    def support(self) -> list[int]:
        m = self.x_mask | self.z_mask
        return [i + 1 for i in range(self.n_sites) if (m >> i) & 1]

    def letters(self) -> dict[int, str]:
        out = {}
        for i in range(self.n_sites):
            b = ((self.x_mask >> i) & 1, (self.z_mask >> i) & 1)
            if b != (0, 0):
                out[i + 1] = _LETTERS[b]
        return out

    def to_sum(self, coeff: float = 1.0) -> "PauliSum":
        s = self.sign()
        if abs(s.imag) > 0:
            raise ValueError("string is anti-Hermitian; cannot form a real Pauli sum")
        return PauliSum(self.n_sites, {(self.x_mask, self.z_mask): coeff * s.real})

    def __mul__(self, other: "PauliString") -> "PauliString":
        return multiply(self, other)

    def __str__(self):
        body = " ".join(f"{s}:{l}" for s, l in self.letters().items()) or "I"
        pre = ["", "i*", "-", "-i*"][(self.phase_exp - _popcount(self.x_mask & self.z_mask)) % 4]
        return pre + body


def _same_size(a: int, b: int) -> None:
    if a != b:
        raise DimensionError(f"size mismatch: {a} vs {b} sites")


def _symplectic(x1: int, z1: int, x2: int, z2: int) -> int:
    return (_popcount(x1 & z2) + _popcount(z1 & x2)) & 1


def multiply(a: PauliString, b: PauliString) -> PauliString:
    """Exact Pauli-group product ``a * b``."""
    _same_size(a.n_sites, b.n_sites)
    # Z^za X^xb = (-1)^{|za & xb|} X^xb Z^za
    phase = a.phase_exp + b.phase_exp + 2 * _popcount(a.z_mask & b.x_mask)
    return PauliString(a.n_sites, a.x_mask ^ b.x_mask, a.z_mask ^ b.z_mask, phase)


@dataclass(frozen=True)
class PauliSum:
    """Hermitian operator ``sum_k c_k P_k`` with real ``c_k``.

    ``terms`` maps ``(x_mask, z_mask)`` to the coefficient of the Hermitian
    string with those masks.  Coefficients with ``|c| < PRUNE_TOL`` are
    dropped on construction.
    """

    n_sites: int
    terms: Mapping[tuple[int, int], float] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for (x, z), c in dict(self.terms).items():
            _check_masks(self.n_sites, x, z)
            c = float(c)
            if abs(c) >= PRUNE_TOL:
                clean[(x, z)] = c
        object.__setattr__(self, "terms", clean)

    @classmethod
    def zero(cls, n_sites: int) -> "PauliSum":
        return cls(n_sites, {})

    @classmethod
    def from_list(cls, n_sites: int, items: Iterable[tuple[float, Mapping[int, str]]]) -> "PauliSum":
        acc: dict[tuple[int, int], float] = {}
        for coeff, ops in items:
            p = PauliString.from_sites(n_sites, ops)
            key = (p.x_mask, p.z_mask)
            acc[key] = acc.get(key, 0.0) + coeff
        return cls(n_sites, acc)

    def __len__(self):
        return len(self.terms)

    def __bool__(self):
        return bool(self.terms)

    def __iter__(self):
        return iter(self.terms.items())

    def coeff(self, ops: Mapping[int, str]) -> float:
        p = PauliString.from_sites(self.n_sites, ops)
        return self.terms.get((p.x_mask, p.z_mask), 0.0)

    def strings(self) -> list[tuple[float, PauliString]]:
        return [(c, PauliString(self.n_sites, x, z, _popcount(x & z))) for (x, z), c in self.terms.items()]

    def __add__(self, other: "PauliSum") -> "PauliSum":
        _same_size(self.n_sites, other.n_sites)
        acc = dict(self.terms)
        for k, c in other.terms.items():
            acc[k] = acc.get(k, 0.0) + c
        return PauliSum(self.n_sites, acc)

    def __neg__(self) -> "PauliSum":
        return PauliSum(self.n_sites, {k: -c for k, c in self.terms.items()})

    def __sub__(self, other: "PauliSum") -> "PauliSum":
        return self + (-other)

    def __mul__(self, scalar: float) -> "PauliSum":
        return PauliSum(self.n_sites, {k: scalar * c for k, c in self.terms.items()})

    __rmul__ = __mul__

    def allclose(self, other: "PauliSum", atol: float = 1e-12) -> bool:
        diff = self - other
        return all(abs(c) <= atol for c in diff.terms.values())

    def max_support_width(self) -> int:
        """Largest ``last - first + 1`` site span over all terms."""
        width = 0
        for x, z in self.terms:
            m = x | z
            if m:
                lo = (m & -m).bit_length()
                width = max(width, m.bit_length() - lo + 1)
        return width

    def __str__(self):
        return format_sum(self)


def _hermitian_product(x1, z1, x2, z2):
    """Masks and i-power of the product of two Hermitian strings.

    Returns ``(x, z, k)`` with ``H(x1,z1) H(x2,z2) = i**k H(x, z)``.
    """
    x, z = x1 ^ x2, z1 ^ z2
    k = _popcount(x1 & z1) + _popcount(x2 & z2) + 2 * _popcount(z1 & x2) - _popcount(x & z)
    return x, z, k % 4


def commutator(a: PauliSum, b: PauliSum) -> PauliSum:
    """``(1/2i) [a, b]`` as a real Pauli sum.

    Only anticommuting pairs contribute; each one gives ``-i * a_k b_l``
    times its product string, which is real for Hermitian inputs.
    """
    _same_size(a.n_sites, b.n_sites)
    acc: dict[tuple[int, int], float] = {}
    for (x1, z1), c1 in a.terms.items():
        for (x2, z2), c2 in b.terms.items():
            if not _symplectic(x1, z1, x2, z2):
                continue
            x, z, k = _hermitian_product(x1, z1, x2, z2)
            # k is odd here; -i * i**k is real
            val = c1 * c2 * (-1j) * 1j**k
            if abs(val.imag) > 1e-12:
                raise ArithmeticError("non-Hermitian commutator residue")
            acc[(x, z)] = acc.get((x, z), 0.0) + val.real
    return PauliSum(a.n_sites, acc)


def anticommutator(a: PauliSum, b: PauliSum) -> PauliSum:
    """``(1/2) {a, b}``; equals ``a @ a`` when ``b is a``."""
    _same_size(a.n_sites, b.n_sites)
    acc: dict[tuple[int, int], float] = {}
    for (x1, z1), c1 in a.terms.items():
        for (x2, z2), c2 in b.terms.items():
            if _symplectic(x1, z1, x2, z2):
                continue
            x, z, k = _hermitian_product(x1, z1, x2, z2)
            val = c1 * c2 * 1j**k
            if abs(val.imag) > 1e-12:
                raise ArithmeticError("non-Hermitian anticommutator residue")
            acc[(x, z)] = acc.get((x, z), 0.0) + val.real
    return PauliSum(a.n_sites, acc)


def _reverse_bits(mask: int, n: int) -> int:
    # site 1 is the most significant bit of a basis index
    return int(format(mask, f"0{n}b")[::-1], 2) if n else 0


def _string_action(n: int, x: int, z: int, factor: complex, idx: np.ndarray):
    """Rows, values for ``factor * X^x Z^z`` acting on basis columns ``idx``."""
    xi, zi = _reverse_bits(x, n), _reverse_bits(z, n)
    parity = np.bitwise_count(idx & zi) & 1
    vals = factor * (1 - 2 * parity.astype(np.int64))
    return idx ^ xi, vals


def to_dense(a: PauliSum | PauliString) -> np.ndarray:
    """Dense ``2**n x 2**n`` matrix; site 1 is the most significant qubit."""
    n = a.n_sites
    if n > MAX_DENSE_SITES:
        raise CapacityError(f"dense matrices limited to {MAX_DENSE_SITES} sites, got {n}")
    return to_sparse(a).toarray()


def to_sparse(a: PauliSum | PauliString) -> sp.csr_matrix:
    """Sparse matrix in the same basis as :func:`to_dense` (no size guard)."""
    n = a.n_sites
    dim = 1 << n
    idx = np.arange(dim, dtype=np.int64)
    if isinstance(a, PauliString):
        items = [(a.x_mask, a.z_mask, 1j**a.phase_exp)]
    else:
        items = [(x, z, c * 1j ** (_popcount(x & z) % 4)) for (x, z), c in a.terms.items()]
    if not items:
        return sp.csr_matrix((dim, dim), dtype=complex)
    rows, cols, vals = [], [], []
    for x, z, f in items:
        r, v = _string_action(n, x, z, f, idx)
        rows.append(r)
        cols.append(idx)
        vals.append(v)
    m = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(dim, dim)
    )
    return m.tocsr()


def frobenius_norm(a: PauliSum) -> float:
    """Normalised Frobenius norm ``sqrt(Tr(A^2) / 2**n) = sqrt(sum c**2)``."""
    return float(np.sqrt(sum(c * c for c in a.terms.values())))


def format_sum(a: PauliSum, precision: int = 12) -> str:
    """One term per line: ``<coeff> <site:letter>...``, sorted for stable diffs."""
    lines = []
    for c, p in sorted(a.strings(), key=lambda t: (t[1].support(), sorted(t[1].letters().items()))):
        ops = " ".join(f"{s}:{l}" for s, l in p.letters().items())
        lines.append(f"{c:.{precision}g} {ops}".rstrip())
    return "\n".join(lines) + ("\n" if lines else "")


def parse_sum(text: str, n_sites: int) -> PauliSum:
    """Inverse of :func:`format_sum`; ``#`` starts a comment."""
    items = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, *ops = line.split()
        sites = {}
        for tok in ops:
            s, letter = tok.split(":")
            sites[int(s)] = letter
        items.append((float(head), sites))
    return PauliSum.from_list(n_sites, items)
