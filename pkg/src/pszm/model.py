"""Parameters and operators of the dimerized cluster chain.

H0 = -sum_m J_m K_m over bulk centres m = 2..N-1, with ``J_m = j_e`` for even
``m`` and ``j_o`` for odd ``m``; H1 = sum_i h_i X_i + sum_i V_i X_i X_{i+1}.
Everything below goes through a :class:`Couplings` table so that uniform and
disordered chains share one code path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .pauli import PauliString, PauliSum

__all__ = [
    "ModelParams",
    "Couplings",
    "DisorderSpec",
    "build_h0",
    "build_h1",
    "build_hamiltonian",
    "stabilizer",
    "logical_operators",
    "symmetry_generators",
    "sample_disordered_params",
]

_PARAM_KEYS = ("n", "j_e", "j_o", "h_x", "v_xx", "dt")


@dataclass(frozen=True)
class ModelParams:
    """Chain length, couplings and Trotter step.

    Defaults are the interacting-chain experiment values (``dt = 0.5``,
    ``j_e = pi/5``, ``h_x = 0.11``, ``v_xx = 0.2``) with a homogeneous ``j_o``.
    """

    n_sites: int = 12
    j_e: float = math.pi / 5
    j_o: float = math.pi / 5
    h_x: float = 0.11
    v_xx: float = 0.2
    dt: float = 0.5

    def __post_init__(self):
        if int(self.n_sites) != self.n_sites or self.n_sites < 4 or self.n_sites % 2:
            raise ValueError(f"n_sites must be an even integer >= 4, got {self.n_sites}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")

    @property
    def ratio(self) -> float:
        return self.j_o / self.j_e

    def with_ratio(self, ratio: float) -> "ModelParams":
        """Same chain with ``j_o = ratio * j_e``."""
        return replace(self, j_o=ratio * self.j_e)

    def replace(self, **kw) -> "ModelParams":
        return replace(self, **kw)

    def couplings(self) -> "Couplings":
        n = self.n_sites
        j = np.zeros(n)
        for m in range(2, n):
            j[m - 1] = self.j_e if m % 2 == 0 else self.j_o
        return Couplings(n, j, np.full(n, float(self.h_x)), np.full(n - 1, float(self.v_xx)))

    def to_dict(self) -> dict:
        return dict(zip(_PARAM_KEYS, (self.n_sites, self.j_e, self.j_o, self.h_x, self.v_xx, self.dt)))

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParams":
        unknown = set(d) - set(_PARAM_KEYS)
        if unknown:
            raise KeyError(f"unknown model keys: {sorted(unknown)}")
        kw = {"n_sites" if k == "n" else k: v for k, v in d.items()}
        return cls(**kw)


@dataclass(frozen=True, eq=False)
class Couplings:
    """Per-term coefficients.

    ``j[m - 1]`` is the stabilizer strength at centre ``m`` (entries for the
    edge sites are unused and kept at zero), ``h[i - 1]`` the field on site
    ``i`` and ``v[i - 1]`` the bond ``(i, i + 1)``.
    """

    n_sites: int
    j: np.ndarray
    h: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        n = self.n_sites
        for name, size in (("j", n), ("h", n), ("v", n - 1)):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (size,):
                raise ValueError(f"{name} must have length {size}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def has_interactions(self) -> bool:
        return bool(np.any(self.v != 0))


def _coup(p: ModelParams | Couplings) -> Couplings:
    return p if isinstance(p, Couplings) else p.couplings()


def stabilizer(p: ModelParams | Couplings, m: int) -> PauliString:
    """K_m; the edge cases m = 1 and m = N are the logical X operators."""
    n = p.n_sites
    if not 1 <= m <= n:
        raise IndexError(f"stabilizer index {m} outside 1..{n}")
    if m == 1:
        return PauliString.from_sites(n, {1: "X", 2: "Z"})
    if m == n:
        return PauliString.from_sites(n, {n - 1: "Z", n: "X"})
    return PauliString.from_sites(n, {m - 1: "Z", m: "X", m + 1: "Z"})


def build_h0(p: ModelParams | Couplings) -> PauliSum:
    c = _coup(p)
    n = c.n_sites
    acc = {}
    for m in range(2, n):
        k = stabilizer(c, m)
        acc[(k.x_mask, k.z_mask)] = -c.j[m - 1]
    return PauliSum(n, acc)


def build_h1(p: ModelParams | Couplings) -> PauliSum:
    c = _coup(p)
    n = c.n_sites
    acc = {}
    for i in range(1, n + 1):
        acc[(1 << (i - 1), 0)] = c.h[i - 1]
    for i in range(1, n):
        acc[(3 << (i - 1), 0)] = c.v[i - 1]
    return PauliSum(n, acc)


def build_hamiltonian(p: ModelParams | Couplings) -> PauliSum:
    return build_h0(p) + build_h1(p)


def logical_operators(p: ModelParams | Couplings) -> dict[str, PauliString]:
    """Edge logical operators keyed ``ZL, XL, YL, ZR, XR, YR``.

    ``Y = i X Z`` at each edge, so ``YL = Y_1 Z_2`` and ``YR = Z_{N-1} Y_N``.
    """
    n = p.n_sites
    return {
        "ZL": PauliString.from_sites(n, {1: "Z"}),
        "XL": PauliString.from_sites(n, {1: "X", 2: "Z"}),
        "YL": PauliString.from_sites(n, {1: "Y", 2: "Z"}),
        "ZR": PauliString.from_sites(n, {n: "Z"}),
        "XR": PauliString.from_sites(n, {n - 1: "Z", n: "X"}),
        "YR": PauliString.from_sites(n, {n - 1: "Z", n: "Y"}),
    }


def symmetry_generators(p: ModelParams | Couplings) -> dict[str, PauliString]:
    """Parity products ``G_e`` (even sites) and ``G_o`` (odd sites)."""
    n = p.n_sites
    even = sum(1 << (i - 1) for i in range(2, n + 1, 2))
    odd = sum(1 << (i - 1) for i in range(1, n + 1, 2))
    return {"G_e": PauliString(n, even, 0), "G_o": PauliString(n, odd, 0)}


@dataclass(frozen=True)
class DisorderSpec:
    """Uniform sampling intervals for the random-coupling comparison.

    Draws come from numpy's ``PCG64`` bit generator seeded with ``seed``,
    through ``Generator.uniform`` (53-bit doubles).  Order of draws: one
    stabilizer strength per centre ``m = 2..N-1`` (``j_e_range`` for even
    ``m``, ``j_o_range`` for odd), then one field per site ``1..N``.
    """

    j_o_range: tuple[float, float] = (math.pi / 6, 5 * math.pi / 6)
    j_e_range: tuple[float, float] = (math.pi / 6, 5 * math.pi / 6)
    h_x_range: tuple[float, float] = (0.18, 0.28)
    seed: int = 0

    def __post_init__(self):
        for name in ("j_o_range", "j_e_range", "h_x_range"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name}: lower bound {lo} exceeds upper bound {hi}")
            object.__setattr__(self, name, (float(lo), float(hi)))
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def instance(self, k: int) -> "DisorderSpec":
        """Spec for the ``k``-th instance of a disorder average."""
        return replace(self, seed=(int(self.seed) + k) % 2**64)


def sample_disordered_params(base: ModelParams, d: DisorderSpec) -> Couplings:
    """Random per-site couplings; ``v_xx`` stays uniform at ``base.v_xx``."""
    rng = np.random.Generator(np.random.PCG64(int(d.seed)))
    n = base.n_sites
    j = np.zeros(n)
    for m in range(2, n):
        lo, hi = d.j_e_range if m % 2 == 0 else d.j_o_range
        j[m - 1] = rng.uniform(lo, hi)
    h = np.array([rng.uniform(*d.h_x_range) for _ in range(n)])
    return Couplings(n, j, h, np.full(n - 1, float(base.v_xx)))
