"""Majorana backend for the non-interacting chain (``v_xx = 0``).

Majorana operators, with ``P_i`` the product of ``X_j`` over ``j < i``::

    alpha_i = -P_i Z_i,   beta_i = P_i Y_i,   gamma_{2i-1} = alpha_i,   gamma_{2i} = beta_i

so that ``X_i = -i alpha_i beta_i`` and ``K_m = -i beta_{m-1} alpha_{m+1}``.
One Trotter step conjugates Majoranas linearly, ``U^dag gamma_j U = sum_k O_jk gamma_k``
with ``O`` real orthogonal, which gives edge-operator dynamics at any N in
``O(cycles N^2)``.

Odd-site and even-site Majoranas never mix: the odd sites carry the
kicked Kitaev chain with coupling ``j_e`` (it holds ``Z_L`` and ``X_R``),
the even sites the chain with ``j_o`` (``Z_R`` and ``X_L``).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .model import Couplings, ModelParams
from .pauli import PauliString, multiply
from .statevec import InitialStateSpec

__all__ = [
    "UnsupportedRegimeError",
    "ResolutionError",
    "MajoranaMonomial",
    "MajoranaPropagator",
    "MomentVector",
    "Spectrum",
    "SpectrumResult",
    "majorana_string",
    "jordan_wigner",
    "to_pauli",
    "build_propagator",
    "quasi_energies",
    "initial_moments",
    "edge_time_series",
    "fft_spectrum",
    "split_edge_bulk",
    "band_separation",
    "sector_indices",
    "spectroscopy_sweep",
    "peak_offsets",
    "MIN_SAMPLES",
    "PEAK_THRESHOLD",
]

MIN_SAMPLES = 64
PEAK_THRESHOLD = 5.0


class UnsupportedRegimeError(ValueError):
    """Requested calculation needs the free-fermion (``v_xx = 0``) regime."""


class ResolutionError(ValueError):
    """Too few samples for a meaningful spectrum."""


# --------------------------------------------------------------------------
# Jordan-Wigner
# --------------------------------------------------------------------------


def _site_of(k: int) -> tuple[int, bool]:
    """Site of ``gamma_k`` and whether it is a beta."""
    return (k + 1) // 2, k % 2 == 0


def majorana_string(n: int, k: int) -> PauliString:
    """``gamma_k`` (1-based, ``k <= 2n``) as a Pauli string."""
    if not 1 <= k <= 2 * n:
        raise IndexError(f"Majorana index {k} outside 1..{2 * n}")
    i, is_beta = _site_of(k)
    prefix = (1 << (i - 1)) - 1
    bit = 1 << (i - 1)
    if is_beta:
        # P_i Y_i with Y = i X Z
        return PauliString(n, prefix | bit, bit, 1)
    return PauliString(n, prefix, bit, 2)


@dataclass(frozen=True)
class MajoranaMonomial:
    """``i**phase_exp * gamma_{k1} gamma_{k2} ...`` with increasing indices."""

    n_sites: int
    indices: tuple[int, ...]
    phase_exp: int = 0

    def __post_init__(self):
        idx = tuple(int(k) for k in self.indices)
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError("Majorana indices must be strictly increasing")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "phase_exp", int(self.phase_exp) % 4)

    @property
    def phase(self) -> complex:
        return 1j**self.phase_exp

    def labels(self) -> list[str]:
        return [("b" if _site_of(k)[1] else "a") + str(_site_of(k)[0]) for k in self.indices]

    def __str__(self) -> str:
        pref = {0: "", 1: "i ", 2: "-", 3: "-i "}[self.phase_exp]
        return pref + (" ".join(self.labels()) or "1")


def to_pauli(mono: MajoranaMonomial) -> PauliString:
    n = mono.n_sites
    out = PauliString.identity(n)
    for k in mono.indices:
        out = multiply(out, majorana_string(n, k))
    return PauliString(n, out.x_mask, out.z_mask, out.phase_exp + mono.phase_exp)


def jordan_wigner(s: PauliString) -> MajoranaMonomial:
    """Exact Majorana monomial equal to ``s``.

    Sites are peeled from the right: Z needs ``alpha_i``, Y needs
    ``beta_i``, X needs both, and each choice only changes the residual on
    sites to the left.
    """
    n = s.n_sites
    x, z = s.x_mask, s.z_mask
    chosen: list[int] = []
    for i in range(n, 0, -1):
        bit = 1 << (i - 1)
        xi, zi = bool(x & bit), bool(z & bit)
        picks = []
        if zi and not xi:
            picks = [2 * i - 1]
        elif zi and xi:
            picks = [2 * i]
        elif xi:
            picks = [2 * i - 1, 2 * i]
        for k in picks:
            g = majorana_string(n, k)
            x ^= g.x_mask
            z ^= g.z_mask
            chosen.append(k)
    assert x == 0 and z == 0
    mono = MajoranaMonomial(n, tuple(sorted(chosen)), 0)
    prod = to_pauli(mono)
    return MajoranaMonomial(n, mono.indices, s.phase_exp - prod.phase_exp)


# --------------------------------------------------------------------------
# single-particle propagator
# --------------------------------------------------------------------------


def _coup(p: ModelParams | Couplings) -> Couplings:
    return p if isinstance(p, Couplings) else p.couplings()


def _rotate(o: np.ndarray, a: int, b: int, theta: float) -> None:
    """Right-multiply ``o`` by the Heisenberg map of ``exp(theta gamma_a gamma_b)``.

    That conjugation sends ``gamma_a -> cos(2 theta) gamma_a + sin(2 theta) gamma_b``
    and ``gamma_b -> cos(2 theta) gamma_b - sin(2 theta) gamma_a`` (0-based rows).
    """
    c, s = math.cos(2 * theta), math.sin(2 * theta)
    ca, cb = o[:, a].copy(), o[:, b].copy()
    o[:, a] = c * ca - s * cb
    o[:, b] = s * ca + c * cb


@dataclass(frozen=True, eq=False)
class MajoranaPropagator:
    """Heisenberg map of one Trotter step: ``U^dag gamma_j U = sum_k O[j, k] gamma_k``."""

    matrix: np.ndarray
    dt: float
    couplings: Couplings

    @property
    def n_sites(self) -> int:
        return self.couplings.n_sites

    def power(self, t: int) -> np.ndarray:
        return np.linalg.matrix_power(self.matrix, t)


def build_propagator(p: ModelParams | Couplings, dt: float | None = None) -> MajoranaPropagator:
    """Single-particle map of ``exp(-i dt H1) exp(-i dt H0)`` at ``v_xx = 0``.

    ``exp(i dt J_m K_m) = exp(dt J_m beta_{m-1} alpha_{m+1})`` and
    ``exp(-i dt h_i X_i) = exp(-dt h_i alpha_i beta_i)``; conjugating by
    ``U1 U0`` applies the field rotations first, then the stabilizer ones.
    """
    if isinstance(p, ModelParams):
        dt = p.dt if dt is None else dt
    elif dt is None:
        raise ValueError("dt is required with an explicit coupling table")
    c = _coup(p)
    if c.has_interactions:
        raise UnsupportedRegimeError("the Majorana backend requires v_xx = 0")
    n = c.n_sites
    a = np.eye(2 * n)
    for i in range(1, n + 1):
        _rotate(a, 2 * i - 2, 2 * i - 1, -dt * c.h[i - 1])
    b = np.eye(2 * n)
    for m in range(2, n):
        # beta_{m-1} is gamma_{2m-2}, alpha_{m+1} is gamma_{2m+1}
        _rotate(b, 2 * m - 3, 2 * m, dt * c.j[m - 1])
    return MajoranaPropagator(a @ b, float(dt), c)


def sector_indices(n: int, parity: str) -> np.ndarray:
    """0-based Majorana rows on odd (``"odd"``) or even (``"even"``) sites."""
    first = 1 if parity == "odd" else 2 if parity == "even" else None
    if first is None:
        raise ValueError("parity must be 'odd' or 'even'")
    sites = np.arange(first, n + 1, 2)
    return np.sort(np.concatenate([2 * sites - 2, 2 * sites - 1]))


def _wrap(eps: np.ndarray, dt: float) -> np.ndarray:
    """Map into ``(-pi/dt, pi/dt]``."""
    w = math.pi / dt
    out = np.mod(eps + w, 2 * w) - w
    out[np.isclose(out, -w, atol=1e-12)] = w
    return out


def quasi_energies(o: MajoranaPropagator, parity: str | None = None) -> np.ndarray:
    """Sorted eigenphases of ``O`` divided by ``dt``, in ``(-pi/dt, pi/dt]``.

    ``parity`` restricts to the odd-site (``j_e``) or even-site (``j_o``)
    chain.  Eigenvalues of a real orthogonal matrix pair up as
    ``e^{+- i phi}``, so the result is symmetric under negation.
    """
    mat = o.matrix
    if parity is not None:
        idx = sector_indices(o.n_sites, parity)
        mat = mat[np.ix_(idx, idx)]
    lam = np.linalg.eigvals(mat)
    return np.sort(_wrap(np.angle(lam) / o.dt, o.dt))


# --------------------------------------------------------------------------
# moments and edge dynamics
# --------------------------------------------------------------------------

_SINGLE_EXPECT = {
    "0": {"X": 0.0, "Y": 0.0, "Z": 1.0},
    "1": {"X": 0.0, "Y": 0.0, "Z": -1.0},
    "+": {"X": 1.0, "Y": 0.0, "Z": 0.0},
    "-": {"X": -1.0, "Y": 0.0, "Z": 0.0},
}


def _product_labels(n: int, spec: InitialStateSpec) -> list[str]:
    if not spec.is_product:
        raise UnsupportedRegimeError(f"moments are computed for product states only, got {spec.kind!r}")
    if spec.kind == "product_z":
        return ["0"] * n
    return ["+"] + ["0"] * (n - 2) + ["+"]


def _product_expectation(s: PauliString, labels: Sequence[str]) -> complex:
    val = 1j**s.phase_exp
    for site, letter in s.letters().items():
        val *= _SINGLE_EXPECT[labels[site - 1]][letter]
        if val == 0:
            return 0.0
    return val


@dataclass(frozen=True, eq=False)
class MomentVector:
    """``m_k = <gamma_k>`` and ``g_k = <-i G gamma_k>`` (both real) for one state.

    ``G`` is the product of ``X`` over all sites; ``-i G gamma_k`` is
    Hermitian because ``G`` anticommutes with every Majorana.
    """

    m: np.ndarray
    g: np.ndarray


def initial_moments(p: ModelParams | Couplings | int, spec: InitialStateSpec) -> MomentVector:
    n = p if isinstance(p, int) else p.n_sites
    labels = _product_labels(n, spec)
    parity = PauliString(n, (1 << n) - 1, 0, 3)  # -i G
    m = np.empty(2 * n)
    g = np.empty(2 * n)
    for k in range(1, 2 * n + 1):
        gam = majorana_string(n, k)
        m[k - 1] = _product_expectation(gam, labels).real
        g[k - 1] = _product_expectation(multiply(parity, gam), labels).real
    return MomentVector(m, g)


def edge_time_series(o: MajoranaPropagator, moments: MomentVector, cycles: int) -> dict[str, np.ndarray]:
    """``<Z_L>, <Z_R>, <X_L>, <X_R>`` for ``t = 0..cycles``.

    ``Z_L = -alpha_1``, ``X_L = -alpha_2``, ``Z_R = -i G beta_N`` and
    ``X_R = -i G beta_{N-1}``; ``G`` commutes with the step, so the right
    edge only needs the fixed vector ``g``.
    """
    n = o.n_sites
    out = {k: np.empty(cycles + 1) for k in ("ZL", "ZR", "XL", "XR")}
    vm, vg = moments.m.copy(), moments.g.copy()
    for t in range(cycles + 1):
        out["ZL"][t] = -vm[0]
        out["XL"][t] = -vm[2]
        out["ZR"][t] = vg[2 * n - 1]
        out["XR"][t] = vg[2 * n - 3]
        vm = o.matrix @ vm
        vg = o.matrix @ vg
    return out


# --------------------------------------------------------------------------
# spectra
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Spectrum:
    """``|DFT| / T`` of one real series on ``omega in (-pi/dt, pi/dt]`` (ascending).

    ``peaks`` are bin centres; ``refined`` holds the same peaks shifted by a
    three-point parabolic fit of the amplitude.
    """

    omega: np.ndarray
    amplitude: np.ndarray
    peaks: np.ndarray
    refined: np.ndarray
    bin_width: float


def _omega_grid(size: int, dt: float) -> np.ndarray:
    w = 2 * np.pi * np.fft.fftfreq(size, d=dt)
    return _wrap(w, dt)


def _find_peaks(amp: np.ndarray, omega: np.ndarray, threshold: float) -> np.ndarray:
    """Circular local maxima above ``threshold * median``; plateaus keep the lower ``|omega|``."""
    cut = threshold * float(np.median(amp))
    left, right = np.roll(amp, 1), np.roll(amp, -1)
    cand = (amp > cut) & (amp >= left) & (amp >= right) & ((amp > left) | (amp > right))
    size = len(amp)
    keep = []
    for k in np.flatnonzero(cand):
        twins = [j % size for j in (k - 1, k + 1)]
        if any(cand[j] and amp[j] == amp[k] and abs(omega[j]) < abs(omega[k]) for j in twins):
            continue
        keep.append(k)
    return np.array(sorted(keep, key=lambda k: omega[k]), dtype=int)


def _refine(amp: np.ndarray, omega: np.ndarray, idx: np.ndarray, step: float) -> np.ndarray:
    size = len(amp)
    out = np.empty(len(idx))
    for n, k in enumerate(idx):
        a, b, c = amp[(k - 1) % size], amp[k], amp[(k + 1) % size]
        den = a - 2 * b + c
        shift = 0.5 * (a - c) / den if den < 0 else 0.0
        out[n] = omega[k] + float(np.clip(shift, -0.5, 0.5)) * step
    return out


def fft_spectrum(
    series: np.ndarray,
    dt: float,
    mean_subtract: bool = True,
    window: str | None = None,
    zero_pad: int = 1,
    threshold: float = PEAK_THRESHOLD,
) -> Spectrum:
    """DFT magnitude and peak list of a uniformly sampled real series.

    ``window`` may be ``None`` or ``"hann"``.  ``zero_pad`` > 1 interpolates
    the spectrum for display; the reported ``bin_width`` stays
    ``2 pi / (T dt)`` of the unpadded series.
    """
    x = np.asarray(series, dtype=float)
    size = len(x)
    if size < MIN_SAMPLES:
        raise ResolutionError(f"need at least {MIN_SAMPLES} samples, got {size}")
    if zero_pad < 1:
        raise ValueError("zero_pad must be >= 1")
    if mean_subtract:
        x = x - x.mean()
    if window == "hann":
        x = x * np.hanning(size)
    elif window is not None:
        raise ValueError(f"unknown window {window!r}")
    total = size * int(zero_pad)
    amp = np.abs(np.fft.fft(x, n=total)) / size
    omega = _omega_grid(total, dt)
    order = np.argsort(omega)
    omega, amp = omega[order], amp[order]
    idx = _find_peaks(amp, omega, threshold)
    step = 2 * math.pi / (total * dt)
    return Spectrum(omega, amp, omega[idx], _refine(amp, omega, idx, step), 2 * math.pi / (size * dt))


def split_edge_bulk(peaks: np.ndarray, separation: float = 2.0) -> tuple[float, np.ndarray]:
    """Split peak frequencies into an edge frequency and sorted positive bulk frequencies.

    The lowest positive peak is taken as the hybridised edge pair when the
    next one lies at least ``separation`` times further out; otherwise the
    edge splitting is unresolved and reported as 0.
    """
    pos = np.sort(np.asarray(peaks, dtype=float))
    pos = pos[pos > 0]
    if len(pos) == 1 or (len(pos) >= 2 and pos[1] >= separation * pos[0]):
        return float(pos[0]), pos[1:]
    return 0.0, pos


def band_separation(bulk_a: np.ndarray, bulk_b: np.ndarray) -> float:
    """Mean ``|eps_a,k - eps_b,k|`` over bulk modes matched by rank from the lowest."""
    k = min(len(bulk_a), len(bulk_b))
    if k == 0:
        return float("nan")
    return float(np.mean(np.abs(np.asarray(bulk_a)[:k] - np.asarray(bulk_b)[:k])))


@dataclass(eq=False)
class SpectrumResult:
    """Spectroscopy sweep over ``j_o / j_e``.

    ``amplitude_l`` and ``amplitude_r`` are ``(ratios, omega)`` tables of the
    left and right edge ``Z`` spectra.  From the refined peaks: ``delta`` is
    the splitting of the near-zero pair seen by ``Z_R``, ``gap_l`` and
    ``gap_r`` the distance from zero to the lowest bulk peak of each chain,
    and ``zeta`` the rank-matched mean offset between the two bulk bands.
    Every estimate carries an uncertainty of ``bin_width``.
    """

    ratios: np.ndarray
    omega: np.ndarray
    amplitude_l: np.ndarray
    amplitude_r: np.ndarray
    peaks_l: list[np.ndarray]
    peaks_r: list[np.ndarray]
    quasi: list[np.ndarray]
    delta: np.ndarray
    gap_l: np.ndarray
    gap_r: np.ndarray
    zeta: np.ndarray
    bin_width: float
    meta: dict = field(default_factory=dict)

    def summary(self) -> list[dict]:
        return [
            {
                "ratio": float(r),
                "delta": float(d),
                "Delta_L": float(gl),
                "Delta_R": float(gr),
                "zeta": float(z),
                "bin_width": self.bin_width,
            }
            for r, d, gl, gr, z in zip(self.ratios, self.delta, self.gap_l, self.gap_r, self.zeta)
        ]


def _sweep_one(base: ModelParams, ratio: float, cycles: int, spec: InitialStateSpec, options: Mapping):
    p = base.with_ratio(ratio)
    o = build_propagator(p)
    series = edge_time_series(o, initial_moments(p, spec), cycles)
    # drop t = 0 so the window holds exactly `cycles` samples
    sl = fft_spectrum(series["ZL"][1:], p.dt, **options)
    sr = fft_spectrum(series["ZR"][1:], p.dt, **options)
    return sl, sr, quasi_energies(o)


def spectroscopy_sweep(
    base: ModelParams,
    ratios: Sequence[float],
    cycles: int = 150,
    spec: InitialStateSpec | None = None,
    threads: int = 1,
    **options,
) -> SpectrumResult:
    """Edge ``Z`` spectra and gap estimates across ``j_o / j_e`` ratios."""
    spec = spec or InitialStateSpec("product_z")
    ratios = np.asarray(list(ratios), dtype=float)
    job = lambda r: _sweep_one(base, float(r), cycles, spec, options)  # noqa: E731
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(job, ratios))
    else:
        results = [job(r) for r in ratios]
    delta, gl, gr, zeta = [], [], [], []
    for sl, sr, _ in results:
        edge_r, bulk_r = split_edge_bulk(sr.refined)
        _, bulk_l = split_edge_bulk(sl.refined)
        delta.append(2 * edge_r)
        gl.append(bulk_l[0] if len(bulk_l) else float("nan"))
        gr.append(bulk_r[0] if len(bulk_r) else float("nan"))
        zeta.append(band_separation(bulk_r, bulk_l))
    return SpectrumResult(
        ratios=ratios,
        omega=results[0][0].omega,
        amplitude_l=np.stack([r[0].amplitude for r in results]),
        amplitude_r=np.stack([r[1].amplitude for r in results]),
        peaks_l=[r[0].peaks for r in results],
        peaks_r=[r[1].peaks for r in results],
        quasi=[r[2] for r in results],
        delta=np.array(delta),
        gap_l=np.array(gl),
        gap_r=np.array(gr),
        zeta=np.array(zeta),
        bin_width=results[0][0].bin_width,
        meta={"base": base.to_dict(), "cycles": cycles, "initial_state": spec.to_dict(), **options},
    )


def peak_offsets(result: SpectrumResult) -> np.ndarray:
    """Worst distance, in bins, from any edge-spectrum peak to the nearest quasi-energy, per ratio.

    Distances are taken on the circle of period ``2 pi / dt``.
    """
    dt = float(result.meta.get("base", {}).get("dt", 2 * math.pi / (result.bin_width * len(result.omega))))
    period = 2 * math.pi / dt
    out = []
    for k, quasi in enumerate(result.quasi):
        peaks = np.concatenate([result.peaks_l[k], result.peaks_r[k]])
        if not len(peaks):
            out.append(0.0)
            continue
        d = np.abs(peaks[:, None] - np.asarray(quasi)[None, :])
        d = np.minimum(d, period - d)
        out.append(float(d.min(axis=1).max()) / result.bin_width)
    return np.array(out)
