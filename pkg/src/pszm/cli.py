"""Scenario runner: a TOML config in, ``meta.json`` plus CSV tables out.

Config layout (every key below is optional unless marked; unknown keys are
rejected)::

    name = "fig2d_desk"
    command = "evolve"              # pipeline the config is written for
    backend = "statevec"            # statevec | exact | freefermion
    cycles = 30
    observables = ["edge_ops"]      # edge_ops, stabilizers, charges, bell_fidelity, tomography
    output = "runs/fig2d_desk"

    [model]                         # n, j_e, j_o, h_x, v_xx, dt; numbers or "7*pi/20"-style strings
    [initial]                       # kind, excitation_sites, excitation_gate, matched_edges
    [sweep]                         # parameter (ratio, j_e, j_o, h_x, v_xx, dt), values
    [disorder]                      # instances, seed, j_e_range, j_o_range, h_x_range
    [spectroscopy]                  # window, zero_pad, threshold, mean_subtract
    [charges]                       # window = [start, stop]
    [bell]                          # clean_reference
    [pszm]                          # scales, guard
    [magnus]                        # dts

``matched_edges`` measures ``Z_L, Z_R`` on the Z-type initial state and
``X_L, X_R`` on the X-type state with the same excitations.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import re
import subprocess
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .freefermion import (
    MIN_SAMPLES,
    build_propagator,
    edge_time_series,
    initial_moments,
    peak_offsets,
    spectroscopy_sweep,
)
from .hardware import fold_single_qubit_runs, readout_correct, u3_angles, u3_compile
from .magnus import BCH_MAX_SITES, bch_residual_scan, loglog_slope
from .model import (
    Couplings,
    DisorderSpec,
    ModelParams,
    build_h0,
    build_h1,
    logical_operators,
    sample_disordered_params,
    stabilizer,
    symmetry_generators,
)
from .observables import excitation_counts, gap_fit, lifetime, windowed_slope
from .pauli import MAX_DENSE_SITES, commutator, format_sum, frobenius_norm, to_dense
from .prethermal import RESONANCE_GUARD, ResonanceError, bare_logical, pszm_first_order, verify_pszm
from .statevec import (
    InitialStateSpec,
    SpecError,
    Statevector,
    _logical_products,
    bell_fidelity,
    expectation,
    iter_evolve,
    prepare_initial,
)

__all__ = [
    "ConfigError",
    "ScenarioConfig",
    "SweepSpec",
    "DisorderConfig",
    "RunDataset",
    "COMMANDS",
    "load_config",
    "bundled_configs",
    "run_scenario",
    "symmetry_drift",
    "main",
    "readout_correct",
    "u3_compile",
    "u3_angles",
    "fold_single_qubit_runs",
]

log = logging.getLogger("pszm")

BACKENDS = ("statevec", "exact", "freefermion")
OBSERVABLES = ("edge_ops", "stabilizers", "charges", "bell_fidelity", "tomography")
SWEEP_PARAMETERS = ("ratio", "j_e", "j_o", "h_x", "v_xx", "dt")
COMMANDS = ("evolve", "spectroscopy", "charges", "pszm", "magnus", "bell")
SYMMETRY_TOL = 1e-10
EDGE_OPS = ("ZL", "ZR", "XL", "XR")

_TOP_KEYS = {"name", "command", "backend", "cycles", "observables", "output", "model", "initial", "sweep", "disorder"}
_SECTION_KEYS = {
    "initial": {"kind", "excitation_sites", "excitation_gate", "matched_edges"},
    "sweep": {"parameter", "values"},
    "disorder": {"instances", "seed", "j_e_range", "j_o_range", "h_x_range"},
    "spectroscopy": {"window", "zero_pad", "threshold", "mean_subtract"},
    "charges": {"window"},
    "bell": {"clean_reference"},
    "pszm": {"scales", "guard"},
    "magnus": {"dts"},
}
_OPTION_SECTIONS = ("spectroscopy", "charges", "bell", "pszm", "magnus")
_MATCHED = {"cluster_z": "cluster_x", "cluster_x": "cluster_z", "product_z": "product_x_edges", "product_x_edges": "product_z"}
_Z_KINDS = ("cluster_z", "product_z")


class ConfigError(ValueError):
    """Invalid or inconsistent scenario config."""


_PI_EXPR = re.compile(r"^\s*(-?\d*\.?\d*)\s*\*?\s*pi\s*(?:/\s*(\d+\.?\d*))?\s*$")


def _number(v: Any, key: str) -> float:
    """Accept plain numbers or strings such as ``"pi"``, ``"-pi/2"``, ``"7*pi/20"``."""
    if isinstance(v, bool):
        raise ConfigError(f"{key}: expected a number, got {v!r}")
    if isinstance(v, (int, float)):
        return float(v)
    if isinstance(v, str):
        m = _PI_EXPR.match(v)
        if m:
            coef = m.group(1)
            c = -1.0 if coef == "-" else float(coef) if coef else 1.0
            return c * math.pi / (float(m.group(2)) if m.group(2) else 1.0)
    raise ConfigError(f"{key}: expected a number or an 'a*pi/b' expression, got {v!r}")


def _check_keys(d: Mapping, allowed: set, where: str) -> None:
    extra = sorted(set(d) - allowed)
    if extra:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(extra)}")


@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    values: tuple[float, ...]

    def apply(self, base: ModelParams, value: float) -> ModelParams:
        if self.parameter == "ratio":
            return base.with_ratio(value)
        key = {"j_e": "j_e", "j_o": "j_o", "h_x": "h_x", "v_xx": "v_xx", "dt": "dt"}[self.parameter]
        return base.replace(**{key: value})


@dataclass(frozen=True)
class DisorderConfig:
    spec: DisorderSpec
    instances: int = 10


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    params: ModelParams
    command: str = "evolve"
    backend: str = "statevec"
    initial: InitialStateSpec = field(default_factory=InitialStateSpec)
    matched_edges: bool = False
    cycles: int = 30
    observables: tuple[str, ...] = ("edge_ops",)
    sweep: SweepSpec | None = None
    disorder: DisorderConfig | None = None
    options: Mapping[str, Mapping[str, Any]] = field(default_factory=dict)
    output: str | None = None

    # ---------------------------------------------------------------- parsing

    @classmethod
    def from_dict(cls, d: Mapping[str, Any], name: str = "scenario") -> "ScenarioConfig":
        _check_keys(d, _TOP_KEYS | set(_OPTION_SECTIONS), "config")
        model = dict(d.get("model", {}))
        _check_keys(model, {"n", "j_e", "j_o", "h_x", "v_xx", "dt"}, "[model]")
        defaults = ModelParams().to_dict()
        for k, v in model.items():
            defaults[k] = int(v) if k == "n" and isinstance(v, int) else _number(v, f"model.{k}")
        if not float(defaults["n"]).is_integer():
            raise ConfigError("model.n must be an integer")
        defaults["n"] = int(defaults["n"])
        try:
            params = ModelParams.from_dict(defaults)
        except (ValueError, KeyError) as e:
            raise ConfigError(f"[model]: {e}") from None

        ini = dict(d.get("initial", {}))
        _check_keys(ini, _SECTION_KEYS["initial"], "[initial]")
        try:
            initial = InitialStateSpec(
                ini.get("kind", "cluster_z"),
                tuple(int(s) for s in ini.get("excitation_sites", ())),
                ini.get("excitation_gate", "X"),
            )
        except (SpecError, TypeError, ValueError) as e:
            raise ConfigError(f"[initial]: {e}") from None

        sweep = None
        if "sweep" in d:
            sw = d["sweep"]
            _check_keys(sw, _SECTION_KEYS["sweep"], "[sweep]")
            par = sw.get("parameter", "ratio")
            vals = tuple(_number(v, "sweep.values") for v in sw.get("values", ()))
            sweep = SweepSpec(par, vals)

        disorder = None
        if "disorder" in d:
            dd = d["disorder"]
            _check_keys(dd, _SECTION_KEYS["disorder"], "[disorder]")
            kw = {}
            for k in ("j_e_range", "j_o_range", "h_x_range"):
                if k in dd:
                    pair = dd[k]
                    if len(pair) != 2:
                        raise ConfigError(f"disorder.{k} needs two bounds")
                    kw[k] = tuple(_number(v, f"disorder.{k}") for v in pair)
            try:
                spec = DisorderSpec(seed=int(dd.get("seed", 0)), **kw)
            except ValueError as e:
                raise ConfigError(f"[disorder]: {e}") from None
            disorder = DisorderConfig(spec, int(dd.get("instances", 10)))

        options = {}
        for sec in _OPTION_SECTIONS:
            if sec in d:
                _check_keys(d[sec], _SECTION_KEYS[sec], f"[{sec}]")
                options[sec] = dict(d[sec])

        obs = d.get("observables", ["edge_ops"])
        if isinstance(obs, str):
            obs = [obs]
        cycles = d.get("cycles", 30)
        if not isinstance(cycles, int) or isinstance(cycles, bool):
            raise ConfigError("cycles must be an integer")
        cfg = cls(
            name=str(d.get("name", name)),
            params=params,
            command=str(d.get("command", "evolve")),
            backend=str(d.get("backend", "statevec")),
            initial=initial,
            matched_edges=bool(ini.get("matched_edges", False)),
            cycles=cycles,
            observables=tuple(obs),
            sweep=sweep,
            disorder=disorder,
            options=options,
            output=d.get("output"),
        )
        cfg.validate()
        return cfg

    @classmethod
    def from_toml(cls, path: str | Path) -> "ScenarioConfig":
        path = Path(path)
        try:
            d = tomllib.loads(path.read_text())
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"{path}: {e}") from None
        return cls.from_dict(d, name=path.stem)

    def to_dict(self) -> dict:
        d: dict[str, Any] = {
            "name": self.name,
            "command": self.command,
            "backend": self.backend,
            "cycles": self.cycles,
            "observables": list(self.observables),
            "model": self.params.to_dict(),
            "initial": {**self.initial.to_dict(), "matched_edges": self.matched_edges},
        }
        if self.output is not None:
            d["output"] = self.output
        if self.sweep is not None:
            d["sweep"] = {"parameter": self.sweep.parameter, "values": list(self.sweep.values)}
        if self.disorder is not None:
            s = self.disorder.spec
            d["disorder"] = {
                "instances": self.disorder.instances,
                "seed": int(s.seed),
                "j_e_range": list(s.j_e_range),
                "j_o_range": list(s.j_o_range),
                "h_x_range": list(s.h_x_range),
            }
        for k, v in self.options.items():
            d[k] = dict(v)
        return d

    # ------------------------------------------------------------- validation

    def points(self) -> list[tuple[float, ModelParams]]:
        """``(sweep value, params)`` pairs; without a sweep, one point labelled by the ratio."""
        if self.sweep is None:
            return [(self.params.ratio, self.params)]
        return [(v, self.sweep.apply(self.params, v)) for v in self.sweep.values]

    def validate(self) -> None:
        n = self.params.n_sites
        if self.command not in COMMANDS:
            raise ConfigError(f"command must be one of {COMMANDS}, got {self.command!r}")
        if self.backend not in BACKENDS:
            raise ConfigError(f"backend must be one of {BACKENDS}, got {self.backend!r}")
        if self.cycles < 1:
            raise ConfigError("cycles must be >= 1")
        bad = [o for o in self.observables if o not in OBSERVABLES]
        if bad:
            raise ConfigError(f"unknown observable(s) {bad}; expected a subset of {OBSERVABLES}")
        try:
            self.initial.validate(n)
        except SpecError as e:
            raise ConfigError(str(e)) from None
        if self.sweep is not None:
            if self.sweep.parameter not in SWEEP_PARAMETERS:
                raise ConfigError(f"sweep.parameter must be one of {SWEEP_PARAMETERS}")
            if not self.sweep.values:
                raise ConfigError("sweep.values is empty")
            if self.sweep.parameter == "ratio" and self.params.j_e == 0:
                raise ConfigError("a ratio sweep needs j_e != 0")
            if self.sweep.parameter == "dt" and min(self.sweep.values) <= 0:
                raise ConfigError("dt values must be positive")
        if self.disorder is not None and self.disorder.instances < 1:
            raise ConfigError("disorder.instances must be >= 1")
        if self.matched_edges and self.initial.kind not in _MATCHED:
            raise ConfigError(f"matched_edges is not defined for initial kind {self.initial.kind!r}")
        needs_bell = {"bell_fidelity", "tomography"} & set(self.observables)
        if needs_bell and self.initial.kind != "logical_bell":
            raise ConfigError(f"{sorted(needs_bell)} need initial.kind = 'logical_bell'")
        if self.backend == "freefermion":
            v_values = [p.v_xx for _, p in self.points()]
            if any(v != 0 for v in v_values):
                raise ConfigError("freefermion backend needs v_xx = 0")
            if not self.initial.is_product:
                raise ConfigError("freefermion backend needs a product initial state without excitations")
            other = set(self.observables) - {"edge_ops"}
            if other:
                raise ConfigError(f"freefermion backend records edge_ops only, not {sorted(other)}")
        elif n > MAX_DENSE_SITES:
            raise ConfigError(f"{self.backend} backend is limited to {MAX_DENSE_SITES} sites")
        if "window" in self.options.get("charges", {}):
            w = self.options["charges"]["window"]
            if len(w) != 2 or not 0 <= int(w[0]) < int(w[1]) <= self.cycles:
                raise ConfigError("charges.window must be [start, stop] inside 0..cycles")

    def validate_for(self, command: str) -> None:
        if command not in COMMANDS:
            raise ConfigError(f"unknown command {command!r}")
        self.validate()
        n = self.params.n_sites
        if command == "spectroscopy":
            if self.backend != "freefermion":
                raise ConfigError("spectroscopy runs on the freefermion backend")
            if self.sweep is not None and self.sweep.parameter != "ratio":
                raise ConfigError("spectroscopy sweeps the ratio j_o/j_e")
            if self.cycles < MIN_SAMPLES:
                raise ConfigError(f"spectroscopy needs at least {MIN_SAMPLES} cycles")
            if self.disorder is not None:
                raise ConfigError("spectroscopy does not support disorder")
        if command == "charges":
            if self.backend == "freefermion":
                raise ConfigError("charges need the statevec or exact backend")
            if self.initial.kind not in ("cluster_z", "cluster_x"):
                raise ConfigError("charges need a cluster initial state")
        if command == "bell" and self.initial.kind != "logical_bell":
            raise ConfigError("bell needs initial.kind = 'logical_bell'")
        if command == "bell" and self.backend == "freefermion":
            raise ConfigError("bell needs the statevec or exact backend")
        if command == "pszm" and n < 6:
            raise ConfigError("pszm needs n >= 6")
        if command == "magnus" and n > BCH_MAX_SITES:
            raise ConfigError(f"magnus runs dense BCH checks; n must be <= {BCH_MAX_SITES}")


def bundled_configs() -> list[str]:
    root = resources.files("pszm") / "configs"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))


def load_config(ref: str | Path) -> ScenarioConfig:
    """Load a config from a path, or by name from the bundled set."""
    path = Path(ref)
    if path.exists():
        return ScenarioConfig.from_toml(path)
    name = str(ref)
    if name in bundled_configs():
        text = (resources.files("pszm") / "configs" / f"{name}.toml").read_text()
        try:
            return ScenarioConfig.from_dict(tomllib.loads(text), name=name)
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"{name}: {e}") from None
    raise ConfigError(f"no config file {ref!s} and no bundled config of that name")


# ------------------------------------------------------------------ datasets


@dataclass
class RunDataset:
    """Tables (``header``, ``rows``) and text documents of one run."""

    meta: dict
    tables: dict[str, tuple[list[str], list[tuple]]] = field(default_factory=dict)
    documents: dict[str, str] = field(default_factory=dict)

    @property
    def checks_ok(self) -> bool:
        return all(c["ok"] for c in self.meta.get("checks", []))

    def rows(self, table: str) -> list[dict]:
        header, rows = self.tables[table]
        return [dict(zip(header, r)) for r in rows]

    def csv_text(self, table: str) -> str:
        header, rows = self.tables[table]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_cell(v) for v in r])
        return buf.getvalue()

    def write(self, directory: str | Path) -> Path:
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        for name in self.tables:
            (out / f"{name}.csv").write_text(self.csv_text(name))
        for name, text in self.documents.items():
            (out / name).write_text(text)
        (out / "meta.json").write_text(json.dumps(self.meta, indent=2, sort_keys=True, default=_json_default) + "\n")
        return out


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "" if v is None else str(v)


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(f"not JSON serialisable: {type(o)}")


def _code_version() -> str:
    try:
        here = Path(__file__).resolve().parent
        r = subprocess.run(
            ["git", "describe", "--always", "--dirty"], cwd=here, capture_output=True, text=True, timeout=5
        )
        if r.returncode == 0 and r.stdout.strip():
            return f"{__version__}+{r.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def _check(name: str, value: float, tolerance: float, ok: bool | None = None) -> dict:
    ok = bool(value <= tolerance) if ok is None else bool(ok)
    return {"name": name, "value": float(value), "tolerance": float(tolerance), "ok": ok}


# ------------------------------------------------------------------- jobs


@dataclass(frozen=True)
class _Job:
    value: float
    instance: int | None
    params: ModelParams | Couplings | None
    base: ModelParams | None


def _jobs(cfg: ScenarioConfig, seed: int | None) -> list[_Job]:
    jobs = []
    for value, p in cfg.points():
        if cfg.disorder is None:
            jobs.append(_Job(value, None, p, p))
            continue
        spec = cfg.disorder.spec if seed is None else replace(cfg.disorder.spec, seed=int(seed) % 2**64)
        for k in range(cfg.disorder.instances):
            jobs.append(_Job(value, k, sample_disordered_params(p, spec.instance(k)), p))
    return jobs


def _map(fn: Callable, items: Sequence, threads: int) -> list:
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


def _record(state: Statevector, p, dt: float, cycles: int, probes: Mapping[str, Callable], exact: bool) -> dict[str, np.ndarray]:
    out = {k: np.empty(cycles + 1) for k in probes}
    for t, st in iter_evolve(state, p, cycles, dt, exact):
        for k, f in probes.items():
            out[k][t] = f(st)
    return out


def _pauli_probe(op):
    return lambda st: expectation(st, op)


def _statevec_series(cfg: ScenarioConfig, job: _Job) -> dict[str, np.ndarray]:
    """Every requested series plus ``G_e``/``G_o`` for the symmetry check."""
    p, n = job.params, job.params.n_sites
    exact = cfg.backend == "exact"
    ops = logical_operators(p)
    gens = symmetry_generators(p)
    probes: dict[str, Callable] = {k: _pauli_probe(g) for k, g in gens.items()}
    obs = set(cfg.observables)
    if obs & {"stabilizers", "charges"}:
        for m in range(2, n):
            probes[f"K{m}"] = _pauli_probe(stabilizer(p, m))
    if "bell_fidelity" in obs:
        probes["F_bell"] = lambda st: bell_fidelity(st, p)
    if "tomography" in obs:
        for label, op in _logical_products(p).items():
            if label != "II":
                probes[f"T{label}"] = _pauli_probe(op)
    second: dict[str, Callable] = {}
    if "edge_ops" in obs:
        if cfg.matched_edges:
            first_is_z = cfg.initial.kind in _Z_KINDS
            for name in EDGE_OPS:
                same = (name[0] == "Z") == first_is_z
                (probes if same else second)[name] = _pauli_probe(ops[name])
        else:
            for name in EDGE_OPS:
                probes[name] = _pauli_probe(ops[name])
    out = _record(prepare_initial(p, cfg.initial), p, job.base.dt, cfg.cycles, probes, exact)
    if second:
        spec2 = replace(cfg.initial, kind=_MATCHED[cfg.initial.kind])
        extra = {**second, **{f"{k}'": _pauli_probe(g) for k, g in gens.items()}}
        out.update(_record(prepare_initial(p, spec2), p, job.base.dt, cfg.cycles, extra, exact))
    return out


def _freefermion_series(cfg: ScenarioConfig, job: _Job) -> dict[str, np.ndarray]:
    o = build_propagator(job.params, job.base.dt)
    series = edge_time_series(o, initial_moments(job.params, cfg.initial), cfg.cycles)
    if cfg.matched_edges:
        spec2 = replace(cfg.initial, kind=_MATCHED[cfg.initial.kind])
        other = edge_time_series(o, initial_moments(job.params, spec2), cfg.cycles)
        first_is_z = cfg.initial.kind in _Z_KINDS
        series = {k: (series[k] if (k[0] == "Z") == first_is_z else other[k]) for k in EDGE_OPS}
    return {k: series[k] for k in EDGE_OPS}


def _run_series(cfg: ScenarioConfig, jobs: list[_Job], threads: int) -> list[dict[str, np.ndarray]]:
    def one(job: _Job):
        t0 = time.perf_counter()
        fn = _freefermion_series if cfg.backend == "freefermion" else _statevec_series
        res = fn(cfg, job)
        tag = "" if job.instance is None else f" instance {job.instance}"
        log.info("%s: point %s%s done in %.2fs", cfg.name, _cell(job.value), tag, time.perf_counter() - t0)
        return res

    return _map(one, jobs, threads)


def _instance_cell(job: _Job) -> str:
    if job.instance is None:
        return ""
    return "mean" if job.instance < 0 else str(job.instance)


def _symmetry_checks(jobs: list[_Job], results: list[dict]) -> list[dict]:
    worst = 0.0
    for res in results:
        for k in ("G_e", "G_o", "G_e'", "G_o'"):
            if k in res:
                worst = max(worst, float(np.max(np.abs(res[k] - res[k][0]))))
    return [_check("symmetry_drift", worst, SYMMETRY_TOL)] if any("G_e" in r for r in results) else []


def _timeseries_table(cfg, jobs, results, names) -> tuple[list[str], list[tuple]]:
    par = cfg.sweep.parameter if cfg.sweep else "ratio"
    rows = []
    for job, res in zip(jobs, results):
        for name, site in names:
            if name not in res:
                continue
            for t, v in enumerate(res[name]):
                rows.append((job.value, _instance_cell(job), t, site, name, float(v)))
    return [par, "instance", "cycle", "site", "observable", "value"], rows


def _add_means(cfg, jobs, results, keys) -> tuple[list[_Job], list[dict]]:
    """Append per-point disorder averages as pseudo-jobs with instance ``mean``."""
    if cfg.disorder is None:
        return jobs, results
    out_jobs, out_res = list(jobs), list(results)
    for value, _ in cfg.points():
        group = [r for j, r in zip(jobs, results) if j.value == value]
        mean = {k: np.mean([r[k] for r in group], axis=0) for k in keys if all(k in r for r in group)}
        out_jobs.append(_Job(value, -1, None, None))
        out_res.append(mean)
    return out_jobs, out_res


def _meta(cfg: ScenarioConfig, command: str, threads: int, seed: int | None) -> dict:
    return {
        "command": command,
        "config": cfg.to_dict(),
        "seed": seed,
        "threads": threads,
        "code_version": _code_version(),
        "created": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "checks": [],
    }


def _edge_tables(cfg, jobs, results, ds: RunDataset) -> None:
    par = cfg.sweep.parameter if cfg.sweep else "ratio"
    jobs, results = _add_means(cfg, jobs, results, EDGE_OPS)
    ds.tables["edge_ops"] = _timeseries_table(cfg, jobs, results, [(k, "") for k in EDGE_OPS])
    rows = []
    for job, res in zip(jobs, results):
        for k in EDGE_OPS:
            if k not in res:
                continue
            try:
                est = lifetime(res[k], name=k, ratio=job.value)
            except ValueError:
                continue
            rows.append((job.value, _instance_cell(job), k, est.t_half, est.censored))
    ds.tables["lifetimes"] = ([par, "instance", "observable", "t_half", "censored"], rows)


def _charge_series(res: Mapping[str, np.ndarray], n: int):
    k = np.column_stack([res[f"K{m}"] for m in range(2, n)])
    return excitation_counts(k)


def _charges_tables(cfg, jobs, results, ds: RunDataset) -> None:
    par = cfg.sweep.parameter if cfg.sweep else "ratio"
    n = cfg.params.n_sites
    rows, fits = [], []
    window = cfg.options.get("charges", {}).get("window")
    for job, res in zip(jobs, results):
        ch = _charge_series(res, n)
        for t, a, b, c in ch.rows():
            rows.append((job.value, _instance_cell(job), t, a, b, c))
        if window is not None:
            lo, hi = int(window[0]), int(window[1])
            fits.append(
                (
                    job.value,
                    _instance_cell(job),
                    lo,
                    hi,
                    windowed_slope(ch.n, lo, hi),
                    windowed_slope(ch.n_e, lo, hi),
                    windowed_slope(ch.n_o, lo, hi),
                )
            )
    ds.tables["charges"] = ([par, "instance", "cycle", "n", "n_e", "n_o"], rows)
    if window is not None:
        ds.tables["charge_slopes"] = ([par, "instance", "start", "stop", "dn", "dn_e", "dn_o"], fits)


# --------------------------------------------------------------- commands


def _cmd_evolve(cfg, jobs, threads, ds: RunDataset) -> None:
    results = _run_series(cfg, jobs, threads)
    ds.meta["checks"] += _symmetry_checks(jobs, results)
    obs = set(cfg.observables)
    n = cfg.params.n_sites
    if "edge_ops" in obs:
        _edge_tables(cfg, jobs, results, ds)
    if "stabilizers" in obs:
        names = [(f"K{m}", m) for m in range(2, n)]
        ds.tables["stabilizers"] = _timeseries_table(cfg, jobs, results, [(k, s) for k, s in names])
    if "charges" in obs:
        _charges_tables(cfg, jobs, results, ds)
    if "bell_fidelity" in obs:
        ds.tables["bell"] = _timeseries_table(cfg, jobs, results, [("F_bell", "")])
    if "tomography" in obs:
        labels = [a + b for a in "IXYZ" for b in "IXYZ" if a + b != "II"]
        ds.tables["tomography"] = _timeseries_table(cfg, jobs, results, [(f"T{k}", "") for k in labels])


def _cmd_charges(cfg, jobs, threads, ds: RunDataset) -> None:
    cfg = replace(cfg, observables=tuple(dict.fromkeys(cfg.observables + ("charges",))))
    _cmd_evolve(cfg, jobs, threads, ds)


def _cmd_bell(cfg, jobs, threads, ds: RunDataset) -> None:
    cfg = replace(cfg, observables=tuple(dict.fromkeys(cfg.observables + ("bell_fidelity",))))
    all_jobs = list(jobs)
    clean = bool(cfg.options.get("bell", {}).get("clean_reference", False)) and cfg.initial.excitation_sites
    results = _run_series(cfg, jobs, threads)
    labels = ["excited" if cfg.initial.excitation_sites else "clean"] * len(jobs)
    if clean:
        cfg_clean = replace(cfg, initial=replace(cfg.initial, excitation_sites=()))
        results += _run_series(cfg_clean, jobs, threads)
        all_jobs += jobs
        labels += ["clean"] * len(jobs)
    ds.meta["checks"] += _symmetry_checks(all_jobs, results)
    start = max(abs(r["F_bell"][0] - 1.0) for r in results)
    ds.meta["checks"].append(_check("bell_preparation", start, 1e-10))
    par = cfg.sweep.parameter if cfg.sweep else "ratio"
    rows = []
    for job, res, lab in zip(all_jobs, results, labels):
        for t, v in enumerate(res["F_bell"]):
            rows.append((job.value, _instance_cell(job), lab, t, float(v)))
    ds.tables["bell"] = ([par, "instance", "excitations", "cycle", "fidelity"], rows)
    if "tomography" in cfg.observables:
        keys = [a + b for a in "IXYZ" for b in "IXYZ" if a + b != "II"]
        trows = []
        for job, res, lab in zip(all_jobs, results, labels):
            for t in range(cfg.cycles + 1):
                for k in keys:
                    trows.append((job.value, _instance_cell(job), lab, t, k, float(res[f"T{k}"][t])))
        ds.tables["tomography"] = ([par, "instance", "excitations", "cycle", "label", "value"], trows)


def _cmd_spectroscopy(cfg, jobs, threads, ds: RunDataset) -> None:
    opts = dict(cfg.options.get("spectroscopy", {}))
    if opts.get("window") in ("none", ""):
        opts["window"] = None
    ratios = [v for v, _ in cfg.points()] if cfg.sweep else [cfg.params.ratio]
    res = spectroscopy_sweep(cfg.params, ratios, cfg.cycles, cfg.initial, threads, **opts)
    rows = []
    for i, r in enumerate(res.ratios):
        for w, al, ar in zip(res.omega, res.amplitude_l[i], res.amplitude_r[i]):
            rows.append((float(r), float(w), float(al), float(ar)))
    ds.tables["spectrum"] = (["ratio", "omega", "amplitude_ZL", "amplitude_ZR"], rows)
    prow = []
    for i, r in enumerate(res.ratios):
        for edge, peaks in (("ZL", res.peaks_l[i]), ("ZR", res.peaks_r[i])):
            for w in peaks:
                prow.append((float(r), edge, float(w)))
    ds.tables["peaks"] = (["ratio", "edge", "omega"], prow)
    qrow = [(float(r), k, float(e)) for r, q in zip(res.ratios, res.quasi) for k, e in enumerate(q)]
    ds.tables["quasi_energies"] = (["ratio", "index", "epsilon"], qrow)
    gaps: dict[str, Any] = {"bin_width": res.bin_width, "per_ratio": res.summary()}
    if len(ratios) >= 5:
        fit = gap_fit(res)
        gaps["zeta_fit"] = {"slope": fit.zeta.slope, "intercept": fit.zeta.intercept, "r2": fit.zeta.r2}
        gaps["delta_monotone"] = fit.delta_monotone
        gaps["delta_max_rise"] = fit.delta_max_rise
    ds.documents["gaps.json"] = json.dumps(gaps, indent=2, sort_keys=True, default=_json_default) + "\n"
    ds.meta["checks"].append(_check("peak_offset_bins", float(peak_offsets(res).max()), 1.0))


def _scale(p: ModelParams, s: float) -> ModelParams:
    return p.replace(h_x=p.h_x * s, v_xx=p.v_xx * s)


def _cmd_pszm(cfg, jobs, threads, ds: RunDataset) -> None:
    opts = cfg.options.get("pszm", {})
    scales = [_number(s, "pszm.scales") for s in opts.get("scales", [1.0, 0.5, 0.25])]
    guard = _number(opts.get("guard", RESONANCE_GUARD), "pszm.guard")
    rows, srows = [], []
    flags_ok, slopes = True, []
    for value, p in cfg.points():
        for edge in ("left", "right"):
            for flavor in ("z", "x"):
                bare = verify_pszm(bare_logical(p, edge, flavor), p, guard).commutator_norm
                try:
                    psi = pszm_first_order(p, edge, flavor, guard)
                except ResonanceError as e:
                    rows.append((value, edge, flavor, math.nan, bare, "", e.denominator))
                    continue
                rep = verify_pszm(psi, p, guard)
                flags_ok &= rep.symmetry_ok
                rows.append((value, edge, flavor, rep.commutator_norm, bare, rep.symmetry_ok, ""))
                norms = []
                for s in scales:
                    q = _scale(p, s)
                    c = verify_pszm(pszm_first_order(q, edge, flavor, guard), q, guard).commutator_norm
                    norms.append(c)
                    srows.append((value, edge, flavor, s, c))
                if len(scales) >= 2 and min(norms) > 0:
                    slopes.append(loglog_slope(scales, norms))
    par = cfg.sweep.parameter if cfg.sweep else "ratio"
    ds.tables["pszm"] = ([par, "edge", "flavor", "commutator_norm", "bare_norm", "symmetry_ok", "resonant"], rows)
    ds.tables["pszm_scaling"] = ([par, "edge", "flavor", "scale", "commutator_norm"], srows)
    ds.meta["checks"].append(_check("symmetry_flags", 0.0 if flags_ok else 1.0, 0.0))
    if slopes:
        worst = max(abs(s - 2.0) for s in slopes)
        ds.meta["checks"].append(_check("scaling_slope_minus_2", worst, 0.2))


def _omega1_dense(p: ModelParams) -> np.ndarray:
    h0, h1 = to_dense(build_h0(p)), to_dense(build_h1(p))
    return (h1 @ h0 - h0 @ h1) / 2j


def _cmd_magnus(cfg, jobs, threads, ds: RunDataset) -> None:
    dts = [_number(v, "magnus.dts") for v in cfg.options.get("magnus", {}).get("dts", [0.5, 0.25, 0.125])]
    rows, docs = [], []
    worst_dense, worst_sym = 0.0, 0.0
    worst_s0, worst_s1 = 0.0, 0.0
    for value, p in cfg.points():
        res = bch_residual_scan(p, dts)
        o1 = res.omega1
        worst_dense = max(worst_dense, float(np.abs(to_dense(o1) - _omega1_dense(p)).max()))
        for g in symmetry_generators(p).values():
            worst_sym = max(worst_sym, frobenius_norm(commutator(o1, g.to_sum())))
        for dt, e1, e0 in res.residual_table:
            rows.append((value, dt, e0, e1))
        worst_s0 = max(worst_s0, abs(res.slope_zeroth_order - 2.0))
        worst_s1 = max(worst_s1, abs(res.slope_first_order - 3.0))
        docs.append(f"# {cfg.sweep.parameter if cfg.sweep else 'ratio'} = {_cell(value)}\n{format_sum(o1)}\n")
    par = cfg.sweep.parameter if cfg.sweep else "ratio"
    ds.tables["bch"] = ([par, "dt", "residual_omega0", "residual_omega0_omega1"], rows)
    ds.documents["omega1.txt"] = "\n".join(docs)
    ds.meta["checks"] += [
        _check("omega1_vs_dense", worst_dense, 1e-12),
        _check("omega1_symmetry", worst_sym, 1e-12),
        _check("slope_omega0_minus_2", worst_s0, 0.3),
        _check("slope_omega1_minus_3", worst_s1, 0.3),
    ]


_COMMANDS = {
    "evolve": _cmd_evolve,
    "charges": _cmd_charges,
    "bell": _cmd_bell,
    "spectroscopy": _cmd_spectroscopy,
    "pszm": _cmd_pszm,
    "magnus": _cmd_magnus,
}


def run_scenario(cfg: ScenarioConfig, command: str = "evolve", threads: int = 1, seed: int | None = None) -> RunDataset:
    """Validate ``cfg`` for ``command``, run it, and return the tables.

    Failed self-checks are reported in ``meta["checks"]``; see
    :attr:`RunDataset.checks_ok`.
    """
    cfg.validate_for(command)
    if threads < 1:
        raise ConfigError("threads must be >= 1")
    ds = RunDataset(_meta(cfg, command, threads, seed))
    jobs = _jobs(cfg, seed) if command in ("evolve", "charges", "bell") else []
    _COMMANDS[command](cfg, jobs, threads, ds)
    return ds


def symmetry_drift(cfg: ScenarioConfig, cycles: int = 30) -> float:
    """Worst drift of ``<G_e>``, ``<G_o>`` over ``cycles`` Trotter steps for every point of ``cfg``.

    Runs the gate circuit from the config's initial state for each sweep
    point and disorder instance, whatever backend the config names.
    """
    worst = 0.0
    for job in _jobs(cfg, None):
        p = job.params
        gens = symmetry_generators(p)
        probes = {k: _pauli_probe(g) for k, g in gens.items()}
        res = _record(prepare_initial(p, cfg.initial), p, job.base.dt, cycles, probes, exact=False)
        for v in res.values():
            worst = max(worst, float(np.max(np.abs(v - v[0]))))
    return worst


# -------------------------------------------------------------------- main


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pszm", description="Run cluster-chain Floquet scenarios.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("run",) + COMMANDS:
        sp = sub.add_parser(name, help="run the config's own command" if name == "run" else None)
        sp.add_argument("--config", required=True, help="config path or bundled config name")
        sp.add_argument("--out", help="output directory (default: config 'output' or runs/<name>)")
        sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("--seed", type=int, default=None, help="override the disorder seed")
        sp.add_argument("--quiet", action="store_true")
    vp = sub.add_parser("validate-config")
    vp.add_argument("--config", required=True)
    vp.add_argument("--for", dest="for_command", choices=COMMANDS, default=None, help="also check the requirements of one command")
    sub.add_parser("list-configs")
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "list-configs":
        print("\n".join(bundled_configs()))
        return 0
    logging.basicConfig(level=logging.WARNING if getattr(args, "quiet", False) else logging.INFO, format="%(message)s")
    try:
        cfg = load_config(args.config)
        if args.command == "validate-config":
            if args.for_command:
                cfg.validate_for(args.for_command)
            print(f"{cfg.name}: ok")
            return 0
        command = cfg.command if args.command == "run" else args.command
        ds = run_scenario(cfg, command, threads=args.threads, seed=args.seed)
    except (ConfigError, SpecError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    out = ds.write(args.out or cfg.output or Path("runs") / cfg.name)
    failed = [c for c in ds.meta["checks"] if not c["ok"]]
    for c in failed:
        print(f"self-check failed: {c['name']} = {c['value']:.3g} (tolerance {c['tolerance']:.3g})", file=sys.stderr)
    log.info("wrote %s", out)
    return 3 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
