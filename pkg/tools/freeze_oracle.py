"""Regenerate ``src/pszm/data/oracle_bounds.json`` from exact Floquet evolution.

Usage: python tools/freeze_oracle.py

Runs the bundled charge and Bell scenarios with the ``exact`` backend (each
cycle is ``expm(-i dt H1) expm(-i dt H0)`` applied to the state, no gates)
and stores the observed drifts together with the bounds the acceptance
tests enforce.  Bounds are the oracle value times ``SAFETY``.
"""

from __future__ import annotations

import json
from dataclasses import replace
from pathlib import Path

import numpy as np

from pszm.cli import load_config, run_scenario

SAFETY = 1.5
OUT = Path(__file__).resolve().parents[1] / "src" / "pszm" / "data" / "oracle_bounds.json"
BELL_TIME = 10
LATE_WINDOW = (20, 30)


def _series(ds, table, key, value_col):
    rows = ds.rows(table)
    out = {}
    for r in rows:
        out.setdefault(tuple(r[k] for k in key), []).append(r[value_col])
    return {k: np.array(v) for k, v in out.items()}


def charges() -> dict:
    cfg = replace(load_config("fig3_charges"), backend="exact")
    ds = run_scenario(cfg, "charges")
    rows = ds.rows("charges")
    n = {r: np.array([x["n"] for x in rows if x["ratio"] == r]) for r in cfg.sweep.values}
    ne = {r: np.array([x["n_e"] for x in rows if x["ratio"] == r]) for r in cfg.sweep.values}
    no = {r: np.array([x["n_o"] for x in rows if x["ratio"] == r]) for r in cfg.sweep.values}
    slopes = {r["ratio"]: r for r in ds.rows("charge_slopes")}
    hom, res, off = cfg.sweep.values
    drift_n = float(np.max(np.abs(n[hom] - n[hom][0])))
    gap = np.abs(ne[hom] - no[hom])
    return {
        "config": "fig3_charges",
        "ratios": {"homogeneous": hom, "resonant": res, "off_resonant": off},
        "window": list(cfg.options["charges"]["window"]),
        "oracle": {
            "homogeneous_max_n_drift": drift_n,
            "homogeneous_initial_gap": float(gap[0]),
            "homogeneous_final_gap": float(gap[-1]),
            "homogeneous_max_n_e_drift": float(np.max(np.abs(ne[hom] - ne[hom][0]))),
            "resonant_slope_n_o": float(slopes[res]["dn_o"]),
            "resonant_slope_n_e": float(slopes[res]["dn_e"]),
            "off_resonant_max_n_e_drift": float(np.max(np.abs(ne[off] - ne[off][0]))),
            "off_resonant_max_n_o_drift": float(np.max(np.abs(no[off] - no[off][0]))),
        },
        "bounds": {"homogeneous_max_n_drift": SAFETY * drift_n},
    }


def bell() -> dict:
    cfg = replace(load_config("fig5_bell"), backend="exact")
    ds = run_scenario(cfg, "bell")
    f = _series(ds, "bell", ("ratio", "excitations"), "fidelity")
    hom, res, off = cfg.sweep.values
    lo, hi = LATE_WINDOW
    late = float(np.max(np.abs(f[(hom, "excited")][lo : hi + 1] - 0.25)))
    gap = float(abs(f[(off, "excited")][BELL_TIME] - f[(off, "clean")][BELL_TIME]))
    return {
        "config": "fig5_bell",
        "ratios": {"homogeneous": hom, "resonant": res, "off_resonant": off},
        "time": BELL_TIME,
        "late_window": list(LATE_WINDOW),
        "oracle": {
            "fidelity": {f"{r}": float(f[(r, "excited")][BELL_TIME]) for r in (hom, res, off)},
            "off_resonant_clean_fidelity": float(f[(off, "clean")][BELL_TIME]),
            "off_resonant_clean_gap": gap,
            "homogeneous_late_max_distance_to_quarter": late,
        },
        "bounds": {
            "off_resonant_clean_gap": SAFETY * gap,
            "homogeneous_late_distance_to_quarter": SAFETY * late,
        },
    }


def main() -> None:
    data = {
        "generated_by": "python tools/freeze_oracle.py",
        "method": "exact Floquet evolution, expm(-i dt H1) expm(-i dt H0) per cycle",
        "safety_factor": SAFETY,
        "charges": charges(),
        "bell": bell(),
    }
    OUT.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
