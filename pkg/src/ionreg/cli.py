"""Command-line interface: window sweeps, summary table, acceptance checks.

Subcommands:
  sweep   full rate/fidelity curves for selected species and scenarios
  table   constrained peak rates (fidelity >= 0.97) for all species, both
          default scenarios, with regression checks against reference rates
  check   run the repository acceptance test suite (source checkout only)

Configuration files are JSON; see ``example_config()`` for the schema.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from . import sweep as sweep_mod
from .species import available_species, load_species
from .sweep import (
    FIDELITY_FLOOR,
    RECORD_RATE,
    REFERENCE_PEAK_RATES,
    Scenario,
    emit_csv,
    emit_plot,
    ideal_scenario,
    max_rate_at_fidelity,
    realistic_scenario,
    run_sweep,
)

DEFAULT_SPECIES = ["mg", "ca", "sr", "ba", "yb"]


def example_config() -> dict:
    return {
        "species": DEFAULT_SPECIES,
        "scenarios": [
            {
                "label": "ideal",
                "latency_s": 0.0,
                "sigma_beta": 0.0,
                "eta": 0.025,
                "n_prep": 0,
                "grid": {"min_s": 1e-9, "max_s": 200e-9, "count": 40, "spacing": "log"},
            },
            {
                "label": "realistic",
                "latency_s": 100e-9,
                "sigma_beta": math.sqrt(0.02),
                "eta": 0.025,
                "n_prep": 0,
                "grid": {"min_s": 1e-9, "max_s": 200e-9, "count": 40, "spacing": "log"},
            },
        ],
    }


def _grid_from(spec: dict) -> tuple:
    import numpy as np

    count = int(spec.get("count", 40))
    lo = float(spec.get("min_s", 1e-9))
    hi = float(spec.get("max_s", 200e-9))
    spacing = spec.get("spacing", "log")
    if spacing == "log":
        return tuple(np.geomspace(lo, hi, count))
    if spacing == "linear":
        return tuple(np.linspace(lo, hi, count))
    raise ValueError(f"grid.spacing must be 'linear' or 'log', not {spacing!r}")


def _scenario_from(spec: dict) -> Scenario:
    kwargs = dict(
        label=spec.get("label", "custom"),
        latency=float(spec.get("latency_s", 100e-9)),
        sigma_beta=float(spec.get("sigma_beta", 0.0)),
        eta=float(spec.get("eta", 0.025)),
        n_prep=int(spec.get("n_prep", 0)),
    )
    if "grid" in spec:
        kwargs["window_grid"] = _grid_from(spec["grid"])
    for key in ("burn_in_shots", "max_shots", "steady_tol"):
        if key in spec:
            kwargs[key] = spec[key]
    return Scenario(**kwargs)


def _load_config(path: str | None) -> dict:
    if path is None:
        return example_config()
    with open(path) as fh:
        return json.load(fh)


def _resolve_species(keys) -> dict:
    shipped = available_species()
    out = {}
    for key in keys:
        if key in shipped:
            out[key] = load_species(shipped[key])
        elif Path(key).exists():
            out[Path(key).stem] = load_species(key)
        else:
            raise SystemExit(
                f"unknown species {key!r}; shipped: {', '.join(sorted(shipped))}"
            )
    return out


def _default_scenarios() -> list[Scenario]:
    return [ideal_scenario(), realistic_scenario()]


def _cmd_sweep(args) -> int:
    config = _load_config(args.config)
    species_keys = args.species or config.get("species", DEFAULT_SPECIES)
    models = _resolve_species(species_keys)
    scenarios = [_scenario_from(s) for s in config.get("scenarios", [])]
    if args.scenario:
        scenarios = [s for s in scenarios if s.label in args.scenario]
        if not scenarios:
            raise SystemExit(f"no configured scenario matches {args.scenario}")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    results = []
    for key, model in models.items():
        for scenario in scenarios:
            result = run_sweep(model, scenario, workers=args.workers)
            results.append(result)
            stem = f"sweep_{key}_{scenario.label}"
            emit_csv(result, out_dir / f"{stem}.csv")
            emit_plot(result, out_dir / f"{stem}.svg")
            print(f"wrote {out_dir / stem}.csv / .svg")
    emit_csv(results, out_dir / "sweep_all.csv")
    emit_plot(results, out_dir / "sweep_all.svg")
    print(f"wrote {out_dir / 'sweep_all'}.csv / .svg")
    return 0


def _check_reference(species_name: str, scenario: str, rate: float) -> tuple[bool, str]:
    ref = REFERENCE_PEAK_RATES.get(species_name, {}).get(scenario)
    if ref is None:
        return True, "no reference"
    ok = 0.75 * ref <= rate <= 1.25 * ref and rate > RECORD_RATE
    return ok, f"reference {ref:.0f}/s, simulated {rate:.0f}/s"


def _cmd_table(args) -> int:
    models = _resolve_species(args.species or DEFAULT_SPECIES)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    rows = []
    all_ok = True
    results = []
    for key, model in models.items():
        for scenario in _default_scenarios():
            result = run_sweep(model, scenario, workers=args.workers)
            results.append(result)
            emit_csv(result, out_dir / f"sweep_{key}_{scenario.label}.csv")
            best = max_rate_at_fidelity(result, FIDELITY_FLOOR)
            if best is None:
                print(f"{model.name:8s} {scenario.label:9s}  no window reaches "
                      f"fidelity >= {FIDELITY_FLOOR}")
                all_ok = False
                continue
            ok, note = _check_reference(model.name, scenario.label, best.rate)
            all_ok &= ok
            status = "PASS" if ok else "FAIL"
            rows.append((model.name, scenario.label, best))
            print(
                f"{model.name:8s} {scenario.label:9s}  window {best.window * 1e9:7.2f} ns  "
                f"rate {best.rate:8.1f}/s  fidelity {best.fidelity:.4f}  [{status}: {note}]"
            )

    with open(out_dir / "table.csv", "w") as fh:
        fh.write("species,scenario,window_s,rate_per_s,fidelity\n")
        for name, label, best in rows:
            fh.write(f"{name},{label},{best.window!r},{best.rate!r},{best.fidelity!r}\n")
    emit_plot(results, out_dir / "table_sweeps.svg")
    print(f"wrote {out_dir / 'table.csv'} and sweep CSVs")
    return 0 if all_ok else 1


def _cmd_check(args) -> int:
    here = Path.cwd()
    for base in (here, *here.parents):
        acceptance = base / "tests" / "test_acceptance.py"
        if acceptance.exists():
            import pytest

            return pytest.main(["-v", str(acceptance)])
    print("tests/test_acceptance.py not found; run from the source checkout",
          file=sys.stderr)
    return 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ionreg",
        description="Remote-entanglement-generation rate simulator for trapped ions",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--species", nargs="*", help="species keys or JSON paths")
    common.add_argument("--out-dir", default="out", help="output directory")
    common.add_argument("--workers", type=int, default=1, help="parallel workers")
    common.add_argument("--seed", type=int, default=None,
                        help="reserved; the simulation is deterministic")

    p_sweep = sub.add_parser("sweep", parents=[common], help="full rate/fidelity curves")
    p_sweep.add_argument("--scenario", nargs="*", help="scenario labels to run")
    p_sweep.add_argument("--config", help="JSON config file")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_table = sub.add_parser(
        "table", parents=[common],
        help=f"peak rates at fidelity >= {FIDELITY_FLOOR} for both default scenarios",
    )
    p_table.set_defaults(func=_cmd_table)

    p_check = sub.add_parser("check", help="run the acceptance test suite")
    p_check.set_defaults(func=_cmd_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
