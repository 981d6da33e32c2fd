#!/usr/bin/env python3
"""Benchmark the compiled integration kernel against the pure-numpy fallback.

Runs the same full-species master-equation evolution through both backends,
checks that they agree, and reports the wall-clock speedup. Usage:

    python benchmarks/bench_kernel.py [--species ca] [--duration-ns 100]
                                      [--repeats 20]
"""
from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from ionreg import _kernel_py
from ionreg.dynamics import DensityOperator, _pack, max_step_for
from ionreg.species import (
    available_species,
    beam_couplings,
    collapse_operators,
    load_species,
)

try:
    from ionreg import _kernel
except ImportError:
    _kernel = None


def _time(fn, args, repeats):
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        out = fn(*args)
        times.append(time.perf_counter() - start)
    return min(times), statistics.median(times), out


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--species", default="ca", help="species key (default ca)")
    parser.add_argument("--duration-ns", type=float, default=100.0)
    parser.add_argument("--repeats", type=int, default=20)
    args = parser.parse_args()

    model = load_species(available_species()[args.species])
    couplings = beam_couplings(model)
    channels = collapse_operators(model)
    rho0 = DensityOperator.maximally_mixed(
        model.dim, model.manifold_indices("S1/2")
    ).matrix
    packed = _pack(couplings, channels, model.dim)
    call_args = (
        rho0, *packed, args.duration_ns * 1e-9, 1e-8, 1e-10,
        max_step_for(couplings), 0.0,
    )

    print(f"species {model.name}: dim {model.dim}, {len(couplings)} couplings, "
          f"{len(channels)} decay channels, {args.duration_ns:g} ns evolution")

    py_best, py_med, py_out = _time(_kernel_py.integrate, call_args, args.repeats)
    print(f"python backend:  best {py_best * 1e3:8.2f} ms  "
          f"median {py_med * 1e3:8.2f} ms  ({py_out[2]} steps)")

    if _kernel is None:
        print("compiled backend not built; install with the Cython extension "
              "to compare")
        return 0

    cy_best, cy_med, cy_out = _time(_kernel.integrate, call_args, args.repeats)
    print(f"cython backend:  best {cy_best * 1e3:8.2f} ms  "
          f"median {cy_med * 1e3:8.2f} ms  ({cy_out[2]} steps)")

    state_diff = np.abs(py_out[0] - cy_out[0]).max()
    flux_diff = np.abs(py_out[1] - cy_out[1]).max()
    assert py_out[2] == cy_out[2], "backends took different step counts"
    assert state_diff < 1e-12, f"state mismatch {state_diff:.3e}"
    assert flux_diff < 1e-12, f"flux mismatch {flux_diff:.3e}"
    print(f"agreement: state diff {state_diff:.3e}, flux diff {flux_diff:.3e}")
    print(f"speedup (best/best): {py_best / cy_best:.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
