"""Lindblad master-equation evolution with per-channel decay-flux accounting.

The hot integration loop lives in a compiled Cython kernel when available
(``ionreg._kernel``), with an algorithmically identical pure-numpy fallback
(``ionreg._kernel_py``). Set ``IONREG_PURE_PYTHON=1`` to force the fallback.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from .species import CollapseChannel, Coupling

__all__ = [
    "DensityOperator",
    "FluxAccumulator",
    "EvolutionResult",
    "IntegrationError",
    "backend_name",
    "lindblad_rhs",
    "evolve",
    "steady_state_distance",
    "max_step_for",
]


def _select_backend():
    if not os.environ.get("IONREG_PURE_PYTHON"):
        try:
            from . import _kernel

            return _kernel
        except ImportError:
            pass
    from . import _kernel_py

    return _kernel_py


_backend = _select_backend()
IntegrationError = _backend.IntegrationError


def backend_name() -> str:
    return _backend.BACKEND


HERMITICITY_TOL = 1e-10
TRACE_TOL = 1e-9
POSITIVITY_TOL = -1e-8


@dataclass
class DensityOperator:
    """Complex Hermitian unit-trace matrix over a species' level basis."""

    matrix: np.ndarray

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def pure(cls, dim: int, index: int) -> "DensityOperator":
        m = np.zeros((dim, dim), dtype=complex)
        m[index, index] = 1.0
        return cls(m)

    @classmethod
    def maximally_mixed(cls, dim: int, indices=None) -> "DensityOperator":
        """Maximally mixed over the given basis indices (all, when omitted)."""
        if indices is None:
            indices = range(dim)
        indices = list(indices)
        m = np.zeros((dim, dim), dtype=complex)
        for i in indices:
            m[i, i] = 1.0 / len(indices)
        return cls(m)

    def validate(self) -> None:
        m = self.matrix
        herm = np.abs(m - m.conj().T).max()
        if herm > HERMITICITY_TOL:
            raise ValueError(f"not Hermitian: max asymmetry {herm:.3e}")
        tr = m.trace().real
        if abs(tr - 1.0) > TRACE_TOL:
            raise ValueError(f"trace {tr} differs from 1")
        lo = np.linalg.eigvalsh(m).min()
        if lo < POSITIVITY_TOL:
            raise ValueError(f"negative eigenvalue {lo:.3e}")

    def population(self, index: int) -> float:
        return self.matrix[index, index].real

    def populations(self, indices) -> float:
        return sum(self.population(i) for i in indices)


@dataclass
class FluxAccumulator:
    """Accumulated jump probability per collapse channel."""

    channels: list[CollapseChannel]
    values: np.ndarray

    def total(self, predicate=None) -> float:
        if predicate is None:
            return float(self.values.sum())
        return float(
            sum(v for ch, v in zip(self.channels, self.values) if predicate(ch))
        )

    def collectable_from(self, e_index: int) -> float:
        return self.total(lambda ch: ch.collectable and ch.e_index == e_index)


@dataclass
class EvolutionResult:
    final_state: DensityOperator
    fluxes: FluxAccumulator
    steps_taken: int
    max_trace_drift: float


def lindblad_rhs(rho: np.ndarray, H: np.ndarray, collapses) -> np.ndarray:
    """Dense reference right-hand side: -(i)[rho, H] + (1/2) sum dissipators.

    H is supplied in angular-frequency units (rad/s). ``collapses`` is a list
    of matrices or :class:`CollapseChannel` objects. This is the independent
    reference path; the fast kernels are tested against it.
    """
    rho = np.asarray(rho, dtype=complex)
    H = np.asarray(H, dtype=complex)
    if rho.shape != H.shape or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"shape mismatch: rho {rho.shape}, H {H.shape}")
    out = -1j * (rho @ H - H @ rho)
    for c in collapses:
        C = c.matrix() if isinstance(c, CollapseChannel) else np.asarray(c, dtype=complex)
        if C.shape != rho.shape:
            raise ValueError(f"collapse shape {C.shape} != rho shape {rho.shape}")
        Cd = C.conj().T
        CdC = Cd @ C
        out += C @ rho @ Cd - 0.5 * (CdC @ rho + rho @ CdC)
    return out


def max_step_for(couplings: list[Coupling]) -> float:
    """Step cap resolving the fastest beat note among time-dependent terms.

    One quarter of the shortest beat period present (pairwise frequency
    differences and the frequencies themselves); infinite when the
    Hamiltonian is time-independent. This is an anti-aliasing guard for
    near-steady stretches where the error controller would otherwise step
    far over the oscillations; whenever the dynamics are live the
    controller demands much smaller steps than this cap.
    """
    freqs = sorted({c.frequency for c in couplings})
    beats = [abs(f) for f in freqs if f != 0.0]
    for i, fi in enumerate(freqs):
        for fj in freqs[i + 1 :]:
            if fj != fi:
                beats.append(abs(fj - fi))
    if not beats:
        return math.inf
    return 2 * math.pi / (4 * max(beats))


def _pack(couplings: list[Coupling], collapses: list[CollapseChannel], dim: int):
    coup_g = np.array([c.g_index for c in couplings], dtype=np.int32)
    coup_e = np.array([c.e_index for c in couplings], dtype=np.int32)
    coup_amp = np.array([c.amplitude for c in couplings], dtype=complex)
    coup_freq = np.array([c.frequency for c in couplings], dtype=float)
    gain_g = np.array([c.g_index for c in collapses], dtype=np.int32)
    gain_e = np.array([c.e_index for c in collapses], dtype=np.int32)
    gain_rate = np.array([c.rate for c in collapses], dtype=float)
    loss = np.zeros(dim)
    for c in collapses:
        loss[c.e_index] += c.rate
    return coup_g, coup_e, coup_amp, coup_freq, gain_g, gain_e, gain_rate, loss


def evolve(
    rho0: DensityOperator,
    duration: float,
    couplings: list[Coupling],
    collapses: list[CollapseChannel],
    rtol: float = 1e-8,
    atol: float = 1e-10,
    max_step: float | None = None,
    t0: float = 0.0,
) -> EvolutionResult:
    """Evolve rho0 for `duration` seconds, accumulating per-channel jump flux.

    ``t0`` is the absolute start time; the beam coupling phases e^{i w t} are
    defined in absolute time, so consecutive segments of one experiment must
    pass a running start time to keep the drive phases continuous.
    """
    if duration < 0:
        raise ValueError("duration must be >= 0")
    if max_step is None:
        max_step = max_step_for(couplings)
    packed = _pack(couplings, collapses, rho0.dim)
    rho, flux, steps, drift = _backend.integrate(
        rho0.matrix, *packed, duration, rtol, atol, max_step, t0
    )
    return EvolutionResult(
        final_state=DensityOperator(rho),
        fluxes=FluxAccumulator(channels=list(collapses), values=flux),
        steps_taken=steps,
        max_trace_drift=drift,
    )


def steady_state_distance(rho_a: DensityOperator, rho_b: DensityOperator) -> float:
    """Trace distance (1/2)||rho_a - rho_b||_1."""
    a, b = rho_a.matrix, rho_b.matrix
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    diff = a - b
    diff = 0.5 * (diff + diff.conj().T)
    return 0.5 * float(np.abs(np.linalg.eigvalsh(diff)).sum())
