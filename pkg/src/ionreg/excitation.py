"""Excitation-pulse quantum channel with birefringence polarization error.

A circularly polarized pi pulse addresses two orthogonal two-level blocks,
{|S-|>, |P+>} (driven by sigma+) and {|S+>, |P->} (driven by sigma-).
Birefringence mixes the handedness: with axis angle alpha (uniform) and
retardance beta (Gaussian, spread sigma_beta), a nominally right-handed pulse
keeps amplitude cos(beta/2) on its own handedness and leaks
i e^{-i 2 alpha} sin(beta/2) into the opposite one.

After averaging alpha analytically (all alpha-dependent terms vanish) and
beta by Gauss-Hermite quadrature, the channel reduces to a four-term map on
block populations: on each block, keep with averaged weight cos^2(pi|c|/2)
and swap populations with weight sin^2(pi|c|/2). Coherences between the two
blocks, and between the blocks and the rest of the level structure, are
zeroed (block-dephasing form); levels outside S1/2 + P1/2 are untouched.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .dynamics import DensityOperator
from .species import BlockIndices

__all__ = [
    "Handedness",
    "jones_coefficients",
    "pulse_propagator",
    "apply_ideal_pulse",
    "PulseChannel",
    "wrong_excitation_probability",
]

DEFAULT_QUADRATURE_NODES = 21


class Handedness(enum.Enum):
    """Nominal circular polarization of the excitation pulse."""

    R = "R"  # drives sigma+, i.e. |S-> -> |P+>
    L = "L"  # drives sigma-, i.e. |S+> -> |P->

    def flipped(self) -> "Handedness":
        return Handedness.L if self is Handedness.R else Handedness.R


def jones_coefficients(h: Handedness, alpha: float, beta: float) -> tuple[complex, complex]:
    """Amplitudes (c_plus, c_minus) of sigma+/sigma- drive after birefringence."""
    if h is Handedness.R:
        return (
            complex(math.cos(beta / 2)),
            1j * np.exp(-2j * alpha) * math.sin(beta / 2),
        )
    return (
        1j * np.exp(2j * alpha) * math.sin(beta / 2),
        complex(math.cos(beta / 2)),
    )


def pulse_propagator(
    theta_plus: complex, theta_minus: complex, blocks: BlockIndices, dim: int
) -> np.ndarray:
    """Unitary for complex pulse areas on the two blocks, identity elsewhere.

    On each block {|S_-+>, |P_+->}: cos(|theta|/2) 1 - i sin(|theta|/2) X_phi
    with phi = arg(theta).
    """
    U = np.eye(dim, dtype=complex)
    for theta, (lo, hi) in (
        (theta_plus, (blocks.s_minus, blocks.p_plus)),
        (theta_minus, (blocks.s_plus, blocks.p_minus)),
    ):
        mag = abs(theta)
        c, s = math.cos(mag / 2), math.sin(mag / 2)
        phase = theta / mag if mag else 1.0
        U[lo, lo] = c
        U[hi, hi] = c
        U[lo, hi] = -1j * s * phase
        U[hi, lo] = -1j * s * np.conj(phase)
    return U


def apply_ideal_pulse(rho: DensityOperator, h: Handedness, blocks: BlockIndices) -> DensityOperator:
    """Perfect pi pulse on the block selected by the handedness."""
    theta_plus = math.pi if h is Handedness.R else 0.0
    theta_minus = math.pi if h is Handedness.L else 0.0
    U = pulse_propagator(theta_plus, theta_minus, blocks, rho.dim)
    return DensityOperator(U @ rho.matrix @ U.conj().T)


@dataclass(frozen=True)
class PulseChannel:
    """Birefringence-averaged excitation channel for one handedness."""

    handedness: Handedness
    sigma_beta: float
    nodes: int
    keep_plus: float  # beta-averaged cos^2(pi |c_+| / 2)
    keep_minus: float  # beta-averaged cos^2(pi |c_-| / 2)

    @classmethod
    def build(
        cls,
        handedness: Handedness,
        sigma_beta: float,
        nodes: int = DEFAULT_QUADRATURE_NODES,
    ) -> "PulseChannel":
        if sigma_beta < 0:
            raise ValueError("sigma_beta must be >= 0")
        if sigma_beta == 0.0:
            betas, weights = np.array([0.0]), np.array([1.0])
        else:
            x, w = np.polynomial.hermite.hermgauss(nodes)
            betas = math.sqrt(2.0) * sigma_beta * x
            weights = w / math.sqrt(math.pi)
        own = np.abs(np.cos(betas / 2))
        leak = np.abs(np.sin(betas / 2))
        keep_own = float(weights @ np.cos(math.pi * own / 2) ** 2)
        keep_leak = float(weights @ np.cos(math.pi * leak / 2) ** 2)
        if handedness is Handedness.R:
            keep_plus, keep_minus = keep_own, keep_leak
        else:
            keep_plus, keep_minus = keep_leak, keep_own
        return cls(
            handedness=handedness,
            sigma_beta=sigma_beta,
            nodes=nodes,
            keep_plus=keep_plus,
            keep_minus=keep_minus,
        )

    @property
    def transfer_probability(self) -> float:
        """Population swap probability on the block the pulse does not address."""
        wrong_keep = self.keep_minus if self.handedness is Handedness.R else self.keep_plus
        return 1.0 - wrong_keep

    def apply(self, rho: DensityOperator, blocks: BlockIndices) -> DensityOperator:
        out = rho.matrix.copy()
        members = blocks.all()
        out[list(members), :] = 0.0
        out[:, list(members)] = 0.0
        for keep, lo, hi in (
            (self.keep_plus, blocks.s_minus, blocks.p_plus),
            (self.keep_minus, blocks.s_plus, blocks.p_minus),
        ):
            swap = 1.0 - keep
            out[lo, lo] = keep * rho.matrix[lo, lo] + swap * rho.matrix[hi, hi]
            out[hi, hi] = keep * rho.matrix[hi, hi] + swap * rho.matrix[lo, lo]
            out[lo, hi] = keep * rho.matrix[lo, hi]
            out[hi, lo] = keep * rho.matrix[hi, lo]
        return DensityOperator(out)


def apply_birefringent_pulse(
    rho: DensityOperator, channel: PulseChannel, blocks: BlockIndices
) -> DensityOperator:
    return channel.apply(rho, blocks)


def wrong_excitation_probability(sigma_beta: float) -> float:
    """Small-spread analytic leak probability, pi^2 sigma_beta^2 / 16."""
    if sigma_beta < 0:
        raise ValueError("sigma_beta must be >= 0")
    return math.pi**2 * sigma_beta**2 / 16
