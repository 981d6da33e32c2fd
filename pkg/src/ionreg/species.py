"""Ion species models: manifolds, decay paths, repump beams.

A species is loaded from a JSON description (see ``data/species/``) into an
immutable :class:`SpeciesModel`, from which collapse operators, Rabi
couplings, and the repump Hamiltonian are derived.

Conventions:
  * Zeeman sublevels within a manifold are degenerate; basis order is
    manifolds in file order, m ascending.
  * A coupling between levels g (lower) and e (upper) carries the spherical
    photon component q = m_e - m_g in {-1, 0, +1}; the beam polarization
    triple is indexed (sigma-, pi, sigma+) = q of (-1, 0, +1).
  * Only P1/2 -> S1/2 decays produce collectable photons; everything else is
    assumed to be filtered out before the detectors.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .angular import HalfInt, wigner3j

__all__ = [
    "SpeciesSchemaError",
    "Manifold",
    "DecayPath",
    "Beam",
    "SpeciesModel",
    "CollapseChannel",
    "Coupling",
    "load_species",
    "species_data_dir",
    "available_species",
    "collapse_operators",
    "rabi_frequency",
    "beam_couplings",
    "repump_hamiltonian",
]

C_LIGHT = 299792458.0
PLANCK_H = 6.62607015e-34

_POL_NORM_TOL = 1e-12


class SpeciesSchemaError(ValueError):
    """A species description violates the schema; the message names the field."""


@dataclass(frozen=True)
class Manifold:
    label: str
    J: HalfInt
    energy_rank: int

    @property
    def multiplicity(self) -> int:
        return self.J.twice + 1

    def m_values(self) -> list[HalfInt]:
        return [HalfInt(t) for t in range(-self.J.twice, self.J.twice + 1, 2)]


@dataclass(frozen=True)
class DecayPath:
    upper: str
    lower: str
    einstein_A: float
    wavelength: float
    ref: str = ""


@dataclass(frozen=True)
class Beam:
    upper: str
    lower: str
    polarization: tuple[complex, complex, complex]  # (sigma-, pi, sigma+)
    detuning: float  # rad/s; negative = beam below the transition frequency
    power: float  # W
    waist: float  # m
    ref: str = ""

    def pol_component(self, q: int) -> complex:
        if q not in (-1, 0, 1):
            return 0.0
        return self.polarization[q + 1]


@dataclass(frozen=True)
class BlockIndices:
    """Basis indices of the four levels the excitation pulse addresses."""

    s_minus: int
    s_plus: int
    p_minus: int
    p_plus: int

    def all(self) -> tuple[int, int, int, int]:
        return (self.s_minus, self.s_plus, self.p_minus, self.p_plus)


@dataclass(frozen=True)
class SpeciesModel:
    name: str
    manifolds: tuple[Manifold, ...]
    decay_paths: tuple[DecayPath, ...]
    repump_beams: tuple[Beam, ...]
    index: dict = field(hash=False)  # (manifold label, 2m) -> basis index
    dim: int

    def manifold(self, label: str) -> Manifold:
        for man in self.manifolds:
            if man.label == label:
                return man
        raise KeyError(f"{self.name}: no manifold {label!r}")

    def level_index(self, label: str, m: HalfInt) -> int:
        return self.index[(label, m.twice)]

    def levels(self):
        """Yield (manifold, m, basis index) in basis order."""
        for man in self.manifolds:
            for m in man.m_values():
                yield man, m, self.index[(man.label, m.twice)]

    def manifold_indices(self, label: str) -> list[int]:
        man = self.manifold(label)
        return [self.index[(label, m.twice)] for m in man.m_values()]

    def decay_path(self, upper: str, lower: str) -> DecayPath:
        for path in self.decay_paths:
            if path.upper == upper and path.lower == lower:
                return path
        raise KeyError(f"{self.name}: no decay path {upper} -> {lower}")

    def sp_block_indices(self) -> BlockIndices:
        return BlockIndices(
            s_minus=self.index[("S1/2", -1)],
            s_plus=self.index[("S1/2", 1)],
            p_minus=self.index[("P1/2", -1)],
            p_plus=self.index[("P1/2", 1)],
        )

    def is_collectable(self, path: DecayPath) -> bool:
        return path.upper == "P1/2" and path.lower == "S1/2"


@dataclass(frozen=True)
class CollapseChannel:
    """One Lindblad jump operator amplitude * |g><e| for a single decay."""

    path: DecayPath
    g_index: int
    e_index: int
    amplitude: float  # sqrt(rad/s); squared units of einstein_A
    q: int  # spherical component of the emitted photon, m_e - m_g
    collectable: bool
    dim: int

    def matrix(self) -> np.ndarray:
        op = np.zeros((self.dim, self.dim), dtype=complex)
        op[self.g_index, self.e_index] = self.amplitude
        return op

    @property
    def rate(self) -> float:
        return self.amplitude**2


@dataclass(frozen=True)
class Coupling:
    """One rotating-frame Hamiltonian term amp * e^{i w t} |g><e| + h.c."""

    g_index: int
    e_index: int
    amplitude: complex  # rad/s
    frequency: float  # rad/s


def _require(condition: bool, field_name: str, message: str) -> None:
    if not condition:
        raise SpeciesSchemaError(f"{field_name}: {message}")


def load_species(source) -> SpeciesModel:
    """Load a species model from a JSON file path or an already-parsed dict."""
    if isinstance(source, (str, Path)):
        with open(source) as fh:
            doc = json.load(fh)
    else:
        doc = source

    _require("name" in doc, "name", "missing")
    name = doc["name"]

    manifolds = []
    seen = set()
    for i, entry in enumerate(doc.get("manifolds", [])):
        where = f"manifolds[{i}]"
        _require("label" in entry and "J" in entry, where, "needs label and J")
        label = entry["label"]
        _require(label not in seen, where, f"duplicate manifold {label!r}")
        seen.add(label)
        try:
            J = HalfInt.of(entry["J"])
        except (ValueError, TypeError) as exc:
            raise SpeciesSchemaError(f"{where}.J: {exc}") from exc
        manifolds.append(Manifold(label=label, J=J, energy_rank=i))
    _require("S1/2" in seen, "manifolds", "S1/2 manifold is required")
    _require("P1/2" in seen, "manifolds", "P1/2 manifold is required")

    decay_paths = []
    for i, entry in enumerate(doc.get("decays", [])):
        where = f"decays[{i}]"
        for key in ("upper", "lower", "einstein_A_per_s", "wavelength_m"):
            _require(key in entry, f"{where}.{key}", "missing")
        _require(entry["upper"] in seen, f"{where}.upper", f"unknown manifold {entry['upper']!r}")
        _require(entry["lower"] in seen, f"{where}.lower", f"unknown manifold {entry['lower']!r}")
        _require(entry["upper"] != entry["lower"], where, "upper and lower coincide")
        _require(entry["einstein_A_per_s"] > 0, f"{where}.einstein_A_per_s", "must be > 0")
        _require(entry["wavelength_m"] > 0, f"{where}.wavelength_m", "must be > 0")
        decay_paths.append(
            DecayPath(
                upper=entry["upper"],
                lower=entry["lower"],
                einstein_A=float(entry["einstein_A_per_s"]),
                wavelength=float(entry["wavelength_m"]),
                ref=entry.get("ref", ""),
            )
        )

    path_keys = {(p.upper, p.lower) for p in decay_paths}
    beams = []
    for i, entry in enumerate(doc.get("repump_beams", [])):
        where = f"repump_beams[{i}]"
        for key in ("upper", "lower", "pol", "detuning_hz", "power_w", "waist_m"):
            _require(key in entry, f"{where}.{key}", "missing")
        _require(
            (entry["upper"], entry["lower"]) in path_keys,
            where,
            f"beam drives {entry['lower']} -> {entry['upper']} which is not a decay path",
        )
        pol = entry["pol"]
        _require(len(pol) == 3, f"{where}.pol", "needs three (sigma-, pi, sigma+) amplitudes")
        pol = tuple(complex(p[0], p[1]) if isinstance(p, (list, tuple)) else complex(p) for p in pol)
        norm = sum(abs(p) ** 2 for p in pol)
        _require(abs(norm - 1.0) < _POL_NORM_TOL, f"{where}.pol", f"norm^2 = {norm}, expected 1")
        _require(entry["power_w"] > 0, f"{where}.power_w", "must be > 0")
        _require(entry["waist_m"] > 0, f"{where}.waist_m", "must be > 0")
        beams.append(
            Beam(
                upper=entry["upper"],
                lower=entry["lower"],
                polarization=pol,
                detuning=2 * math.pi * float(entry["detuning_hz"]),
                power=float(entry["power_w"]),
                waist=float(entry["waist_m"]),
                ref=entry.get("ref", ""),
            )
        )

    index = {}
    dim = 0
    for man in manifolds:
        for m in man.m_values():
            index[(man.label, m.twice)] = dim
            dim += 1

    return SpeciesModel(
        name=name,
        manifolds=tuple(manifolds),
        decay_paths=tuple(decay_paths),
        repump_beams=tuple(beams),
        index=index,
        dim=dim,
    )


def species_data_dir() -> Path:
    return Path(__file__).parent / "data" / "species"


def available_species() -> dict[str, Path]:
    """Map short species keys (file stems) to shipped data file paths."""
    return {p.stem: p for p in sorted(species_data_dir().glob("*.json"))}


def _coupling_weight(j_g: HalfInt, m_g: HalfInt, j_e: HalfInt, m_e: HalfInt) -> float:
    """Angular factor sqrt(2 J_e + 1) * 3j(J_g, 1, J_e; m_g, m_e - m_g, -m_e)."""
    q = HalfInt(m_e.twice - m_g.twice)
    if abs(q.twice) > 2:
        return 0.0
    return math.sqrt(j_e.twice + 1.0) * wigner3j(j_g, HalfInt(2), j_e, m_g, q, -m_e)


def collapse_operators(model: SpeciesModel) -> list[CollapseChannel]:
    """One jump channel per (decay path, lower level, upper level) with nonzero weight."""
    channels = []
    for path in model.decay_paths:
        upper = model.manifold(path.upper)
        lower = model.manifold(path.lower)
        for m_e in upper.m_values():
            for m_g in lower.m_values():
                weight = _coupling_weight(lower.J, m_g, upper.J, m_e)
                if weight == 0.0:
                    continue
                channels.append(
                    CollapseChannel(
                        path=path,
                        g_index=model.level_index(path.lower, m_g),
                        e_index=model.level_index(path.upper, m_e),
                        amplitude=math.sqrt(path.einstein_A) * weight,
                        q=(m_e.twice - m_g.twice) // 2,
                        collectable=model.is_collectable(path),
                        dim=model.dim,
                    )
                )
    return channels


def saturation_intensity(path: DecayPath) -> float:
    """I_sat = pi h c Gamma / (3 lambda^3) with Gamma the path's Einstein A."""
    return math.pi * PLANCK_H * C_LIGHT * path.einstein_A / (3 * path.wavelength**3)


def reduced_rabi(beam: Beam, path: DecayPath) -> float:
    """Peak Rabi scale Gamma * sqrt(I / (2 I_sat)) for a Gaussian beam waist."""
    intensity = 2 * beam.power / (math.pi * beam.waist**2)
    return path.einstein_A * math.sqrt(intensity / (2 * saturation_intensity(path)))


def rabi_frequency(model: SpeciesModel, beam: Beam, g_index: int, e_index: int) -> complex:
    """Complex Rabi amplitude of one beam between two basis levels (rad/s).

    Returns 0 when the levels are not connected by the beam's transition or
    the required photon component is absent from the beam polarization.
    """
    levels = {idx: (man, m) for man, m, idx in model.levels()}
    man_g, m_g = levels[g_index]
    man_e, m_e = levels[e_index]
    if man_g.label != beam.lower or man_e.label != beam.upper:
        return 0.0
    if abs(m_e.twice - m_g.twice) > 2:
        return 0.0
    q = (m_e.twice - m_g.twice) // 2
    pol = beam.pol_component(q)
    if pol == 0:
        return 0.0
    path = model.decay_path(beam.upper, beam.lower)
    return reduced_rabi(beam, path) * pol * _coupling_weight(man_g.J, m_g, man_e.J, m_e)


def beam_couplings(model: SpeciesModel) -> list[Coupling]:
    """All nonzero rotating-frame Hamiltonian terms amp e^{i w t}|g><e| + h.c."""
    couplings = []
    for beam in model.repump_beams:
        lower = model.manifold(beam.lower)
        upper = model.manifold(beam.upper)
        for m_g in lower.m_values():
            for m_e in upper.m_values():
                g = model.level_index(beam.lower, m_g)
                e = model.level_index(beam.upper, m_e)
                amp = rabi_frequency(model, beam, g, e)
                if amp == 0:
                    continue
                couplings.append(
                    Coupling(g_index=g, e_index=e, amplitude=amp, frequency=beam.detuning)
                )
    return couplings


def repump_hamiltonian(model: SpeciesModel, t: float) -> np.ndarray:
    """Rotating-frame repump Hamiltonian H(t) in rad/s, Hermitian by construction."""
    H = np.zeros((model.dim, model.dim), dtype=complex)
    for c in beam_couplings(model):
        term = c.amplitude * np.exp(1j * c.frequency * t)
        H[c.g_index, c.e_index] += term
        H[c.e_index, c.g_index] += np.conj(term)
    return H
