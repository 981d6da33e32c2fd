"""Species loading, schema validation, collapse and Rabi coupling structure."""
import json
import math

import numpy as np
import pytest

from ionreg.angular import HalfInt, wigner3j
from ionreg.species import (
    C_LIGHT,
    PLANCK_H,
    SpeciesSchemaError,
    available_species,
    beam_couplings,
    collapse_operators,
    load_species,
    rabi_frequency,
    reduced_rabi,
    repump_hamiltonian,
    saturation_intensity,
)

ALL_KEYS = ["ba", "ca", "mg", "sr", "yb"]


def minimal_doc():
    return {
        "name": "test+",
        "manifolds": [
            {"label": "S1/2", "J": "1/2"},
            {"label": "P1/2", "J": "1/2"},
        ],
        "decays": [
            {
                "upper": "P1/2",
                "lower": "S1/2",
                "einstein_A_per_s": 1e8,
                "wavelength_m": 400e-9,
            }
        ],
        "repump_beams": [],
    }


class TestSchema:
    def test_shipped_species_all_load(self):
        shipped = available_species()
        assert sorted(shipped) == ALL_KEYS
        for key, path in shipped.items():
            model = load_species(path)
            assert model.dim == sum(m.multiplicity for m in model.manifolds)

    def test_loads_from_dict_or_path(self, tmp_path):
        doc = minimal_doc()
        from_dict = load_species(doc)
        p = tmp_path / "test.json"
        p.write_text(json.dumps(doc))
        from_path = load_species(p)
        assert from_dict.name == from_path.name
        assert from_dict.dim == from_path.dim == 4

    def test_missing_name(self):
        doc = minimal_doc()
        del doc["name"]
        with pytest.raises(SpeciesSchemaError, match="name"):
            load_species(doc)

    def test_requires_s_and_p_manifolds(self):
        doc = minimal_doc()
        doc["manifolds"] = [{"label": "S1/2", "J": "1/2"}]
        doc["decays"] = []
        with pytest.raises(SpeciesSchemaError, match="P1/2"):
            load_species(doc)

    def test_duplicate_manifold(self):
        doc = minimal_doc()
        doc["manifolds"].append({"label": "S1/2", "J": "1/2"})
        with pytest.raises(SpeciesSchemaError, match="duplicate"):
            load_species(doc)

    def test_bad_J(self):
        doc = minimal_doc()
        doc["manifolds"][0]["J"] = "2/3"
        with pytest.raises(SpeciesSchemaError, match=r"manifolds\[0\].J"):
            load_species(doc)

    def test_decay_unknown_manifold(self):
        doc = minimal_doc()
        doc["decays"][0]["lower"] = "D3/2"
        with pytest.raises(SpeciesSchemaError, match=r"decays\[0\].lower"):
            load_species(doc)

    def test_decay_nonpositive_rate(self):
        doc = minimal_doc()
        doc["decays"][0]["einstein_A_per_s"] = 0.0
        with pytest.raises(SpeciesSchemaError, match="einstein_A_per_s"):
            load_species(doc)

    def test_beam_must_match_decay_path(self):
        doc = minimal_doc()
        doc["manifolds"].append({"label": "D3/2", "J": "3/2"})
        doc["repump_beams"] = [
            {"upper": "P1/2", "lower": "D3/2", "pol": [0, 0, 1],
             "detuning_hz": 0.0, "power_w": 1e-5, "waist_m": 3e-5}
        ]
        with pytest.raises(SpeciesSchemaError, match="not a decay path"):
            load_species(doc)

    def test_beam_pol_norm(self):
        doc = minimal_doc()
        doc["repump_beams"] = [
            {"upper": "P1/2", "lower": "S1/2", "pol": [0, 0, 0.5],
             "detuning_hz": 0.0, "power_w": 1e-5, "waist_m": 3e-5}
        ]
        with pytest.raises(SpeciesSchemaError, match="pol"):
            load_species(doc)

    def test_beam_detuning_converted_to_angular(self):
        doc = minimal_doc()
        doc["repump_beams"] = [
            {"upper": "P1/2", "lower": "S1/2", "pol": [0, 0, 1],
             "detuning_hz": 1e7, "power_w": 1e-5, "waist_m": 3e-5}
        ]
        model = load_species(doc)
        assert model.repump_beams[0].detuning == pytest.approx(2 * math.pi * 1e7)

    def test_basis_order_manifold_then_m_ascending(self):
        model = load_species(available_species()["ca"])
        labels = [(man.label, m.twice) for man, m, _ in model.levels()]
        assert labels[:4] == [("S1/2", -1), ("S1/2", 1), ("P1/2", -1), ("P1/2", 1)]
        d3 = model.manifold_indices("D3/2")
        assert d3 == sorted(d3)

    def test_block_indices(self):
        model = load_species(available_species()["mg"])
        blocks = model.sp_block_indices()
        assert blocks.all() == (0, 1, 2, 3)


class TestCollapseOperators:
    @pytest.mark.parametrize("key", ALL_KEYS)
    def test_completeness_per_excited_level(self, key):
        """Total loss rate out of each upper level equals the sum of its
        Einstein A coefficients (the angular factors are a resolution of
        identity)."""
        model = load_species(available_species()[key])
        channels = collapse_operators(model)
        for man, m, idx in model.levels():
            expected = sum(
                p.einstein_A for p in model.decay_paths if p.upper == man.label
            )
            if expected == 0:
                continue
            total = sum(c.rate for c in channels if c.e_index == idx)
            assert total == pytest.approx(expected, rel=1e-12)

    def test_amplitude_formula(self):
        """Channel amplitude is sqrt(A (2J_e+1)) |3j(J_g 1 J_e; m_g q -m_e)|."""
        model = load_species(available_species()["ca"])
        channels = collapse_operators(model)
        ch = next(
            c for c in channels
            if c.path.upper == "P1/2" and c.path.lower == "S1/2"
            and c.g_index == model.level_index("S1/2", HalfInt(-1))
            and c.e_index == model.level_index("P1/2", HalfInt(1))
        )
        expected = math.sqrt(1.40e8 * 2) * abs(
            wigner3j("1/2", 1, "1/2", "-1/2", 1, "-1/2")
        )
        assert abs(ch.amplitude) == pytest.approx(expected)
        assert ch.q == 1
        assert ch.collectable

    def test_q_matches_projection_difference(self):
        model = load_species(available_species()["ba"])
        for c in collapse_operators(model):
            assert c.q in (-1, 0, 1)

    def test_collectable_only_p12_to_s12(self):
        model = load_species(available_species()["yb"])
        for c in collapse_operators(model):
            assert c.collectable == (
                c.path.upper == "P1/2" and c.path.lower == "S1/2"
            )

    def test_matrix_is_rank_one(self):
        model = load_species(available_species()["mg"])
        c = collapse_operators(model)[0]
        mat = c.matrix()
        assert np.count_nonzero(mat) == 1
        assert mat[c.g_index, c.e_index] == pytest.approx(c.amplitude)


class TestRabi:
    def test_saturation_intensity_formula(self):
        path = load_species(minimal_doc()).decay_paths[0]
        expected = math.pi * PLANCK_H * C_LIGHT * 1e8 / (3 * (400e-9) ** 3)
        assert saturation_intensity(path) == pytest.approx(expected)

    def test_reduced_rabi_scaling(self):
        """Rabi scale grows as sqrt(power) and 1/waist."""
        doc = minimal_doc()
        doc["repump_beams"] = [
            {"upper": "P1/2", "lower": "S1/2", "pol": [0, 0, 1],
             "detuning_hz": 0.0, "power_w": 1e-5, "waist_m": 3e-5}
        ]
        model = load_species(doc)
        beam = model.repump_beams[0]
        path = model.decay_paths[0]
        base = reduced_rabi(beam, path)
        import dataclasses

        beam4 = dataclasses.replace(beam, power=4e-5)
        assert reduced_rabi(beam4, path) == pytest.approx(2 * base)
        beam_w = dataclasses.replace(beam, waist=6e-5)
        assert reduced_rabi(beam_w, path) == pytest.approx(base / 2)

    def test_rabi_zero_off_transition_and_wrong_pol(self):
        model = load_species(available_species()["ca"])
        beam = model.repump_beams[0]  # D3/2 -> P3/2, sigma+
        s = model.level_index("S1/2", HalfInt(-1))
        p = model.level_index("P1/2", HalfInt(1))
        assert rabi_frequency(model, beam, s, p) == 0.0
        # sigma+ beam cannot drive a q = -1 transition
        g = model.level_index("D3/2", HalfInt(1))
        e = model.level_index("P3/2", HalfInt(-1))
        assert rabi_frequency(model, beam, g, e) == 0.0

    def test_couplings_match_rabi(self):
        model = load_species(available_species()["sr"])
        for c in beam_couplings(model):
            beam = next(
                b for b in model.repump_beams
                if b.detuning == c.frequency
                and rabi_frequency(model, b, c.g_index, c.e_index) == c.amplitude
            )
            assert beam is not None

    def test_mg_has_no_couplings(self):
        model = load_species(available_species()["mg"])
        assert beam_couplings(model) == []


class TestRepumpHamiltonian:
    @pytest.mark.parametrize("key", ["ca", "yb"])
    @pytest.mark.parametrize("t", [0.0, 13.7e-9])
    def test_hermitian(self, key, t):
        model = load_species(available_species()[key])
        H = repump_hamiltonian(model, t)
        assert np.allclose(H, H.conj().T)

    def test_matches_couplings(self):
        model = load_species(available_species()["ba"])
        t = 5e-9
        H = repump_hamiltonian(model, t)
        expected = np.zeros_like(H)
        for c in beam_couplings(model):
            term = c.amplitude * np.exp(1j * c.frequency * t)
            expected[c.g_index, c.e_index] += term
            expected[c.e_index, c.g_index] += np.conj(term)
        assert np.allclose(H, expected)

    def test_only_beam_transitions_present(self):
        model = load_species(available_species()["ca"])
        H = repump_hamiltonian(model, 0.0)
        s_rows = model.manifold_indices("S1/2") + model.manifold_indices("P1/2")
        assert np.allclose(H[np.ix_(s_rows, s_rows)], 0.0)
