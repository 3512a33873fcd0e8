import math
import unittest

from core.gates import parse_config
from models.presets import (
    PRESET_REGISTRY,
    PresetGroup,
    get_preset,
    get_preset_config,
    get_presets_by_group,
    sensing_system,
)


class TestPresets(unittest.TestCase):
    def test_every_preset_is_a_valid_config(self):
        for preset_id in PRESET_REGISTRY:
            with self.subTest(preset=preset_id):
                config = parse_config(get_preset_config(preset_id))
                self.assertEqual(config.preset, preset_id)
                self.assertIsNotNone(config.kind_block())

    def test_expected_presets_registered(self):
        expected = {
            "fig2", "fig3-n0", "fig3-n1", "fig3-n2", "fig4", "fig4-g5",
            "fig5-n0", "fig5-n1", "fig5-n2", "fig6",
            "appA", "appB-g", "appB-omega", "appC-avg", "appC-detuning",
        }
        self.assertEqual(set(PRESET_REGISTRY), expected)

    def test_sensing_parameters(self):
        system = sensing_system(2)
        self.assertAlmostEqual(system["g"] / 4.0, 1.0)
        self.assertAlmostEqual(system["omega_m"], 4.0 * math.sqrt(2.0))
        self.assertAlmostEqual(system["kappa_d"] + system["kappa_l"], 1.0)
        self.assertAlmostEqual(system["omega_drive"], 0.3 / system["omega_m"])

    def test_regime_detunings(self):
        for n in (0, 1, 2):
            params = parse_config(get_preset_config(f"fig5-n{n}")).system.to_params()
            self.assertAlmostEqual(params.delta, -n * 16.0 / (4.0 * math.sqrt(2.0)))

    def test_g5_inset_keeps_g4_detunings(self):
        config = parse_config(get_preset_config("fig4-g5"))
        self.assertEqual(config.system.g, 5.0)
        self.assertEqual(config.g2.regime_coupling, 4.0)

    def test_closed_jumps_in_window(self):
        block = parse_config(get_preset_config("appA")).entanglement
        self.assertEqual(block.dynamics, "closed")
        self.assertEqual(block.jump_times, [9.8 * math.pi, 11.0 * math.pi])
        self.assertTrue(all(t < block.t_prime_end for t in block.jump_times))

    def test_config_is_a_copy(self):
        first = get_preset_config("fig2")
        first["system"]["g"] = 99.0
        self.assertEqual(get_preset_config("fig2")["system"]["g"], 4.0)

    def test_groups(self):
        sensing = {p.preset_id for p in get_presets_by_group(PresetGroup.SENSING)}
        self.assertEqual(sensing, {"fig5-n0", "fig5-n1", "fig5-n2"})
        self.assertEqual(get_preset("fig6").group, PresetGroup.BOUNDS)

    def test_unknown_preset(self):
        with self.assertRaises(KeyError):
            get_preset("fig7")


if __name__ == "__main__":
    unittest.main()
