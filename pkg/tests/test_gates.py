import json
import math
import os
import tempfile
import unittest

from core.errors import ConfigError
from core.gates import load_config_document, parse_config, resolve_config, validate_config
from core.schemas import BoundsBlock, ExperimentConfig, G2Block

SMALL_SYSTEM = {"omega_m": 1.0, "g": 0.3, "delta": 0.0, "omega_drive": 0.2, "kappa_d": 1.0}


class ConfigFileTestCase(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmp.cleanup()

    def write(self, data, name="config.json") -> str:
        path = os.path.join(self.tmp.name, name)
        with open(path, "w", encoding="utf-8") as f:
            f.write(data if isinstance(data, str) else json.dumps(data))
        return path


class TestSchemas(unittest.TestCase):
    def test_regime_sets_detuning(self):
        config = parse_config({
            "kind": "g2",
            "system": {"omega_m": 4.0 * math.sqrt(2.0), "g": 4.0, "regime": 2, "kappa_d": 1.0},
        })
        self.assertAlmostEqual(config.system.to_params().delta, -2 * 16.0 / (4.0 * math.sqrt(2.0)))

    def test_complex_drive_pair(self):
        config = parse_config({"kind": "g2", "system": dict(SMALL_SYSTEM, omega_drive=[0.1, -0.2])})
        self.assertEqual(config.system.to_params().omega_drive, complex(0.1, -0.2))

    def test_default_block_for_correlation_kinds(self):
        config = parse_config({"kind": "g2", "system": SMALL_SYSTEM})
        self.assertIsInstance(config.g2, G2Block)
        self.assertIs(config.kind_block(), config.g2)
        self.assertEqual((config.space.dim_cavity, config.space.dim_mech), (6, 12))

    def test_model_dump_round_trips(self):
        config = parse_config({"kind": "g2", "system": SMALL_SYSTEM, "seed": 4})
        again = ExperimentConfig.model_validate(config.model_dump(mode="json"))
        self.assertEqual(again, config)

    def test_unknown_key_reports_location(self):
        with self.assertRaises(ConfigError) as ctx:
            parse_config({"kind": "g2", "system": dict(SMALL_SYSTEM, chi=1.0)})
        locs = [e["loc"] for e in ctx.exception.errors]
        self.assertIn(["system", "chi"], locs)
        self.assertEqual(ctx.exception.errors[0]["type"], "extra_forbidden")

    def test_negative_rate_rejected(self):
        with self.assertRaises(ConfigError) as ctx:
            parse_config({"kind": "g2", "system": dict(SMALL_SYSTEM, gamma=-0.1)})
        self.assertEqual(ctx.exception.errors[0]["loc"], ["system", "gamma"])

    def test_detuning_or_regime_required(self):
        system = {k: v for k, v in SMALL_SYSTEM.items() if k != "delta"}
        with self.assertRaises(ConfigError):
            parse_config({"kind": "g2", "system": system})

    def test_total_cavity_decay_must_be_positive(self):
        with self.assertRaises(ConfigError):
            parse_config({"kind": "g2", "system": dict(SMALL_SYSTEM, kappa_d=0.0)})

    def test_infer_requires_its_block(self):
        with self.assertRaises(ConfigError) as ctx:
            parse_config({"kind": "infer", "system": SMALL_SYSTEM})
        self.assertIn("infer", str(ctx.exception))

    def test_van_trees_requires_prior(self):
        with self.assertRaises(ValueError):
            BoundsBlock(kinds=["VanTrees"])
        self.assertIsNone(BoundsBlock(kinds=["QCRB"], theta=4.0).prior)

    def test_prior_bounds_ordered(self):
        with self.assertRaises(ConfigError):
            parse_config({
                "kind": "infer",
                "system": SMALL_SYSTEM,
                "infer": {"prior": {"theta_min": 5.0, "theta_max": 2.0}},
            })


class TestResolveConfig(ConfigFileTestCase):
    def test_preset_with_overrides(self):
        config = resolve_config(preset="fig4", overrides={"seed": 9, "workers": None})
        self.assertEqual(config.preset, "fig4")
        self.assertEqual(config.seed, 9)
        self.assertEqual(config.workers, 1)
        self.assertEqual(config.system.g, 4.0)

    def test_file_naming_a_preset_is_merged_over_it(self):
        path = self.write({"preset": "fig5-n1", "infer": {"t_end": 10.0}})
        config = resolve_config(path)
        self.assertEqual(config.kind, "infer")
        self.assertEqual(config.infer.t_end, 10.0)
        self.assertEqual(config.infer.prior.theta_min, 2.0)
        self.assertEqual(config.system.regime, 1)

    def test_invalid_json_reports_line_and_column(self):
        path = self.write('{\n  "kind": \n}\n')
        with self.assertRaises(ConfigError) as ctx:
            load_config_document(path)
        loc = ctx.exception.errors[0]["loc"]
        self.assertTrue(loc[0].startswith("line "))
        self.assertTrue(loc[1].startswith("column "))
        self.assertIn("line", str(ctx.exception))

    def test_top_level_must_be_object(self):
        with self.assertRaises(ConfigError):
            load_config_document(self.write("[1, 2]"))

    def test_missing_file(self):
        with self.assertRaises(ConfigError):
            resolve_config(os.path.join(self.tmp.name, "absent.json"))

    def test_unknown_preset(self):
        with self.assertRaises(ConfigError) as ctx:
            resolve_config(preset="fig99")
        self.assertEqual(ctx.exception.errors[0]["type"], "unknown_preset")
        self.assertIn("fig2", str(ctx.exception))

    def test_nothing_to_resolve(self):
        with self.assertRaises(ConfigError):
            resolve_config()


# ----------------------------------------------------------------------------
# validate_config
# ----------------------------------------------------------------------------

class TestValidateConfig(ConfigFileTestCase):
    def test_small_config_passes_with_nonlinearity_warning(self):
        path = self.write({"kind": "g2", "system": SMALL_SYSTEM, "space": {"dim_cavity": 4, "dim_mech": 4}})
        passed, message, details, normalized = validate_config(path)
        self.assertTrue(passed, message)
        self.assertFalse(details["nonlinearity"]["nonlinear"])
        self.assertTrue(any("nonlinearity" in w for w in details["warnings"]))
        self.assertLess(details["probe_leakage"]["cavity"], 1e-2)
        self.assertEqual(normalized["kind"], "g2")

    def test_probe_catches_small_cutoff(self):
        path = self.write({
            "kind": "g2",
            "system": dict(SMALL_SYSTEM, omega_drive=4.0),
            "space": {"dim_cavity": 2, "dim_mech": 4},
        })
        passed, message, details, _ = validate_config(path)
        self.assertFalse(passed)
        self.assertIn("raise the cutoffs", message)
        self.assertGreater(details["probe_leakage"]["cavity"], 1e-2)

    def test_probe_can_be_skipped(self):
        path = self.write({
            "kind": "g2",
            "system": dict(SMALL_SYSTEM, omega_drive=4.0),
            "space": {"dim_cavity": 2, "dim_mech": 4},
        })
        passed, _, details, _ = validate_config(path, probe=False)
        self.assertTrue(passed)
        self.assertNotIn("probe_leakage", details)

    def test_schema_failure_is_reported_not_raised(self):
        path = self.write({"kind": "g2", "system": dict(SMALL_SYSTEM, chi=1.0)})
        passed, _, details, normalized = validate_config(path)
        self.assertFalse(passed)
        self.assertEqual(normalized, {})
        self.assertEqual(details["errors"][0]["loc"], ["system", "chi"])

    def test_sensing_preset_is_nonlinear(self):
        passed, _, details, _ = validate_config(preset="fig5-n1", probe=False)
        self.assertTrue(passed)
        self.assertTrue(details["nonlinearity"]["nonlinear"])
        self.assertEqual(len(details["fingerprint"]), 16)


if __name__ == "__main__":
    unittest.main()
