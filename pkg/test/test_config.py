# coding=utf-8
import tempfile
import unittest
from pathlib import Path
from unittest import mock

from tomofisher import config
from tomofisher.config import ConfigFile, RunConfig
from tomofisher.options import ConfigError


class TestConfigFile(unittest.TestCase):
    def with_config_file(contents):
        def decorator(function):
            def wrapper(self):
                with tempfile.TemporaryDirectory() as temp_dir:
                    path = Path(temp_dir) / "sweep.cfg"
                    path.write_text(contents)
                    function(self, ConfigFile(path))

            return wrapper

        return decorator

    @with_config_file("ranks 1..3\n")
    def test_read(self, config_file):
        self.assertEqual(config_file["ranks"], "1..3")
        self.assertEqual(len(config_file), 1)
        self.assertIn("ranks", config_file)

    @with_config_file("n 4\nk 20,81\nN 900\nN 8100\n")
    def test_last_entry_wins(self, config_file):
        self.assertEqual(config_file["n"], "4")
        self.assertEqual(config_file["k"], "20,81")
        self.assertEqual(config_file["N"], "8100")
        self.assertEqual(len(config_file), 3)

    @with_config_file("max-iters 100\n")
    def test_dashes_and_underscores(self, config_file):
        self.assertEqual(config_file["max_iters"], "100")
        self.assertEqual(config_file["--max-iters"], "100")

    @with_config_file(
        "# sweep at four qubits\nn = 4\n\nk 20,81  # two sizes\nnonsense\nreplacement=true\n"
    )
    def test_comments_and_separators(self, config_file):
        self.assertEqual(
            config_file.parameters(), {"n": 4, "k": [20, 81], "replacement": True}
        )

    @with_config_file("colour red\n")
    def test_unknown_key(self, config_file):
        with self.assertRaises(ConfigError):
            config_file.parameters()

    @with_config_file("")
    def test_empty(self, config_file):
        self.assertEqual(len(config_file), 0)
        self.assertEqual(config_file.parameters(), {})

    def test_missing_file_is_not_created(self):
        with tempfile.TemporaryDirectory() as temp_dir:
            path = Path(temp_dir) / "settings" / "sweep.cfg"

            with self.assertRaises(ConfigError):
                len(ConfigFile(path))

            self.assertFalse(path.parent.exists())

class TestRunConfig(unittest.TestCase):
    def test_dict_round_trip(self):
        run = RunConfig(
            "pauli-re",
            {"n": 2, "r": 1, "k": [3, 9], "designs": 2},
            seed=5,
            output_dir="out",
            workers=2,
            timestamp="2020-01-01T00:00:00Z",
        )

        self.assertEqual(RunConfig.from_dict(run.to_dict()), run)

    def test_missing_field(self):
        with self.assertRaises(ConfigError):
            RunConfig.from_dict({"subcommand": "sweep"})

    def test_timestamp_defaults_to_now(self):
        self.assertTrue(RunConfig("sweep", {}).timestamp.endswith("Z"))

    def test_output_dir_from_environment(self):
        with mock.patch.dict("os.environ", {config.OUTPUT_DIR_VARIABLE: "/tmp/runs"}):
            self.assertEqual(RunConfig("sweep", {}).output_dir, "/tmp/runs")

    def test_default_output_dir(self):
        with mock.patch.dict("os.environ", {}, clear=True):
            self.assertEqual(RunConfig("sweep", {}).output_dir, config.DEFAULT_OUTPUT_DIR)


class TestResolve(unittest.TestCase):
    def test_defaults(self):
        run = config.resolve("pauli-re", {})

        self.assertEqual(run.seed, 0)
        self.assertEqual(run.workers, 1)
        self.assertEqual(run.parameters["n"], 2)
        self.assertIsNone(run.parameters["k"])

    def test_flags(self):
        run = config.resolve("pauli-re", {"n": 3, "k": [27], "seed": 9, "workers": 3})

        self.assertEqual(run.parameters["n"], 3)
        self.assertEqual(run.parameters["k"], [27])
        self.assertEqual(run.seed, 9)
        self.assertEqual(run.workers, 3)

    def test_precedence(self):
        with tempfile.TemporaryDirectory() as temp_dir:
            path = Path(temp_dir) / "run.cfg"
            path.write_text("n 3\nk 27\ndesigns 4\nseed 2\n")

            run = config.resolve("pauli-re", {"k": [9]}, path)

        self.assertEqual(run.parameters["n"], 3)
        self.assertEqual(run.parameters["designs"], 4)
        self.assertEqual(run.parameters["k"], [9])
        self.assertEqual(run.seed, 2)

    def test_parameters_of_other_subcommands_ignored(self):
        with tempfile.TemporaryDirectory() as temp_dir:
            path = Path(temp_dir) / "run.cfg"
            path.write_text("reps 50\nn 1\n")

            run = config.resolve("pauli-re", {}, path)

        self.assertNotIn("reps", run.parameters)
        self.assertEqual(run.parameters["n"], 1)

    def test_missing_config_file(self):
        with self.assertRaises(ConfigError):
            config.resolve("sweep", {}, "/nonexistent/run.cfg")

    def test_invalid_workers(self):
        with self.assertRaises(ConfigError):
            config.resolve("sweep", {"workers": 0})

    def test_invalid_seed(self):
        with self.assertRaises(ConfigError):
            config.resolve("sweep", {"seed": -1})

    def test_inconsistent_parameters(self):
        with self.assertRaises(ConfigError):
            config.resolve("haar-concentration", {"d": 2, "ranks": [2]})
