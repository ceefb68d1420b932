import unittest
from unittest import mock

import numpy as np

from tomofisher import designs, experiments, fisher, options, records, states
from tomofisher.workers import STATE_STREAM, derive_seed


def values(output, **match):
    return [
        record.value
        for record in output
        if all(record.to_dict().get(key) == value for key, value in match.items())
    ]


def mean_at_k(output, r, k):
    return np.mean([record.value for record in output if record.r == r and record.cell[2] == k])


class TestMakeRecord(unittest.TestCase):
    def test_non_identifiable(self):
        record = experiments.make_record(
            "pauli_relative_error", "relative_error", fisher.NonIdentifiable(0.0, 4.0), cell=[1, 0]
        )

        self.assertEqual(record.status, records.STATUS_NON_IDENTIFIABLE)
        self.assertIsNone(record.value)
        self.assertEqual(record.aux, {"min_eigenvalue": 0.0, "max_eigenvalue": 4.0})

    def test_value(self):
        record = experiments.make_record("fisher", "asymptotic_mse", 0.5, aux={"N_eff": 9})

        self.assertEqual(record.status, records.STATUS_OK)
        self.assertEqual(record.aux, {"N_eff": 9})


class TestSettingsSweep(unittest.TestCase):
    def test_record_count_and_cells(self):
        experiment = experiments.SettingsSweep(
            2, [1, 2], [3, 9], 900, states=2, designs=2, seed=1
        )
        output = experiment.run()

        self.assertEqual(len(output), experiment.expected_count())
        self.assertEqual(len(output), 16)
        self.assertEqual([record.index for record in output], list(range(16)))
        self.assertEqual(output[0].cell, [1, 0, 3, 0])
        self.assertEqual(output[0].m, 300)
        self.assertEqual(output[0].aux["N_eff"], 900)

    def test_single_setting_is_not_identifiable(self):
        output = experiments.settings_sweep(1, [1], [1], states=1, designs=1, N=100, seed=3)

        self.assertEqual(output[0].status, records.STATUS_NON_IDENTIFIABLE)

    def test_matches_direct_computation(self):
        output = experiments.settings_sweep(2, [2], [9], states=1, designs=1, N=900, seed=4)
        state_seed = derive_seed(4, STATE_STREAM, 2, 0)
        chart = states.eigen_chart(states.random_rank_r_state(4, 2, state_seed), 2)
        info = fisher.fisher_design(
            chart, designs.pauli_design(designs.enumerate_pauli_settings(2))
        )

        self.assertEqual(output[0].state_seed, state_seed)
        self.assertAlmostEqual(
            output[0].value, fisher.asymptotic_mse(info, fisher.weight_matrix(chart), 900), delta=1e-12
        )

    def test_designs_shared_between_states(self):
        output = experiments.settings_sweep(2, [1], [4], states=2, designs=1, N=900, seed=5)

        self.assertEqual(output[0].design, output[1].design)
        self.assertNotEqual(output[0].state_seed, output[1].state_seed)

    def test_few_settings_cost_little(self):
        output = experiments.settings_sweep(
            4, [1, 3], [20, 81], states=10, designs=10, N=8100, seed=42
        )

        self.assertTrue(all(record.status == records.STATUS_OK for record in output))
        self.assertLessEqual(mean_at_k(output, 1, 20), 1.10 * mean_at_k(output, 1, 81))
        self.assertLessEqual(mean_at_k(output, 3, 20), 1.15 * mean_at_k(output, 3, 81))

    def test_full_design_is_never_worse(self):
        output = experiments.settings_sweep(
            3, [1, 2], [5, 10, 27], states=3, designs=10, N=2700, seed=23
        )

        for r in (1, 2):
            for s in range(3):
                at_k = {
                    k: [
                        record.value
                        for record in output
                        if record.r == r
                        and record.cell[1] == s
                        and record.cell[2] == k
                        and record.status == records.STATUS_OK
                    ]
                    for k in (5, 10, 27)
                }
                full = at_k[27][0]
                for k in (5, 10):
                    reduced = at_k[k]
                    self.assertGreaterEqual(len(reduced), 2)
                    stderr = np.std(reduced, ddof=1) / np.sqrt(len(reduced))
                    self.assertLessEqual(full, np.mean(reduced) + 2 * stderr)

    def test_workers_do_not_change_records(self):
        first = experiments.settings_sweep(2, [1, 2], [2, 5], states=2, designs=2, N=900, seed=6)
        second = experiments.settings_sweep(
            2, [1, 2], [2, 5], states=2, designs=2, N=900, seed=6, workers=2
        )

        self.assertEqual(first, second)

    def test_replay(self):
        experiment = experiments.SettingsSweep(2, [1, 2], [4], 900, states=2, designs=2, seed=7)
        output = experiment.run()

        for record in (output[0], output[5], output[-1]):
            self.assertEqual(experiment.replay(record), record)

    def test_replay_unknown_cell(self):
        experiment = experiments.SettingsSweep(2, [1], [4], 900, states=1, designs=1, seed=7)
        record = experiment.run()[0]
        record.cell = [1, 0, 4, 5]

        with self.assertRaises(KeyError):
            experiment.replay(record)


class TestMlVsFisher(unittest.TestCase):
    def test_agrees_with_fisher_prediction(self):
        output = experiments.ml_vs_fisher(2, 1, [6], N=600, reps=30, seed=8, designs=10)
        errors = [record.value for record in output if record.status == records.STATUS_OK]

        self.assertEqual(len(output), 10)
        self.assertEqual(output[0].m, 100)
        self.assertLessEqual(np.mean(errors), 0.15)
        self.assertIn("mse_fisher", output[0].aux)
        self.assertIn("mse_ml", output[0].aux)

    def test_non_identifiable_design_skips_simulation(self):
        output = experiments.ml_vs_fisher(1, 1, [1], N=100, reps=2, seed=9)

        self.assertEqual(output[0].status, records.STATUS_NON_IDENTIFIABLE)
        self.assertNotIn("mse_ml", output[0].aux)


class TestHaarConcentration(unittest.TestCase):
    def test_single_basis(self):
        output = experiments.haar_concentration(4, [1], [1], seed=10)
        spectrum = np.array(output[0].aux["spectrum"])

        self.assertEqual(output[0].status, records.STATUS_NON_IDENTIFIABLE)
        self.assertLessEqual(np.sum(spectrum > 1e-9), 3)

    def test_spectrum_concentrates(self):
        output = experiments.haar_concentration(4, [2], [5000], seed=11)
        spectrum = np.array(output[0].aux["spectrum"])
        distance = np.minimum(np.abs(spectrum - 1), np.abs(spectrum - 2 / 3))

        self.assertLessEqual(np.max(distance), 0.15)
        self.assertAlmostEqual(output[0].value, 1, delta=0.15)
        self.assertEqual(output[0].cell, [2, 5000, 0])

    def test_record_count(self):
        experiment = experiments.HaarConcentration(4, [1, 2, 3], [5, 10], designs=2, seed=12)

        self.assertEqual(len(experiment.run()), 12)


class TestPauliRelativeError(unittest.TestCase):
    def test_all_settings(self):
        output = experiments.pauli_relative_error(2, 1, [9], designs=2, seed=13)

        for record in output:
            self.assertAlmostEqual(record.value, 1, delta=1e-12)

    def test_twenty_settings_at_four_qubits(self):
        output = experiments.pauli_relative_error(4, 1, [20], designs=100, seed=14)
        mean = np.mean([record.value for record in output])

        self.assertGreaterEqual(mean, 0.95)
        self.assertLessEqual(mean, 1.10)

    def test_few_settings(self):
        output = experiments.pauli_relative_error(2, 1, [1], designs=1, seed=15)

        self.assertEqual(output[0].status, records.STATUS_NON_IDENTIFIABLE)

    def test_boundary_singularity_becomes_failed_records(self):
        error = fisher.BoundarySingularityError("Zero probability with a non-zero gradient", "xx", 0)

        with mock.patch.object(fisher, "fisher_single", side_effect=error):
            output = experiments.pauli_relative_error(2, 1, [3], designs=2, seed=22)

        self.assertEqual(len(output), 2)
        self.assertEqual([record.cell for record in output], [[3, 0], [3, 1]])
        for record in output:
            self.assertEqual(record.status, records.STATUS_FAILED)
            self.assertIn("Zero probability", record.aux["error"])


class TestMinEigenvalueStudy(unittest.TestCase):
    def test_unrotated_qubit(self):
        output = experiments.min_eigenvalue_study([1], [1], 1, seed=16, rotate=False)

        self.assertAlmostEqual(output[0].value, 2 / 3)
        self.assertIsNone(output[0].state_seed)

    def test_grows_with_dimension(self):
        output = experiments.min_eigenvalue_study([4, 5], [1, 2, 3], 10, seed=17)

        self.assertTrue(all(record.value > 0.05 for record in output))
        for r in (2, 3):
            four = np.mean(values(output, n=4, r=r))
            five = np.mean(values(output, n=5, r=r))
            self.assertGreater(five, four)

    def test_ranks_above_dimension_rejected(self):
        with self.assertRaises(states.InvalidRankError):
            experiments.MinEigenvalueStudy([1, 2], [1, 3], 2, seed=18)

    def test_record_count(self):
        experiment = experiments.MinEigenvalueStudy([1, 2], [1, 2], 2, seed=18)
        output = experiment.run()

        self.assertEqual(len(output), 8)
        self.assertEqual(experiment.expected_count(), 8)

    def test_needs_stretch(self):
        with self.assertRaises(ValueError):
            experiments.min_eigenvalue_study([7], [1], 1, seed=19)


class TestCoarseGrainedSweep(unittest.TestCase):
    def test_record_count(self):
        experiment = experiments.CoarseGrainedSweep(
            2, [1], [3, 15], 900, states=2, designs=2, compare_fine=True, seed=20
        )
        output = experiment.run()
        fine = [record for record in output if record.metric == "fine_full_mse"]

        self.assertEqual(len(output), 10)
        self.assertEqual(len(output), experiment.expected_count())
        self.assertEqual(len(fine), 2)
        self.assertEqual(fine[0].cell, [1, 0, "fine"])

    def test_coarse_much_worse_than_fine(self):
        output = experiments.coarse_grained_sweep(
            4, [1], [255], 255 * 81, states=1, designs=1, seed=21, compare_fine=True
        )
        coarse, fine = output

        self.assertEqual(coarse.aux["N_eff"], fine.aux["N_eff"])
        self.assertGreaterEqual(coarse.value / fine.value, 5)


class TestCreate(unittest.TestCase):
    def test_every_experiment_subcommand(self):
        for subcommand in experiments.EXPERIMENTS:
            experiment = experiments.create(subcommand, options.validate(subcommand, {}), seed=1)
            self.assertEqual(experiment.subcommand, subcommand)

    def test_unknown(self):
        with self.assertRaises(KeyError):
            experiments.create("fisher", {})
