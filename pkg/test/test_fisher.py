import math
import unittest
from unittest import mock

import numpy as np
from numpy.testing import assert_allclose

from tomofisher import designs, fisher, states

CLOSED_FORM_CASES = [(2, 1), (4, 1), (4, 2), (8, 3)]


def base_chart(d, r):
    return states.LocalChart(np.full(r, 1.0 / r), np.eye(d))


def closed_form(chart, diagonal, off_diagonal, inside, cross):
    """ Block matrix with the dd block and the diagonal real/imaginary entries given. """
    r = chart.rank
    matrix = np.zeros((chart.num_params, chart.num_params))
    matrix[: r - 1, : r - 1] = off_diagonal
    np.fill_diagonal(matrix[: r - 1, : r - 1], diagonal)
    pairs = np.where(chart.pair_cols < r, inside, cross)
    offset = r - 1
    for block in range(2):
        indices = offset + block * chart.num_pairs + np.arange(chart.num_pairs)
        matrix[indices, indices] = pairs
    return matrix


class TestWeightMatrix(unittest.TestCase):
    def test_pure_qubit(self):
        assert_allclose(fisher.weight_matrix(base_chart(2, 1)), np.diag([2, 2]))

    def test_full_rank_qubit(self):
        assert_allclose(fisher.weight_matrix(base_chart(2, 2)), 2 * np.eye(3))

    def test_rank_three_block(self):
        weight = fisher.weight_matrix(base_chart(4, 3))

        assert_allclose(weight[:2, :2], [[2, 1], [1, 2]])
        assert_allclose(fisher.weight_matrix(base_chart(5, 4))[:3, :3], [[2, 1, 1], [1, 2, 1], [1, 1, 2]])
        assert_allclose(weight[2:, 2:], 2 * np.eye(weight.shape[0] - 2))
        assert_allclose(weight[:2, 2:], 0)

    def test_closed_forms(self):
        for d, r in CLOSED_FORM_CASES:
            chart = base_chart(d, r)
            expected = closed_form(chart, 2, 1, 2, 2)
            assert_allclose(fisher.weight_matrix(chart), expected, atol=1e-10)

    def test_matches_trace_definition(self):
        chart = states.eigen_chart(states.random_rank_r_state(4, 2, seed=3), 2)
        derivatives = chart.derivative_matrices()
        expected = np.einsum("aij,bji->ab", derivatives, derivatives).real

        assert_allclose(fisher.weight_matrix(chart), expected, atol=1e-12)

    def test_local_quadratic_form(self):
        rng = np.random.default_rng(5)
        for trial in range(100):
            d = int(rng.choice([2, 4, 8]))
            r = int(rng.integers(1, d + 1))
            chart = states.eigen_chart(states.random_rank_r_state(d, r, seed=trial), r)
            weight = fisher.weight_matrix(chart)
            direction = rng.standard_normal(chart.num_params)
            delta = direction / np.linalg.norm(direction) * 10 ** rng.uniform(-4, -2)

            distance = states.frobenius_sq_dist(
                states.chart_embed(chart, chart.theta0 + delta),
                states.chart_embed(chart, chart.theta0),
            )
            self.assertLessEqual(
                abs(distance - delta @ weight @ delta), 10 * np.linalg.norm(delta) ** 3
            )


class TestClassicalFisher(unittest.TestCase):
    def setUp(self):
        self.chart = states.eigen_chart(np.diag([1.0, 0.0]), 1)

    def test_x(self):
        assert_allclose(
            fisher.fisher_single(self.chart, designs.pauli_setting("x")), np.diag([4, 0]), atol=1e-12
        )

    def test_y(self):
        assert_allclose(
            fisher.fisher_single(self.chart, designs.pauli_setting("y")), np.diag([0, 4]), atol=1e-12
        )

    def test_z(self):
        assert_allclose(
            fisher.fisher_single(self.chart, designs.pauli_setting("z")), 0, atol=1e-12
        )

    def test_boundary_singularity(self):
        # at theta = (0.5, 0) the second basis vector has zero probability but not zero gradient
        setting = designs.haar_setting(np.array([[1, -1], [1, 1]]) / np.sqrt(2))

        with self.assertRaises(fisher.BoundarySingularityError) as context:
            fisher.fisher_single(self.chart, setting, theta=[0.5, 0.0])

        self.assertEqual(context.exception.outcome, 1)

    def test_design_means(self):
        xy = designs.pauli_design(["x", "y"])
        xyz = designs.pauli_design(["x", "y", "z"])

        assert_allclose(fisher.fisher_design(self.chart, xy), np.diag([2, 2]), atol=1e-12)
        assert_allclose(fisher.fisher_design(self.chart, xyz), np.diag([4, 4]) / 3, atol=1e-12)

    def test_single_setting_design(self):
        chart = states.eigen_chart(states.random_rank_r_state(4, 2, seed=1), 2)
        setting = designs.pauli_setting("xz")

        assert_allclose(
            fisher.fisher_design(chart, designs.Design("pauli", [setting])),
            fisher.fisher_single(chart, setting),
        )

    def test_symmetric_psd(self):
        chart = states.eigen_chart(states.random_rank_r_state(8, 2, seed=2), 2)
        for setting in designs.sample_settings(3, 5, False, seed=2):
            info = fisher.fisher_single(chart, setting)
            assert_allclose(info, info.T, atol=1e-10)
            self.assertGreaterEqual(np.linalg.eigvalsh(info)[0], -1e-10)

    def test_workers_do_not_change_result(self):
        chart = states.eigen_chart(states.random_rank_r_state(8, 2, seed=4), 2)
        design = designs.sample_settings(3, 12, False, seed=4)

        np.testing.assert_array_equal(
            fisher.fisher_design(chart, design, workers=1),
            fisher.fisher_design(chart, design, workers=2),
        )

    def test_monotone_in_settings(self):
        chart = states.eigen_chart(states.random_rank_r_state(4, 1, seed=6), 1)
        labels = designs.enumerate_pauli_settings(2)
        previous = np.zeros((chart.num_params, chart.num_params))
        for k in range(1, len(labels) + 1):
            total = k * fisher.fisher_design(chart, designs.pauli_design(labels[:k]))
            self.assertGreaterEqual(np.linalg.eigvalsh(total - previous)[0], -1e-9)
            previous = total


class TestCoarseFisher(unittest.TestCase):
    def test_qubit_observables(self):
        chart = states.eigen_chart(np.diag([1.0, 0.0]), 1)

        assert_allclose(fisher.fisher_coarse(chart, ["x"]), np.diag([4, 0]), atol=1e-12)
        assert_allclose(fisher.fisher_coarse(chart, ["z"]), 0, atol=1e-12)

    def test_qubit_coarse_equals_fine(self):
        chart = states.eigen_chart(states.random_rank_r_state(2, 1, seed=3), 1)

        assert_allclose(
            fisher.fisher_coarse(chart, ["x", "y", "z"]),
            fisher.fisher_design(chart, designs.pauli_design(["x", "y", "z"])),
            atol=1e-14,
        )

    def test_data_processing(self):
        for seed in range(10):
            chart = states.eigen_chart(states.random_rank_r_state(4, 2, seed=seed), 2)
            fine = fisher.fisher_single(chart, designs.pauli_setting("zz"))
            coarse = fisher.fisher_coarse(chart, ["zz"])
            self.assertGreaterEqual(np.linalg.eigvalsh(fine - coarse)[0], -1e-9)

    def test_coarse_much_worse_than_fine(self):
        rho = states.random_rank_r_state(16, 1, seed=21)
        chart = states.eigen_chart(rho, 1)
        weight = fisher.weight_matrix(chart)
        fine = fisher.fisher_design(
            chart, designs.pauli_design(designs.enumerate_pauli_settings(4))
        )
        coarse = fisher.fisher_coarse(chart, designs.enumerate_pauli_observables(4))

        ratio = fisher.information_trace(coarse, weight) / fisher.information_trace(fine, weight)

        self.assertGreaterEqual(ratio, 5)


class TestQuantumFisher(unittest.TestCase):
    def test_closed_forms(self):
        for d, r in CLOSED_FORM_CASES:
            chart = base_chart(d, r)
            expected = closed_form(chart, 2 * r, r, 2 * r, 4 * r)
            assert_allclose(fisher.quantum_fisher(chart), expected, atol=1e-10)

    def test_pure_qubit(self):
        chart = states.eigen_chart(np.diag([1.0, 0.0]), 1)

        assert_allclose(fisher.quantum_fisher(chart), np.diag([4, 4]), atol=1e-12)

    def test_singular_state(self):
        with self.assertRaises(fisher.SingularStateError):
            fisher.quantum_fisher(states.LocalChart([1.0, 0.0], np.eye(2)))

    def test_dominates_classical(self):
        rng = np.random.default_rng(13)
        for trial in range(100):
            n = int(rng.integers(1, 4))
            d = 2 ** n
            r = int(rng.integers(1, d + 1))
            chart = states.eigen_chart(states.random_rank_r_state(d, r, seed=trial), r)
            label = "".join(rng.choice(list("xyz"), size=n))
            gap = fisher.quantum_fisher(chart) - fisher.fisher_single(
                chart, designs.pauli_setting(label)
            )
            self.assertGreaterEqual(np.linalg.eigvalsh(gap)[0], -1e-9)

    def test_whitened_structure(self):
        for d, r in CLOSED_FORM_CASES:
            chart = base_chart(d, r)
            info = fisher.quantum_fisher(chart)
            whitened, _, _ = fisher.whiten(info, fisher.weight_matrix(chart))
            expected = np.diag(np.concatenate([np.full(r - 1, r), np.diag(info)[r - 1 :] / 2]))
            assert_allclose(whitened, expected, atol=1e-10)


class TestMeanHaarFisher(unittest.TestCase):
    def test_closed_forms(self):
        for d, r in CLOSED_FORM_CASES:
            chart = base_chart(d, r)
            s = r / (r + 1)
            expected = closed_form(chart, 2 * s, s, 2 * s, 2)
            assert_allclose(fisher.mean_haar_fisher(d, r), expected, atol=1e-10)

    def test_pure_qubit(self):
        assert_allclose(fisher.mean_haar_fisher(2, 1), np.diag([2, 2]))

    def test_rank_two_of_four(self):
        mean = fisher.mean_haar_fisher(4, 2)
        chart = base_chart(4, 2)

        self.assertAlmostEqual(mean[0, 0], 4 / 3)
        inside = 1 + list(zip(chart.pair_rows, chart.pair_cols)).index((0, 1))
        cross = 1 + list(zip(chart.pair_rows, chart.pair_cols)).index((0, 2))
        self.assertAlmostEqual(mean[inside, inside], 4 / 3)
        self.assertAlmostEqual(mean[cross, cross], 2)

    def test_full_rank_rejected(self):
        with self.assertRaises(states.InvalidRankError):
            fisher.mean_haar_fisher(2, 2)

    def test_monte_carlo(self):
        for r, bases in ((1, 5000), (2, 20000)):
            chart = base_chart(4, r)
            design = designs.haar_basis_design(4, bases, seed=100 + r)
            sampled = fisher.fisher_design(chart, design)
            exact = fisher.mean_haar_fisher(4, r)
            nonzero = exact != 0

            assert_allclose(sampled[nonzero], exact[nonzero], rtol=0.02, atol=0)
            assert_allclose(
                sampled[~nonzero], 0, rtol=0, atol=0.02 * np.max(np.abs(exact))
            )


class TestWhiten(unittest.TestCase):
    def test_pure_haar_mean(self):
        for d in (2, 4, 8):
            chart = base_chart(d, 1)
            whitened, low, high = fisher.whiten(
                fisher.mean_haar_fisher(d, 1), fisher.weight_matrix(chart)
            )
            assert_allclose(whitened, np.eye(chart.num_params), atol=1e-12)
            self.assertAlmostEqual(low, 1)
            self.assertAlmostEqual(high, 1)

    def test_mixed_haar_mean(self):
        for r in (2, 3):
            chart = base_chart(8, r)
            whitened, _, _ = fisher.whiten(
                fisher.mean_haar_fisher(8, r), fisher.weight_matrix(chart)
            )
            eigenvalues = np.linalg.eigvalsh(whitened)
            distance = np.minimum(np.abs(eigenvalues - 1), np.abs(eigenvalues - r / (r + 1)))
            self.assertLessEqual(np.max(distance), 1e-10)

    def test_weight_by_itself(self):
        weight = fisher.weight_matrix(base_chart(4, 3))
        whitened, _, _ = fisher.whiten(weight, weight)

        assert_allclose(whitened, np.eye(weight.shape[0]), atol=1e-12)

    def test_not_positive_definite(self):
        with self.assertRaises(fisher.NotPositiveDefiniteError):
            fisher.whiten(np.eye(2), np.diag([1.0, 0.0]))

    def test_cached_inverse_square_root(self):
        chart = base_chart(4, 2)
        root = fisher.weight_inverse_sqrt(chart)

        assert_allclose(root @ fisher.weight_matrix(chart) @ root, np.eye(chart.num_params), atol=1e-12)
        self.assertIs(root, fisher.weight_inverse_sqrt(base_chart(4, 2)))

    def test_given_root_is_used(self):
        chart = base_chart(4, 2)
        info = fisher.mean_haar_fisher(4, 2)
        weight = fisher.weight_matrix(chart)
        root = fisher.weight_inverse_sqrt(chart)
        expected, low, high = fisher.whiten(info, weight)

        with mock.patch.object(fisher, "inverse_sqrt") as inverse_sqrt:
            whitened, given_low, given_high = fisher.whiten(info, weight, root)

        inverse_sqrt.assert_not_called()
        assert_allclose(whitened, expected, atol=1e-12)
        self.assertAlmostEqual(given_low, low)
        self.assertAlmostEqual(given_high, high)


class TestAsymptoticMse(unittest.TestCase):
    def test_examples(self):
        weight = np.diag([2.0, 2.0])

        self.assertAlmostEqual(fisher.asymptotic_mse(np.diag([2.0, 2.0]), weight, 1), 2)
        self.assertAlmostEqual(fisher.asymptotic_mse(np.diag([4 / 3, 4 / 3]), weight, 1), 3)
        self.assertAlmostEqual(fisher.asymptotic_mse(np.diag([4 / 3, 4 / 3]), weight, 900), 3 / 900)

    def test_singular(self):
        result = fisher.asymptotic_mse(np.diag([4.0, 0.0]), np.diag([2.0, 2.0]), 100)

        self.assertIsInstance(result, fisher.NonIdentifiable)
        self.assertEqual(result.min_eigenvalue, 0)
        self.assertEqual(result.max_eigenvalue, 4)

    def test_removing_a_setting_of_a_full_rank_model(self):
        chart = states.eigen_chart(states.random_rank_r_state(2, 2, seed=8), 2)
        info = fisher.fisher_design(chart, designs.pauli_design(["x", "y"]))

        self.assertIsInstance(
            fisher.asymptotic_mse(info, fisher.weight_matrix(chart), 100), fisher.NonIdentifiable
        )

    def test_invalid_sample_size(self):
        with self.assertRaises(ValueError):
            fisher.asymptotic_mse(np.eye(2), np.eye(2), 0)

    def test_congruence_invariance(self):
        rng = np.random.default_rng(3)
        chart = states.eigen_chart(states.random_rank_r_state(4, 2, seed=3), 2)
        info = fisher.fisher_design(chart, designs.pauli_design(designs.enumerate_pauli_settings(2)))
        weight = fisher.weight_matrix(chart)
        transform = rng.standard_normal(info.shape) + 3 * np.eye(info.shape[0])

        self.assertAlmostEqual(
            fisher.asymptotic_mse(transform.T @ info @ transform, transform.T @ weight @ transform, 1)
            / fisher.asymptotic_mse(info, weight, 1),
            1,
            delta=1e-8,
        )


class TestRelativeError(unittest.TestCase):
    def setUp(self):
        self.chart = states.eigen_chart(np.diag([1.0, 0.0]), 1)
        self.weight = fisher.weight_matrix(self.chart)
        self.haar = fisher.mean_haar_fisher(2, 1)

    def test_same_matrix(self):
        self.assertAlmostEqual(fisher.relative_error(self.haar, self.haar, self.weight), 1)

    def test_two_settings(self):
        info = fisher.fisher_design(self.chart, designs.pauli_design(["x", "y"]))

        self.assertAlmostEqual(fisher.relative_error(info, self.haar, self.weight), 1)

    def test_three_settings(self):
        info = fisher.fisher_design(self.chart, designs.pauli_design(["x", "y", "z"]))

        self.assertAlmostEqual(fisher.relative_error(info, self.haar, self.weight), 1.5)

    def test_singular(self):
        info = fisher.fisher_single(self.chart, designs.pauli_setting("x"))

        self.assertIsInstance(
            fisher.relative_error(info, self.haar, self.weight), fisher.NonIdentifiable
        )


class TestChernoff(unittest.TestCase):
    def test_regression(self):
        self.assertEqual(fisher.chernoff_k(0.05, 0.1, 1, 16), 14189)

    def test_epsilon_scaling(self):
        k = fisher.chernoff_k(0.05, 0.1, 2, 8)
        halved = fisher.chernoff_k(0.025, 0.1, 2, 8)

        self.assertLessEqual(abs(halved - 4 * k), 4)

    def test_delta_shift(self):
        k = fisher.chernoff_k(0.1, 0.1, 1, 16)
        shifted = fisher.chernoff_k(0.1, 0.1 / math.e, 1, 16)
        constant = 4 * math.log(2) / 0.1 ** 2 * 2

        self.assertLessEqual(abs(shifted - k - constant), 1)

    def test_out_of_range(self):
        for arguments in [(0, 0.1, 1, 2), (0.6, 0.1, 1, 2), (0.1, 1.0, 1, 2), (0.1, 0.1, 3, 2)]:
            with self.assertRaises(ValueError):
                fisher.chernoff_k(*arguments)

    def test_failure_probability(self):
        k = fisher.chernoff_k(0.1, 0.05, 2, 8)

        self.assertLessEqual(fisher.chernoff_failure_probability(k, 0.1, 2, 8), 0.05)
        self.assertGreater(fisher.chernoff_failure_probability(k - 1, 0.1, 2, 8), 0.05)


class TestSpectrumBounds(unittest.TestCase):
    def test_pure_qubit(self):
        chart = states.eigen_chart(np.diag([1.0, 0.0]), 1)
        bounds = fisher.whitened_spectrum_bounds(chart, designs.pauli_design(["x", "y", "z"]))

        self.assertAlmostEqual(bounds.max_single, 2)
        self.assertAlmostEqual(bounds.min_mean, 2 / 3)
        self.assertAlmostEqual(bounds.ratio, 3)
        self.assertAlmostEqual(bounds.quantum_max, 2)

    def test_singular_design(self):
        chart = states.eigen_chart(np.diag([1.0, 0.0]), 1)
        bounds = fisher.whitened_spectrum_bounds(chart, designs.pauli_design(["x"]))

        self.assertEqual(bounds.ratio, math.inf)

    def test_precomputed_terms(self):
        chart = base_chart(4, 2)
        design = designs.haar_basis_design(4, 5, seed=3)
        terms = fisher.fisher_terms(chart, design)
        expected = fisher.whitened_spectrum_bounds(chart, design)

        with mock.patch.object(fisher, "fisher_single") as fisher_single:
            bounds = fisher.whitened_spectrum_bounds(chart, design, terms=terms)

        fisher_single.assert_not_called()
        self.assertEqual(bounds, expected)
        assert_allclose(
            fisher.average_information(terms), fisher.fisher_design(chart, design), atol=1e-15
        )
