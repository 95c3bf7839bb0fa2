import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eigenshape import coeff


def lame_oracle(k):
    """Kronecker-delta construction written out longhand."""
    entries = np.zeros((2, 2, 2, 2))
    for i in range(2):
        for j in range(2):
            for a in range(2):
                for b in range(2):
                    entries[i, j, a, b] = (i == j) * (a == b) + k * (i == a) * (j == b)
    return entries


def energy_oracle(t, grad):
    total = 0.0
    for i in range(t.m):
        for j in range(t.m):
            for a in range(t.n):
                for b in range(t.n):
                    total += t.entries[i, j, a, b] * grad[i, a] * grad[j, b]
    return total


def lh_sweep_oracle(t, n_angles=720):
    """Dense angular sweep over both unit circles (m = 2 only)."""
    phis = np.pi * np.arange(n_angles) / n_angles
    best = np.inf
    etas = np.column_stack([np.cos(phis), np.sin(phis)])
    xis = etas
    for eta in etas:
        a_eta = np.einsum("ijab,a,b->ij", t.entries, eta, eta)
        vals = np.einsum("xi,ij,xj->x", xis, a_eta, xis)
        best = min(best, vals.min())
    return best


class TestLaplacian:
    def test_scalar_entries(self):
        t = coeff.make_laplacian(1)
        assert t.m == 1 and t.n == 2
        assert np.array_equal(t.entries[0, 0], np.eye(2))

    def test_two_components_decoupled(self):
        t = coeff.make_laplacian(2)
        for i in range(2):
            assert np.array_equal(t.entries[i, i], np.eye(2))
        assert np.all(t.entries[0, 1] == 0) and np.all(t.entries[1, 0] == 0)

    def test_zero_components_rejected(self):
        with pytest.raises(ValueError):
            coeff.make_laplacian(0)


class TestLame:
    def test_k0_is_laplacian(self):
        assert np.array_equal(coeff.make_lame(0.0).entries, coeff.make_laplacian(2).entries)

    def test_k1_matches_delta_formula(self):
        t = coeff.make_lame(1.0)
        assert np.array_equal(t.entries, lame_oracle(1.0))
        assert t.entries[0, 0, 0, 0] == 2.0
        assert t.entries[1, 1, 1, 1] == 2.0
        assert t.entries[0, 0, 1, 1] == 1.0
        assert t.entries[1, 1, 0, 0] == 1.0
        assert t.entries[0, 1, 0, 1] == 1.0
        assert t.entries[1, 0, 1, 0] == 1.0

    def test_negative_k_rejected(self):
        with pytest.raises(ValueError):
            coeff.make_lame(-0.5)

    def test_symmetry(self):
        assert coeff.check_symmetry(coeff.make_lame(1.0))


class TestSymmetry:
    def test_presets_symmetric(self):
        for t in (coeff.make_laplacian(1), coeff.make_laplacian(3), coeff.make_lame(2.5)):
            assert coeff.check_symmetry(t)

    def test_broken_pair_detected(self):
        entries = np.zeros((2, 2, 2, 2))
        entries[0, 1, 0, 0] = 1.0  # a^{12}_{11} without its a^{21}_{11} partner
        assert not coeff.check_symmetry(coeff.CoefficientTensor(entries))


class TestLegendreHadamard:
    def test_scalar_laplacian_is_one(self):
        assert coeff.legendre_hadamard_constant(coeff.make_laplacian(1)) == pytest.approx(1.0, abs=1e-9)

    @pytest.mark.parametrize("k", [0.0, 0.5, 1.0, 2.0, 10.0])
    def test_lame_constant_is_one(self, k):
        # The form is |xi|^2 |eta|^2 + k (xi . eta)^2, minimized at xi
        # orthogonal to eta, independent of k.
        theta = coeff.legendre_hadamard_constant(coeff.make_lame(k))
        assert theta == pytest.approx(1.0, abs=1e-9)

    def test_lame_vs_dense_sweep(self):
        t = coeff.make_lame(1.0)
        sweep = lh_sweep_oracle(t)
        assert coeff.legendre_hadamard_constant(t) == pytest.approx(sweep, abs=1e-6)

    def test_negated_laplacian(self):
        t = coeff.CoefficientTensor(-coeff.make_laplacian(1).entries)
        assert coeff.legendre_hadamard_constant(t) == pytest.approx(-1.0, abs=1e-9)


class TestEnergyDensity:
    def test_scalar_unit_gradient(self):
        t = coeff.make_laplacian(1)
        assert coeff.energy_density(t, np.array([[1.0, 0.0]])) == pytest.approx(1.0)

    def test_lame_identity_gradient(self):
        # |G|^2 + k (tr G)^2 with G = I and k = 1 gives 2 + 4.
        t = coeff.make_lame(1.0)
        assert coeff.energy_density(t, np.eye(2)) == pytest.approx(6.0, abs=1e-14)

    def test_zero_gradient(self):
        assert coeff.energy_density(coeff.make_lame(3.0), np.zeros((2, 2))) == 0.0

    def test_matches_index_sum_oracle(self, rng):
        t = coeff.make_lame(0.7)
        for _ in range(10):
            grad = rng.standard_normal((2, 2))
            assert coeff.energy_density(t, grad) == pytest.approx(
                energy_oracle(t, grad), rel=1e-13
            )

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            coeff.energy_density(coeff.make_laplacian(1), np.eye(2))

    @settings(max_examples=50, deadline=None)
    @given(c=st.floats(-1e3, 1e3, allow_nan=False))
    def test_quadratic_scaling(self, c):
        t = coeff.make_lame(1.0)
        grad = np.array([[0.3, -1.2], [0.5, 2.0]])
        base = coeff.energy_density(t, grad)
        assert coeff.energy_density(t, c * grad) == pytest.approx(
            c * c * base, rel=1e-12, abs=1e-9
        )

    def test_rank_one_lower_bound(self, rng):
        for t in (coeff.make_laplacian(2), coeff.make_lame(1.5)):
            theta = coeff.legendre_hadamard_constant(t)
            for _ in range(50):
                xi = rng.standard_normal(t.m)
                eta = rng.standard_normal(t.n)
                value = coeff.energy_density(t, np.outer(xi, eta))
                bound = theta * (xi @ xi) * (eta @ eta)
                assert value >= bound - 1e-9


class TestApplyOperatorQuadratic:
    def test_scalar_identity_hessian(self):
        out = coeff.apply_operator_quadratic(coeff.make_laplacian(1), [np.eye(2)])
        assert out == pytest.approx([-2.0])

    def test_lame_example(self):
        # H_1 = diag(2, 0), H_2 = 0: component 1 is -(tr H_1 + k H_1[0,0]),
        # component 2 is -k H_1[0,1] = 0.
        out = coeff.apply_operator_quadratic(
            coeff.make_lame(1.0), [np.diag([2.0, 0.0]), np.zeros((2, 2))]
        )
        assert out == pytest.approx([-4.0, 0.0])

    def test_matches_index_sum_oracle(self, rng):
        t = coeff.make_lame(2.0)
        for _ in range(10):
            hess = rng.standard_normal((2, 2, 2))
            hess = 0.5 * (hess + np.transpose(hess, (0, 2, 1)))
            expected = [
                -sum(
                    t.entries[i, j, a, b] * hess[i, a, b]
                    for i in range(2)
                    for a in range(2)
                    for b in range(2)
                )
                for j in range(2)
            ]
            assert coeff.apply_operator_quadratic(t, hess) == pytest.approx(expected)

    def test_zero_hessians(self):
        out = coeff.apply_operator_quadratic(coeff.make_lame(1.0), np.zeros((2, 2, 2)))
        assert np.all(out == 0.0)

    def test_asymmetric_hessian_rejected(self):
        with pytest.raises(ValueError):
            coeff.apply_operator_quadratic(
                coeff.make_laplacian(1), [np.array([[0.0, 1.0], [0.0, 0.0]])]
            )


class TestTensorLiterals:
    def test_presets(self):
        assert coeff.parse_tensor_literal("laplacian:3").m == 3
        assert coeff.parse_tensor_literal("lame:1.5").entries[0, 0, 0, 0] == pytest.approx(2.5)

    def test_records_round_trip(self):
        t = coeff.make_lame(1.0)
        records = [
            {"i": i + 1, "j": j + 1, "alpha": a + 1, "beta": b + 1,
             "value": t.entries[i, j, a, b]}
            for i in range(2) for j in range(2) for a in range(2) for b in range(2)
            if t.entries[i, j, a, b] != 0
        ]
        rebuilt = coeff.parse_tensor_literal(records, m=2)
        assert np.array_equal(rebuilt.entries, t.entries)

    def test_list_records(self):
        t = coeff.parse_tensor_literal([[1, 1, 1, 1, 1.0], [1, 1, 2, 2, 1.0]], m=1)
        assert np.array_equal(t.entries[0, 0], np.eye(2))

    def test_bad_preset(self):
        with pytest.raises(ValueError):
            coeff.parse_tensor_literal("helmholtz:1")

    def test_out_of_range_record(self):
        with pytest.raises(ValueError):
            coeff.parse_tensor_literal([[3, 1, 1, 1, 1.0]], m=2)
