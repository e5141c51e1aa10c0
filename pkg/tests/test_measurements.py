import numpy as np
import pytest

from decoguard.measurements import (
    Branch,
    BranchEnsemble,
    MeasurementPair,
    flips,
    measure,
    partial_measure,
    post_wm_ops,
    povm_axis,
    povm_generalized,
    pre_wm_pair,
    qmr_map,
    rotation,
    wm_map,
)
from decoguard.qmath import (
    KET_0,
    KET_PLUS,
    density_to_bloch,
    projector,
    state_from_angles,
    InitialState,
)

THETA_GRID = np.linspace(0, np.pi / 2, 31)
BETA_GRID = np.linspace(0, 2 * np.pi, 8, endpoint=False)
RHO_PLUS = projector(KET_PLUS)
RHO_0 = projector(KET_0)
RHO_1 = np.diag([0.0, 1.0]).astype(complex)


def completeness_error(pair):
    total = sum(m.conj().T @ m for m in pair.ops)
    return np.abs(total - np.eye(2)).max()


class TestPovmAxis:
    @pytest.mark.parametrize("axis", ["x", "y", "z"])
    def test_completeness_full_grid(self, axis):
        for theta in THETA_GRID:
            assert completeness_error(povm_axis(axis, theta)) < 1e-12

    @pytest.mark.parametrize("axis", ["x", "y", "z"])
    def test_zero_strength_is_identity_pair(self, axis):
        pair = povm_axis(axis, np.pi / 2)
        for op in pair.ops:
            assert np.abs(op - np.eye(2) / np.sqrt(2)).max() < 1e-12

    def test_projective_z(self):
        pair = povm_axis("z", 0.0)
        assert np.allclose(pair.ops[0], RHO_0, atol=1e-15)
        assert np.allclose(pair.ops[1], RHO_1, atol=1e-15)

    def test_projective_z_on_plus(self):
        ens = measure(RHO_PLUS, povm_axis("z", 0.0))
        weights = [b.weight for b in ens.branches]
        assert weights == pytest.approx([0.5, 0.5], abs=1e-12)
        assert np.allclose(ens.branches[0].state / 0.5, RHO_0, atol=1e-12)
        assert np.allclose(ens.branches[1].state / 0.5, RHO_1, atol=1e-12)

    def test_theta_out_of_range(self):
        with pytest.raises(ValueError):
            povm_axis("z", 2.0)
        with pytest.raises(ValueError):
            povm_axis("w", 0.3)


class TestPovmGeneralized:
    def test_completeness_grid(self):
        for theta in THETA_GRID:
            for beta in BETA_GRID:
                assert completeness_error(povm_generalized(theta, beta)) < 1e-12

    def test_beta_zero_reduces_to_z_pair(self):
        for theta in THETA_GRID[::6]:
            gen = povm_generalized(theta, 0.0)
            axis = povm_axis("z", theta)
            for a, b in zip(gen.ops, axis.ops):
                assert np.abs(a - b).max() < 1e-12

    def test_zero_strength_effects(self):
        pair = povm_generalized(np.pi / 2, 1.3)
        for op in pair.ops:
            assert np.abs(op.conj().T @ op - np.eye(2) / 2).max() < 1e-12


class TestPartialOps:
    def test_wm_limits(self):
        assert np.allclose(wm_map(0.0).op, np.eye(2), atol=1e-15)
        assert np.allclose(wm_map(1.0).op, RHO_0, atol=1e-15)

    def test_wm_qmr_proportional_iff_equal_strength(self):
        prod_eq = qmr_map(0.4).op @ wm_map(0.4).op
        assert abs(prod_eq[0, 0] - prod_eq[1, 1]) < 1e-12
        prod_ne = qmr_map(0.7).op @ wm_map(0.4).op
        assert abs(prod_ne[0, 0] - prod_ne[1, 1]) > 1e-3

    def test_strength_range(self):
        for bad in (-0.1, 1.2):
            with pytest.raises(ValueError):
                wm_map(bad)
            with pytest.raises(ValueError):
                qmr_map(bad)


class TestPreWmPair:
    def test_projective_limit(self):
        pair = pre_wm_pair(1.0)
        assert np.allclose(pair.ops[0], RHO_0, atol=1e-15)
        assert np.allclose(pair.ops[1], RHO_1, atol=1e-15)

    def test_half_is_zero_strength(self):
        pair = pre_wm_pair(0.5)
        for op in pair.ops:
            assert np.abs(op - np.eye(2) / np.sqrt(2)).max() < 1e-12

    def test_matches_z_pair_under_strength_map(self):
        for theta in THETA_GRID:
            p = np.cos(theta / 2) ** 2
            pair = pre_wm_pair(p)
            zpair = povm_axis("z", theta)
            for a, b in zip(pair.ops, zpair.ops):
                assert np.abs(a - b).max() < 1e-12

    def test_weights_on_excited(self):
        ens = measure(RHO_1, pre_wm_pair(0.8))
        assert [b.weight for b in ens.branches] == pytest.approx([0.2, 0.8], abs=1e-12)


class TestFlips:
    def test_population_swap(self):
        _, f2 = flips()
        assert np.allclose(f2 @ RHO_1 @ f2.conj().T, RHO_0, atol=1e-15)

    def test_involution(self):
        _, f2 = flips()
        assert np.allclose(f2 @ f2, np.eye(2), atol=1e-15)

    def test_general_swap(self):
        rho = state_from_angles(InitialState(alpha=0.9, phi=1.1))
        _, f2 = flips()
        out = f2 @ rho @ f2.conj().T
        assert out[0, 0] == pytest.approx(rho[1, 1], abs=1e-14)
        assert out[0, 1] == pytest.approx(rho[1, 0], abs=1e-14)


class TestPostWmOps:
    def test_zero_strength_identity(self):
        n1, w1 = post_wm_ops(0.0, 0.0)
        assert np.allclose(n1.op, np.eye(2), atol=1e-15)
        assert np.allclose(w1.op, np.eye(2), atol=1e-15)

    @pytest.mark.parametrize("p", [0.6, 0.8, 0.95])
    def test_matched_strength_inverts_pre_measurement(self, p):
        matched = (2 * p - 1) / p
        n1, w1 = post_wm_ops(matched, matched)
        m1, m2 = pre_wm_pair(p).ops
        prod_n = n1.op @ m1
        prod_w = w1.op @ m2
        assert abs(prod_n[0, 0] - prod_n[1, 1]) < 1e-12
        assert abs(prod_w[0, 0] - prod_w[1, 1]) < 1e-12
        # away from the matched value the product is not proportional to I
        off_n = post_wm_ops(matched / 2, matched / 2)[0].op @ m1
        assert abs(off_n[0, 0] - off_n[1, 1]) > 1e-3


class TestRotations:
    def test_zero_angle_identity(self):
        for axis in "xyz":
            assert np.abs(rotation(axis, 0.0).matrix - np.eye(2)).max() < 1e-15

    def test_unitarity_full_grid(self):
        for axis in "xyz":
            for eta in THETA_GRID:
                for sign in (+1, -1):
                    m = rotation(axis, eta, sign).matrix
                    assert np.abs(m.conj().T @ m - np.eye(2)).max() < 1e-12

    def test_ry_half_pi_maps_ground_to_plus(self):
        out = rotation("y", np.pi / 2, +1).matrix @ KET_0
        assert np.abs(out - KET_PLUS).max() < 1e-12

    def test_rz_preserves_z_component(self):
        rho = state_from_angles(InitialState(alpha=0.7, phi=0.9))
        for sign in (+1, -1):
            m = rotation("z", 0.8, sign).matrix
            out = m @ rho @ m.conj().T
            assert density_to_bloch(out).z == pytest.approx(density_to_bloch(rho).z,
                                                            abs=1e-12)

    def test_range_checks(self):
        with pytest.raises(ValueError):
            rotation("y", 2.0)
        with pytest.raises(ValueError):
            rotation("q", 0.3)


class TestMeasureAndBranches:
    def test_zero_strength_branches(self):
        rho = state_from_angles(InitialState(alpha=0.4, phi=0.2))
        ens = measure(rho, povm_axis("x", np.pi / 2))
        for b in ens.branches:
            assert np.abs(b.state - rho / 2).max() < 1e-12

    def test_weights_sum_to_one(self):
        rng = np.random.default_rng(12)
        for _ in range(20):
            rho = state_from_angles(InitialState(alpha=rng.uniform(0, np.pi / 2),
                                                 phi=rng.uniform(0, 2 * np.pi)))
            axis = rng.choice(["x", "y", "z"])
            ens = measure(rho, povm_axis(axis, rng.uniform(0, np.pi / 2)))
            assert ens.total_weight == pytest.approx(1.0, abs=1e-12)
            assert all(b.weight >= -1e-15 for b in ens.branches)

    def test_dim_mismatch(self):
        with pytest.raises(ValueError):
            measure(np.eye(4, dtype=complex) / 4, povm_axis("z", 0.3))

    def test_overfull_ensemble_rejected(self):
        with pytest.raises(ValueError):
            BranchEnsemble(branches=(Branch("a", RHO_0), Branch("b", RHO_0)))

    def test_incomplete_pair_rejected(self):
        with pytest.raises(ValueError):
            MeasurementPair(labels=("a", "b"), ops=(RHO_0, RHO_0), axis="z", theta=0.0)


class TestPartialMeasure:
    def test_zero_strength_accepts_everything(self):
        rho = state_from_angles(InitialState(alpha=0.6, phi=0.0))
        ens = partial_measure(rho, wm_map(0.0))
        assert ens.success_prob == pytest.approx(1.0, abs=1e-12)

    def test_half_strength_on_excited(self):
        ens = partial_measure(RHO_1, wm_map(0.5))
        assert ens.success_prob == pytest.approx(0.5, abs=1e-12)
        assert np.allclose(ens.branches[0].state / 0.5, RHO_1, atol=1e-12)

    def test_full_strength_discards_excited(self):
        ens = partial_measure(RHO_1, wm_map(1.0))
        assert ens.success_prob == pytest.approx(0.0, abs=1e-12)

    def test_accepted_weight_equals_born_rule(self):
        rng = np.random.default_rng(13)
        for _ in range(20):
            rho = state_from_angles(InitialState(alpha=rng.uniform(0, np.pi / 2),
                                                 phi=rng.uniform(0, 2 * np.pi)))
            pm = wm_map(rng.uniform(0, 1))
            ens = partial_measure(rho, pm)
            born = float(np.real(np.trace(pm.op @ rho @ pm.op.conj().T)))
            assert ens.success_prob == pytest.approx(born, abs=1e-12)
            assert 0.0 <= ens.success_prob <= 1.0 + 1e-12
            assert ens.total_weight == pytest.approx(1.0, abs=1e-12)
