import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lqgame import (
    CoefficientPath, ContractViolation, CostWeights, DomainError,
    SingularBlockError, StateDynamics, TimeGrid, assemble_blocks,
    block_inverse, check_symmetric, eval_coeff, stack_blocks, sym,
    sym_eig_extremes,
)
from conftest import scalar_game


def finite_matrices(rows, cols, elements=st.floats(-5, 5)):
    return arrays(np.float64, (rows, cols), elements=elements)


class TestTimeGrid:
    def test_nodes_and_dt(self):
        g = TimeGrid(2.0, 4)
        assert g.dt == 0.5
        assert np.allclose(g.nodes, [0.0, 0.5, 1.0, 1.5, 2.0])

    def test_rejects_tiny_grid(self):
        with pytest.raises(ContractViolation):
            TimeGrid(1.0, 1)

    def test_rejects_negative_horizon(self):
        with pytest.raises(ContractViolation):
            TimeGrid(-1.0, 10)


class TestCoefficientPath:
    def test_constant_evaluates_everywhere(self):
        p = CoefficientPath.constant([[1.0, 2.0]])
        assert np.array_equal(eval_coeff(p, 0.3), [[1.0, 2.0]])

    def test_sampled_exact_at_nodes(self):
        stack = np.arange(5, dtype=float).reshape(5, 1, 1)
        p = CoefficientPath.sampled(stack, 1.0)
        for k, t in enumerate(np.linspace(0, 1, 5)):
            assert eval_coeff(p, t)[0, 0] == stack[k, 0, 0]

    def test_sampled_linear_between_nodes(self):
        stack = np.array([0.0, 2.0]).reshape(2, 1, 1)
        p = CoefficientPath.sampled(stack, 1.0)
        assert eval_coeff(p, 0.25)[0, 0] == pytest.approx(0.5)

    @given(t=st.floats(0.0, 1.0), a=st.floats(-3, 3), b=st.floats(-3, 3))
    def test_interpolation_stays_between_samples(self, t, a, b):
        p = CoefficientPath.sampled(np.array([a, b]).reshape(2, 1, 1), 1.0)
        v = eval_coeff(p, t)[0, 0]
        assert min(a, b) - 1e-12 <= v <= max(a, b) + 1e-12

    def test_outside_span_is_domain_error(self):
        p = CoefficientPath.sampled(np.zeros((2, 1, 1)), 1.0)
        with pytest.raises(DomainError):
            eval_coeff(p, 1.5)

    def test_values_are_frozen(self):
        p = CoefficientPath.constant([[1.0]])
        with pytest.raises(ValueError):
            p.values[0, 0] = 2.0


class TestValidation:
    def test_check_symmetric_accepts_symmetric(self):
        check_symmetric(np.eye(3), "I")

    def test_check_symmetric_rejects(self):
        with pytest.raises(ContractViolation):
            check_symmetric(np.array([[0.0, 1.0], [0.0, 0.0]]), "M")

    def test_cost_weights_reject_asymmetric_G(self):
        with pytest.raises(ContractViolation):
            CostWeights(G=np.array([[0.0, 1.0], [0.0, 0.0]]),
                        Q=CoefficientPath.constant(np.zeros((2, 2))),
                        S1=CoefficientPath.constant(np.zeros((1, 2))),
                        S2=CoefficientPath.constant(np.zeros((1, 2))),
                        R11=CoefficientPath.constant([[1.0]]),
                        R12=CoefficientPath.constant([[0.0]]),
                        R21=CoefficientPath.constant([[0.0]]),
                        R22=CoefficientPath.constant([[-1.0]]))

    def test_cost_weights_reject_R21_mismatch(self):
        with pytest.raises(ContractViolation, match="R21"):
            CostWeights(G=np.zeros((1, 1)),
                        Q=CoefficientPath.constant([[0.0]]),
                        S1=CoefficientPath.constant([[0.0]]),
                        S2=CoefficientPath.constant([[0.0]]),
                        R11=CoefficientPath.constant([[1.0]]),
                        R12=CoefficientPath.constant([[0.5]]),
                        R21=CoefficientPath.constant([[0.4]]),
                        R22=CoefficientPath.constant([[-1.0]]))

    def test_dynamics_shape_mismatch(self):
        c = CoefficientPath.constant
        with pytest.raises(ContractViolation, match="dynamics.C"):
            StateDynamics(A=c(np.zeros((2, 2))), B1=c(np.zeros((2, 1))),
                          B2=c(np.zeros((2, 1))), C=c(np.zeros((1, 1))),
                          D1=c(np.zeros((2, 1))), D2=c(np.zeros((2, 1))))


class TestEigExtremes:
    def test_scalar_shortcut(self):
        assert sym_eig_extremes(np.array([[-3.0]])) == (-3.0, -3.0)

    def test_diagonal(self):
        lo, hi = sym_eig_extremes(np.diag([2.0, -1.0, 5.0]))
        assert (lo, hi) == (-1.0, 5.0)

    @given(M=finite_matrices(3, 3))
    @settings(max_examples=50)
    def test_extremes_bound_rayleigh_quotient(self, M):
        S = sym(M)
        lo, hi = sym_eig_extremes(S)
        v = np.ones(3) / np.sqrt(3)
        q = v @ S @ v
        assert lo - 1e-9 <= q <= hi + 1e-9


class TestBlockInverse:
    @given(M=finite_matrices(2, 2), L=finite_matrices(2, 2),
           N=finite_matrices(2, 2))
    @settings(max_examples=80)
    def test_multiplies_back_to_identity(self, M, L, N):
        M = sym(M) + 4.0 * np.eye(2)
        N = sym(N) - 8.0 * np.eye(2)
        full = np.block([[M, L], [L.T, N]])
        inv = block_inverse(M, L, N)
        assert np.abs(full @ inv - np.eye(4)).max() < 1e-10

    def test_singular_leading_block_named(self):
        with pytest.raises(SingularBlockError) as exc:
            block_inverse(np.zeros((1, 1)), np.zeros((1, 1)), -np.eye(1))
        assert exc.value.block == "M"

    def test_singular_schur_complement_named(self):
        # N = L' M^-1 L makes the Schur complement exactly zero
        M = np.eye(2)
        L = np.eye(2)
        with pytest.raises(SingularBlockError) as exc:
            block_inverse(M, L, L.T @ L)
        assert exc.value.block == "Phi"

    def test_indefinite_saddle_block(self):
        # definite M > 0 and N < 0 always invert (Schur complement < 0)
        rng = np.random.default_rng(3)
        for _ in range(20):
            L = rng.normal(size=(2, 2))
            inv = block_inverse(np.eye(2), L, -np.eye(2) - L.T @ L)
            full = np.block([[np.eye(2), L], [L.T, -np.eye(2) - L.T @ L]])
            assert np.abs(full @ inv - np.eye(4)).max() < 1e-10


class TestAssembleBlocks:
    def test_stack_blocks_ex4_5(self, ex4_5):
        blk = stack_blocks(ex4_5, 0.5)
        assert np.array_equal(blk.B, [[1.0, 1.0]])
        assert np.array_equal(blk.D, [[0.0, 0.0]])
        assert np.allclose(blk.R, np.diag([1.0, -2.0 / 3.0]))

    def test_margins_without_noise_are_R_blocks(self, ex4_5):
        R_P, S_P, (m1, m2) = assemble_blocks(ex4_5, np.array([[7.0]]), 0.2)
        assert m1 == pytest.approx(1.0)
        assert m2 == pytest.approx(-2.0 / 3.0)
        # no D, so R_P is untouched by P while S_P = B'P
        assert np.allclose(R_P, np.diag([1.0, -2.0 / 3.0]))
        assert np.allclose(S_P, [[7.0], [7.0]])

    def test_diffusion_shifts_margins(self):
        p = scalar_game(D1=1.0, D2=1.0, R11=1.0, R22=-1.0)
        _, _, (m1, m2) = assemble_blocks(p, np.array([[0.5]]), 0.0)
        assert m1 == pytest.approx(1.5)
        assert m2 == pytest.approx(-0.5)

    def test_asymmetric_P_rejected(self, ex4_5):
        with pytest.raises(ContractViolation):
            assemble_blocks(ex4_5, np.array([[0.0, 1.0], [0.0, 0.0]]), 0.0)
