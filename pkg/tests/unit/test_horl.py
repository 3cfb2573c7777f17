"""Tests for hypergraph construction, normalization and propagation."""

import numpy as np
import pytest

from lohgnet.core.errors import ContractError, DimensionError
from lohgnet.models.horl import (
    HORL,
    HypergraphState,
    build_components,
    build_incidence,
    interaction_matrix,
    propagate,
    propagate_matrix,
    sparsify,
    sparsify_mask,
)
from lohgnet.numerics import Tensor
from lohgnet.services.oracles import dense_hypergraph


def _jittered(horl: HORL, rng: np.random.Generator) -> HORL:
    horl.bind_parameters({
        name: Tensor(p.data + 0.1 * rng.standard_normal(p.shape), requires_grad=True)
        for name, p in horl.named_parameters()
    })
    return horl


@pytest.mark.usefixtures("f64")
class TestConstruction:
    def test_hand_incidence(self):
        H = build_incidence(Tensor([[1.0], [2.0]]), Tensor([1.0]), Tensor([[1.0], [1.0]]))
        assert np.array_equal(H.data, [[3.0], [6.0]])

    def test_zero_guidance_annihilates(self, rng):
        H = build_incidence(Tensor(rng.standard_normal((5, 2))), Tensor(np.zeros(2)), Tensor(rng.standard_normal((5, 3))))
        assert np.array_equal(H.data, np.zeros((5, 3)))

    def test_incidence_vertex_mismatch(self):
        with pytest.raises(DimensionError):
            build_incidence(Tensor(np.ones((3, 2))), Tensor(np.ones(2)), Tensor(np.ones((4, 2))))

    def test_components_identity_vertices(self, rng):
        horl = HORL(3, 3, 4, np.random.default_rng(0))
        identity = np.eye(3).reshape(3, 3, 1, 1)
        horl.bind_parameters({"w_v.weight": Tensor(identity, requires_grad=True)})
        F = rng.standard_normal((1, 3, 4, 4))
        V_f, g, E_f = build_components(Tensor(F), horl.w_v, horl.w_g, horl.w_e)[0]
        assert V_f.shape == (16, 3)
        assert g.shape == (3,)
        assert E_f.shape == (16, 4)
        assert np.allclose(V_f.data, F[0].reshape(3, 16).T)

    def test_constant_map_gives_identical_vertices(self):
        horl = HORL(2, 1, 2, np.random.default_rng(0))
        V_f, _, _ = build_components(Tensor(np.full((1, 2, 3, 3), 0.4)), horl.w_v, horl.w_g, horl.w_e)[0]
        assert np.allclose(V_f.data, V_f.data[0])


@pytest.mark.usefixtures("f64")
class TestSparsify:
    def test_zero_factor_keeps_positive_incidence(self, rng):
        H = Tensor(rng.uniform(0.1, 1.0, (4, 3)))
        assert np.array_equal(sparsify(H, 0.0).data, H.data)

    def test_hand_example(self):
        H_s = sparsify(Tensor([[0.2, 0.2], [0.2, 3.4]]), 0.5)
        assert np.array_equal(H_s.data, [[0.0, 0.0], [0.0, 3.4]])

    def test_monotone_in_factor(self, rng):
        H = np.abs(rng.standard_normal((8, 5)))
        counts = [int(sparsify_mask(H, lam).sum()) for lam in np.linspace(0.0, 1.0, 11)]
        assert all(a >= b for a, b in zip(counts, counts[1:]))

    def test_negative_factor_rejected(self):
        with pytest.raises(ContractError):
            sparsify_mask(np.ones((2, 2)), -0.1)


@pytest.mark.usefixtures("f64")
class TestInteraction:
    def test_hand_example(self):
        dv, de, P_H = interaction_matrix(Tensor([[1.0], [1.0]]))
        assert np.allclose(dv.data, [1.0, 1.0], atol=1e-5)
        assert np.allclose(de.data, [2.0], atol=1e-5)
        assert np.allclose(P_H.data, 0.5, atol=1e-5)

    def test_empty_incidence(self):
        _, _, P_H = interaction_matrix(Tensor(np.zeros((3, 2))))
        assert np.array_equal(P_H.data, np.zeros((3, 3)))

    def test_spectrum(self, rng):
        H_s = np.abs(rng.standard_normal((12, 5)))
        dv, _, P_H = interaction_matrix(sparsify(Tensor(H_s), 0.5))
        P = P_H.data
        eigenvalues = np.linalg.eigvalsh((P + P.T) / 2)
        assert np.allclose(P, P.T, atol=1e-12)
        assert eigenvalues.min() >= -1e-10
        assert eigenvalues.max() <= 1 + 1e-6
        if np.all(dv.data > 1e-3):
            root = np.sqrt(dv.data)
            assert np.allclose(P @ root, root, atol=1e-4)

    def test_non_positive_regularizer(self):
        with pytest.raises(ContractError):
            interaction_matrix(Tensor(np.ones((2, 2))), 0.0)


@pytest.mark.usefixtures("f64")
class TestPropagation:
    def test_hand_example(self):
        _, _, P_H = interaction_matrix(Tensor([[1.0], [1.0]]))
        out = propagate_matrix(Tensor([[1.0], [0.0]]), Tensor([[1.0]]), P_H)
        assert np.allclose(out.data, [[0.5], [-0.5]], atol=1e-6)

    def test_no_interactions(self, rng):
        F = Tensor(rng.standard_normal((4, 3)))
        assert np.allclose(propagate_matrix(F, Tensor(np.eye(3)), None).data, F.data)
        _, _, P_H = interaction_matrix(Tensor(np.zeros((4, 2))))
        assert np.allclose(propagate_matrix(F, Tensor(np.eye(3)), P_H).data, F.data)

    def test_smooth_signal_suppressed(self):
        _, _, P_H = interaction_matrix(Tensor(np.ones((4, 3))))
        out = propagate_matrix(Tensor(np.full((4, 1), 2.0)), Tensor([[1.0]]), P_H)
        assert np.allclose(out.data, 0.0, atol=1e-5)

    def test_module_matches_dense_oracle(self, rng):
        horl = _jittered(HORL(3, 2, 5, np.random.default_rng(4)), rng)
        F = rng.standard_normal((1, 3, 4, 4))
        dense = dense_hypergraph(
            F[0],
            horl.w_v.weight.data[:, :, 0, 0], horl.w_v.bias.data,
            horl.w_g.weight.data[:, :, 0, 0], horl.w_g.bias.data,
            horl.w_e.weight.data, horl.w_e.bias.data,
            horl.theta.data, horl.sparsity, horl.degree_eps,
        )
        state = horl.states(Tensor(F))[0]
        assert np.allclose(state.H.data, dense.H, atol=1e-10)
        assert np.array_equal(state.H_s.data > 0, dense.H_s > 0)
        assert np.allclose(state.P_H.data, dense.P_H, atol=1e-10)
        assert np.allclose(propagate(Tensor(F), horl).data[0], dense.output, atol=1e-10)

    def test_batch_items_are_independent(self, rng):
        horl = HORL(2, 1, 3, np.random.default_rng(1))
        F = rng.standard_normal((2, 2, 3, 3))
        batched = horl(Tensor(F)).data
        assert np.allclose(batched[1:], horl(Tensor(F[1:])).data, atol=1e-10)

    def test_without_hypergraph_is_theta_only(self, rng):
        horl = HORL(2, 1, 3, np.random.default_rng(1), hypergraph=False)
        F = rng.standard_normal((1, 2, 4, 4))
        assert np.allclose(horl(Tensor(F)).data, F)
        with pytest.raises(ContractError):
            horl.states(Tensor(F))

    def test_channel_mismatch(self):
        with pytest.raises(DimensionError):
            HORL(3, 2, 4, np.random.default_rng(0))(Tensor(np.ones((1, 2, 4, 4))))


class TestDump:
    def test_writes_five_matrices(self, tmp_path, rng):
        horl = HORL(2, 1, 3, np.random.default_rng(1))
        state = horl.states(Tensor(rng.standard_normal((1, 2, 4, 4))))[0]
        written = state.dump_csv(tmp_path / "dump")
        assert [p.name for p in written] == ["H.csv", "H_s.csv", "Dv.csv", "De.csv", "P_H.csv"]
        P_H = np.loadtxt(tmp_path / "dump" / "P_H.csv", delimiter=",")
        assert P_H.shape == (16, 16)
        assert np.allclose(P_H, state.P_H.data, rtol=1e-8, atol=1e-12)

    def test_refuses_large_graphs(self, tmp_path):
        zeros = Tensor(np.zeros((257, 1)))
        state = HypergraphState(zeros, zeros, Tensor(np.ones(257)), Tensor(np.ones(1)), Tensor(np.zeros((257, 257))))
        with pytest.raises(ContractError):
            state.dump_csv(tmp_path)
