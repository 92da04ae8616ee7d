from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest
import sympy as sp

from tripledetect import scenario as sc
from tripledetect.linalg import ContractError, Operator, StateVector, gram_matrix, tensor
from tripledetect.spin import SPIN_7_2, s_x

ABS = 1e-10
M = sc.M


def amp(psi, i, m):
    return sc.spin_components(psi)[i, SPIN_7_2.index(m)]


class TestE:
    def test_action(self):
        E_I, E = sc.build_E()
        b = sc.spatial_basis()
        assert np.array_equal((E_I @ b[2]).data, b[2].data)
        assert np.array_equal((E_I @ b[7]).data, np.zeros(10))
        assert E_I.trace() == pytest.approx(5)
        assert np.array_equal(E.data, tensor(E_I, Operator.identity(8, "spin")).data)


class TestPsi:
    def test_printed_amplitudes(self, psi):
        assert amp(psi, 0, M["7/2"]) == pytest.approx(-1 / 32)
        assert amp(psi, 5, M["1/2"]) == pytest.approx(-np.sqrt(35) / 32)
        assert np.all(sc.spin_components(psi)[:, SPIN_7_2.index(M["5/2"])] == 0)
        assert np.all(sc.spin_components(psi)[:, SPIN_7_2.index(M["-3/2"])] == 0)

    def test_exact_table_matches_floats(self, psi):
        table = np.array([[complex(c) for c in row] for row in sc.psi_exact()])
        assert np.allclose(table, sc.spin_components(psi), atol=1e-15)
        assert sc.psi_exact()[0][0] == sp.Rational(-1, 32)

    def test_slit_structure(self, psi):
        # slit-1 spatial components only carry spins in the T subset
        phi = sc.spin_components(psi)
        for k, m in enumerate(SPIN_7_2.labels):
            on_slit1 = np.linalg.norm(phi[:5, k]) > 0
            on_slit2 = np.linalg.norm(phi[5:, k]) > 0
            assert not (on_slit1 and on_slit2)
            if on_slit1:
                assert m in sc.T_SUBSET

    def test_norm_pinned(self, psi):
        # squared norm of the printed state, from the exact table
        exact = sum(sp.Abs(c) ** 2 for row in sc.psi_exact() for c in row)
        assert psi.norm() ** 2 == pytest.approx(float(exact), abs=1e-14)
        assert psi.norm() ** 2 == pytest.approx(0.852920, abs=1e-6)

    def test_normalize(self, psi):
        u = sc.spatial_basis()[3]
        assert np.array_equal(sc.normalize_for_probability(u).data, u.data)
        assert sc.normalize_for_probability(psi).norm() == pytest.approx(1, abs=ABS)
        with pytest.raises(ContractError):
            sc.normalize_for_probability(StateVector(np.zeros(4)))


class TestG:
    def test_third_vector(self):
        pv = sc.G_VECTORS_LITERAL[2]
        expected = [sp.sqrt(2) / 4 * c for c in (-1, -2, 1, 1, 1)] + [0] * 5
        assert all(sp.simplify(a - b) == 0 for a, b in zip(pv.exact, expected))
        assert pv.vector.norm() == pytest.approx(1, abs=ABS)

    def test_printed_norms(self):
        # squared-sum oracle straight from the coefficient lists
        n2 = [float(sum(c ** 2 for c in pv.exact)) for pv in sc.G_VECTORS_LITERAL]
        assert n2[1] == pytest.approx(1.75, abs=1e-12)
        assert abs(n2[1] - 1) > 1e-6
        assert n2[0] == pytest.approx(17 / 18, abs=1e-12)
        assert float(sum(c ** 2 for c in sc.G_VECTORS_PSI3_READING[0].exact)) == pytest.approx(1)

    def test_literal_is_not_a_projector(self):
        g = sc.build_G_literal()
        assert g.projector is None
        assert g.projector_error.gram_defect == pytest.approx(0.8285, abs=1e-4)
        assert g.lowdin_projector.is_projector(ABS)
        assert g.lowdin_projector.rank() == 3


class TestL:
    def test_vectors(self):
        vecs, L_I = sc.build_L()
        pv5 = sc.L_VECTORS[4]
        expected = [c / (2 * sp.sqrt(2)) for c in (-1, -2, 1, 1, 1)] + [0] * 5
        assert all(sp.simplify(a - b) == 0 for a, b in zip(pv5.exact, expected))
        assert float(sum(c ** 2 for c in sc.L_VECTORS[0].exact)) == pytest.approx(1, abs=1e-14)
        assert np.linalg.norm(gram_matrix(vecs) - np.eye(5)) <= ABS
        assert L_I.is_projector(ABS)


class TestDetectors:
    def test_subsets_and_rank(self):
        T, Y, W = sc.build_detectors()
        assert sc.T_SUBSET.members == [M["7/2"], M["5/2"], M["3/2"], M["-1/2"]]
        assert T.rank() == 40
        assert np.linalg.norm(T.data @ Y.data - Y.data @ T.data) == 0

    def test_detection_identity(self, literal):
        res = (literal.T @ literal.psi - literal.E @ literal.psi).norm()
        assert res <= ABS * literal.psi.norm()

    def test_lifts(self, repaired):
        for name, A in (("E", repaired.E_I), ("G", repaired.G_I), ("L", repaired.L_I)):
            assert np.allclose(getattr(repaired, name).data,
                               np.kron(A.data, np.eye(8)), atol=ABS)
            assert A.is_projector(ABS)
        for name in ("T", "Y", "W"):
            assert np.allclose(getattr(repaired, name).data,
                               np.kron(np.eye(10), getattr(repaired, f"{name}_II").data))


class TestPipeline:
    def test_sx_selection(self):
        s = sc.s_printed()
        assert np.linalg.norm((s_x() @ s - s * 3.5).data) <= ABS

    def test_reconstruction(self, psi):
        res = sc.run_pipeline("literal")
        assert res.reconstruction_residual <= 1e-12
        assert np.allclose(res.final.vector.data, psi.data, atol=1e-12)
        assert res.final.stage is sc.Stage.T1_FILTERED

    def test_filtered_channels(self):
        final = sc.run_pipeline("literal").final.vector
        phi = sc.spin_components(final)
        assert np.all(phi[:, SPIN_7_2.index(M["5/2"])] == 0)
        # |7/2> channel: amplitude 1/(8 sqrt 2) times the printed channel vector
        ch = sc.CHANNELS_PRINTED[M["7/2"]].vector.data
        assert np.allclose(phi[:, 0], ch / (8 * np.sqrt(2)), atol=1e-15)

    def test_filter_idempotent(self):
        routed = sc.run_pipeline("literal").routed.vector
        P = sc.blocking_filter()
        once = P @ routed
        assert np.array_equal((P @ once).data, once.data)

    def test_router_isometric_on_domain(self):
        ch = sc.load_channels("repaired")
        U = sc.routing_operator(ch, sc.spatial_basis()[0])
        for k in range(8):
            e = np.zeros(80)
            e[k] = 1  # seed (x) |m_k>
            assert np.linalg.norm(U.data @ e) == pytest.approx(1, abs=ABS)

    def test_literal_router_stretches_two_channel_terms(self):
        # the printed -1/2 and -7/2 channels are sums of non-orthogonal parts
        ch = sc.load_channels("literal")
        U = sc.routing_operator(ch, sc.spatial_basis()[0])
        norms = {m: np.linalg.norm(U.data[:, SPIN_7_2.index(m)]) for m in SPIN_7_2.labels}
        for m, n in norms.items():
            if m in (M["-1/2"], M["-7/2"]):
                assert n == pytest.approx(np.sqrt(1 + 2 * 5 / np.sqrt(22 * 70)), abs=1e-12)
            else:
                assert n == pytest.approx(1, abs=ABS)

    def test_repaired_norm_bookkeeping(self):
        res = sc.run_pipeline("repaired")
        assert res.final.norm_squared == pytest.approx(100 / 128, abs=ABS)

    def test_stage_order_enforced(self):
        sel = sc.select_sx()
        with pytest.raises(ContractError):
            sc.apply_filter(sel)
        routed = sc.route(sel, sc.load_channels())
        with pytest.raises(ContractError):
            sc.route(routed, sc.load_channels())

    def test_seed_must_be_unit(self):
        with pytest.raises(ContractError):
            sc.select_sx(StateVector(np.full(10, 1.0)))

    def test_rank_one_filter_differs(self, psi):
        routed = sc.run_pipeline("literal").routed.vector
        out = sc.rank_one_filter(routed)
        assert (out - psi).norm() == pytest.approx(0.1358, abs=1e-4)


def test_composite_label():
    assert sc.composite_label(0, Fraction(7, 2)) == "psi1⊗|7/2>"
