import numpy as np
import pytest

from activenewton.errors import PreconditionViolated
from activenewton.geometry import Manifold, constraint_jacobian, sphere, tangent_basis
from activenewton.varcalc import (
    graph_normal_member,
    graph_tangent_member,
    kkt_margin,
    multiplier_from_normal,
    transversality_margin,
    weighted_hessian,
)
from activenewton.verify import catalog_manifolds, graph_query, random_rotation

CIRCLE = Manifold(2, [sphere([0, 0])])


def square_coord(i, n):
    from activenewton.geometry import SmoothScalarFn

    def hess(x):
        H = np.zeros((n, n))
        H[i, i] = 2.0
        return H

    return SmoothScalarFn(lambda x: x[i] ** 2, lambda x: 2 * x[i] * np.eye(n)[i], hess)


class TestMultipliers:
    def test_disk_multiplier(self):
        # disk NLP with c = (3, 4): -F = c = lambda * grad h = 2 lambda x
        res = multiplier_from_normal(CIRCLE, [0.6, 0.8], [3.0, 4.0])
        assert res.lambda_ == pytest.approx([2.5])
        assert res.residual_norm <= 1e-12

    def test_tangent_vector(self):
        res = multiplier_from_normal(CIRCLE, [1, 0], [0, 1])
        assert res.lambda_ == pytest.approx([0.0])
        assert res.residual_norm == pytest.approx(1.0)

    def test_whole_space(self):
        res = multiplier_from_normal(Manifold(2, []), [1, 1], [3, 4])
        assert res.lambda_.size == 0
        assert res.residual_norm == pytest.approx(5.0)

    def test_round_trip(self):
        rng = np.random.default_rng(3)
        for _, M, sample in catalog_manifolds():
            for _ in range(20):
                u = sample(rng)
                lam = rng.standard_normal(M.codim)
                back = multiplier_from_normal(M, u, constraint_jacobian(M, u).T @ lam).lambda_
                np.testing.assert_allclose(back, lam, atol=1e-10)


class TestWeightedHessian:
    def test_examples(self):
        np.testing.assert_allclose(weighted_hessian(CIRCLE, [0.3, 0.1], [1.0]), 2 * np.eye(2))
        np.testing.assert_allclose(weighted_hessian(CIRCLE, [0.3, 0.1], [0.0]), 0)
        M = Manifold(2, [square_coord(0, 2), square_coord(1, 2)])
        np.testing.assert_allclose(weighted_hessian(M, [0.7, -0.2], [1.0, 2.0]), np.diag([2.0, 4.0]))


class TestGraphMembership:
    u = np.array([1.0, 0.0])
    v = np.array([2.0, 0.0])

    @pytest.mark.parametrize(
        "w,z,expected",
        [
            ([0, 1], [0, 2], True),
            ([1, 0], [0, 2], False),
            ([1, 0], [5, -3], False),
            ([0, 1], [0, 0], False),
        ],
    )
    def test_circle_examples(self, w, z, expected):
        assert graph_tangent_member(CIRCLE, self.u, self.v, w, z) is expected
        assert graph_normal_member(CIRCLE, self.u, self.v, z, w) is expected

    def test_normal_component_of_z_is_free(self):
        assert graph_tangent_member(CIRCLE, self.u, self.v, [0, 1], [7, 2])

    def test_preconditions(self):
        with pytest.raises(PreconditionViolated):
            graph_tangent_member(CIRCLE, [1.1, 0], self.v, [0, 1], [0, 2])
        with pytest.raises(PreconditionViolated):
            graph_tangent_member(CIRCLE, self.u, [0, 1], [0, 1], [0, 2])

    @pytest.mark.parametrize("idx", range(4))
    def test_derivative_equals_coderivative(self, idx):
        name, M, sample = catalog_manifolds()[idx]
        rng = np.random.default_rng(100 + idx)
        members = 0
        for i in range(100):
            u = sample(rng)
            v, w, z = graph_query(M, u, rng)
            a = graph_tangent_member(M, u, v, w, z)
            assert a == graph_normal_member(M, u, v, z, w)
            members += a
            if a:
                for t in (0.5, 2.0):
                    assert graph_tangent_member(M, u, v, t * w, t * z)
            T = tangent_basis(M, u)
            assert a == graph_tangent_member(M, u, v, w, z, basis=T @ random_rotation(T.shape[1], rng))
        assert 0 < members < 100


class TestTransversality:
    def test_disk_margin(self):
        # DL = 2 lambda I = 5 I; tangent d = (-0.8, 0.6); d' DL d = 5
        m = transversality_margin(CIRCLE, lambda u: np.zeros((2, 2)), [0.6, 0.8], [2.5])
        assert m == pytest.approx(5.0)

    def test_identity_whole_space(self):
        assert transversality_margin(Manifold(2, []), lambda u: np.eye(2), [0, 0], []) == pytest.approx(1.0)

    def test_zero_map_fails(self):
        assert transversality_margin(Manifold(3, []), lambda u: np.zeros((3, 3)), [0, 0, 0], []) == 0.0

    def test_kkt_margin_agrees_on_singularity(self):
        args = (CIRCLE, lambda u: np.zeros((2, 2)), [0.6, 0.8])
        assert kkt_margin(*args, [2.5]) > 0.1
        assert transversality_margin(*args, [0.0]) == pytest.approx(0.0, abs=1e-14)
        assert kkt_margin(*args, [0.0]) == pytest.approx(0.0, abs=1e-12)
