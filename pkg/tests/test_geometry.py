import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from activenewton.errors import DimensionMismatch, RankDeficient
from activenewton.geometry import (
    Manifold,
    affine,
    constraint_jacobian,
    constraint_values,
    coordinate,
    licq_margin,
    normal_basis,
    project_to_manifold,
    quadratic,
    sphere,
    split_bases,
    tangent_basis,
)

CIRCLE = Manifold(2, [sphere([0, 0])])
SPHERE3 = Manifold(3, [sphere([0, 0, 0])])
LINE = Manifold(2, [affine([1.0, -1.0], 0.0)])
WHOLE3 = Manifold(3, [])


def same_span(A, B):
    return np.allclose(A @ A.T, B @ B.T, atol=1e-10)


class TestConstraintEvaluation:
    def test_values(self):
        assert constraint_values(CIRCLE, [1, 0]) == pytest.approx([0.0])
        assert constraint_values(CIRCLE, [2, 0]) == pytest.approx([3.0])
        assert constraint_values(LINE, [1, 3]) == pytest.approx([-2.0])

    def test_jacobian(self):
        np.testing.assert_allclose(constraint_jacobian(CIRCLE, [1, 0]), [[2, 0]])
        np.testing.assert_allclose(constraint_jacobian(CIRCLE, [0.6, 0.8]), [[1.2, 1.6]])
        M = Manifold(3, [coordinate(0, 3), coordinate(1, 3)])
        np.testing.assert_allclose(constraint_jacobian(M, [5, 6, 7]), [[1, 0, 0], [0, 1, 0]])

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            constraint_values(CIRCLE, [1, 0, 0])
        with pytest.raises(DimensionMismatch):
            Manifold(1, [sphere([0]), sphere([1])])


class TestBases:
    def test_circle(self):
        T, N = split_bases(CIRCLE, [1, 0])
        assert same_span(T, np.array([[0.0], [1.0]]))
        assert same_span(N, np.array([[1.0], [0.0]]))

    def test_sphere_north_pole(self):
        T = tangent_basis(SPHERE3, [0, 0, 1])
        N = normal_basis(SPHERE3, [0, 0, 1])
        assert same_span(T, np.eye(3)[:, :2])
        assert same_span(N, np.eye(3)[:, 2:])

    def test_whole_space(self):
        T, N = split_bases(WHOLE3, [1, 2, 3])
        np.testing.assert_allclose(T.T @ T, np.eye(3), atol=1e-14)
        assert N.shape == (3, 0)

    def test_rank_deficient(self):
        with pytest.raises(RankDeficient):
            tangent_basis(CIRCLE, [0, 0])

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0, 2 * np.pi), st.floats(0, np.pi))
    def test_orthonormal_and_complementary(self, phi, theta):
        x = np.array([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)])
        T, N = split_bases(SPHERE3, x)
        B = np.hstack([T, N])
        np.testing.assert_allclose(B.T @ B, np.eye(3), atol=1e-10)
        np.testing.assert_allclose(constraint_jacobian(SPHERE3, x) @ T, 0, atol=1e-10)


class TestLicq:
    def test_values(self):
        assert licq_margin(CIRCLE, [1, 0]) == pytest.approx(2.0)
        assert licq_margin(CIRCLE, [0, 0]) == 0.0
        assert licq_margin(WHOLE3, [0, 0, 0]) == float("inf")


class TestProjection:
    def test_examples(self):
        np.testing.assert_allclose(project_to_manifold(CIRCLE, [3, 4]), [0.6, 0.8], atol=1e-12)
        np.testing.assert_allclose(project_to_manifold(CIRCLE, [1, 0]), [1, 0], atol=1e-15)
        np.testing.assert_allclose(project_to_manifold(LINE, [2, 0]), [1, 1], atol=1e-12)

    def test_post_conditions_on_ellipse(self):
        M = Manifold(2, [quadratic(np.diag([0.5, 2.0]), None, -1.0)])
        x0 = np.array([2.3, 0.4])
        y = project_to_manifold(M, x0)
        assert abs(constraint_values(M, y)[0]) <= 1e-12
        assert abs(tangent_basis(M, y).T @ (y - x0)).max() <= 1e-12
        # brute-force nearest point over a fine parameterization
        t = np.linspace(0, 2 * np.pi, 200001)
        pts = np.column_stack([2 * np.cos(t), np.sin(t)])
        best = pts[np.argmin(np.linalg.norm(pts - x0, axis=1))]
        np.testing.assert_allclose(y, best, atol=1e-4)

    @settings(max_examples=100, deadline=None)
    @given(
        st.lists(st.floats(-1, 1), min_size=3, max_size=3).filter(lambda v: np.linalg.norm(v) > 1e-3),
        st.floats(0.5, 2.0),
    )
    def test_radial_and_idempotent(self, d, r):
        d = np.array(d) / np.linalg.norm(d)
        x = r * d
        y = project_to_manifold(SPHERE3, x)
        np.testing.assert_allclose(y, d, atol=1e-11)
        assert np.linalg.norm(project_to_manifold(SPHERE3, y) - y) <= 1e-12

    def test_whole_space_is_identity(self):
        np.testing.assert_array_equal(project_to_manifold(WHOLE3, [1.0, 2.0, 3.0]), [1, 2, 3])


@pytest.mark.parametrize(
    "fn,n",
    [
        (sphere([0, 0]), 2),
        (sphere([1.0, -1.0, 0.5], 2.0), 3),
        (quadratic(np.diag([0.5, 2.0]), None, -1.0), 2),
        (quadratic([[1.0, 2.0], [0.0, -1.0]], [1.0, 3.0], 0.5), 2),
        (affine([1.0, 2.0, 3.0], 4.0), 3),
    ],
)
def test_finite_differences(fn, n):
    rng = np.random.default_rng(0)
    h = 1e-5
    for _ in range(100):
        x = rng.uniform(-2, 2, n)
        g, H = fn.gradient(x), fn.hessian(x)
        E = np.eye(n)
        gfd = np.array([(fn.value(x + h * e) - fn.value(x - h * e)) / (2 * h) for e in E])
        Hfd = np.column_stack([(fn.gradient(x + h * e) - fn.gradient(x - h * e)) / (2 * h) for e in E])
        assert np.linalg.norm(gfd - g) <= 1e-6 * max(1.0, np.linalg.norm(g))
        assert np.linalg.norm(Hfd - H) <= 1e-6 * max(1.0, np.linalg.norm(H))
        assert np.abs(H - H.T).max() <= 1e-12
