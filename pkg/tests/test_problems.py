import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from activenewton.errors import Degenerate, PreconditionViolated
from activenewton.geneq import forward_backward, natural_residual
from activenewton.problems import (
    KINDS,
    ProblemSpec,
    box_vi_bruteforce,
    build,
    builtin,
    lcp_bruteforce,
    random_orthant_vi,
    spec_from_dict,
    spec_to_dict,
)
from activenewton.solver import problem_manifold
from activenewton.varcalc import transversality_margin


class TestBuild:
    def test_disk(self):
        ks = build(ProblemSpec("disk-nlp", {"c": [3, 4]})).known_solution
        np.testing.assert_allclose(ks.u, [0.6, 0.8])
        assert ks.multipliers == pytest.approx([2.5])

    def test_scalar_root(self):
        assert build(ProblemSpec("scalar-root", {"target": 2.0})).known_solution.u == pytest.approx([np.sqrt(2)])

    def test_orthant(self):
        prob = build(ProblemSpec("orthant-vi", {"A": np.eye(2).tolist(), "b": [-1, 1]}))
        np.testing.assert_allclose(prob.known_solution.u, [1, 0])

    def test_sphere(self):
        ks = build(ProblemSpec("sphere-vi", {"p": [0, 3, 4]})).known_solution
        np.testing.assert_allclose(ks.u, [0, 0.6, 0.8])

    @pytest.mark.parametrize(
        "spec",
        [
            ProblemSpec("disk-nlp", {"c": [0, 0]}),
            ProblemSpec("sphere-vi", {"p": [0, 0, 1]}),
            ProblemSpec("sphere-vi", {"p": [0.1, 0, 0.2]}),
            ProblemSpec("scalar-root", {"target": 0.0}),
            ProblemSpec("scalar-root", {"target": -1.0}),
            ProblemSpec("no-such-kind", {}),
        ],
    )
    def test_invalid(self, spec):
        with pytest.raises(PreconditionViolated):
            build(spec)

    @pytest.mark.parametrize("name", KINDS)
    def test_known_solution_is_a_solution(self, name):
        prob = build(builtin(name))
        ks = prob.known_solution
        assert ks is not None
        if name == "scalar-root":
            assert np.abs(prob.F(ks.u)).max() <= 1e-12
        else:
            assert natural_residual(prob, 1.0, ks.u) <= 1e-10

    def test_singular_demo_certified(self):
        prob = build(builtin("singular-demo"))
        ks = prob.known_solution
        M = problem_manifold(prob)
        assert transversality_margin(M, prob.DF, ks.u, ks.multipliers) <= 1e-10

    def test_other_builtins_transversal(self):
        for name in ("disk-nlp", "sphere-vi", "subspace-newton", "scalar-root"):
            prob = build(builtin(name))
            ks = prob.known_solution
            assert transversality_margin(problem_manifold(prob), prob.DF, ks.u, ks.multipliers) > 1e-3


class TestLcpOracle:
    def test_examples(self):
        np.testing.assert_allclose(lcp_bruteforce(np.eye(2), [-1, 1]), [1, 0])
        np.testing.assert_allclose(lcp_bruteforce(np.eye(2), [1, 1]), [0, 0])
        np.testing.assert_allclose(lcp_bruteforce(np.eye(2), [-1, -1]), [1, 1])

    def test_degenerate(self):
        # A = -I, b = (1,): both u = 0 and u = 1 are complementary
        with pytest.raises(Degenerate):
            lcp_bruteforce(-np.eye(1), [1.0])
        with pytest.raises(Degenerate):
            lcp_bruteforce(-np.eye(1), [-1.0])

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0.1, 10), st.floats(-10, 10).filter(lambda x: abs(x) > 1e-6))
    def test_one_dimensional_closed_form(self, a, b):
        assert lcp_bruteforce([[a]], [b]) == pytest.approx([max(0.0, -b / a)])

    def test_fifty_random_instances_satisfy_kkt(self):
        for seed in range(50):
            n = 1 + seed % 6
            spec = random_orthant_vi(n, seed)
            A, b = np.array(spec.params["A"]), np.array(spec.params["b"])
            u = lcp_bruteforce(A, b)
            w = A @ u + b
            assert u.min() >= -1e-12
            assert w.min() >= -1e-10
            assert abs(u @ w) <= 1e-8


class TestRandomInstances:
    def test_deterministic(self):
        assert spec_to_dict(random_orthant_vi(4, 11)) == spec_to_dict(random_orthant_vi(4, 11))
        assert spec_to_dict(random_orthant_vi(4, 11)) != spec_to_dict(random_orthant_vi(4, 12))

    def test_spd_and_nondegenerate(self):
        for seed in range(20):
            spec = random_orthant_vi(3, seed)
            A, b = np.array(spec.params["A"]), np.array(spec.params["b"])
            np.testing.assert_allclose(A, A.T)
            assert np.linalg.eigvalsh(A).min() >= 1 - 1e-12
            u = lcp_bruteforce(A, b)
            w = A @ u + b
            assert np.all((u >= 1e-3) | (w >= 1e-3))

    def test_scalar_instance(self):
        spec = random_orthant_vi(1, 3)
        a, b = spec.params["A"][0][0], spec.params["b"][0]
        assert a > 0
        np.testing.assert_allclose(build(spec).known_solution.u, [max(0.0, -b / a)], atol=1e-14)

    def test_built_from_size_and_seed(self):
        a = build(ProblemSpec("orthant-vi", {"n": 3}, seed=5)).known_solution.u
        b = build(random_orthant_vi(3, 5)).known_solution.u
        np.testing.assert_array_equal(a, b)


class TestBoxOracle:
    def test_default_instance(self):
        u = box_vi_bruteforce([0, 0], [1, 1], np.eye(2), [-2, 0.5])
        np.testing.assert_allclose(u, [1, 0])

    def test_fixed_point_of_projection(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            G = rng.standard_normal((3, 3))
            A = G.T @ G + np.eye(3)
            b = 2 * rng.standard_normal(3)
            prob = build(ProblemSpec("box-vi", {"lower": [-1, 0, 0], "upper": [1, 1, 2], "A": A.tolist(), "b": b.tolist()}))
            u = prob.known_solution.u
            np.testing.assert_allclose(forward_backward(prob, 0.1, u), u, atol=1e-10)


def test_spec_json_round_trip():
    for spec in [builtin(k) for k in KINDS] + [random_orthant_vi(3, 1), ProblemSpec("scalar-root", {"target": 3.0}, start=(2.0,))]:
        back = spec_from_dict(json.loads(json.dumps(spec_to_dict(spec))))
        assert back == spec or spec_to_dict(back) == spec_to_dict(spec)
        np.testing.assert_array_equal(build(back).known_solution.u, build(spec).known_solution.u)


@pytest.mark.parametrize("bad", [{}, {"kind": "nope"}, {"kind": "disk-nlp", "params": [1, 2]}, [1, 2]])
def test_spec_from_dict_rejects(bad):
    with pytest.raises(PreconditionViolated):
        spec_from_dict(bad)
