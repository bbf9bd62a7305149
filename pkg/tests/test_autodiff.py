"""Ядро обратного дифференцирования: значения, градиенты, проверка конечными разностями."""
import numpy as np
import pytest

from backend.ccc.autodiff import (
    Graph,
    Tensor,
    evaluate,
    grad_check,
    grad_check_detail,
    gradient,
    no_grad,
    ops,
    strict_mode,
)
from backend.ccc.errors import GradientError, NonFiniteError, ShapeError


def _central_difference(graph, x, epsilon=1e-5):
    numeric = np.zeros_like(x)
    for i in np.ndindex(x.shape):
        shifted = x.copy()
        shifted[i] += epsilon
        plus = evaluate(graph, {"x": shifted})["out"].item()
        shifted[i] -= 2 * epsilon
        minus = evaluate(graph, {"x": shifted})["out"].item()
        numeric[i] = (plus - minus) / (2 * epsilon)
    return numeric


class TestForwardValues:
    def test_add(self):
        out = ops.add(Tensor([1.0, 2.0]), Tensor([3.0, 4.0]))
        np.testing.assert_array_equal(out.data, [4.0, 6.0])

    def test_softmax_symmetric(self):
        np.testing.assert_allclose(ops.softmax(Tensor([0.0, 0.0])).data, [0.5, 0.5])

    def test_cosine_similarity(self):
        value = ops.cosine_similarity(Tensor([1.0, 1.0]), Tensor([1.0, 0.0])).item()
        np.testing.assert_allclose(value, 1.0 / np.sqrt(2.0), rtol=1e-7)

    def test_cosine_similarity_zero_vector_is_finite(self):
        a = Tensor(np.zeros(3), requires_grad=True)
        b = Tensor([1.0, 0.0, 0.0], requires_grad=True)
        out = ops.cosine_similarity(a, b)
        out.backward()
        assert out.item() == 0.0
        assert np.all(np.isfinite(a.grad)) and np.all(np.isfinite(b.grad))

    def test_l2_normalize_matches_cosine(self, rng):
        a, b = rng.normal(size=(5, 4)), rng.normal(size=(5, 4))
        via_norm = (ops.l2_normalize(Tensor(a)).data * ops.l2_normalize(Tensor(b)).data).sum(axis=-1)
        np.testing.assert_allclose(via_norm, ops.cosine_similarity(Tensor(a), Tensor(b)).data, rtol=1e-12)

    def test_masked_logsumexp_ignores_dropped(self):
        a = Tensor([[1.0, 50.0, 2.0]])
        keep = np.array([[True, False, True]])
        np.testing.assert_allclose(ops.masked_logsumexp(a, keep).data, [np.log(np.e + np.e**2)])

    def test_xlogx_zero(self):
        np.testing.assert_array_equal(ops.xlogx(Tensor([0.0, 1.0])).data, [0.0, 0.0])

    def test_conv1d_matches_direct_sum(self, rng):
        x = rng.normal(size=(1, 11, 2))
        w = rng.normal(size=(3, 2, 4))
        out = ops.conv1d(Tensor(x), Tensor(w), stride=2).data
        expected = np.stack([np.einsum("kc,kco->o", x[0, t * 2 : t * 2 + 3], w) for t in range(5)])
        np.testing.assert_allclose(out[0], expected, rtol=1e-12)

    def test_evaluate_is_deterministic(self, rng):
        x = rng.normal(size=(4, 8))
        graph = Graph(lambda x: ops.softmax(ops.gelu(x) @ Tensor(np.ones((8, 3)))), "det")
        first = evaluate(graph, {"x": x})["out"].data
        second = evaluate(graph, {"x": x})["out"].data
        assert first.tobytes() == second.tobytes()


class TestErrors:
    def test_shape_mismatch_names_node(self):
        with pytest.raises(ShapeError, match="add"):
            ops.add(Tensor(np.ones(2)), Tensor(np.ones(3)))

    def test_matmul_inner_mismatch(self):
        with pytest.raises(ShapeError, match="matmul"):
            ops.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))

    def test_strict_mode_catches_inf(self):
        with strict_mode(), np.errstate(divide="ignore"):
            with pytest.raises(NonFiniteError):
                ops.log(Tensor([0.0]))

    def test_lenient_mode_passes_inf(self):
        with np.errstate(divide="ignore"):
            assert np.isneginf(ops.log(Tensor([0.0])).data[0])

    def test_non_scalar_loss(self):
        with pytest.raises(GradientError):
            gradient(Graph(lambda x: x * 2.0), {"x": [1.0, 2.0]})

    def test_detached_input_gets_zero_gradient(self):
        grads = gradient(Graph(lambda x, y: (x * x).sum()), {"x": [1.0, 2.0], "y": [3.0, 4.0]})
        np.testing.assert_array_equal(grads["y"], [0.0, 0.0])


class TestGradients:
    def test_square(self):
        grads = gradient(Graph(lambda x: (x * x).sum()), {"x": [1.0, 2.0, 3.0]})
        np.testing.assert_allclose(grads["x"], [2.0, 4.0, 6.0])

    def test_sum_of_softmax_is_flat(self, rng):
        grads = gradient(Graph(lambda x: ops.softmax(x).sum()), {"x": rng.normal(size=6)})
        np.testing.assert_allclose(grads["x"], 0.0, atol=1e-12)

    def test_no_grad_builds_no_graph(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        with no_grad():
            y = (x * x).sum()
        assert not y.requires_grad

    def test_shared_subexpression_accumulates(self):
        x = Tensor([3.0], requires_grad=True)
        y = x * x
        (y + y).sum().backward()
        np.testing.assert_allclose(x.grad, [12.0])

    def test_straight_through_passes_soft_gradient(self):
        soft = Tensor([0.2, 0.8], requires_grad=True)
        out = ops.straight_through(np.array([0.0, 1.0]), soft)
        (out * Tensor([1.0, 2.0])).sum().backward()
        np.testing.assert_array_equal(out.data, [0.0, 1.0])
        np.testing.assert_allclose(soft.grad, [1.0, 2.0])


class TestFiniteDifferences:
    def test_linear_map_is_exact(self):
        rng = np.random.default_rng(0)
        w = rng.uniform(0.5, 1.5, size=(3, 4))
        x = rng.uniform(0.5, 1.5, size=(4, 1))
        assert grad_check(Graph(lambda w, x: (w @ x).sum()), {"w": w, "x": x}) < 1e-9

    def test_gelu(self):
        x = np.random.default_rng(1).uniform(-0.5, 3.0, size=20)
        assert grad_check(Graph(lambda x: ops.gelu(x).sum()), {"x": x}) < 1e-5

    @pytest.mark.parametrize(
        "name",
        ["softmax", "layer_norm", "cosine", "l2_normalize", "logsumexp", "conv1d", "replace_rows", "xlogx"],
    )
    def test_primitive(self, name):
        rng = np.random.default_rng(7)
        r = rng.normal(size=(3, 5))
        keep = np.array([[True, True, False, True, True]] * 3)
        builders = {
            "softmax": lambda x: (ops.softmax(x) * Tensor(r)).sum(),
            "layer_norm": lambda x: (ops.layer_norm(x, Tensor(np.full(5, 1.5)), Tensor(np.zeros(5))) * Tensor(r)).sum(),
            "cosine": lambda x: ops.cosine_similarity(x, Tensor(r)).sum(),
            "l2_normalize": lambda x: (ops.l2_normalize(x) * Tensor(r)).sum(),
            "logsumexp": lambda x: ops.masked_logsumexp(x, keep).sum(),
            "conv1d": lambda x: (ops.conv1d(x.reshape(1, 5, 3), Tensor(r.reshape(5, 3, 1)[:3]), stride=2, padding=1)).sum(),
            "replace_rows": lambda x: (ops.replace_rows(x, np.array([True, False, True]), Tensor(r[0])) * Tensor(r)).sum(),
            "xlogx": lambda x: ops.xlogx(x * x + 0.1).sum(),
        }
        x = rng.normal(size=(3, 5))
        assert grad_check(Graph(builders[name], name), {"x": x}) < 1e-4

    @pytest.mark.parametrize(
        "name",
        ["softmax", "layer_norm", "cosine", "l2_normalize", "logsumexp", "conv1d", "replace_rows", "xlogx", "gelu", "gather_rows"],
    )
    def test_primitive_random_instances(self, name):
        rng = np.random.default_rng(sum(map(ord, name)))
        keep = np.array([[True, True, False, True, True]] * 3)
        for _ in range(100):
            r = rng.normal(size=(3, 5))
            builders = {
                "softmax": lambda x: (ops.softmax(x) * Tensor(r)).sum(),
                "layer_norm": lambda x: (ops.layer_norm(x, Tensor(np.full(5, 1.5)), Tensor(np.zeros(5))) * Tensor(r)).sum(),
                "cosine": lambda x: ops.cosine_similarity(x, Tensor(r)).sum(),
                "l2_normalize": lambda x: (ops.l2_normalize(x) * Tensor(r)).sum(),
                "logsumexp": lambda x: ops.masked_logsumexp(x, keep).sum(),
                "conv1d": lambda x: ops.conv1d(x.reshape(1, 5, 3), Tensor(r.reshape(5, 3, 1)[:3]), stride=2, padding=1).sum(),
                "replace_rows": lambda x: (ops.replace_rows(x, np.array([True, False, True]), Tensor(r[0])) * Tensor(r)).sum(),
                "xlogx": lambda x: ops.xlogx(x * x + 0.1).sum(),
                "gelu": lambda x: (ops.gelu(x) * Tensor(r)).sum(),
                "gather_rows": lambda x: (ops.gather_rows(x, np.array([2, 0, 2])) * Tensor(r)).sum(),
            }
            x = rng.normal(size=(3, 5))
            graph = Graph(builders[name], name)
            analytic = gradient(graph, {"x": x})["x"]
            np.testing.assert_allclose(analytic, _central_difference(graph, x), rtol=1e-5, atol=1e-7)

    def test_detail_reports_every_input(self, rng):
        report = grad_check_detail(
            Graph(lambda a, b: (a * b).sum()), {"a": rng.normal(size=4), "b": rng.normal(size=4)}
        )
        assert set(report) == {"a", "b"}

    def test_max_coords_limits_work(self, rng):
        calls = []

        def build(x):
            calls.append(1)
            return (x * x).sum()

        grad_check_detail(Graph(build), {"x": rng.normal(size=50)}, max_coords=5, rng=rng)
        # один аналитический проход и по два на координату
        assert len(calls) == 1 + 2 * 5
