import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sphereshadow.autodiff import (
    Adam,
    AdamState,
    DomainError,
    MissingGradError,
    NonFiniteError,
    ShapeError,
    TapeConsumedError,
    Tensor,
    adam_step,
    arccos,
    check_gradients,
    concat,
    conv2d,
    elementwise,
    gelu,
    getitem,
    load_checkpoint,
    matmul,
    no_grad,
    ones_like,
    pad,
    reduce,
    reduce_max,
    reduce_sum,
    roll,
    save_checkpoint,
    softmax,
    split,
    where,
)
from sphereshadow.autodiff.checkpoint import CheckpointError

RTOL = 1e-6


def _rng(seed=0):
    return np.random.default_rng(seed)


class TestElementwise:
    def test_add(self):
        np.testing.assert_array_equal(elementwise("add", [1.0, 2.0], [3.0, 4.0]).data, [4.0, 6.0])

    def test_mul_by_ones(self):
        x = Tensor(_rng().standard_normal((3, 4)))
        np.testing.assert_array_equal(elementwise("mul", x, ones_like(x)).data, x.data)

    def test_arccos_of_one(self):
        assert arccos(1.0).item() == 0.0

    def test_div_by_zero_raises(self):
        with pytest.raises(DomainError):
            elementwise("div", [1.0], [0.0])

    def test_log_of_nonpositive_raises(self):
        with pytest.raises(DomainError):
            elementwise("log", [0.0])

    def test_sqrt_of_negative_raises(self):
        with pytest.raises(DomainError):
            elementwise("sqrt", [-1.0])

    def test_arccos_outside_domain_raises(self):
        with pytest.raises(DomainError):
            arccos([1.1])

    def test_arccos_tolerates_rounding(self):
        assert arccos([1.0 + 1e-14]).item() == 0.0

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            elementwise("add", np.ones((2, 3)), np.ones((4,)))

    def test_overflow_is_reported(self):
        with pytest.raises(NonFiniteError):
            elementwise("exp", [1000.0])

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            elementwise("tan", [1.0])

    @pytest.mark.parametrize("kind", ["add", "sub", "mul", "div"])
    def test_broadcast_matches_explicit_tile(self, kind):
        rng = _rng(1)
        a = rng.uniform(0.5, 2, (3, 1, 4))
        b = rng.uniform(0.5, 2, (5, 1))
        got = elementwise(kind, a, b).data
        ta = np.tile(a, (1, 5, 1))
        tb = np.tile(b[None], (3, 1, 4))
        ops = {"add": np.add, "sub": np.subtract, "mul": np.multiply, "div": np.divide}
        np.testing.assert_array_equal(got, ops[kind](ta, tb))

    @pytest.mark.parametrize(
        "kind",
        ["add", "sub", "mul", "div", "neg", "exp", "log", "sqrt", "sin", "cos", "arccos", "abs", "pow-scalar", "relu", "gelu"],
    )
    def test_gradient_matches_finite_differences(self, kind):
        rng = _rng(2)
        binary = kind in ("add", "sub", "mul", "div")
        if kind in ("log", "sqrt"):
            a = rng.uniform(0.2, 2, (3, 4))
        elif kind == "arccos":
            a = rng.uniform(-0.9, 0.9, (3, 4))
        else:
            a = rng.uniform(-2, 2, (3, 4))
            a[np.abs(a) < 0.05] = 0.5  # keep kinks of abs/relu away from the stencil
        b = rng.uniform(0.5, 2, (4,))
        weights = rng.standard_normal((3, 4))
        if binary:
            res = check_gradients(lambda x, y: reduce_sum(elementwise(kind, x, y) * weights), [a, b])
        elif kind == "pow-scalar":
            res = check_gradients(lambda x: reduce_sum(elementwise(kind, x, 3.0) * weights), [a])
        else:
            res = check_gradients(lambda x: reduce_sum(elementwise(kind, x) * weights), [a])
        assert res.passed(RTOL), res.max_rel_error


class TestMatmul:
    def test_identity(self):
        m = np.array([[1.0, 2.0], [3.0, 4.0]])
        np.testing.assert_array_equal(matmul(np.eye(2), m).data, m)

    def test_row_times_column(self):
        assert matmul([[1.0, 2.0]], [[3.0], [4.0]]).data.tolist() == [[11.0]]

    def test_triple_loop_oracle(self):
        rng = _rng(3)
        a, b = rng.standard_normal((3, 4)), rng.standard_normal((4, 5))
        want = np.zeros((3, 5))
        for i in range(3):
            for j in range(5):
                for k in range(4):
                    want[i, j] += a[i, k] * b[k, j]
        np.testing.assert_allclose(matmul(a, b).data, want, rtol=1e-13, atol=1e-13)

    def test_inner_mismatch(self):
        with pytest.raises(ShapeError):
            matmul(np.ones((2, 3)), np.ones((4, 2)))

    def test_batched_gradient(self):
        rng = _rng(4)
        a, b = rng.standard_normal((2, 3, 4)), rng.standard_normal((4, 5))
        w = rng.standard_normal((2, 3, 5))
        res = check_gradients(lambda x, y: reduce_sum(matmul(x, y) * w), [a, b])
        assert res.passed(RTOL)


class TestReduce:
    def test_mean(self):
        assert reduce("mean", [1.0, 2.0, 3.0, 4.0]).item() == 2.5

    def test_sum_axis0(self):
        np.testing.assert_array_equal(reduce("sum", [[1.0, 2.0], [3.0, 4.0]], axis=0).data, [4.0, 6.0])

    def test_max_tie_goes_to_first(self):
        x = Tensor(np.full(4, 7.0), requires_grad=True)
        out = reduce_max(x)
        out.backward()
        assert out.item() == 7.0
        np.testing.assert_array_equal(x.grad, [1.0, 0.0, 0.0, 0.0])

    def test_invalid_axis(self):
        with pytest.raises(ShapeError):
            reduce("sum", np.ones((2, 2)), axis=3)

    def test_mean_distributes_one_over_count(self):
        x = Tensor(np.ones((2, 5)), requires_grad=True)
        reduce("mean", x).backward()
        np.testing.assert_array_equal(x.grad, np.full((2, 5), 0.1))


class TestBackward:
    def test_square(self):
        x = Tensor(3.0, requires_grad=True)
        (x * x).backward()
        assert x.grad == 6.0

    def test_sum_of_product(self):
        rng = _rng(5)
        a = Tensor(rng.standard_normal((3, 4)), requires_grad=True)
        b = rng.standard_normal((4,))
        reduce_sum(a * b).backward()
        np.testing.assert_array_equal(a.grad, np.broadcast_to(b, (3, 4)))

    def test_two_consumers_accumulate(self):
        x = Tensor(2.0, requires_grad=True)
        y = x * 3.0
        (y * y + y).backward()
        # d/dx (9x^2 + 3x) = 18x + 3
        assert x.grad == 39.0

    def test_non_scalar_root(self):
        x = Tensor(np.ones(3), requires_grad=True)
        with pytest.raises(ShapeError):
            (x * 2.0).backward()

    def test_tape_single_use(self):
        x = Tensor(np.ones(3), requires_grad=True)
        loss = reduce_sum(x * x)
        loss.backward()
        with pytest.raises(TapeConsumedError):
            loss.backward()

    def test_no_grad_records_nothing(self):
        x = Tensor(np.ones(3), requires_grad=True)
        with no_grad():
            y = x * 2.0
        assert not y.requires_grad

    def test_random_expression_graph(self):
        """A chain of about twenty mixed operations against central differences."""
        rng = _rng(6)
        a = rng.uniform(-2, 2, (3, 4))
        b = rng.uniform(-2, 2, (4, 3))
        c = rng.uniform(0.5, 2, (3,))

        def f(a, b, c):
            h = matmul(a, b)
            h = elementwise("sin", h) * c + elementwise("exp", h * 0.3)
            h = gelu(h) - elementwise("cos", h) / (c + 1.0)
            h = softmax(h, axis=-1) * elementwise("sqrt", h * h + 1.0)
            h = concat([h, elementwise("log", c.reshape(1, 3) + 2.0)], axis=0)
            p, q = split(h, 2, axis=0)
            h = roll(p, 1, axis=1) * reduce_sum(q, axis=0)
            h = where(h.data > 0, h, h * 0.5)
            return reduce_sum(h * h) + reduce_max(h)

        res = check_gradients(f, [a, b, c])
        assert res.passed(RTOL), res.max_rel_error


class TestStructuralOps:
    def test_getitem_gradient(self):
        rng = _rng(7)
        x = rng.standard_normal((4, 5))
        w = rng.standard_normal((2, 3))
        res = check_gradients(lambda t: reduce_sum(getitem(t, (slice(1, 3), [0, 2, 2])) * w), [x])
        assert res.passed(RTOL)

    def test_pad_and_roll_gradient(self):
        rng = _rng(8)
        x = rng.standard_normal((2, 3, 3))
        w = rng.standard_normal((2, 5, 5))
        res = check_gradients(lambda t: reduce_sum(roll(pad(t, ((0, 0), (1, 1), (1, 1))), (1, -1), (1, 2)) * w), [x])
        assert res.passed(RTOL)

    def test_conv2d_loop_oracle(self):
        rng = _rng(9)
        x = rng.standard_normal((1, 2, 6, 6))
        w = rng.standard_normal((3, 2, 3, 3))
        b = rng.standard_normal(3)
        got = conv2d(x, w, b, stride=2, padding=1).data
        xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
        want = np.zeros((1, 3, 3, 3))
        for o in range(3):
            for i in range(3):
                for j in range(3):
                    want[0, o, i, j] = np.sum(xp[0, :, 2 * i : 2 * i + 3, 2 * j : 2 * j + 3] * w[o]) + b[o]
        np.testing.assert_allclose(got, want, atol=1e-12)

    def test_conv2d_gradient(self):
        rng = _rng(10)
        x = rng.standard_normal((2, 2, 5, 5))
        w = rng.standard_normal((3, 2, 3, 3))
        b = rng.standard_normal(3)
        probe = rng.standard_normal((2, 3, 3, 3))
        res = check_gradients(lambda x, w, b: reduce_sum(conv2d(x, w, b, stride=2, padding=1) * probe), [x, w, b])
        assert res.passed(RTOL)


class TestAdam:
    def test_zero_gradient_is_fixed_point(self):
        p = Tensor(np.array([1.0, -2.0]), requires_grad=True)
        p.grad = np.zeros(2)
        adam_step([p], AdamState(), lr=0.1)
        np.testing.assert_array_equal(p.data, [1.0, -2.0])

    def test_descends_on_square(self):
        x = Tensor(1.0, requires_grad=True)
        (x * x).backward()
        adam_step([x], AdamState(), lr=0.1)
        assert x.data < 1.0
        assert x.grad is None

    def test_quadratic_minimum(self):
        target = np.array([0.7, -1.3])
        scale = np.array([1.0, 4.0])
        x = Tensor(np.zeros(2), requires_grad=True)
        opt = Adam([x], lr=0.05)
        for _ in range(200):
            reduce_sum(scale * (x - target) ** 2).backward()
            opt.step()
        # the minimiser of sum(s (x - t)^2) is t
        assert np.max(np.abs(x.data - target)) < 1e-3

    def test_missing_grad(self):
        p = Tensor(np.ones(2), requires_grad=True)
        with pytest.raises(MissingGradError):
            adam_step([p], AdamState(), lr=0.1)

    def test_non_finite_grad_leaves_params_untouched(self):
        p = Tensor(np.ones(2), requires_grad=True)
        q = Tensor(np.ones(2), requires_grad=True)
        p.grad = np.ones(2)
        q.grad = np.array([np.nan, 1.0])
        with pytest.raises(NonFiniteError):
            adam_step([p, q], AdamState(), lr=0.1)
        np.testing.assert_array_equal(p.data, np.ones(2))


class TestCheckpoint:
    def test_round_trip_is_bit_exact(self, tmp_path):
        rng = _rng(11)
        state = {"a.weight": rng.standard_normal((3, 4)), "b": np.array(2.5), "c.bias": rng.standard_normal(7)}
        path = tmp_path / "m.ckpt"
        save_checkpoint(str(path), state)
        back = load_checkpoint(str(path))
        assert list(back) == list(state)
        for k in state:
            assert back[k].shape == state[k].shape
            assert back[k].tobytes() == state[k].tobytes()

    def test_truncated_file(self, tmp_path):
        path = tmp_path / "m.ckpt"
        save_checkpoint(str(path), {"w": np.ones((4, 4))})
        data = path.read_bytes()
        path.write_bytes(data[:-8])
        with pytest.raises(CheckpointError):
            load_checkpoint(str(path))

    def test_not_a_checkpoint(self, tmp_path):
        path = tmp_path / "junk.ckpt"
        path.write_bytes(b"hello\n")
        with pytest.raises(CheckpointError):
            load_checkpoint(str(path))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=1, max_size=6), st.lists(st.floats(-2, 2), min_size=1, max_size=6))
def test_outer_add_matches_numpy(xs, ys):
    a = np.array(xs)[:, None]
    b = np.array(ys)[None, :]
    np.testing.assert_array_equal(elementwise("add", a, b).data, a + b)
