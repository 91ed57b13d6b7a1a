import numpy as np
import pytest

from hairstudio.nn import tensor as T
from hairstudio.nn.tensor import NonFiniteError, Tensor, set_nan_guard

from gradcheck import check_gradients


def rng_for(name):
    return np.random.default_rng(abs(hash(name)) % 2**32)


class TestElementwiseGradients:
    @pytest.mark.parametrize(
        "name,build",
        [
            ("add", lambda a, b: T.reduce_sum(T.mul(a + b, a + b))),
            ("add_broadcast", lambda a, b: T.reduce_sum(T.mul(a + b, a + b))),
            ("mul", lambda a, b: T.reduce_sum(T.mul(a, b))),
            ("mul_scalar", lambda a: T.reduce_sum(a * 2.5)),
            ("sub", lambda a, b: T.reduce_sum(T.mul(a - b, a - b))),
            ("neg", lambda a: T.reduce_sum(T.mul(-a, -a))),
            ("pow", lambda a: T.reduce_sum(a**3.0)),
            ("abs", lambda a: T.reduce_sum(T.absolute(a))),
            ("relu", lambda a: T.reduce_sum(T.relu(a))),
            ("leaky_relu", lambda a: T.reduce_sum(T.leaky_relu(a, 0.2))),
            ("tanh", lambda a: T.reduce_sum(T.tanh(a))),
            ("softplus", lambda a: T.reduce_sum(T.softplus(a))),
            ("clip", lambda a: T.reduce_sum(T.clip(a, -0.5, 0.5))),
            ("mean", lambda a: T.reduce_mean(T.mul(a, a))),
            ("reshape", lambda a: T.reduce_sum(T.mul(a.reshape(-1), a.reshape(-1)))),
        ],
    )
    def test_op(self, name, build):
        rng = rng_for(name)
        n_inputs = build.__code__.co_argcount
        shapes = {
            "add_broadcast": [(3, 4), (1, 4)],
        }.get(name, [(3, 4)] * n_inputs)
        # keep points away from kinks of abs/relu/clip
        arrays = [rng.uniform(0.1, 0.9, s) * rng.choice([-1, 1], s) for s in shapes]
        check_gradients(build, arrays)

    def test_concat(self):
        rng = rng_for("concat")
        arrays = [rng.normal(size=(2, 3, 2, 2)), rng.normal(size=(2, 2, 2, 2))]
        check_gradients(lambda a, b: T.reduce_sum(T.mul(T.concat([a, b], axis=1), 1.7)), arrays)

    def test_upsample(self):
        rng = rng_for("up")
        arrays = [rng.normal(size=(2, 3, 4, 4))]

        def build(a):
            u = T.upsample_nearest2(a)
            return T.reduce_sum(T.mul(u, u))

        check_gradients(build, arrays)


class TestConvGradients:
    @pytest.mark.parametrize("stride,pad,k", [(1, 1, 3), (2, 1, 4), (1, 0, 3)])
    def test_conv2d(self, stride, pad, k):
        rng = rng_for(f"conv{stride}{pad}{k}")
        x = rng.normal(size=(2, 3, 8, 8))
        w = rng.normal(size=(4, 3, k, k)) * 0.5
        b = rng.normal(size=(4,))

        def build(xt, wt, bt):
            y = T.conv2d(xt, wt, bt, stride=stride, pad=pad)
            return T.reduce_sum(T.mul(y, y))

        check_gradients(build, [x, w, b])

    def test_conv_geometry_validated(self):
        x = Tensor(np.zeros((1, 1, 7, 7)))
        w = Tensor(np.zeros((1, 1, 4, 4)))
        with pytest.raises(ValueError):
            T.conv2d(x, w, stride=2, pad=1)

    def test_instance_norm(self):
        rng = rng_for("inorm")
        x = rng.normal(size=(2, 3, 5, 5))
        gamma = rng.uniform(0.5, 1.5, size=3)
        beta = rng.normal(size=3)

        def build(xt, gt, bt):
            y = T.instance_norm(xt, gt, bt)
            return T.reduce_sum(T.mul(y, y))

        # wider fd step: the normalized sum-of-squares cancels badly at 1e-6
        check_gradients(build, [x, gamma, beta], eps=1e-5)


class TestGraphMechanics:
    def test_value_reuse_accumulates(self):
        a = Tensor(np.array([2.0, 3.0]), requires_grad=True)
        out = T.reduce_sum(T.mul(a, a) + a * 4.0)
        out.backward()
        assert np.allclose(a.grad, 2 * a.data + 4)

    def test_detach_blocks_gradient(self):
        a = Tensor(np.array([1.0, 2.0]), requires_grad=True)
        out = T.reduce_sum(T.mul(a.detach(), a))
        out.backward()
        assert np.allclose(a.grad, a.data)  # only the live branch contributes

    def test_forward_determinism(self):
        rng = rng_for("det")
        x = rng.normal(size=(2, 3, 8, 8)).astype(np.float32)
        w = rng.normal(size=(4, 3, 3, 3)).astype(np.float32)
        y1 = T.conv2d(Tensor(x), Tensor(w), stride=1, pad=1).data
        y2 = T.conv2d(Tensor(x), Tensor(w), stride=1, pad=1).data
        assert np.array_equal(y1, y2)

    def test_nan_guard_raises(self):
        prev = set_nan_guard(True)
        try:
            big = Tensor(np.array([1e300]))
            with np.errstate(over="ignore"), pytest.raises(NonFiniteError):
                T.mul(big, big)
            with pytest.raises(NonFiniteError):
                Tensor(np.array([np.nan]))
        finally:
            set_nan_guard(prev)

    def test_nan_guard_togglable(self):
        prev = set_nan_guard(False)
        try:
            with np.errstate(over="ignore"):
                out = T.mul(Tensor(np.array([1e300])), Tensor(np.array([1e300])))
            assert np.isinf(out.data).all()
        finally:
            set_nan_guard(prev)

    def test_grad_shape_matches_data(self):
        rng = rng_for("shape")
        x = Tensor(rng.normal(size=(2, 3, 4, 4)), requires_grad=True)
        w = Tensor(rng.normal(size=(2, 3, 3, 3)), requires_grad=True)
        out = T.reduce_mean(T.conv2d(x, w, stride=1, pad=1))
        out.backward()
        assert x.grad.shape == x.data.shape
        assert w.grad.shape == w.data.shape
