import numpy as np
import pytest

from selfonn.model import (
    DEFAULT_OP_LAYERS,
    GenerativeDenseLayer,
    ModelConfig,
    ModelParameters,
    OperationalConvLayer,
    OpLayerSpec,
    clone_parameters,
    conv_geometry,
    dense_forward_cached,
    flatten_width,
    generative_dense_forward,
    init_parameters,
    model_forward,
    model_forward_cached,
    operational_conv_direct,
    operational_conv_forward,
    param_blocks,
    param_count,
    raise_to_powers,
    shape_trace,
    tanh_apply,
    zero_parameters,
)

TINY = ModelConfig(
    input_length=32,
    op_layers=(OpLayerSpec(3, 5, 2), OpLayerSpec(2, 3, 2)),
    q_order=3,
    dense_width=4,
    output_classes=2,
)


def random_layer(rng, cin, cout, kernel, q, stride, dtype=np.float64):
    weights = rng.normal(size=(cout, cin, kernel, q)).astype(dtype)
    biases = rng.normal(size=cout).astype(dtype)
    return OperationalConvLayer(weights, biases, stride)


class TestConvGeometry:
    def test_same_output_length_is_ceil(self):
        for length in (1, 5, 100, 4096):
            for stride in (1, 2, 3, 4):
                out_len, _, _ = conv_geometry(length, 7, stride, "same")
                assert out_len == -(-length // stride)

    def test_same_left_pad(self):
        assert conv_geometry(10, 5, 1, "same")[1] == 2
        assert conv_geometry(10, 4, 1, "same")[1] == 1
        assert conv_geometry(10, 1, 1, "same")[1] == 0

    def test_valid_mode(self):
        out_len, pad_l, pad_r = conv_geometry(10, 3, 1, "valid")
        assert (out_len, pad_l, pad_r) == (8, 0, 0)
        assert conv_geometry(10, 3, 2, "valid")[0] == 4

    def test_valid_rejects_short_input(self):
        with pytest.raises(ValueError):
            conv_geometry(2, 3, 1, "valid")

    def test_unknown_mode_rejected(self):
        with pytest.raises(ValueError):
            conv_geometry(10, 3, 1, "reflect")


class TestRaiseToPowers:
    def test_integer_example(self):
        out = raise_to_powers(np.array([2.0, -1.0]), 3)
        np.testing.assert_array_equal(out, [[2, -1], [4, 1], [8, -1]])

    def test_q1_is_identity_copy(self):
        x = np.random.default_rng(0).normal(size=(2, 5))
        out = raise_to_powers(x, 1)
        np.testing.assert_array_equal(out[0], x)
        assert not np.shares_memory(out, x)

    def test_unit_interval_is_closed_under_powers(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            x = rng.uniform(-1, 1, size=17)
            out = raise_to_powers(x, 5)
            assert np.all(np.abs(out) <= 1.0)

    def test_rejects_zero_order(self):
        with pytest.raises(ValueError):
            raise_to_powers(np.ones(3), 0)


class TestOperationalConvDirect:
    def test_hand_evaluated_double_sum(self):
        # K=2, Q=2, one tap polynomial pair per position, bias 0:
        #   position 0: (1*1 + 0.5*1) + (-1*-1 + 0.25*1)  = 2.75
        #   position 1: (1*-1 + 0.5*1) + (-1*2 + 0.25*4)  = -1.5
        weights = np.array([[[[1.0, 0.5], [-1.0, 0.25]]]])
        layer = OperationalConvLayer(weights, np.zeros(1), stride=1)
        out = operational_conv_direct(layer, np.array([[1.0, -1.0, 2.0]]), "valid")
        np.testing.assert_allclose(out, [[2.75, -1.5]], atol=1e-15)

    def test_zero_input_yields_bias_everywhere(self):
        rng = np.random.default_rng(2)
        layer = random_layer(rng, 2, 3, 3, 4, 1)
        out = operational_conv_direct(layer, np.zeros((2, 9)), "same")
        np.testing.assert_array_equal(out, np.tile(layer.biases[:, None], (1, 9)))

    def test_q1_matches_textbook_cross_correlation(self):
        rng = np.random.default_rng(3)
        layer = random_layer(rng, 1, 1, 3, 1, 1)
        x = rng.normal(size=(1, 10))
        out = operational_conv_direct(layer, x, "valid")
        expected = [
            float(np.dot(layer.weights[0, 0, :, 0], x[0, m:m + 3])) + layer.biases[0]
            for m in range(8)
        ]
        np.testing.assert_allclose(out[0], expected, rtol=1e-12)

    def test_channel_mismatch_rejected(self):
        layer = random_layer(np.random.default_rng(4), 2, 1, 3, 2, 1)
        with pytest.raises(ValueError):
            operational_conv_direct(layer, np.zeros((3, 10)), "same")


class TestFactorizationEquivalence:
    def test_hand_example_through_production_path(self):
        weights = np.array([[[[1.0, 0.5], [-1.0, 0.25]]]])
        layer = OperationalConvLayer(weights, np.zeros(1), stride=1)
        out = operational_conv_forward(layer, np.array([[1.0, -1.0, 2.0]]), "valid")
        np.testing.assert_allclose(out, [[2.75, -1.5]], atol=1e-15)

    def test_random_cases_match_direct_form(self):
        rng = np.random.default_rng(5)
        for kernel in (1, 2, 7, 81):
            for q in (1, 2, 3, 5):
                for stride in (1, 2, 4):
                    cin = int(rng.integers(1, 4))
                    cout = int(rng.integers(1, 4))
                    length = int(rng.integers(kernel, kernel + 40))
                    layer = random_layer(rng, cin, cout, kernel, q, stride)
                    x = rng.uniform(-1, 1, (cin, length))
                    fast = operational_conv_forward(layer, x, "same")
                    slow = operational_conv_direct(layer, x, "same")
                    np.testing.assert_allclose(fast, slow, rtol=1e-10, atol=1e-12)

    def test_float32_tolerance(self):
        rng = np.random.default_rng(6)
        layer = random_layer(rng, 2, 2, 7, 3, 2, dtype=np.float32)
        x = rng.uniform(-1, 1, (2, 50)).astype(np.float32)
        fast = operational_conv_forward(layer, x, "same")
        slow = operational_conv_direct(layer, x, "same")
        np.testing.assert_allclose(fast, slow, rtol=1e-5, atol=1e-6)


class TestGenerativeDense:
    def test_hand_evaluated_polynomial_sum(self):
        # out = (1*0.5 + 2*0.25) + (2*-0.5 + -4*0.25) + 0.1 = -0.9
        weights = np.array([[[1.0, 2.0], [2.0, -4.0]]])
        layer = GenerativeDenseLayer(weights, np.array([0.1]))
        out = generative_dense_forward(layer, np.array([0.5, -0.5]))
        np.testing.assert_allclose(out, [-0.9], atol=1e-15)

    def test_zero_input_gives_bias(self):
        rng = np.random.default_rng(7)
        layer = GenerativeDenseLayer(rng.normal(size=(3, 4, 2)), rng.normal(size=3))
        np.testing.assert_array_equal(
            generative_dense_forward(layer, np.zeros(4)), layer.biases
        )

    def test_q1_is_affine(self):
        rng = np.random.default_rng(8)
        layer = GenerativeDenseLayer(rng.normal(size=(3, 5, 1)), rng.normal(size=3))
        x = rng.normal(size=5)
        np.testing.assert_allclose(
            generative_dense_forward(layer, x),
            layer.weights[:, :, 0] @ x + layer.biases,
            rtol=1e-12,
        )

    def test_length_mismatch_rejected(self):
        layer = GenerativeDenseLayer(np.zeros((2, 4, 1)), np.zeros(2))
        with pytest.raises(ValueError):
            generative_dense_forward(layer, np.zeros(5))


class TestLayerTypes:
    def test_conv_shape_validation(self):
        with pytest.raises(ValueError):
            OperationalConvLayer(np.zeros((2, 1, 3)), np.zeros(2), 1)
        with pytest.raises(ValueError):
            OperationalConvLayer(np.zeros((2, 1, 3, 2)), np.zeros(3), 1)
        with pytest.raises(ValueError):
            OperationalConvLayer(np.zeros((2, 1, 3, 2)), np.zeros(2), 0)

    def test_dense_shape_validation(self):
        with pytest.raises(ValueError):
            GenerativeDenseLayer(np.zeros((2, 4)), np.zeros(2))
        with pytest.raises(ValueError):
            GenerativeDenseLayer(np.zeros((2, 4, 1)), np.zeros(4))

    def test_config_validation(self):
        with pytest.raises(ValueError):
            ModelConfig(input_length=0)
        with pytest.raises(ValueError):
            ModelConfig(q_order=0)
        with pytest.raises(ValueError):
            ModelConfig(op_layers=())


class TestTanh:
    def test_fixed_points_and_saturation(self):
        assert tanh_apply(np.array(0.0)) == 0.0
        big = float(tanh_apply(np.array(40.0)))
        assert 0.999 < big <= 1.0

    def test_odd_symmetry(self):
        x = np.linspace(-4, 4, 33)
        np.testing.assert_array_equal(tanh_apply(-x), -tanh_apply(x))


class TestModelForward:
    def test_zero_parameters_give_zero_outputs(self):
        params = zero_parameters(TINY, dtype=np.float64)
        out = model_forward(params, TINY, np.linspace(-1, 1, 32))
        np.testing.assert_array_equal(out, [0.0, 0.0])

    def test_outputs_bounded_and_finite(self):
        rng = np.random.default_rng(9)
        params = init_parameters(TINY, 1, dtype=np.float64)
        for _ in range(10):
            out = model_forward(params, TINY, rng.uniform(-1, 1, 32))
            assert np.all(np.isfinite(out))
            assert np.all(np.abs(out) < 1.0)

    def test_intermediate_activations_bounded(self):
        rng = np.random.default_rng(10)
        params = init_parameters(TINY, 2, dtype=np.float64)
        _, cache = model_forward_cached(params, TINY, rng.uniform(-1, 1, 32))
        for conv_cache in cache.conv:
            assert np.all(np.abs(conv_cache.activated) < 1.0)
        assert np.all(np.abs(cache.dense.activated) < 1.0)

    def test_cached_and_plain_forward_agree_bitwise(self):
        rng = np.random.default_rng(11)
        params = init_parameters(TINY, 3, dtype=np.float64)
        x = rng.uniform(-1, 1, 32)
        plain = model_forward(params, TINY, x)
        cached, _ = model_forward_cached(params, TINY, x)
        np.testing.assert_array_equal(plain, cached)

    def test_wrong_segment_length_rejected(self):
        params = init_parameters(TINY, 0)
        with pytest.raises(ValueError):
            model_forward(params, TINY, np.zeros(33))

    def test_incompatible_params_rejected(self):
        params = init_parameters(TINY, 0)
        other = ModelConfig(input_length=32,
                            op_layers=(OpLayerSpec(3, 5, 2), OpLayerSpec(2, 3, 2)),
                            q_order=2, dense_width=4, output_classes=2)
        with pytest.raises(ValueError):
            model_forward(params, other, np.zeros(32))


class TestPreActivationAffineInEachWeight:
    """Every layer output (before tanh) is affine in any single weight:
    the polynomial terms are fixed features once the input is frozen."""

    def test_conv_three_point_collinearity(self):
        rng = np.random.default_rng(12)
        layer = random_layer(rng, 2, 3, 5, 3, 2)
        x = rng.uniform(-1, 1, (2, 20))
        for _ in range(10):
            idx = tuple(rng.integers(0, s) for s in layer.weights.shape)
            base = layer.weights[idx]
            outs = []
            for delta in (0.0, 0.7, 1.4):
                layer.weights[idx] = base + delta
                outs.append(operational_conv_forward(layer, x, "same"))
            layer.weights[idx] = base
            np.testing.assert_allclose(
                outs[2] - 2 * outs[1] + outs[0],
                np.zeros_like(outs[0]), atol=1e-10,
            )

    def test_dense_three_point_collinearity(self):
        rng = np.random.default_rng(13)
        layer = GenerativeDenseLayer(rng.normal(size=(3, 6, 3)), rng.normal(size=3))
        x = rng.uniform(-1, 1, 6)
        for _ in range(10):
            idx = tuple(rng.integers(0, s) for s in layer.weights.shape)
            base = layer.weights[idx]
            outs = []
            for delta in (0.0, 0.9, 1.8):
                layer.weights[idx] = base + delta
                outs.append(generative_dense_forward(layer, x))
            layer.weights[idx] = base
            np.testing.assert_allclose(
                outs[2] - 2 * outs[1] + outs[0],
                np.zeros_like(outs[0]), atol=1e-10,
            )


class TestInitParameters:
    def test_deterministic_for_a_seed(self):
        a = init_parameters(TINY, 42, dtype=np.float64)
        b = init_parameters(TINY, 42, dtype=np.float64)
        for blk_a, blk_b in zip(param_blocks(a), param_blocks(b)):
            np.testing.assert_array_equal(blk_a, blk_b)

    def test_seeds_differ(self):
        a = init_parameters(TINY, 1)
        b = init_parameters(TINY, 2)
        assert any(
            not np.array_equal(x, y)
            for x, y in zip(param_blocks(a), param_blocks(b))
        )

    def test_weights_within_fan_bound_and_biases_zero(self):
        params = init_parameters(TINY, 5, dtype=np.float64)
        in_neurons = 1
        for layer, spec in zip(params.conv, TINY.op_layers):
            fan_in = in_neurons * spec.kernel_size * TINY.q_order
            fan_out = spec.out_neurons * spec.kernel_size * TINY.q_order
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            assert np.max(np.abs(layer.weights)) <= bound
            np.testing.assert_array_equal(layer.biases, 0)
            in_neurons = spec.out_neurons
        np.testing.assert_array_equal(params.dense.biases, 0)
        np.testing.assert_array_equal(params.output.biases, 0)

    def test_default_dtype_is_float32(self):
        assert init_parameters(TINY, 0).dtype == np.float32

    def test_clone_is_deep(self):
        params = init_parameters(TINY, 0)
        copy = clone_parameters(params)
        copy.conv[0].weights[0, 0, 0, 0] += 1.0
        assert params.conv[0].weights[0, 0, 0, 0] != copy.conv[0].weights[0, 0, 0, 0]


class TestShapesAndCounts:
    def test_shape_trace_of_default_config(self):
        trace = shape_trace(ModelConfig())
        assert trace[0] == (1, 4096)
        assert trace[-1] == (16, 128)
        assert flatten_width(ModelConfig()) == 16 * 128 == 2048

    def test_single_layer_count(self):
        cfg = ModelConfig(op_layers=(OpLayerSpec(16, 81, 2),), q_order=3,
                          dense_width=1, output_classes=1)
        in_to_conv = 1 * 16 * 81 * 3 + 16
        assert in_to_conv == 3904
        flat = flatten_width(cfg)
        expected = in_to_conv + (1 * flat * 3 + 1) + (1 * 1 * 3 + 1)
        assert param_count(cfg) == expected

    def test_default_config_count(self):
        assert param_count(ModelConfig()) == 259170

    def test_count_matches_actual_arrays(self):
        for cfg in (TINY, ModelConfig()):
            params = init_parameters(cfg, 0)
            total = sum(blk.size for blk in param_blocks(params))
            assert total == param_count(cfg)

    def test_q1_count_is_plain_cnn_count(self):
        cfg = ModelConfig(input_length=64,
                          op_layers=(OpLayerSpec(4, 5, 2), OpLayerSpec(3, 3, 2)),
                          q_order=1, dense_width=4, output_classes=2)
        conv = (1 * 4 * 5 + 4) + (4 * 3 * 3 + 3)
        dense = 4 * flatten_width(cfg) + 4
        out = 2 * 4 + 2
        assert param_count(cfg) == conv + dense + out

    def test_default_layer_table(self):
        assert tuple(DEFAULT_OP_LAYERS) == (
            (16, 81, 2), (16, 41, 2), (16, 21, 2), (16, 7, 2), (16, 7, 2)
        )
        assert sum(spec.out_neurons for spec in DEFAULT_OP_LAYERS) == 80
