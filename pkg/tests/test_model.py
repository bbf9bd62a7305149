"""Маскирование, квантователь и парный проход модели."""
import numpy as np
import pytest

from backend.ccc.audio import batch_and_pad
from backend.ccc.autodiff import Tensor, no_grad
from backend.ccc.errors import BatchError, CheckpointError, MaskError, QuantizerError
from backend.ccc.model import (
    MaskConfig,
    QuantizerConfig,
    Wav2Vec2Model,
    masked_fraction,
    quantize,
    sample_batch_masks,
    sample_mask,
)
from tests.conftest import make_sample


class TestMasking:
    def test_zero_probability_gives_one_span(self, rng):
        idx = sample_mask(50, 0.0, 10, rng)
        assert idx.size == 10
        assert np.all(np.diff(idx) == 1)

    def test_saturation(self, rng):
        np.testing.assert_array_equal(sample_mask(20, 1.0, 20, rng), np.arange(20))

    def test_span_longer_than_frames(self, rng):
        with pytest.raises(MaskError):
            sample_mask(5, 0.065, 10, rng)

    def test_indices_sorted_and_in_range(self, rng):
        for _ in range(50):
            idx = sample_mask(37, 0.2, 4, rng)
            assert np.all(np.diff(idx) > 0)
            assert idx.min() >= 0 and idx.max() < 37

    def test_masked_fraction(self):
        fraction = masked_fraction(100, MaskConfig(p_start=0.065, span_length=10), np.random.default_rng(0), 10000)
        assert abs(fraction - 0.49) < 0.02

    def test_batch_masks_skip_padding(self, clips, tiny_model_config):
        samples = [clips[0], make_sample(np.full(16000, 0.1), "long")]
        batch = batch_and_pad(samples, tiny_model_config.kernel_widths, tiny_model_config.strides)
        batch = sample_batch_masks(batch, MaskConfig(p_start=0.3, span_length=5), np.random.default_rng(1))
        assert batch.mask_indices[0].max() < batch.frame_counts[0]
        assert not (batch.mask_matrix() & batch.padding_frame_mask).any()


class TestQuantizer:
    def _inputs(self, rng, n=3, groups=2, entries=4, d=5):
        logits = Tensor(rng.normal(size=(n, groups, entries)), requires_grad=True)
        codebook = Tensor(rng.normal(size=(groups, entries, d)), requires_grad=True)
        return logits, codebook

    def test_argmax_selects_codewords(self, rng):
        logits, codebook = self._inputs(rng)
        out = quantize(logits, codebook, 1.0, "argmax")
        np.testing.assert_array_equal(out.indices, logits.data.argmax(axis=-1))
        codes = out.codes.data.reshape(3, 2, 5)
        for n in range(3):
            for g in range(2):
                np.testing.assert_array_equal(codes[n, g], codebook.data[g, out.indices[n, g]])

    def test_gumbel_is_hard_with_soft_gradient(self, rng):
        logits, codebook = self._inputs(rng)
        out = quantize(logits, codebook, 2.0, "gumbel", np.random.default_rng(0))
        out.codes.sum().backward()
        assert logits.grad is not None and np.abs(logits.grad).sum() > 0
        codes = out.codes.data.reshape(3, 2, 5)
        np.testing.assert_array_equal(codes[0, 0], codebook.data[0, out.indices[0, 0]])

    def test_argmax_has_no_selection_gradient(self, rng):
        logits, codebook = self._inputs(rng)
        quantize(logits, codebook, 1.0, "argmax").codes.sum().backward()
        assert logits.grad is None

    def test_code_probs_are_pre_noise(self, rng):
        logits, codebook = self._inputs(rng)
        out = quantize(logits, codebook, 0.5, "gumbel", np.random.default_rng(0))
        e = np.exp(logits.data - logits.data.max(axis=-1, keepdims=True))
        np.testing.assert_allclose(out.code_probs.data, e / e.sum(axis=-1, keepdims=True))

    def test_bad_temperature(self, rng):
        logits, codebook = self._inputs(rng)
        with pytest.raises(QuantizerError):
            quantize(logits, codebook, 0.0, "gumbel", rng)

    def test_gumbel_needs_rng(self, rng):
        logits, codebook = self._inputs(rng)
        with pytest.raises(QuantizerError):
            quantize(logits, codebook, 1.0, "gumbel")

    def test_temperature_schedule(self):
        config = QuantizerConfig()
        assert config.temperature_at(0) == 2.0
        assert config.temperature_at(1) == pytest.approx(2.0 * 0.999)
        assert config.temperature_at(10**6) == 0.5


class TestWav2Vec2Model:
    def _batch(self, config, samples, seed=0):
        batch = batch_and_pad(samples, config.kernel_widths, config.strides)
        return sample_batch_masks(batch, config.mask, np.random.default_rng(seed))

    def test_one_second_gives_49_frames(self, tiny_model_config):
        model = Wav2Vec2Model.initialise(tiny_model_config)
        with no_grad():
            z = model.feature_encoder(np.zeros((1, 16000)))
        assert z.shape == (1, 49, tiny_model_config.d_latent)

    def test_short_input(self, tiny_model_config):
        with pytest.raises(BatchError):
            Wav2Vec2Model.initialise(tiny_model_config).feature_encoder(np.zeros((1, 399)))

    def test_zero_input_is_finite(self, tiny_model_config):
        model = Wav2Vec2Model.initialise(tiny_model_config)
        batch = self._batch(tiny_model_config, [make_sample(np.zeros(8000))])
        out = model.forward_pair(batch, batch, mode="argmax")
        for t in (out.c, out.c_prime, out.q_t, out.q_t_prime):
            assert np.all(np.isfinite(t.data))

    def test_identity_views_collapse(self, tiny_model_config, clips):
        model = Wav2Vec2Model.initialise(tiny_model_config)
        batch = self._batch(tiny_model_config, clips[:2])
        out = model.forward_pair(batch, batch, mode="argmax")
        np.testing.assert_array_equal(out.c.data, out.c_prime.data)
        np.testing.assert_array_equal(out.q_t.data, out.q_t_prime.data)

    def test_target_shapes(self, tiny_model_config, clips):
        model = Wav2Vec2Model.initialise(tiny_model_config)
        batch = batch_and_pad(clips[:2], tiny_model_config.kernel_widths, tiny_model_config.strides)
        batch = batch.with_masks([np.arange(0, 10), np.arange(4, 24)])
        out = model.forward_pair(batch, batch, mode="gumbel", rng=np.random.default_rng(0))
        assert out.num_steps == 30
        assert out.q_t.shape == (30, tiny_model_config.d_context)
        assert out.c_t_prime.shape == (30, tiny_model_config.d_context)
        assert out.code_logits.shape == (60, 2, 8)

    def test_batch_permutation_permutes_outputs(self, tiny_model_config, clips):
        model = Wav2Vec2Model.initialise(tiny_model_config, seed=0).astype(np.float64)
        widths, strides = tiny_model_config.kernel_widths, tiny_model_config.strides
        samples = clips[:3] + [clips[3].with_samples(clips[3].samples[:6480])]
        batch = sample_batch_masks(
            batch_and_pad(samples, widths, strides, np.float64),
            MaskConfig(p_start=0.2, span_length=3),
            np.random.default_rng(0),
        )
        order = [2, 0, 3, 1]
        permuted = batch_and_pad([samples[i] for i in order], widths, strides, np.float64)
        permuted = permuted.with_masks([batch.mask_indices[i] for i in order])
        with no_grad():
            a = model.forward_pair(batch, batch, mode="argmax")
            b = model.forward_pair(permuted, permuted, mode="argmax")
        np.testing.assert_array_equal(b.step_counts, a.step_counts[order])
        np.testing.assert_allclose(b.c.data, a.c.data[order], rtol=1e-9, atol=1e-12)
        for name in ("c_t", "q_t", "c_t_prime", "q_t_prime"):
            a_rows = np.split(getattr(a, name).data, np.cumsum(a.step_counts)[:-1])
            b_rows = np.split(getattr(b, name).data, np.cumsum(b.step_counts)[:-1])
            for row, i in enumerate(order):
                np.testing.assert_allclose(b_rows[row], a_rows[i], rtol=1e-9, atol=1e-12)

    def test_duplicate_rows_identical(self, tiny_model_config, clips):
        model = Wav2Vec2Model.initialise(tiny_model_config)
        batch = batch_and_pad([clips[0], clips[0]], tiny_model_config.kernel_widths, tiny_model_config.strides)
        with no_grad():
            frames = model.context_frames(batch)
        np.testing.assert_allclose(frames[0], frames[1], rtol=1e-6, atol=1e-6)

    def test_padding_does_not_leak(self, tiny_model_config, clips):
        model = Wav2Vec2Model.initialise(tiny_model_config)
        widths, strides = tiny_model_config.kernel_widths, tiny_model_config.strides
        alone = batch_and_pad([clips[0]], widths, strides)
        padded = batch_and_pad([clips[0], make_sample(np.full(16000, 0.2), "long")], widths, strides)
        with no_grad():
            a = model.context_frames(alone)[0]
            b = model.context_frames(padded)[0, : alone.num_frames]
        np.testing.assert_allclose(a, b, rtol=1e-4, atol=1e-5)

    def test_view_frame_mismatch(self, tiny_model_config, clips):
        model = Wav2Vec2Model.initialise(tiny_model_config)
        batch = self._batch(tiny_model_config, clips[:1])
        other = batch_and_pad([make_sample(np.full(16000, 0.1))], tiny_model_config.kernel_widths, tiny_model_config.strides)
        with pytest.raises(BatchError):
            model.forward_pair(batch, other, mode="argmax")

    def test_missing_masks(self, tiny_model_config, clips):
        model = Wav2Vec2Model.initialise(tiny_model_config)
        batch = batch_and_pad(clips[:1], tiny_model_config.kernel_widths, tiny_model_config.strides)
        with pytest.raises(MaskError):
            model.forward_pair(batch, batch, mode="argmax")

    def test_initialisation_is_seeded(self, tiny_model_config):
        a = Wav2Vec2Model.initialise(tiny_model_config, seed=3).state_dict()
        b = Wav2Vec2Model.initialise(tiny_model_config, seed=3).state_dict()
        c = Wav2Vec2Model.initialise(tiny_model_config, seed=4).state_dict()
        assert all(np.array_equal(a[k], b[k]) for k in a)
        assert not np.array_equal(a["latent_proj.weight"], c["latent_proj.weight"])

    def test_state_dict_round_trip(self, tiny_model_config):
        source = Wav2Vec2Model.initialise(tiny_model_config, seed=1)
        target = Wav2Vec2Model.initialise(tiny_model_config, seed=2).load_state_dict(source.state_dict())
        for name, value in source.state_dict().items():
            np.testing.assert_array_equal(target.params[name].data, value)

    def test_state_dict_mismatch(self, tiny_model_config):
        model = Wav2Vec2Model.initialise(tiny_model_config)
        state = model.state_dict()
        state.pop("context.mask_embedding")
        with pytest.raises(CheckpointError, match="mask_embedding"):
            model.load_state_dict(state)

    def test_every_parameter_gets_gradient(self, tiny_model_config, clips):
        model = Wav2Vec2Model.initialise(tiny_model_config)
        batch = self._batch(tiny_model_config, clips[:2])
        out = model.forward_pair(batch, batch, mode="gumbel", rng=np.random.default_rng(0))
        (out.c_t.sum() + out.q_t.sum() + out.code_probs.sum()).backward()
        missing = [name for name, t in model.parameters().items() if t.grad is None]
        assert missing == []
