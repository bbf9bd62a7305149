"""Игрушечная модель wav2vec 2.0.

Свёрточный энкодер сигнала -> латентные кадры Z -> контекстная сеть
(маскирование, свёрточная позиционная свёртка, трансформер) -> C.
Цели Q_t квантуются из незамаскированных латентов в замаскированных позициях.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from ..audio import MaskedBatch
from ..autodiff import Tensor, ops
from ..errors import BatchError, CheckpointError, MaskError
from ..seeding import make_rng
from .config import ModelConfig
from .quantizer import QuantizerOutput, quantize

logger = logging.getLogger(__name__)

# аддитивное смещение внимания для ключей-дополнений
PADDING_BIAS = -1e9


@dataclass
class ViewOutputs:
    """Выходы одного вида (исходного или аугментированного)"""

    z: Tensor
    c: Tensor
    c_t: Tensor
    q_t: Tensor
    quantized: QuantizerOutput


@dataclass
class EncoderOutputs:
    z: Tensor
    c: Tensor
    c_prime: Tensor
    c_t: Tensor
    c_t_prime: Tensor
    q_t: Tensor
    q_t_prime: Tensor
    code_logits: Tensor       # (2N, G, V): сначала исходный вид, затем аугментированный
    code_indices: np.ndarray  # (2N, G)
    step_counts: np.ndarray   # число замаскированных шагов на фрагмент
    mask: list
    temperature: float

    @property
    def code_probs(self) -> Tensor:
        return ops.softmax(self.code_logits, axis=-1)

    @property
    def num_steps(self) -> int:
        return int(self.step_counts.sum())


def flat_mask_index(mask_indices, num_frames: int) -> np.ndarray:
    """Индексы замаскированных кадров в развёрнутом (B·NF) массиве, по фрагментам подряд"""
    return np.concatenate([row * num_frames + np.asarray(idx) for row, idx in enumerate(mask_indices)])


class Wav2Vec2Model:
    """Параметры модели и прямой проход; параметры хранятся как именованные тензоры."""

    def __init__(self, config: ModelConfig, params: Mapping[str, Tensor]):
        self.config = config
        self.params = dict(params)

    # --- создание и состояние -------------------------------------------
    @classmethod
    def initialise(cls, config: ModelConfig, seed: Optional[int] = None, dtype=np.float32) -> "Wav2Vec2Model":
        config.validate()
        rng = make_rng(config.seed if seed is None else seed, "init")
        shapes = cls.parameter_shapes(config)
        params = {}
        for name, shape in shapes.items():
            leaf = name.rsplit(".", 1)[-1]
            if leaf in ("bias", "beta"):
                value = np.zeros(shape)
            elif leaf == "gamma":
                value = np.ones(shape)
            elif name in ("context.mask_embedding", "quantizer.codebook"):
                value = rng.uniform(0.0, 1.0, shape)
            else:
                fan_in = int(np.prod(shape[:-1]))
                value = rng.normal(0.0, 1.0 / np.sqrt(fan_in), shape)
            params[name] = Tensor(value.astype(dtype), requires_grad=True)
        return cls(config, params)

    @staticmethod
    def parameter_shapes(config: ModelConfig) -> dict[str, tuple[int, ...]]:
        shapes: dict[str, tuple[int, ...]] = {}
        c_in = 1
        for i, (k, c_out) in enumerate(zip(config.kernel_widths, config.encoder_channels)):
            shapes[f"encoder.{i}.weight"] = (k, c_in, c_out)
            shapes[f"encoder.{i}.bias"] = (c_out,)
            shapes[f"encoder.{i}.ln.gamma"] = (c_out,)
            shapes[f"encoder.{i}.ln.beta"] = (c_out,)
            c_in = c_out
        d, q = config.d_context, config.quantizer

        def linear(prefix, fan_in, fan_out):
            shapes[f"{prefix}.weight"] = (fan_in, fan_out)
            shapes[f"{prefix}.bias"] = (fan_out,)

        def norm(prefix, width):
            shapes[f"{prefix}.gamma"] = (width,)
            shapes[f"{prefix}.beta"] = (width,)

        linear("latent_proj", c_in, config.d_latent)
        linear("context.in_proj", config.d_latent, d)
        shapes["context.mask_embedding"] = (d,)
        shapes["context.pos_conv.weight"] = (config.pos_conv_kernel, d, d)
        shapes["context.pos_conv.bias"] = (d,)
        norm("context.pos_ln", d)
        for i in range(config.n_transformer_layers):
            prefix = f"context.layers.{i}"
            for part in ("q", "k", "v", "out"):
                linear(f"{prefix}.attn.{part}", d, d)
            norm(f"{prefix}.ln1", d)
            linear(f"{prefix}.ffn.fc1", d, config.d_ffn)
            linear(f"{prefix}.ffn.fc2", config.d_ffn, d)
            norm(f"{prefix}.ln2", d)
        linear("context.out_proj", d, d)
        linear("quantizer.logits", config.d_latent, q.codebook_count)
        shapes["quantizer.codebook"] = (q.groups, q.entries_per_group, q.d_code)
        linear("quantizer.proj", q.groups * q.d_code, d)
        return shapes

    def parameters(self) -> dict[str, Tensor]:
        return self.params

    @property
    def dtype(self):
        return next(iter(self.params.values())).dtype

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self.params.items()}

    def load_state_dict(self, state: Mapping[str, np.ndarray]) -> "Wav2Vec2Model":
        missing = sorted(set(self.params) - set(state))
        extra = sorted(set(state) - set(self.params))
        if missing or extra:
            raise CheckpointError(f"параметры не совпадают: нет {missing}, лишние {extra}")
        for name, tensor in self.params.items():
            value = np.asarray(state[name])
            if value.shape != tensor.shape:
                raise CheckpointError(f"{name}: форма {value.shape}, ожидается {tensor.shape}")
            tensor.data = value.astype(tensor.dtype).copy()
            tensor.grad = None
        return self

    def bind(self, params: Mapping[str, Tensor]) -> "Wav2Vec2Model":
        """Та же модель с частью параметров, подменённых заданными тензорами"""
        return Wav2Vec2Model(self.config, {**self.params, **params})

    def astype(self, dtype) -> "Wav2Vec2Model":
        return Wav2Vec2Model(self.config, {n: t.astype(dtype) for n, t in self.params.items()})

    # --- слои -----------------------------------------------------------
    def _linear(self, x: Tensor, prefix: str) -> Tensor:
        return x @ self.params[f"{prefix}.weight"] + self.params[f"{prefix}.bias"]

    def _norm(self, x: Tensor, prefix: str) -> Tensor:
        return ops.layer_norm(x, self.params[f"{prefix}.gamma"], self.params[f"{prefix}.beta"])

    def feature_encoder(self, waveforms: np.ndarray) -> Tensor:
        """(B, T) -> Z: (B, NF, d_latent)"""
        waveforms = np.asarray(waveforms, dtype=self.dtype)
        if waveforms.shape[1] < self.config.receptive_field:
            raise BatchError(
                f"длина {waveforms.shape[1]} меньше рецептивного поля {self.config.receptive_field}"
            )
        x = Tensor(waveforms[:, :, None])
        for i, stride in enumerate(self.config.strides):
            x = ops.conv1d(x, self.params[f"encoder.{i}.weight"], self.params[f"encoder.{i}.bias"], stride=stride)
            x = ops.gelu(self._norm(x, f"encoder.{i}.ln"))
        return self._linear(x, "latent_proj")

    def _attention(self, h: Tensor, prefix: str, key_bias: np.ndarray) -> Tensor:
        batch, frames, width = h.shape
        heads = self.config.n_heads
        head_dim = width // heads

        def split(t: Tensor) -> Tensor:
            return t.reshape(batch, frames, heads, head_dim).transpose(0, 2, 1, 3)

        q = split(self._linear(h, f"{prefix}.q"))
        k = split(self._linear(h, f"{prefix}.k"))
        v = split(self._linear(h, f"{prefix}.v"))
        scores = (q @ k.transpose(0, 1, 3, 2)) * (1.0 / np.sqrt(head_dim)) + key_bias
        out = ops.softmax(scores, axis=-1) @ v
        return self._linear(out.transpose(0, 2, 1, 3).reshape(batch, frames, width), f"{prefix}.out")

    def context_network(self, z: Tensor, mask: np.ndarray, padding: np.ndarray) -> Tensor:
        """Z и булевы матрицы (B, NF) маски и дополнения -> C: (B, NF, d_context)"""
        h = self._linear(z, "context.in_proj")
        if mask.any():
            h = ops.replace_rows(h, mask, self.params["context.mask_embedding"])
        keep = (~padding).astype(self.dtype)[:, :, None]
        h = h * keep
        pos = ops.conv1d(
            h,
            self.params["context.pos_conv.weight"],
            self.params["context.pos_conv.bias"],
            padding=self.config.pos_conv_kernel // 2,
        )
        h = self._norm(h + ops.gelu(pos), "context.pos_ln")
        key_bias = np.where(padding, PADDING_BIAS, 0.0).astype(self.dtype)[:, None, None, :]
        for i in range(self.config.n_transformer_layers):
            prefix = f"context.layers.{i}"
            h = self._norm(h + self._attention(h, f"{prefix}.attn", key_bias), f"{prefix}.ln1")
            ffn = self._linear(ops.gelu(self._linear(h, f"{prefix}.ffn.fc1")), f"{prefix}.ffn.fc2")
            h = self._norm(h + ffn, f"{prefix}.ln2")
        return self._linear(h, "context.out_proj")

    def quantize_targets(
        self, z_t: Tensor, temperature: float, mode: str, rng: Optional[np.random.Generator]
    ) -> tuple[Tensor, QuantizerOutput]:
        qc = self.config.quantizer
        logits = self._linear(z_t, "quantizer.logits").reshape(z_t.shape[0], qc.groups, qc.entries_per_group)
        quantized = quantize(logits, self.params["quantizer.codebook"], temperature, mode, rng)
        return self._linear(quantized.codes, "quantizer.proj"), quantized

    # --- проходы --------------------------------------------------------
    def encode(
        self,
        batch: MaskedBatch,
        *,
        temperature: float,
        mode: str = "gumbel",
        rng: Optional[np.random.Generator] = None,
        mask_indices=None,
    ) -> ViewOutputs:
        mask_indices = batch.mask_indices if mask_indices is None else mask_indices
        if mask_indices is None:
            raise MaskError("батч без масок")
        z = self.feature_encoder(batch.waveforms)
        if z.shape[1] != batch.num_frames:
            raise BatchError(f"энкодер дал {z.shape[1]} кадров, батч ожидает {batch.num_frames}")
        mask = np.zeros(batch.padding_frame_mask.shape, dtype=bool)
        for row, idx in enumerate(mask_indices):
            mask[row, idx] = True
        c = self.context_network(z, mask, batch.padding_frame_mask)
        flat = flat_mask_index(mask_indices, batch.num_frames)
        width = z.shape[-1]
        z_t = ops.gather_rows(z.reshape(-1, width), flat)
        c_t = ops.gather_rows(c.reshape(-1, c.shape[-1]), flat)
        q_t, quantized = self.quantize_targets(z_t, temperature, mode, rng)
        return ViewOutputs(z=z, c=c, c_t=c_t, q_t=q_t, quantized=quantized)

    def context_frames(self, batch: MaskedBatch) -> np.ndarray:
        """Контекстные кадры без маскирования (для линейного зонда)"""
        z = self.feature_encoder(batch.waveforms)
        return self.context_network(z, np.zeros(batch.padding_frame_mask.shape, bool), batch.padding_frame_mask).data

    def forward_pair(
        self,
        batch: MaskedBatch,
        augmented: MaskedBatch,
        *,
        step: int = 0,
        mode: str = "gumbel",
        rng: Optional[np.random.Generator] = None,
    ) -> EncoderOutputs:
        """Парный проход по X и X′ с общими масками (маски берутся из ``batch``)."""
        if batch.mask_indices is None:
            raise MaskError("маски не назначены")
        if augmented.waveforms.shape != batch.waveforms.shape or not np.array_equal(
            augmented.frame_counts, batch.frame_counts
        ):
            raise BatchError(
                f"виды различаются по числу кадров: {batch.frame_counts.tolist()} и {augmented.frame_counts.tolist()}"
            )
        temperature = self.config.quantizer.temperature_at(step)
        original = self.encode(batch, temperature=temperature, mode=mode, rng=rng)
        aug = self.encode(augmented, temperature=temperature, mode=mode, rng=rng, mask_indices=batch.mask_indices)
        step_counts = np.array([len(m) for m in batch.mask_indices], dtype=np.int64)
        logger.debug("forward_pair: шагов %d, температура %.4f", int(step_counts.sum()), temperature)
        return EncoderOutputs(
            z=original.z,
            c=original.c,
            c_prime=aug.c,
            c_t=original.c_t,
            c_t_prime=aug.c_t,
            q_t=original.q_t,
            q_t_prime=aug.q_t,
            code_logits=ops.concatenate([original.quantized.logits, aug.quantized.logits], axis=0),
            code_indices=np.concatenate([original.quantized.indices, aug.quantized.indices], axis=0),
            step_counts=step_counts,
            mask=list(batch.mask_indices),
            temperature=temperature,
        )
