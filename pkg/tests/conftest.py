"""Общие фикстуры: маленькая модель, синтетические клипы, временные каталоги."""
import numpy as np
import pytest

from backend.ccc.audio import AudioSample
from backend.ccc.augment import synthetic_noise_bank, synthetic_rir_bank
from backend.ccc.clustering import ClusterConfig
from backend.ccc.loss import LossConfig
from backend.ccc.model import ModelConfig, QuantizerConfig
from backend.ccc.trainer import LRScheduleConfig, PathsConfig, TrainConfig, synthetic_samples

# 0.5 с при шаге 320 и поле 400: NF = 24
HALF_SECOND = 8000


@pytest.fixture
def tiny_model_config():
    return ModelConfig(
        encoder_channels=(8,) * 7,
        d_latent=16,
        d_context=16,
        n_transformer_layers=1,
        n_heads=2,
        d_ffn=32,
        quantizer=QuantizerConfig(groups=2, entries_per_group=8, d_code=8),
    )


@pytest.fixture
def clips():
    return synthetic_samples(8, seed=0, duration_s=HALF_SECOND / 16000)


@pytest.fixture
def train_config(tiny_model_config, tmp_path):
    return TrainConfig(
        model=tiny_model_config,
        loss=LossConfig(n_negatives=10),
        lr_schedule=LRScheduleConfig(peak_lr=1e-3, warmup_updates=1, total_updates=3),
        paths=PathsConfig(out_dir=str(tmp_path / "run"), corpus_dir=str(tmp_path / "corpus")),
        batch_size=4,
        checkpoint_every=0,
        log_every=1,
    )


@pytest.fixture
def ccc_config(train_config):
    config = train_config
    config.augment.recipe = "II"
    config.augment.noise_bank = synthetic_noise_bank(0, count=3, length=HALF_SECOND)
    config.augment.rir_bank = synthetic_rir_bank(0, count=2)
    config.loss.alpha, config.loss.beta, config.loss.gamma = 1.0, 0.5, 0.5
    config.loss.sf = 0.3
    config.loss.clustering = ClusterConfig(cf=4, pooled=True)
    return config


@pytest.fixture
def rng():
    return np.random.default_rng(42)


def make_sample(values, sample_id="clip", rate=16000):
    return AudioSample(np.asarray(values, dtype=np.float32), rate, sample_id)
