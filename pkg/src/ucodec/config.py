"""Run configuration: a sectioned text file (INI) with strict key checking.

Sections ``codec``, ``train``, ``lm``. Unknown sections or keys are rejected;
every value is type-checked; cross-field consistency is validated before any
model memory is allocated.
"""

import configparser
from dataclasses import asdict, dataclass, field, fields

from ucodec.codec import BottleneckConfig, CodecConfig
from ucodec.errors import ConfigError
from ucodec.lm import LmConfig
from ucodec.objectives.discriminators import DiscriminatorConfig
from ucodec.objectives.losses import LossWeights
from ucodec.objectives.mel import MelConfig


@dataclass(frozen=True)
class TrainSection:
    lr: float = 1e-4
    warmup_steps: int = 1000
    batch: int = 2
    steps: int = 2000
    seed: int = 0
    excerpt_samples: int = 16000
    checkpoint_every: int = 500
    weight_mel: float = 15.0
    weight_adversarial: float = 1.0
    weight_feature_matching: float = 1.0
    weight_codebook: float = 1.0
    weight_commitment: float = 0.25
    mel_windows: tuple[int, ...] = (32, 64, 128, 256, 512, 1024, 2048)
    mel_bins: tuple[int, ...] = (5, 10, 20, 40, 80, 160, 320)
    disc_periods: tuple[int, ...] = (2, 3, 5, 7, 11)
    disc_fft_sizes: tuple[int, ...] = (78, 126, 206, 334, 542, 876, 1418, 2296)
    disc_channels: int = 32

    def loss_weights(self) -> LossWeights:
        return LossWeights(self.weight_mel, self.weight_adversarial,
                           self.weight_feature_matching, self.weight_codebook,
                           self.weight_commitment)

    def mel_config(self) -> MelConfig:
        return MelConfig(self.mel_windows, self.mel_bins)

    def disc_config(self) -> DiscriminatorConfig:
        return DiscriminatorConfig(self.disc_periods, self.disc_fft_sizes,
                                   self.disc_channels)


@dataclass(frozen=True)
class LmSection:
    global_layers: int = 2
    global_dim: int = 128
    global_heads: int = 4
    global_ff: int = 512
    local_layers: int = 2
    local_dim: int = 128
    local_heads: int = 4
    local_ff: int = 512
    text_vocab: int = 256
    max_seq: int = 15000
    k_top: int = 5
    temperature: float = 1.0
    max_frames: int = 50
    lr: float = 1e-3
    warmup_steps: int = 100
    steps: int = 500
    seed: int = 0

    def lm_config(self, codec: CodecConfig) -> LmConfig:
        return LmConfig(
            n_quantizers=codec.n_quantizers,
            codebook_size=codec.codebook_size,
            text_vocab=self.text_vocab,
            global_layers=self.global_layers, global_dim=self.global_dim,
            global_heads=self.global_heads, global_ff=self.global_ff,
            local_layers=self.local_layers, local_dim=self.local_dim,
            local_heads=self.local_heads, local_ff=self.local_ff,
            max_seq=self.max_seq, k_top=self.k_top, temperature=self.temperature,
        )


@dataclass(frozen=True)
class CodecSection:
    sample_rate: int = 16000
    strides: tuple[int, ...] = (8, 5, 4, 2)
    base_channels: int = 8
    latent_dim: int = 32
    bottleneck_layers: int = 2
    bottleneck_heads: int = 2
    bottleneck_hidden: int = 32
    bottleneck_mlp: int = 64
    decoder_start_channels: int = 128
    n_quantizers: int = 4
    codebook_size: int = 64
    proj_dim: int = 8

    def codec_config(self) -> CodecConfig:
        return CodecConfig(
            sample_rate=self.sample_rate,
            strides=self.strides,
            base_channels=self.base_channels,
            latent_dim=self.latent_dim,
            bottleneck=BottleneckConfig(self.bottleneck_layers, self.bottleneck_heads,
                                        self.bottleneck_hidden, self.bottleneck_mlp),
            decoder_start_channels=self.decoder_start_channels,
            n_quantizers=self.n_quantizers,
            codebook_size=self.codebook_size,
            proj_dim=self.proj_dim,
        )


@dataclass(frozen=True)
class RunConfig:
    codec: CodecSection = field(default_factory=CodecSection)
    train: TrainSection = field(default_factory=TrainSection)
    lm: LmSection = field(default_factory=LmSection)

    def validate(self) -> "RunConfig":
        try:
            codec = self.codec.codec_config()
            self.train.loss_weights()
            self.train.mel_config()
            self.lm.lm_config(codec)
        except Exception as exc:
            raise ConfigError(f"invalid configuration: {exc}") from exc
        if self.train.excerpt_samples % codec.hop:
            raise ConfigError(
                f"excerpt_samples {self.train.excerpt_samples} is not a "
                f"multiple of hop {codec.hop}"
            )
        return self


_SECTIONS = {"codec": CodecSection, "train": TrainSection, "lm": LmSection}


def _parse_value(raw: str, annotation):
    raw = raw.strip()
    if annotation is int:
        return int(raw)
    if annotation is float:
        return float(raw)
    if annotation == tuple[int, ...]:
        return tuple(int(part) for part in raw.split(",") if part.strip())
    raise ConfigError(f"unsupported field type {annotation}")


def load_config(path) -> RunConfig:
    parser = configparser.ConfigParser()
    read = parser.read(str(path))
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    kwargs = {}
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown config section [{section}]")
        cls = _SECTIONS[section]
        known = {f.name: f.type for f in fields(cls)}
        values = {}
        for key, raw in parser.items(section):
            if key not in known:
                raise ConfigError(f"unknown key '{key}' in section [{section}]")
            try:
                values[key] = _parse_value(raw, known[key])
            except ValueError as exc:
                raise ConfigError(f"bad value for {section}.{key}: {raw!r}") from exc
        kwargs[section] = cls(**values)
    return RunConfig(**kwargs).validate()


def default_config() -> RunConfig:
    return RunConfig().validate()


def config_to_dict(cfg: RunConfig) -> dict:
    return asdict(cfg)


def config_from_dict(data: dict) -> RunConfig:
    return RunConfig(
        codec=CodecSection(**{k: _tupled(v) for k, v in data["codec"].items()}),
        train=TrainSection(**{k: _tupled(v) for k, v in data["train"].items()}),
        lm=LmSection(**{k: _tupled(v) for k, v in data["lm"].items()}),
    ).validate()


def _tupled(value):
    return tuple(value) if isinstance(value, list) else value
