"""Training and architecture configuration."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

from .layout import ValidationError


@dataclass(frozen=True)
class TrainConfig:
    """Shared optimizer/training knobs for both stages.

    Defaults follow the reference setup: Adam with betas (0.9, 0.98),
    learning rate 1e-3 with linear warmup, KL weight 1e-3 at latent
    dimension 8, condition drop probability 0.1, guidance weight 1.5, and
    200 diffusion steps. Warmup/steps/batch are desk-scale.
    """

    betas: tuple[float, float] = (0.9, 0.98)
    learning_rate: float = 1e-3
    warmup_steps: int = 500
    batch_size: int = 64
    total_steps: int = 4000
    beta_kl: float = 1e-3
    latent_dim: int = 8
    p_drop: float = 0.1
    cfg_weight: float = 1.5
    diffusion_steps: int = 200
    seed: int = 0

    def __post_init__(self):
        positive = {
            "learning_rate": self.learning_rate,
            "warmup_steps": self.warmup_steps,
            "batch_size": self.batch_size,
            "total_steps": self.total_steps,
            "latent_dim": self.latent_dim,
            "cfg_weight": self.cfg_weight,
            "diffusion_steps": self.diffusion_steps,
        }
        for name, value in positive.items():
            if value <= 0:
                raise ValidationError(f"{name} must be positive, got {value}")
        if self.beta_kl < 0:
            raise ValidationError("beta_kl must be >= 0")
        if not (0.0 <= self.p_drop <= 1.0):
            raise ValidationError("p_drop must be in [0, 1]")
        if any(b <= 0 for b in self.betas):
            raise ValidationError("optimizer betas must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["betas"] = list(self.betas)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        d["betas"] = tuple(d["betas"])
        return cls(**d)


@dataclass(frozen=True)
class VaeArch:
    """First-stage transformer sizes (encoder and decoder are symmetric)."""

    width: int = 256
    layers: int = 4
    heads: int = 8
    ffn_mult: int = 4

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "VaeArch":
        return cls(**d)


@dataclass(frozen=True)
class DenoiserArch:
    """Latent denoiser and guideline-encoder transformer sizes."""

    width: int = 256
    layers: int = 6
    heads: int = 8
    ffn_mult: int = 4
    cond_width: int = 256
    cond_layers: int = 2
    time_features: int = 128

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "DenoiserArch":
        return cls(**d)
