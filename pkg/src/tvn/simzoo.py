"""Desk-scale stand-ins for image generation and image-text scoring.

A simulated model "generates" by encoding the full rendered prompt with its
own text encoder; the resulting latent is the image. Scoring compares the
latent against a text under a chosen reference encoder, maps the cosine to
percent points, and adds per-model Gaussian noise. When the claimed model's
own encoder is used as the scoring reference, the target's noise-free score
is an exact affine image of the crafting objective f1, which is what makes
the end-to-end pipeline analytically checkable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .encoders import (
    DEFAULT_DIM,
    SyntheticEncoder,
    SyntheticEncoderSpec,
    cosine,
    reference_spec,
    _h64,
    _hu,
)
from .errors import ConfigError

__all__ = [
    "SimModel",
    "SimImage",
    "ScoreModelConfig",
    "Zoo",
    "generate",
    "clip_text_score",
    "score_sample",
    "build_zoo",
    "RemoteScoreClient",
    "DEFAULT_CLOSED_IDS",
    "DEFAULT_OPEN_IDS",
]

DEFAULT_CLOSED_IDS = ("c1", "c2", "c3", "c4")
DEFAULT_OPEN_IDS = ("o1", "o2", "o3", "o4", "o5", "o6", "o7", "o8")

# Per-model score-noise std (percent points) sampled within this band at
# zoo build time. The ceiling keeps a 3-sigma acceptance band narrower than
# the structural target-vs-impostor score gap of the synthetic family.
NOISE_SIGMA_RANGE = (0.5, 1.2)


@dataclass(frozen=True)
class ScoreModelConfig:
    """Affine map from cosine to percent points, clamped to [0, 100]."""

    offset: float = 0.0
    scale: float = 33.0
    clamp: tuple[float, float] = (0.0, 100.0)

    def __post_init__(self):
        if self.scale <= 0:
            raise ConfigError("score scale must be positive")


@dataclass(frozen=True)
class SimModel:
    name: str
    encoder: SyntheticEncoder
    noise_sigma: float = 0.8

    def __post_init__(self):
        if self.noise_sigma < 0:
            raise ConfigError("noise sigma must be >= 0")


@dataclass(frozen=True)
class SimImage:
    latent: np.ndarray
    model_id: str
    prompt: str
    noise_sigma: float


def generate(model: SimModel, prompt: str) -> SimImage:
    """Deterministic generation: the latent is the model's own encoding."""
    if not prompt:
        raise ConfigError("cannot generate from an empty prompt")
    return SimImage(
        latent=model.encoder.encode_one(prompt),
        model_id=model.name,
        prompt=prompt,
        noise_sigma=model.noise_sigma,
    )


def clip_text_score(
    cfg: ScoreModelConfig,
    image: SimImage,
    text: str,
    reference,
    rng: np.random.Generator | None = None,
) -> float:
    """Percent-point similarity between a generated image and a text.

    ``reference`` is the text encoder of the scoring frame (for
    verification: the claimed model's encoder). Passing ``rng=None``
    yields the noise-free expected score.
    """
    if not text:
        raise ConfigError("cannot score against an empty text")
    score = cfg.offset + cfg.scale * cosine(image.latent, reference.encode_one(text))
    if rng is not None and image.noise_sigma > 0:
        score += rng.normal(0.0, image.noise_sigma)
    return float(np.clip(score, cfg.clamp[0], cfg.clamp[1]))


def score_sample(
    cfg: ScoreModelConfig,
    claimed: SimModel,
    actual: SimModel,
    prompt: str,
    clean_text: str,
    rng: np.random.Generator | None = None,
) -> float:
    """One verification sample: generate with ``actual``, score in the
    claimed model's frame against the perturbation-free text."""
    image = generate(actual, prompt)
    return clip_text_score(cfg, image, clean_text, claimed.encoder, rng)


@dataclass
class Zoo:
    seed: int
    closed: list[SimModel]
    open: list[SimModel]
    reference: SyntheticEncoder
    score_cfg: ScoreModelConfig = field(default_factory=ScoreModelConfig)

    @property
    def all_models(self) -> list[SimModel]:
        return [*self.closed, *self.open]

    def model(self, name: str) -> SimModel:
        for m in self.all_models:
            if m.name == name:
                return m
        raise ConfigError(f"no zoo model named {name!r}")

    def substitutes_for(self, target_id: str) -> list[SimModel]:
        return [m for m in self.closed if m.name != target_id]

    def manifest(self) -> dict:
        def row(m: SimModel) -> dict:
            return {
                "id": m.name,
                "encoder_seed": m.encoder.spec.seed,
                "dim": m.encoder.spec.dim,
                "alpha": m.encoder.spec.alpha,
                "noise_sigma": m.noise_sigma,
            }

        return {
            "seed": self.seed,
            "closed": [row(m) for m in self.closed],
            "open": [row(m) for m in self.open],
            "reference": {
                "encoder_seed": self.reference.spec.seed,
                "dim": self.reference.spec.dim,
                "alpha": self.reference.spec.alpha,
            },
            "score": {
                "offset": self.score_cfg.offset,
                "scale": self.score_cfg.scale,
                "clamp": list(self.score_cfg.clamp),
            },
        }

    @classmethod
    def from_manifest(cls, data: dict) -> "Zoo":
        def model(row: dict) -> SimModel:
            spec = SyntheticEncoderSpec(
                seed=row["encoder_seed"], dim=row["dim"], alpha=row["alpha"]
            )
            return SimModel(
                name=row["id"],
                encoder=SyntheticEncoder(spec, name=row["id"]),
                noise_sigma=row["noise_sigma"],
            )

        ref = data["reference"]
        score = data.get("score", {})
        return cls(
            seed=data["seed"],
            closed=[model(r) for r in data["closed"]],
            open=[model(r) for r in data["open"]],
            reference=SyntheticEncoder(
                SyntheticEncoderSpec(
                    seed=ref["encoder_seed"], dim=ref["dim"], alpha=ref["alpha"]
                ),
                name="reference",
            ),
            score_cfg=ScoreModelConfig(
                offset=score.get("offset", 0.0),
                scale=score.get("scale", 33.0),
                clamp=tuple(score.get("clamp", (0.0, 100.0))),
            ),
        )


def build_zoo(
    closed_ids=DEFAULT_CLOSED_IDS,
    open_ids=DEFAULT_OPEN_IDS,
    seed: int = 0,
    dim: int = DEFAULT_DIM,
) -> Zoo:
    """Assemble the model set: closed substitutable models, held-out open
    models, and the shared reference encoder. Pure function of arguments."""
    closed_ids = tuple(closed_ids)
    open_ids = tuple(open_ids)
    combined = closed_ids + open_ids
    if len(set(combined)) != len(combined):
        raise ConfigError("zoo model ids must be unique across both sets")
    if len(closed_ids) < 2:
        raise ConfigError("a zoo needs at least two closed models")

    def make(name: str) -> SimModel:
        spec = SyntheticEncoderSpec(seed=_h64(seed, "encoder", name), dim=dim)
        lo, hi = NOISE_SIGMA_RANGE
        sigma = lo + (hi - lo) * _hu(seed, "noise", name)
        return SimModel(
            name=name,
            encoder=SyntheticEncoder(spec, name=name),
            noise_sigma=round(sigma, 3),
        )

    return Zoo(
        seed=seed,
        closed=[make(n) for n in closed_ids],
        open=[make(n) for n in open_ids],
        reference=SyntheticEncoder(reference_spec(dim), name="reference"),
    )


class RemoteScoreClient:
    """Client for the remote scoring endpoint used in live verification.

    POST /score {"prompt": "...", "text": "..."} -> {"score": <percent>}
    """

    def __init__(self, endpoint: str, timeout: float = 30.0, session=None):
        import requests

        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self._session = session or requests.Session()

    def score(self, prompt: str, text: str) -> float:
        from .errors import EncoderProtocolError, EncoderTransportError
        import requests

        try:
            resp = self._session.post(
                self.endpoint + "/score",
                json={"prompt": prompt, "text": text},
                timeout=self.timeout,
            )
        except requests.RequestException as exc:
            raise EncoderTransportError(self.endpoint, str(exc))
        if resp.status_code != 200:
            raise EncoderProtocolError(
                self.endpoint, f"status {resp.status_code}"
            )
        try:
            return float(resp.json()["score"])
        except (ValueError, KeyError, TypeError):
            raise EncoderProtocolError(self.endpoint, "malformed score reply")


def dump_manifest(zoo: Zoo, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(zoo.manifest(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_manifest(path) -> Zoo:
    with open(path, encoding="utf-8") as fh:
        return Zoo.from_manifest(json.load(fh))
