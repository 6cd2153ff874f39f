"""Text-to-vector encoders behind a pluggable registry.

All vectors are float32. The reference encoder is a hashed bag-of-words with
square-root damping: fully deterministic, hand-checkable, and independent of
any pretrained model. Real sentence encoders can be registered under their
own names; index files record (encoder name, dimension) so an index/query
encoder mismatch is detectable.
"""

from __future__ import annotations

import hashlib
import re

import numpy as np

from .errors import UnknownEncoderError, ZeroVectorError

DEFAULT_DIMENSION = 384

_WORD_RE = re.compile(r"\w+")

NORM_TOLERANCE = 1e-6


class Encoder:
    """Encoder contract: stateless, deterministic flag, fixed dimension."""

    name: str
    dimension: int
    deterministic: bool

    def encode(self, text: str) -> np.ndarray:
        raise NotImplementedError


class HashedBowEncoder(Encoder):
    """Reference encoder: lowercase word tokens hashed into d buckets.

    Token counts are accumulated per bucket and square-root damped so that
    repeated terms saturate instead of dominating.
    """

    deterministic = True

    def __init__(self, dimension: int = DEFAULT_DIMENSION, name: str = "hashed-bow"):
        if dimension <= 0:
            raise ValueError("dimension must be positive")
        self.dimension = dimension
        self.name = name

    def bucket(self, token: str) -> int:
        digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "big") % self.dimension

    def encode(self, text: str) -> np.ndarray:
        counts = np.zeros(self.dimension, dtype=np.float64)
        for token in _WORD_RE.findall(text.lower()):
            counts[self.bucket(token)] += 1.0
        return np.sqrt(counts).astype(np.float32)


class EncoderRegistry:
    def __init__(self):
        self._encoders: dict[str, Encoder] = {}

    def register(self, encoder: Encoder) -> None:
        self._encoders[encoder.name] = encoder

    def get(self, name: str) -> Encoder:
        try:
            return self._encoders[name]
        except KeyError:
            raise UnknownEncoderError(name) from None


def default_registry(dimension: int = DEFAULT_DIMENSION) -> EncoderRegistry:
    registry = EncoderRegistry()
    registry.register(HashedBowEncoder(dimension=dimension))
    return registry


def l2_normalize(vector: np.ndarray) -> np.ndarray:
    """Scale to unit L2 norm; raises ZeroVectorError on the zero vector."""
    norm = float(np.linalg.norm(vector))
    if norm == 0.0:
        raise ZeroVectorError("cannot normalize the zero vector")
    return (vector / norm).astype(np.float32)


def is_normalized(vector: np.ndarray, tolerance: float = NORM_TOLERANCE) -> bool:
    return abs(float(np.linalg.norm(vector)) - 1.0) <= tolerance


def encode_normalized(encoder: Encoder, text: str) -> np.ndarray | None:
    """Encode and normalize; returns None when the text embeds to zero."""
    vec = encoder.encode(text)
    if not np.any(vec):
        return None
    return l2_normalize(vec)
