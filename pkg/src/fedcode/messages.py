"""Transfer message variants exchanged between server and clients."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ProtocolError

__all__ = ["CodebookOnly", "CodebookPlusWeights", "MessageKind", "TransferMsg"]


class MessageKind(enum.Enum):
    CODEBOOK_ONLY = 0
    CODEBOOK_PLUS_WEIGHTS = 1


def _check_codebook(codebook: np.ndarray) -> np.ndarray:
    cb = np.asarray(codebook, dtype=np.float64)
    if cb.ndim != 1 or cb.size == 0:
        raise ProtocolError(f"message codebook must be non-empty 1-D, got shape {cb.shape}")
    if not np.all(np.isfinite(cb)):
        raise ProtocolError("message codebook must be finite")
    if np.any(np.diff(cb) < 0):
        raise ProtocolError("message codebook must be sorted ascending")
    return cb


@dataclass(frozen=True)
class CodebookOnly:
    """Centers only; the receiver snaps its stored weights onto them."""

    codebook: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "codebook", _check_codebook(self.codebook))

    @property
    def kind(self) -> MessageKind:
        return MessageKind.CODEBOOK_ONLY


@dataclass(frozen=True)
class CodebookPlusWeights:
    """Centers plus the per-parameter index vector (a full compressed model)."""

    codebook: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        cb = _check_codebook(self.codebook)
        idx = np.asarray(self.weights)
        if idx.ndim != 1 or idx.size == 0:
            raise ProtocolError(f"weight indices must be non-empty 1-D, got shape {idx.shape}")
        if not np.issubdtype(idx.dtype, np.integer):
            raise ProtocolError(f"weight indices must be integer, got dtype {idx.dtype}")
        if int(idx.min()) < 0 or int(idx.max()) >= cb.size:
            raise ProtocolError(f"weight index out of range for {cb.size} centers")
        object.__setattr__(self, "codebook", cb)
        object.__setattr__(self, "weights", idx.astype(np.int64))

    @property
    def kind(self) -> MessageKind:
        return MessageKind.CODEBOOK_PLUS_WEIGHTS


TransferMsg = CodebookOnly | CodebookPlusWeights
