"""Transmission accounting: per-message bit costs, ledgers, reduction ratios.

Bit costs follow the protocol's cost model: a codebook costs one wordlength
per center, an index stream costs ceil(log2 K) bits per parameter (one bit
minimum for a single-center codebook). The serialized wire format physically
bit-packs index streams so ledger sizes are real, not nominal; the only
overhead is a fixed 15-byte header and zero padding to the final byte.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import CorruptMessageError
from .messages import CodebookOnly, CodebookPlusWeights, TransferMsg

__all__ = [
    "BppRecord",
    "ByteLedger",
    "DtrReport",
    "LedgerEntry",
    "bpp_series",
    "decode_message",
    "dtr_empirical",
    "dtr_theoretical",
    "encode_message",
    "fedavg_volume",
    "index_bits",
    "message_bits",
]

DEFAULT_WORDLENGTH = 32

_HEADER = struct.Struct("<BBIQB")  # version, kind, centers, params, wordlength
_WIRE_VERSION = 1


def index_bits(k: int) -> int:
    """Bits needed per index for a codebook of k centers; one bit minimum."""
    if k < 1:
        raise ValueError(f"codebook size must be >= 1, got {k}")
    return max(1, (k - 1).bit_length())


def message_bits(msg: TransferMsg, param_count: int, wordlength: int = DEFAULT_WORDLENGTH) -> int:
    """Cost of one message in bits under the accounting model."""
    if param_count < 1:
        raise ValueError(f"param_count must be >= 1, got {param_count}")
    if wordlength < 1:
        raise ValueError(f"wordlength must be >= 1, got {wordlength}")
    k = int(msg.codebook.size)
    if isinstance(msg, CodebookOnly):
        return k * wordlength
    if msg.weights.size != param_count:
        raise CorruptMessageError(
            f"message carries {msg.weights.size} indices for {param_count} parameters"
        )
    return k * wordlength + param_count * index_bits(k)


def fedavg_volume(
    rounds: int, param_count: int, wordlength: int = DEFAULT_WORDLENGTH, active_clients: int = 1
) -> int:
    """Total bits a full-weight exchange moves: both directions, all clients."""
    if min(rounds, param_count, wordlength, active_clients) < 1:
        raise ValueError("rounds, param_count, wordlength and active_clients must be >= 1")
    return 2 * rounds * active_clients * param_count * wordlength


@dataclass(frozen=True)
class LedgerEntry:
    round_index: int
    direction: str  # "down" or "up"
    client_id: int
    bits: int


@dataclass
class ByteLedger:
    """Append-only record of every transmitted message's bit cost."""

    wordlength: int = DEFAULT_WORDLENGTH
    entries: list[LedgerEntry] = field(default_factory=list)

    def record(self, round_index: int, direction: str, client_id: int, bits: int) -> None:
        if direction not in ("down", "up"):
            raise ValueError(f"direction must be 'down' or 'up', got {direction!r}")
        if bits < 1:
            raise ValueError(f"message bits must be >= 1, got {bits}")
        if round_index < 1:
            raise ValueError(f"round_index must be >= 1, got {round_index}")
        if self.entries and round_index < self.entries[-1].round_index:
            raise ValueError("round indices must be appended in non-decreasing order")
        self.entries.append(LedgerEntry(round_index, direction, client_id, int(bits)))

    def total_bits(self, direction: str | None = None) -> int:
        return sum(e.bits for e in self.entries if direction is None or e.direction == direction)

    def message_count(self, direction: str | None = None) -> int:
        return sum(1 for e in self.entries if direction is None or e.direction == direction)

    def round_indices(self) -> list[int]:
        return sorted({e.round_index for e in self.entries})

    def round_totals(self, round_index: int, direction: str) -> tuple[int, int]:
        """(bits, message count) for one round and direction."""
        rows = [
            e for e in self.entries if e.round_index == round_index and e.direction == direction
        ]
        return sum(e.bits for e in rows), len(rows)


@dataclass(frozen=True)
class DtrReport:
    """Data-transmission reduction relative to a full-weight baseline."""

    down_dtr: float
    up_dtr: float
    total_dtr: float
    fedavg_bits: int
    fedcode_bits: int

    @property
    def transmitted_megabytes(self) -> float:
        # MB as 10**6 bytes
        return self.fedcode_bits / 8 / 1_000_000


def dtr_empirical(ledger: ByteLedger, baseline_down_bits: int, baseline_up_bits: int) -> DtrReport:
    """Reduction ratios of a recorded ledger against explicit baseline volumes."""
    down = ledger.total_bits("down")
    up = ledger.total_bits("up")
    if down < 1 or up < 1:
        raise ValueError("ledger must contain traffic in both directions")
    if baseline_down_bits < 1 or baseline_up_bits < 1:
        raise ValueError("baseline volumes must be >= 1 bit")
    return DtrReport(
        down_dtr=baseline_down_bits / down,
        up_dtr=baseline_up_bits / up,
        total_dtr=(baseline_down_bits + baseline_up_bits) / (down + up),
        fedavg_bits=int(baseline_down_bits + baseline_up_bits),
        fedcode_bits=int(down + up),
    )


def dtr_theoretical(
    param_count: int,
    clusters: int,
    f1: float,
    f2: float,
    wordlength: int = DEFAULT_WORDLENGTH,
) -> float:
    """Closed-form steady-state reduction for codebook exchange at (f1, f2).

    Grows toward param_count / clusters as both frequencies approach zero.
    """
    if param_count < 1 or clusters < 1 or wordlength < 1:
        raise ValueError("param_count, clusters and wordlength must be >= 1")
    if not (0 <= f1 <= 1 and 0 <= f2 <= 1):
        raise ValueError(f"frequencies must lie in [0, 1], got ({f1}, {f2})")
    numerator = 2 * param_count * wordlength
    denominator = 2 * clusters * wordlength + (f1 + f2) * param_count * index_bits(clusters)
    return numerator / denominator


@dataclass(frozen=True)
class BppRecord:
    round_index: int
    down_bpp: float
    up_bpp: float
    running_average: float


def bpp_series(ledger: ByteLedger, param_count: int) -> list[BppRecord]:
    """Per-round bits-per-parameter by direction plus a cumulative mean.

    A round's bpp in one direction is its transmitted bits divided by
    (param_count * messages in that direction); the running average is the
    cumulative mean of the two directions' per-round bpp values.
    """
    if param_count < 1:
        raise ValueError(f"param_count must be >= 1, got {param_count}")
    records: list[BppRecord] = []
    acc = 0.0
    for i, r in enumerate(ledger.round_indices(), start=1):
        down_bits, down_n = ledger.round_totals(r, "down")
        up_bits, up_n = ledger.round_totals(r, "up")
        if down_n == 0 or up_n == 0:
            raise ValueError(f"round {r} lacks traffic in one direction")
        down_bpp = down_bits / (param_count * down_n)
        up_bpp = up_bits / (param_count * up_n)
        acc += (down_bpp + up_bpp) / 2
        records.append(BppRecord(r, down_bpp, up_bpp, acc / i))
    return records


def _pack_indices(indices: np.ndarray, k: int) -> bytes:
    width = index_bits(k)
    idx = np.asarray(indices, dtype=np.uint32)
    bits = ((idx[:, None] >> np.arange(width, dtype=np.uint32)) & 1).astype(np.uint8)
    return np.packbits(bits.ravel(), bitorder="little").tobytes()


def _unpack_indices(raw: bytes, count: int, k: int) -> np.ndarray:
    width = index_bits(k)
    needed = math.ceil(count * width / 8)
    if len(raw) != needed:
        raise CorruptMessageError(
            f"index payload holds {len(raw)} bytes, expected {needed}"
        )
    all_bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8), bitorder="little")
    if np.any(all_bits[count * width :]):
        raise CorruptMessageError("nonzero padding bits in index payload")
    bits = all_bits[: count * width].reshape(count, width).astype(np.uint64)
    values = (bits << np.arange(width, dtype=np.uint64)).sum(axis=1)
    return values.astype(np.int64)


def encode_message(msg: TransferMsg, wordlength: int = DEFAULT_WORDLENGTH) -> bytes:
    """Serialize a message: fixed header, float32 centers, packed indices.

    Header fields are little-endian (version u8, kind u8, centers u32,
    params u64, wordlength u8); codebook-only messages record zero params.
    """
    k = int(msg.codebook.size)
    centers = msg.codebook.astype(np.float32).tobytes()
    if isinstance(msg, CodebookOnly):
        header = _HEADER.pack(_WIRE_VERSION, 0, k, 0, wordlength)
        return header + centers
    p = int(msg.weights.size)
    header = _HEADER.pack(_WIRE_VERSION, 1, k, p, wordlength)
    return header + centers + _pack_indices(msg.weights, k)


def decode_message(blob: bytes) -> TransferMsg:
    """Inverse of encode_message; raises CorruptMessageError on bad payloads."""
    if len(blob) < _HEADER.size:
        raise CorruptMessageError(f"message truncated at {len(blob)} bytes")
    version, kind, k, p, _wordlength = _HEADER.unpack_from(blob)
    if version != _WIRE_VERSION:
        raise CorruptMessageError(f"unsupported wire version {version}")
    if kind not in (0, 1):
        raise CorruptMessageError(f"unknown message kind {kind}")
    if k < 1:
        raise CorruptMessageError("message carries an empty codebook")
    offset = _HEADER.size
    centers_end = offset + 4 * k
    if len(blob) < centers_end:
        raise CorruptMessageError("message truncated inside the codebook")
    centers = np.frombuffer(blob[offset:centers_end], dtype="<f4").astype(np.float64)
    if kind == 0:
        if len(blob) != centers_end:
            raise CorruptMessageError("trailing bytes after codebook-only payload")
        return CodebookOnly(codebook=centers)
    if p < 1:
        raise CorruptMessageError("weight-bearing message with zero parameters")
    indices = _unpack_indices(blob[centers_end:], p, k)
    if int(indices.max()) >= k:
        raise CorruptMessageError(f"decoded index out of range for {k} centers")
    return CodebookPlusWeights(codebook=centers, weights=indices)
