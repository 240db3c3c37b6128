"""Round scheduling and the server/client state machine.

Rounds are 1-based. During the first calibration_rounds rounds both link
directions carry a full compressed model (codebook plus indices); afterwards
a direction carries one only when its period divides the round index, and a
bare codebook otherwise. Periods derive from exchange frequencies as
round(1/f); a frequency of zero means never after calibration.

Server and client transitions are pure: they consume a state and return a
replacement, with all randomness derived from explicit seeds.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .clustering import (
    Codebook,
    KMeansConfig,
    concat_sorted,
    decompress,
    kmeans_fit,
    snap,
)
from .errors import ProtocolError
from .messages import CodebookOnly, CodebookPlusWeights, MessageKind, TransferMsg
from .model import FlatParams, LabeledDataset, ModelSpec, TrainConfig, local_train
from .seeding import ROLE_SERVER, derive_seed

__all__ = [
    "ClientState",
    "Schedule",
    "ServerState",
    "client_update",
    "downlink_kind",
    "server_aggregate",
    "server_broadcast",
    "uplink_kind",
    "weighted_mean",
]


def _period_from_frequency(frequency: float, name: str) -> int | None:
    if not 0 <= frequency <= 1:
        raise ValueError(f"{name} must lie in [0, 1], got {frequency}")
    if frequency == 0:
        return None
    return max(1, round(1 / frequency))


@dataclass(frozen=True)
class Schedule:
    """Exchange frequencies resolved into integer periods."""

    f1: float  # downlink full-model frequency
    f2: float  # uplink full-model frequency
    calibration_rounds: int
    period1: int | None
    period2: int | None

    @classmethod
    def from_frequencies(
        cls,
        f1: float,
        f2: float,
        calibration_rounds: int,
        period1: int | None = None,
        period2: int | None = None,
    ) -> "Schedule":
        """Build a schedule, deriving periods unless given explicitly."""
        if calibration_rounds < 0:
            raise ValueError(f"calibration_rounds must be >= 0, got {calibration_rounds}")
        p1 = period1 if period1 is not None else _period_from_frequency(f1, "f1")
        p2 = period2 if period2 is not None else _period_from_frequency(f2, "f2")
        for name, p in (("period1", p1), ("period2", p2)):
            if p is not None and p < 1:
                raise ValueError(f"{name} must be >= 1, got {p}")
        return cls(f1=f1, f2=f2, calibration_rounds=calibration_rounds, period1=p1, period2=p2)


def _link_kind(round_index: int, period: int | None, calibration_rounds: int) -> MessageKind:
    if round_index < 1:
        raise ValueError(f"round_index must be >= 1, got {round_index}")
    if round_index <= calibration_rounds:
        return MessageKind.CODEBOOK_PLUS_WEIGHTS
    if period is not None and round_index % period == 0:
        return MessageKind.CODEBOOK_PLUS_WEIGHTS
    return MessageKind.CODEBOOK_ONLY


def downlink_kind(round_index: int, schedule: Schedule) -> MessageKind:
    """What the server sends this round."""
    return _link_kind(round_index, schedule.period1, schedule.calibration_rounds)


def uplink_kind(round_index: int, schedule: Schedule) -> MessageKind:
    """What each participating client sends back this round."""
    return _link_kind(round_index, schedule.period2, schedule.calibration_rounds)


@dataclass(frozen=True)
class ServerState:
    """Global weights plus scheduling context; round_index is the next round."""

    global_params: FlatParams
    round_index: int
    schedule: Schedule
    kmeans_cfg: KMeansConfig
    seed: int


@dataclass(frozen=True)
class ClientState:
    """A client's identity, persistent local weights, and private shard."""

    client_id: int
    local_params: FlatParams
    dataset: LabeledDataset

    @property
    def sample_count(self) -> int:
        return self.dataset.sample_count


def server_broadcast(state: ServerState) -> tuple[TransferMsg, ServerState]:
    """Cluster the global weights and emit this round's downlink message.

    The server keeps the snapped weights as its canonical copy, so clustering
    an already-snapped model reproduces the same codebook and consecutive
    broadcasts without an intervening aggregation are identical.
    """
    cb, compressed = kmeans_fit(
        state.global_params,
        state.kmeans_cfg,
        derive_seed(state.seed, ROLE_SERVER, state.round_index),
    )
    snapped = decompress(compressed, cb)
    if downlink_kind(state.round_index, state.schedule) is MessageKind.CODEBOOK_PLUS_WEIGHTS:
        msg: TransferMsg = CodebookPlusWeights(codebook=cb, weights=compressed)
    else:
        msg = CodebookOnly(codebook=cb)
    return msg, replace(state, global_params=snapped)


def client_update(
    state: ClientState,
    msg: TransferMsg,
    round_index: int,
    spec: ModelSpec,
    train_cfg: TrainConfig,
    kmeans_cfg: KMeansConfig,
    schedule: Schedule,
    seed: int,
) -> tuple[TransferMsg, ClientState]:
    """Apply the downlink, train locally, cluster, and emit the uplink.

    A bare codebook snaps the client's stored weights onto the new centers; a
    full compressed model replaces them. The returned state stores the
    client's own snapped weights so the next snap starts from them.
    """
    if isinstance(msg, CodebookPlusWeights):
        if msg.weights.size != state.local_params.size:
            raise ProtocolError(
                f"downlink carries {msg.weights.size} indices for a model of "
                f"{state.local_params.size} parameters"
            )
        params = decompress(msg.weights, msg.codebook)
    elif isinstance(msg, CodebookOnly):
        params = snap(state.local_params, msg.codebook)
    else:
        raise ProtocolError(f"unknown downlink message type {type(msg).__name__}")

    trained = local_train(spec, params, state.dataset, train_cfg, derive_seed(seed, 0))
    cb, compressed = kmeans_fit(trained, kmeans_cfg, derive_seed(seed, 1))
    snapped = decompress(compressed, cb)

    if uplink_kind(round_index, schedule) is MessageKind.CODEBOOK_PLUS_WEIGHTS:
        reply: TransferMsg = CodebookPlusWeights(codebook=cb, weights=compressed)
    else:
        reply = CodebookOnly(codebook=cb)
    return reply, replace(state, local_params=snapped)


def weighted_mean(vectors: list[np.ndarray], weights: list[int]) -> np.ndarray:
    """Sample-count-weighted average, accumulated in list order."""
    if not vectors or len(vectors) != len(weights):
        raise ValueError("need matching non-empty vectors and weights")
    total = float(sum(weights))
    if total <= 0:
        raise ValueError("weights must sum to a positive value")
    acc = np.zeros_like(vectors[0], dtype=np.float64)
    for vec, w in zip(vectors, weights):
        acc += (w / total) * vec
    return acc


def server_aggregate(
    state: ServerState, uplinks: list[tuple[TransferMsg, int]]
) -> ServerState:
    """Fold client uplinks into the global weights and advance the round.

    Full compressed models aggregate by sample-count-weighted averaging of
    the decompressed weights. Bare codebooks merge into one concatenated
    codebook that the current global weights are snapped onto; re-clustering
    back to the configured size waits for the next broadcast. Mixing the two
    variants in one round is a protocol violation.
    """
    if not uplinks:
        raise ProtocolError("cannot aggregate an empty uplink set")
    kinds = {type(msg) for msg, _ in uplinks}
    if len(kinds) != 1:
        raise ProtocolError("uplinks mix codebook-only and full-model messages")

    first_msg = uplinks[0][0]
    if isinstance(first_msg, CodebookPlusWeights):
        params = [decompress(msg.weights, msg.codebook) for msg, _ in uplinks]
        sizes = [n for _, n in uplinks]
        if any(p.size != state.global_params.size for p in params):
            raise ProtocolError("uplink parameter counts disagree with the global model")
        new_global = weighted_mean(params, sizes)
    else:
        merged: Codebook = concat_sorted([msg.codebook for msg, _ in uplinks])
        new_global = snap(state.global_params, merged)
    return replace(state, global_params=new_global, round_index=state.round_index + 1)
