"""Experiment orchestration: full runs, accounting-only runs, and sweeps.

Three methods share one reporting shape. "fedavg" exchanges full weight
vectors, "fedavg_ws" clusters weights every round but still ships a full
compressed model both ways, and "fedcode" follows the codebook-transfer
schedule. All loops draw their randomness through seed derivation keyed by
(master seed, role, round, client), so reports are bitwise reproducible
regardless of worker count.
"""

from __future__ import annotations

import concurrent.futures
import csv
import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from .accounting import (
    ByteLedger,
    DtrReport,
    dtr_empirical,
    index_bits,
    message_bits,
)
from .clustering import KMeansConfig, decompress, kmeans_fit
from .config import SWEEP_AXES, ExperimentConfig
from .data import (
    PartitionConfig,
    dirichlet_partition,
    load_csv_dataset,
    split_train_test,
    synth_blobs,
)
from .errors import ConfigurationError
from .messages import CodebookPlusWeights, MessageKind, TransferMsg
from .model import (
    LabeledDataset,
    ModelSpec,
    TrainConfig,
    evaluate,
    init_params,
    local_train,
)
from .protocol import (
    ClientState,
    Schedule,
    ServerState,
    client_update,
    downlink_kind,
    server_aggregate,
    server_broadcast,
    uplink_kind,
    weighted_mean,
)
from .seeding import ROLE_CLIENT, ROLE_INIT, ROLE_SAMPLING, ROLE_SERVER, derive_rng, derive_seed

__all__ = [
    "CSV_COLUMNS",
    "PreparedData",
    "RoundRecord",
    "RunReport",
    "SCHEMA_VERSION",
    "SweepCell",
    "accounting_only",
    "prepare_data",
    "run",
    "run_experiment",
    "sweep",
    "write_dtr_csv",
    "write_run_csv",
    "write_sweep_csv",
]

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
CSV_COLUMNS = (
    "round",
    "test_accuracy",
    "down_bits",
    "up_bits",
    "cumulative_bits",
    "down_bpp",
    "up_bpp",
)


@dataclass(frozen=True)
class RoundRecord:
    round_index: int
    test_accuracy: float
    down_bits: int
    up_bits: int
    cumulative_bits: int
    down_bpp: float
    up_bpp: float


@dataclass
class RunReport:
    """Per-round series plus the summary a run prints and writes."""

    method: str
    records: list[RoundRecord]
    final_accuracy: float
    best_accuracy: float
    dtr: DtrReport
    ledger: ByteLedger
    param_count: int


@dataclass(frozen=True)
class PreparedData:
    spec: ModelSpec
    train: LabeledDataset
    test: LabeledDataset
    shards: tuple[LabeledDataset, ...]


@dataclass(frozen=True)
class SweepCell:
    axis_values: dict[str, float | int]
    report: RunReport


def prepare_data(config: ExperimentConfig) -> PreparedData:
    """Materialize datasets, the client partition, and the model spec."""
    if config.dataset == "blobs":
        train, test = synth_blobs(
            config.n_per_class,
            config.num_classes,
            config.input_dim,
            config.spread,
            config.seed,
        )
        spec = ModelSpec(config.input_dim, config.hidden_dims, config.num_classes)
    else:
        full = load_csv_dataset(config.csv_path)
        train, test = split_train_test(full, config.test_fraction, config.seed)
        num_classes = int(full.labels.max()) + 1
        if num_classes < 2:
            raise ConfigurationError("csv dataset must contain at least two classes")
        spec = ModelSpec(full.input_dim, config.hidden_dims, num_classes)
    partition = dirichlet_partition(
        train.labels,
        PartitionConfig(num_clients=config.num_clients, beta=config.beta, seed=config.seed),
    )
    shards = tuple(train.subset(idx) for idx in partition.assignments)
    return PreparedData(spec=spec, train=train, test=test, shards=shards)


def _sample_clients(master_seed: int, round_index: int, num_clients: int, rho: float) -> list[int]:
    """IDs participating this round: ceil(rho * N) drawn without replacement."""
    count = max(1, min(num_clients, math.ceil(rho * num_clients - 1e-9)))
    if count == num_clients:
        return list(range(num_clients))
    rng = derive_rng(master_seed, ROLE_SAMPLING, round_index)
    chosen = rng.choice(num_clients, size=count, replace=False)
    return sorted(int(c) for c in chosen)


def _client_seed(master_seed: int, round_index: int, client_id: int) -> int:
    return derive_seed(master_seed, ROLE_CLIENT, round_index, client_id)


def _schedule_for(config: ExperimentConfig) -> Schedule:
    if config.method == "fedavg_ws":
        return Schedule.from_frequencies(1.0, 1.0, 0)
    return Schedule.from_frequencies(
        config.f1, config.f2, config.calibration_rounds, config.period1, config.period2
    )


def _train_cfg(config: ExperimentConfig) -> TrainConfig:
    return TrainConfig(
        local_epochs=config.local_epochs,
        batch_size=config.batch_size,
        learning_rate=config.learning_rate,
        adam_beta1=config.adam_beta1,
        adam_beta2=config.adam_beta2,
        adam_epsilon=config.adam_epsilon,
        optimizer=config.optimizer,
    )


def _kmeans_cfg(config: ExperimentConfig) -> KMeansConfig:
    return KMeansConfig(
        clusters=config.clusters,
        max_iterations=config.kmeans_max_iterations,
        rel_tolerance=config.kmeans_rel_tolerance,
    )


def _map_clients(workers: int, fn: Callable, client_ids: list[int]) -> list:
    """Apply fn to each id, optionally across threads; output order is fixed."""
    if workers <= 1 or len(client_ids) <= 1:
        return [fn(m) for m in client_ids]
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, client_ids))


MessageHook = Callable[[int, str, int, TransferMsg], None]


def _finish_report(
    method: str,
    records: list[RoundRecord],
    ledger: ByteLedger,
    param_count: int,
    wordlength: int,
) -> RunReport:
    baseline_down = ledger.message_count("down") * param_count * wordlength
    baseline_up = ledger.message_count("up") * param_count * wordlength
    return RunReport(
        method=method,
        records=records,
        final_accuracy=records[-1].test_accuracy,
        best_accuracy=max(r.test_accuracy for r in records),
        dtr=dtr_empirical(ledger, baseline_down, baseline_up),
        ledger=ledger,
        param_count=param_count,
    )


def run_experiment(
    config: ExperimentConfig,
    data: PreparedData | None = None,
    message_hook: MessageHook | None = None,
) -> RunReport:
    """Full codebook-transfer training loop; the canonical fedcode path."""
    config.validate()
    prepared = data if data is not None else prepare_data(config)
    spec, test, shards = prepared.spec, prepared.test, prepared.shards
    p = spec.param_count
    schedule = _schedule_for(config)
    kcfg = _kmeans_cfg(config)
    tcfg = _train_cfg(config)

    params0 = init_params(spec, derive_seed(config.seed, ROLE_INIT))
    server = ServerState(
        global_params=params0,
        round_index=1,
        schedule=schedule,
        kmeans_cfg=kcfg,
        seed=config.seed,
    )
    clients = [
        ClientState(client_id=i, local_params=params0.copy(), dataset=shards[i])
        for i in range(config.num_clients)
    ]
    ledger = ByteLedger(config.wordlength)
    records: list[RoundRecord] = []
    cumulative = 0

    for round_index in range(1, config.rounds + 1):
        active = _sample_clients(
            config.seed, round_index, config.num_clients, config.participation
        )
        msg, server = server_broadcast(server)
        down_bits_each = message_bits(msg, p, config.wordlength)
        for m in active:
            ledger.record(round_index, "down", m, down_bits_each)
            if message_hook is not None:
                message_hook(round_index, "down", m, msg)

        def update(m: int, _msg=msg, _round=round_index):
            return client_update(
                clients[m],
                _msg,
                _round,
                spec,
                tcfg,
                kcfg,
                schedule,
                _client_seed(config.seed, _round, m),
            )
        results = _map_clients(config.workers, update, active)

        uplinks: list[tuple[TransferMsg, int]] = []
        up_bits_round = 0
        for m, (reply, new_state) in zip(active, results):
            clients[m] = new_state
            bits = message_bits(reply, p, config.wordlength)
            ledger.record(round_index, "up", m, bits)
            if message_hook is not None:
                message_hook(round_index, "up", m, reply)
            uplinks.append((reply, new_state.sample_count))
            up_bits_round += bits

        server = server_aggregate(server, uplinks)
        accuracy = evaluate(spec, server.global_params, test)
        down_bits_round = down_bits_each * len(active)
        cumulative += down_bits_round + up_bits_round
        records.append(
            RoundRecord(
                round_index=round_index,
                test_accuracy=accuracy,
                down_bits=down_bits_round,
                up_bits=up_bits_round,
                cumulative_bits=cumulative,
                down_bpp=down_bits_round / (p * len(active)),
                up_bpp=up_bits_round / (p * len(active)),
            )
        )
        log.debug(
            "round %d method=fedcode accuracy=%.4f down=%d up=%d",
            round_index, accuracy, down_bits_round, up_bits_round,
        )
    return _finish_report("fedcode", records, ledger, p, config.wordlength)


def _run_fedavg(config: ExperimentConfig, data: PreparedData | None = None) -> RunReport:
    """Full-weight exchange baseline; every message costs P * wordlength."""
    config.validate()
    prepared = data if data is not None else prepare_data(config)
    spec, test, shards = prepared.spec, prepared.test, prepared.shards
    p = spec.param_count
    tcfg = _train_cfg(config)

    global_params = init_params(spec, derive_seed(config.seed, ROLE_INIT))
    ledger = ByteLedger(config.wordlength)
    records: list[RoundRecord] = []
    full_bits = p * config.wordlength
    cumulative = 0

    for round_index in range(1, config.rounds + 1):
        active = _sample_clients(
            config.seed, round_index, config.num_clients, config.participation
        )
        for m in active:
            ledger.record(round_index, "down", m, full_bits)

        def update(m: int, _round=round_index, _params=global_params):
            return local_train(
                spec,
                _params,
                shards[m],
                tcfg,
                derive_seed(_client_seed(config.seed, _round, m), 0),
            )
        trained = _map_clients(config.workers, update, active)
        for m in active:
            ledger.record(round_index, "up", m, full_bits)

        global_params = weighted_mean(trained, [shards[m].sample_count for m in active])
        accuracy = evaluate(spec, global_params, test)
        round_bits = 2 * full_bits * len(active)
        cumulative += round_bits
        records.append(
            RoundRecord(
                round_index=round_index,
                test_accuracy=accuracy,
                down_bits=full_bits * len(active),
                up_bits=full_bits * len(active),
                cumulative_bits=cumulative,
                down_bpp=float(config.wordlength),
                up_bpp=float(config.wordlength),
            )
        )
    return _finish_report("fedavg", records, ledger, p, config.wordlength)


def _run_fedavg_ws(config: ExperimentConfig, data: PreparedData | None = None) -> RunReport:
    """Weight-shared baseline: cluster, ship the full compressed model, average.

    Written as its own loop (not a schedule rewrite) so equivalence with the
    fedcode path at f1 = f2 = 1 and zero calibration is a meaningful check.
    """
    config.validate()
    prepared = data if data is not None else prepare_data(config)
    spec, test, shards = prepared.spec, prepared.test, prepared.shards
    p = spec.param_count
    tcfg = _train_cfg(config)
    kcfg = _kmeans_cfg(config)

    global_params = init_params(spec, derive_seed(config.seed, ROLE_INIT))
    ledger = ByteLedger(config.wordlength)
    records: list[RoundRecord] = []
    cumulative = 0

    for round_index in range(1, config.rounds + 1):
        active = _sample_clients(
            config.seed, round_index, config.num_clients, config.participation
        )
        cb, compressed = kmeans_fit(
            global_params, kcfg, derive_seed(config.seed, ROLE_SERVER, round_index)
        )
        down_msg = CodebookPlusWeights(codebook=cb, weights=compressed)
        down_bits_each = message_bits(down_msg, p, config.wordlength)
        for m in active:
            ledger.record(round_index, "down", m, down_bits_each)

        def update(m: int, _round=round_index, _msg=down_msg):
            seed = _client_seed(config.seed, _round, m)
            theta = local_train(
                spec,
                decompress(_msg.weights, _msg.codebook),
                shards[m],
                tcfg,
                derive_seed(seed, 0),
            )
            client_cb, client_idx = kmeans_fit(theta, kcfg, derive_seed(seed, 1))
            return CodebookPlusWeights(codebook=client_cb, weights=client_idx)
        replies = _map_clients(config.workers, update, active)

        up_bits_round = 0
        for m, reply in zip(active, replies):
            bits = message_bits(reply, p, config.wordlength)
            ledger.record(round_index, "up", m, bits)
            up_bits_round += bits

        global_params = weighted_mean(
            [decompress(r.weights, r.codebook) for r in replies],
            [shards[m].sample_count for m in active],
        )
        accuracy = evaluate(spec, global_params, test)
        down_bits_round = down_bits_each * len(active)
        cumulative += down_bits_round + up_bits_round
        records.append(
            RoundRecord(
                round_index=round_index,
                test_accuracy=accuracy,
                down_bits=down_bits_round,
                up_bits=up_bits_round,
                cumulative_bits=cumulative,
                down_bpp=down_bits_round / (p * len(active)),
                up_bpp=up_bits_round / (p * len(active)),
            )
        )
    return _finish_report("fedavg_ws", records, ledger, p, config.wordlength)


def run(config: ExperimentConfig, data: PreparedData | None = None) -> RunReport:
    """Dispatch a full training run by config.method."""
    config.validate()
    if config.method == "fedavg":
        return _run_fedavg(config, data)
    if config.method == "fedavg_ws":
        return _run_fedavg_ws(config, data)
    return run_experiment(config, data)


def accounting_only(config: ExperimentConfig) -> DtrReport:
    """Scheduler plus ledger with a fixed parameter count and no model math.

    Message sizes assume every codebook is full (config.clusters centers),
    which a real run matches whenever weights stay richer than the codebook.
    """
    config.validate()
    p = config.accounting_params
    w = config.wordlength
    ledger = ByteLedger(w)
    if config.method == "fedavg":
        down_cpw = up_cpw = down_cbo = up_cbo = p * w
        schedule = _schedule_for(replace(config, method="fedcode"))
    else:
        schedule = _schedule_for(config)
        cpw_bits = config.clusters * w + p * index_bits(config.clusters)
        cbo_bits = config.clusters * w
        down_cpw = up_cpw = cpw_bits
        down_cbo = up_cbo = cbo_bits

    for round_index in range(1, config.rounds + 1):
        active = _sample_clients(
            config.seed, round_index, config.num_clients, config.participation
        )
        down_full = downlink_kind(round_index, schedule) is MessageKind.CODEBOOK_PLUS_WEIGHTS
        up_full = uplink_kind(round_index, schedule) is MessageKind.CODEBOOK_PLUS_WEIGHTS
        if config.method == "fedavg":
            down_full = up_full = True
        for m in active:
            ledger.record(round_index, "down", m, down_cpw if down_full else down_cbo)
        for m in active:
            ledger.record(round_index, "up", m, up_cpw if up_full else up_cbo)

    baseline_down = ledger.message_count("down") * p * w
    baseline_up = ledger.message_count("up") * p * w
    return dtr_empirical(ledger, baseline_down, baseline_up)


def parse_axis_values(axis: str, text: str) -> list[float | int]:
    """Parse a comma-separated axis value list with axis-appropriate types."""
    if axis not in SWEEP_AXES:
        raise ConfigurationError(
            f"unknown sweep axis {axis!r}; valid axes: {sorted(SWEEP_AXES)}"
        )
    values: list[float | int] = []
    for piece in text.split(","):
        piece = piece.strip()
        if not piece:
            continue
        try:
            values.append(int(piece) if axis in ("K", "E") else float(piece))
        except ValueError as exc:
            raise ConfigurationError(f"axis {axis} value {piece!r} is not numeric") from exc
    if not values:
        raise ConfigurationError(f"axis {axis} needs at least one value")
    return values


def sweep(config: ExperimentConfig, axes: dict[str, list[float | int]]) -> list[SweepCell]:
    """Cartesian product of runs over the given axes, master seed shared.

    Cells share no state, so a sweep over one singleton axis reproduces the
    plain run exactly.
    """
    config.validate()
    if not axes:
        raise ConfigurationError("sweep needs at least one axis")
    for axis, values in axes.items():
        if axis not in SWEEP_AXES:
            raise ConfigurationError(
                f"unknown sweep axis {axis!r}; valid axes: {sorted(SWEEP_AXES)}"
            )
        if not values:
            raise ConfigurationError(f"axis {axis} needs at least one value")

    names = list(axes.keys())
    cells: list[SweepCell] = []
    for combo in _product([axes[name] for name in names]):
        overrides = {SWEEP_AXES[name]: value for name, value in zip(names, combo)}
        cell_config = replace(config, **overrides).validate()
        report = run(cell_config)
        cells.append(SweepCell(axis_values=dict(zip(names, combo)), report=report))
        log.info("sweep cell %s final_accuracy=%.4f", dict(zip(names, combo)), report.final_accuracy)
    return cells


def _product(value_lists: list[list]) -> Iterable[tuple]:
    import itertools

    return itertools.product(*value_lists)


def _fmt(value: float | int) -> str:
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


def _report_rows(report: RunReport) -> list[list[str]]:
    rows = [
        [
            str(r.round_index),
            _fmt(r.test_accuracy),
            str(r.down_bits),
            str(r.up_bits),
            str(r.cumulative_bits),
            _fmt(r.down_bpp),
            _fmt(r.up_bpp),
        ]
        for r in report.records
    ]
    ledger = report.ledger
    p = report.param_count
    down_total = ledger.total_bits("down")
    up_total = ledger.total_bits("up")
    rows.append(
        [
            "summary",
            _fmt(report.final_accuracy),
            str(down_total),
            str(up_total),
            str(down_total + up_total),
            _fmt(down_total / (p * ledger.message_count("down"))),
            _fmt(up_total / (p * ledger.message_count("up"))),
        ]
    )
    return rows


def write_run_csv(report: RunReport, path: str | Path) -> Path:
    """One row per round plus a summary row, schema version SCHEMA_VERSION."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with open(target, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        writer.writerows(_report_rows(report))
    return target


def write_sweep_csv(cells: list[SweepCell], path: str | Path) -> Path:
    """Combined per-round rows for every cell, axis columns prepended."""
    if not cells:
        raise ValueError("no sweep cells to write")
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    axis_names = list(cells[0].axis_values.keys())
    with open(target, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([*axis_names, *CSV_COLUMNS])
        for cell in cells:
            prefix = [_fmt(cell.axis_values[name]) for name in axis_names]
            for row in _report_rows(cell.report):
                writer.writerow([*prefix, *row])
    return target


def write_dtr_csv(dtr: DtrReport, path: str | Path) -> Path:
    """Summary-only CSV for accounting runs."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with open(target, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["down_dtr", "up_dtr", "total_dtr", "fedavg_bits", "fedcode_bits", "transmitted_mb"]
        )
        writer.writerow(
            [
                _fmt(dtr.down_dtr),
                _fmt(dtr.up_dtr),
                _fmt(dtr.total_dtr),
                str(dtr.fedavg_bits),
                str(dtr.fedcode_bits),
                _fmt(dtr.transmitted_megabytes),
            ]
        )
    return target
