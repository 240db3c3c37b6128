"""Deterministic federated learning with weight-cluster codebook transfer.

Clients and the server exchange small codebooks of clustered weight values
instead of full weight tensors, periodically recalibrating with a full
compressed model. The package provides the protocol state machine, exact
transmission accounting, a desk-scale training stack, label-skew
partitioning, and a CLI for runs and sweeps.
"""

from .accounting import (
    BppRecord,
    ByteLedger,
    DtrReport,
    LedgerEntry,
    bpp_series,
    decode_message,
    dtr_empirical,
    dtr_theoretical,
    encode_message,
    fedavg_volume,
    index_bits,
    message_bits,
)
from .clustering import (
    Codebook,
    CompressedWeights,
    KMeansConfig,
    compress,
    concat_sorted,
    decompress,
    inertia,
    kmeans_fit,
    nearest_center,
    snap,
)
from .config import DEFAULTS, PRESETS, ExperimentConfig, load_config, preset_config
from .data import (
    Partition,
    PartitionConfig,
    class_concentration,
    dirichlet_partition,
    load_csv_dataset,
    sample_dirichlet,
    split_train_test,
    synth_blobs,
)
from .errors import (
    ConfigurationError,
    CorruptMessageError,
    ProtocolError,
    ShrunkCodebookWarning,
)
from .messages import CodebookOnly, CodebookPlusWeights, MessageKind, TransferMsg
from .model import (
    AdamState,
    FlatParams,
    LabeledDataset,
    ModelSpec,
    TrainConfig,
    evaluate,
    init_params,
    local_train,
    loss_and_grad,
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
from .runner import (
    CSV_COLUMNS,
    PreparedData,
    RoundRecord,
    RunReport,
    SCHEMA_VERSION,
    SweepCell,
    accounting_only,
    prepare_data,
    run,
    run_experiment,
    sweep,
    write_dtr_csv,
    write_run_csv,
    write_sweep_csv,
)

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "BppRecord",
    "ByteLedger",
    "CSV_COLUMNS",
    "ClientState",
    "Codebook",
    "CodebookOnly",
    "CodebookPlusWeights",
    "CompressedWeights",
    "ConfigurationError",
    "CorruptMessageError",
    "DEFAULTS",
    "DtrReport",
    "ExperimentConfig",
    "FlatParams",
    "KMeansConfig",
    "LabeledDataset",
    "LedgerEntry",
    "MessageKind",
    "ModelSpec",
    "PRESETS",
    "Partition",
    "PartitionConfig",
    "PreparedData",
    "ProtocolError",
    "RoundRecord",
    "RunReport",
    "SCHEMA_VERSION",
    "Schedule",
    "ServerState",
    "ShrunkCodebookWarning",
    "SweepCell",
    "TrainConfig",
    "TransferMsg",
    "accounting_only",
    "bpp_series",
    "class_concentration",
    "client_update",
    "compress",
    "concat_sorted",
    "decode_message",
    "decompress",
    "dirichlet_partition",
    "downlink_kind",
    "dtr_empirical",
    "dtr_theoretical",
    "encode_message",
    "evaluate",
    "fedavg_volume",
    "index_bits",
    "inertia",
    "init_params",
    "kmeans_fit",
    "load_config",
    "load_csv_dataset",
    "local_train",
    "loss_and_grad",
    "message_bits",
    "nearest_center",
    "prepare_data",
    "preset_config",
    "run",
    "run_experiment",
    "sample_dirichlet",
    "server_aggregate",
    "server_broadcast",
    "snap",
    "split_train_test",
    "sweep",
    "synth_blobs",
    "uplink_kind",
    "weighted_mean",
    "write_dtr_csv",
    "write_run_csv",
    "write_sweep_csv",
]
