"""Predict inference latency, memory, and energy of a DL computation graph.

The pipeline: a JSON (or zoo-built) operator graph is featurized into a node
feature matrix plus adjacency and a 5-wide static-feature vector; a three-block
message-passing network with an FC head regresses the three costs; a rule maps
the predicted memory to an NVIDIA A100 MIG partition profile.
"""

from .dataset import (
    DatasetRecord,
    MapeResult,
    SplitSpec,
    TargetVector,
    mape,
    oracle_labels,
    read_dataset,
    record_from_graph,
    split,
    synth_dataset,
    write_dataset,
)
from .featurize import (
    GraphEncoding,
    StaticFeatures,
    VOCAB_VERSION,
    compute_macs,
    create_graph_encoding,
    encode_node,
    filter_and_preprocess,
    static_features,
)
from .gnn import (
    DippmModel,
    MlpModel,
    TrainConfig,
    load_model,
    predict,
    predict_record,
    save_model,
    train,
    train_mlp,
)
from .graph_ir import (
    ComputationGraph,
    IRNode,
    OperatorKind,
    ZooSpec,
    build_zoo_model,
    infer_shapes,
    parse_graph_json,
    serialize_graph,
    with_batch_size,
)
from .mig import MigProfile, mig_profile

__version__ = "0.1.0"
