"""Topology-aware alignment of paired point clouds (ToMA).

Persistent homology of the 1-skeleton Vietoris-Rips filtration, the
directional edge-consistency loss built on its H0-death and H1-birth edges,
alternative topology objectives, and a small trainer.
"""
__version__ = "0.1.0"

from .errors import (
    BoundsMismatch,
    DegenerateEdge,
    DimMismatch,
    DuplicateId,
    InvalidMatrix,
    InvalidSpec,
    LengthMismatch,
    NonFiniteLoss,
    PairingIncomplete,
    ParseError,
    TomaError,
    TooLarge,
    ZeroVector,
)
from .geometry import (
    PairingMap,
    PointCloud,
    build_pairing,
    cosine_similarity,
    normalize,
    pairwise_distances,
    read_cloud_csv,
    write_cloud_csv,
)
from .filtration import (
    Edge,
    EdgeDecomposition,
    PersistencePair,
    PhOptions,
    brute_force_ph,
    compute_mst,
    compute_ph,
    decompose_edges,
    edge_decomposition,
)
from .diagrams import (
    PersistenceDiagram,
    PersistenceImage,
    image_l2,
    persistence_image,
    wasserstein,
)
from .alignment import (
    AlignConfig,
    LossReport,
    contrastive_loss,
    directional_consistency,
    dist_loss,
    pd_loss,
    pi_loss,
    toma_grad,
    toma_loss,
    topology_loss,
)
from .datagen import GapSpec, SynthSpec, generate, perturb_distinct
from .trainer import (
    TrainConfig,
    TrainResult,
    combined_objective,
    evaluate,
    mst_overlap,
    retrieval_recall,
    train,
)
