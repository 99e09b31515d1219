"""Exact inference for discrete belief networks.

Clique-forest propagation with selective message passing, cutset
conditioning with batched per-instance potentials, bounded conditioning with
exact interval posteriors, a synthetic-network benchmark harness, and an
interactive diagnosis-session service.
"""

from .bounded import BoundedEngine, IntervalPosterior, RetentionPolicy
from .conditioning import (
    CutsetEnsemble,
    CutsetInstance,
    LikelihoodRecord,
    LoopCutset,
    decompose,
    init_ensemble,
    select_cutset,
)
from .errors import (
    BeliefForestError,
    CutsetMemberError,
    EvidenceConflictError,
    ImpossibleEvidenceError,
    NetworkFormatError,
    NetworkValidationError,
    NotCalibratedError,
    ObservationNotFoundError,
    UnknownNodeError,
    UnknownValueError,
)
from .forest import (
    CliqueForest,
    ForestStructure,
    PropagationReport,
    build_forest,
    forest_likelihood,
    structure_for,
)
from .graphs import moralize, triangulate
from .network import (
    BeliefNetwork,
    ConditionalTable,
    Evidence,
    NodeDef,
    load_evidence,
    load_network,
    network_from_document,
)
from .oracle import (
    enumerate_posterior,
    evidence_likelihood_oracle,
    full_joint,
    joint_probability,
)
from .synth import (
    CaseSample,
    PortionSpec,
    SyntheticSpec,
    default_spec,
    feature_groups,
    generate,
    sample_cases,
)

__version__ = "0.1.0"
