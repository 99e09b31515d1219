"""Synthetic diagnosis networks shaped like the interactive-pathology setting:
one high-cardinality disease node that parents almost every feature, features
grouped into portions that disconnect once the disease node is conditioned
away, plus a couple of disease-independent features.

Generation is fully deterministic per seed: the same spec always serializes
to the same network document.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .graphs import connected_components, moralize
from .network import BeliefNetwork, ConditionalTable, NodeDef

CASE_MIN_FEATURES = 3
CASE_MAX_FEATURES = 10


@dataclass(frozen=True)
class PortionSpec:
    """One feature portion: how many features and how they interconnect.

    pattern "isolated" yields one single-feature portion per feature;
    "chain" links the features in sequence; "tree" gives every feature a
    random earlier feature of the same portion as a second parent.
    cardinalities, when given, must list one value count per feature.
    """

    pattern: str
    features: int
    cardinalities: Optional[tuple[int, ...]] = None

    def __post_init__(self):
        if self.pattern not in ("isolated", "chain", "tree"):
            raise ValueError(f"unknown portion pattern: {self.pattern!r}")
        if self.features < 1:
            raise ValueError("portion needs at least one feature")
        if self.cardinalities is not None and len(self.cardinalities) != self.features:
            raise ValueError("cardinalities must match the feature count")


@dataclass(frozen=True)
class SyntheticSpec:
    disease_cardinality: int = 63
    portions: tuple[PortionSpec, ...] = ()
    independent_features: int = 2
    seed: int = 0

    def __post_init__(self):
        if not self.portions:
            raise ValueError("spec needs at least one portion")
        if self.disease_cardinality < 2:
            raise ValueError("disease node needs at least 2 values")

    def to_document(self) -> dict:
        return {
            "disease_cardinality": self.disease_cardinality,
            "portions": [
                {
                    "pattern": p.pattern,
                    "features": p.features,
                    **(
                        {"cardinalities": list(p.cardinalities)}
                        if p.cardinalities is not None
                        else {}
                    ),
                }
                for p in self.portions
            ],
            "independent_features": self.independent_features,
            "seed": self.seed,
        }

    @classmethod
    def from_document(cls, doc: dict) -> "SyntheticSpec":
        portions = tuple(
            PortionSpec(
                pattern=p["pattern"],
                features=int(p["features"]),
                cardinalities=(
                    tuple(int(c) for c in p["cardinalities"])
                    if "cardinalities" in p
                    else None
                ),
            )
            for p in doc["portions"]
        )
        return cls(
            disease_cardinality=int(doc.get("disease_cardinality", 63)),
            portions=portions,
            independent_features=int(doc.get("independent_features", 2)),
            seed=int(doc.get("seed", 0)),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_document(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "SyntheticSpec":
        return cls.from_document(json.loads(text))


def default_spec(seed: int = 7) -> SyntheticSpec:
    """Desk-scale default: one 12-feature chain portion, 20 single-feature
    portions, 2 disease-independent features."""
    return SyntheticSpec(
        disease_cardinality=63,
        portions=(
            PortionSpec(pattern="chain", features=12),
            PortionSpec(pattern="isolated", features=20),
        ),
        independent_features=2,
        seed=seed,
    )


def _random_rows(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    # Gamma draws give skewed but never-zero rows, so likelihood ratios are
    # informative while no evidence is outright impossible.
    raw = rng.gamma(0.7, 1.0, size=shape) + 1e-3
    return raw / raw.sum(axis=-1, keepdims=True)


def generate(spec: SyntheticSpec) -> BeliefNetwork:
    """Build the network for a spec. Deterministic per seed."""
    rng = np.random.default_rng(spec.seed)
    disease = "disease"
    nodes: list[NodeDef] = [
        NodeDef(
            id=disease,
            label="disease",
            values=tuple(f"d{i + 1}" for i in range(spec.disease_cardinality)),
        )
    ]
    cpts: dict[str, ConditionalTable] = {
        disease: ConditionalTable(
            node=disease,
            parent_order=(),
            table=_random_rows(rng, (spec.disease_cardinality,)),
        )
    }
    feature_index = 0

    def add_feature(card: int, parents: tuple[str, ...]) -> str:
        nonlocal feature_index
        feature_index += 1
        node_id = f"f{feature_index:02d}"
        nodes.append(
            NodeDef(
                id=node_id,
                label=node_id,
                values=tuple(f"v{i + 1}" for i in range(card)),
            )
        )
        shape = tuple(
            len(next(n for n in nodes if n.id == p).values) for p in parents
        ) + (card,)
        cpts[node_id] = ConditionalTable(
            node=node_id, parent_order=parents, table=_random_rows(rng, shape)
        )
        return node_id

    for portion in spec.portions:
        cards = portion.cardinalities or tuple(
            int(rng.integers(2, 11)) for _ in range(portion.features)
        )
        if portion.pattern == "isolated":
            for card in cards:
                add_feature(card, (disease,))
            continue
        created: list[str] = []
        for j, card in enumerate(cards):
            if j == 0:
                parents = (disease,)
            elif portion.pattern == "chain":
                parents = (disease, created[-1])
            else:
                parents = (disease, created[int(rng.integers(0, j))])
            created.append(add_feature(card, parents))
    for _ in range(spec.independent_features):
        card = int(rng.integers(2, 11))
        add_feature(card, ())
    return BeliefNetwork(nodes, cpts)


@dataclass(frozen=True)
class CaseSample:
    """One diagnosis session's worth of observed features."""

    index: int
    observations: dict[str, int] = field(default_factory=dict)


def feature_groups(net: BeliefNetwork) -> list[tuple[str, ...]]:
    """Feature portions of a synthetic network: the components left when the
    diagnosis node (declared first) is removed from the moral graph."""
    diagnosis = net.nodes[0].id
    g = moralize(net)
    rest = tuple(v for v in g.vertices if v != diagnosis)
    adjacency = {v: {u for u in g.adjacency[v] if u != diagnosis} for v in rest}
    return connected_components(rest, adjacency)


def sample_cases(net: BeliefNetwork, n: int, seed: int) -> list[CaseSample]:
    """Draw n cases: per case, 3 to 10 features with values sampled from the
    network's forward distribution (so no case is impossible).

    Feature identity is drawn portion-first: pick a portion with unobserved
    features, then a feature within it. That keeps cases that miss the large
    portion common enough to study at 20-case scale.
    """
    if n < 1:
        raise ValueError("need at least one case")
    rng = np.random.default_rng(seed)
    diagnosis = net.nodes[0].id
    groups = feature_groups(net)
    cases = []
    for index in range(n):
        count = int(rng.integers(CASE_MIN_FEATURES, CASE_MAX_FEATURES + 1))
        remaining = [list(g) for g in groups]
        chosen: list[str] = []
        for _ in range(count):
            open_groups = [g for g in remaining if g]
            if not open_groups:
                break
            group = open_groups[int(rng.integers(0, len(open_groups)))]
            pick = group.pop(int(rng.integers(0, len(group))))
            chosen.append(pick)
        assignment = _forward_sample(net, rng)
        observations = {
            node: assignment[node]
            for node in sorted(chosen, key=net.node_index)
            if node != diagnosis
        }
        cases.append(CaseSample(index=index, observations=observations))
    return cases


def _forward_sample(net: BeliefNetwork, rng: np.random.Generator) -> dict[str, int]:
    assignment: dict[str, int] = {}
    for node_id in net.topological_order:
        cpt = net.cpts[node_id]
        row = cpt.table[tuple(assignment[p] for p in cpt.parent_order)]
        assignment[node_id] = int(rng.choice(len(row), p=row))
    return assignment
