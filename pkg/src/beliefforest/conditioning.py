"""Cutset conditioning over clique forests.

One conditioned network per cutset instance, all sharing a single forest
structure. Instance potentials are stacked along the forest's batch axis so
every instance propagates in the same array operations, and each instance
carries a weight: its current posterior probability given all absorbed
evidence. Absorbing evidence multiplies each weight by that instance's
evidence likelihood and renormalizes.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from math import prod
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from .errors import (
    CutsetMemberError,
    EvidenceConflictError,
    ImpossibleEvidenceError,
    UnknownNodeError,
)
from .forest import (
    CliqueForest,
    ForestStructure,
    PropagationReport,
    forest_likelihood,
    structure_for,
)
from .graphs import connected_components, moralize
from .network import BeliefNetwork, ConditionalTable, Evidence


@dataclass(frozen=True)
class LoopCutset:
    """Nodes instantiated to every joint value combination."""

    members: tuple[str, ...]
    instance_count: int


@dataclass(frozen=True)
class CutsetInstance:
    """Snapshot of one conditioned instance's bookkeeping."""

    assignment: dict[str, int]
    weight: float
    log_scale: float


@dataclass(frozen=True)
class LikelihoodRecord:
    """Result of one absorb: per-instance likelihoods and the normalizer.

    likelihoods[i] = P(new evidence | instance i, old evidence);
    alpha = 1 / sum_i likelihoods[i] * weights_before[i], so 1/alpha is the
    probability of the new evidence given everything absorbed before.
    """

    likelihoods: np.ndarray
    weights_before: np.ndarray
    alpha: float


def select_cutset(net: BeliefNetwork, strategy: Union[str, Sequence[str]] = "auto") -> LoopCutset:
    """Pick the conditioning set.

    "auto" returns the single node whose removal from the moral graph leaves
    the most connected components; ties prefer the smaller cardinality, then
    declaration order. An explicit node list is validated and used as given.
    """
    if strategy == "auto":
        if len(net.nodes) < 2:
            raise ValueError("automatic selection needs at least 2 nodes")
        g = moralize(net)
        best = None
        best_key = None
        for i, node in enumerate(net.nodes):
            rest = tuple(v for v in g.vertices if v != node.id)
            adjacency = {
                v: {u for u in g.adjacency[v] if u != node.id} for v in rest
            }
            count = len(connected_components(rest, adjacency))
            key = (-count, node.cardinality, i)
            if best_key is None or key < best_key:
                best_key = key
                best = node.id
        members = (best,)
    else:
        if isinstance(strategy, str):
            raise ValueError(f"unknown cutset strategy: {strategy!r}")
        members = tuple(dict.fromkeys(strategy))
        if not members:
            raise ValueError("explicit cutset must name at least one node")
        for m in members:
            net.node(m)
    return LoopCutset(
        members=members,
        instance_count=int(prod(net.cardinality(m) for m in members)),
    )


def decompose(
    net: BeliefNetwork, cutset: LoopCutset, assignment: Mapping[str, int]
) -> BeliefNetwork:
    """The network with cutset nodes removed and child tables sliced at the
    assigned values. Nodes keep their declaration order."""
    for m in cutset.members:
        if m not in assignment:
            raise ValueError(f"assignment missing cutset member {m!r}")
    members = set(cutset.members)
    nodes = [n for n in net.nodes if n.id not in members]
    cpts = {}
    for n in nodes:
        cpt = net.cpts[n.id]
        selector = tuple(
            int(assignment[p]) if p in members else slice(None) for p in cpt.parent_order
        ) + (slice(None),)
        cpts[n.id] = ConditionalTable(
            node=n.id,
            parent_order=tuple(p for p in cpt.parent_order if p not in members),
            table=cpt.table[selector],
        )
    return BeliefNetwork(nodes, cpts)


def _conditioned_tables(
    net: BeliefNetwork, cutset: LoopCutset, assignments: list[tuple[int, ...]]
) -> tuple[dict[str, np.ndarray], dict[str, tuple[str, ...]]]:
    """Stack each non-cutset node's sliced table across all instances."""
    members = set(cutset.members)
    position = {m: i for i, m in enumerate(cutset.members)}
    tables: dict[str, np.ndarray] = {}
    families: dict[str, tuple[str, ...]] = {}
    batch = len(assignments)
    for node in net.nodes:
        if node.id in members:
            continue
        cpt = net.cpts[node.id]
        families[node.id] = tuple(p for p in cpt.parent_order if p not in members)
        cut_parents = [p for p in cpt.parent_order if p in members]
        if not cut_parents:
            tables[node.id] = np.broadcast_to(
                cpt.table[np.newaxis, ...], (batch,) + cpt.table.shape
            )
            continue
        slices = []
        for assignment in assignments:
            selector = tuple(
                assignment[position[p]] if p in members else slice(None)
                for p in cpt.parent_order
            ) + (slice(None),)
            slices.append(cpt.table[selector])
        tables[node.id] = np.stack(slices, axis=0)
    return tables, families


def _member_factors(
    net: BeliefNetwork, cutset: LoopCutset, assignments: list[tuple[int, ...]]
) -> dict[str, tuple[tuple[str, ...], np.ndarray]]:
    """Likelihood factors P(member = value | parents) over parents that stay
    in the conditioned structure.

    A member whose parents are all members (or absent) contributes a constant
    per instance, absorbed by normalization and the prior weights; anyone
    else ties its remaining parents to the instance value and must be
    multiplied into the instance's potentials or the conditioned
    distribution is wrong.
    """
    members = set(cutset.members)
    position = {m: i for i, m in enumerate(cutset.members)}
    factors: dict[str, tuple[tuple[str, ...], np.ndarray]] = {}
    for member in cutset.members:
        cpt = net.cpts[member]
        scope = tuple(p for p in cpt.parent_order if p not in members)
        if not scope:
            continue
        slices = []
        for assignment in assignments:
            selector = tuple(
                assignment[position[p]] if p in members else slice(None)
                for p in cpt.parent_order
            ) + (assignment[position[member]],)
            slices.append(cpt.table[selector])
        factors[member] = (scope, np.stack(slices, axis=0))
    return factors


class CutsetEnsemble:
    """All cutset instances of a network, propagated as one batched forest."""

    def __init__(self, net: BeliefNetwork, cutset: LoopCutset):
        self.network = net
        self.cutset = cutset
        for m in cutset.members:
            net.node(m)
        value_ranges = [range(net.cardinality(m)) for m in cutset.members]
        self.assignments: list[tuple[int, ...]] = list(itertools.product(*value_ranges))
        if len(self.assignments) != cutset.instance_count:
            raise ValueError("instance count does not match member cardinalities")
        conditioned = decompose(
            net, cutset, dict(zip(cutset.members, self.assignments[0]))
        )
        factors = _member_factors(net, cutset, self.assignments)
        self.conditioned_structure: ForestStructure = structure_for(
            conditioned, extra_scopes=[scope for scope, _ in factors.values()]
        )
        tables, families = _conditioned_tables(net, cutset, self.assignments)
        self.forest = CliqueForest(
            self.conditioned_structure,
            tables,
            batch=cutset.instance_count,
            families=families,
            factors=factors,
        )
        prior = self._prior_weights()
        total = prior.sum()
        if not total > 0:
            raise ValueError("cutset prior has zero total mass")
        self.weights: np.ndarray = prior / total
        with np.errstate(divide="ignore"):
            self.log_mass: np.ndarray = np.log(self.weights)
        self.evidence: dict[str, int] = {}
        self.last_record: Optional[LikelihoodRecord] = None
        self.last_report: Optional[PropagationReport] = None

    def _prior_weights(self) -> np.ndarray:
        net = self.network
        members = self.cutset.members
        if all(net.parents[m] == () for m in members):
            priors = [net.cpts[m].table for m in members]
            return np.array(
                [prod(p[v] for p, v in zip(priors, a)) for a in self.assignments]
            )
        # Chain rule over members using one calibrated forest on the full
        # network; snapshots keep the instances independent.
        base = CliqueForest.for_network(net)
        clean = base.snapshot()
        weights = []
        for assignment in self.assignments:
            p = 1.0
            for k, (m, v) in enumerate(zip(members, assignment)):
                marginal = base.node_posterior(m)[0]
                p *= float(marginal[v])
                if p == 0.0:
                    break
                if k + 1 < len(members):
                    base.enter_evidence({m: v})
                    base.propagate(strict=False)
            weights.append(p)
            base.restore(clean)
        return np.array(weights)

    # -- bookkeeping -------------------------------------------------------

    @property
    def instances(self) -> list[CutsetInstance]:
        return [
            CutsetInstance(
                assignment=dict(zip(self.cutset.members, a)),
                weight=float(self.weights[i]),
                log_scale=float(self.log_mass[i]),
            )
            for i, a in enumerate(self.assignments)
        ]

    def _stage(self, new_evidence) -> dict[str, int]:
        if isinstance(new_evidence, Evidence):
            items = dict(new_evidence.observations)
        else:
            items = {k: int(v) for k, v in dict(new_evidence).items()}
        staged: dict[str, int] = {}
        for node, value in items.items():
            if node in self.cutset.members:
                raise CutsetMemberError(
                    f"node {node!r} is a cutset member; its posterior is the "
                    "instance weights, not entered evidence"
                )
            if node not in self.network:
                raise UnknownNodeError(node)
            if node in self.evidence:
                if self.evidence[node] != value:
                    raise EvidenceConflictError(
                        f"node {node!r} already observed at value "
                        f"{self.evidence[node]}, cannot re-observe at {value}"
                    )
                continue
            staged[node] = value
        return staged

    # -- evidence absorption -------------------------------------------------

    def absorb_evidence(
        self,
        new_evidence,
        parallel: bool = False,
        max_workers: Optional[int] = None,
    ) -> LikelihoodRecord:
        """Enter new evidence in every instance, update weights.

        Each instance's weight picks up a factor of its evidence likelihood,
        then weights renormalize; the log-mass ledger keeps instances
        comparable even when likelihood products underflow. Impossible
        evidence (zero mass in every instance) restores the previous state
        and raises.
        """
        staged = self._stage(new_evidence)
        weights_before = self.weights.copy()
        if not staged:
            record = LikelihoodRecord(
                likelihoods=np.ones(self.cutset.instance_count),
                weights_before=weights_before,
                alpha=1.0,
            )
            self.last_record = record
            self.last_report = PropagationReport((), 0, {}, {}, self.cutset.instance_count)
            return record
        touched = sorted(
            {self.conditioned_structure.component_of_node[n] for n in staged}
        )
        snap = self.forest.snapshot(touched)
        log_mass_before = self.log_mass.copy()
        evidence_before = dict(self.evidence)
        try:
            self.forest.enter_evidence(staged)
            report = self._propagate_all(parallel, max_workers)
        except Exception:
            self.forest.restore(snap)
            raise
        likelihoods = forest_likelihood(report)
        masses = likelihoods * weights_before
        total = float(masses.sum())
        with np.errstate(divide="ignore"):
            log_mass = self.log_mass + np.log(likelihoods)
        if not np.isfinite(log_mass).any():
            self.forest.restore(snap)
            self.weights = weights_before
            self.log_mass = log_mass_before
            self.evidence = evidence_before
            raise ImpossibleEvidenceError(
                "entered evidence has probability zero in every instance"
            )
        shift = log_mass[np.isfinite(log_mass)].max()
        unnormalized = np.exp(log_mass - shift)
        self.log_mass = log_mass
        self.weights = unnormalized / unnormalized.sum()
        self.evidence.update(staged)
        alpha = 1.0 / total if total > 0 else float("inf")
        record = LikelihoodRecord(
            likelihoods=likelihoods, weights_before=weights_before, alpha=alpha
        )
        self.last_record = record
        self.last_report = report
        return record

    def _propagate_all(
        self, parallel: bool, max_workers: Optional[int]
    ) -> PropagationReport:
        if not parallel:
            return self.forest.propagate(strict=False)
        batch = self.cutset.instance_count
        workers = max_workers or min(4, batch)
        bounds = np.linspace(0, batch, workers + 1).astype(int)
        chunks = [
            np.arange(bounds[i], bounds[i + 1])
            for i in range(workers)
            if bounds[i + 1] > bounds[i]
        ]
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            reports = list(
                pool.map(
                    lambda rows: self.forest.propagate(strict=False, rows=rows), chunks
                )
            )
        # Deterministic reduction: chunks are contiguous and ordered, so the
        # merged report is identical to a single full-batch pass.
        touched = reports[0].touched_components if reports else ()
        constants = {
            comp: np.concatenate([r.per_component_constant[comp] for r in reports])
            for comp in touched
        }
        messages_by_component = {
            comp: sum(r.messages_by_component[comp] for r in reports) for comp in touched
        }
        return PropagationReport(
            touched_components=touched,
            messages_passed=sum(r.messages_passed for r in reports),
            per_component_constant=constants,
            messages_by_component=messages_by_component,
            rows_propagated=batch,
        )

    # -- readout ---------------------------------------------------------------

    def cutset_posterior(self) -> np.ndarray:
        """Current weights: the posterior over cutset instances."""
        return self.weights.copy()

    def cutset_member_posterior(self, member: str) -> np.ndarray:
        """Weights marginalized onto one cutset member."""
        if member not in self.cutset.members:
            raise UnknownNodeError(member)
        axis = self.cutset.members.index(member)
        dist = np.zeros(self.network.cardinality(member))
        for i, assignment in enumerate(self.assignments):
            dist[assignment[axis]] += self.weights[i]
        return dist

    def feature_posterior(self, node: str) -> np.ndarray:
        """Weighted mixture of per-instance posteriors for a non-cutset node."""
        if node in self.cutset.members:
            raise CutsetMemberError(
                f"node {node!r} is a cutset member; use cutset_member_posterior"
            )
        per_instance = self.forest.node_posterior(node)
        return self.weights @ per_instance

    def propagation_summary(self) -> PropagationReport:
        """Touched components and total message count of the last absorb."""
        if self.last_report is None:
            raise ValueError("no evidence has been absorbed yet")
        return self.last_report

    # -- state management --------------------------------------------------------

    def checkpoint(self) -> dict:
        return {
            "forest": self.forest.snapshot(),
            "weights": self.weights.copy(),
            "log_mass": self.log_mass.copy(),
            "evidence": dict(self.evidence),
        }

    def restore(self, snap: dict) -> None:
        self.forest.restore(snap["forest"])
        self.weights = snap["weights"].copy()
        self.log_mass = snap["log_mass"].copy()
        self.evidence = dict(snap["evidence"])
        self.last_record = None
        self.last_report = None


def init_ensemble(net: BeliefNetwork, cutset: LoopCutset) -> CutsetEnsemble:
    return CutsetEnsemble(net, cutset)
