"""Bounded conditioning: propagate only high-weight instances, answer with
exact interval bounds on every instance's posterior.

Each instance carries an unnormalized mass: the joint probability of its
assignment with all evidence applied to it so far. Skipped instances keep
stale masses, and because absorbing evidence can only shrink a mass, a stale
mass is an upper bound on the true one. All bounds follow from that single
fact, so they are exact whatever the retention policy does. Masses are never
renormalized (the bound formulas are scale-invariant); retained instances
therefore reproduce plain conditioning arithmetic exactly and retain-all
collapses every interval to a point.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .conditioning import CutsetEnsemble, LoopCutset, select_cutset
from .errors import ImpossibleEvidenceError
from .forest import forest_likelihood
from .network import BeliefNetwork

DEFAULT_WEIGHT_THRESHOLD = 1e-4
MASS_RESCALE_FLOOR = 1e-200


@dataclass(frozen=True)
class RetentionPolicy:
    """Which instances to propagate: the k heaviest, or all above a weight
    threshold. threshold 0 retains everything."""

    mode: str
    value: float

    def __post_init__(self):
        if self.mode == "top_k":
            if int(self.value) < 1:
                raise ValueError("top_k policy needs k >= 1")
        elif self.mode == "threshold":
            if not 0.0 <= self.value < 1.0:
                raise ValueError("threshold policy needs 0 <= t < 1")
        else:
            raise ValueError(f"unknown retention mode: {self.mode!r}")

    @classmethod
    def top_k(cls, k: int) -> "RetentionPolicy":
        return cls("top_k", float(k))

    @classmethod
    def threshold(cls, tau: float = DEFAULT_WEIGHT_THRESHOLD) -> "RetentionPolicy":
        return cls("threshold", float(tau))

    def select(self, weights: np.ndarray) -> np.ndarray:
        """Boolean mask of retained instances."""
        if self.mode == "top_k":
            k = min(int(self.value), len(weights))
            order = np.argsort(-weights, kind="stable")
            mask = np.zeros(len(weights), dtype=bool)
            mask[order[:k]] = True
            return mask
        return weights >= self.value


@dataclass(frozen=True)
class IntervalPosterior:
    """Per-instance posterior bounds. retained marks instances whose absorbed
    evidence is fully applied (their mass is exact, not just an upper bound).
    rank_uncertain is set when some skipped instance could outrank every
    fully-applied one."""

    lower: np.ndarray
    upper: np.ndarray
    retained: np.ndarray
    rank_uncertain: bool

    def contains(self, posterior: np.ndarray, slack: float = 0.0) -> bool:
        return bool(
            np.all(posterior >= self.lower - slack)
            and np.all(posterior <= self.upper + slack)
        )


class BoundedEngine:
    """Conditioning ensemble driven under a retention policy.

    The engine owns the ensemble's forest: do not mix calls to the plain
    absorb path with bounded absorbs on the same ensemble.
    """

    def __init__(
        self,
        net: BeliefNetwork,
        cutset: Optional[LoopCutset] = None,
        policy: Optional[RetentionPolicy] = None,
    ):
        self.ensemble = CutsetEnsemble(net, cutset or select_cutset(net, "auto"))
        self.policy = policy or RetentionPolicy.threshold()
        self.mass: np.ndarray = self.ensemble.weights.copy()
        count = self.ensemble.cutset.instance_count
        self.pending: list[dict[str, int]] = [{} for _ in range(count)]
        self.evidence: dict[str, int] = {}
        self.last_messages: int = 0
        self.last_touched: tuple[int, ...] = ()
        self.last_interval: Optional[IntervalPosterior] = None
        self._touched_acc: set[int] = set()

    @property
    def instance_count(self) -> int:
        return self.ensemble.cutset.instance_count

    @property
    def applied_mask(self) -> np.ndarray:
        """Instances with no pending evidence: their masses are exact."""
        return np.array([not p for p in self.pending], dtype=bool)

    # -- evidence ----------------------------------------------------------

    def bounded_absorb(
        self, new_evidence, policy: Optional[RetentionPolicy] = None
    ) -> IntervalPosterior:
        """Absorb evidence into the policy-retained instances only.

        Retained instances whose earlier evidence is still pending catch up
        first. Skipped instances accumulate the new evidence as pending and
        keep their stale (upper bound) masses.
        """
        policy = policy or self.policy
        staged = self.ensemble._stage(new_evidence)
        total = self.mass.sum()
        weights = self.mass / total if total > 0 else self.mass
        retained = policy.select(weights)
        if not retained.any():
            raise ValueError("retention policy kept zero instances")
        snapshot = self._checkpoint(staged)
        try:
            self.last_messages = 0
            self._touched_acc: set[int] = set()
            self._apply_pending(np.flatnonzero(retained))
            if staged:
                rows = np.flatnonzero(retained)
                self.ensemble.forest.enter_evidence(staged, rows=rows)
                report = self.ensemble.forest.propagate(strict=False, rows=rows)
                self.last_messages += report.messages_passed
                self._touched_acc.update(report.touched_components)
                self.mass[rows] = self.mass[rows] * forest_likelihood(report)
                for row in np.flatnonzero(~retained):
                    self.pending[row].update(staged)
                for node, value in staged.items():
                    self.evidence[node] = value
                    self.ensemble.evidence[node] = value
        except Exception:
            self._restore(snapshot)
            raise
        if not self.mass.sum() > 0:
            self._restore(snapshot)
            raise ImpossibleEvidenceError(
                "entered evidence has probability zero in every instance"
            )
        self.last_touched = tuple(sorted(self._touched_acc))
        self._rescale()
        self.last_interval = self._intervals()
        return self.last_interval

    def refine(self, instances: Sequence[int]) -> IntervalPosterior:
        """Catch up previously skipped instances and recompute every bound.

        Newly applied masses can only shrink, so every interval nests inside
        the one it refines.
        """
        requested = sorted({int(i) for i in instances})
        for r in requested:
            if not 0 <= r < self.instance_count:
                raise ValueError(f"instance index {r} out of range")
        rows = np.array([r for r in requested if self.pending[r]], dtype=int)
        if len(rows):
            snapshot = self._checkpoint({})
            self._touched_acc = set()
            try:
                self._apply_pending(rows)
            except Exception:
                self._restore(snapshot)
                raise
            if not self.mass.sum() > 0:
                self._restore(snapshot)
                raise ImpossibleEvidenceError(
                    "catching up pending evidence zeroed every instance"
                )
            self.last_touched = tuple(sorted(self._touched_acc))
            self._rescale()
        self.last_interval = self._intervals()
        return self.last_interval

    def _apply_pending(self, rows: np.ndarray) -> None:
        """Enter and propagate each row's pending evidence, grouped so rows
        sharing a backlog propagate together."""
        backlog: dict[tuple, list[int]] = {}
        for row in rows:
            if self.pending[row]:
                key = tuple(sorted(self.pending[row].items()))
                backlog.setdefault(key, []).append(int(row))
        for key, group in sorted(backlog.items()):
            group_rows = np.array(group, dtype=int)
            observations = dict(key)
            self.ensemble.forest.enter_evidence(observations, rows=group_rows)
            report = self.ensemble.forest.propagate(strict=False, rows=group_rows)
            self.last_messages += report.messages_passed
            self._touched_acc.update(report.touched_components)
            self.mass[group_rows] = self.mass[group_rows] * forest_likelihood(report)
            for row in group:
                self.pending[row] = {}

    # -- bounds ------------------------------------------------------------

    def _intervals(self) -> IntervalPosterior:
        applied = self.applied_mask
        exact = np.where(applied, self.mass, 0.0)
        stale = np.where(applied, 0.0, self.mass)
        s = exact.sum()
        w_e = stale.sum()
        lower = np.zeros(self.instance_count)
        upper = np.zeros(self.instance_count)
        denom = s + w_e
        if denom > 0:
            lower[applied] = exact[applied] / denom
        if s > 0:
            upper[applied] = exact[applied] / s
        skipped = ~applied
        per_denom = s + stale[skipped]
        upper[skipped] = np.divide(
            stale[skipped],
            per_denom,
            out=np.zeros_like(per_denom),
            where=per_denom > 0,
        )
        max_applied_lower = lower[applied].max() if applied.any() else 0.0
        rank_uncertain = bool(np.any(upper[skipped] > max_applied_lower))
        return IntervalPosterior(
            lower=lower, upper=upper, retained=applied, rank_uncertain=rank_uncertain
        )

    def intervals(self) -> IntervalPosterior:
        return self._intervals()

    # -- state -------------------------------------------------------------

    def _rescale(self) -> None:
        # Uniform rescaling cancels in every bound formula; it only keeps
        # long evidence chains away from the underflow floor.
        peak = self.mass.max()
        if 0 < peak < MASS_RESCALE_FLOOR:
            self.mass = self.mass / peak

    def _checkpoint(self, staged: dict[str, int]) -> dict:
        components = sorted(
            {
                self.ensemble.conditioned_structure.component_of_node[n]
                for row_pending in self.pending
                for n in row_pending
            }
            | {
                self.ensemble.conditioned_structure.component_of_node[n]
                for n in staged
            }
        )
        return {
            "forest": self.ensemble.forest.snapshot(components),
            "mass": self.mass.copy(),
            "pending": [dict(p) for p in self.pending],
            "evidence": dict(self.evidence),
            "ensemble_evidence": dict(self.ensemble.evidence),
        }

    def _restore(self, snap: dict) -> None:
        self.ensemble.forest.restore(snap["forest"])
        self.mass = snap["mass"].copy()
        self.pending = [dict(p) for p in snap["pending"]]
        self.evidence = dict(snap["evidence"])
        self.ensemble.evidence = dict(snap["ensemble_evidence"])


def bounded_absorb(
    engine: BoundedEngine, new_evidence, policy: Optional[RetentionPolicy] = None
) -> IntervalPosterior:
    return engine.bounded_absorb(new_evidence, policy)


def refine(engine: BoundedEngine, instances: Sequence[int]) -> IntervalPosterior:
    return engine.refine(instances)
