"""Runtime comparison of whole-network propagation against cutset
conditioning on the same cases.

Engines are built once and reset between repetitions by snapshot restore, so
timed regions cover evidence absorption only. Every case passes a
correctness gate (both engines must agree on the diagnosis posterior) before
any time is reported. Conditioning times include weight-update bookkeeping.
"""

from __future__ import annotations

import io
import statistics
from dataclasses import dataclass
from time import perf_counter
from typing import Optional, Sequence

import numpy as np

from .conditioning import CutsetEnsemble, select_cutset
from .forest import CliqueForest
from .network import BeliefNetwork
from .synth import CaseSample

GATE_TOLERANCE = 1e-9


@dataclass(frozen=True)
class CaseResult:
    case_id: int
    feature_count: int
    ctp_seconds: float
    ad_seconds: float
    ratio: float
    touched_largest_portion: bool
    diagnosis_posterior: tuple[float, ...]


@dataclass(frozen=True)
class BenchReport:
    cases: tuple[CaseResult, ...]
    repeat: int
    mean_ratio: float
    std_ratio: float
    touching_mean_ratio: Optional[float]
    other_mean_ratio: Optional[float]

    @property
    def touching_cases(self) -> tuple[CaseResult, ...]:
        return tuple(c for c in self.cases if c.touched_largest_portion)

    @property
    def other_cases(self) -> tuple[CaseResult, ...]:
        return tuple(c for c in self.cases if not c.touched_largest_portion)


def run_suite(
    net: BeliefNetwork,
    cases: Sequence[CaseSample],
    repeat: int = 5,
    parallel: bool = False,
) -> BenchReport:
    """Time every case on both engines and aggregate.

    Per case and engine: one untimed warmup absorb, then `repeat` timed
    absorbs from a clean snapshot; the reported time is the median. Raises
    when the engines disagree on any case's diagnosis posterior.
    """
    if repeat < 5:
        raise ValueError("timing needs at least 5 repetitions")
    diagnosis = net.nodes[0].id
    ctp = CliqueForest.for_network(net)
    ctp_clean = ctp.snapshot()
    ensemble = CutsetEnsemble(net, select_cutset(net, "auto"))
    if ensemble.cutset.members != (diagnosis,):
        raise ValueError(
            "expected the first-declared node to be the conditioning choice "
            f"for this network, got {ensemble.cutset.members}"
        )
    ad_clean = ensemble.checkpoint()
    largest = ensemble.conditioned_structure.largest_component
    results = []
    for case in cases:
        obs = dict(case.observations)

        def ctp_absorb():
            ctp.enter_evidence(obs)
            ctp.propagate()

        def ad_absorb():
            ensemble.absorb_evidence(obs, parallel=parallel)

        ctp_times = _timed_reps(ctp_absorb, lambda: ctp.restore(ctp_clean), repeat)
        ad_times = _timed_reps(ad_absorb, lambda: ensemble.restore(ad_clean), repeat)
        # State after the last repetition is the absorbed state; read the
        # gate posteriors and the touched set from it.
        ctp_posterior = ctp.node_posterior(diagnosis)[0]
        ad_posterior = ensemble.cutset_posterior()
        gap = float(np.abs(ctp_posterior - ad_posterior).max())
        if gap > GATE_TOLERANCE:
            raise ValueError(
                f"correctness gate failed on case {case.index}: "
                f"engines disagree by {gap:.3e}"
            )
        touched = largest in ensemble.propagation_summary().touched_components
        ctp_median = statistics.median(ctp_times)
        ad_median = statistics.median(ad_times)
        results.append(
            CaseResult(
                case_id=case.index,
                feature_count=len(obs),
                ctp_seconds=ctp_median,
                ad_seconds=ad_median,
                ratio=ad_median / ctp_median,
                touched_largest_portion=touched,
                diagnosis_posterior=tuple(float(p) for p in ad_posterior),
            )
        )
        ctp.restore(ctp_clean)
        ensemble.restore(ad_clean)
    ratios = [c.ratio for c in results]
    touching = [c.ratio for c in results if c.touched_largest_portion]
    other = [c.ratio for c in results if not c.touched_largest_portion]
    return BenchReport(
        cases=tuple(results),
        repeat=repeat,
        mean_ratio=statistics.mean(ratios) if ratios else float("nan"),
        std_ratio=statistics.stdev(ratios) if len(ratios) > 1 else 0.0,
        touching_mean_ratio=statistics.mean(touching) if touching else None,
        other_mean_ratio=statistics.mean(other) if other else None,
    )


def _timed_reps(absorb, reset, repeat: int) -> list[float]:
    reset()
    absorb()  # warmup, untimed
    times = []
    for _ in range(repeat):
        reset()
        start = perf_counter()
        absorb()
        times.append(perf_counter() - start)
    return times


def export_scatter(report: BenchReport) -> str:
    """CSV with one row per case: case_id, feature_count, ratio,
    touched_largest_portion. Row order follows the case order."""
    out = io.StringIO()
    out.write("case_id,feature_count,ratio,touched_largest_portion\n")
    for c in report.cases:
        out.write(
            f"{c.case_id},{c.feature_count},{c.ratio:.6f},"
            f"{str(c.touched_largest_portion).lower()}\n"
        )
    return out.getvalue()


def format_summary(report: BenchReport) -> str:
    lines = [
        f"cases: {len(report.cases)} (median of {report.repeat} repetitions per engine)",
        f"mean AD/CTP ratio: {report.mean_ratio:.3f} (std {report.std_ratio:.3f})",
    ]
    touching = report.touching_cases
    other = report.other_cases
    if report.touching_mean_ratio is not None:
        lines.append(
            f"cases touching the largest portion: {len(touching)} "
            f"(mean ratio {report.touching_mean_ratio:.3f})"
        )
    else:
        lines.append("cases touching the largest portion: 0")
    if report.other_mean_ratio is not None:
        lines.append(
            f"cases not touching it: {len(other)} "
            f"(mean ratio {report.other_mean_ratio:.3f})"
        )
    else:
        lines.append("cases not touching it: 0")
    lines.append("AD times include ensemble weight-update bookkeeping.")
    return "\n".join(lines)
