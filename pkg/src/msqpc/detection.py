"""Monte Carlo estimation of eavesdropping-detection rates.

Each attacked particle is attributed to its (case, step) cell:

``step4``
    Cases 1-7. Detected when TP1's Step-4 check on that particle fails
    (Cases 5-7 are never checked, so never detected).
``step5``
    Case 8, counted only in user sequences holding exactly 2L Case-8
    particles. Detected when the particle is drawn into the check set *and*
    its values disagree, so the rate carries the 1/2 sampling factor.
``step5-checked``
    Case 8 particles that were drawn into the check set (any supply).
    Detected when their values disagree.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, replace

from . import streams
from .adversary import AttackKind, AttackStrategy, Channel, closed_form_detection
from .cases import Case, CheckRole, scenario_of
from .probe import probe_attack_evaluate
from .protocol import ProtocolConfig, Transcript, run_protocol

STEPS = ("step4", "step5", "step5-checked")


def wilson_interval(successes: int, n: int, z: float = 1.0) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    p = successes / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return max(0.0, center - half), min(1.0, center + half)


@dataclass
class DetectionCell:
    attacked: int = 0
    detected: int = 0
    reference: float | None = None

    @property
    def rate(self) -> float:
        return self.detected / self.attacked if self.attacked else 0.0

    @property
    def stderr(self) -> float:
        """Wilson half-width at one standard deviation."""
        lo, hi = wilson_interval(self.detected, self.attacked, 1.0)
        return (hi - lo) / 2

    def covers(self, value: float, z: float = 3.0) -> bool:
        lo, hi = wilson_interval(self.detected, self.attacked, z)
        return lo <= value <= hi


class DetectionStats:
    """Per-(case, step) tallies of attacked particles and detections."""

    def __init__(self, d: int, attack: str):
        self.d = d
        self.attack = attack
        self.cells: dict[tuple[Case, str], DetectionCell] = {}
        self.statuses: Counter = Counter()

    def cell(self, case: Case, step: str) -> DetectionCell:
        if step not in STEPS:
            raise ValueError(f"unknown step {step!r}")
        return self.cells.setdefault((Case(case), step), DetectionCell())

    def tally(self, case: Case, step: str, detected: bool) -> None:
        c = self.cell(case, step)
        c.attacked += 1
        c.detected += bool(detected)

    def merge(self, other: "DetectionStats") -> "DetectionStats":
        if (self.d, self.attack) != (other.d, other.attack):
            raise ValueError("can only merge stats of the same d and attack")
        out = DetectionStats(self.d, self.attack)
        for src in (self, other):
            for key, c in src.cells.items():
                dst = out.cells.setdefault(key, DetectionCell(reference=c.reference))
                dst.attacked += c.attacked
                dst.detected += c.detected
                if dst.reference is None:
                    dst.reference = c.reference
            out.statuses.update(src.statuses)
        return out

    @property
    def total_detected(self) -> int:
        return sum(c.detected for c in self.cells.values())

    def rows(self) -> list[dict]:
        return [
            {
                "d": self.d, "attack": self.attack, "case": int(case), "step": step,
                "attacked": c.attacked, "detected": c.detected, "rate": c.rate,
                "stderr": c.stderr, "reference": c.reference,
            }
            for (case, step), c in sorted(self.cells.items(), key=lambda kv: (kv[0][0], STEPS.index(kv[0][1])))
        ]

    def to_dict(self) -> dict:
        return {"d": self.d, "attack": self.attack, "statuses": dict(sorted(self.statuses.items())),
                "rows": self.rows()}

    @classmethod
    def from_dict(cls, data: dict) -> "DetectionStats":
        out = cls(data["d"], data["attack"])
        out.statuses.update(data["statuses"])
        for row in data["rows"]:
            out.cells[Case(row["case"]), row["step"]] = DetectionCell(
                row["attacked"], row["detected"], row["reference"])
        return out


def tally_transcript(stats: DetectionStats, transcript: Transcript, strategy: AttackStrategy) -> None:
    L = transcript.config.length
    stats.statuses[transcript.outcome.status.value] += 1
    for n, seq in enumerate(transcript.records):
        failed4 = set(transcript.step4_failures.get(n, ()))
        failed5 = set(transcript.step5_failures.get(n, ()))
        partitioned = any(rec.check_role is CheckRole.STEP5_CHECK for rec in seq)
        exact_supply = transcript.case8_counts[n] == 2 * L
        for rec in seq:
            if not strategy.targets(rec.position):
                continue
            if rec.case is not Case.CASE8:
                stats.tally(rec.case, "step4", rec.position in failed4)
                continue
            if not partitioned:
                continue
            checked = rec.check_role is CheckRole.STEP5_CHECK
            caught = checked and rec.position in failed5
            if checked:
                stats.tally(rec.case, "step5-checked", caught)
            if exact_supply:
                stats.tally(rec.case, "step5", caught)


def reference_rates(strategy: AttackStrategy, d: int) -> dict[tuple[Case, str], float | None]:
    """Expected rate per cell: closed forms, or the exact evaluator for probes."""
    refs = {}
    if strategy.kind is AttackKind.PROBE:
        ev = probe_attack_evaluate(strategy.probe, d)
        for case in Case:
            refs[case, "step4"] = 0.0 if case.ignored else ev.detection.get(case)
        refs[Case.CASE8, "step5"] = ev.step5_rate()
        refs[Case.CASE8, "step5-checked"] = ev.detection[Case.CASE8]
        refs.pop((Case.CASE8, "step4"))
        return refs
    for case in Case:
        rate = closed_form_detection(strategy, d, scenario_of(case))
        if case is Case.CASE8:
            refs[case, "step5"] = rate
            refs[case, "step5-checked"] = None if rate is None else 2 * rate
        else:
            refs[case, "step4"] = rate
    return refs


def monte_carlo_detection(config: ProtocolConfig, strategy: AttackStrategy, trials: int,
                          inputs=None, key=None) -> DetectionStats:
    """Run the full protocol ``trials`` times under ``strategy`` and tally detections.

    Trial ``t`` uses the seed derived from ``(config.seed, TRIAL, t)``; random
    private inputs and key are drawn per trial unless given.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    stats = DetectionStats(config.d, strategy.name)
    channel = Channel(strategy)
    for t in range(trials):
        cfg = replace(config, seed=streams.derive_seed(config.seed, streams.TRIAL, t))
        p, k = inputs, key
        if p is None or k is None:
            rng = streams.substream(cfg.seed, streams.INPUTS)
            if p is None:
                p = rng.integers(0, cfg.h + 1, (cfg.n_users, cfg.length)).tolist()
            if k is None:
                k = rng.integers(0, cfg.d, cfg.length).tolist()
        transcript = run_protocol(cfg, p, k, channel, audit=True)
        tally_transcript(stats, transcript, strategy)
    for key_, ref in reference_rates(strategy, config.d).items():
        if key_ in stats.cells:
            stats.cells[key_].reference = ref
    return stats
