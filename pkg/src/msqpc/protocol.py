"""Seven-step multi-party semiquantum private comparison run.

TP1 (fully quantum) prepares, for every user ``P_n``, a sequence of
``seq_multiplier * L`` single particles in T1 or T2. Each particle makes the
round trip TP1 -> P_n -> TP2 -> TP1 before the next one is released. ``P_n``
and TP2 (both classical) either reflect it or measure it in T1 and resend
what they found. After announcements TP1 checks Cases 1-4, samples L of the
Case-8 particles for an error-rate check, and the remaining L Case-8 values
serve as one-time masks for the comparison.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import streams
from .adversary import Channel
from .cases import CASE_TABLE, Case, ChannelSegment, CheckRole, Mode, classify_case
from .comparison import decode, encode, half_range, relation_matrix
from .qudit import Basis, DomainError, QuditState, basis_matrix, check_dimension, measure_amplitudes

log = logging.getLogger(__name__)

# (step, actor, position, event, payload)
Event = tuple


@dataclass(frozen=True)
class ProtocolConfig:
    d: int
    n_users: int
    length: int
    seq_multiplier: int = 16
    seed: int = 0
    t2_prep_probability: float = 0.5
    max_retries: int = 0

    def __post_init__(self):
        check_dimension(self.d)
        if self.n_users < 2:
            raise DomainError("need at least 2 users")
        if self.length < 1:
            raise DomainError("comparison length must be >= 1")
        if self.seq_multiplier < 1:
            raise DomainError("seq_multiplier must be >= 1")
        if not 0.0 < self.t2_prep_probability < 1.0:
            raise DomainError("t2_prep_probability must lie in (0, 1)")
        if self.max_retries < 0:
            raise DomainError("max_retries must be >= 0")

    @property
    def seq_len(self) -> int:
        return self.seq_multiplier * self.length

    @property
    def h(self) -> int:
        return half_range(self.d)

    def to_dict(self) -> dict:
        return {
            "d": self.d, "n_users": self.n_users, "length": self.length,
            "seq_multiplier": self.seq_multiplier, "seed": self.seed,
            "t2_prep_probability": self.t2_prep_probability, "max_retries": self.max_retries,
        }


class RunStatus(enum.Enum):
    COMPLETED = "completed"
    ABORTED_STEP4_EAVESDROP = "aborted-step4-eavesdrop"
    ABORTED_INSUFFICIENT_CASE8 = "aborted-insufficient-case8"
    ABORTED_STEP5_ERROR_RATE = "aborted-step5-error-rate"


@dataclass
class ParticleRecord:
    position: int
    prep_basis: Basis
    prep_index: int
    r: Mode
    v: Mode
    case: Case
    user_measurement: int | None = None
    tp2_measurement: int | None = None
    tp1_final_measurement: int | None = None
    check_role: CheckRole | None = None

    def to_dict(self) -> dict:
        return {
            "position": self.position, "prep_basis": self.prep_basis.value,
            "prep_index": self.prep_index, "r": int(self.r), "v": int(self.v),
            "case": int(self.case), "user_measurement": self.user_measurement,
            "tp2_measurement": self.tp2_measurement,
            "tp1_final_measurement": self.tp1_final_measurement,
            "check_role": self.check_role.value if self.check_role else None,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ParticleRecord":
        return cls(
            data["position"], Basis(data["prep_basis"]), data["prep_index"], Mode(data["r"]),
            Mode(data["v"]), Case(data["case"]), data["user_measurement"], data["tp2_measurement"],
            data["tp1_final_measurement"],
            CheckRole(data["check_role"]) if data["check_role"] else None,
        )


@dataclass(frozen=True)
class UserChoices:
    """Every honest random choice for one user sequence, by position.

    Measurement uniforms are consumed one per measurement, so they stay
    aligned with positions whatever an attacker does to the particles.
    """

    prep_t2: np.ndarray
    prep_index: np.ndarray
    r: np.ndarray
    v: np.ndarray
    u_tp1: np.ndarray
    u_user: np.ndarray
    u_tp2: np.ndarray

    @classmethod
    def draw(cls, config: ProtocolConfig, attempt: int, user: int) -> "UserChoices":
        n, d = config.seq_len, config.d
        tp1 = streams.substream(config.seed, attempt, user, streams.TP1)
        usr = streams.substream(config.seed, attempt, user, streams.USER)
        tp2 = streams.substream(config.seed, attempt, user, streams.TP2)
        prep_t2 = tp1.random(n) < config.t2_prep_probability
        prep_index = tp1.integers(0, d, n)
        u_tp1 = tp1.random(n)
        r = usr.integers(0, 2, n)
        u_user = usr.random(n)
        v = tp2.integers(0, 2, n)
        u_tp2 = tp2.random(n)
        return cls(prep_t2, prep_index, r, v, u_tp1, u_user, u_tp2)

    @classmethod
    def forced(cls, prep_bases: Sequence[Basis], prep_index: Sequence[int], r: Sequence[int],
               v: Sequence[int], base: "UserChoices") -> "UserChoices":
        """Pin the preparation and mode choices; keep ``base``'s measurement draws."""
        return cls(
            np.array([Basis(b) is Basis.T2 for b in prep_bases]), np.asarray(prep_index),
            np.asarray(r), np.asarray(v), base.u_tp1, base.u_user, base.u_tp2,
        )


@dataclass(frozen=True)
class ComparisonReport:
    """Relation matrices, one per compared digit index.

    ``relations[i][a, b]`` is +1 when user ``a`` holds the larger digit at
    index ``i``, 0 when equal, -1 when smaller (users and indices 0-based).
    """

    relations: tuple

    def to_dict(self) -> dict:
        return {"relations": [m.tolist() for m in self.relations]}

    @classmethod
    def from_dict(cls, data: dict) -> "ComparisonReport":
        return cls(tuple(np.array(m, dtype=np.int8) for m in data["relations"]))

    def __eq__(self, other) -> bool:
        return (isinstance(other, ComparisonReport) and len(self.relations) == len(other.relations)
                and all(np.array_equal(a, b) for a, b in zip(self.relations, other.relations)))


@dataclass(frozen=True)
class RunOutcome:
    status: RunStatus
    report: ComparisonReport | None = None

    def __post_init__(self):
        if (self.report is not None) != (self.status is RunStatus.COMPLETED):
            raise ValueError("a report is present exactly when the run completed")


@dataclass
class Transcript:
    config: ProtocolConfig
    key: list[int]
    inputs: list[list[int]]
    records: list[list[ParticleRecord]]
    announced: list[list[int]] | None
    outcome: RunOutcome
    events: list[Event]
    attempts: int = 1
    step4_failures: dict[int, list[int]] = field(default_factory=dict)
    step5_failures: dict[int, list[int]] = field(default_factory=dict)
    case8_counts: list[int] = field(default_factory=list)

    @property
    def completed(self) -> bool:
        return self.outcome.status is RunStatus.COMPLETED

    def events_as_dicts(self) -> list[dict]:
        return [{"step": s, "actor": a, "position": p, "event": e, "payload": pl}
                for s, a, p, e, pl in self.events]

    def to_dict(self) -> dict:
        report = self.outcome.report
        return {
            "config": self.config.to_dict(),
            "key": list(self.key),
            "inputs": [list(p) for p in self.inputs],
            "status": self.outcome.status.value,
            "report": report.to_dict() if report else None,
            "announced": self.announced,
            "attempts": self.attempts,
            "case8_counts": list(self.case8_counts),
            "step4_failures": {str(k): v for k, v in self.step4_failures.items()},
            "step5_failures": {str(k): v for k, v in self.step5_failures.items()},
            "records": [[rec.to_dict() for rec in seq] for seq in self.records],
        }


def _actor(user: int) -> str:
    return f"P{user + 1}"


def _turn(wire: np.ndarray, mode: Mode, u: float) -> tuple[int | None, np.ndarray]:
    if mode is Mode.REFLECT:
        return None, wire
    # measure in T1 and resend the state found: the collapsed state itself
    return measure_amplitudes(wire, Basis.T1, u)


def party_turn(record: ParticleRecord, incoming, mode: Mode, rng: np.random.Generator,
               party: str = "user"):
    """One classical party's action on a received particle.

    REFLECT returns ``incoming`` untouched. MEASURE measures in T1, stores
    the value on ``record`` (``user_measurement`` or ``tp2_measurement``
    depending on ``party``) and returns a freshly prepared T1 state of it.
    """
    mode = Mode(mode)
    wrapped = isinstance(incoming, QuditState)
    amps = incoming.amplitudes if wrapped else np.asarray(incoming)
    u = float(rng.random()) if mode is Mode.MEASURE else 0.0
    value, out = _turn(amps, mode, u)
    if value is not None:
        if party == "user":
            record.user_measurement = value
        elif party == "tp2":
            record.tp2_measurement = value
        else:
            raise ValueError(f"unknown party {party!r}")
    if wrapped and out.ndim == 1:
        return incoming if value is None else QuditState._trusted(out)
    return out


def _run_sequence(config: ProtocolConfig, user: int, ch: UserChoices, channel: Channel,
                  events: list) -> list[ParticleRecord]:
    d = config.d
    actor = _actor(user)
    t1, t2 = basis_matrix(d, Basis.T1), basis_matrix(d, Basis.T2)
    records = []
    returned = []
    modes = (Mode.REFLECT, Mode.MEASURE)
    bases = [Basis.T2 if x else Basis.T1 for x in ch.prep_t2.tolist()]
    r_modes = [modes[x] for x in ch.r.tolist()]
    v_modes = [modes[x] for x in ch.v.tolist()]
    u_user, u_tp2 = ch.u_user.tolist(), ch.u_tp2.tolist()
    for pos, index in enumerate(ch.prep_index.tolist()):
        l = pos + 1
        basis, r, v = bases[pos], r_modes[pos], v_modes[pos]
        rec = ParticleRecord(l, basis, index, r, v, CASE_TABLE[basis, r, v])
        # strict cadence: particle l is sent only after particle l-1 came home
        wire = (t2 if basis is Basis.T2 else t1)[:, index]
        events.append((1, "TP1", l, "send", {"user": user + 1}))
        wire = channel.transit(ChannelSegment.TP1_TO_PN, l, wire)
        rec.user_measurement, wire = _turn(wire, r, u_user[pos])
        events.append((2, actor, l, r.name.lower(),
                       {} if rec.user_measurement is None else {"value": rec.user_measurement}))
        wire = channel.transit(ChannelSegment.PN_TO_TP2, l, wire)
        rec.tp2_measurement, wire = _turn(wire, v, u_tp2[pos])
        events.append((3, "TP2", l, v.name.lower(),
                       {"user": user + 1} if rec.tp2_measurement is None
                       else {"user": user + 1, "value": rec.tp2_measurement}))
        wire = channel.transit(ChannelSegment.TP2_TO_TP1, l, wire)
        events.append((3, "TP1", l, "receive", {"user": user + 1}))
        records.append(rec)
        returned.append(wire)
    # TP1 measures only after announcements; ignored cases are discarded unmeasured
    for rec, wire in zip(records, returned):
        basis = rec.case.tp1_basis
        if basis is None:
            rec.check_role = CheckRole.IGNORED
            continue
        rec.tp1_final_measurement, _ = measure_amplitudes(wire, basis, ch.u_tp1[rec.position - 1])
        rec.check_role = CheckRole.UNUSED if rec.case is Case.CASE8 else CheckRole.STEP4_CHECK
    return records


def step4_check(records: Sequence[ParticleRecord]) -> list[int]:
    """Positions of Case 1-4 particles that fail TP1's check (empty = pass)."""
    failed = []
    for rec in records:
        case = rec.case
        if case in (Case.CASE1, Case.CASE2):
            ok = rec.tp1_final_measurement == rec.prep_index
        elif case is Case.CASE3:
            if rec.user_measurement is None:
                raise DomainError(f"Case-3 particle {rec.position} has no user declaration")
            ok = rec.tp1_final_measurement == rec.user_measurement == rec.prep_index
        elif case is Case.CASE4:
            if rec.tp2_measurement is None:
                raise DomainError(f"Case-4 particle {rec.position} has no TP2 declaration")
            ok = rec.tp1_final_measurement == rec.tp2_measurement == rec.prep_index
        else:
            continue
        if not ok:
            failed.append(rec.position)
    return failed


def case8_partition(records: Sequence[ParticleRecord], length: int,
                    rng: np.random.Generator) -> tuple[list[ParticleRecord], list[ParticleRecord]]:
    """Split Case-8 records into a random L-subset check set and the comparison set.

    The comparison set is the lowest-position L of the remainder.
    """
    case8 = sorted((rec for rec in records if rec.case is Case.CASE8), key=lambda rec: rec.position)
    if len(case8) < 2 * length:
        raise ValueError(f"{len(case8)} Case-8 particles, need {2 * length}; the run must be suspended")
    picked = set(rng.choice(len(case8), size=length, replace=False).tolist())
    check = [rec for i, rec in enumerate(case8) if i in picked]
    rest = [rec for i, rec in enumerate(case8) if i not in picked]
    comparison = rest[:length]
    for rec in check:
        rec.check_role = CheckRole.STEP5_CHECK
    for rec in comparison:
        rec.check_role = CheckRole.COMPARISON
    return check, comparison


def step5_check(check_set: Sequence[ParticleRecord]) -> list[int]:
    """Positions whose four values (prepared, user, TP2, TP1) disagree; zero tolerance."""
    return [rec.position for rec in check_set
            if not (rec.prep_index == rec.user_measurement == rec.tp2_measurement
                    == rec.tp1_final_measurement)]


def finalize(comparison_sets: Sequence[Sequence[ParticleRecord]], key: Sequence[int],
             inputs: Sequence[Sequence[int]], d: int) -> tuple[list[list[int]], ComparisonReport]:
    """Users announce ``c`` from their own values; TP1 unmasks with hers and classifies."""
    announced = [[encode(rec.user_measurement, key[i], p[i], d) for i, rec in enumerate(cs)]
                 for cs, p in zip(comparison_sets, inputs)]
    relations = []
    for i in range(len(key)):
        f = [decode(c[i], cs[i].tp1_final_measurement, d) for c, cs in zip(announced, comparison_sets)]
        relations.append(relation_matrix(f, d))
    return announced, ComparisonReport(tuple(relations))


def _validate_inputs(config: ProtocolConfig, inputs, key) -> tuple[list[list[int]], list[int]]:
    d, h, L = config.d, config.h, config.length
    inputs = [[int(x) for x in p] for p in inputs]
    key = [int(x) for x in key]
    if len(inputs) != config.n_users or any(len(p) != L for p in inputs):
        raise DomainError(f"inputs must be {config.n_users} sequences of length {L}")
    if any(not 0 <= x <= h for p in inputs for x in p):
        raise DomainError(f"private digits must lie in [0, h={h}]")
    if len(key) != L or any(not 0 <= x < d for x in key):
        raise DomainError(f"key must be {L} digits in [0, {d - 1}]")
    return inputs, key


def run_protocol(config: ProtocolConfig, inputs, key, channel: Channel | None = None, *,
                 choices: Sequence[UserChoices] | None = None, audit: bool = False) -> Transcript:
    """Execute Steps 1-7 and return the full transcript.

    Abort conditions are reported through ``transcript.outcome``, never
    raised. A Case-8 shortfall is retried with fresh randomness up to
    ``config.max_retries`` times.

    Args:
        channel: quantum channel, possibly tapped; defaults to a clean one.
        choices: per-user pinned choices, replacing the seeded draws.
        audit: keep running the Step-5 check past an abort so that attack
            statistics see every checkable particle. The status still records
            the first abort and no report is produced.
    """
    inputs, key = _validate_inputs(config, inputs, key)
    if choices is not None and len(choices) != config.n_users:
        raise DomainError("choices must be given for every user")
    channel = channel or Channel()
    L, N = config.length, config.n_users
    events: list[Event] = []

    for attempt in range(config.max_retries + 1):
        events.append((1, "TP1", None, "attempt", {"attempt": attempt}))
        records = []
        for n in range(N):
            ch = choices[n] if choices is not None else UserChoices.draw(config, attempt, n)
            channel.open(streams.substream(config.seed, attempt, n, streams.EVE))
            records.append(_run_sequence(config, n, ch, channel, events))

        step4_failures = {}
        counts = []
        for n, seq in enumerate(records):
            events.append((4, "TP1", None, "publish-t2-positions",
                           {"user": n + 1, "positions": [r.position for r in seq if r.prep_basis is Basis.T2]}))
            events.append((4, _actor(n), None, "announce-r", {"bits": [int(r.r) for r in seq]}))
            events.append((4, "TP2", None, "announce-v", {"user": n + 1, "bits": [int(r.v) for r in seq]}))
            for rec in seq:
                if rec.case is Case.CASE3:
                    events.append((4, _actor(n), rec.position, "declare", {"value": rec.user_measurement}))
                elif rec.case is Case.CASE4:
                    events.append((4, "TP2", rec.position, "declare",
                                   {"user": n + 1, "value": rec.tp2_measurement}))
            failed = step4_check(seq)
            if failed:
                step4_failures[n] = failed
            counts.append(sum(rec.case is Case.CASE8 for rec in seq))
            events.append((4, "TP1", None, "step4-verdict",
                           {"user": n + 1, "failed": failed, "case8": counts[-1]}))

        status = None
        if step4_failures:
            status = RunStatus.ABORTED_STEP4_EAVESDROP
        elif min(counts) < 2 * L:
            status = RunStatus.ABORTED_INSUFFICIENT_CASE8

        step5_failures = {}
        comparison_sets = []
        if status is None or audit:
            for n, seq in enumerate(records):
                if counts[n] < 2 * L:
                    continue
                rng = streams.substream(config.seed, attempt, n, streams.PARTITION)
                check, comparison = case8_partition(seq, L, rng)
                comparison_sets.append(comparison)
                events.append((5, "TP1", None, "publish-check-positions",
                               {"user": n + 1, "positions": [r.position for r in check]}))
                events.append((5, _actor(n), None, "announce-values",
                               {"values": [r.user_measurement for r in check]}))
                events.append((5, "TP2", None, "announce-values",
                               {"user": n + 1, "values": [r.tp2_measurement for r in check]}))
                failed = step5_check(check)
                if failed:
                    step5_failures[n] = failed
                events.append((5, "TP1", None, "step5-verdict", {"user": n + 1, "failed": failed}))
            if status is None and step5_failures:
                status = RunStatus.ABORTED_STEP5_ERROR_RATE

        if status is RunStatus.ABORTED_INSUFFICIENT_CASE8 and attempt < config.max_retries:
            log.debug("attempt %d: Case-8 supply %s below %d, retrying", attempt, counts, 2 * L)
            continue
        break

    announced = None
    report = None
    if status is None:
        announced, report = finalize(comparison_sets, key, inputs, config.d)
        for n, c in enumerate(announced):
            events.append((6, _actor(n), None, "announce-c", {"c": c}))
        events.append((7, "TP1", None, "publish-results", report.to_dict()))
        status = RunStatus.COMPLETED
    return Transcript(config, key, inputs, records, announced, RunOutcome(status, report), events,
                      attempts=attempt + 1, step4_failures=step4_failures,
                      step5_failures=step5_failures, case8_counts=counts)
