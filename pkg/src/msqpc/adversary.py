"""Outside attackers spliced into the quantum channel, and their closed forms."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .cases import ChannelSegment, Mode
from .probe import ProbeAttack, apply_joint, controlled_shift_probe, dephasing_probe, identity_probe
from .qudit import Basis, DomainError, QuditState, check_dimension, measure_amplitudes


class AttackKind(enum.Enum):
    NONE = "none"
    IR_V1 = "ir-v1"
    IR_V2 = "ir-v2"
    IR_V3 = "ir-v3"
    MEASURE_RESEND = "mr"
    PROBE = "probe"


# (segment where the genuine particle is captured, segment where it is put back)
_INTERCEPT_PLAN = {
    AttackKind.IR_V1: (ChannelSegment.TP1_TO_PN, ChannelSegment.PN_TO_TP2),
    AttackKind.IR_V2: (ChannelSegment.TP1_TO_PN, ChannelSegment.TP2_TO_TP1),
    AttackKind.IR_V3: (ChannelSegment.PN_TO_TP2, ChannelSegment.TP2_TO_TP1),
}


@dataclass(frozen=True)
class AttackStrategy:
    kind: AttackKind = AttackKind.NONE
    segment: ChannelSegment | None = None
    probe: ProbeAttack | None = None
    target_positions: frozenset | None = None

    def __post_init__(self):
        kind = AttackKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind is AttackKind.MEASURE_RESEND:
            if self.segment is None:
                raise DomainError("measure-resend needs a channel segment")
            object.__setattr__(self, "segment", ChannelSegment(self.segment))
        if kind is AttackKind.PROBE and self.probe is None:
            raise DomainError("probe attack needs a ProbeAttack")
        if self.target_positions is not None:
            object.__setattr__(self, "target_positions", frozenset(int(p) for p in self.target_positions))

    def targets(self, position: int) -> bool:
        if self.kind is AttackKind.NONE:
            return False
        return self.target_positions is None or position in self.target_positions

    @property
    def name(self) -> str:
        if self.kind is AttackKind.MEASURE_RESEND:
            return f"mr:{self.segment.value}"
        if self.kind is AttackKind.PROBE:
            return f"probe:{self.probe.name}"
        return self.kind.value


NO_ATTACK = AttackStrategy()


def apply_attack(strategy: AttackStrategy, segment: ChannelSegment, position: int, state,
                 eve_memory: dict, rng: np.random.Generator):
    """Let Eve act on one particle in transit.

    ``state`` is a ``QuditState`` or an amplitude array (possibly already
    joint with a probe); the return value has the same form. Intercept-resend
    variants park the genuine particle in ``eve_memory`` and forward a
    uniformly random T1 fake, then swap the genuine one back later.
    """
    if not strategy.targets(position):
        return state
    wrapped = isinstance(state, QuditState)
    amps = state.amplitudes if wrapped else state
    out = _act(strategy, ChannelSegment(segment), position, amps, eve_memory, rng)
    if out is amps:
        return state
    if wrapped and out.ndim == 1:
        return QuditState._trusted(out)
    return out


def _act(strategy, segment, position, amps, eve_memory, rng):
    kind = strategy.kind
    if kind in _INTERCEPT_PLAN:
        capture, release = _INTERCEPT_PLAN[kind]
        if segment is capture:
            eve_memory[position] = amps
            d = amps.shape[0]
            fake = np.zeros(d, dtype=complex)
            fake[int(rng.integers(d))] = 1.0
            return fake
        if segment is release:
            try:
                return eve_memory.pop(position)
            except KeyError:
                raise RuntimeError(f"swap-back at position {position} with nothing stored") from None
        return amps
    if kind is AttackKind.MEASURE_RESEND:
        if segment is strategy.segment:
            _, collapsed = measure_amplitudes(amps, Basis.T1, float(rng.random()))
            return collapsed
        return amps
    if kind is AttackKind.PROBE:
        U = strategy.probe.unitary_for(segment)
        if U is None:
            return amps
        if amps.ndim == 1:
            amps = strategy.probe.attach(amps)
        return apply_joint(U, amps)
    return amps


class Channel:
    """In-process quantum channel, optionally tapped by an attacker.

    Attack memory lives for one user sequence; call ``open`` before each.
    """

    def __init__(self, strategy: AttackStrategy | None = None):
        self.strategy = strategy or NO_ATTACK
        self._memory: dict = {}
        self._rng: np.random.Generator | None = None

    @property
    def attacking(self) -> bool:
        return self.strategy.kind is not AttackKind.NONE

    def open(self, rng: np.random.Generator) -> None:
        self._memory = {}
        self._rng = rng

    def transit(self, segment: ChannelSegment, position: int, wire):
        if not self.attacking:
            return wire
        return apply_attack(self.strategy, segment, position, wire, self._memory, self._rng)


def closed_form_detection(strategy: AttackStrategy, d: int,
                          scenario: tuple[Basis, Mode, Mode]) -> float | None:
    """Per-attacked-particle detection probability, where one is known.

    Case-8 scenarios (T1, MEASURE, MEASURE) are Step-5 figures and include
    the factor 1/2 for the attacked particle landing in the check set when
    exactly 2L Case-8 particles exist. Returns None for probe attacks and for
    scenarios without a known value.
    """
    d = check_dimension(d)
    basis, r, v = Basis(scenario[0]), Mode(scenario[1]), Mode(scenario[2])
    kind = strategy.kind
    full = (d - 1) / d
    half = (d - 1) / (2 * d)
    M, R = Mode.MEASURE, Mode.REFLECT
    if kind is AttackKind.NONE:
        return 0.0
    if kind is AttackKind.PROBE:
        return None
    if kind is AttackKind.MEASURE_RESEND:
        if basis is Basis.T1:
            return 0.0
        # a T2 particle is only checked when both parties reflect
        return full if (r, v) == (R, R) else 0.0
    if basis is Basis.T2:
        return 0.0
    table = {
        AttackKind.IR_V1: {(R, R): 0.0, (R, M): 0.0, (M, R): full, (M, M): half},
        AttackKind.IR_V2: {(R, R): 0.0, (R, M): full, (M, R): full, (M, M): half},
        AttackKind.IR_V3: {(R, R): 0.0, (R, M): full, (M, R): 0.0, (M, M): half},
    }
    return table[kind][(r, v)]


_PROBE_FAMILIES = {
    "identity": lambda d, arg: identity_probe(d),
    "cshift": lambda d, arg: controlled_shift_probe(d),
    "dephasing": lambda d, arg: dephasing_probe(d, float(arg)),
}


def parse_attack(text: str, d: int) -> AttackStrategy:
    """Parse CLI spellings: none, ir-v1, ir-v2, ir-v3, mr:<segment>, probe:<family>[:<theta>].

    Segments are ``tp1-pn``, ``pn-tp2`` and ``tp2-tp1``; probe families are
    ``identity``, ``cshift`` and ``dephasing:<theta>``.
    """
    head, _, rest = text.strip().partition(":")
    if head in ("none", "ir-v1", "ir-v2", "ir-v3"):
        if rest:
            raise ValueError(f"attack {head!r} takes no argument")
        return AttackStrategy(AttackKind(head))
    if head == "mr":
        try:
            return AttackStrategy(AttackKind.MEASURE_RESEND, segment=ChannelSegment(rest))
        except ValueError:
            raise ValueError(f"unknown segment {rest!r}; use tp1-pn, pn-tp2 or tp2-tp1") from None
    if head == "probe":
        family, _, arg = rest.partition(":")
        if family not in _PROBE_FAMILIES or (family == "dephasing") != bool(arg):
            raise ValueError(f"unknown probe spec {rest!r}; use identity, cshift or dephasing:<theta>")
        return AttackStrategy(AttackKind.PROBE, probe=_PROBE_FAMILIES[family](d, arg))
    raise ValueError(f"unknown attack {text!r}")
