"""Entangle-measure attacks: Eve couples a private probe to the travelling particle.

One unitary ``U_E`` acts on the joint particle-probe space during one
transmission and a second unitary ``U_F`` during a later one, sharing the
same probe. ``probe_attack_evaluate`` enumerates every measurement branch of
the protocol on the joint pure state, so the detection probabilities it
returns are exact rather than sampled.

Joint arrays have shape ``(d, D)``; flattening is row-major, so the joint
basis index of ``|t>|e>`` is ``t * D + e``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cases import Case, ChannelSegment, Mode, scenario_of
from .qudit import Basis, DomainError, basis_coefficients, basis_matrix, check_dimension

UNITARY_TOL = 1e-10
_PRUNE = 1e-14

CHECKED_CASES = (Case.CASE1, Case.CASE2, Case.CASE3, Case.CASE4, Case.CASE8)


@dataclass(frozen=True, eq=False)
class ProbeAttack:
    """A pair of joint unitaries plus Eve's initial probe state.

    ``placement`` names the segments on which ``U_E`` and ``U_F`` act; the
    default puts ``U_E`` on TP1 -> P_n and ``U_F`` on P_n -> TP2.
    """

    d: int
    probe_dimension: int
    U_E: np.ndarray
    U_F: np.ndarray
    initial_probe: np.ndarray
    placement: tuple[ChannelSegment, ChannelSegment] = (
        ChannelSegment.TP1_TO_PN,
        ChannelSegment.PN_TO_TP2,
    )
    name: str = "custom"

    def __post_init__(self):
        d = check_dimension(self.d)
        D = int(self.probe_dimension)
        if D < 2:
            raise DomainError("probe dimension must be at least 2")
        n = d * D
        for label in ("U_E", "U_F"):
            U = np.array(getattr(self, label), dtype=complex)
            if U.shape != (n, n):
                raise DomainError(f"{label} must be {n}x{n}, got {U.shape}")
            if np.max(np.abs(U.conj().T @ U - np.eye(n))) > UNITARY_TOL:
                raise DomainError(f"{label} is not unitary")
            U.setflags(write=False)
            object.__setattr__(self, label, U)
        probe = np.array(self.initial_probe, dtype=complex)
        if probe.shape != (D,) or abs(np.vdot(probe, probe).real - 1) > UNITARY_TOL:
            raise DomainError("initial probe must be a unit vector of length probe_dimension")
        probe.setflags(write=False)
        object.__setattr__(self, "initial_probe", probe)
        seg_e, seg_f = (ChannelSegment(s) for s in self.placement)
        if seg_e.order >= seg_f.order:
            raise DomainError("U_E must act on an earlier segment than U_F")
        object.__setattr__(self, "placement", (seg_e, seg_f))

    def unitary_for(self, segment: ChannelSegment) -> np.ndarray | None:
        if segment is self.placement[0]:
            return self.U_E
        if segment is self.placement[1]:
            return self.U_F
        return None

    def attach(self, particle: np.ndarray) -> np.ndarray:
        """Tensor a bare particle with the fresh probe."""
        return np.multiply.outer(particle, self.initial_probe)


def apply_joint(U: np.ndarray, joint: np.ndarray) -> np.ndarray:
    return (U @ joint.reshape(-1)).reshape(joint.shape)


def _controlled(blocks: list[np.ndarray]) -> np.ndarray:
    """Block-diagonal ``sum_t |t><t| (x) V_t``."""
    d = len(blocks)
    D = blocks[0].shape[0]
    U = np.zeros((d * D, d * D), dtype=complex)
    for t, V in enumerate(blocks):
        U[t * D:(t + 1) * D, t * D:(t + 1) * D] = V
    return U


def _zero_probe(D: int) -> np.ndarray:
    e = np.zeros(D, dtype=complex)
    e[0] = 1.0
    return e


def identity_probe(d: int, probe_dimension: int | None = None, placement=None) -> ProbeAttack:
    D = probe_dimension or d
    eye = np.eye(d * D)
    kw = {"placement": placement} if placement else {}
    return ProbeAttack(d, D, eye, eye, _zero_probe(D), name="identity", **kw)


def controlled_shift_probe(d: int, placement=None) -> ProbeAttack:
    """``U_E |t>|e> = |t>|e + t mod d>`` with ``U_F`` the identity."""
    shift = [np.roll(np.eye(d), t, axis=0) for t in range(d)]
    kw = {"placement": placement} if placement else {}
    return ProbeAttack(d, d, _controlled(shift), np.eye(d * d), _zero_probe(d), name="cshift", **kw)


def dephasing_probe(d: int, theta: float, placement=None) -> ProbeAttack:
    """One-parameter family from the identity (0) to a which-path probe (pi/2).

    ``V_t`` rotates the probe by ``theta`` in the ``(|0>, |t>)`` plane, so
    ``U_E |t>|0> = |t>(cos(theta)|0> + sin(theta)|t>)`` for ``t > 0``. At
    ``theta = pi/2`` the probe ends in ``|t>``, matching the controlled shift
    on the initial probe state.
    """
    c, s = np.cos(theta), np.sin(theta)
    blocks = []
    for t in range(d):
        V = np.eye(d, dtype=complex)
        if t:
            V[0, 0], V[t, 0], V[0, t], V[t, t] = c, s, -s, c
        blocks.append(V)
    kw = {"placement": placement} if placement else {}
    return ProbeAttack(d, d, _controlled(blocks), np.eye(d * d), _zero_probe(d),
                       name=f"dephasing:{theta:g}", **kw)


@dataclass(frozen=True)
class ProbeBranch:
    case: Case
    prepared: int
    outcomes: dict
    weight: float
    probe_state: np.ndarray = field(repr=False)


@dataclass
class ProbeEvaluation:
    """Exact per-case failure probabilities of one probe attack.

    ``detection[case]`` is the probability that the particle's own security
    check fails, averaged over the prepared index. For Case 8 this is the
    mismatch rate of a particle that is drawn into the Step-5 check set.
    """

    d: int
    detection: dict[Case, float]
    branches: list[ProbeBranch]
    max_norm_error: float

    @property
    def total_detection(self) -> float:
        return float(sum(self.detection.values()))

    def step5_rate(self) -> float:
        """Per-attacked-Case-8-particle rate when exactly 2L Case-8 particles exist."""
        return 0.5 * self.detection[Case.CASE8]

    def probe_states_independent(self, tol: float = 1e-9) -> bool:
        states = np.array([b.probe_state for b in self.branches if b.weight > _PRUNE])
        gram = np.abs(states.conj() @ states.T) ** 2
        return bool(np.all(gram >= 1.0 - tol))


def _measure_branches(branches, key):
    out = []
    for amps, outcomes in branches:
        for m in range(amps.shape[0]):
            row = amps[m]
            if np.vdot(row, row).real < _PRUNE:
                continue
            collapsed = np.zeros_like(amps)
            collapsed[m] = row
            out.append((collapsed, {**outcomes, key: m}))
    return out


def _failed(case: Case, t: int, o: dict) -> bool:
    if case in (Case.CASE1, Case.CASE2):
        return o["tp1"] != t
    if case is Case.CASE3:
        return o["user"] != t or o["tp1"] != t
    if case is Case.CASE4:
        return o["tp2"] != t or o["tp1"] != t
    return o["user"] != t or o["tp2"] != t or o["tp1"] != t


def probe_attack_evaluate(attack: ProbeAttack, d: int | None = None) -> ProbeEvaluation:
    """Evolve every checked case exactly under ``attack``.

    For each case in {1, 2, 3, 4, 8} and each prepared index, the joint
    state is pushed through both transmissions and both parties' modes,
    branching on every measurement. Returns the check-failure probability per
    case and the normalized probe state of every surviving branch.
    """
    d = attack.d if d is None else check_dimension(d)
    if d != attack.d:
        raise DomainError(f"attack built for d={attack.d}, evaluated at d={d}")
    detection: dict[Case, float] = {}
    branches_out: list[ProbeBranch] = []
    max_err = 0.0

    def transmit(branches, segment):
        nonlocal max_err
        U = attack.unitary_for(segment)
        if U is None:
            return branches
        moved = [(apply_joint(U, a), o) for a, o in branches]
        total = sum(np.vdot(a, a).real for a, _ in moved)
        max_err = max(max_err, abs(total - 1.0))
        return moved

    for case in CHECKED_CASES:
        prep_basis, r, v = scenario_of(case)
        tp1_basis = case.tp1_basis
        fail = 0.0
        for t in range(d):
            start = attack.attach(basis_matrix(d, prep_basis)[:, t])
            branches = [(start, {})]
            branches = transmit(branches, ChannelSegment.TP1_TO_PN)
            if r is Mode.MEASURE:
                branches = _measure_branches(branches, "user")
            branches = transmit(branches, ChannelSegment.PN_TO_TP2)
            if v is Mode.MEASURE:
                branches = _measure_branches(branches, "tp2")
            branches = transmit(branches, ChannelSegment.TP2_TO_TP1)
            for amps, outcomes in branches:
                coeffs = basis_coefficients(amps, tp1_basis)
                for a in range(d):
                    probe = coeffs[a]
                    w = float(np.vdot(probe, probe).real)
                    if w < _PRUNE:
                        continue
                    o = {**outcomes, "tp1": a}
                    if _failed(case, t, o):
                        fail += w
                    branches_out.append(ProbeBranch(case, t, o, w, probe / np.sqrt(w)))
        detection[case] = fail / d
    return ProbeEvaluation(d, detection, branches_out, max_err)
