"""Efficiency accounting, machine-readable reports and the worked d=19 example."""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from itertools import combinations

from .cases import Case, CheckRole
from .comparison import classify, decode, ordering, pairwise_difference
from .protocol import ProtocolConfig, RunStatus, Transcript, UserChoices, run_protocol
from .qudit import Basis, DomainError

SCHEMA_VERSION = 1


class Convention(enum.Enum):
    # quantum resources plus the c announcements only
    PAPER_NEGLECT_CHECKS = "paper-neglect-checks"
    # also every security-check announcement, across all attempts
    COUNT_EVERYTHING = "count-everything"


@dataclass(frozen=True)
class EfficiencyInput:
    sigma: int
    mu: int
    theta: int
    convention: Convention | None = None

    def __post_init__(self):
        if min(self.sigma, self.mu, self.theta) < 0:
            raise DomainError("resource counts must be non-negative")


def efficiency(inp: EfficiencyInput) -> float:
    """Qudit efficiency ``theta / (sigma + mu)``."""
    denom = inp.sigma + inp.mu
    if denom <= 0:
        raise DomainError("efficiency undefined: sigma + mu must be positive")
    return inp.theta / denom


_ANNOUNCE_SIZES = {
    "publish-t2-positions": "positions",
    "announce-r": "bits",
    "announce-v": "bits",
    "publish-check-positions": "positions",
    "announce-values": "values",
}


def count_resources(transcript: Transcript, convention: Convention = Convention.PAPER_NEGLECT_CHECKS) -> EfficiencyInput:
    """Count transmitted qudits and classical symbols of a completed run.

    Every announced symbol (a bit, a position, a dit) counts as one unit.
    """
    if not transcript.completed:
        raise DomainError("resource counting needs a completed run")
    cfg = transcript.config
    N, L = cfg.n_users, cfg.length
    convention = Convention(convention)
    if convention is Convention.PAPER_NEGLECT_CHECKS:
        return EfficiencyInput(N * cfg.seq_len, N * L, L, convention)
    mu = N * L
    for _, _, _, event, payload in transcript.events:
        if event == "declare":
            mu += 1
        elif event in _ANNOUNCE_SIZES:
            mu += len(payload[_ANNOUNCE_SIZES[event]])
    return EfficiencyInput(N * cfg.seq_len * transcript.attempts, mu, L, convention)


def efficiency_block(transcript: Transcript) -> dict:
    out = {}
    for conv in Convention:
        inp = count_resources(transcript, conv)
        out[conv.value] = {"sigma": inp.sigma, "mu": inp.mu, "theta": inp.theta, "eta": efficiency(inp)}
    return out


@dataclass
class RunReport:
    """Versioned JSON document written by every CLI command."""

    command: str
    config: dict
    status: str | None = None
    attempts: int | None = None
    relations: list | None = None
    announced: list | None = None
    detection: list = field(default_factory=list)
    efficiency: dict | None = None
    example: dict | None = None
    timing: dict | None = None
    schema: int = SCHEMA_VERSION

    @classmethod
    def from_transcript(cls, command: str, transcript: Transcript) -> "RunReport":
        report = transcript.outcome.report
        return cls(
            command=command,
            config={**transcript.config.to_dict(), "inputs": transcript.inputs, "key": transcript.key},
            status=transcript.outcome.status.value,
            attempts=transcript.attempts,
            relations=report.to_dict()["relations"] if report else None,
            announced=transcript.announced,
            efficiency=efficiency_block(transcript) if transcript.completed else None,
        )

    def to_dict(self) -> dict:
        out = {
            "schema": self.schema, "command": self.command, "config": self.config,
            "status": self.status, "attempts": self.attempts, "relations": self.relations,
            "announced": self.announced, "detection": self.detection,
            "efficiency": self.efficiency, "example": self.example,
        }
        if self.timing is not None:
            out["timing"] = self.timing
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        data = json.loads(text)
        if data.get("schema") != SCHEMA_VERSION:
            raise ValueError(f"unsupported report schema {data.get('schema')!r}")
        return cls(**data)


# Worked instance: d = 19, four users, first digits only.
EXAMPLE_D = 19
EXAMPLE_KEY = 16
EXAMPLE_INPUTS = (5, 3, 5, 6)
EXAMPLE_MASKS = (7, 2, 9, 10)

# one particle of every case, twice over: two Case-8 particles per user
_EXAMPLE_CASES = [Case(c) for c in range(1, 9)] * 2
_SCENARIOS = {
    Case.CASE1: (Basis.T1, 0, 0), Case.CASE2: (Basis.T2, 0, 0), Case.CASE3: (Basis.T1, 1, 0),
    Case.CASE4: (Basis.T1, 0, 1), Case.CASE5: (Basis.T2, 0, 1), Case.CASE6: (Basis.T2, 1, 0),
    Case.CASE7: (Basis.T2, 1, 1), Case.CASE8: (Basis.T1, 1, 1),
}


def example_transcript(seed: int = 0) -> Transcript:
    """Replay the worked instance through the full protocol.

    Preparation and mode choices are pinned so that each user holds exactly
    two Case-8 particles, both prepared in the user's mask state. Whichever
    one Step 5 samples, the other carries the intended mask into Step 6.
    """
    cfg = ProtocolConfig(d=EXAMPLE_D, n_users=len(EXAMPLE_INPUTS), length=1, seed=seed)
    choices = []
    for n, mask in enumerate(EXAMPLE_MASKS):
        bases, idx, r, v = [], [], [], []
        for pos, case in enumerate(_EXAMPLE_CASES):
            b, rb, vb = _SCENARIOS[case]
            bases.append(b)
            r.append(rb)
            v.append(vb)
            idx.append(mask if case is Case.CASE8 else (3 * pos + n) % EXAMPLE_D)
        choices.append(UserChoices.forced(bases, idx, r, v, UserChoices.draw(cfg, 0, n)))
    return run_protocol(cfg, [[p] for p in EXAMPLE_INPUTS], [EXAMPLE_KEY], choices=choices)


def example_chain(seed: int = 0) -> dict:
    """Full derivation chain (m, c, f, R, y, ordering) of the worked instance."""
    tr = example_transcript(seed)
    if tr.outcome.status is not RunStatus.COMPLETED:
        raise RuntimeError(f"example run did not complete: {tr.outcome.status}")
    d = EXAMPLE_D
    comparison = [next(r for r in seq if r.check_role is CheckRole.COMPARISON) for seq in tr.records]
    m_users = [rec.user_measurement for rec in comparison]
    m_tp1 = [rec.tp1_final_measurement for rec in comparison]
    c = [row[0] for row in tr.announced]
    f = [decode(ci, mi, d) for ci, mi in zip(c, m_tp1)]
    pairs = list(combinations(range(len(c)), 2))
    R = {f"{a + 1}{b + 1}": pairwise_difference(f[a], f[b], d) for a, b in pairs}
    y = {key: int(classify(val, d)) for key, val in R.items()}
    relations = tr.outcome.report.relations[0]
    return {
        "d": d, "k": EXAMPLE_KEY, "p": list(EXAMPLE_INPUTS), "m": m_users, "m_tp1": m_tp1,
        "c": c, "f": f, "R": R, "y": y, "ordering": ordering(relations),
        "relations": relations.tolist(), "status": tr.outcome.status.value,
    }


def format_chain(chain: dict) -> str:
    lines = [f"d = {chain['d']}, h = {(chain['d'] - 1) // 2}, k = {chain['k']}"]
    lines.append("p = (" + ", ".join(map(str, chain["p"])) + ")")
    lines.append("m = (" + ", ".join(map(str, chain["m"])) + ")")
    for n, (m, p, c) in enumerate(zip(chain["m"], chain["p"], chain["c"]), 1):
        lines.append(f"c{n} = {m} + {chain['k']} + {p} mod {chain['d']} = {c}")
    for n, (c, m, f) in enumerate(zip(chain["c"], chain["m_tp1"], chain["f"]), 1):
        lines.append(f"f{n} = {c} - {m} mod {chain['d']} = {f}")
    names = {1: "GREATER", 0: "EQUAL", -1: "LESS"}
    for key, r in chain["R"].items():
        a, b = int(key[0]), int(key[1])
        lines.append(f"R{key} = f{a} - f{b} = {chain['f'][a - 1]} - {chain['f'][b - 1]} = {r}"
                     f"  -> y = {chain['y'][key]:+d} ({names[chain['y'][key]]})")
    lines.append(f"verdict: {chain['ordering']}")
    return "\n".join(lines)

