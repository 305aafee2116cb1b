import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import binom

from msqpc import streams
from msqpc.cases import Case, CheckRole, Mode, classify_case, scenario_of
from msqpc.comparison import oracle_matrix
from msqpc.protocol import (
    ComparisonReport,
    ParticleRecord,
    ProtocolConfig,
    RunOutcome,
    RunStatus,
    UserChoices,
    case8_partition,
    party_turn,
    run_protocol,
    step4_check,
    step5_check,
)
from msqpc.qudit import Basis, DomainError, prepare, states_equal

B1, B2 = Basis.T1, Basis.T2
R, M = Mode.REFLECT, Mode.MEASURE


def _rec(pos, case, t=0, user=None, tp2=None, tp1=None):
    basis, r, v = scenario_of(case)
    return ParticleRecord(pos, basis, t, r, v, case, user, tp2, tp1)


def _random_io(cfg, rng):
    p = rng.integers(0, cfg.h + 1, (cfg.n_users, cfg.length)).tolist()
    k = rng.integers(0, cfg.d, cfg.length).tolist()
    return p, k


class TestCaseTable:
    @pytest.mark.parametrize("basis,r,v,case", [
        (B1, R, R, 1), (B2, R, R, 2), (B1, M, R, 3), (B1, R, M, 4),
        (B2, R, M, 5), (B2, M, R, 6), (B2, M, M, 7), (B1, M, M, 8),
    ])
    def test_classification(self, basis, r, v, case):
        assert classify_case(basis, r, v) == Case(case)

    def test_ignored_cases(self):
        assert [c for c in Case if c.ignored] == [Case.CASE5, Case.CASE6, Case.CASE7]

    def test_tp1_bases(self):
        assert Case.CASE2.tp1_basis is B2
        assert all(Case(c).tp1_basis is B1 for c in (1, 3, 4, 8))


class TestPartyTurn:
    def test_reflect_is_identity(self):
        rec = _rec(1, Case.CASE2, t=2)
        s = prepare(5, B2, 2)
        assert party_turn(rec, s, R, np.random.default_rng(0)) is s
        assert rec.user_measurement is None

    def test_measure_records_and_regenerates(self):
        rec = _rec(1, Case.CASE8, t=3)
        out = party_turn(rec, prepare(5, B1, 3), M, np.random.default_rng(0))
        assert rec.user_measurement == 3
        assert states_equal(out, prepare(5, B1, 3))

    def test_tp2_slot(self):
        rec = _rec(1, Case.CASE4, t=1)
        party_turn(rec, prepare(3, B1, 1), M, np.random.default_rng(0), party="tp2")
        assert rec.tp2_measurement == 1 and rec.user_measurement is None

    def test_measuring_fourier_state_is_uniform(self):
        rng = np.random.default_rng(5)
        counts = np.zeros(5)
        for _ in range(20_000):
            rec = _rec(1, Case.CASE6)
            party_turn(rec, prepare(5, B2, 4), M, rng)
            counts[rec.user_measurement] += 1
        se = math.sqrt(0.2 * 0.8 / 20_000)
        assert np.all(np.abs(counts / 20_000 - 0.2) <= 3 * se)


class TestStep4:
    def test_case1_pass(self):
        assert step4_check([_rec(1, Case.CASE1, t=4, tp1=4)]) == []

    def test_case1_fail(self):
        assert step4_check([_rec(1, Case.CASE1, t=4, tp1=2)]) == [1]

    def test_case3_mismatch(self):
        assert step4_check([_rec(7, Case.CASE3, t=2, user=1, tp1=2)]) == [7]

    def test_case4_pass(self):
        assert step4_check([_rec(1, Case.CASE4, t=2, tp2=2, tp1=2)]) == []

    def test_ignored_cases_never_fail(self):
        recs = [_rec(i, Case(c), t=1, user=0, tp2=2) for i, c in enumerate((5, 6, 7, 8), 1)]
        assert step4_check(recs) == []

    def test_missing_declaration(self):
        with pytest.raises(DomainError):
            step4_check([_rec(1, Case.CASE3, t=2, tp1=2)])


class TestStep5:
    def test_all_agree(self):
        assert step5_check([_rec(1, Case.CASE8, 3, 3, 3, 3), _rec(2, Case.CASE8, 1, 1, 1, 1)]) == []

    def test_single_mismatch(self):
        assert step5_check([_rec(1, Case.CASE8, 3, 3, 3, 3), _rec(2, Case.CASE8, 1, 1, 0, 1)]) == [2]


class TestPartition:
    def _case8(self, n):
        return [_rec(i, Case.CASE8, 0, 0, 0, 0) for i in range(1, n + 1)]

    def test_exact_supply(self):
        recs = self._case8(4)
        check, comp = case8_partition(recs, 2, np.random.default_rng(0))
        assert len(check) == len(comp) == 2
        assert {r.position for r in check}.isdisjoint(r.position for r in comp)
        assert {r.position for r in check} | {r.position for r in comp} == {1, 2, 3, 4}

    def test_surplus_takes_lowest_remaining(self):
        recs = self._case8(7)
        check, comp = case8_partition(recs, 2, np.random.default_rng(3))
        rest = sorted(set(range(1, 8)) - {r.position for r in check})
        assert [r.position for r in comp] == rest[:2]
        assert sum(r.check_role is None for r in recs) == 3

    def test_shortfall_rejected(self):
        with pytest.raises(ValueError):
            case8_partition(self._case8(3), 2, np.random.default_rng(0))

    def test_selection_is_fair(self):
        rng = np.random.default_rng(11)
        n = 10_000
        hits = np.zeros(4)
        for _ in range(n):
            check, _ = case8_partition(self._case8(4), 2, rng)
            for r in check:
                hits[r.position - 1] += 1
        se = math.sqrt(0.25 / n)
        assert np.all(np.abs(hits / n - 0.5) <= 3 * se)


class TestConfig:
    @pytest.mark.parametrize("kwargs", [dict(d=4), dict(n_users=1), dict(length=0), dict(max_retries=-1),
                                        dict(t2_prep_probability=0.0)])
    def test_rejects(self, kwargs):
        base = dict(d=5, n_users=2, length=1)
        with pytest.raises(DomainError):
            ProtocolConfig(**{**base, **kwargs})

    def test_inputs_above_h_rejected(self):
        with pytest.raises(DomainError):
            run_protocol(ProtocolConfig(d=5, n_users=2, length=1), [[3], [0]], [0])

    def test_outcome_report_invariant(self):
        with pytest.raises(ValueError):
            RunOutcome(RunStatus.COMPLETED)
        with pytest.raises(ValueError):
            RunOutcome(RunStatus.ABORTED_STEP5_ERROR_RATE, ComparisonReport((np.zeros((2, 2)),)))


class TestHonestRuns:
    def test_completes_and_matches_oracle(self):
        # d=5, three users, four digits: 500 completed runs
        rng = np.random.default_rng(2024)
        done = 0
        seed = 0
        while done < 500:
            cfg = ProtocolConfig(d=5, n_users=3, length=4, seed=seed, max_retries=20)
            seed += 1
            p, k = _random_io(cfg, rng)
            tr = run_protocol(cfg, p, k)
            assert tr.outcome.status in (RunStatus.COMPLETED, RunStatus.ABORTED_INSUFFICIENT_CASE8)
            if not tr.completed:
                continue
            done += 1
            for i, rel in enumerate(tr.outcome.report.relations):
                assert np.array_equal(rel, oracle_matrix([row[i] for row in p]))

    def test_all_parties_agree_on_case8(self):
        cfg = ProtocolConfig(d=7, n_users=4, length=2, seed=3, max_retries=50)
        tr = run_protocol(cfg, [[0, 1], [2, 3], [3, 3], [1, 0]], [4, 6])
        assert tr.completed
        for seq in tr.records:
            for rec in seq:
                if rec.case is Case.CASE8:
                    assert rec.prep_index == rec.user_measurement == rec.tp2_measurement == rec.tp1_final_measurement

    def test_roles(self):
        cfg = ProtocolConfig(d=5, n_users=2, length=2, seed=8, max_retries=50)
        tr = run_protocol(cfg, [[0, 1], [2, 1]], [1, 1])
        assert tr.completed
        for seq in tr.records:
            roles = [r.check_role for r in seq]
            assert roles.count(CheckRole.STEP5_CHECK) == 2
            assert roles.count(CheckRole.COMPARISON) == 2
            for r in seq:
                if r.case.ignored:
                    assert r.check_role is CheckRole.IGNORED and r.tp1_final_measurement is None

    def test_ping_pong_cadence(self):
        cfg = ProtocolConfig(d=3, n_users=2, length=1, seed=4, max_retries=50)
        tr = run_protocol(cfg, [[0], [1]], [2])
        for user in (0, 1):
            trail = []
            for step, actor, pos, event, payload in tr.events:
                if event in ("send", "receive") and payload.get("user") == user + 1:
                    trail.append((event, pos))
            # each attempt starts over at position 1
            per_attempt = [trail[i:i + 2 * cfg.seq_len] for i in range(0, len(trail), 2 * cfg.seq_len)]
            for chunk in per_attempt:
                assert chunk == [(e, l) for l in range(1, cfg.seq_len + 1) for e in ("send", "receive")]

    def test_deterministic(self):
        cfg = ProtocolConfig(d=19, n_users=3, length=2, seed=99, max_retries=10)
        a = run_protocol(cfg, [[1, 2], [3, 4], [5, 6]], [7, 8]).to_dict()
        b = run_protocol(cfg, [[1, 2], [3, 4], [5, 6]], [7, 8]).to_dict()
        assert a == b

    def test_seed_changes_run(self):
        base = dict(d=19, n_users=3, length=2, max_retries=10)
        a = run_protocol(ProtocolConfig(seed=1, **base), [[1, 2], [3, 4], [5, 6]], [7, 8]).to_dict()
        b = run_protocol(ProtocolConfig(seed=2, **base), [[1, 2], [3, 4], [5, 6]], [7, 8]).to_dict()
        assert a["records"] != b["records"]

    def test_shortfall_without_retries(self):
        statuses = {run_protocol(ProtocolConfig(d=3, n_users=4, length=1, seed=s), [[0]] * 4, [0]).outcome.status
                    for s in range(30)}
        assert RunStatus.ABORTED_INSUFFICIENT_CASE8 in statuses

    def test_aborted_run_has_no_report(self):
        for s in range(30):
            tr = run_protocol(ProtocolConfig(d=3, n_users=4, length=1, seed=s), [[0]] * 4, [0])
            if not tr.completed:
                assert tr.outcome.report is None and tr.announced is None
                return
        pytest.fail("expected at least one suspended run")

    def test_record_round_trip(self):
        tr = run_protocol(ProtocolConfig(d=5, n_users=2, length=1, seed=0, max_retries=30), [[1], [2]], [3])
        for seq in tr.records:
            for rec in seq:
                assert ParticleRecord.from_dict(rec.to_dict()) == rec
        rep = tr.outcome.report
        assert ComparisonReport.from_dict(rep.to_dict()) == rep


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**63 - 1), d=st.sampled_from([3, 5, 7, 19]), n=st.integers(2, 4),
       L=st.integers(1, 3), data=st.data())
def test_honest_runs_never_flag_eavesdropping(seed, d, n, L, data):
    h = (d - 1) // 2
    p = data.draw(st.lists(st.lists(st.integers(0, h), min_size=L, max_size=L), min_size=n, max_size=n))
    k = data.draw(st.lists(st.integers(0, d - 1), min_size=L, max_size=L))
    tr = run_protocol(ProtocolConfig(d=d, n_users=n, length=L, seed=seed, max_retries=40), p, k)
    assert not tr.step4_failures and not tr.step5_failures
    if tr.completed:
        for i, rel in enumerate(tr.outcome.report.relations):
            assert np.array_equal(rel, oracle_matrix([row[i] for row in p]))


def test_case8_supply_follows_binomial():
    L, N, runs = 1, 4, 1500
    counts, suspended = [], 0
    for s in range(runs):
        tr = run_protocol(ProtocolConfig(d=5, n_users=N, length=L, seed=s), [[0]] * N, [0])
        counts.extend(tr.case8_counts)
        suspended += not tr.completed
    counts = np.array(counts)
    n = 16 * L
    assert abs(counts.mean() - n / 8) <= 3 * math.sqrt(n * (1 / 8) * (7 / 8) / len(counts))
    q_run = 1 - (1 - binom.cdf(2 * L - 1, n, 1 / 8)) ** N
    assert abs(suspended / runs - q_run) <= 3 * math.sqrt(q_run * (1 - q_run) / runs)


def test_forced_choices_keep_measurement_draws():
    cfg = ProtocolConfig(d=5, n_users=2, length=1)
    base = UserChoices.draw(cfg, 0, 0)
    forced = UserChoices.forced([B1] * cfg.seq_len, [0] * cfg.seq_len, [1] * cfg.seq_len, [1] * cfg.seq_len, base)
    assert np.array_equal(forced.u_user, base.u_user)
    assert not forced.prep_t2.any()


def test_substreams_are_independent_of_attack_stream():
    a = streams.substream(5, 0, 0, streams.TP1).random(4)
    b = streams.substream(5, 0, 0, streams.EVE).random(4)
    assert not np.allclose(a, b)
    assert np.array_equal(a, streams.substream(5, 0, 0, streams.TP1).random(4))
