import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from msqpc.analysis import (
    Convention,
    EfficiencyInput,
    RunReport,
    count_resources,
    efficiency,
    example_chain,
    format_chain,
)
from msqpc.protocol import ProtocolConfig, RunStatus, run_protocol
from msqpc.qudit import DomainError


def _completed(d, n, L, seed=0):
    for s in range(seed, seed + 200):
        tr = run_protocol(ProtocolConfig(d=d, n_users=n, length=L, seed=s, max_retries=50),
                          [[0] * L for _ in range(n)], [0] * L)
        if tr.completed:
            return tr
    raise AssertionError("no completed run")


class TestEfficiency:
    def test_basic(self):
        assert efficiency(EfficiencyInput(10, 0, 1)) == pytest.approx(0.1)

    def test_with_classical(self):
        assert efficiency(EfficiencyInput(640, 40, 10)) == pytest.approx(10 / 680)

    def test_two_users_single_digit(self):
        assert efficiency(EfficiencyInput(32, 2, 1)) == pytest.approx(1 / 34)

    def test_zero_denominator(self):
        with pytest.raises(DomainError):
            efficiency(EfficiencyInput(0, 0, 1))

    def test_negative(self):
        with pytest.raises(DomainError):
            EfficiencyInput(-1, 0, 1)

    @given(s=st.integers(1, 10**6), m=st.integers(0, 10**6), t=st.integers(0, 10**6),
           ds=st.integers(0, 1000), dm=st.integers(0, 1000))
    def test_monotone(self, s, m, t, ds, dm):
        assert efficiency(EfficiencyInput(s + ds, m + dm, t)) <= efficiency(EfficiencyInput(s, m, t))


class TestCounting:
    def test_four_users_ten_digits(self):
        inp = count_resources(_completed(5, 4, 10), Convention.PAPER_NEGLECT_CHECKS)
        assert (inp.sigma, inp.mu, inp.theta) == (640, 40, 10)

    def test_two_users_one_digit(self):
        inp = count_resources(_completed(3, 2, 1))
        assert (inp.sigma, inp.mu, inp.theta) == (32, 2, 1)

    def test_count_everything_dominates(self):
        for seed in (0, 5, 9):
            tr = _completed(5, 3, 2, seed)
            lo = count_resources(tr, Convention.PAPER_NEGLECT_CHECKS)
            hi = count_resources(tr, Convention.COUNT_EVERYTHING)
            assert hi.sigma >= lo.sigma and hi.mu >= lo.mu and hi.theta == lo.theta
            assert efficiency(hi) <= efficiency(lo)

    def test_aborted_run_rejected(self):
        for s in range(50):
            tr = run_protocol(ProtocolConfig(d=3, n_users=4, length=1, seed=s), [[0]] * 4, [0])
            if tr.outcome.status is RunStatus.ABORTED_INSUFFICIENT_CASE8:
                with pytest.raises(DomainError):
                    count_resources(tr)
                return
        pytest.fail("no suspended run found")


class TestReport:
    def test_round_trip(self):
        rep = RunReport.from_transcript("run", _completed(19, 3, 2))
        assert RunReport.from_json(rep.to_json()).to_dict() == rep.to_dict()

    def test_schema_checked(self):
        with pytest.raises(ValueError):
            RunReport.from_json('{"schema": 99, "command": "run", "config": {}}')

    def test_timing_omitted_by_default(self):
        assert "timing" not in RunReport("run", {}).to_dict()


class TestExample:
    def test_chain(self):
        chain = example_chain()
        assert chain["c"] == [9, 2, 11, 13]
        assert chain["f"] == [2, 0, 2, 3]
        assert list(chain["R"].values()) == [2, 0, 18, 17, 16, 18]
        assert list(chain["y"].values()) == [1, 0, -1, -1, -1, -1]
        assert chain["ordering"] == "p2 < p1 = p3 < p4"
        assert chain["m"] == chain["m_tp1"] == [7, 2, 9, 10]

    def test_seed_independent(self):
        assert example_chain(0)["c"] == example_chain(12345)["c"]

    def test_text(self):
        text = format_chain(example_chain())
        assert "c1 = 7 + 16 + 5 mod 19 = 9" in text
        assert text.endswith("verdict: p2 < p1 = p3 < p4")

    def test_relations_antisymmetric(self):
        rel = np.array(example_chain()["relations"])
        assert np.array_equal(rel, -rel.T)
