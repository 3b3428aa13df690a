import numpy as np
import pytest

from bpslab.exceptions import InvalidParameter
from bpslab.models.reports import Verdict
from bpslab.services.core import ups_distribution
from bpslab.services.diagnosis import (
    Answering,
    Metric,
    capability_gap,
    capability_gap_estimate,
    diagnose,
    evaluate_performance,
    oracle_best_of_n,
)
from bpslab.services.speakers import BpsSpeaker, RewardTable, tom_from_reward
from bpslab.utils.rng import make_rng, sample_index
from tests.helpers import base_from_row, game_from_column, tom_from_column

RISING = [0.1, 0.2, 0.3, 0.9]


def verdicts(model, game, n, seeds=range(10), trials=1_000, answering=Answering.BEST_OF_N):
    return [diagnose(model, game, n, trials, seed=seed, answering=answering).verdict for seed in seeds]


class TestEvaluate:
    def test_one_hot_speaker(self, make_game):
        assert evaluate_performance([0.0, 1.0], make_game([0.3, 0.7]), 0) == pytest.approx(0.7)

    def test_uniform_speaker(self, make_game):
        assert evaluate_performance([0.5, 0.5], make_game([0.8, 0.2]), 0) == pytest.approx(0.5)

    def test_unbounded_speaker(self, make_game):
        g = make_game([0.8, 0.2])
        assert evaluate_performance(ups_distribution(g), g, 0) == pytest.approx(0.68)

    def test_sampling_approaches_enumeration(self, make_game):
        g = make_game(RISING)
        dist = [0.4, 0.3, 0.2, 0.1]
        assert evaluate_performance(dist, g, 5_000, seed=3) == pytest.approx(evaluate_performance(dist, g, 0), abs=0.02)

    def test_argmax_success(self, make_game):
        g = make_game([0.3, 0.7])
        assert evaluate_performance([0.25, 0.75], g, 0, metric=Metric.ARGMAX_SUCCESS) == pytest.approx(0.75)

    def test_policy_speaker(self, make_game):
        assert evaluate_performance(lambda rng: 1, make_game([0.3, 0.7]), 10) == pytest.approx(0.7)

    def test_policy_cannot_be_enumerated(self, make_game):
        with pytest.raises(InvalidParameter):
            evaluate_performance(lambda rng: 1, make_game([0.3, 0.7]), 0)


class TestOracle:
    def test_single_candidate_is_a_plain_sample(self, make_game):
        dist = np.array([0.1, 0.6, 0.3])
        g = make_game([0.5, 0.2, 0.9])
        for seed in range(20):
            assert oracle_best_of_n(dist, g, 1, make_rng(seed)) == int(sample_index(make_rng(seed), dist, 1)[0])

    def test_one_hot_model(self, make_game):
        g = make_game(RISING)
        assert all(oracle_best_of_n([0.0, 1.0, 0.0, 0.0], g, 8, make_rng(s)) == 1 for s in range(20))

    def test_picks_best_candidate(self, make_game):
        g = make_game(RISING)
        assert all(oracle_best_of_n([0.25] * 4, g, 64, make_rng(s)) == 3 for s in range(50))


class TestCapabilityGap:
    def test_two_candidates(self, make_game):
        assert capability_gap([0.5, 0.5], make_game([0.9, 0.1]), 2, 10_000) == pytest.approx(0.2, abs=0.02)

    def test_single_candidate_has_no_gap(self, make_game):
        assert capability_gap([0.25] * 4, make_game(RISING), 1, 500) == 0.0

    def test_exact_argmax_model_has_no_gap(self, make_game):
        assert capability_gap([0.0, 0.0, 0.0, 1.0], make_game(RISING), 8, 500) == 0.0

    def test_grows_with_candidates(self, make_game):
        g = make_game(RISING)
        gaps = [capability_gap([0.4, 0.3, 0.2, 0.1], g, n, 2_000, seed=1) for n in (1, 2, 4, 8)]
        assert all(gap >= 0 for gap in gaps)
        assert gaps == sorted(gaps)

    def test_ranking_by_the_real_listener_closes_the_gap(self, make_game):
        g = make_game(RISING)
        assert capability_gap_estimate([0.25] * 4, g, 4, 500, ranking=np.array(RISING)) == (0.0, 0.0)

    def test_reports_standard_error(self, make_game):
        gap, stderr = capability_gap_estimate([0.5, 0.5], make_game([0.9, 0.1]), 2, 10_000)
        assert gap == pytest.approx(0.2, abs=0.02)
        assert 0 < stderr < 0.01


class TestDiagnose:
    def test_search_limited(self):
        model = BpsSpeaker(base=base_from_row([0.5, 0.25, 0.25, 0.0]), tom=tom_from_column(RISING))
        outcomes = verdicts(model, game_from_column(RISING), 4)
        assert outcomes.count(Verdict.SEARCH_LIMITED) >= 9

    def test_pragmatics_limited(self):
        model = BpsSpeaker(base=base_from_row([0.25] * 4), tom=tom_from_column(RISING[::-1]))
        outcomes = verdicts(model, game_from_column(RISING), 4)
        assert outcomes.count(Verdict.PRAGMATICS_LIMITED) >= 9

    def test_adequate(self):
        model = BpsSpeaker(base=base_from_row([0.25] * 4), tom=tom_from_column(RISING))
        outcomes = verdicts(model, game_from_column(RISING), 32)
        assert outcomes.count(Verdict.ADEQUATE) >= 9

    def test_inference_limited(self):
        model = BpsSpeaker(
            base=base_from_row([0.97, 0.01, 0.01, 0.01]),
            tom=tom_from_reward(RewardTable(values=[0.0, 0.0, 0.0, 10.0])),
        )
        outcomes = verdicts(model, game_from_column([0.1, 0.1, 0.1, 0.9]), 2)
        assert outcomes.count(Verdict.INFERENCE_LIMITED) >= 9

    @pytest.mark.parametrize(
        "base, column, expected",
        [
            ([0.25] * 4, RISING, Verdict.ADEQUATE),
            ([0.25] * 4, RISING[::-1], Verdict.PRAGMATICS_LIMITED),
            ([0.5, 0.25, 0.25, 0.0], RISING, Verdict.SEARCH_LIMITED),
        ],
    )
    def test_exact_answering(self, base, column, expected):
        model = BpsSpeaker(base=base_from_row(base), tom=tom_from_column(column))
        report = diagnose(model, game_from_column(RISING), 8, 2_000, answering=Answering.EXACT)
        assert report.verdict == expected
        assert report.answering == "exact"
        assert report.inference_gap == 0.0

    def test_exact_model_is_adequate_at_the_default_n(self):
        model = BpsSpeaker(base=base_from_row([0.25] * 4), tom=tom_from_column(RISING))
        outcomes = verdicts(model, game_from_column(RISING), 8, answering=Answering.EXACT)
        assert outcomes == [Verdict.ADEQUATE] * 10

    def test_pragmatic_gap_is_the_paired_estimate(self):
        model = BpsSpeaker(base=base_from_row([0.25] * 4), tom=tom_from_column(RISING[::-1]))
        g = game_from_column(RISING)
        report = diagnose(model, g, 4, 500, seed=2)
        ranking = model.tom.log_likelihood(0, 0)
        gap, stderr = capability_gap_estimate(model.base.row(0, 0), g, 4, 500, seed=2, ranking=ranking)
        assert report.pragmatic_gap == pytest.approx(gap, abs=1e-12)
        assert report.pragmatic_gap_stderr == stderr
        assert report.answering == "best-of-n"

    def test_report_is_consistent(self):
        model = BpsSpeaker(base=base_from_row([0.25] * 4), tom=tom_from_column(RISING[::-1]))
        report = diagnose(model, game_from_column(RISING), 4, 500, seed=2)
        assert report.pragmatic_gap == report.oracle_pragmatic_score - report.model_score
        assert report.pragmatic_gap >= 0
        assert 0.0 <= report.model_success_rate <= 1.0
        assert report.metric == Metric.EXPECTED_LISTENER.value
        assert (report.trials, report.n, report.seed) == (500, 4, 2)

    def test_deterministic(self):
        model = BpsSpeaker(base=base_from_row([0.4, 0.3, 0.2, 0.1]), tom=tom_from_column(RISING))
        g = game_from_column(RISING)
        assert diagnose(model, g, 4, 300, seed=5) == diagnose(model, g, 4, 300, seed=5)

    @pytest.mark.parametrize("n, trials, epsilon", [(0, 10, 0.02), (2, 0, 0.02), (2, 10, -0.1)])
    def test_rejects_bad_parameters(self, n, trials, epsilon):
        model = BpsSpeaker(base=base_from_row([0.5, 0.5]), tom=tom_from_column([0.5, 0.5]))
        with pytest.raises(InvalidParameter):
            diagnose(model, game_from_column([0.5, 0.5]), n, trials, epsilon=epsilon)
