import numpy as np
import pytest
from structlog.testing import capture_logs

from bpslab.exceptions import InvalidParameter, ValidationError
from bpslab.services.core import normalize, total_variation, ups_distribution
from bpslab.services.preferences import (
    PreferenceDatum,
    fit_reward_from_preferences,
    preference_counts,
    sample_preferences,
)
from bpslab.services.speakers import tom_from_reward
from bpslab.utils.rng import make_rng


def win_rate(data, a):
    pairs = [d for d in data if a in (d.a, d.b)]
    return np.mean([d.winner == a for d in pairs])


class TestSampling:
    def test_no_pairs(self, make_game):
        assert sample_preferences(make_game([0.3, 0.7]), 0, make_rng(0)) == []

    def test_equal_listener_is_a_coin_flip(self, make_game):
        data = sample_preferences(make_game([0.4, 0.4]), 10_000, make_rng(1))
        assert win_rate(data, 0) == pytest.approx(0.5, abs=0.02)

    def test_rate_follows_listener_ratio(self, make_game):
        data = sample_preferences(make_game([0.9, 0.1]), 10_000, make_rng(2))
        assert win_rate(data, 0) == pytest.approx(0.9, abs=0.02)

    def test_pairs_are_distinct(self, make_game):
        data = sample_preferences(make_game([0.1, 0.2, 0.3, 0.4]), 5_000, make_rng(3))
        assert all(d.a != d.b for d in data)
        assert {d.a for d in data} == {0, 1, 2, 3}

    def test_deterministic(self, make_game):
        g = make_game([0.1, 0.5, 0.9])
        assert sample_preferences(g, 100, make_rng(4)) == sample_preferences(g, 100, make_rng(4))

    def test_needs_two_utterances(self, make_game):
        with pytest.raises(InvalidParameter):
            sample_preferences(make_game([1.0]), 10, make_rng(0))

    def test_datum_validation(self):
        with pytest.raises(ValidationError):
            PreferenceDatum(a=1, b=1, winner=1)
        with pytest.raises(ValidationError):
            PreferenceDatum(a=0, b=1, winner=2)

    def test_counts(self):
        data = [PreferenceDatum(0, 1, 0), PreferenceDatum(1, 0, 0), PreferenceDatum(2, 1, 1)]
        np.testing.assert_array_equal(preference_counts(data, 3), [[0, 2, 0], [0, 0, 1], [0, 0, 0]])


class TestBradleyTerry:
    def test_no_data(self):
        np.testing.assert_allclose(fit_reward_from_preferences([], 3).values, [0.0, 0.0, 0.0], atol=1e-9)

    def test_balanced_data(self):
        data = [PreferenceDatum(0, 1, 0)] * 50 + [PreferenceDatum(0, 1, 1)] * 50
        np.testing.assert_allclose(fit_reward_from_preferences(data, 2).values, [0.0, 0.0], atol=1e-6)

    def test_recovers_log_listener_gap(self, make_game):
        g = make_game([np.e / (1 + np.e), 1 / (1 + np.e)])
        data = sample_preferences(g, 100_000, make_rng(5))
        fitted = fit_reward_from_preferences(data, 2)
        assert fitted.values[0] - fitted.values[1] == pytest.approx(1.0, abs=0.05)
        tom = normalize(tom_from_reward(fitted).likelihood(0, 0))
        assert total_variation(tom, ups_distribution(g)) <= 0.02

    def test_unanimous_data_stays_finite(self):
        fitted = fit_reward_from_preferences([PreferenceDatum(0, 1, 0)] * 100, 2)
        gap = fitted.values[0] - fitted.values[1]
        assert np.isfinite(gap) and gap > 3

    def test_gauge_fixes_last_reward(self, make_game):
        data = sample_preferences(make_game([0.2, 0.5, 0.8]), 2_000, make_rng(6))
        assert fit_reward_from_preferences(data, 3).values[-1] == 0.0

    def test_relabeling_permutes_rewards(self, make_game):
        data = sample_preferences(make_game([0.2, 0.5, 0.8, 0.35]), 400, make_rng(7))
        perm = np.array([2, 0, 3, 1])
        relabeled = [PreferenceDatum(int(perm[d.a]), int(perm[d.b]), int(perm[d.winner])) for d in data]
        plain = fit_reward_from_preferences(data, 4).values
        permuted = fit_reward_from_preferences(relabeled, 4).values[perm]
        np.testing.assert_allclose(plain - plain[0], permuted - permuted[0], atol=1e-4)

    def test_warns_about_uncompared_utterances(self):
        with capture_logs() as logs:
            fit_reward_from_preferences([PreferenceDatum(0, 1, 0)], 3)
        warnings = [entry for entry in logs if entry["log_level"] == "warning"]
        assert warnings and warnings[0]["utterances"] == [2]

    def test_rejects_non_positive_regularization(self):
        with pytest.raises(InvalidParameter):
            fit_reward_from_preferences([], 2, reg=0.0)
