import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bpslab.exceptions import (
    AllZeroWeights,
    EmptyUtteranceSpace,
    NegativeWeight,
    SupportViolation,
    ValidationError,
)
from bpslab.models.game import Conditional, Space, SpaceKind
from bpslab.services.core import (
    expected_listener_probability,
    kl_divergence,
    normalize,
    normalize_log,
    solve_exact,
    total_variation,
    ups_distribution,
)
from tests.helpers import game_from_column

weights = st.lists(st.floats(min_value=0.0, max_value=10.0), min_size=1, max_size=8).filter(
    lambda w: max(w) >= 0.1
)
# whole percentages keep distinct entries distinct after normalization
columns = st.lists(st.integers(min_value=0, max_value=100), min_size=1, max_size=8).filter(any).map(
    lambda c: [v / 100 for v in c]
)


class TestNormalize:
    def test_uniform(self):
        np.testing.assert_allclose(normalize([1, 1, 1, 1]), [0.25, 0.25, 0.25, 0.25], atol=1e-12)

    def test_single_mass(self):
        np.testing.assert_array_equal(normalize([0, 5, 0]), [0.0, 1.0, 0.0])

    def test_proportions(self):
        np.testing.assert_allclose(normalize([0.12, 0.32]), [3 / 11, 8 / 11], atol=1e-12)

    def test_all_zero(self):
        with pytest.raises(AllZeroWeights):
            normalize([0.0, 0.0])

    def test_negative(self):
        with pytest.raises(NegativeWeight):
            normalize([0.5, -0.1])

    @given(weights, st.floats(min_value=0.1, max_value=100.0))
    def test_scale_invariant(self, w, k):
        np.testing.assert_allclose(normalize(np.array(w) * k), normalize(w), atol=1e-12)

    @given(weights)
    def test_sums_to_one(self, w):
        assert abs(normalize(w).sum() - 1.0) <= 1e-12

    def test_log_domain_matches(self):
        w = np.array([0.2, 0.0, 3.0, 1.5])
        with np.errstate(divide="ignore"):
            np.testing.assert_allclose(normalize_log(np.log(w)), normalize(w), atol=1e-12)

    def test_log_domain_survives_underflow(self):
        dist = normalize_log([-1000.0, -1001.0])
        np.testing.assert_allclose(dist, [1 / (1 + np.exp(-1)), np.exp(-1) / (1 + np.exp(-1))], atol=1e-12)

    def test_log_domain_all_impossible(self):
        with pytest.raises(AllZeroWeights):
            normalize_log([-np.inf, -np.inf])


class TestSolveExact:
    def test_one_hot(self, make_game):
        g = make_game([0.0, 0.0, 1.0])
        assert solve_exact(g, g.listener_column) == 2

    def test_ties_go_to_lowest_index(self, make_game):
        g = make_game([0.5, 0.5])
        assert solve_exact(g, g.listener_column) == 0

    def test_interior_maximum(self, make_game):
        g = make_game([0.2, 0.7, 0.1])
        assert solve_exact(g, g.listener_column) == 1

    def test_empty_scores(self, make_game):
        with pytest.raises(EmptyUtteranceSpace):
            solve_exact(make_game([1.0]), [])

    def test_wrong_length(self, make_game):
        with pytest.raises(ValidationError):
            solve_exact(make_game([0.5, 0.5]), [1.0, 2.0, 3.0])


class TestUps:
    def test_equal_column(self, make_game):
        np.testing.assert_allclose(ups_distribution(make_game([0.5, 0.5])), [0.5, 0.5])

    def test_single_winner(self, make_game):
        np.testing.assert_array_equal(ups_distribution(make_game([1.0, 0.0, 0.0])), [1.0, 0.0, 0.0])

    def test_proportional(self, make_game):
        np.testing.assert_allclose(ups_distribution(make_game([0.4, 0.1, 0.0])), [0.8, 0.2, 0.0], atol=1e-12)

    def test_unwinnable_game(self, make_game):
        with pytest.raises(AllZeroWeights):
            ups_distribution(make_game([0.0, 0.0]))

    @settings(deadline=None)
    @given(columns)
    def test_argmax_matches_solve_exact(self, column):
        g = game_from_column(column)
        assert int(np.argmax(ups_distribution(g))) == solve_exact(g, g.listener_column)

    def test_expected_listener_probability(self, make_game):
        g = make_game([0.8, 0.2])
        assert expected_listener_probability(ups_distribution(g), g) == pytest.approx(0.68, abs=1e-12)


class TestDivergences:
    def test_kl_of_identical(self):
        assert kl_divergence([0.3, 0.7], [0.3, 0.7]) == pytest.approx(0.0, abs=1e-15)

    def test_kl_known_value(self):
        expected = 0.5 * np.log(0.5 / 0.75) + 0.5 * np.log(0.5 / 0.25)
        assert kl_divergence([0.5, 0.5], [0.75, 0.25]) == pytest.approx(expected, abs=1e-12)

    def test_kl_ignores_zero_mass(self):
        assert kl_divergence([1.0, 0.0], [0.5, 0.5]) == pytest.approx(np.log(2.0), abs=1e-12)

    def test_kl_infinite(self):
        with pytest.raises(SupportViolation):
            kl_divergence([0.5, 0.5], [1.0, 0.0])

    def test_total_variation(self):
        assert total_variation([1.0, 0.0], [0.25, 0.75]) == pytest.approx(0.75)


class TestTables:
    def test_row_sum_violation_names_the_row(self):
        utterances = Space.of(SpaceKind.UTTERANCE, "a", "b")
        intentions = Space.of(SpaceKind.INTENTION, "x", "y")
        table = [[[0.5, 0.5], [0.5, 0.4]]]
        with pytest.raises(ValidationError) as e:
            Conditional(sources=(Space.single_context(), utterances), target=intentions, table=table, name="listener")
        assert e.value.path == "listener[0][1]"

    def test_negative_entry(self):
        utterances = Space.of(SpaceKind.UTTERANCE, "a", "b")
        intentions = Space.of(SpaceKind.INTENTION, "x", "y")
        with pytest.raises(ValidationError) as e:
            Conditional(sources=(utterances,), target=intentions, table=[[1.5, -0.5], [0.5, 0.5]])
        assert e.value.path == "table[0][1]"

    def test_duplicate_symbols(self):
        with pytest.raises(ValidationError):
            Space.of(SpaceKind.UTTERANCE, "a", "a")

    def test_empty_space(self):
        with pytest.raises(ValidationError):
            Space.of(SpaceKind.UTTERANCE)

    def test_table_is_frozen(self):
        utterances = Space.of(SpaceKind.UTTERANCE, "a", "b")
        intentions = Space.of(SpaceKind.INTENTION, "x")
        cond = Conditional(sources=(intentions,), target=utterances, table=[[0.5, 0.5]])
        with pytest.raises(ValueError):
            cond.table[0, 0] = 1.0
