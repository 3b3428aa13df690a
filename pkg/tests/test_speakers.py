import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bpslab.exceptions import AllZeroWeights, UndefinedCounterfactual, ValidationError
from bpslab.models.game import Conditional, Space, SpaceKind
from bpslab.services.core import argmax_lowest, normalize, ups_distribution
from bpslab.services.speakers import (
    BpsSpeaker,
    RewardTable,
    bps_distribution,
    strictly_positive,
    tom_from_reward,
    trivial_bps_from_lm,
)
from tests.helpers import base_from_row, game_from_column, tom_from_column, utterance_space


def lm_table(rows):
    rows = np.asarray(rows, dtype=float)
    intentions = Space(kind=SpaceKind.INTENTION, symbols=tuple(f"z{i}" for i in range(rows.shape[0])))
    return Conditional(
        sources=(Space.single_context(), intentions),
        target=utterance_space(rows.shape[1]),
        table=rows[np.newaxis],
        name="lm",
    )


class TestBps:
    def test_uniform_base_follows_listener(self, make_base, make_tom):
        speaker = BpsSpeaker(base=make_base([0.5, 0.5]), tom=make_tom([0.8, 0.2]))
        np.testing.assert_allclose(bps_distribution(speaker, 0, 0), [0.8, 0.2], atol=1e-12)

    def test_flat_listener_follows_base(self, make_base, make_tom):
        speaker = BpsSpeaker(base=make_base([0.9, 0.1]), tom=make_tom([0.5, 0.5]))
        np.testing.assert_allclose(bps_distribution(speaker, 0, 0), [0.9, 0.1], atol=1e-12)

    def test_product(self, make_base, make_tom):
        speaker = BpsSpeaker(base=make_base([0.6, 0.4]), tom=make_tom([0.2, 0.8]))
        np.testing.assert_allclose(bps_distribution(speaker, 0, 0), [3 / 11, 8 / 11], atol=1e-12)

    def test_disjoint_support(self, make_base, make_tom):
        speaker = BpsSpeaker(base=make_base([1.0, 0.0]), tom=make_tom([0.0, 1.0]))
        with pytest.raises(AllZeroWeights):
            bps_distribution(speaker, 0, 0)

    def test_support_stays_inside_base(self, make_base, make_tom):
        speaker = BpsSpeaker(base=make_base([0.5, 0.0, 0.5]), tom=make_tom([0.1, 0.9, 0.3]))
        assert bps_distribution(speaker, 0, 0)[1] == 0.0

    def test_uniform_base_with_real_listener_is_ups(self):
        column = [0.1, 0.6, 0.3, 0.9]
        speaker = BpsSpeaker(base=base_from_row([0.25] * 4), tom=tom_from_column(column))
        expected = ups_distribution(game_from_column(column))
        np.testing.assert_allclose(bps_distribution(speaker, 0, 0), expected, atol=1e-12)

    def test_mismatched_spaces(self, make_base, make_tom):
        with pytest.raises(ValidationError):
            BpsSpeaker(base=make_base([0.5, 0.5]), tom=make_tom([0.2, 0.3, 0.5]))

    def test_strictly_positive(self, make_base):
        assert strictly_positive(make_base([0.5, 0.5]))
        assert not strictly_positive(make_base([1.0, 0.0]))


class TestRewardListener:
    def test_zero_reward_is_uniform(self):
        np.testing.assert_allclose(tom_from_reward(RewardTable(values=[0.0, 0.0])).likelihood(0, 0), [0.5, 0.5])

    def test_log_two_gap(self):
        tom = tom_from_reward(RewardTable(values=[np.log(2.0), 0.0], beta=1.0))
        np.testing.assert_allclose(tom.likelihood(0, 0), [2 / 3, 1 / 3], atol=1e-12)

    def test_high_temperature_flattens(self):
        tom = tom_from_reward(RewardTable(values=[5.0, 1.0], beta=1e6))
        np.testing.assert_allclose(tom.likelihood(0, 0), [0.5, 0.5], atol=1e-5)

    def test_large_rewards_do_not_overflow(self):
        tom = tom_from_reward(RewardTable(values=[1000.0, 999.0]))
        assert np.all(np.isfinite(tom.likelihood(0, 0)))

    @settings(deadline=None)
    @given(
        st.lists(st.floats(min_value=-20, max_value=20), min_size=2, max_size=6),
        st.floats(min_value=-50, max_value=50),
    )
    def test_shift_invariant(self, values, shift):
        plain = tom_from_reward(RewardTable(values=values)).likelihood(0, 0)
        shifted = tom_from_reward(RewardTable(values=np.array(values) + shift)).likelihood(0, 0)
        np.testing.assert_allclose(plain, shifted, atol=1e-9)

    def test_counterfactual_rows_are_undefined(self):
        with pytest.raises(UndefinedCounterfactual):
            tom_from_reward(RewardTable(values=[1.0, 0.0])).as_conditional()

    def test_tabular_listener_is_its_own_conditional(self, make_tom):
        tom = make_tom([0.8, 0.2])
        assert tom.as_conditional() is tom.dist

    def test_tempered_listener_has_no_conditional(self, make_tom):
        with pytest.raises(UndefinedCounterfactual):
            make_tom([0.8, 0.2], alpha=2.0).as_conditional()

    def test_invalid_beta(self):
        with pytest.raises(ValidationError):
            RewardTable(values=[1.0, 0.0], beta=0.0)


class TestTrivialBps:
    def test_flat_lm(self):
        speaker = trivial_bps_from_lm(lm_table([[0.5, 0.5]]))
        np.testing.assert_allclose(bps_distribution(speaker, 0, 0), [0.5, 0.5])

    def test_squares(self):
        speaker = trivial_bps_from_lm(lm_table([[0.9, 0.1]]))
        np.testing.assert_allclose(bps_distribution(speaker, 0, 0), [0.81 / 0.82, 0.01 / 0.82], atol=1e-12)

    def test_argmax_agrees_with_lm(self):
        rng = np.random.default_rng(7)
        for _ in range(1_000):
            num_intentions, num_utterances = int(rng.integers(1, 6)), int(rng.integers(1, 21))
            rows = rng.dirichlet(np.ones(num_utterances), size=num_intentions)
            if rng.random() < 0.5:
                # rounding produces ties, which must resolve the same way
                rows = np.round(rows, 1) + 0.05
                rows = rows / rows.sum(axis=1, keepdims=True)
            speaker = trivial_bps_from_lm(lm_table(rows))
            for z, row in enumerate(rows):
                assert argmax_lowest(bps_distribution(speaker, z, 0)) == argmax_lowest(row)

    def test_adjacent_floats_keep_their_order(self):
        x = np.linspace(0.26, 0.33, 2_000)
        above = np.nextafter(x, 1.0)
        rest = (1.0 - x - above) / 2
        rows = np.stack([x, above, rest, rest], axis=1)
        speaker = trivial_bps_from_lm(lm_table(rows))
        for z in range(len(rows)):
            dist = bps_distribution(speaker, z, 0)
            assert dist[1] > dist[0]
            assert argmax_lowest(dist) == 1

    def test_underflowing_product_falls_back_to_logs(self):
        # both likelihood entries underflow to zero; their ratio does not
        speaker = BpsSpeaker(base=base_from_row([0.5, 0.5]), tom=tom_from_column([0.5, 0.49], alpha=2_000.0))
        ratio = np.exp(2_000 * np.log(0.49 / 0.5))
        np.testing.assert_allclose(bps_distribution(speaker, 0, 0), [1 / (1 + ratio), ratio / (1 + ratio)], rtol=1e-9)

    def test_matches_normalized_square(self):
        row = normalize([0.3, 0.1, 0.6])
        speaker = trivial_bps_from_lm(lm_table([row]))
        np.testing.assert_allclose(bps_distribution(speaker, 0, 0), normalize(row**2), atol=1e-12)
