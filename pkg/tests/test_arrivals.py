import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wtbound.arrivals import (ArrivalProcess, CompositeArrival, Envelope, burst, composite_cumulative,
                              cumulative, custom, log_snr_ratio, train)

increments = st.lists(st.floats(0, 100, allow_nan=False), min_size=1, max_size=12)


class TestCumulative:
    def test_burst_total(self):
        assert cumulative(burst(25), 0, 5) == 25

    def test_empty_interval(self):
        assert cumulative(train(25, 5), 3, 3) == 0

    def test_train_window(self):
        assert cumulative(train(25, 5), 1, 4) == 75

    def test_outside_horizon_is_zero(self):
        p = train(25, 5)
        assert cumulative(p, 5, 50) == 0
        assert p.cumulative_from_start(50) == 125

    def test_reversed_interval_rejected(self):
        with pytest.raises(ValueError):
            cumulative(train(1, 3), 2, 1)

    def test_negative_slot_rejected(self):
        with pytest.raises(ValueError):
            cumulative(train(1, 3), -1, 1)

    @given(increments, st.data())
    def test_additive_split(self, inc, data):
        p = ArrivalProcess(tuple(inc))
        u = data.draw(st.integers(0, len(inc) + 2))
        v = data.draw(st.integers(u, len(inc) + 3))
        t = data.draw(st.integers(v, len(inc) + 4))
        assert cumulative(p, u, t) == pytest.approx(cumulative(p, u, v) + cumulative(p, v, t), abs=1e-9)

    @given(increments, st.data())
    def test_matches_direct_sum(self, inc, data):
        p = ArrivalProcess(tuple(inc))
        u = data.draw(st.integers(0, len(inc)))
        t = data.draw(st.integers(u, len(inc) + 3))
        assert cumulative(p, u, t) == pytest.approx(sum(inc[u:t]), abs=1e-9)


class TestLogRatio:
    def test_bit_valued(self):
        assert log_snr_ratio(burst(25), 0, 1) == 25
        assert log_snr_ratio(train(25, 5), 2, 5) == cumulative(train(25, 5), 2, 5)

    def test_zero_on_empty(self):
        assert log_snr_ratio(train(25, 5), 4, 4) == 0


class TestEnvelope:
    def test_train_declares_rate(self):
        assert train(25, 5).envelope == Envelope(0, 25)

    def test_violation_detected(self):
        with pytest.raises(ValueError):
            ArrivalProcess((10, 30), Envelope(0, 20))

    def test_burst_fits_rate_only_envelope(self):
        ArrivalProcess((20,), Envelope(0, 20))

    def test_negative_parameters(self):
        with pytest.raises(ValueError):
            Envelope(-1, 0)

    def test_negative_increment(self):
        with pytest.raises(ValueError):
            custom([1, -1])

    @given(increments)
    def test_tight_envelope_accepted(self, inc):
        # sigma = max window excess over a zero rate always fits.
        p = custom(inc, sigma=sum(inc), rho=0)
        cum = np.concatenate(([0], np.cumsum(inc)))
        for u in range(len(inc) + 1):
            for t in range(u, len(inc) + 1):
                assert cum[t] - cum[u] <= p.envelope.bits(t - u) + 1e-9


class TestComposite:
    def test_d_zero_matches_message(self):
        msg = train(25, 5)
        c = CompositeArrival(ArrivalProcess(()), msg, 0)
        for u in range(7):
            for t in range(u, 9):
                assert composite_cumulative(c, u, t) == cumulative(msg, u, t)

    def test_overhead_and_message(self):
        c = CompositeArrival.constant_overhead(train(25, 5), 2, 25)
        assert composite_cumulative(c, -2, 7) == 175

    def test_frozen_after_message(self):
        c = CompositeArrival.constant_overhead(train(25, 5), 2, 25)
        assert composite_cumulative(c, -2, 100) == 175

    def test_before_start_rejected(self):
        c = CompositeArrival.constant_overhead(train(25, 5), 2, 25)
        with pytest.raises(ValueError):
            composite_cumulative(c, -3, 0)

    def test_overhead_too_long(self):
        with pytest.raises(ValueError):
            CompositeArrival(train(1, 3), train(1, 1), 2)

    def test_flatten_layout(self):
        c = CompositeArrival.constant_overhead(burst(7), 3, 2)
        assert c.flatten().increments == (2, 2, 2, 7)
