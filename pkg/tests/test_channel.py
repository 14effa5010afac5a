import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wtbound.channel import (ConstantChannel, QuadratureError, RayleighChannel, ln_V, rayleigh_mellin,
                             rayleigh_mellin_closed_form, sample_capacity)

S_GRID = (0.001, 0.01, 0.1, 0.5)


class TestRayleighTransform:
    @pytest.mark.parametrize("g", [0.1, 1.0, 10 ** 0.5, 10.0, 1e3, 1e6])
    @pytest.mark.parametrize("a", [1e-4, 0.3, 0.999, 1.0, 2.5, 14.4, 49.0])
    def test_closed_form_identity(self, a, g):
        val, _ = rayleigh_mellin(a, g)
        assert val == pytest.approx(rayleigh_mellin_closed_form(a, g), rel=1e-8)

    @given(st.floats(1e-3, 50), st.floats(0.05, 1e4))
    def test_closed_form_identity_random(self, a, g):
        val, _ = rayleigh_mellin(a, g)
        assert val == pytest.approx(rayleigh_mellin_closed_form(a, g), rel=1e-8)

    def test_diagnostics_name_the_route(self):
        _, diag = rayleigh_mellin(0.5, 3.0)
        assert diag["method"] in ("laguerre_y", "laguerre_z", "quad_log")

    def test_nonpositive_exponent(self):
        with pytest.raises(ValueError):
            rayleigh_mellin(0.0, 1.0)

    def test_error_type_carries_diagnostics(self):
        e = QuadratureError("x", laguerre=[1])
        assert isinstance(e, ArithmeticError) and e.diagnostics == {"laguerre": [1]}


class TestLnV:
    def test_argument_check(self, ch5):
        with pytest.raises(ValueError):
            ch5.ln_V(0.0)
        with pytest.raises(ValueError):
            ConstantChannel(3).ln_V(-1)

    def test_constant_channel(self):
        assert ln_V(ConstantChannel(30), 0.2) == pytest.approx(-6.0)

    def test_negative_everywhere(self, ch5):
        for s in np.geomspace(1e-5, ch5.s_max, 40):
            assert ch5.ln_V(s) < 0

    @pytest.mark.parametrize("db", [-5.0, 5.0, 20.0])
    def test_decreasing_and_convex(self, db):
        ch = RayleighChannel.from_db(db)
        s = np.linspace(1e-3, ch.s_max, 200)
        f = np.array([ch.ln_V(x) for x in s])
        assert np.all(np.diff(f) < 0)
        assert np.all(f[:-2] + f[2:] - 2 * f[1:-1] >= -1e-10 * np.abs(f[1:-1]))

    def test_mean_capacity_is_slope_at_zero(self, ch5):
        h = 1e-7
        slope = -(ch5.ln_V(2 * h) - ch5.ln_V(h)) / h
        assert slope == pytest.approx(ch5.mean_capacity(), rel=1e-5)

    def test_mean_capacity_value(self, ch5):
        assert 33.5 <= ch5.mean_capacity() <= 35.5

    @pytest.mark.parametrize("s", S_GRID)
    def test_monte_carlo_oracle(self, ch5, s):
        rng = np.random.default_rng(2024)
        n, chunk = 10 ** 7, 10 ** 6
        acc = acc2 = 0.0
        for _ in range(n // chunk):
            e = np.exp(-s * ch5.sample(rng, chunk))
            acc += e.sum()
            acc2 += (e * e).sum()
        mean = acc / n
        se = math.sqrt(max(acc2 / n - mean ** 2, 0.0) / n)
        assert abs(math.exp(ch5.ln_V(s)) - mean) <= 3 * se


class TestSampling:
    def test_constant(self):
        rng = np.random.default_rng(0)
        assert sample_capacity(ConstantChannel(30), rng) == 30
        assert np.all(ConstantChannel(30).sample(rng, (3, 2)) == 30)

    def test_zero_gain_gives_zero(self, ch5):
        assert ch5.capacity_from_gain(0.0) == 0.0

    def test_sample_mean(self, ch5):
        x = ch5.sample(np.random.default_rng(1), 10 ** 6)
        assert x.min() >= 0
        assert 33.5 <= x.mean() <= 35.5

    def test_validation(self):
        with pytest.raises(ValueError):
            RayleighChannel(0.0, 20)
        with pytest.raises(ValueError):
            RayleighChannel(1.0, 0)
        with pytest.raises(ValueError):
            ConstantChannel(-1)

    def test_db_round_trip(self):
        ch = RayleighChannel.from_db(7.5)
        assert ch.snr_db == pytest.approx(7.5)
        assert ch.symbols_per_slot == pytest.approx(20.0)
        assert ch.with_snr_db(3.0).snr_db == pytest.approx(3.0)
