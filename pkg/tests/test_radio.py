import math

import numpy as np
import pytest

from cflsim.radio import (CostLedger, RadioProfile, channel_gain, comm_energy,
                          comm_time, comp_energy, comp_time,
                          edge_round_latency, system_round_totals,
                          transmission_rate)


def profile(**kw):
    defaults = dict(distance_m=20.0, tx_power_w=0.1, cpu_hz=1e9)
    defaults.update(kw)
    return RadioProfile(**defaults)


class TestChannelGain:
    def test_reference_distance_leaves_only_reference_gain(self):
        # d == d0 cancels the distance term
        got = channel_gain(profile(distance_m=2.0))
        assert got == pytest.approx(10.0 ** -3.5, rel=1e-12)

    def test_twenty_meters(self):
        got = channel_gain(profile(distance_m=20.0))
        assert got == pytest.approx(10.0 ** -3.5 * (2.0 / 20.0) ** 4, rel=1e-12)
        assert got == pytest.approx(3.1623e-8, rel=1e-4)

    def test_deterministic_without_fading(self):
        p = profile(distance_m=57.0)
        assert channel_gain(p) == channel_gain(p)

    def test_fading_scales_gain(self):
        p = profile(distance_m=20.0)
        assert channel_gain(p, fading=2.0) == pytest.approx(2 * channel_gain(p))

    def test_bad_distance_rejected(self):
        with pytest.raises(ValueError):
            RadioProfile(distance_m=0.0, tx_power_w=0.1, cpu_hz=1e9)


class TestTransmissionRate:
    def test_unit_snr_gives_bandwidth(self):
        # log2(1 + 1) = 1
        assert transmission_rate(1.0, 1e6, 1e-8, 1.0, 1e-8) == pytest.approx(1e6)

    def test_linear_in_beta(self):
        full = transmission_rate(1.0, 1e6, 1e-8, 1.0, 1e-8)
        assert transmission_rate(0.5, 1e6, 1e-8, 1.0, 1e-8) == pytest.approx(full / 2)

    def test_low_snr_instance(self):
        got = transmission_rate(1.0, 1e6, 3.1623e-8, 0.1, 1e-8)
        want = 1e6 * math.log2(1.0 + 3.1623e-8 * 0.1 / 1e-8)
        assert got == pytest.approx(want, rel=1e-12)
        assert got == pytest.approx(3.96412e5, rel=1e-4)

    def test_beta_bounds(self):
        with pytest.raises(ValueError):
            transmission_rate(0.0, 1e6, 1e-8, 1.0, 1e-8)
        with pytest.raises(ValueError):
            transmission_rate(1.5, 1e6, 1e-8, 1.0, 1e-8)


class TestComputeCosts:
    def test_comp_time_instance(self):
        assert comp_time(10, 1000, 20, 1e9) == pytest.approx(2e-4, rel=1e-12)

    def test_comp_time_unit_case(self):
        assert comp_time(1, 1, 1, 1.0) == 1.0

    def test_comp_time_halves_with_double_frequency(self):
        assert comp_time(3, 100, 20, 2e9) == pytest.approx(
            comp_time(3, 100, 20, 1e9) / 2)

    def test_comp_energy_instance(self):
        got = comp_energy(2e-28, 1e9, 10, 1000, 20)
        assert got == pytest.approx(2e-5, rel=1e-12)

    def test_energy_forms_agree(self):
        # (a/2) f^3 t_cmp == (a/2) L f^2 D B
        rng = np.random.default_rng(0)
        for _ in range(100):
            a = rng.uniform(1e-29, 1e-27)
            f = rng.uniform(1e9, 9e9)
            epochs = int(rng.integers(1, 20))
            d = int(rng.integers(1, 5000))
            b = rng.uniform(1, 50)
            via_time = 0.5 * a * f ** 3 * comp_time(epochs, d, b, f)
            assert comp_energy(a, f, epochs, d, b) == pytest.approx(
                via_time, rel=1e-12)

    def test_zero_capacitance(self):
        assert comp_energy(0.0, 1e9, 10, 1000, 20) == 0.0


class TestCommCosts:
    def test_division(self):
        assert comm_time(1e6, 5e5) == pytest.approx(2.0)

    def test_zero_bits(self):
        assert comm_time(0.0, 5e5) == 0.0

    def test_serialized_logreg_size(self):
        # 210 parameters at 32 bits each
        z = 210 * 32
        rate = 1e6 * math.log2(1.0 + 3.1623e-8 * 0.1 / 1e-8)
        assert comm_time(z, rate) == pytest.approx(z / rate, rel=1e-12)
        assert comm_time(z, 3.9658e5) == pytest.approx(0.016945, rel=1e-4)

    def test_unreachable(self):
        with pytest.raises(ValueError):
            comm_time(100.0, 0.0)

    def test_energy(self):
        assert comm_energy(2.0, 0.1) == pytest.approx(0.2)
        assert comm_energy(0.0, 0.1) == 0.0

    def test_energy_equals_bits_power_over_rate(self):
        z, p, r = 6720.0, 0.05, 3.9658e5
        assert comm_energy(comm_time(z, r), p) == pytest.approx(
            z * p / r, rel=1e-15)


class TestLedger:
    def test_totals(self):
        ledger = CostLedger(t_cmp=1.0, t_com=2.5, e_cmp=0.1, e_com=0.4)
        assert ledger.t_total == 3.5
        assert ledger.e_total == 0.5

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            CostLedger(t_cmp=-1.0, t_com=0.0, e_cmp=0.0, e_com=0.0)


class TestRoundReductions:
    def test_latency_is_max(self):
        ledgers = {i: CostLedger(t, 0.0, 0.0, 0.0)
                   for i, t in enumerate([1.0, 2.5, 0.3])}
        assert edge_round_latency(ledgers) == 2.5

    def test_singleton(self):
        assert edge_round_latency({7: CostLedger(0.0, 1.25, 0.0, 0.0)}) == 1.25

    def test_matches_brute_force(self, rng):
        ledgers = {i: CostLedger(rng.uniform(0, 5), rng.uniform(0, 5),
                                 rng.uniform(0, 1), rng.uniform(0, 1))
                   for i in range(10)}
        assert edge_round_latency(ledgers) == max(
            v.t_cmp + v.t_com for v in ledgers.values())

    def test_empty_selection_rejected(self):
        with pytest.raises(ValueError):
            edge_round_latency({})

    def test_totals_without_uploads(self):
        t, e = system_round_totals(
            {0: 1.0, 1: 3.0}, {0: 2.0, 1: 5.0},
            {0: 10.0, 1: 10.0}, {0: 4.0, 1: 4.0},
            {0: False, 1: False})
        assert t == 3.0
        assert e == 7.0

    def test_single_edge_upload(self):
        t, e = system_round_totals({0: 2.0}, {0: 1.0}, {0: 0.5}, {0: 0.25},
                                   {0: True})
        assert t == 2.5
        assert e == 1.25

    def test_three_edges_match_brute_force(self, rng):
        lat = {k: rng.uniform(0, 10) for k in range(3)}
        en = {k: rng.uniform(0, 10) for k in range(3)}
        ct = {k: rng.uniform(0, 2) for k in range(3)}
        ce = {k: rng.uniform(0, 2) for k in range(3)}
        up = {k: bool(rng.integers(0, 2)) for k in range(3)}
        t, e = system_round_totals(lat, en, ct, ce, up)
        assert t == max(lat[k] + (ct[k] if up[k] else 0.0) for k in range(3))
        assert e == sum(en[k] + (ce[k] if up[k] else 0.0) for k in range(3))
