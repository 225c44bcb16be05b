import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dcrab import pulses as pl


def make_pulse(values, duration=1.0):
    values = np.asarray(values, dtype=float)
    return pl.Pulse(pl.TimeGrid(duration, len(values)), values)


class TestTimeGrid:
    def test_endpoints_and_spacing(self):
        grid = pl.TimeGrid(2.0, 5)
        t = grid.times()
        assert t[0] == 0.0
        assert t[-1] == 2.0
        assert np.allclose(np.diff(t), grid.dt)
        assert np.all(np.diff(t) > 0)

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            pl.TimeGrid(0.0, 10)
        with pytest.raises(ValueError):
            pl.TimeGrid(-1.0, 10)
        with pytest.raises(ValueError):
            pl.TimeGrid(1.0, 1)


class TestSampleBasis:
    def test_first_pair_around_first_harmonic(self):
        grid = pl.TimeGrid(1.0, 50)
        for seed in range(20):
            basis = pl.sample_basis(2, grid, omega_max=100.0, seed=seed)
            for spec in basis.functions:
                assert math.pi < spec.omega < 3 * math.pi

    def test_deterministic_given_seed(self):
        grid = pl.TimeGrid(1.0, 50)
        a = pl.sample_basis(4, grid, omega_max=40.0, seed=7)
        b = pl.sample_basis(4, grid, omega_max=40.0, seed=7)
        assert a == b

    def test_frequencies_clipped_to_omega_max(self):
        grid = pl.TimeGrid(1.0, 50)
        omega_max = 10 * 2 * math.pi
        basis = pl.sample_basis(6, grid, omega_max=omega_max, seed=3)
        assert all(0 < f.omega <= omega_max for f in basis.functions)

    def test_alternates_cosine_sine(self):
        grid = pl.TimeGrid(1.0, 50)
        basis = pl.sample_basis(4, grid, omega_max=50.0, seed=0)
        assert [f.kind for f in basis.functions] == ["cos", "sin", "cos", "sin"]

    def test_rejects_degenerate_basis(self):
        grid = pl.TimeGrid(1.0, 50)
        # every candidate frequency would clip to the same tiny value
        with pytest.raises(ValueError):
            pl.sample_basis(4, grid, omega_max=1e-6, seed=0)

    def test_json_round_trip(self):
        grid = pl.TimeGrid(1.0, 50)
        basis = pl.sample_basis(4, grid, omega_max=50.0, seed=11)
        assert pl.BasisSet.from_json(basis.to_json()) == basis


class TestAssemblePulse:
    def setup_method(self):
        self.grid = pl.TimeGrid(1.0, 101)
        self.guess = pl.Pulse(self.grid, np.full(101, 2.0))
        self.basis = pl.sample_basis(2, self.grid, omega_max=50.0, seed=5)

    def test_zero_coefficients_multiplicative_is_identity(self):
        out = pl.assemble_pulse(
            self.guess, self.basis, pl.CrabCoefficients([0.0, 0.0]), "multiplicative"
        )
        np.testing.assert_array_equal(out.values, self.guess.values)

    def test_dressed_identity(self):
        previous = make_pulse(np.sin(np.linspace(0, 3, 101)))
        out = pl.assemble_pulse(
            self.guess,
            self.basis,
            pl.CrabCoefficients([0.0, 0.0], c0=1.0),
            "dressed",
            previous=previous,
        )
        np.testing.assert_array_equal(out.values, previous.values)

    def test_single_cosine_flat_envelope_pointwise(self):
        guess = pl.Pulse(self.grid, np.ones(101))
        omega = 7.0
        basis = pl.BasisSet(
            functions=(pl.BasisFunctionSpec("cos", omega, "flat"),),
            omega_max=50.0,
            seed=0,
        )
        a = 0.37
        out = pl.assemble_pulse(guess, basis, pl.CrabCoefficients([a]), "multiplicative")
        t = self.grid.times()
        np.testing.assert_allclose(out.values, 1 + a * np.cos(omega * t), atol=1e-12)

    def test_additive_mode_on_zero_guess(self):
        guess = pl.Pulse(self.grid, np.zeros(101))
        out = pl.assemble_pulse(guess, self.basis, pl.CrabCoefficients([1.0, 1.0]), "additive")
        assert np.max(np.abs(out.values)) > 0

    @pytest.mark.parametrize("envelope", ["sine", "blackman"])
    def test_endpoint_pinning(self, envelope):
        basis = pl.sample_basis(4, self.grid, omega_max=50.0, envelope=envelope, seed=2)
        out = pl.assemble_pulse(
            self.guess, basis, pl.CrabCoefficients([0.3, -0.2, 0.1, 0.4]), "multiplicative"
        )
        assert abs(out.values[0] - self.guess.values[0]) < 1e-12
        assert abs(out.values[-1] - self.guess.values[-1]) < 1e-12

    def test_grid_mismatch_rejected(self):
        previous = pl.Pulse(pl.TimeGrid(1.0, 51), np.ones(51))
        with pytest.raises(pl.GridMismatchError):
            pl.assemble_pulse(
                self.guess,
                self.basis,
                pl.CrabCoefficients([0.0, 0.0], c0=1.0),
                "dressed",
                previous=previous,
            )

    def test_coefficient_count_mismatch_rejected(self):
        with pytest.raises(ValueError):
            pl.assemble_pulse(self.guess, self.basis, pl.CrabCoefficients([0.0]), "multiplicative")


class TestHardWall:
    def test_definition(self):
        out = pl.clip_hard_wall(make_pulse([0.5, -2.0, 1.0]), 1.0)
        np.testing.assert_array_equal(out.values, [0.5, -1.0, 1.0])

    def test_within_bound_unchanged(self):
        p = make_pulse([0.1, -0.2, 0.3])
        np.testing.assert_array_equal(pl.clip_hard_wall(p, 1.0).values, p.values)

    def test_constant_overshoot(self):
        out = pl.clip_hard_wall(make_pulse([3.0, 3.0, 3.0]), 1.0)
        np.testing.assert_array_equal(out.values, [1.0, 1.0, 1.0])

    @given(st.lists(st.floats(-100, 100), min_size=2, max_size=30),
           st.floats(0.01, 10))
    @settings(max_examples=50, deadline=None)
    def test_idempotent_and_bounded(self, values, f_max):
        once = pl.clip_hard_wall(make_pulse(values), f_max)
        twice = pl.clip_hard_wall(once, f_max)
        assert np.max(np.abs(once.values)) <= f_max
        np.testing.assert_array_equal(once.values, twice.values)


class TestRescale:
    def test_halving(self):
        p = make_pulse([2.0, -1.0, 0.5])
        out = pl.rescale_to_bound(p, 1.0)
        np.testing.assert_allclose(out.values, [1.0, -0.5, 0.25])

    def test_within_bound_unchanged(self):
        p = make_pulse([0.2, -0.4])
        np.testing.assert_array_equal(pl.rescale_to_bound(p, 1.0).values, p.values)

    def test_spectrum_support_preserved(self):
        t = np.linspace(0, 1, 256)
        p = make_pulse(3.0 * np.cos(2 * np.pi * 5 * t) + 1.5 * np.sin(2 * np.pi * 11 * t))
        _, before = pl.pulse_psd(p)
        _, after = pl.pulse_psd(pl.rescale_to_bound(p, 1.0))
        thresh = 1e-10 * max(before.max(), 1.0)
        np.testing.assert_array_equal(before > thresh, after > thresh)

    @given(st.lists(st.floats(-50, 50), min_size=2, max_size=30).filter(
        lambda v: max(abs(x) for x in v) > 0))
    @settings(max_examples=50, deadline=None)
    def test_idempotent(self, values):
        once = pl.rescale_to_bound(make_pulse(values), 1.0)
        twice = pl.rescale_to_bound(once, 1.0)
        np.testing.assert_allclose(once.values, twice.values, atol=1e-15)

    @given(st.lists(st.floats(0.1, 5), min_size=2, max_size=10)
           .filter(lambda v: max(abs(x) for x in v) >= 1.0),
           st.floats(1.0, 3))
    @settings(max_examples=30, deadline=None)
    def test_scaling_beyond_bound_is_absorbed(self, values, scale):
        # once the bound engages, the result is independent of positive scaling
        p = make_pulse(values)
        a = pl.rescale_to_bound(make_pulse(np.array(values) * scale), 1.0)
        b = pl.rescale_to_bound(p, 1.0)
        np.testing.assert_allclose(a.values, b.values, rtol=1e-12, atol=1e-15)


class TestPowerAndSpectrum:
    def test_constant_power(self):
        assert pl.pulse_power(make_pulse([2.5] * 10)) == pytest.approx(6.25)

    def test_sine_power(self):
        t = np.linspace(0, 1, 1001)
        p = make_pulse(np.sin(2 * np.pi * t))
        assert pl.pulse_power(p) == pytest.approx(0.5, abs=1e-6)

    def test_zero_pulse(self):
        p = make_pulse(np.zeros(64))
        assert pl.pulse_power(p) == 0.0
        _, psd = pl.pulse_psd(p)
        assert np.all(psd == 0)

    def test_psd_axis_in_rad_per_time(self):
        p = make_pulse(np.zeros(100), duration=2.0)
        omegas, _ = pl.pulse_psd(p)
        assert omegas[0] == 0.0
        assert omegas[1] == pytest.approx(2 * np.pi / 2.0 * 100 / 100, rel=0.05)


class TestPulseCsv:
    def test_round_trip_exact(self, tmp_path):
        t = np.linspace(0, 3, 37)
        p = pl.Pulse(pl.TimeGrid(3.0, 37), np.sin(t) * 1.2345678901234567)
        path = tmp_path / "p.csv"
        pl.write_pulse_csv(p, path)
        back = pl.read_pulse_csv(path)
        assert back.grid == p.grid
        np.testing.assert_array_equal(back.values, p.values)

    def test_header_and_line_endings(self, tmp_path):
        p = make_pulse([1.0, 2.0])
        text = pl.pulse_to_csv(p)
        assert text.startswith("time,value\n")
        assert "\r" not in text
