import numpy as np
import pytest

from dcrab import diagnostics as dg

KET0 = np.array([1.0, 0.0], dtype=complex)
KET1 = np.array([0.0, 1.0], dtype=complex)


class TestQsl:
    def test_orthogonal_states(self):
        assert dg.qsl_bhattacharyya(1.0, KET0, KET1) == pytest.approx(np.pi / 2)

    def test_identical_states(self):
        assert dg.qsl_bhattacharyya(1.0, KET0, KET0) == pytest.approx(0.0)

    def test_partial_overlap(self):
        plus = (KET0 + KET1) / np.sqrt(2)
        assert dg.qsl_bhattacharyya(2.0, KET0, plus) == pytest.approx(np.pi / 8)

    def test_symmetric_in_states(self, rng):
        from tests.conftest import haar_state

        a, b = haar_state(4, rng), haar_state(4, rng)
        assert dg.qsl_bhattacharyya(1.3, a, b) == pytest.approx(
            dg.qsl_bhattacharyya(1.3, b, a)
        )

    def test_rejects_zero_variance(self):
        with pytest.raises(ValueError):
            dg.qsl_bhattacharyya(0.0, KET0, KET1)

    def test_gap_form(self):
        assert dg.qsl_gap(np.pi) == pytest.approx(1.0)
        assert dg.qsl_gap(1.0) == pytest.approx(np.pi)
        assert dg.qsl_gap(2.0) == pytest.approx(dg.qsl_gap(1.0) / 2)
        with pytest.raises(ValueError):
            dg.qsl_gap(-1.0)


class TestCapacity:
    def test_hartley_unit(self):
        assert dg.capacity("hartley", bandwidth=1.0, f_max=1.0, delta_f=1.0) == pytest.approx(1.0)

    def test_gaussian_zero_signal(self):
        assert dg.capacity("gaussian", bandwidth=2.0, signal_power=0.0, noise_power=1.0) == 0.0

    def test_colored_reduces_to_gaussian(self):
        omegas = np.linspace(0, 3.0, 2001)
        r = 4.0
        colored = dg.capacity(
            "colored",
            omegas=omegas,
            signal_psd=np.full_like(omegas, r),
            noise_psd=np.ones_like(omegas),
        )
        flat = dg.capacity("gaussian", bandwidth=3.0, signal_power=r, noise_power=1.0)
        assert colored == pytest.approx(flat, abs=1e-9)

    def test_monotone_in_bandwidth_and_snr(self):
        c1 = dg.capacity("gaussian", bandwidth=1.0, signal_power=1.0, noise_power=1.0)
        c2 = dg.capacity("gaussian", bandwidth=2.0, signal_power=1.0, noise_power=1.0)
        c3 = dg.capacity("gaussian", bandwidth=1.0, signal_power=2.0, noise_power=1.0)
        assert c2 > c1 and c3 > c1 >= 0

    def test_infinite_capacity_rejected(self):
        omegas = np.linspace(0, 1, 10)
        with pytest.raises(ValueError):
            dg.capacity(
                "colored",
                omegas=omegas,
                signal_psd=np.ones_like(omegas),
                noise_psd=np.zeros_like(omegas),
            )


class TestBounds:
    def test_error_bound_example(self):
        assert dg.error_bound(10.0, 2.0) == 0.03125

    def test_time_bound_self_consistent(self):
        cap, t = 2.0, 5.0
        info = cap * t
        eps = dg.error_bound(info, 2.0)
        assert dg.time_bound(2.0, cap, eps) == pytest.approx(t)

    def test_monotonicity(self):
        assert dg.error_bound(20.0, 2.0) < dg.error_bound(10.0, 2.0)
        assert dg.error_bound(10.0, 4.0) > dg.error_bound(10.0, 2.0)
        assert dg.time_bound(4.0, 1.0, 0.1) > dg.time_bound(2.0, 1.0, 0.1)
        assert dg.time_bound(2.0, 2.0, 0.1) < dg.time_bound(2.0, 1.0, 0.1)

    def test_state_transfer_dims(self):
        assert dg.state_transfer_dims(2) == 2
        assert dg.state_transfer_dims(4) == 6
        with pytest.raises(ValueError):
            dg.state_transfer_dims(1)


class TestErrorScalingFit:
    def test_round_trip(self):
        b1, b2 = 0.5, 1e-3
        bw = np.linspace(1.0, 12.0, 8)
        samples = list(zip(bw, np.exp(-b1 * bw) + b2))
        fit = dg.fit_error_scaling(samples)
        assert fit.b1 == pytest.approx(b1, rel=0.05)
        assert fit.b2 == pytest.approx(b2, rel=0.05)
        assert not fit.flagged

    def test_increasing_data_flagged(self):
        samples = [(1.0, 0.1), (2.0, 0.2), (3.0, 0.4), (4.0, 0.8)]
        fit = dg.fit_error_scaling(samples)
        assert fit.b1 <= 0
        assert fit.flagged

    def test_degenerate_samples_rejected(self):
        with pytest.raises(ValueError):
            dg.fit_error_scaling([(1.0, 0.5), (1.0, 0.4), (1.0, 0.3)])
        with pytest.raises(ValueError):
            dg.fit_error_scaling([(1.0, 0.5), (2.0, 0.4)])
