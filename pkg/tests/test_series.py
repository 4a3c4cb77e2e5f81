"""Series criterion, summability checks, and the oscillatory tail integral."""

import math

import mpmath as mp
import numpy as np
import pytest

from superdiff import normalizers as nz


@pytest.fixture(scope="module")
def cfg():
    return nz.NormalizerConfig()


class TestSeriesCriterion:
    def test_alpha_zero_is_harmonic(self, cfg):
        rep = nz.series_diagnostic(cfg, cfg, [0.0], n_head=2 ** 12)
        assert rep.diagnostics[0].verdict == nz.DIVERGENT

    def test_record_normalizer_brackets_one(self, cfg):
        rep = nz.series_diagnostic(cfg, cfg, [0.8, 1.2],
                                   a_function=nz.AFunction.iid_form(cfg),
                                   n_head=2 ** 16)
        by_alpha = {d.alpha: d.verdict for d in rep.diagnostics}
        assert by_alpha[0.8] == nz.DIVERGENT
        assert by_alpha[1.2] == nz.CONVERGENT
        assert rep.critical_lower is not None and rep.critical_upper is not None
        assert rep.critical_lower <= 1.0 <= rep.critical_upper

    def test_divergence_holds_at_the_critical_point(self, cfg):
        # the critical value itself belongs to the divergent set
        rep = nz.series_diagnostic(cfg, cfg, [1.0], n_head=2 ** 14)
        assert rep.diagnostics[0].verdict == nz.DIVERGENT

    def test_scaling_in_c_and_sigma(self):
        # with tail constant C and matching A-coefficient the bracket is
        # unchanged: the criterion is scale-free in C
        cfg2 = nz.NormalizerConfig(C=0.457)
        rep = nz.series_diagnostic(cfg2, cfg2, [0.8, 1.2],
                                   a_function=nz.AFunction.iid_form(cfg2),
                                   n_head=2 ** 14)
        by_alpha = {d.alpha: d.verdict for d in rep.diagnostics}
        assert by_alpha[0.8] == nz.DIVERGENT
        assert by_alpha[1.2] == nz.CONVERGENT

    def test_superfast_sequence_always_converges(self, cfg):
        seq = nz.CallableSequence(lambda n: np.asarray(n, dtype=float),
                                  name="linear")
        rep = nz.series_diagnostic(cfg, seq, [0.3, 1.0, 2.0], n_head=2 ** 12)
        assert all(d.verdict == nz.CONVERGENT for d in rep.diagnostics)

    def test_head_partials_are_monotone(self, cfg):
        rep = nz.series_diagnostic(cfg, cfg, [0.9], n_head=2 ** 12)
        ps = [p for _, p in rep.diagnostics[0].head_partials]
        assert all(b >= a for a, b in zip(ps, ps[1:]))

    def test_negative_alpha_rejected(self, cfg):
        with pytest.raises(ValueError):
            nz.series_diagnostic(cfg, cfg, [-0.5], n_head=2 ** 10)


class TestHl0:
    def test_oscillating_ell1_all_convergent(self, cfg):
        rep = nz.hl0_verify(cfg, n_max=2 ** 14)
        assert rep.verdicts() == {"growth": nz.CONVERGENT,
                                  "deep": nz.CONVERGENT,
                                  "deep_weak": nz.CONVERGENT}
        for d in rep.series.values():
            assert d.tail_estimate is not None and d.tail_estimate > d.head_sum

    def test_constant_ell1_diverges(self):
        rep = nz.hl0_verify(nz.NormalizerConfig(ell1=nz.ConstEll1(1.0)),
                            n_max=2 ** 14)
        assert rep.verdicts()["growth"] == nz.DIVERGENT

    def test_power_ell1_deep_converges(self):
        rep = nz.hl0_verify(nz.NormalizerConfig(ell1=nz.PowerLLEll1(2.0)),
                            n_max=2 ** 14)
        assert rep.verdicts()["deep"] == nz.CONVERGENT
        assert rep.verdicts()["deep_weak"] == nz.CONVERGENT

    def test_nmax_validation(self, cfg):
        with pytest.raises(ValueError):
            nz.hl0_verify(cfg, n_max=100)

    def test_deep_estimate_tracks_appendix_integral(self, cfg):
        # the deep series tail integral is (1/2) the oscillatory integrand
        # from v0 = ln(ln(n_max * ln 2)); check against quadrature built
        # from the appendix value (the tail here dwarfs the head: the
        # series converges at triple-log speed)
        from scipy.integrate import quad
        n_max = 2 ** 16
        rep = nz.hl0_verify(cfg, n_max=n_max)
        d = rep.series["deep"]
        tail_part = d.tail_estimate - d.head_sum
        v0 = math.log(math.log(n_max * math.log(2.0)))
        head_piece = quad(lambda v: v / (1 + math.exp(v) * math.sin(v) ** 2),
                          math.pi / 2, v0)[0]
        oracle = 0.5 * (nz.appendix_integral(50.0).value - head_piece)
        assert tail_part == pytest.approx(oracle, rel=0.05)


class TestAppendixIntegral:
    def test_value_against_mpmath(self):
        ours = nz.appendix_integral(25.0).value
        mp.mp.dps = 30

        def f(y):
            return y / (1 + mp.e ** y * mp.sin(y) ** 2)
        pts = [mp.pi / 2]
        k = 1
        while k * math.pi < 25.0:
            for e in (0.3, 0.01, 1e-4, 1e-6, 1e-9, 1e-12, 1e-15):
                pts.append(k * mp.pi - e)
            pts.append(k * mp.pi)
            for e in (1e-15, 1e-12, 1e-9, 1e-6, 1e-4, 0.01, 0.3):
                pts.append(k * mp.pi + e)
            k += 1
        pts.append(mp.mpf(25))
        oracle = float(mp.quad(f, pts))
        assert ours == pytest.approx(oracle, abs=1e-9)

    def test_stabilization_between_50_and_100(self):
        v50 = nz.appendix_integral(50.0).value
        v100 = nz.appendix_integral(100.0).value
        assert abs(v50 - v100) < 1e-6

    def test_tail_bound_formula(self):
        # sum over wells beyond y_max of pi (2k pi)^7 e^{-k pi} + 4/(k^2 pi^2),
        # the 1/k^2 part summed exactly via the trigamma function
        from scipy.special import polygamma
        y_max = 50.0
        k0 = int(math.floor(y_max / math.pi)) + 1
        manual = float(polygamma(1, k0)) * 4.0 / math.pi ** 2
        for k in range(k0, k0 + 2000):
            manual += math.pi * (2 * k * math.pi) ** 7 * math.exp(-k * math.pi)
        got = nz.appendix_integral(y_max).tail_bound
        assert got == pytest.approx(manual, rel=1e-2)
        assert abs(nz.appendix_integral(100.0).value
                   - nz.appendix_integral(50.0).value) < got

    def test_integrand_spikes_at_wells(self):
        # at y = k pi the sine vanishes and the integrand equals y itself
        for k in (1, 2, 5):
            y = k * math.pi
            assert nz.appendix_integrand(y) == pytest.approx(y, rel=1e-12)
        # midway between wells it is exponentially small
        assert nz.appendix_integrand(2.5 * math.pi) < 1e-2

    def test_ymax_validation(self):
        with pytest.raises(ValueError):
            nz.appendix_integral(10.0)


class TestAFunction:
    def test_forms(self, cfg):
        a_iid = nz.AFunction.iid_form(cfg)
        a_cfg = nz.AFunction.from_config(cfg)
        t = 100.0
        assert a_iid.value(t) == pytest.approx(2.0 * math.log(t), rel=1e-14)
        assert a_cfg.value(t) == pytest.approx(math.log(t), rel=1e-14)
        assert a_iid.value(1.0) == 2.0   # clamped logarithm
