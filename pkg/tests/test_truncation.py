"""Truncation algebra, block layouts, and the moment probes."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from superdiff import truncation as tr
from superdiff.errors import LevelTooSmall, RegimeViolation
from superdiff.normalizers import NormalizerSequence, NormalizerConfig
from superdiff.oracle import ParetoSymConfig, sample_pareto_sym
from superdiff.sources import SourceSpec


class TestUnderline:
    @pytest.mark.parametrize("j,expect", [(1, 1), (5, 4), (1024, 1024),
                                          (1023, 512), (3, 2)])
    def test_examples(self, j, expect):
        assert tr.underline(j) == expect

    @given(st.integers(min_value=1, max_value=10 ** 15))
    def test_power_of_two_floor(self, j):
        u = tr.underline(j)
        assert u <= j < 2 * u
        assert u & (u - 1) == 0

    def test_zero_rejected(self):
        with pytest.raises(ValueError):
            tr.underline(0)


class TestTruncate:
    def test_idempotent_and_infinite_identity(self):
        x = sample_pareto_sym(ParetoSymConfig(seed=1), 10 ** 4)
        w = tr.truncate(x, 8.0)
        assert np.array_equal(tr.truncate(w, 8.0), w)
        assert np.array_equal(tr.truncate(x, math.inf), x)
        assert np.all(np.abs(w) <= 8.0)

    def test_band_reassembly(self):
        # low truncation plus the band equals the high truncation, pointwise
        x = sample_pareto_sym(ParetoSymConfig(seed=2), 10 ** 4)
        lo, hi = 4.0, 64.0
        assert np.array_equal(tr.truncate(x, hi),
                              tr.truncate(x, lo) + tr.band(x, lo + 1e-12, hi))

    def test_vector_norm_truncation(self):
        x = sample_pareto_sym(ParetoSymConfig(seed=3, d=2), 10 ** 4)
        w = tr.truncate(x, 8.0)
        nrm = np.sqrt((w ** 2).sum(1))
        assert np.all(nrm <= 8.0 + 1e-12)
        # rows are kept or zeroed atomically
        zeroed = (w == 0).all(axis=1)
        kept = (w == x).all(axis=1)
        assert np.all(zeroed | kept)

    @given(st.floats(min_value=1.0, max_value=100.0),
           st.floats(min_value=1.0, max_value=100.0))
    @settings(max_examples=30, deadline=None)
    def test_band_vanishes_outside(self, a, b):
        lo, hi = min(a, b), max(a, b)
        x = sample_pareto_sym(ParetoSymConfig(seed=4), 2000)
        w = tr.band(x, lo, hi)
        nz_ = w != 0
        assert np.all(np.abs(w[nz_]) >= lo) and np.all(np.abs(w[nz_]) <= hi)


class TestBlockLayout:
    def test_hand_enumerated_level_eight(self):
        lay = tr.block_decomposition(8, 0.5, 0.25)
        assert lay.F == 16
        assert lay.gaps[0][1] == 64
        ranks = sorted(l for _, l in lay.gaps[1:])
        assert ranks == [4] * 8 + [8] * 4 + [16] * 2 + [32]
        assert lay.gap_total == 192
        assert all(l == 4 for _, l in lay.intervals)
        assert lay.gap_total + lay.interval_total == 2 ** 8
        assert lay.covers_exactly()

    def test_gap_total_closed_form(self):
        for n in range(6, 15):
            lay = tr.block_decomposition(n, 0.5, 0.25)
            b = int(math.floor(0.5 * n))
            e1 = int(math.floor(0.25 * n))
            assert lay.gap_total == 2 ** e1 * 2 ** (b - 1) * (b + 2)

    def test_level_too_small(self):
        with pytest.raises(LevelTooSmall):
            tr.block_decomposition(2, 0.5, 0.25)

    @pytest.mark.parametrize("n", range(8, 15))
    def test_exact_partition_range(self, n):
        assert tr.block_decomposition(n, 0.5, 0.25).covers_exactly()

    @given(st.integers(min_value=4, max_value=18),
           st.floats(min_value=0.05, max_value=0.9),
           st.floats(min_value=0.02, max_value=0.9))
    @settings(max_examples=120, deadline=None)
    def test_partition_property(self, n, beta, eps1):
        if not (0 < eps1 < 1 - beta):
            with pytest.raises(ValueError):
                tr.block_decomposition(n, beta, eps1)
            return
        try:
            lay = tr.block_decomposition(n, beta, eps1)
        except LevelTooSmall:
            return
        assert lay.covers_exactly()
        # gap ranks follow the dyadic rule
        e1 = int(math.floor(eps1 * n))
        for j in range(1, lay.F):
            r = (j & -j).bit_length() - 1
            assert lay.gaps[j][1] == 2 ** e1 * 2 ** r

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            tr.block_decomposition(8, 1.2, 0.1)
        with pytest.raises(ValueError):
            tr.block_decomposition(8, 0.5, 0.6)

    def test_csv_dump(self, tmp_path):
        lays = [tr.block_decomposition(n, 0.5, 0.25) for n in (8, 9)]
        path = tmp_path / "blocks.csv"
        tr.write_layout_csv(path, lays)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "n,kind,j,start,len"
        assert len(lines) == 1 + sum(2 * l.F for l in lays)


class TestFourthMoment:
    def test_single_term_closed_form(self, pareto_spec):
        # m = 1: E (W^R)^4 = R^2 - 1, so the ratio is (R^2-1)/R^2
        rep = tr.fourth_moment_ratio(pareto_spec, 21, [1],
                                     r_rule=lambda m: 16.0,
                                     shards=8, blocks_per_shard=4096,
                                     r2=10.0)
        c = rep.cells[0]
        expect = (16.0 ** 2 - 1) / 16.0 ** 2
        assert c.ratio4 == pytest.approx(expect, rel=0.1)
        assert c.shard_ok

    def test_iid_closed_form_with_gaussian_part(self, pareto_spec):
        # E|S_m|^4 = m(R^2-1) + 3 m(m-1)(2 ln R)^2 for independent terms
        m, R = 64, 64.0 ** 0.6
        rep = tr.fourth_moment_ratio(pareto_spec, 22, [m], r_rule="m^0.6",
                                     shards=8, blocks_per_shard=1024)
        closed = (m * (R ** 2 - 1) + 3 * m * (m - 1) * (2 * math.log(R)) ** 2) \
            / (m * R * R)
        assert rep.cells[0].ratio4 == pytest.approx(closed, rel=0.15)

    def test_regime_violation(self, pareto_spec):
        # m far beyond R^(2 - r1): too many terms for the cap
        with pytest.raises(RegimeViolation):
            tr.fourth_moment_ratio(pareto_spec, 1, [2 ** 16],
                                   r_rule=lambda m: 8.0, shards=2,
                                   blocks_per_shard=4)
        # R far beyond any power of m
        with pytest.raises(RegimeViolation):
            tr.fourth_moment_ratio(pareto_spec, 1, [4],
                                   r_rule=lambda m: 106.0, shards=2,
                                   blocks_per_shard=4, r2=1.0)

    def test_report_csv_schema(self, pareto_spec, tmp_path):
        rep = tr.fourth_moment_ratio(pareto_spec, 23, [16, 32],
                                     r_rule="m^0.6", shards=2,
                                     blocks_per_shard=16)
        path = tmp_path / "moments.csv"
        rep.to_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "m,R,est4,se4,ratio4,cov11,cov12,cov22,ratio2"
        assert len(lines) == 3


class TestTruncatedCov:
    def test_oracle_ratio_two(self, pareto_spec):
        cells = tr.truncated_cov(pareto_spec, 31, m=2048,
                                 r_values=[16.0, 64.0], shards=8,
                                 blocks_per_shard=96)
        for c in cells:
            ratio = float(np.mean(np.diag(c.ratio)))
            assert ratio == pytest.approx(2.0, abs=max(0.25, 4 * c.se_ratio))

    def test_gaussian_stream_no_log_growth(self):
        spec = SourceSpec.gauss()
        cells = tr.truncated_cov(spec, 32, m=2048, r_values=[8.0, 64.0],
                                 shards=4, blocks_per_shard=64)
        # variance of a standard normal sum is m, independent of the cap
        v8 = float(cells[0].cov[0, 0]) / 2048
        v64 = float(cells[1].cov[0, 0]) / 2048
        assert v8 == pytest.approx(1.0, rel=0.1)
        assert v64 == pytest.approx(v8, rel=0.02)

    def test_validation(self, pareto_spec):
        with pytest.raises(ValueError):
            tr.truncated_cov(pareto_spec, 1, m=100, r_values=[16.0])
        with pytest.raises(ValueError):
            tr.truncated_cov(pareto_spec, 1, m=2048, r_values=[2.0])


class TestBandSecondMoment:
    def test_oracle_band_ratio_two(self, pareto_spec):
        res = tr.band_second_moment(pareto_spec, 33, lo=16.0, hi=256.0,
                                    n_values=[1024, 4096], shards=8,
                                    blocks_per_shard=192)
        for r in res:
            assert r.ratio == pytest.approx(2.0, abs=max(0.3, 4 * r.se))
        # no trend in N beyond noise
        assert abs(res[0].ratio - res[1].ratio) <= 0.5

    def test_empty_band_is_zero(self, pareto_spec):
        res = tr.band_second_moment(pareto_spec, 34, lo=50.0, hi=10.0,
                                    n_values=[256], shards=2,
                                    blocks_per_shard=8)
        assert res[0].est == 0.0 and res[0].ratio == 0.0

    def test_lorentz_band_ratio_bounded_across_n(self, lorentz_spec):
        # banded second moment against N * L(hi/lo): bounded, no trend in N
        seq = NormalizerSequence(NormalizerConfig(C=0.457))
        lo, hi = seq.d(2 ** 20), seq.c(2 ** 20)
        res = tr.band_second_moment(lorentz_spec, 36, lo=lo, hi=hi,
                                    n_values=[2 ** 8, 2 ** 9, 2 ** 10],
                                    shards=4, blocks_per_shard=48)
        rats = [r.ratio for r in res]
        assert all(0 < r < 1.0 for r in rats)
        assert max(rats) <= 3.0 * min(rats)

    def test_level_band_closed_form(self, pareto_spec):
        # the dyadic-level band at level 2^10 on the unit-scale model:
        # E W~^2 = 2 ln(hi / max(lo, 1)) since the support starts at 1
        seq = NormalizerSequence(NormalizerConfig())
        lo, hi = seq.d(2 ** 10), seq.c(2 ** 10)
        res = tr.band_second_moment(pareto_spec, 35, lo=lo, hi=hi,
                                    n_values=[1024], shards=8,
                                    blocks_per_shard=256)
        from superdiff.normalizers import iterated_log
        expect = 2.0 * math.log(hi / max(lo, 1.0)) / (iterated_log(hi / lo, 1))
        assert res[0].ratio == pytest.approx(expect, rel=0.25)


class TestFirstPassage:
    def test_k_zero_empty(self, pareto_spec):
        fp = tr.first_passage_profile(pareto_spec, 41, lo=1.0, hi=100.0,
                                      K=0, eps=0.5)
        assert fp.count == 0 and fp.estimate == 0.0

    def test_huge_threshold_no_events(self, pareto_spec):
        fp = tr.first_passage_profile(pareto_spec, 42, lo=1.0, hi=32.0,
                                      K=64, eps=1.0, shards=2,
                                      paths_per_shard=64)
        # eps * hi = 32 with banded values below 32: a single value cannot
        # reach it and K is small, so counts are rare or zero
        assert fp.estimate <= 0.1

    def test_ratio_bounded_across_k(self, pareto_spec):
        seq = NormalizerSequence(NormalizerConfig())
        lvl = 2 ** 10
        lo, hi = seq.dbar(lvl), seq.c(lvl)
        ratios = []
        for K in (64, 128, 256):
            fp = tr.first_passage_profile(pareto_spec, 43, lo=lo, hi=hi,
                                          K=K, eps=0.25, shards=4,
                                          paths_per_shard=2048)
            ratios.append(fp.ratio if fp.count else fp.upper95)
        assert all(np.isfinite(r) for r in ratios)
        assert max(ratios) <= 100.0

    def test_eps_validation(self, pareto_spec):
        with pytest.raises(ValueError):
            tr.first_passage_profile(pareto_spec, 44, lo=1.0, hi=10.0,
                                     K=8, eps=1.5)


class TestShardAgreement:
    def test_disjoint_shards_agree(self, pareto_spec):
        rep = tr.fourth_moment_ratio(pareto_spec, 51, [32], r_rule="m^0.6",
                                     shards=8, blocks_per_shard=512)
        assert rep.cells[0].shard_ok
