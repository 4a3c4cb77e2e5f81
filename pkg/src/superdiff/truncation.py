"""Truncation machinery, dyadic blocks, and truncated-moment probes.

Level truncation keeps a value when its norm is below a cap; banded
truncation keeps it inside [lo, hi].  The block layout splits each dyadic
index range [2^n, 2^{n+1}) into equal working intervals separated by gaps
whose lengths double with the dyadic rank of the gap index; the partition
is exact by construction, with rounding residue absorbed by the final
interval.

The statistical probes estimate fourth moments, covariances, banded second
moments and first-passage counts of truncated block sums, sharded over
independent streams with deterministic reduction.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import LevelTooSmall, RegimeViolation
from .sources import SourceSpec, open_stream


def underline(j: int) -> int:
    """Largest power of two that does not exceed j."""
    j = int(j)
    if j < 1:
        raise ValueError("j must be >= 1")
    return 1 << (j.bit_length() - 1)


def truncate(values: np.ndarray, R: float) -> np.ndarray:
    """W^R: zero out entries whose (vector) norm exceeds R; R = inf is identity."""
    v = np.asarray(values, dtype=float)
    if not math.isfinite(R):
        return v.copy()
    if v.ndim == 1:
        keep = np.abs(v) <= R
        return np.where(keep, v, 0.0)
    keep = np.sqrt(np.sum(v * v, axis=-1)) <= R
    return np.where(keep[..., None], v, 0.0)


def band(values: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Banded variant: keep values with lo <= |v| <= hi, zero elsewhere."""
    v = np.asarray(values, dtype=float)
    nrm = np.abs(v) if v.ndim == 1 else np.sqrt(np.sum(v * v, axis=-1))
    keep = (nrm >= lo) & (nrm <= hi)
    if v.ndim == 1:
        return np.where(keep, v, 0.0)
    return np.where(keep[..., None], v, 0.0)


# ---------------------------------------------------------------------------
# Dyadic block decomposition.
# ---------------------------------------------------------------------------

@dataclass
class BlockLayout:
    n: int
    beta: float
    eps1: float
    F: int
    intervals: list = field(default_factory=list)   # (start, length)
    gaps: list = field(default_factory=list)        # (start, length)

    @property
    def gap_total(self) -> int:
        return sum(l for _, l in self.gaps)

    @property
    def interval_total(self) -> int:
        return sum(l for _, l in self.intervals)

    def covers_exactly(self) -> bool:
        lo, hi = 2 ** self.n, 2 ** (self.n + 1)
        segs = sorted(self.intervals + self.gaps)
        pos = lo
        for s, ln in segs:
            if s != pos or ln <= 0:
                return False
            pos += ln
        return pos == hi

    def to_rows(self):
        rows = [(self.n, "J", j, s, ln) for j, (s, ln) in enumerate(self.gaps)]
        rows += [(self.n, "I", j, s, ln) for j, (s, ln) in enumerate(self.intervals)]
        return sorted(rows, key=lambda r: r[3])


def block_decomposition(n: int, beta: float = 0.5, eps1: float = 0.25) -> BlockLayout:
    """Partition [2^n, 2^{n+1}) into F = 2^floor(beta*n) working intervals
    with dyadic-rank gaps in front of each.

    Gap j >= 1 has length 2^floor(eps1*n) * 2^r with r the index of the
    lowest set bit of j; gap 0 has length 2^floor(eps1*n) * F.  Interval
    lengths are the floor of the nominal common value, with the rounding
    residue absorbed by the last interval so the partition stays exact.
    """
    if not (0.0 < beta < 1.0):
        raise ValueError("beta must lie in (0, 1)")
    if not (0.0 < eps1 < 1.0 - beta):
        raise ValueError("eps1 must lie in (0, 1 - beta)")
    b = int(math.floor(beta * n))
    e1 = int(math.floor(eps1 * n))
    F = 2 ** b
    gap_lengths = [2 ** e1 * F]
    for j in range(1, F):
        r = (j & -j).bit_length() - 1
        gap_lengths.append(2 ** e1 * 2 ** r)
    gap_total = sum(gap_lengths)
    # closed form: 2^e1 * 2^(b-1) * (b+2); for b = 0 interpret as 2^e1
    nominal = 2.0 ** (n - b) - (b + 2) * 2.0 ** (e1 - 1)
    if nominal < 1.0:
        raise LevelTooSmall(
            f"nominal interval length {nominal} < 1 at level n={n}")
    base = int(math.floor(nominal))
    total = 2 ** n
    interval_lengths = [base] * (F - 1)
    last = total - gap_total - base * (F - 1)
    if last < 1:
        raise LevelTooSmall(f"residual interval empty at level n={n}")
    interval_lengths.append(last)
    layout = BlockLayout(n=n, beta=beta, eps1=eps1, F=F)
    pos = 2 ** n
    for j in range(F):
        layout.gaps.append((pos, gap_lengths[j]))
        pos += gap_lengths[j]
        layout.intervals.append((pos, interval_lengths[j]))
        pos += interval_lengths[j]
    assert pos == 2 ** (n + 1)
    return layout


def write_layout_csv(path, layouts) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "kind", "j", "start", "len"])
        for lay in layouts:
            for row in lay.to_rows():
                w.writerow(row)


# ---------------------------------------------------------------------------
# Moment probes over sharded streams.
# ---------------------------------------------------------------------------

@dataclass
class MomentCell:
    m: int
    R: float
    est4: float            # fourth moment of the block-sum norm
    se4: float
    ratio4: float          # est4 / (m R^2)
    est4_comp: float       # per-component fourth moment (averaged over axes)
    excess4_comp: float    # per-component fourth cumulant
    excess_ratio: float    # excess4_comp / (m R^2)
    cov: np.ndarray        # (d, d) covariance of block sums
    ratio2: np.ndarray     # cov / (m ln R)
    shard_ok: bool
    blocks: int


@dataclass
class MomentReport:
    cells: list
    trend_slope: float | None = None       # log ratio4 vs log m
    excess_trend_slope: float | None = None
    upward_trend: bool = False

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["m", "R", "est4", "se4", "ratio4", "cov11", "cov12",
                        "cov22", "ratio2"])
            for c in self.cells:
                cov = c.cov
                c12 = cov[0, 1] if cov.shape[0] > 1 else 0.0
                c22 = cov[1, 1] if cov.shape[0] > 1 else 0.0
                r2 = float(np.mean(np.diag(c.ratio2)))
                w.writerow([c.m, repr(float(c.R)), repr(c.est4), repr(c.se4),
                            repr(c.ratio4), repr(float(cov[0, 0])), repr(float(c12)),
                            repr(float(c22)), repr(r2)])


def _block_sums(spec: SourceSpec, seed: int, shard: int, m: int, blocks: int,
                R: float | None = None, lo: float | None = None,
                hi: float | None = None, base_stream: int = 0) -> np.ndarray:
    """Sums of `blocks` disjoint length-m blocks of (banded) truncated values."""
    stream = open_stream(spec, seed, base_stream + shard)
    out = np.zeros((blocks, spec_dim(spec)))
    chunk_blocks = max(1, min(blocks, (1 << 21) // max(m, 1)))
    done = 0
    while done < blocks:
        nb = min(chunk_blocks, blocks - done)
        vals = stream.next_chunk(nb * m)
        if lo is not None:
            w = band(vals, lo, hi)
        elif R is not None:
            w = truncate(vals, R)
        else:
            w = vals
        out[done:done + nb] = w.reshape(nb, m, -1).sum(axis=1)
        done += nb
    return out


def spec_dim(spec: SourceSpec) -> int:
    return spec.d


def _parse_r_rule(rule) -> callable:
    """R rules: 'm^p' or a constant string/float, or a callable m -> R."""
    if callable(rule):
        return rule
    s = str(rule)
    if s.startswith("m^"):
        p = float(s[2:])
        return lambda m: float(m) ** p
    val = float(s)
    return lambda m: val


def fourth_moment_ratio(spec: SourceSpec, seed: int, m_grid, r_rule="m^0.6",
                        shards: int = 8, blocks_per_shard: int = 64,
                        r1: float = 0.3, r2: float = 1.0,
                        reg_const: float = 16.0,
                        base_stream: int = 0) -> MomentReport:
    """Fourth moments of truncated block sums against the m*R^2 yardstick.

    For each m the truncation level R = r_rule(m) must satisfy the regime
    m <= C R^(2 - r1) and R <= C m^r2 (asymptotic order conditions, so a
    constant factor C = reg_const is allowed).  Shards are independent
    streams; shard means must agree within 3 combined standard errors.
    The report keeps the raw ratio and the per-component fourth cumulant
    ratio, plus the fitted log-log trend of each across the m grid.
    """
    rule = _parse_r_rule(r_rule)
    if shards < 2:
        raise ValueError("need at least 2 shards")
    cells = []
    for m in m_grid:
        m = int(m)
        R = float(rule(m))
        if m > reg_const * R ** (2.0 - r1) or R > reg_const * float(m) ** r2:
            raise RegimeViolation(f"(m={m}, R={R}) breaks the truncation regime")
        per_shard4 = []
        sums_all = []
        for s in range(shards):
            sums = _block_sums(spec, seed, s, m, blocks_per_shard, R=R,
                               base_stream=base_stream)
            nrm2 = np.sum(sums ** 2, axis=1)
            per_shard4.append(float(np.mean(nrm2 ** 2)))
            sums_all.append(sums)
        sums_all = np.concatenate(sums_all, axis=0)
        nrm2 = np.sum(sums_all ** 2, axis=1)
        est4 = float(np.mean(nrm2 ** 2))
        se4 = float(np.std(per_shard4, ddof=1) / math.sqrt(shards))
        comp4 = float(np.mean(np.mean(sums_all ** 4, axis=0)))
        comp2 = np.mean(sums_all ** 2, axis=0)
        excess = float(np.mean(np.mean(sums_all ** 4, axis=0) - 3.0 * comp2 ** 2))
        cov = (sums_all.T @ sums_all) / len(sums_all)
        ratio2 = cov / (m * math.log(R))
        dev = np.abs(np.asarray(per_shard4) - est4)
        shard_se = np.std(per_shard4, ddof=1)
        ok = bool(np.all(dev <= 3.0 * max(shard_se, 1e-300)))
        cells.append(MomentCell(
            m=m, R=R, est4=est4, se4=se4, ratio4=est4 / (m * R * R),
            est4_comp=comp4, excess4_comp=excess,
            excess_ratio=excess / (m * R * R), cov=cov, ratio2=ratio2,
            shard_ok=ok, blocks=len(sums_all)))
    report = MomentReport(cells=cells)
    if len(cells) >= 2:
        lm = np.log([c.m for c in cells])
        report.trend_slope = float(np.polyfit(lm, np.log([max(c.ratio4, 1e-300)
                                                          for c in cells]), 1)[0])
        ex = [c.excess_ratio for c in cells]
        if all(e > 0 for e in ex):
            report.excess_trend_slope = float(np.polyfit(lm, np.log(ex), 1)[0])
        report.upward_trend = report.trend_slope > 0.05
    return report


@dataclass
class CovCell:
    m: int
    R: float
    cov: np.ndarray
    ratio: np.ndarray       # cov / (m ln R)
    se_ratio: float
    blocks: int


def truncated_cov(spec: SourceSpec, seed: int, m: int, r_values,
                  shards: int = 8, blocks_per_shard: int = 64,
                  base_stream: int = 0) -> list:
    """Covariance of length-m truncated block sums for each cap R.

    One pass per shard: the same raw blocks are re-truncated at every R, so
    ratios across the R grid share their sampling noise.
    """
    if m < 10 ** 3:
        raise ValueError("m must be at least 1e3")
    r_values = [float(r) for r in r_values]
    if min(r_values) < 8.0:
        raise ValueError("R must be at least 8")
    d = spec_dim(spec)
    blocks = {r: [] for r in r_values}
    for s in range(shards):
        stream = open_stream(spec, seed, base_stream + s)
        done = 0
        chunk_blocks = max(1, min(blocks_per_shard, (1 << 21) // m))
        shard_sums = {r: [] for r in r_values}
        while done < blocks_per_shard:
            nb = min(chunk_blocks, blocks_per_shard - done)
            vals = stream.next_chunk(nb * m).reshape(nb, m, d)
            for r in r_values:
                w = truncate(vals, r)
                shard_sums[r].append(w.sum(axis=1))
            done += nb
        for r in r_values:
            blocks[r].append(np.concatenate(shard_sums[r], axis=0))
    out = []
    for r in r_values:
        sums = np.concatenate(blocks[r], axis=0)
        cov = (sums.T @ sums) / len(sums)
        ratio = cov / (m * math.log(r))
        per_shard = [float(np.mean(np.sum(b ** 2, axis=1)) / d / (m * math.log(r)))
                     for b in blocks[r]]
        se = float(np.std(per_shard, ddof=1) / math.sqrt(shards))
        out.append(CovCell(m=m, R=r, cov=cov, ratio=ratio, se_ratio=se,
                           blocks=len(sums)))
    return out


@dataclass
class BandSecondMoment:
    N: int
    lo: float
    hi: float
    est: float              # E |S~_N|^2 (vector norm squared)
    ratio: float            # est / (N * L(hi/lo))
    se: float
    per_component: np.ndarray


def band_second_moment(spec: SourceSpec, seed: int, lo: float, hi: float,
                       n_values, shards: int = 8, blocks_per_shard: int = 64,
                       base_stream: int = 0) -> list:
    """Second moment of banded block sums against the N * L(hi/lo) yardstick.

    The band keeps lo <= |v| <= hi; an empty band (lo >= hi) gives zero
    sums and ratio 0 by construction.
    """
    from .normalizers import iterated_log
    out = []
    denom_log = iterated_log(hi / lo, 1) if hi > lo > 0 else 1.0
    for N in n_values:
        N = int(N)
        per_shard = []
        comps = []
        for s in range(shards):
            sums = _block_sums(spec, seed, s, N, blocks_per_shard, lo=lo, hi=hi,
                               base_stream=base_stream)
            per_shard.append(float(np.mean(np.sum(sums ** 2, axis=1))))
            comps.append(np.mean(sums ** 2, axis=0))
        est = float(np.mean(per_shard))
        se = float(np.std(per_shard, ddof=1) / math.sqrt(shards))
        out.append(BandSecondMoment(
            N=N, lo=lo, hi=hi, est=est, ratio=est / (N * denom_log),
            se=se / (N * denom_log), per_component=np.mean(comps, axis=0)))
    return out


@dataclass
class FirstPassageProfile:
    K: int
    eps: float
    c_level: float
    count: int
    paths: int
    estimate: float         # sum_k mu(first passage at k, no half-level at K)
    ratio: float            # estimate / (K / c^2)
    upper95: float          # binomial upper bound when count is small


def first_passage_profile(spec: SourceSpec, seed: int, lo: float, hi: float,
                          K: int, eps: float, shards: int = 8,
                          paths_per_shard: int = 256,
                          base_stream: int = 0) -> FirstPassageProfile:
    """First-passage-without-return frequency for banded partial sums.

    Counts paths whose banded sums first reach eps*hi by step k <= K while
    the step-K sum has fallen back below eps*hi/2; the comparison scale is
    K / hi^2.  K = 0 returns an empty profile.
    """
    if K == 0:
        return FirstPassageProfile(K=0, eps=eps, c_level=hi, count=0, paths=0,
                                   estimate=0.0, ratio=0.0, upper95=0.0)
    if not (0.0 < eps <= 1.0):
        raise ValueError("eps must lie in (0, 1]")
    count = 0
    paths = 0
    thresh = eps * hi
    for s in range(shards):
        stream = open_stream(spec, seed, base_stream + s)
        done = 0
        chunk_paths = max(1, min(paths_per_shard, (1 << 20) // (K + 1)))
        while done < paths_per_shard:
            nb = min(chunk_paths, paths_per_shard - done)
            vals = stream.next_chunk(nb * (K + 1))
            w = band(vals, lo, hi).reshape(nb, K + 1, -1)
            cs = np.cumsum(w, axis=1)
            nrm = np.sqrt(np.sum(cs ** 2, axis=2))
            hit = np.any(nrm[:, 1:] >= thresh, axis=1)
            back = nrm[:, K] < 0.5 * thresh
            count += int(np.sum(hit & back))
            done += nb
            paths += nb
    est = count / paths
    ratio = est / (K / hi ** 2)
    upper = (count + 3.0) / paths / (K / hi ** 2)
    return FirstPassageProfile(K=K, eps=eps, c_level=hi, count=count,
                               paths=paths, estimate=est, ratio=ratio,
                               upper95=upper)
