"""Headline statistical experiments: superdiffusive CLT, record curves
against the generalized normalizer, exceedance profiles, and a
correlation-decay proxy for the conditional-expectation hypothesis.

Records stand in for limit superior statements: each stream reports its
running maximum of |S_m| / c(m) at dyadic checkpoints, which is
nondecreasing by construction; reports carry records and trends, never a
claimed limit (the normalizer converges at triple-log speed, so a point
estimate would be dishonest).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from . import billiard as bl
from . import _kernels
from .normalizers import (AFunction, NormalizerConfig, NormalizerSequence,
                          c_star, iterated_log)
from .sources import SourceSpec, open_stream, stream_seed, table_for
from .truncation import truncate


# ---------------------------------------------------------------------------
# Nonstandard CLT.
# ---------------------------------------------------------------------------

@dataclass
class CLTReport:
    n: int
    samples: int
    normalizer: float
    ks_fitted: list          # per component, vs Gaussian with robust fitted scale
    ks_reference: list       # per component, vs N(0, ref_sigma^2)
    sigma_hat: np.ndarray    # estimated limit covariance (d x d)
    sigma_split: tuple       # (first-half, second-half) covariance estimates
    split_ok: bool
    failed_samples: int = 0

    def to_json(self) -> str:
        return json.dumps({
            "n": self.n, "samples": self.samples, "normalizer": self.normalizer,
            "ks_fitted": self.ks_fitted, "ks_reference": self.ks_reference,
            "sigma_hat": self.sigma_hat.tolist(),
            "sigma_split": [s.tolist() for s in self.sigma_split],
            "split_ok": self.split_ok, "failed_samples": self.failed_samples,
        }, sort_keys=True, indent=2)


def ks_distance(z: np.ndarray, sigma: float = 1.0) -> float:
    """Sup distance between the empirical cdf of z and a centered normal cdf."""
    z = np.sort(np.asarray(z, dtype=float))
    n = len(z)
    cdf = ndtr(z / sigma)
    up = np.arange(1, n + 1) / n
    lo = np.arange(0, n) / n
    return float(max(np.max(np.abs(up - cdf)), np.max(np.abs(cdf - lo))))


def robust_sigma(z: np.ndarray) -> float:
    """Gaussian scale from the interquartile range (outlier-immune)."""
    q75, q25 = np.percentile(z, [75.0, 25.0])
    return float((q75 - q25) / 1.3489795003921634)


def _shard_counts(samples: int, shards: int) -> list:
    return [samples // shards + (1 if s < samples % shards else 0)
            for s in range(shards)]


def _sums_shard_task(arg):
    spec_dict, seed, n, samples, shards, shard = arg
    spec = SourceSpec(**spec_dict)
    return shard, _sums_batch(spec, seed, n, samples, shards=shards,
                              only_shard=shard)


def _sums_batch(spec: SourceSpec, seed: int, n: int, samples: int,
                shards: int = 8, only_shard: int | None = None) -> tuple:
    """Independent Birkhoff/partial sums S_n, shape (samples, d)."""
    d = spec.d
    out = []
    failed = 0
    per = _shard_counts(samples, shards)
    for s, cnt in enumerate(per):
        if cnt == 0 or (only_shard is not None and s != only_shard):
            continue
        if spec.kind == "lorentz":
            table = table_for(spec)
            batch = bl.sample_invariant(table, stream_seed(seed, s), cnt)
            theta = batch.r / table.radii[batch.scatterer]
            res = _kernels.clt_sums(*table.kernel_args(), batch.scatterer,
                                    theta, batch.phi, int(n), table.f_max,
                                    bl.GRAZE_TOL)
            ok = res[:, 2] == 0
            failed += int(np.sum(~ok))
            out.append(res[ok][:, :d] if d > 1 else res[ok][:, :1])
        else:
            stream = open_stream(spec, seed, s)
            sums = np.zeros((cnt, d))
            chunk = max(1, (1 << 22) // n)
            done = 0
            while done < cnt:
                nb = min(chunk, cnt - done)
                vals = stream.next_chunk(nb * n).reshape(nb, n, d)
                sums[done:done + nb] = vals.sum(axis=1)
                done += nb
            out.append(sums)
    return np.concatenate(out, axis=0), failed


def clt_experiment(spec: SourceSpec, seed: int, n: int, samples: int,
                   c_hat: float, ref_sigma: float = 1.0,
                   normalizer: str = "superdiffusive",
                   shards: int = 8, workers: int = 1,
                   return_samples: bool = False):
    """Distribution of S_n / a_n against the Gaussian limit.

    a_n = sqrt(c_hat * n * L(n)) for the superdiffusive normalizer, or
    sqrt(n) for the diffusive control.  Both a robust-fitted-scale KS and a
    fixed-reference KS (scale ref_sigma) are reported; the reference one is
    the negative-control discriminator, since the fitted one absorbs any
    wrong variance scale.
    """
    if samples < 10 ** 3:
        raise ValueError("need at least 1e3 samples")
    if c_hat <= 0:
        raise ValueError("c_hat must be positive")
    if normalizer == "superdiffusive":
        a_n = math.sqrt(c_hat * n * iterated_log(n, 1))
    elif normalizer == "diffusive":
        a_n = math.sqrt(float(n))
    else:
        raise ValueError("normalizer must be 'superdiffusive' or 'diffusive'")
    if workers > 1:
        from multiprocessing import Pool
        with Pool(workers) as pool:
            parts = pool.map(_sums_shard_task,
                             [(spec.to_dict(), seed, n, samples, shards, s)
                              for s in range(shards)])
        parts.sort()
        sums = np.concatenate([p[1][0] for p in parts], axis=0)
        failed = sum(p[1][1] for p in parts)
    else:
        sums, failed = _sums_batch(spec, seed, n, samples, shards=shards)
    z = sums / a_n
    d = z.shape[1]
    ks_fit = [ks_distance(z[:, c], robust_sigma(z[:, c])) for c in range(d)]
    ks_ref = [ks_distance(z[:, c], ref_sigma) for c in range(d)]
    sigma_hat = (z.T @ z) / len(z)
    half = len(z) // 2
    s1 = (z[:half].T @ z[:half]) / half
    s2 = (z[half:].T @ z[half:]) / (len(z) - half)
    # entrywise split agreement within 3 combined standard errors
    ok = True
    for i in range(d):
        for j in range(d):
            prod1 = z[:half, i] * z[:half, j]
            prod2 = z[half:, i] * z[half:, j]
            se = math.sqrt(np.var(prod1) / half + np.var(prod2) / (len(z) - half))
            if abs(s1[i, j] - s2[i, j]) > 3.0 * max(se, 1e-12):
                ok = False
    rep = CLTReport(n=n, samples=len(z), normalizer=a_n, ks_fitted=ks_fit,
                    ks_reference=ks_ref, sigma_hat=sigma_hat,
                    sigma_split=(s1, s2), split_ok=ok, failed_samples=failed)
    if return_samples:
        return rep, z
    return rep


# ---------------------------------------------------------------------------
# Record curves (running max of |S_m| / c(m)).
# ---------------------------------------------------------------------------

@dataclass
class LILReport:
    n_max: int
    checkpoints: list          # dyadic steps
    records: np.ndarray        # (streams, checkpoints), nondecreasing rows
    normalizer: str
    scale: float
    failed_streams: list = field(default_factory=list)

    def median_curve(self) -> np.ndarray:
        return np.median(self.records, axis=0)

    def envelope(self) -> tuple:
        return (np.min(self.records, axis=0), np.max(self.records, axis=0))

    def final_records(self) -> np.ndarray:
        return self.records[:, -1]

    def to_csv(self, path) -> None:
        import csv as _csv
        with open(path, "w", newline="") as fh:
            w = _csv.writer(fh)
            w.writerow(["stream", "k", "n", "record"])
            for s in range(self.records.shape[0]):
                for k, n in enumerate(self.checkpoints):
                    w.writerow([s, k, n, repr(float(self.records[s, k]))])


def _normalizer_values(name: str, m: np.ndarray, C: float, scale: float) -> np.ndarray:
    if name == "c_star":
        return scale * c_star(m, C)
    if name == "classical":
        return scale * np.sqrt(2.0 * m * iterated_log(m, 2))
    if name == "sqrt":
        return scale * np.sqrt(m)
    raise ValueError(f"unknown normalizer {name!r}")


def lil_record(spec: SourceSpec, seed: int, n_max: int, streams: int,
               normalizer: str = "c_star", C: float = 1.0, scale: float = 1.0,
               chunk: int = 1 << 20, stream_states: dict | None = None) -> LILReport:
    """Per-stream running records of |S_m| / c(m) at dyadic checkpoints.

    Streams are independent; a stream that fails inside the simulator is
    reported in failed_streams and excluded, without aborting the others.
    stream_states optionally resumes partially processed streams (used by
    the checkpointing runner).
    """
    if n_max < 2 or (n_max & (n_max - 1)) != 0:
        raise ValueError("n_max must be a power of two >= 2")
    kmax = int(math.log2(n_max))
    checkpoints = [2 ** k for k in range(kmax + 1)]
    records = np.zeros((streams, len(checkpoints)))
    failed = []
    for sid in range(streams):
        try:
            rec = _one_stream_records(spec, seed, sid, n_max, checkpoints,
                                      normalizer, C, scale, chunk)
            records[sid] = rec
        except Exception as exc:   # per-stream isolation by contract
            failed.append((sid, f"{type(exc).__name__}: {exc}"))
            records[sid] = np.nan
    return LILReport(n_max=n_max, checkpoints=checkpoints, records=records,
                     normalizer=normalizer, scale=scale, failed_streams=failed)


def _one_stream_records(spec, seed, sid, n_max, checkpoints, normalizer,
                        C, scale, chunk):
    stream = open_stream(spec, seed, sid)
    d = spec.d
    S = np.zeros(d)
    pos = 0
    running = 0.0
    rec = np.zeros(len(checkpoints))
    ci = 0
    while pos < n_max:
        upto = checkpoints[ci]
        n = min(chunk, upto - pos)
        vals = stream.next_chunk(n)
        cs = np.cumsum(vals, axis=0) + S
        S = cs[-1].copy()
        nrm = np.abs(cs[:, 0]) if d == 1 else np.sqrt(np.sum(cs ** 2, axis=1))
        m = np.arange(pos + 1, pos + n + 1, dtype=float)
        ratios = nrm / _normalizer_values(normalizer, m, C, scale)
        running = max(running, float(np.max(ratios)))
        pos += n
        while ci < len(checkpoints) and checkpoints[ci] == pos:
            rec[ci] = running
            ci += 1
    return rec


def exceedance_profile(report: LILReport, alpha_grid) -> list:
    """Fraction of streams whose final record exceeds each alpha."""
    finals = report.final_records()
    finals = finals[~np.isnan(finals)]
    return [(float(a), float(np.mean(finals > a))) for a in alpha_grid]


# ---------------------------------------------------------------------------
# Correlation-decay proxy for the conditional-expectation hypothesis.
# ---------------------------------------------------------------------------

@dataclass
class MixingProbe:
    R: float
    q_grid: list
    auto: np.ndarray          # |E <W_0, W_q>| estimates
    auto_se: np.ndarray
    sign_corr: np.ndarray     # |E <sign(S), W_q>| estimates
    sign_se: np.ndarray
    second_moment: float      # q = 0 value (truncated second moment, vector)
    gamma_hat: float | None
    c3_hat: float | None
    decayed: bool

    def envelope(self, q) -> float:
        if self.gamma_hat is None:
            return math.nan
        return self.R * self.gamma_hat ** (np.asarray(q, dtype=float)
                                           - self.c3_hat * math.log(self.R))


def mixing_decay(spec: SourceSpec, seed: int, R: float, q_grid,
                 shards: int = 8, n_per_shard: int = 1 << 20) -> MixingProbe:
    """Decay of truncated-value correlations against two past functionals.

    Test functions: the truncated value itself at lag q, and the sign of
    the running truncated sum.  This probes a measurable consequence of
    the conditional-expectation decay hypothesis, not the conditional
    expectation itself (a proxy, by design).  The envelope fit returns
    (gamma, C3) for est ~ R * gamma^(q - C3 ln R).
    """
    if R < 8.0:
        raise ValueError("R must be at least 8")
    qs = sorted(int(q) for q in q_grid)
    if qs[0] < 0 or qs[-1] > 10 ** 3:
        raise ValueError("q grid must lie in [0, 1e3]")
    qmax = qs[-1]
    auto = np.zeros((shards, len(qs)))
    sgn = np.zeros((shards, len(qs)))
    for s in range(shards):
        stream = open_stream(spec, seed, s)
        vals = stream.next_chunk(n_per_shard + qmax)
        w = truncate(vals, R)
        cs = np.cumsum(w, axis=0)
        signs = np.sign(cs)
        for qi, q in enumerate(qs):
            lead = w[q:q + n_per_shard]
            base = w[:n_per_shard]
            auto[s, qi] = np.mean(np.sum(base * lead, axis=1))
            sgn[s, qi] = np.mean(np.sum(signs[:n_per_shard] * lead, axis=1))
    auto_mean = np.mean(auto, axis=0)
    auto_se = np.std(auto, axis=0, ddof=1) / math.sqrt(shards)
    sgn_mean = np.mean(sgn, axis=0)
    sgn_se = np.std(sgn, axis=0, ddof=1) / math.sqrt(shards)
    second = float(auto_mean[qs.index(0)]) if 0 in qs else math.nan
    # envelope fit on lags clearly above the noise floor
    gamma = c3 = None
    decayed = False
    pos = [(q, abs(a)) for q, a, se in zip(qs, np.abs(auto_mean), auto_se)
           if q > 0 and abs(a) > 3.0 * se]
    if len(pos) >= 2:
        qv = np.array([p[0] for p in pos], dtype=float)
        lv = np.log([p[1] for p in pos])
        b, a0 = np.polyfit(qv, lv, 1)
        if b < 0:
            gamma = float(math.exp(b))
            c3 = float((math.log(R) - a0) / (b * math.log(R)))
            decayed = True
    else:
        # everything beyond lag zero already at the noise floor
        decayed = all(abs(a) <= 3.0 * se for q, a, se
                      in zip(qs, auto_mean, auto_se) if q > 0)
    return MixingProbe(R=R, q_grid=qs, auto=np.abs(auto_mean), auto_se=auto_se,
                       sign_corr=np.abs(sgn_mean), sign_se=sgn_se,
                       second_moment=second, gamma_hat=gamma, c3_hat=c3,
                       decayed=decayed)


# ---------------------------------------------------------------------------
# A-function record.
# ---------------------------------------------------------------------------

@dataclass
class ARecordCheck:
    ns: list
    max_rel_dev: float
    ok: bool


def a_record_check(config: NormalizerConfig, ns, tol: float = 1e-12) -> ARecordCheck:
    """A(c_n) against the operator norm of the stored Gamma_n^2 matrices.

    With the integrated-tail calibration, A(c_n) = C0 * |Gamma_n^2|_op
    exactly; the check recomputes both sides independently.
    """
    a_fn = AFunction.from_config(config)
    seq = NormalizerSequence(config)
    worst = 0.0
    for n in ns:
        lhs = a_fn.value(seq.c(n))
        rhs = config.C0 * seq.gamma_opnorm(n)
        worst = max(worst, abs(lhs - rhs) / max(abs(rhs), 1e-300))
    return ARecordCheck(ns=list(ns), max_rel_dev=worst, ok=worst <= tol)
