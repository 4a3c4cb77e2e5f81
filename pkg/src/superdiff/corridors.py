"""Corridor enumeration and heavy-tail estimation for the cell-change data.

Corridors are the collision-free strips of the infinite-horizon table;
flights down a corridor in direction xi produce cell changes N*xi whose
probability falls off cubically in N.  This module finds the corridors
exactly (disc geometry) and estimates the tail law empirically: the
regular-variation index, the aggregate tail constant, per-corridor
constants, and the angular concentration of large jumps.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .billiard import BilliardTable, corridor_width, primitive_directions
from .errors import DegenerateData, InsufficientData, InsufficientTail


@dataclass
class Corridor:
    xi: tuple                  # primitive direction, one per +- pair
    width: float
    c_xi_hat: float | None = None


@dataclass
class TailEstimate:
    alpha_hat: float
    alpha_hill: float
    C_hat: float
    p_hat: float | None
    q_hat: float | None
    angular_hist: np.ndarray | None
    per_corridor: list = field(default_factory=list)
    fit_window: tuple = (0.0, 0.0)
    n_samples: int = 0

    def to_json(self) -> str:
        return json.dumps({
            "alpha_hat": self.alpha_hat,
            "alpha_hill": self.alpha_hill,
            "C_hat": self.C_hat,
            "p_hat": self.p_hat,
            "q_hat": self.q_hat,
            "per_corridor": [{"xi": list(c.xi), "C": c.c_xi_hat, "width": c.width,
                              "slope": getattr(c, "slope", None)}
                             if isinstance(c, Corridor) else c
                             for c in self.per_corridor],
            "angular": None if self.angular_hist is None else list(map(float, self.angular_hist)),
            "fit_window": list(self.fit_window),
            "n_samples": self.n_samples,
        }, sort_keys=True, indent=2)


@dataclass
class JointTailProbe:
    m: int
    m_prime: int
    gap: int
    estimate: float
    std_error: float
    count: int
    n_pairs: int


def enumerate_corridors(table: BilliardTable, max_norm: int) -> list:
    """All primitive directions with sup-norm <= max_norm that admit a
    collision-free strip, with exact widths; widest first."""
    if max_norm < 1:
        raise ValueError("max_norm must be >= 1")
    out = []
    for xi in primitive_directions(max_norm):
        w = corridor_width(table, xi)
        if w > 1e-12:
            out.append(Corridor(xi=xi, width=w))
    out.sort(key=lambda c: -c.width)
    return out


def nondegeneracy_check(corridors: list, d: int):
    """The unbounded-flight nondegeneracy condition for the given cover.

    d = 2 needs two nonparallel collision-free directions; d = 1 needs a
    collision-free direction not orthogonal to the cover axis.
    """
    if d == 2:
        for i in range(len(corridors)):
            for j in range(i + 1, len(corridors)):
                a = corridors[i].xi
                b = corridors[j].xi
                if a[0] * b[1] - a[1] * b[0] != 0:
                    return True, f"nonparallel corridors {a} and {b}"
        return False, "fewer than two nonparallel corridor directions"
    if d == 1:
        for c in corridors:
            if c.xi[0] != 0:
                return True, f"corridor {c.xi} has a component along the cover"
        return False, "every corridor is orthogonal to the cover direction"
    raise ValueError("d must be 1 or 2")


def _hill_alpha(norms: np.ndarray, k: int) -> float:
    xs = np.sort(norms)
    xs = xs[xs > 0]
    k = min(k, len(xs) - 1)
    top = xs[-k:]
    base = xs[-k - 1]
    return float(k / np.sum(np.log(top / base)))


def tail_fit(samples, corridors: list | None = None, t_min: float = 8.0,
             min_exceed: int = 200, n_angular: int = 64) -> TailEstimate:
    """Fit the heavy-tail law of the cell-change samples.

    samples: (N,) signed values (d = 1) or (N, d) lattice vectors.
    Survival index from a log-log regression over dyadic thresholds in
    [t_min, t_max], t_max the largest threshold keeping >= min_exceed
    exceedances; Hill estimate with k = floor(N^0.6) reported alongside.
    The aggregate constant is the median of t^2 * survival over the window.
    """
    x = np.asarray(samples)
    if x.ndim == 1:
        x = x[:, None]
    n, d = x.shape
    if n < 10 ** 4:
        raise InsufficientTail(f"need at least 1e4 samples, got {n}")
    norms = np.sqrt(np.sum(x.astype(float) ** 2, axis=1)) if d > 1 else np.abs(
        x[:, 0].astype(float))
    if np.all(norms == norms[0]):
        raise DegenerateData("all samples identical")
    n_beyond = int(np.sum(norms > t_min))
    if n_beyond < 100:
        raise InsufficientTail(
            f"only {n_beyond} samples beyond t_min = {t_min}")
    # dyadic survival grid
    ts = []
    t = t_min
    surv = []
    while True:
        s = np.sum(norms > t) / n
        if s * n < min_exceed:
            break
        ts.append(t)
        surv.append(s)
        t *= 2.0
    if len(ts) < 2:
        raise InsufficientTail("fit window shorter than two dyadic points")
    ts = np.asarray(ts)
    surv = np.asarray(surv)
    slope = np.polyfit(np.log(ts), np.log(surv), 1)[0]
    alpha_hat = float(-slope)
    alpha_hill = _hill_alpha(norms, int(n ** 0.6))
    c_hat = float(np.median(ts ** 2 * surv))
    p_hat = q_hat = None
    if d == 1:
        sel = norms > t_min
        signs = np.sign(x[sel, 0])
        p_hat = float(np.mean(signs > 0))
        q_hat = float(np.mean(signs < 0))
    ang = None
    if d == 2:
        sel = norms > t_min
        if np.any(sel):
            theta = np.arctan2(x[sel, 1].astype(float), x[sel, 0].astype(float))
            # offset by half a bin so lattice directions sit at bin centers
            half = math.pi / n_angular
            theta = (theta + math.pi + half) % (2.0 * math.pi)
            hist, _ = np.histogram(theta, bins=n_angular, range=(0.0, 2.0 * math.pi))
            ang = hist / hist.sum()
    per = []
    if corridors and d == 2:
        for c in corridors:
            per.append(_corridor_constant(x, c, n))
    return TailEstimate(alpha_hat=alpha_hat, alpha_hill=alpha_hill, C_hat=c_hat,
                        p_hat=p_hat, q_hat=q_hat, angular_hist=ang,
                        per_corridor=per, fit_window=(float(ts[0]), float(ts[-1])),
                        n_samples=n)


def _corridor_constant(x: np.ndarray, corridor: Corridor, n_total: int,
                       min_count: int = 20) -> Corridor:
    """Per-corridor tail constant and cubic-decay slope.

    A long flight down a corridor connects the two scatterer rows bounding
    the strip, so its cell change is N*xi plus a bounded transversal offset
    (never an exact multiple for identical discs: a ray re-hitting its own
    row collides within a few cells).  Jumps are therefore grouped by their
    parallel multiplicity N = round(<kappa, xi>/|xi|^2) with residue
    |kappa - N xi| <= sqrt(2), binned dyadically in N, and the density
    regressed on N; the constant comes from the binned mass against the
    integrated cubic law.
    """
    a, b = corridor.xi
    xi2 = a * a + b * b
    proj = (x[:, 0] * a + x[:, 1] * b) / xi2
    mult = np.round(proj).astype(np.int64)
    resx = x[:, 0] - mult * a
    resy = x[:, 1] - mult * b
    coll = (resx * resx + resy * resy <= 2) & (np.abs(mult) >= 2)
    ns = np.abs(mult[coll]).astype(float)
    out = Corridor(xi=corridor.xi, width=corridor.width)
    out.slope = None
    out.c_xi_hat = None
    if len(ns) == 0:
        return out
    mids, dens, cs = [], [], []
    # fit from N >= 16: below that the cubic law still carries prefactor
    # corrections and non-corridor contamination (narrow corridors
    # especially), steepening the apparent slope
    j = 4
    while True:
        lo, hi = 2.0 ** j, 2.0 ** (j + 1)
        cnt = int(np.sum((ns >= lo) & (ns < hi)))
        if cnt < min_count:
            if lo > ns.max():
                break
            j += 1
            continue
        mids.append(math.sqrt(lo * hi))
        dens.append(cnt / (hi - lo) / n_total)
        # integral of C/N^3 over [lo, hi) = C (lo^-2 - hi^-2)/2
        cs.append(cnt / n_total / ((lo ** -2 - hi ** -2) / 2.0))
        j += 1
    if len(mids) >= 2:
        out.slope = float(np.polyfit(np.log(mids), np.log(dens), 1)[0])
        out.c_xi_hat = float(np.median(cs))
    elif len(cs) == 1:
        out.c_xi_hat = float(cs[0])
    return out


def joint_tail_estimate(norms, m: int, m_prime: int, gap: int) -> JointTailProbe:
    """Empirical frequency that |v| floors to m now and to m_prime gap steps on.

    norms: trajectory of |v| values (stationary sampling).  Binomial
    standard error; raises when either level set never occurs.
    """
    if gap < 1:
        raise ValueError("gap must be >= 1")
    v = np.floor(np.asarray(norms, dtype=float)).astype(np.int64)
    a = v[:-gap] == m
    b = v[gap:] == m_prime
    if not np.any(v == m) or not np.any(v == m_prime):
        raise InsufficientData(
            f"level sets m={m} or m'={m_prime} unobserved in {len(v)} samples")
    n_pairs = len(v) - gap
    cnt = int(np.sum(a & b))
    p = cnt / n_pairs
    se = math.sqrt(max(p * (1.0 - p), 1.0 / n_pairs) / n_pairs)
    return JointTailProbe(m=m, m_prime=m_prime, gap=gap, estimate=p,
                          std_error=se, count=cnt, n_pairs=n_pairs)
