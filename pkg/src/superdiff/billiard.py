"""Exact collision dynamics of the periodic point-scatterer gas.

The table is a finite set of discs in the unit cell, repeated over the
integer lattice.  The collision map traces the free flight cell by cell
(incremental lattice traversal), solves the ray-circle intersection in
closed form, and reflects specularly.  Each collision yields the integer
cell displacement and the planar flight vector; their Birkhoff sums are
the observables everything downstream consumes.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import (EmptyConfig, FlightCapExceeded, OverlappingScatterers,
                     TangentialGrazing)

F_MAX_DEFAULT = 10 ** 6
GRAZE_TOL = 1e-9


@dataclass(frozen=True)
class PhasePoint:
    """Boundary point: scatterer index, arc length r, outgoing angle phi.

    r runs counterclockwise in [0, perimeter_k); phi in (-pi/2, pi/2) is
    measured from the outward normal.
    """

    scatterer: int
    r: float
    phi: float


@dataclass(frozen=True)
class CollisionOutcome:
    next: PhasePoint
    kappa: tuple           # integer cell change, length d
    phi: tuple             # planar flight vector, length 2
    flight_time: float
    cells_traversed: int


@dataclass
class TrajectorySummary:
    checkpoints: list      # (step, S_kappa tuple, S_phi tuple, runmax)
    coboundary_gap: float
    steps: int


class PhaseBatch:
    """Struct-of-arrays batch of phase points."""

    def __init__(self, scatterer: np.ndarray, r: np.ndarray, phi: np.ndarray):
        self.scatterer = np.asarray(scatterer, dtype=np.int64)
        self.r = np.asarray(r, dtype=float)
        self.phi = np.asarray(phi, dtype=float)

    def __len__(self):
        return len(self.scatterer)

    def __getitem__(self, i) -> PhasePoint:
        return PhasePoint(int(self.scatterer[i]), float(self.r[i]), float(self.phi[i]))


class BilliardTable:
    """Validated disc configuration on the unit torus plus derived arrays."""

    def __init__(self, centers: np.ndarray, radii: np.ndarray, d: int,
                 f_max: int = F_MAX_DEFAULT, horizon_scan: int = 8):
        self.centers = np.asarray(centers, dtype=float)
        self.radii = np.asarray(radii, dtype=float)
        self.d = int(d)
        self.f_max = int(f_max)
        self._validate()
        self._build_candidates()
        self.corridor_norm_scanned = horizon_scan
        self.infinite_horizon = self._scan_horizon(horizon_scan)

    # -- validation ------------------------------------------------------
    def _validate(self):
        if self.centers.ndim != 2 or self.centers.shape[0] == 0:
            raise EmptyConfig("table needs at least one scatterer")
        if self.centers.shape[1] != 2:
            raise ValueError("centers must be (K, 2)")
        if self.d not in (1, 2):
            raise ValueError("lattice dimension d must be 1 or 2")
        if np.any(self.radii <= 0):
            raise ValueError("all radii must be positive")
        k = len(self.radii)
        min_gap = math.inf
        for i in range(k):
            for j in range(k):
                for ox in (-2, -1, 0, 1, 2):
                    for oy in (-2, -1, 0, 1, 2):
                        if i == j and ox == 0 and oy == 0:
                            continue
                        dx = self.centers[i, 0] - self.centers[j, 0] - ox
                        dy = self.centers[i, 1] - self.centers[j, 1] - oy
                        gap = math.hypot(dx, dy) - self.radii[i] - self.radii[j]
                        min_gap = min(min_gap, gap)
        if min_gap <= 0:
            raise OverlappingScatterers(
                f"scatterer closures intersect (min gap {min_gap:.3g})")
        self.min_gap = min_gap

    def _build_candidates(self):
        # disc copies (center + offset) that can intersect the unit cell
        cx, cy, cr, ck = [], [], [], []
        for k in range(len(self.radii)):
            for ox in (-1, 0, 1):
                for oy in (-1, 0, 1):
                    x = self.centers[k, 0] + ox
                    y = self.centers[k, 1] + oy
                    ddx = max(0.0 - x, 0.0, x - 1.0)
                    ddy = max(0.0 - y, 0.0, y - 1.0)
                    if math.hypot(ddx, ddy) < self.radii[k]:
                        cx.append(x)
                        cy.append(y)
                        cr.append(self.radii[k])
                        ck.append(k)
        self.cand_cx = np.asarray(cx, dtype=float)
        self.cand_cy = np.asarray(cy, dtype=float)
        self.cand_r = np.asarray(cr, dtype=float)
        self.cand_k = np.asarray(ck, dtype=np.int64)

    def _scan_horizon(self, max_norm: int) -> bool:
        for xi in primitive_directions(max_norm):
            if corridor_width(self, xi) > 1e-12:
                return True
        return False

    # -- helpers ---------------------------------------------------------
    def perimeters(self) -> np.ndarray:
        return 2.0 * math.pi * self.radii

    def point_xy(self, p: PhasePoint) -> np.ndarray:
        th = p.r / self.radii[p.scatterer]
        return self.centers[p.scatterer] + self.radii[p.scatterer] * np.array(
            [math.cos(th), math.sin(th)])

    def theta_of(self, p: PhasePoint) -> float:
        return p.r / self.radii[p.scatterer]

    def point_from_theta(self, k: int, theta: float, phi: float) -> PhasePoint:
        r = (theta % (2.0 * math.pi)) * self.radii[k]
        return PhasePoint(int(k), float(r), float(phi))

    def kernel_args(self):
        return (self.cand_cx, self.cand_cy, self.cand_r, self.cand_k,
                self.centers, self.radii)

    def signature(self) -> str:
        return json.dumps({
            "d": self.d,
            "scatterers": [{"center": [float(c[0]), float(c[1])], "radius": float(r)}
                           for c, r in zip(self.centers, self.radii)],
        }, sort_keys=True)

    def to_config(self) -> dict:
        return json.loads(self.signature())


def build_table(config, d: int | None = None, f_max: int = F_MAX_DEFAULT,
                horizon_scan: int = 8) -> BilliardTable:
    """Validate a scatterer configuration and derive the traversal tables.

    `config` is either a list of (center, radius) pairs with `d` given
    separately, or a dict {"d": ..., "scatterers": [{"center": [x, y],
    "radius": r}, ...]} as read from JSON.
    """
    if isinstance(config, dict):
        d = int(config.get("d", 2)) if d is None else d
        scat = config.get("scatterers", [])
        centers = [s["center"] for s in scat]
        radii = [s["radius"] for s in scat]
    else:
        centers = [c for c, _ in config]
        radii = [r for _, r in config]
        d = 2 if d is None else d
    if len(centers) == 0:
        raise EmptyConfig("no scatterers in configuration")
    return BilliardTable(np.asarray(centers, dtype=float),
                         np.asarray(radii, dtype=float), d,
                         f_max=f_max, horizon_scan=horizon_scan)


def load_table(path) -> BilliardTable:
    with open(path) as fh:
        return build_table(json.load(fh))


# ---------------------------------------------------------------------------
# Corridor geometry (shared with the corridor module).
# ---------------------------------------------------------------------------

def primitive_directions(max_norm: int):
    """Primitive lattice vectors with sup-norm <= max_norm, one per +-pair."""
    out = []
    for a in range(0, max_norm + 1):
        for b in range(-max_norm, max_norm + 1):
            if a == 0 and b <= 0:
                continue
            if a == 0 and b != 1 and abs(b) != 1:
                continue
            if math.gcd(a, abs(b)) != 1:
                continue
            out.append((a, b))
    return out


def corridor_width(table: BilliardTable, xi) -> float:
    """Width of the widest collision-free strip in lattice direction xi.

    Projects every disc family onto the unit normal of xi; the projected
    centers form arithmetic progressions of spacing 1/|xi|, so the free
    width is the largest gap left on a circle of that circumference.
    """
    a, b = int(xi[0]), int(xi[1])
    norm = math.hypot(a, b)
    spacing = 1.0 / norm
    nx, ny = -b / norm, a / norm
    segs = []
    for k in range(len(table.radii)):
        p = (table.centers[k, 0] * nx + table.centers[k, 1] * ny) % spacing
        r = table.radii[k]
        if 2.0 * r >= spacing:
            return 0.0
        lo = (p - r) % spacing
        # one period plus a duplicate shifted copy so wraparound gaps close
        segs.append((lo, lo + 2.0 * r))
        segs.append((lo + spacing, lo + spacing + 2.0 * r))
    segs.sort()
    merged = [segs[0]]
    for s, e in segs[1:]:
        if s <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], e))
        else:
            merged.append((s, e))
    window_lo = segs[0][0]
    best = 0.0
    for (_, e1), (s2, _) in zip(merged, merged[1:]):
        if window_lo - 1e-15 <= e1 <= window_lo + spacing + 1e-15:
            best = max(best, s2 - e1)
    return max(best, 0.0)


# ---------------------------------------------------------------------------
# Invariant measure sampling and the collision map.
# ---------------------------------------------------------------------------

def sample_invariant(table: BilliardTable, seed: int, count: int) -> PhaseBatch:
    """i.i.d. draws from the collision-invariant measure (cos-weighted angle).

    Scatterer chosen proportionally to perimeter, position uniform on the
    boundary, angle phi = arcsin(2U - 1).  Deterministic given seed.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    w = table.perimeters()
    w = w / w.sum()
    ks = rng.choice(len(w), size=count, p=w)
    theta = rng.uniform(0.0, 2.0 * math.pi, size=count)
    phi = np.arcsin(2.0 * rng.random(count) - 1.0)
    return PhaseBatch(ks, theta * table.radii[ks], phi)


def collide(table: BilliardTable, point: PhasePoint) -> CollisionOutcome:
    """One application of the collision map with full outcome bookkeeping."""
    status, k2, th2, ph2, kx, ky, px, py, cells = _kernels.step_state(
        *table.kernel_args(), int(point.scatterer), table.theta_of(point),
        float(point.phi), table.f_max, GRAZE_TOL)
    if status == 1:
        raise FlightCapExceeded(
            f"flight exceeded {table.f_max} cells (corridor-aligned ray?)")
    if status == 2:
        raise TangentialGrazing("collision too close to tangency")
    nxt = table.point_from_theta(k2, th2, ph2)
    kappa = (kx,) if table.d == 1 else (kx, ky)
    return CollisionOutcome(next=nxt, kappa=kappa, phi=(px, py),
                            flight_time=math.hypot(px, py),
                            cells_traversed=int(cells))


def birkhoff(table: BilliardTable, start: PhasePoint, n: int,
             checkpoint_schedule=None) -> TrajectorySummary:
    """Stream n collisions, recording Birkhoff sums at the given steps.

    Memory is O(checkpoints); the coboundary gap (max distance between the
    planar and the lattice sums) and the running max of |S_k kappa| are
    tracked at every step.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if checkpoint_schedule is None:
        checkpoint_schedule = [n]
    sched = np.asarray(sorted(set(int(s) for s in checkpoint_schedule)), dtype=np.int64)
    if len(sched) and (sched[0] < 1 or sched[-1] > n):
        raise ValueError("schedule must lie in 1..n")
    out = _kernels.birkhoff_run(
        *table.kernel_args(), int(start.scatterer), table.theta_of(start),
        float(start.phi), int(n), sched, table.d, table.f_max, GRAZE_TOL)
    status, steps = out[0], out[1]
    if status == 1:
        raise FlightCapExceeded("flight cap exceeded", step=int(steps))
    if status == 2:
        raise TangentialGrazing("tangential grazing", step=int(steps))
    table_rows = out[9]
    gap, runmax = float(out[10]), float(out[11])
    checkpoints = []
    for row in table_rows:
        sk = (int(row[1]),) if table.d == 1 else (int(row[1]), int(row[2]))
        checkpoints.append((int(row[0]), sk, (float(row[3]), float(row[4])),
                            float(row[5])))
    return TrajectorySummary(checkpoints=checkpoints, coboundary_gap=gap,
                             steps=int(steps))


def kappa_stream(table: BilliardTable, start: PhasePoint, n: int,
                 want_phi: bool = False):
    """n collisions as arrays: kappa (n, d) int64 [, phi (n, 2) float64].

    Also returns the continuation phase point.
    """
    out_k = np.empty((n, 2), dtype=np.int64)
    out_p = np.empty((n, 2), dtype=np.float64) if want_phi else np.empty((1, 2))
    status, steps, k, th, ph = _kernels.kappa_stream(
        *table.kernel_args(), int(start.scatterer), table.theta_of(start),
        float(start.phi), int(n), table.f_max, GRAZE_TOL, out_k, out_p,
        want_phi)
    if status == 1:
        raise FlightCapExceeded("flight cap exceeded", step=int(steps))
    if status == 2:
        raise TangentialGrazing("tangential grazing", step=int(steps))
    nxt = table.point_from_theta(int(k), float(th), float(ph))
    kap = out_k[:, : table.d]
    if want_phi:
        return kap, out_p, nxt
    return kap, nxt


def write_checkpoints_csv(path, summary: TrajectorySummary) -> None:
    """Trajectory checkpoint dump: step,kx,ky,phix,phiy,runmax."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "kx", "ky", "phix", "phiy", "runmax"])
        for step, sk, sp, rm in summary.checkpoints:
            kx = sk[0]
            ky = sk[1] if len(sk) > 1 else 0
            w.writerow([step, kx, ky, repr(sp[0]), repr(sp[1]), repr(rm)])
