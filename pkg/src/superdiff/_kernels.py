"""Numba kernels for the collision map and long trajectory streams.

All positions are kept in a local frame that is re-based after every
collision (the current scatterer's fundamental-cell copy), so coordinates
never grow with trajectory length and cell arithmetic stays exact in
float64.  Candidate discs are precomputed per fundamental cell as
(offset + center, radius) pairs that can intersect it; the same list is
valid for every lattice cell by periodicity.

Status codes: 0 = hit, 1 = flight cap exceeded, 2 = tangential grazing.
"""

import numpy as np
from numba import njit

T_EPS = 1e-12


@njit(cache=True)
def collide_core(cand_cx, cand_cy, cand_r, cand_k, qx, qy, vx, vy,
                 fmax, graze_tol):
    """Trace one free flight from (qx,qy) along (vx,vy) to the next disc.

    Returns (status, hit_cand, hx, hy, kx, ky, cells) with (hx,hy) snapped
    to the hit circle and (kx,ky) the integer cell displacement.
    """
    ci = np.floor(qx)
    cj = np.floor(qy)
    c0i = ci
    c0j = cj
    if vx > 0.0:
        stepx = 1.0
        tmaxx = (ci + 1.0 - qx) / vx
        tdx = 1.0 / vx
    elif vx < 0.0:
        stepx = -1.0
        tmaxx = (ci - qx) / vx
        tdx = -1.0 / vx
    else:
        stepx = 0.0
        tmaxx = 1e300
        tdx = 1e300
    if vy > 0.0:
        stepy = 1.0
        tmaxy = (cj + 1.0 - qy) / vy
        tdy = 1.0 / vy
    elif vy < 0.0:
        stepy = -1.0
        tmaxy = (cj - qy) / vy
        tdy = -1.0 / vy
    else:
        stepy = 0.0
        tmaxy = 1e300
        tdy = 1e300

    ncand = cand_cx.shape[0]
    cells = 0
    while cells < fmax:
        t_exit = tmaxx if tmaxx < tmaxy else tmaxy
        best_t = 1e300
        best = -1
        for c in range(ncand):
            ccx = ci + cand_cx[c]
            ccy = cj + cand_cy[c]
            dx = qx - ccx
            dy = qy - ccy
            b = dx * vx + dy * vy
            cc = dx * dx + dy * dy - cand_r[c] * cand_r[c]
            disc = b * b - cc
            if disc <= 0.0:
                continue
            t = -b - np.sqrt(disc)
            if t < T_EPS:
                continue
            if t <= t_exit + T_EPS and t < best_t:
                best_t = t
                best = c
        if best >= 0:
            ccx = ci + cand_cx[best]
            ccy = cj + cand_cy[best]
            hx = qx + best_t * vx
            hy = qy + best_t * vy
            # snap onto the circle to stop drift over long trajectories
            nx = hx - ccx
            ny = hy - ccy
            nrm = np.sqrt(nx * nx + ny * ny)
            nx /= nrm
            ny /= nrm
            r = cand_r[best]
            hx = ccx + r * nx
            hy = ccy + r * ny
            cosinc = -(vx * nx + vy * ny)
            if cosinc < graze_tol:
                return 2, best, hx, hy, 0, 0, cells
            kx = int(np.floor(hx) - c0i)
            ky = int(np.floor(hy) - c0j)
            return 0, best, hx, hy, kx, ky, cells
        if tmaxx < tmaxy:
            ci += stepx
            tmaxx += tdx
        else:
            cj += stepy
            tmaxy += tdy
        cells += 1
    return 1, -1, 0.0, 0.0, 0, 0, cells


@njit(cache=True)
def step_state(cand_cx, cand_cy, cand_r, cand_k, centers, radii,
               k, theta, phi, fmax, graze_tol):
    """One application of the collision map in (scatterer, angle, phi) state.

    Returns (status, k', theta', phi', kx, ky, phix, phiy, cells).
    """
    r = radii[k]
    qx = centers[k, 0] + r * np.cos(theta)
    qy = centers[k, 1] + r * np.sin(theta)
    vdir = theta + phi
    vx = np.cos(vdir)
    vy = np.sin(vdir)
    status, best, hx, hy, kx, ky, cells = collide_core(
        cand_cx, cand_cy, cand_r, cand_k, qx, qy, vx, vy, fmax, graze_tol)
    if status != 0:
        return status, k, theta, phi, 0, 0, 0.0, 0.0, cells
    k2 = cand_k[best]
    # hit-circle center in the local frame
    ccx = hx  # placeholder, recomputed below from geometry
    ccy = hy
    # normal at the hit
    # reconstruct center: hx = ccx + r2*nx -> need candidate's cell; easiest
    # is to recompute via the stored offsets: candidate center = cell + off,
    # but the cell index was internal to collide_core.  Recover from the
    # snapped point instead: theta2 defines the point on scatterer k2 once
    # we identify its lattice copy, i.e. center = closest lattice copy of
    # centers[k2] to (hx, hy).
    bx = centers[k2, 0]
    by = centers[k2, 1]
    mx = np.round(hx - bx)
    my = np.round(hy - by)
    ccx = bx + mx
    ccy = by + my
    r2 = radii[k2]
    nx = (hx - ccx) / r2
    ny = (hy - ccy) / r2
    dot = vx * nx + vy * ny
    wx = vx - 2.0 * dot * nx
    wy = vy - 2.0 * dot * ny
    theta2 = np.arctan2(ny, nx)
    phi2 = np.arctan2(nx * wy - ny * wx, nx * wx + ny * wy)
    phix = hx - qx
    phiy = hy - qy
    return 0, k2, theta2, phi2, kx, ky, phix, phiy, cells


@njit(cache=True)
def kappa_stream(cand_cx, cand_cy, cand_r, cand_k, centers, radii,
                 k, theta, phi, n, fmax, graze_tol, out_kappa, out_phi,
                 want_phi):
    """Fill out_kappa[(n,2)] (and optionally out_phi) with n collisions.

    Returns (status, steps_done, k, theta, phi); state is the post-run
    phase point, valid for continuation when status == 0.
    """
    for i in range(n):
        status, k, theta, phi, kx, ky, px, py, _ = step_state(
            cand_cx, cand_cy, cand_r, cand_k, centers, radii,
            k, theta, phi, fmax, graze_tol)
        if status != 0:
            return status, i, k, theta, phi
        out_kappa[i, 0] = kx
        out_kappa[i, 1] = ky
        if want_phi:
            out_phi[i, 0] = px
            out_phi[i, 1] = py
    return 0, n, k, theta, phi


@njit(cache=True)
def birkhoff_run(cand_cx, cand_cy, cand_r, cand_k, centers, radii,
                 k, theta, phi, n, schedule, d, fmax, graze_tol):
    """Streaming Birkhoff sums with running max and coboundary gap.

    schedule is a sorted int64 array of checkpoint steps (1-based).
    Returns (status, steps_done, state..., sums..., checkpoint table,
    coboundary gap, runmax).
    """
    skx = 0
    sky = 0
    spx = 0.0
    spy = 0.0
    runmax = 0.0
    gap = 0.0
    m = schedule.shape[0]
    out = np.zeros((m, 6), dtype=np.float64)   # step, kx, ky, phix, phiy, runmax
    ptr = 0
    for i in range(n):
        status, k, theta, phi, kx, ky, px, py, _ = step_state(
            cand_cx, cand_cy, cand_r, cand_k, centers, radii,
            k, theta, phi, fmax, graze_tol)
        if status != 0:
            return status, i, k, theta, phi, skx, sky, spx, spy, out[:ptr], gap, runmax
        skx += kx
        sky += ky
        spx += px
        spy += py
        if d == 1:
            knorm = np.abs(skx)
            g = np.abs(spx - skx)
        else:
            knorm = np.sqrt(float(skx) * skx + float(sky) * sky)
            gx = spx - skx
            gy = spy - sky
            g = np.sqrt(gx * gx + gy * gy)
        if knorm > runmax:
            runmax = knorm
        if g > gap:
            gap = g
        if ptr < m and schedule[ptr] == i + 1:
            out[ptr, 0] = i + 1
            out[ptr, 1] = skx
            out[ptr, 2] = sky
            out[ptr, 3] = spx
            out[ptr, 4] = spy
            out[ptr, 5] = runmax
            ptr += 1
    return 0, n, k, theta, phi, skx, sky, spx, spy, out[:ptr], gap, runmax


@njit(cache=True)
def clt_sums(cand_cx, cand_cy, cand_r, cand_k, centers, radii,
             ks, thetas, phis, n, fmax, graze_tol):
    """Final Birkhoff sums S_n for a batch of independent start points.

    Grazing/cap failures mark the sample with status != 0 in the last column.
    """
    m = ks.shape[0]
    out = np.zeros((m, 3), dtype=np.float64)
    for j in range(m):
        k = ks[j]
        theta = thetas[j]
        phi = phis[j]
        skx = 0
        sky = 0
        ok = 0
        for i in range(n):
            status, k, theta, phi, kx, ky, px, py, _ = step_state(
                cand_cx, cand_cy, cand_r, cand_k, centers, radii,
                k, theta, phi, fmax, graze_tol)
            if status != 0:
                ok = status
                break
            skx += kx
            sky += ky
        out[j, 0] = skx
        out[j, 1] = sky
        out[j, 2] = ok
    return out


@njit(cache=True)
def lil_chunk(cand_cx, cand_cy, cand_r, cand_k, centers, radii,
              k, theta, phi, n, skx0, sky0, fmax, graze_tol, out_norm):
    """n collisions; out_norm[i] = |S_{m0+i+1} kappa| (euclidean).

    Returns (status, steps, k, theta, phi, skx, sky).
    """
    skx = skx0
    sky = sky0
    for i in range(n):
        status, k, theta, phi, kx, ky, px, py, _ = step_state(
            cand_cx, cand_cy, cand_r, cand_k, centers, radii,
            k, theta, phi, fmax, graze_tol)
        if status != 0:
            return status, i, k, theta, phi, skx, sky
        skx += kx
        sky += ky
        out_norm[i] = np.sqrt(float(skx) * skx + float(sky) * sky)
    return 0, n, k, theta, phi, skx, sky
