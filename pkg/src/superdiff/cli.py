"""Command-line front door: configuration, orchestration, artifacts.

Every command writes its outputs plus a manifest into --out; a manifest
plus the code version determines every output byte (wall-clock metadata
aside).  Long record runs checkpoint their full per-stream state and can
resume bit-identically.  Worker count never changes results: the
stream-to-shard plan is a pure function of the declared layout.

Exit codes: 0 success, 1 validation error, 2 runtime error, 3 failed
--verify gate.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from multiprocessing import Pool

import numpy as np

from . import __version__
from . import billiard as bl
from . import corridors as cor
from . import limits as lm
from . import normalizers as nz
from . import truncation as tr
from .errors import SuperdiffError
from .manifest import (load_checkpoint, manifest_dict, manifest_key,
                       read_manifest, save_checkpoint, validate_outputs,
                       write_manifest)
from .oracle import ParetoSymConfig, oracle_truncated_moments
from .sources import SourceSpec, open_stream

DEFAULT_TABLE = {"d": 2, "scatterers": [{"center": [0.5, 0.5], "radius": 0.25}]}


def parse_count(expr: str) -> int:
    """Integer sizes, accepting 2^k and k*2^j forms."""
    expr = expr.strip()
    if "^" in expr:
        base, _, exp = expr.partition("^")
        return int(base) ** int(exp)
    return int(expr)


def parse_grid(expr: str) -> list:
    """Grids like '2^8..2^14' (dyadic), or comma lists '16,32,64'."""
    if ".." in expr:
        lo, _, hi = expr.partition("..")
        lo, hi = parse_count(lo), parse_count(hi)
        out = []
        v = lo
        while v <= hi:
            out.append(v)
            v *= 2
        return out
    return [parse_count(tok) for tok in expr.split(",") if tok]


def _workers(args) -> int:
    if args.workers is not None:
        return max(1, args.workers)
    env = os.environ.get("SUPERDIFF_WORKERS")
    return max(1, int(env)) if env else 1


def _load_table_arg(args) -> bl.BilliardTable:
    if args.table:
        return bl.load_table(args.table)
    return bl.build_table(DEFAULT_TABLE)


def _source_spec(args) -> SourceSpec:
    if args.source == "lorentz":
        return SourceSpec.lorentz(_load_table_arg(args).to_config())
    if args.source == "pareto":
        return SourceSpec.pareto(scale=args.scale, d=args.d)
    if args.source == "gauss":
        return SourceSpec.gauss(d=args.d)
    raise SuperdiffError(f"unknown source {args.source!r}")


# ---------------------------------------------------------------------------
# Parallel helpers (task functions must live at module level).
# ---------------------------------------------------------------------------

def _lil_task(arg):
    spec_dict, seed, sid, state, seg, pos, norm_name, C, scale, S = arg
    spec = SourceSpec(**spec_dict)
    stream = open_stream(spec, seed, sid)
    if state is not None:
        stream.restore(state)
    vals = stream.next_chunk(seg)
    cs = np.cumsum(vals, axis=0) + np.asarray(S)
    nrm = np.abs(cs[:, 0]) if spec.d == 1 else np.sqrt(np.sum(cs ** 2, axis=1))
    m = np.arange(pos + 1, pos + seg + 1, dtype=float)
    ratios = nrm / lm._normalizer_values(norm_name, m, C, scale)
    return sid, stream.state(), float(np.max(ratios)), cs[-1].tolist()


def run_lil_command(spec: SourceSpec, seed: int, n_max: int, streams: int,
                    normalizer: str, C: float, scale: float, workers: int,
                    out_dir: str, checkpoint_dir: str | None,
                    checkpoint_every: int, interrupt_after: int | None,
                    man: dict):
    """Record curves with checkpoint/resume and deterministic parallel fanout."""
    kmax = int(math.log2(n_max))
    checkpoints = [2 ** k for k in range(kmax + 1)]
    run_key = manifest_key(man)
    state = {
        "pos": 0, "ci": 0,
        "stream_states": [None] * streams,
        "running": [0.0] * streams,
        "S": [[0.0] * spec.d for _ in range(streams)],
        "records": np.zeros((streams, len(checkpoints))).tolist(),
        "chunks_done": 0,
    }
    ckpt_path = os.path.join(checkpoint_dir, "lil.ckpt") if checkpoint_dir else None
    if ckpt_path and os.path.exists(ckpt_path):
        state = load_checkpoint(ckpt_path, run_key)["state"]
    pool = Pool(workers) if workers > 1 else None
    try:
        while state["pos"] < n_max:
            nxt = checkpoints[state["ci"]]
            seg = min(checkpoint_every, nxt - state["pos"])
            args = [(spec.to_dict(), seed, sid, state["stream_states"][sid], seg,
                     state["pos"], normalizer, C, scale, state["S"][sid])
                    for sid in range(streams)]
            results = pool.map(_lil_task, args) if pool else [_lil_task(a) for a in args]
            for sid, st, segmax, S in sorted(results):
                state["stream_states"][sid] = st
                state["running"][sid] = max(state["running"][sid], segmax)
                state["S"][sid] = S
            state["pos"] += seg
            while state["ci"] < len(checkpoints) and checkpoints[state["ci"]] == state["pos"]:
                for sid in range(streams):
                    state["records"][sid][state["ci"]] = state["running"][sid]
                state["ci"] += 1
            state["chunks_done"] += 1
            if ckpt_path:
                save_checkpoint(ckpt_path, state, run_key)
            if interrupt_after is not None and state["chunks_done"] >= interrupt_after \
                    and state["pos"] < n_max:
                print(f"interrupted after {state['chunks_done']} chunks at "
                      f"step {state['pos']} (checkpoint saved)")
                return None
    finally:
        if pool:
            pool.close()
            pool.join()
    report = lm.LILReport(n_max=n_max, checkpoints=checkpoints,
                          records=np.asarray(state["records"]),
                          normalizer=normalizer, scale=scale)
    report.to_csv(os.path.join(out_dir, "lil_records.csv"))
    med = report.median_curve()
    summary = {
        "median_final": float(med[-1]),
        "median_curve": [float(v) for v in med],
        "checkpoints": checkpoints,
        "monotone": bool(np.all(np.diff(report.records, axis=1) >= -1e-15)),
        "exceedance": lm.exceedance_profile(report, [0.25, 0.5, 0.75, 1.0,
                                                     1.25, 1.5, 2.0]),
    }
    with open(os.path.join(out_dir, "lil_summary.json"), "w") as fh:
        json.dump(summary, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return report, summary


def _clt_shard_task(arg):
    spec_dict, seed, n, samples, shard, shards = arg
    spec = SourceSpec(**spec_dict)
    sums, failed = lm._sums_batch(spec, seed, n, samples, shards=shards,
                                  only_shard=shard)
    return shard, sums, failed


# ---------------------------------------------------------------------------
# Subcommands.
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    table = _load_table_arg(args)
    n = parse_count(args.n)
    sched = [2 ** k for k in range(0, int(math.log2(n)) + 1)] if args.dyadic \
        else list(range(max(n // max(args.checkpoints, 1), 1), n + 1,
                        max(n // max(args.checkpoints, 1), 1)))
    start = bl.sample_invariant(table, args.seed, 1)[0]
    summ = bl.birkhoff(table, start, n, sched)
    man = manifest_dict("simulate", {"table": table.to_config(), "n": n,
                                     "schedule": sched}, args.seed, 1,
                        outputs=[{"path": "trajectory.csv", "rows": len(summ.checkpoints)}])
    os.makedirs(args.out, exist_ok=True)
    bl.write_checkpoints_csv(os.path.join(args.out, "trajectory.csv"), summ)
    write_manifest(args.out, man, wall_time_s=None)
    print(f"simulate: {summ.steps} collisions, coboundary gap "
          f"{summ.coboundary_gap:.6f}")
    return 0


def cmd_corridors(args) -> int:
    table = _load_table_arg(args)
    cs = cor.enumerate_corridors(table, args.max_norm)
    ok, reason = cor.nondegeneracy_check(cs, table.d)
    out = {
        "corridors": [{"xi": list(c.xi), "width": c.width} for c in cs],
        "nondegenerate": ok,
        "reason": reason,
        "infinite_horizon": table.infinite_horizon,
    }
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "corridors.json"), "w") as fh:
        json.dump(out, fh, sort_keys=True, indent=2)
        fh.write("\n")
    write_manifest(args.out, manifest_dict(
        "corridors", {"table": table.to_config(), "max_norm": args.max_norm},
        args.seed, 1, outputs=[{"path": "corridors.json"}]))
    print(f"corridors: {len(cs)} directions, nondegenerate={ok}")
    return 0


def cmd_tails(args) -> int:
    spec = _source_spec(args)
    n = parse_count(args.n)
    stream = open_stream(spec, args.seed, 0)
    vals = stream.next_chunk(n)
    corridors = None
    if spec.kind == "lorentz":
        corridors = cor.enumerate_corridors(_load_table_arg(args), args.max_norm)
        est = cor.tail_fit(vals.astype(np.int64), corridors=corridors)
    else:
        est = cor.tail_fit(vals)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "tails.json"), "w") as fh:
        fh.write(est.to_json())
        fh.write("\n")
    # dyadic survival curve for the report
    norms = np.abs(vals[:, 0]) if vals.shape[1] == 1 else np.sqrt((vals ** 2).sum(1))
    rows = []
    t = 1.0
    while np.sum(norms > t) >= 10:
        rows.append((t, float(np.mean(norms > t))))
        t *= 2.0
    import csv as _csv
    with open(os.path.join(args.out, "survival.csv"), "w", newline="") as fh:
        w = _csv.writer(fh)
        w.writerow(["t", "survival"])
        for trow in rows:
            w.writerow([repr(trow[0]), repr(trow[1])])
    write_manifest(args.out, manifest_dict(
        "tails", {"source": spec.to_dict(), "n": n}, args.seed, 1,
        outputs=[{"path": "tails.json"}, {"path": "survival.csv", "rows": len(rows)}]))
    print(f"tails: alpha_hat={est.alpha_hat:.3f} (hill {est.alpha_hill:.3f}) "
          f"C_hat={est.C_hat:.4f}")
    if args.verify:
        ok = abs(est.alpha_hat - 2.0) <= 0.15
        for c in est.per_corridor:
            if c.slope is not None:
                ok = ok and abs(c.slope + 3.0) <= 0.2
        return 0 if ok else 3
    return 0


def cmd_normalizers(args) -> int:
    cfg = nz.NormalizerConfig(C=args.C, varsigma=args.varsigma)
    seq = nz.NormalizerSequence(cfg)
    n_max = parse_count(args.nmax)
    ns = [2 ** k for k in range(0, int(math.log2(n_max)) + 1)]
    os.makedirs(args.out, exist_ok=True)
    seq.to_csv(os.path.join(args.out, "normalizers.csv"), ns)
    info = {
        "crossover_log_n": seq.ordering_crossover(),
        "c_star_1": seq.c(1.0),
        "c_star_8": seq.c(8.0),
        "a_1": seq.a(1.0),
    }
    with open(os.path.join(args.out, "normalizers.json"), "w") as fh:
        json.dump(info, fh, sort_keys=True, indent=2)
        fh.write("\n")
    write_manifest(args.out, manifest_dict(
        "normalizers", {"C": args.C, "varsigma": args.varsigma, "nmax": n_max},
        args.seed, 1, outputs=[{"path": "normalizers.csv", "rows": len(ns)},
                               {"path": "normalizers.json"}]))
    print(f"normalizers: c*_1={info['c_star_1']:.6f} c*_8={info['c_star_8']:.6f}")
    if args.verify:
        ok = abs(info["c_star_1"] - 1.8482821312091784) < 1e-12 \
            and abs(info["c_star_8"] - 7.538529110851417) < 1e-12
        return 0 if ok else 3
    return 0


def cmd_series(args) -> int:
    cfg = nz.NormalizerConfig(C=args.C)
    a_fn = nz.AFunction(coeff=args.a_coeff, sigma_norm=args.sigma_norm)
    alphas = [float(t) for t in args.alpha_grid.split(",")]
    rep = nz.series_diagnostic(cfg, cfg, alphas, a_function=a_fn,
                               n_head=parse_count(args.n_head))
    hl0 = nz.hl0_verify(cfg, n_max=parse_count(args.n_head))
    ai = nz.appendix_integral(args.ymax)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "series.json"), "w") as fh:
        fh.write(rep.to_json())
        fh.write("\n")
    with open(os.path.join(args.out, "hl0.json"), "w") as fh:
        fh.write(hl0.to_json())
        fh.write("\n")
    with open(os.path.join(args.out, "appendix_integral.json"), "w") as fh:
        json.dump({"value": ai.value, "tail_bound": ai.tail_bound,
                   "y_max": ai.y_max}, fh, sort_keys=True, indent=2)
        fh.write("\n")
    write_manifest(args.out, manifest_dict(
        "series", {"C": args.C, "a_coeff": args.a_coeff,
                   "sigma_norm": args.sigma_norm, "alphas": alphas,
                   "ymax": args.ymax}, args.seed, 1,
        outputs=[{"path": "series.json"}, {"path": "hl0.json"},
                 {"path": "appendix_integral.json"}]))
    print(f"series: bracket=({rep.critical_lower}, {rep.critical_upper}) "
          f"hl0={hl0.verdicts()}")
    if args.verify:
        ok = (rep.critical_lower is not None and rep.critical_upper is not None
              and rep.critical_lower <= 1.0 <= rep.critical_upper
              and all(v == nz.CONVERGENT for v in hl0.verdicts().values()))
        return 0 if ok else 3
    return 0


def cmd_blocks(args) -> int:
    lo, hi = (parse_count(t) for t in args.n_range.split(".."))
    layouts = []
    for n in range(int(math.log2(lo)), int(math.log2(hi)) + 1):
        layouts.append(tr.block_decomposition(n, args.beta, args.eps1))
    os.makedirs(args.out, exist_ok=True)
    rows = sum(len(l.to_rows()) for l in layouts)
    tr.write_layout_csv(os.path.join(args.out, "blocks.csv"), layouts)
    write_manifest(args.out, manifest_dict(
        "blocks", {"n_range": args.n_range, "beta": args.beta, "eps1": args.eps1},
        args.seed, 1, outputs=[{"path": "blocks.csv", "rows": rows}]))
    ok = all(l.covers_exactly() for l in layouts)
    print(f"blocks: {len(layouts)} levels, exact partition={ok}")
    if args.verify:
        return 0 if ok else 3
    return 0


def cmd_moments(args) -> int:
    spec = _source_spec(args)
    m_grid = parse_grid(args.m_grid)
    rep = tr.fourth_moment_ratio(spec, args.seed, m_grid, r_rule=args.r_rule,
                                 shards=args.shards,
                                 blocks_per_shard=args.blocks)
    os.makedirs(args.out, exist_ok=True)
    rep.to_csv(os.path.join(args.out, "moments.csv"))
    write_manifest(args.out, manifest_dict(
        "moments", {"source": spec.to_dict(), "m_grid": m_grid,
                    "r_rule": args.r_rule, "shards": args.shards,
                    "blocks": args.blocks}, args.seed, 1,
        outputs=[{"path": "moments.csv", "rows": len(rep.cells)}]))
    print(f"moments: ratio4 trend slope={rep.trend_slope:+.4f} "
          f"(excess {rep.excess_trend_slope}) upward={rep.upward_trend}")
    if args.verify:
        return 0 if (rep.trend_slope is not None and abs(rep.trend_slope) <= 0.05) else 3
    return 0


def cmd_clt(args) -> int:
    spec = _source_spec(args)
    n = parse_count(args.n)
    samples = parse_count(args.samples)
    rep, z = lm.clt_experiment(spec, args.seed, n, samples, c_hat=args.c_hat,
                               normalizer=args.normalizer, shards=args.shards,
                               workers=_workers(args), return_samples=True)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "clt.json"), "w") as fh:
        fh.write(rep.to_json())
        fh.write("\n")
    # normalized-sum histogram per component, for the figure renderer
    import csv as _csv
    edges = np.linspace(-6.0, 6.0, 121)
    nrows = 0
    with open(os.path.join(args.out, "clt_hist.csv"), "w", newline="") as fh:
        w = _csv.writer(fh)
        w.writerow(["component", "bin_lo", "bin_hi", "count"])
        for c in range(z.shape[1]):
            hist, _ = np.histogram(z[:, c], bins=edges)
            for i, cnt in enumerate(hist):
                w.writerow([c, repr(float(edges[i])), repr(float(edges[i + 1])),
                            int(cnt)])
                nrows += 1
    write_manifest(args.out, manifest_dict(
        "clt", {"source": spec.to_dict(), "n": n, "samples": samples,
                "c_hat": args.c_hat, "normalizer": args.normalizer,
                "shards": args.shards}, args.seed, _workers(args),
        outputs=[{"path": "clt.json"}, {"path": "clt_hist.csv", "rows": nrows}]))
    print(f"clt: ks_fitted={['%.4f' % v for v in rep.ks_fitted]} "
          f"ks_reference={['%.4f' % v for v in rep.ks_reference]}")
    if args.verify:
        gate = 0.08 if spec.kind == "lorentz" else 0.05
        ok = max(rep.ks_fitted) < gate if args.normalizer == "superdiffusive" \
            else min(rep.ks_reference) > 0.1
        return 0 if ok else 3
    return 0


def cmd_lil(args) -> int:
    spec = _source_spec(args)
    n_max = parse_count(args.nmax)
    man = manifest_dict("lil", {"source": spec.to_dict(), "nmax": n_max,
                                "streams": args.streams,
                                "normalizer": args.normalizer, "C": args.C,
                                "scale": args.norm_scale,
                                "checkpoint_every": parse_count(args.checkpoint_every)},
                        args.seed, _workers(args))
    os.makedirs(args.out, exist_ok=True)
    write_manifest(args.out, man)   # present from the start so resume can find it
    t0 = time.time()
    res = run_lil_command(spec, args.seed, n_max, args.streams, args.normalizer,
                          args.C, args.norm_scale, _workers(args), args.out,
                          args.checkpoint, parse_count(args.checkpoint_every),
                          args.interrupt_after, man)
    if res is None:
        return 0   # interrupted with checkpoint saved
    report, summary = res
    man["outputs"] = [{"path": "lil_records.csv",
                       "rows": report.records.shape[0] * report.records.shape[1]},
                      {"path": "lil_summary.json"}]
    write_manifest(args.out, man, wall_time_s=time.time() - t0)
    print(f"lil: median final record {summary['median_final']:.4f} "
          f"monotone={summary['monotone']}")
    if args.verify:
        lo, hi = (0.6, 1.3) if spec.kind == "gauss" else (0.4, 1.6)
        ok = summary["monotone"] and lo <= summary["median_final"] <= hi
        return 0 if ok else 3
    return 0


def cmd_resume(args) -> int:
    man = read_manifest(args.out)
    if man["command"] != "lil":
        raise SuperdiffError("resume currently supports lil runs")
    cfg = man["config"]
    spec = SourceSpec(**cfg["source"])
    res = run_lil_command(spec, man["seed"], cfg["nmax"], cfg["streams"],
                          cfg["normalizer"], cfg["C"], cfg["scale"],
                          _workers(args), args.out, args.checkpoint,
                          cfg["checkpoint_every"], args.interrupt_after, man)
    if res is None:
        return 0
    report, summary = res
    man["outputs"] = [{"path": "lil_records.csv",
                       "rows": report.records.shape[0] * report.records.shape[1]},
                      {"path": "lil_summary.json"}]
    write_manifest(args.out, man)
    print(f"lil (resumed): median final record {summary['median_final']:.4f}")
    return 0


def cmd_mixing(args) -> int:
    spec = _source_spec(args)
    qs = parse_grid(args.q_grid)
    probe = lm.mixing_decay(spec, args.seed, R=args.R, q_grid=qs,
                            shards=args.shards,
                            n_per_shard=parse_count(args.n_per_shard))
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "mixing.json"), "w") as fh:
        json.dump({"R": probe.R, "q_grid": probe.q_grid,
                   "auto": probe.auto.tolist(), "auto_se": probe.auto_se.tolist(),
                   "sign_corr": probe.sign_corr.tolist(),
                   "second_moment": probe.second_moment,
                   "gamma_hat": probe.gamma_hat, "c3_hat": probe.c3_hat,
                   "decayed": probe.decayed}, fh, sort_keys=True, indent=2)
        fh.write("\n")
    write_manifest(args.out, manifest_dict(
        "mixing", {"source": spec.to_dict(), "R": args.R, "q_grid": qs,
                   "shards": args.shards}, args.seed, 1,
        outputs=[{"path": "mixing.json"}]))
    print(f"mixing: decayed={probe.decayed} gamma_hat={probe.gamma_hat}")
    if args.verify:
        return 0 if probe.decayed else 3
    return 0


def cmd_oracle_suite(args) -> int:
    """Cross-module regression battery on the independent reference model."""
    seed = args.seed
    spec = SourceSpec.pareto()
    checks = []

    def add(name, value, expect, tol):
        ok = abs(value - expect) <= tol
        checks.append({"name": name, "value": value, "expect": expect,
                       "tol": tol, "ok": bool(ok)})

    cfgo = ParetoSymConfig(scale=1.0, seed=seed)
    _, m2, m4 = oracle_truncated_moments(cfgo, math.e)
    add("second_moment_closed_form", m2, 2.0, 0.0)
    cells = tr.truncated_cov(spec, seed, m=10 ** 4, r_values=[16, 64],
                             shards=6, blocks_per_shard=48)
    for c in cells:
        add(f"cov_ratio_R{int(c.R)}", float(np.mean(np.diag(c.ratio))), 2.0,
            3.0 * max(c.se_ratio, 0.05))
    rep = tr.fourth_moment_ratio(spec, seed, [64], r_rule="m^0.6", shards=6,
                                 blocks_per_shard=512)
    cell = rep.cells[0]
    closed = (cell.R ** 2 - 1 + 3 * (64 - 1) * (2 * math.log(cell.R)) ** 2) / cell.R ** 2
    add("fourth_moment_m64", cell.ratio4, closed, 3.0 * max(cell.se4 / (64 * cell.R ** 2), 0.05 * closed))
    clt = lm.clt_experiment(spec, seed, n=4096, samples=4096, c_hat=1.0)
    add("clt_ks_fitted", max(clt.ks_fitted), 0.0, 0.05)
    res = tr.band_second_moment(spec, seed, lo=16.0, hi=256.0, n_values=[2048],
                                shards=6, blocks_per_shard=64)
    add("band_second_moment", res[0].ratio, 2.0, 3.0 * max(res[0].se, 0.05))
    ok = all(c["ok"] for c in checks)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "oracle_suite.json"), "w") as fh:
        json.dump({"checks": checks, "ok": ok}, fh, sort_keys=True, indent=2)
        fh.write("\n")
    write_manifest(args.out, manifest_dict("oracle-suite", {}, seed, 1,
                                           outputs=[{"path": "oracle_suite.json"}]))
    print(f"oracle-suite: {'PASS' if ok else 'FAIL'} "
          f"({sum(c['ok'] for c in checks)}/{len(checks)})")
    return 0 if ok or not args.verify else 3


def cmd_report_data(args) -> int:
    """Produce the standard artifact bundle the figure renderer consumes."""
    spec = _source_spec(args)
    base = args.out
    rc = 0
    sub = argparse.Namespace(**vars(args))
    sub.out = os.path.join(base, "tails")
    sub.n = args.n
    sub.max_norm = 5
    rc |= cmd_tails(sub)
    sub = argparse.Namespace(**vars(args))
    sub.out = os.path.join(base, "clt")
    sub.samples = "2048"
    sub.c_hat = 1.0 if spec.kind != "lorentz" else 0.457
    sub.normalizer = "superdiffusive"
    sub.shards = 8
    sub.n = "4096"
    rc |= cmd_clt(sub)
    sub = argparse.Namespace(**vars(args))
    sub.out = os.path.join(base, "lil")
    sub.nmax = "2^16"
    sub.streams = 16
    sub.normalizer = "c_star" if spec.kind != "gauss" else "classical"
    sub.C = 1.0
    sub.norm_scale = 1.0
    sub.checkpoint = None
    sub.checkpoint_every = "2^20"
    sub.interrupt_after = None
    rc |= cmd_lil(sub)
    sub = argparse.Namespace(**vars(args))
    sub.out = os.path.join(base, "moments")
    sub.m_grid = "2^6..2^10"
    sub.r_rule = "m^0.6"
    sub.shards = 4
    sub.blocks = 64
    rc |= cmd_moments(sub)
    sub = argparse.Namespace(**vars(args))
    sub.out = os.path.join(base, "series")
    sub.C = 1.0
    sub.a_coeff = 2.0
    sub.sigma_norm = 1.0
    sub.alpha_grid = "0.8,1.0,1.2"
    sub.n_head = "2^16"
    sub.ymax = 50.0
    rc |= cmd_series(sub)
    return rc


# ---------------------------------------------------------------------------
# Parser.
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="superdiff",
                                description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, source=False):
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--workers", type=int, default=None)
        sp.add_argument("--verify", action="store_true",
                        help="gate exit code on acceptance thresholds")
        sp.add_argument("--table", default=None, help="table JSON path")
        if source:
            sp.add_argument("--source", default="lorentz",
                            choices=["lorentz", "pareto", "gauss"])
            sp.add_argument("--scale", type=float, default=1.0)
            sp.add_argument("--d", type=int, default=1)

    sp = sub.add_parser("simulate", help="one trajectory with checkpoints")
    common(sp)
    sp.add_argument("--n", default="2^20")
    sp.add_argument("--checkpoints", type=int, default=64)
    sp.add_argument("--dyadic", action="store_true")
    sp.set_defaults(fn=cmd_simulate)

    sp = sub.add_parser("corridors", help="corridor enumeration")
    common(sp)
    sp.add_argument("--max-norm", type=int, default=8)
    sp.set_defaults(fn=cmd_corridors)

    sp = sub.add_parser("tails", help="heavy-tail fit")
    common(sp, source=True)
    sp.add_argument("--n", default="10^7")
    sp.add_argument("--max-norm", type=int, default=5)
    sp.set_defaults(fn=cmd_tails)

    sp = sub.add_parser("normalizers", help="normalizer sequence dump")
    common(sp)
    sp.add_argument("--C", type=float, default=1.0)
    sp.add_argument("--varsigma", type=float, default=0.1)
    sp.add_argument("--nmax", default="2^20")
    sp.set_defaults(fn=cmd_normalizers)

    sp = sub.add_parser("series", help="series criterion + summability checks")
    common(sp)
    sp.add_argument("--C", type=float, default=1.0)
    sp.add_argument("--a-coeff", type=float, default=2.0)
    sp.add_argument("--sigma-norm", type=float, default=1.0)
    sp.add_argument("--alpha-grid", default="0.8,1.0,1.2")
    sp.add_argument("--n-head", default="2^20")
    sp.add_argument("--ymax", type=float, default=50.0)
    sp.set_defaults(fn=cmd_series)

    sp = sub.add_parser("blocks", help="dyadic block decomposition dump")
    common(sp)
    sp.add_argument("--n-range", default="2^8..2^14")
    sp.add_argument("--beta", type=float, default=0.5)
    sp.add_argument("--eps1", type=float, default=0.25)
    sp.set_defaults(fn=cmd_blocks)

    sp = sub.add_parser("moments", help="truncated fourth-moment probe")
    common(sp, source=True)
    sp.add_argument("--m-grid", default="2^8..2^14")
    sp.add_argument("--r-rule", default="m^0.6")
    sp.add_argument("--shards", type=int, default=8)
    sp.add_argument("--blocks", type=int, default=64)
    sp.set_defaults(fn=cmd_moments)

    sp = sub.add_parser("clt", help="distributional limit experiment")
    common(sp, source=True)
    sp.add_argument("--n", default="10^4")
    sp.add_argument("--samples", default="10^4")
    sp.add_argument("--c-hat", type=float, default=1.0)
    sp.add_argument("--normalizer", default="superdiffusive",
                    choices=["superdiffusive", "diffusive"])
    sp.add_argument("--shards", type=int, default=8)
    sp.set_defaults(fn=cmd_clt)

    sp = sub.add_parser("lil", help="record curves at dyadic checkpoints")
    common(sp, source=True)
    sp.add_argument("--nmax", default="2^24")
    sp.add_argument("--streams", type=int, default=64)
    sp.add_argument("--normalizer", default="c_star",
                    choices=["c_star", "classical", "sqrt"])
    sp.add_argument("--C", type=float, default=1.0)
    sp.add_argument("--norm-scale", type=float, default=1.0,
                    help="multiplier on the normalizer sequence")
    sp.add_argument("--checkpoint", default=None, help="checkpoint directory")
    sp.add_argument("--checkpoint-every", default="2^20")
    sp.add_argument("--interrupt-after", type=int, default=None,
                    help=argparse.SUPPRESS)   # testing hook
    sp.set_defaults(fn=cmd_lil)

    sp = sub.add_parser("resume", help="continue a checkpointed run")
    common(sp)
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--interrupt-after", type=int, default=None,
                    help=argparse.SUPPRESS)
    sp.set_defaults(fn=cmd_resume)

    sp = sub.add_parser("mixing", help="correlation-decay probe")
    common(sp, source=True)
    sp.add_argument("--R", type=float, default=64.0)
    sp.add_argument("--q-grid", default="0,1,2,4,8,16,32,64")
    sp.add_argument("--shards", type=int, default=8)
    sp.add_argument("--n-per-shard", default="2^20")
    sp.set_defaults(fn=cmd_mixing)

    sp = sub.add_parser("oracle-suite", help="closed-form regression battery")
    common(sp)
    sp.set_defaults(fn=cmd_oracle_suite)

    sp = sub.add_parser("report-data", help="standard bundle for the renderer")
    common(sp, source=True)
    sp.add_argument("--n", default="10^6")
    sp.set_defaults(fn=cmd_report_data)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    try:
        return args.fn(args)
    except (SuperdiffError, ValueError, FileNotFoundError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:   # runtime failure
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
