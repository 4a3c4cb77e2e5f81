"""Figure rendering from superdiff artifact directories.

Each figure kind consumes the outputs of the matching producer command and
checks the manifest before touching anything else: wrong command or wrong
schema version is a SchemaMismatch, absent files are MissingInput.
Rendering is deterministic on a fixed toolchain (fixed figure geometry,
fonts and dpi; no timestamps), and the caption carries the first 16 hex
digits of the producing manifest's deterministic hash.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from dataclasses import dataclass, field

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

SCHEMA_VERSION = 1
KINDS = ("tail", "clt", "lil", "moments", "series")
KIND_COMMANDS = {"tail": "tails", "clt": "clt", "lil": "lil",
                 "moments": "moments", "series": "series"}


class SchemaMismatch(Exception):
    """Input does not match the schema the renderer expects."""


class MissingInput(Exception):
    """A required input file is absent."""


@dataclass
class FigureSpec:
    kind: str
    in_dir: str
    out_dir: str
    dpi: int = 120
    style: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaMismatch(f"unknown figure kind {self.kind!r}")


def _manifest_hash(man: dict) -> str:
    body = {k: v for k, v in man.items() if k not in ("wall_time_s", "outputs")}
    return hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()


def _load_manifest(spec: FigureSpec) -> tuple:
    path = os.path.join(spec.in_dir, "manifest.json")
    if not os.path.exists(path):
        raise MissingInput(f"no manifest.json in {spec.in_dir}")
    with open(path) as fh:
        man = json.load(fh)
    if man.get("schema_version") != SCHEMA_VERSION:
        raise SchemaMismatch(
            f"schema version {man.get('schema_version')} (renderer expects "
            f"{SCHEMA_VERSION})")
    if man.get("command") != KIND_COMMANDS[spec.kind]:
        raise SchemaMismatch(
            f"directory holds {man.get('command')!r} outputs, not those of "
            f"{KIND_COMMANDS[spec.kind]!r}")
    return man, _manifest_hash(man)[:16]


def _read_csv(spec: FigureSpec, name: str, columns: list) -> dict:
    path = os.path.join(spec.in_dir, name)
    if not os.path.exists(path):
        raise MissingInput(f"missing {name} in {spec.in_dir}")
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        if header != columns:
            raise SchemaMismatch(f"{name} header {header} != {columns}")
        rows = [r for r in rd if r]
    return {c: [row[i] for row in rows] for i, c in enumerate(columns)}


def _read_json(spec: FigureSpec, name: str, required_keys: tuple) -> dict:
    path = os.path.join(spec.in_dir, name)
    if not os.path.exists(path):
        raise MissingInput(f"missing {name} in {spec.in_dir}")
    with open(path) as fh:
        data = json.load(fh)
    for k in required_keys:
        if k not in data:
            raise SchemaMismatch(f"{name} lacks key {k!r}")
    return data


def _new_axes(caption: str):
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    fig.text(0.01, 0.005, caption, fontsize=6, family="monospace",
             color="0.35")
    return fig, ax


def _finish(fig, ax, spec: FigureSpec, stem: str) -> str:
    os.makedirs(spec.out_dir, exist_ok=True)
    out = os.path.join(spec.out_dir, f"{stem}.png")
    fig.tight_layout(rect=(0, 0.02, 1, 1))
    fig.savefig(out, dpi=spec.dpi, metadata={"Software": "superdiff-report"})
    plt.close(fig)
    return out


def render(spec: FigureSpec) -> list:
    """Render the figure(s) for one artifact directory; returns paths."""
    man, mhash = _load_manifest(spec)
    caption = f"kind={spec.kind}  manifest={mhash}  seed={man.get('seed')}"
    return {
        "tail": _render_tail,
        "clt": _render_clt,
        "lil": _render_lil,
        "moments": _render_moments,
        "series": _render_series,
    }[spec.kind](spec, caption)


def _render_tail(spec: FigureSpec, caption: str) -> list:
    surv = _read_csv(spec, "survival.csv", ["t", "survival"])
    info = _read_json(spec, "tails.json", ("alpha_hat", "C_hat"))
    t = np.array([float(v) for v in surv["t"]])
    s = np.array([float(v) for v in surv["survival"]])
    fig, ax = _new_axes(caption)
    ax.loglog(t, s, "o", ms=4, color="#27567b", label="empirical survival")
    alpha = info["alpha_hat"]
    lo, hi = info.get("fit_window", [8.0, t.max()])
    anchor = np.interp(lo, t, s)
    tt = np.geomspace(max(lo, t.min()), t.max(), 64)
    ax.loglog(tt, anchor * (tt / lo) ** (-alpha), "-", color="#c25b4e",
              label=f"slope {-alpha:.3f}")
    ax.axvspan(lo, hi, color="0.92", zorder=0)
    ax.set_xlabel("threshold t")
    ax.set_ylabel("P(|jump| > t)")
    ax.set_title(f"tail law: alpha = {alpha:.3f}, C = {info['C_hat']:.4f}")
    ax.legend(frameon=False, fontsize=8)
    return [_finish(fig, ax, spec, "tail")]


def _render_clt(spec: FigureSpec, caption: str) -> list:
    hist = _read_csv(spec, "clt_hist.csv", ["component", "bin_lo", "bin_hi",
                                            "count"])
    info = _read_json(spec, "clt.json", ("ks_fitted", "sigma_hat", "samples"))
    comp = np.array([int(v) for v in hist["component"]])
    lo = np.array([float(v) for v in hist["bin_lo"]])
    hi = np.array([float(v) for v in hist["bin_hi"]])
    cnt = np.array([int(v) for v in hist["count"]])
    out = []
    for c in sorted(set(comp.tolist())):
        sel = comp == c
        centers = 0.5 * (lo[sel] + hi[sel])
        width = hi[sel] - lo[sel]
        density = cnt[sel] / max(cnt[sel].sum(), 1) / width
        fig, ax = _new_axes(caption)
        ax.bar(centers, density, width=width, color="#9bb8cf",
               edgecolor="white", linewidth=0.3, label="normalized sums")
        sig = math.sqrt(max(info["sigma_hat"][c][c], 1e-12))
        xs = np.linspace(centers.min(), centers.max(), 256)
        ax.plot(xs, np.exp(-xs ** 2 / (2 * sig * sig))
                / math.sqrt(2 * math.pi) / sig, color="#c25b4e",
                label=f"gaussian, sigma={sig:.3f}")
        ax.set_xlabel("S_n / a_n")
        ax.set_ylabel("density")
        ax.set_title(f"component {c}: KS = {info['ks_fitted'][c]:.4f} "
                     f"({info['samples']} samples)")
        ax.legend(frameon=False, fontsize=8)
        out.append(_finish(fig, ax, spec, f"clt_component{c}"))
    return out


def _render_lil(spec: FigureSpec, caption: str) -> list:
    rec = _read_csv(spec, "lil_records.csv", ["stream", "k", "n", "record"])
    stream = np.array([int(v) for v in rec["stream"]])
    n = np.array([float(v) for v in rec["n"]])
    r = np.array([float(v) for v in rec["record"]])
    fig, ax = _new_axes(caption)
    for sid in sorted(set(stream.tolist())):
        sel = stream == sid
        ax.semilogx(n[sel], r[sel], drawstyle="steps-post", color="#27567b",
                    alpha=0.25, lw=0.8)
    ks = sorted(set(n.tolist()))
    med = [float(np.median(r[n == k])) for k in ks]
    ax.semilogx(ks, med, color="#c25b4e", lw=2.0, label="median record")
    ax.axhline(1.0, color="0.3", lw=1.0, ls="--", label="reference  a = 1")
    ax.set_xlabel("steps n")
    ax.set_ylabel("max |S_m| / c*(m),  m <= n")
    ax.set_title("record curves at dyadic checkpoints")
    ax.legend(frameon=False, fontsize=8)
    return [_finish(fig, ax, spec, "lil")]


def _render_moments(spec: FigureSpec, caption: str) -> list:
    mom = _read_csv(spec, "moments.csv", ["m", "R", "est4", "se4", "ratio4",
                                          "cov11", "cov12", "cov22", "ratio2"])
    m = np.array([float(v) for v in mom["m"]])
    r4 = np.array([float(v) for v in mom["ratio4"]])
    r2 = np.array([float(v) for v in mom["ratio2"]])
    fig, ax = _new_axes(caption)
    ax.loglog(m, r4, "o-", color="#27567b", label="fourth moment / (m R^2)")
    ax.loglog(m, r2, "s-", color="#5b8c5a", label="covariance / (m ln R)")
    slope = np.polyfit(np.log(m), np.log(np.maximum(r4, 1e-300)), 1)[0] \
        if len(m) > 1 else 0.0
    ax.set_xlabel("block length m")
    ax.set_ylabel("ratio")
    ax.set_title(f"truncated moment ratios (fourth-moment trend "
                 f"{slope:+.3f}/decade of m)")
    ax.legend(frameon=False, fontsize=8)
    return [_finish(fig, ax, spec, "moments")]


def _render_series(spec: FigureSpec, caption: str) -> list:
    info = _read_json(spec, "series.json", ("per_alpha",))
    fig, ax = _new_axes(caption)
    palette = ("#27567b", "#c25b4e", "#5b8c5a", "#8c6d31", "#7b4f9e")
    for i, d in enumerate(info["per_alpha"]):
        partials = d.get("head_partials") or []
        if not partials:
            continue
        ns = [p[0] for p in partials]
        vs = [p[1] for p in partials]
        ax.semilogx(ns, vs, "o-", ms=3, color=palette[i % len(palette)],
                    label=f"alpha={d['alpha']}: {d['verdict']}")
    ax.set_xlabel("N")
    ax.set_ylabel("partial sum")
    ax.set_title("criterion series: exact head partial sums")
    ax.legend(frameon=False, fontsize=8)
    out = [_finish(fig, ax, spec, "series")]
    hpath = os.path.join(spec.in_dir, "hl0.json")
    if os.path.exists(hpath):
        hl0 = _read_json(spec, "hl0.json", ("series",))
        fig, ax = _new_axes(caption)
        for i, (name, d) in enumerate(sorted(hl0["series"].items())):
            partials = d.get("head_partials") or []
            if not partials:
                continue
            ax.semilogx([p[0] for p in partials], [p[1] for p in partials],
                        "o-", ms=3, color=palette[i % len(palette)],
                        label=f"{name}: {d['verdict']}")
        ax.set_xlabel("N")
        ax.set_ylabel("partial sum")
        ax.set_title("summability checks on the slowly varying factor")
        ax.legend(frameon=False, fontsize=8)
        out.append(_finish(fig, ax, spec, "series_hl0"))
    return out
