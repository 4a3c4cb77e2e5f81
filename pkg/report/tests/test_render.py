"""Renderer contract: determinism, schema gating, read-only inputs."""

import hashlib
import json
import os
import shutil
import subprocess
import sys

import pytest

from superdiff_report.cli import run
from superdiff_report.render import (FigureSpec, MissingInput, SchemaMismatch,
                                     render)

HERE = os.path.dirname(__file__)


@pytest.fixture(scope="session")
def bundle(tmp_path_factory):
    """A small artifact bundle produced by the primary package's CLI."""
    base = tmp_path_factory.mktemp("bundle")
    cmds = [
        ["tails", "--source", "pareto", "--n", "10^5", "--seed", "3",
         "--out", str(base / "tails")],
        ["clt", "--source", "pareto", "--n", "2^10", "--samples", "2^11",
         "--seed", "3", "--out", str(base / "clt")],
        ["lil", "--source", "pareto", "--nmax", "2^12", "--streams", "8",
         "--seed", "5", "--out", str(base / "lil")],
        ["moments", "--source", "pareto", "--m-grid", "2^6..2^9",
         "--blocks", "32", "--shards", "4", "--seed", "7",
         "--out", str(base / "moments")],
        ["series", "--n-head", "2^12", "--out", str(base / "series")],
    ]
    for cmd in cmds:
        proc = subprocess.run([sys.executable, "-m", "superdiff.cli"] + cmd,
                              capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
    return base


def _dir_snapshot(path):
    out = {}
    for root, _dirs, files in os.walk(path):
        for f in files:
            p = os.path.join(root, f)
            out[p] = hashlib.sha256(open(p, "rb").read()).hexdigest()
    return out


KIND_DIRS = [("tail", "tails"), ("clt", "clt"), ("lil", "lil"),
             ("moments", "moments"), ("series", "series")]


@pytest.mark.parametrize("kind,sub", KIND_DIRS)
def test_render_each_kind(bundle, tmp_path, kind, sub):
    spec = FigureSpec(kind=kind, in_dir=str(bundle / sub),
                      out_dir=str(tmp_path / kind))
    paths = render(spec)
    assert paths
    for p in paths:
        assert os.path.getsize(p) > 4096
        assert p.endswith(".png")


@pytest.mark.parametrize("kind,sub", KIND_DIRS)
def test_pixel_identical_reruns(bundle, tmp_path, kind, sub):
    a = tmp_path / "a"
    b = tmp_path / "b"
    for out in (a, b):
        render(FigureSpec(kind=kind, in_dir=str(bundle / sub),
                          out_dir=str(out)))
    fa = sorted(os.listdir(a))
    fb = sorted(os.listdir(b))
    assert fa == fb
    for f in fa:
        assert (a / f).read_bytes() == (b / f).read_bytes()


def test_inputs_untouched(bundle, tmp_path):
    before = _dir_snapshot(bundle / "lil")
    render(FigureSpec(kind="lil", in_dir=str(bundle / "lil"),
                      out_dir=str(tmp_path / "out")))
    assert _dir_snapshot(bundle / "lil") == before


def test_wrong_kind_is_schema_mismatch(bundle, tmp_path):
    with pytest.raises(SchemaMismatch):
        render(FigureSpec(kind="clt", in_dir=str(bundle / "lil"),
                          out_dir=str(tmp_path / "x")))


def test_wrong_schema_version_rejected(bundle, tmp_path):
    clone = tmp_path / "clone"
    shutil.copytree(bundle / "clt", clone)
    man = json.loads((clone / "manifest.json").read_text())
    man["schema_version"] = 99
    (clone / "manifest.json").write_text(json.dumps(man))
    with pytest.raises(SchemaMismatch):
        render(FigureSpec(kind="clt", in_dir=str(clone),
                          out_dir=str(tmp_path / "x")))


def test_missing_input_detected(bundle, tmp_path):
    clone = tmp_path / "clone2"
    shutil.copytree(bundle / "tails", clone)
    os.remove(clone / "survival.csv")
    with pytest.raises(MissingInput):
        render(FigureSpec(kind="tail", in_dir=str(clone),
                          out_dir=str(tmp_path / "x")))


def test_header_drift_rejected(bundle, tmp_path):
    clone = tmp_path / "clone3"
    shutil.copytree(bundle / "moments", clone)
    lines = (clone / "moments.csv").read_bytes().splitlines(keepends=True)
    (clone / "moments.csv").write_bytes(b"m,R,whatever\r\n" + b"".join(lines[1:]))
    with pytest.raises(SchemaMismatch):
        render(FigureSpec(kind="moments", in_dir=str(clone),
                          out_dir=str(tmp_path / "x")))


def test_caption_embeds_manifest_hash(bundle, tmp_path):
    # moving the same inputs under a fresh manifest hash changes the pixels
    clone = tmp_path / "clone4"
    shutil.copytree(bundle / "lil", clone)
    man = json.loads((clone / "manifest.json").read_text())
    man["seed"] = man["seed"] + 1
    (clone / "manifest.json").write_text(json.dumps(man))
    a = render(FigureSpec(kind="lil", in_dir=str(bundle / "lil"),
                          out_dir=str(tmp_path / "ca")))[0]
    b = render(FigureSpec(kind="lil", in_dir=str(clone),
                          out_dir=str(tmp_path / "cb")))[0]
    assert open(a, "rb").read() != open(b, "rb").read()


class TestCli:
    def test_happy_path(self, bundle, tmp_path):
        rc = run(["render", "--kind", "lil", "--in", str(bundle / "lil"),
                  "--out", str(tmp_path / "figs")])
        assert rc == 0
        assert os.path.exists(tmp_path / "figs" / "lil.png")

    def test_mismatch_exit_code(self, bundle, tmp_path):
        rc = run(["render", "--kind", "tail", "--in", str(bundle / "lil"),
                  "--out", str(tmp_path / "figs2")])
        assert rc == 1

    def test_bad_kind_usage(self, tmp_path):
        rc = run(["render", "--kind", "nope", "--in", "x", "--out", "y"])
        assert rc == 1
