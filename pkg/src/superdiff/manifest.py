"""Run manifests and resumable checkpoints.

A manifest pins everything that determines the output bytes: command,
configuration snapshot, master seed, stream/shard layout and code version.
Wall-clock fields are recorded but excluded from the determinism contract.
Checkpoints carry per-stream simulator state plus progress counters; their
payload is content-hashed so a flipped byte is detected at load.
"""

from __future__ import annotations

import hashlib
import json
import os
import pickle

from . import __version__
from .errors import CorruptCheckpoint, VersionMismatch

MANIFEST_NAME = "manifest.json"
SCHEMA_VERSION = 1


def manifest_dict(command: str, config: dict, seed: int, workers: int,
                  outputs: list | None = None) -> dict:
    return {
        "command": command,
        "config": config,
        "seed": int(seed),
        "workers": int(workers),
        "version": __version__,
        "schema_version": SCHEMA_VERSION,
        "outputs": outputs or [],
    }


def write_manifest(out_dir: str, man: dict, wall_time_s: float | None = None) -> str:
    os.makedirs(out_dir, exist_ok=True)
    body = dict(man)
    if wall_time_s is not None:
        body["wall_time_s"] = wall_time_s   # informational; not deterministic
    path = os.path.join(out_dir, MANIFEST_NAME)
    with open(path, "w") as fh:
        json.dump(body, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return path


def read_manifest(out_dir: str) -> dict:
    with open(os.path.join(out_dir, MANIFEST_NAME)) as fh:
        return json.load(fh)


def manifest_key(man: dict) -> str:
    """Hash of the deterministic part of a manifest."""
    body = {k: v for k, v in man.items() if k not in ("wall_time_s", "outputs")}
    return hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()


def validate_outputs(out_dir: str) -> list:
    """Check that every declared CSV row count matches the file on disk."""
    man = read_manifest(out_dir)
    problems = []
    for entry in man.get("outputs", []):
        path = os.path.join(out_dir, entry["path"])
        if not os.path.exists(path):
            problems.append(f"missing output {entry['path']}")
            continue
        if entry.get("rows") is not None and entry["path"].endswith(".csv"):
            with open(path) as fh:
                nrows = sum(1 for _ in fh) - 1   # header
            if nrows != entry["rows"]:
                problems.append(
                    f"{entry['path']}: {nrows} rows, manifest declares {entry['rows']}")
    return problems


# ---------------------------------------------------------------------------
# Checkpoints.
# ---------------------------------------------------------------------------

def save_checkpoint(path: str, state: dict, run_key: str) -> None:
    payload = pickle.dumps({"version": __version__, "run_key": run_key,
                            "state": state}, protocol=4)
    digest = hashlib.sha256(payload).hexdigest().encode()
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(digest + b"\n" + payload)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def load_checkpoint(path: str, run_key: str | None = None) -> dict:
    with open(path, "rb") as fh:
        blob = fh.read()
    digest, _, payload = blob.partition(b"\n")
    if hashlib.sha256(payload).hexdigest().encode() != digest:
        raise CorruptCheckpoint(f"content hash mismatch in {path}")
    data = pickle.loads(payload)
    if data["version"] != __version__:
        raise VersionMismatch(
            f"checkpoint from version {data['version']}, running {__version__}")
    if run_key is not None and data["run_key"] != run_key:
        raise VersionMismatch("checkpoint belongs to a different run layout")
    return data
