"""Uniform stream interface over the three data sources.

Probes and experiments consume chunked (n, d) float arrays and never care
whether values come from the collision map, the heavy-tailed reference
model, or its Gaussian control twin.  Streams are addressed by
(master seed, stream id), produce identical output regardless of worker
placement, and expose a small serializable state for checkpoint/resume.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import billiard as bl
from . import oracle as orc

KINDS = ("lorentz", "pareto", "gauss")


@dataclass(frozen=True)
class SourceSpec:
    kind: str
    d: int = 1
    table_config: tuple = ()        # JSON-able scatterer config for "lorentz"
    scale: float = 1.0              # tail scale for "pareto"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown source kind {self.kind!r}")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "d": self.d, "scale": self.scale,
                "table_config": self.table_config}

    @classmethod
    def lorentz(cls, table_config: dict) -> "SourceSpec":
        cfg = _freeze(table_config)
        return cls(kind="lorentz", d=int(table_config.get("d", 2)),
                   table_config=cfg)

    @classmethod
    def pareto(cls, scale: float = 1.0, d: int = 1) -> "SourceSpec":
        return cls(kind="pareto", d=d, scale=scale)

    @classmethod
    def gauss(cls, d: int = 1) -> "SourceSpec":
        return cls(kind="gauss", d=d)


def _freeze(obj):
    if isinstance(obj, dict):
        return tuple(sorted((k, _freeze(v)) for k, v in obj.items()))
    if isinstance(obj, (list, tuple)):
        return tuple(_freeze(v) for v in obj)
    return obj


def _thaw(obj):
    if isinstance(obj, tuple) and obj and isinstance(obj[0], tuple) and len(obj[0]) == 2 \
            and isinstance(obj[0][0], str):
        return {k: _thaw(v) for k, v in obj}
    if isinstance(obj, tuple):
        return [_thaw(v) for v in obj]
    return obj


def stream_seed(master_seed: int, stream_id: int) -> int:
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(stream_id),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


_TABLE_CACHE: dict = {}


def table_for(spec: SourceSpec) -> bl.BilliardTable:
    key = spec.table_config
    if key not in _TABLE_CACHE:
        _TABLE_CACHE[key] = bl.build_table(_thaw(key))
    return _TABLE_CACHE[key]


class ParetoStream:
    def __init__(self, spec: SourceSpec, seed: int, stream_id: int, index: int = 0):
        self.spec = spec
        self.cfg = orc.ParetoSymConfig(scale=spec.scale,
                                       seed=stream_seed(seed, stream_id),
                                       d=spec.d)
        self.index = index

    @property
    def d(self):
        return self.spec.d

    def next_chunk(self, n: int) -> np.ndarray:
        out = orc.sample_pareto_sym(self.cfg, n, start=self.index)
        self.index += n
        return out.reshape(n, self.d)

    def state(self) -> dict:
        return {"index": self.index}

    def restore(self, state: dict):
        self.index = int(state["index"])


class GaussStream:
    def __init__(self, spec: SourceSpec, seed: int, stream_id: int, index: int = 0):
        self.spec = spec
        self.cfg = orc.ParetoSymConfig(scale=1.0, seed=stream_seed(seed, stream_id),
                                       d=spec.d)
        self.index = index

    @property
    def d(self):
        return self.spec.d

    def next_chunk(self, n: int) -> np.ndarray:
        out = orc.sample_gaussian_control(self.cfg, n, start=self.index)
        self.index += n
        return out.reshape(n, self.d)

    def state(self) -> dict:
        return {"index": self.index}

    def restore(self, state: dict):
        self.index = int(state["index"])


class LorentzStream:
    def __init__(self, spec: SourceSpec, seed: int, stream_id: int,
                 point: bl.PhasePoint | None = None, step: int = 0):
        self.spec = spec
        self.table = table_for(spec)
        if point is None:
            batch = bl.sample_invariant(self.table, stream_seed(seed, stream_id), 1)
            point = batch[0]
        self.point = point
        self.step = step

    @property
    def d(self):
        return self.table.d

    def next_chunk(self, n: int) -> np.ndarray:
        kap, nxt = bl.kappa_stream(self.table, self.point, n)
        self.point = nxt
        self.step += n
        return kap.astype(np.float64)

    def state(self) -> dict:
        return {"scatterer": self.point.scatterer, "r": self.point.r,
                "phi": self.point.phi, "step": self.step}

    def restore(self, state: dict):
        self.point = bl.PhasePoint(int(state["scatterer"]), float(state["r"]),
                                   float(state["phi"]))
        self.step = int(state["step"])


def open_stream(spec: SourceSpec, seed: int, stream_id: int):
    if spec.kind == "pareto":
        return ParetoStream(spec, seed, stream_id)
    if spec.kind == "gauss":
        return GaussStream(spec, seed, stream_id)
    return LorentzStream(spec, seed, stream_id)
