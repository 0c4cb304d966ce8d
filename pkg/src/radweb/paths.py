"""Polyline paths and path ensembles shared by every construction."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

PROVENANCES = ("gamma", "gamma_prime", "gamma_double_prime", "hat_gamma",
               "strip", "rescaled", "psi", "chain", "reference", "bridge")


@dataclass
class PathPolyline:
    """A piecewise-linear path.

    ``vertices`` is an ``(k, 2)`` array. For radial paths the rows run from
    the start point toward the origin. After a planar transform the second
    column is time and the first is the spatial value.
    """

    vertices: np.ndarray
    fallback: bool = False
    exit: str | None = None

    def __post_init__(self) -> None:
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) == 0:
            raise ValueError("vertices must be a non-empty (k, 2) array")
        self.vertices = v

    def __len__(self) -> int:
        return len(self.vertices)

    @property
    def start(self) -> np.ndarray:
        return self.vertices[0]

    @property
    def end(self) -> np.ndarray:
        return self.vertices[-1]

    @property
    def t_start(self) -> float:
        return float(self.vertices[0, 1])

    @property
    def t_end(self) -> float:
        return float(self.vertices[-1, 1])

    def value_at(self, t: float) -> float:
        """Linear interpolation of the first coordinate at time ``t``.

        Times outside the path's range return the nearest endpoint value.
        """
        v = self.vertices
        if len(v) == 1:
            return float(v[0, 0])
        return float(np.interp(t, v[:, 1], v[:, 0]))

    def jump_value_at(self, t: float) -> float:
        """Value of the last vertex with time <= t (the jump version)."""
        v = self.vertices
        k = int(np.searchsorted(v[:, 1], t, side="right")) - 1
        return float(v[max(k, 0), 0])

    def radii(self) -> np.ndarray:
        return np.hypot(self.vertices[:, 0], self.vertices[:, 1])

    def to_json(self, provenance: str) -> dict:
        return {
            "start": [float(x) for x in self.vertices[0]],
            "vertices": [[float(a), float(b)] for a, b in self.vertices],
            "provenance": provenance,
        }


@dataclass
class WebEnsemble:
    """A finite set of paths from one realization."""

    paths: list[PathPolyline]
    provenance: str
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")

    def __len__(self) -> int:
        return len(self.paths)

    def __iter__(self) -> Iterator[PathPolyline]:
        return iter(self.paths)

    def map(self, fn, provenance: str) -> WebEnsemble:
        return WebEnsemble([fn(p) for p in self.paths], provenance, self.seed, dict(self.meta))


def write_jsonl(ens: WebEnsemble, path: str | Path) -> None:
    """One path per line; floats written with repr so they round-trip."""
    with open(path, "w", newline="\n") as fh:
        for p in ens.paths:
            fh.write(json.dumps(p.to_json(ens.provenance), separators=(",", ":")))
            fh.write("\n")


def read_jsonl(path: str | Path) -> WebEnsemble:
    paths: list[PathPolyline] = []
    prov = None
    with open(path) as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            prov = rec["provenance"]
            paths.append(PathPolyline(np.array(rec["vertices"], dtype=float)))
    return WebEnsemble(paths, prov or "gamma")


def iter_values(paths: Iterable[PathPolyline], t: float) -> np.ndarray:
    return np.array([p.value_at(t) for p in paths])
