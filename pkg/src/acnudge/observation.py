"""Measurement-point sets and the piecewise-linear observation interpolant I_h.

Three placement policies are supported:

* uniform static grids with endpoints included,
* a-posteriori layer-based placement (one node per transition layer, per
  structure, and at each domain endpoint),
* a sweeping probe: a cluster of consecutive mesh points translating at a
  constant speed, wrapping periodically.

The probe wraps modulo N (the mesh identified periodically, x = L with
x = 0); a wrapped cluster splits into at most two runs of consecutive
indices and the interpolant is never bridged across the seam.  Outside the
convex hull of each run the interpolant is identically zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .solver import Field, SolverConfig

UNIFORM_STATIC = "uniform"
LAYER_BASED = "layer"
SWEEPING_PROBE = "probe"

_KINDS = (UNIFORM_STATIC, LAYER_BASED, SWEEPING_PROBE)


@dataclass(frozen=True)
class ObservationSet:
    """A finite set of measurement locations plus its motion policy.

    points are mesh indices: sorted ascending for static kinds, in the
    probe's unwrapped order (at most one wrap split) for a sweeping probe.
    probe_speed is in dx/dt units and may be fractional; probe_offset is
    the accumulated fractional displacement not yet applied, in dx units.
    layer_points marks the transition-layer subset of a layer-based set.
    """

    kind: str
    points: tuple[int, ...]
    probe_speed: float = 0.0
    probe_offset: float = 0.0
    layer_points: tuple[int, ...] = ()

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown observation kind {self.kind!r}")
        if len(set(self.points)) != len(self.points):
            raise ValueError("observation points must be distinct")
        if any(p < 0 for p in self.points):
            raise ValueError("observation points must be non-negative mesh indices")
        if self.kind == SWEEPING_PROBE:
            if self.probe_speed < 0:
                raise ValueError("probe_speed must be non-negative")
            diffs = np.diff(np.asarray(self.points))
            if np.sum(diffs != 1) > 1:
                raise ValueError("probe points must be consecutive up to one wrap split")
        else:
            if any(b <= a for a, b in zip(self.points, self.points[1:])):
                raise ValueError("static observation points must be sorted ascending")

    @property
    def m(self) -> int:
        return len(self.points)

    def runs(self) -> list[np.ndarray]:
        """Contiguous interpolation runs.

        A static set forms a single run spanning all its nodes (gaps are
        bridged linearly); a probe splits into maximal runs of consecutive
        indices so nothing is interpolated across the periodic seam.
        """
        if not self.points:
            return []
        pts = np.asarray(self.points)
        if self.kind != SWEEPING_PROBE:
            return [pts]
        cuts = np.where(np.diff(pts) != 1)[0] + 1
        return [np.sort(run) for run in np.split(pts, cuts)]

    def to_csv_record(self) -> str:
        idx = ";".join(str(p) for p in sorted(self.points))
        return f"{self.kind},{self.m},{self.probe_speed:.17g},{idx}"

    @classmethod
    def from_csv_record(cls, line: str) -> "ObservationSet":
        kind, m, speed, idx = line.strip().split(",")
        points = tuple(int(tok) for tok in idx.split(";") if tok)
        if len(points) != int(m):
            raise ValueError(f"index list length {len(points)} does not match m={m}")
        return cls(kind=kind, points=points, probe_speed=float(speed))


def _round_half_down(x: float) -> int:
    return int(math.ceil(x - 0.5))


def uniform_static(m: int, n_points: int) -> ObservationSet:
    """m uniformly distributed nodes with spacing N/m, cell-centered.

    Node j sits at index round((j + 1/2)*N/m) with ties rounding down, so
    the nodes avoid the Dirichlet endpoints (where every solution is
    pinned to zero and a measurement carries no information).  m = N+1 is
    the full mesh, m = 0 the empty set (no feedback).
    """
    if m < 0 or m > n_points + 1:
        raise ValueError(f"uniform node count must be in [0, N+1], got {m}")
    if m == 0:
        points: tuple[int, ...] = ()
    elif m == n_points + 1:
        points = tuple(range(n_points + 1))
    else:
        points = tuple(_round_half_down((j + 0.5) * n_points / m) for j in range(m))
    return ObservationSet(UNIFORM_STATIC, points)


def full_mesh(n_points: int) -> ObservationSet:
    return uniform_static(n_points + 1, n_points)


def sweeping_probe(m: int, speed: float, n_points: int, start: int = 0) -> ObservationSet:
    """A cluster of m consecutive mesh indices starting at `start`, moving at `speed` dx/dt."""
    if m < 1 or m > n_points:
        raise ValueError(f"probe size must be in [1, N], got {m}")
    points = tuple(int((start + i) % n_points) for i in range(m))
    return ObservationSet(SWEEPING_PROBE, points, probe_speed=float(speed))


def advance_probe(obs: ObservationSet, config: SolverConfig) -> ObservationSet:
    """Shift the probe right by one step's travel, retaining fractional remainder.

    The accumulated offset grows by probe_speed (dx units per step); the
    points move by its integer part and wrap modulo N, the periodic mesh
    identification of x = L with x = 0.
    """
    if obs.kind != SWEEPING_PROBE:
        raise ValueError("advance_probe requires a sweeping probe")
    offset = obs.probe_offset + obs.probe_speed
    shift = math.floor(offset)
    if shift == 0:
        return replace(obs, probe_offset=offset)
    n = config.n_points
    points = tuple(int((p + shift) % n) for p in obs.points)
    return replace(obs, points=points, probe_offset=offset - shift)


def layer_based_placement(u: Field, config: SolverConfig) -> ObservationSet:
    """A-posteriori placement: one node per transition layer, structure, and endpoint.

    Transition layers are sign changes between adjacent mesh points; the
    layer node is the sample closest to the zero crossing.  Structures are
    the maximal sign-constant segments between crossings (and the domain
    ends); each contributes its |u| argmax.  The sorted union is returned,
    with the crossing subset remembered for targeted removal.
    """
    values = u.values
    n = config.n_points
    nonzero = np.nonzero(values)[0]
    if nonzero.size == 0:
        raise ValueError("field has no structures to anchor observation nodes")
    signs = np.sign(values[nonzero])
    flips = np.nonzero(signs[:-1] != signs[1:])[0]
    crossings = []
    for f in flips:
        a, b = nonzero[f], nonzero[f + 1]
        crossings.append(a + int(np.argmin(np.abs(values[a : b + 1]))))
    bounds = [0, *crossings, n]
    structure_nodes = []
    for a, b in zip(bounds[:-1], bounds[1:]):
        structure_nodes.append(a + int(np.argmax(np.abs(values[a : b + 1]))))
    nodes = sorted({0, n, *crossings, *structure_nodes})
    return ObservationSet(LAYER_BASED, tuple(nodes), layer_points=tuple(crossings))


def remove_layer_coverage(obs: ObservationSet, layer_index: int) -> ObservationSet:
    """Drop the layer_index-th transition-layer node from a layer-based set."""
    if not 0 <= layer_index < len(obs.layer_points):
        raise IndexError(
            f"layer_index {layer_index} out of range for {len(obs.layer_points)} layers"
        )
    victim = obs.layer_points[layer_index]
    points = tuple(p for p in obs.points if p != victim)
    layers = tuple(p for p in obs.layer_points if p != victim)
    return replace(obs, points=points, layer_points=layers)


def remove_index_range(obs: ObservationSet, lo: int, hi: int) -> ObservationSet:
    """Drop every node with lo <= index <= hi (coverage-gap experiments)."""
    points = tuple(p for p in obs.points if not lo <= p <= hi)
    layers = tuple(p for p in obs.layer_points if not lo <= p <= hi)
    return replace(obs, points=points, layer_points=layers)


@dataclass
class Interpolant:
    """Piecewise-linear reconstruction from samples at the observation nodes.

    nodes/node_values hold one array per contiguous run; support is the
    matching list of closed x-intervals.  Evaluation is linear inside each
    interval, exact at the nodes, and zero everywhere else.
    """

    nodes: list[np.ndarray]
    node_values: list[np.ndarray]
    support: list[tuple[float, float]]

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for xs, vals, (lo, hi) in zip(self.nodes, self.node_values, self.support):
            mask = (x >= lo) & (x <= hi)
            if np.any(mask):
                out[mask] = np.interp(x[mask], xs, vals)
        return out


def build_interpolant(f: Field, obs: ObservationSet, config: SolverConfig) -> Interpolant:
    x = config.mesh
    nodes, node_values, support = [], [], []
    for run in obs.runs():
        xs = x[run]
        nodes.append(xs)
        node_values.append(f.values[run])
        support.append((float(xs[0]), float(xs[-1])))
    return Interpolant(nodes, node_values, support)


@lru_cache(maxsize=64)
def _static_weights(points: tuple[int, ...], size: int):
    """Left-node index and right-node fraction of every mesh point inside the hull."""
    pts = np.asarray(points)
    lo, hi = pts[0], pts[-1]
    mesh_idx = np.arange(lo, hi + 1)
    seg = np.searchsorted(pts, mesh_idx, side="right") - 1
    seg = np.clip(seg, 0, pts.size - 2)
    left = pts[seg]
    right = pts[seg + 1]
    frac = (mesh_idx - left) / (right - left)
    return lo, hi, left, right, frac


def interpolate_values(values: np.ndarray, obs: ObservationSet) -> np.ndarray:
    """I_h(f; X) sampled on the full mesh, operating on raw sample arrays.

    Linear between adjacent nodes of each contiguous run, zero outside the
    runs' support.  An empty observation set yields the zero array.
    """
    if not obs.points:
        return np.zeros_like(values)
    if max(obs.points) >= values.size:
        raise ValueError("observation index beyond mesh size")
    if obs.m == values.size:
        return values.copy()
    out = np.zeros_like(values)
    if obs.kind == SWEEPING_PROBE:
        idx = np.asarray(obs.points)
        out[idx] = values[idx]
        return out
    if obs.m == 1:
        p = obs.points[0]
        out[p] = values[p]
        return out
    lo, hi, left, right, frac = _static_weights(obs.points, values.size)
    fl = values[left]
    out[lo : hi + 1] = fl + (values[right] - fl) * frac
    return out


def interpolate(f: Field, obs: ObservationSet) -> Field:
    """Sample I_h(f; X) on the full mesh (see interpolate_values)."""
    return Field(interpolate_values(f.values, obs), f.time)
