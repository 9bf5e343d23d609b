"""Time-integrated currents and transport-pathway graphs."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .currents import CurrentSeries, subcomplex_current

PENWIDTH_MIN = 0.5
PENWIDTH_MAX = 8.0
_EDGE_TOL = 1e-12


@dataclass(frozen=True)
class Edge:
    source: str
    target: str
    weight: float


@dataclass(frozen=True)
class PathwayGraph:
    nodes: tuple[str, ...]
    edges: tuple[Edge, ...]
    window: tuple[float, float]
    threshold: float
    gross: dict = field(default=None, compare=False)

    def __post_init__(self):
        seen = set()
        for e in self.edges:
            key = frozenset((e.source, e.target))
            if key in seen:
                raise ValueError(f"more than one edge between {e.source} and {e.target}")
            seen.add(key)
            if not e.weight > self.threshold:
                raise ValueError(f"edge weight {e.weight} not above threshold {self.threshold}")


def _window_samples(times, values, t0, t1):
    """Grid points inside ``[t0, t1]`` plus linearly interpolated end points."""
    times = np.asarray(times, dtype=float)
    span = max(1.0, abs(times[-1]))
    if t0 < times[0] - _EDGE_TOL * span or t1 > times[-1] + _EDGE_TOL * span:
        raise ValueError(
            f"window [{t0:.6g}, {t1:.6g}] outside data range [{times[0]:.6g}, {times[-1]:.6g}]"
        )
    t0 = min(max(t0, times[0]), times[-1])
    t1 = min(max(t1, times[0]), times[-1])

    def at(x):
        i = int(np.searchsorted(times, x, side="right")) - 1
        i = min(max(i, 0), len(times) - 2)
        ta, tb = times[i], times[i + 1]
        f = (x - ta) / (tb - ta)
        if f == 0.0:
            return values[i]
        if f == 1.0:
            return values[i + 1]
        return values[i] + f * (values[i + 1] - values[i])

    inner = np.nonzero((times > t0) & (times < t1))[0]
    ts = np.concatenate([[t0], times[inner], [t1]])
    vs = np.concatenate([at(t0)[None], values[inner], at(t1)[None]])
    return ts, vs


def _trapezoid(ts, vs):
    dt = np.diff(ts).reshape((-1,) + (1,) * (vs.ndim - 1))
    return np.sum(0.5 * dt * (vs[1:] + vs[:-1]), axis=0)


def integrate_series(times, values, t0: float, dt_window: float):
    """Trapezoidal integral of ``values`` (leading axis = time) over ``[t0, t0 + dt_window]``."""
    if dt_window < 0:
        raise ValueError("window length must be >= 0")
    values = np.asarray(values)
    if dt_window == 0:
        return np.zeros(values.shape[1:], dtype=values.dtype)
    if len(times) < 2:
        raise ValueError("need at least two samples to integrate")
    ts, vs = _window_samples(times, values, t0, t0 + dt_window)
    return _trapezoid(ts, vs)


def integrate_currents(currents: CurrentSeries, t0: float, dt_window: float,
                       component: str = "j_total") -> np.ndarray:
    """Net probability moved between each ordered site pair, ``dP[l, n]``."""
    return integrate_series(currents.times, currents.component(component), t0, dt_window)


def gross_flow(currents: CurrentSeries, t0: float, dt_window: float,
               component: str = "j_total") -> np.ndarray:
    """``integral |j| dt`` per pair; exposes back-and-forth flow hidden in the net value."""
    return integrate_series(currents.times, np.abs(currents.component(component)), t0,
                            dt_window)


def integrate_subcomplex(currents: CurrentSeries, A: Iterable[int], B: Iterable[int],
                         t0: float, dt_window: float) -> float:
    return float(integrate_series(currents.times, subcomplex_current(currents, A, B), t0,
                                  dt_window))


def build_pathway_graph(dP: np.ndarray, labels: Sequence[str], threshold: float,
                        window: tuple[float, float] = (0.0, 0.0)) -> PathwayGraph:
    """Edge ``l -> n`` for every pair with ``dP[l, n] > threshold``, heaviest first."""
    if threshold < 0:
        raise ValueError("threshold must be >= 0")
    dP = np.asarray(dP, dtype=float)
    n = dP.shape[0]
    if len(labels) != n:
        raise ValueError("one label per site required")
    found = []
    for l in range(n):
        for m in range(n):
            if l != m and dP[l, m] > threshold:
                found.append((-dP[l, m], l, m))
    found.sort()
    edges = tuple(Edge(labels[l], labels[m], float(-w)) for w, l, m in found)
    return PathwayGraph(tuple(labels), edges, (float(window[0]), float(window[1])),
                        float(threshold))


def _dot_id(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(graph: PathwayGraph) -> str:
    lines = [
        "digraph pathways {",
        f"  // window t0={graph.window[0]!r} dt={graph.window[1]!r} threshold={graph.threshold!r}",
        "  node [shape=circle];",
    ]
    lines += [f"  {_dot_id(n)};" for n in graph.nodes]
    wmax = max((e.weight for e in graph.edges), default=0.0)
    for e in graph.edges:
        pw = min(PENWIDTH_MAX, max(PENWIDTH_MIN, PENWIDTH_MAX * e.weight / wmax))
        lines.append(f"  {_dot_id(e.source)} -> {_dot_id(e.target)} "
                     f"[penwidth={pw:.3f}, label=\"{e.weight:.4g}\", dP=\"{e.weight!r}\"];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def to_document(graph: PathwayGraph) -> dict:
    doc = {
        "nodes": list(graph.nodes),
        "edges": [{"from": e.source, "to": e.target, "weight": e.weight} for e in graph.edges],
        "window": list(graph.window),
        "threshold": graph.threshold,
    }
    if graph.gross is not None:
        doc["gross"] = graph.gross
    return doc


def export_graph(graph: PathwayGraph, fmt: str = "dot") -> str:
    """Render as Graphviz DOT (``"dot"``) or a JSON document (``"json"``)."""
    if fmt == "dot":
        return to_dot(graph)
    if fmt == "json":
        return json.dumps(to_document(graph), indent=2) + "\n"
    raise ValueError(f"unknown graph format {fmt!r} (expected 'dot' or 'json')")


def parse_graph(text: str) -> PathwayGraph:
    doc = json.loads(text)
    edges = tuple(Edge(e["from"], e["to"], float(e["weight"])) for e in doc["edges"])
    return PathwayGraph(tuple(doc["nodes"]), edges, tuple(doc["window"]),
                        float(doc["threshold"]), doc.get("gross"))
