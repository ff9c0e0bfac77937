"""Graph optimization: a scalar chain solved exactly, and an SE(2) pose graph
optimized by sparse Gauss-Newton with a gradient-descent fallback."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .geometry import Pose2, between, compose, wrap_angle

DEFAULT_ODOM_INFO = np.diag([50.0, 50.0, 100.0])
DEFAULT_LOOP_INFO = np.diag([100.0, 100.0, 200.0])
DEFAULT_ANCHOR_INFO = np.diag([1e6, 1e6, 1e6])

_SINGULAR_RTOL = 1e-12


class UnobservableChainError(ValueError):
    """The 1D chain leaves its absolute position unconstrained."""


class UnobservableGraphError(ValueError):
    """The pose graph leaves some rigid-motion freedom unconstrained."""


@dataclass(frozen=True)
class Chain1D:
    """Scalar robot on a line: prior, odometry steps, landmark range readings."""

    prior_mean: float
    prior_info: float
    motions: list[tuple[float, float]]
    measurements: list[tuple[int, int, float, float]]

    def __post_init__(self) -> None:
        if self.prior_info < 0.0:
            raise ValueError("prior_info must be >= 0")
        for _, sigma in self.motions:
            if sigma <= 0.0:
                raise ValueError("motion sigma must be > 0")
        n_states = len(self.motions) + 1
        for t, _, _, sigma in self.measurements:
            if not 0 <= t < n_states:
                raise ValueError(f"measurement at state {t} outside chain of {n_states}")
            if sigma <= 0.0:
                raise ValueError("measurement sigma must be > 0")


def _chain_system(chain: Chain1D, paper_literal_eq2: bool):
    """Weighted linear rows (A, b) for the chain least squares."""
    n_states = len(chain.motions) + 1
    landmark_ids = []
    for _, lid, _, _ in chain.measurements:
        if lid not in landmark_ids:
            landmark_ids.append(lid)
    n = n_states + len(landmark_ids)
    col = {lid: n_states + i for i, lid in enumerate(landmark_ids)}
    rows = []
    rhs = []
    if chain.prior_info > 0.0:
        w = math.sqrt(chain.prior_info)
        row = np.zeros(n)
        row[0] = w
        rows.append(row)
        rhs.append(w * chain.prior_mean)
    for t, (u, sigma) in enumerate(chain.motions, start=1):
        row = np.zeros(n)
        row[t] = 1.0 / sigma
        row[t - 1] = -1.0 / sigma
        rows.append(row)
        rhs.append(u / sigma)
    for t, lid, z, sigma in chain.measurements:
        # default model: the reading is the landmark offset m - x_t
        row = np.zeros(n)
        if paper_literal_eq2:
            row[t] = 1.0 / sigma
            row[col[lid]] = 1.0 / sigma
        else:
            row[t] = -1.0 / sigma
            row[col[lid]] = 1.0 / sigma
        rows.append(row)
        rhs.append(z / sigma)
    return np.array(rows), np.array(rhs), n_states, landmark_ids


def solve_chain_1d(
    chain: Chain1D, paper_literal_eq2: bool = False
) -> tuple[list[float], dict[int, float], float]:
    """Exact minimizer of the chain's quadratic objective via normal equations.

    Returns (states, landmark positions by id, objective at the optimum).
    """
    a, b, n_states, landmark_ids = _chain_system(chain, paper_literal_eq2)
    h = a.T @ a
    eig = np.linalg.eigvalsh(h)
    if eig[0] <= _SINGULAR_RTOL * max(eig[-1], 1.0):
        raise UnobservableChainError(
            "chain has a free translation gauge: no prior or measurement pins "
            "the absolute position"
        )
    x = np.linalg.solve(h, a.T @ b)
    r = a @ x - b
    j_min = float(r @ r)
    states = [float(v) for v in x[:n_states]]
    landmarks = {lid: float(x[n_states + i]) for i, lid in enumerate(landmark_ids)}
    return states, landmarks, j_min


@dataclass(frozen=True)
class PoseNode:
    id: int
    estimate: Pose2


def _check_information(info: np.ndarray, what: str) -> np.ndarray:
    info = np.asarray(info, dtype=np.float64)
    if info.shape != (3, 3):
        raise ValueError(f"{what} information must be 3x3")
    if not np.allclose(info, info.T, atol=1e-12):
        raise ValueError(f"{what} information must be symmetric")
    if np.linalg.eigvalsh(info)[0] <= 0.0:
        raise ValueError(f"{what} information must be positive definite")
    return info


@dataclass(frozen=True)
class GraphEdge:
    kind: str
    from_id: int
    to_id: int
    measurement: Pose2
    information: np.ndarray

    def __post_init__(self) -> None:
        if self.kind not in ("odometry", "loop"):
            raise ValueError(f"unknown edge kind {self.kind!r}")
        if self.from_id == self.to_id:
            raise ValueError("edge endpoints must differ")
        object.__setattr__(self, "information", _check_information(self.information, "edge"))


@dataclass(frozen=True)
class Anchor:
    node_id: int
    prior: Pose2
    information: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "information", _check_information(self.information, "anchor"))


@dataclass
class PoseGraph:
    nodes: list[PoseNode]
    edges: list[GraphEdge]
    anchor: Anchor

    def __post_init__(self) -> None:
        ids = [n.id for n in self.nodes]
        if ids != list(range(len(ids))):
            raise ValueError("node ids must be dense from 0 in order")
        for e in self.edges:
            if not (0 <= e.from_id < len(ids) and 0 <= e.to_id < len(ids)):
                raise ValueError(f"edge {e.from_id}->{e.to_id} references a missing node")
        if not 0 <= self.anchor.node_id < len(ids):
            raise ValueError("anchor references a missing node")


def residual(edge: GraphEdge, x_from: Pose2, x_to: Pose2) -> np.ndarray:
    """Mismatch between the predicted relative pose and the measured one."""
    pred = between(x_from, x_to)
    r = between(pred, edge.measurement)
    return np.array([r.x, r.y, r.theta])


def _rot(psi: float) -> np.ndarray:
    c, s = math.cos(psi), math.sin(psi)
    return np.array([[c, -s], [s, c]])


def _drot(psi: float) -> np.ndarray:
    c, s = math.cos(psi), math.sin(psi)
    return np.array([[-s, -c], [c, -s]])


def edge_jacobians(edge: GraphEdge, x_from: Pose2, x_to: Pose2) -> tuple[np.ndarray, np.ndarray]:
    """Analytic d(residual)/d(x_from), d(residual)/d(x_to)."""
    phi1 = x_from.theta
    phi2 = x_to.theta
    z_xy = np.array([edge.measurement.x, edge.measurement.y])
    d = np.array([x_to.x - x_from.x, x_to.y - x_from.y])
    rot_m2 = _rot(-phi2)
    dr_rel = _drot(phi1 - phi2) @ z_xy
    a = np.zeros((3, 3))
    a[:2, :2] = rot_m2
    a[:2, 2] = dr_rel
    a[2, 2] = 1.0
    b = np.zeros((3, 3))
    b[:2, :2] = -rot_m2
    b[:2, 2] = -dr_rel + _drot(-phi2) @ d
    b[2, 2] = -1.0
    return a, b


def _anchor_residual(anchor: Anchor, est: Pose2) -> np.ndarray:
    return np.array(
        [est.x - anchor.prior.x, est.y - anchor.prior.y, wrap_angle(est.theta - anchor.prior.theta)]
    )


def objective(graph: PoseGraph) -> float:
    """Total weighted squared residual, anchor included."""
    ra = _anchor_residual(graph.anchor, graph.nodes[graph.anchor.node_id].estimate)
    j = float(ra @ graph.anchor.information @ ra)
    for e in graph.edges:
        r = residual(e, graph.nodes[e.from_id].estimate, graph.nodes[e.to_id].estimate)
        j += float(r @ e.information @ r)
    return j


@dataclass(frozen=True)
class OptimizeOptions:
    max_iter: int = 50
    tol: float = 1e-9
    method: str = "gauss_newton"
    max_halvings: int = 10

    def __post_init__(self) -> None:
        if self.method not in ("gauss_newton", "gradient_descent"):
            raise ValueError(f"unknown method {self.method!r}")


@dataclass(frozen=True)
class OptimizeStats:
    iterations: int
    j_initial: float
    j_final: float
    j_history: tuple[float, ...]


def _assemble(graph: PoseGraph) -> tuple[sp.csc_matrix, np.ndarray]:
    """Normal equations H, b of the linearized problem at current estimates."""
    n = 3 * len(graph.nodes)
    b = np.zeros(n)
    h_rows: list[int] = []
    h_cols: list[int] = []
    h_vals: list[float] = []

    def add_block(i: int, j: int, block: np.ndarray) -> None:
        for r in range(3):
            for c in range(3):
                h_rows.append(3 * i + r)
                h_cols.append(3 * j + c)
                h_vals.append(block[r, c])

    aid = graph.anchor.node_id
    omega = graph.anchor.information
    ra = _anchor_residual(graph.anchor, graph.nodes[aid].estimate)
    add_block(aid, aid, omega)
    b[3 * aid : 3 * aid + 3] += omega @ ra
    for e in graph.edges:
        xf = graph.nodes[e.from_id].estimate
        xt = graph.nodes[e.to_id].estimate
        r = residual(e, xf, xt)
        ja, jb = edge_jacobians(e, xf, xt)
        w = e.information
        add_block(e.from_id, e.from_id, ja.T @ w @ ja)
        add_block(e.from_id, e.to_id, ja.T @ w @ jb)
        add_block(e.to_id, e.from_id, jb.T @ w @ ja)
        add_block(e.to_id, e.to_id, jb.T @ w @ jb)
        b[3 * e.from_id : 3 * e.from_id + 3] += ja.T @ w @ r
        b[3 * e.to_id : 3 * e.to_id + 3] += jb.T @ w @ r
    h = sp.coo_matrix((h_vals, (h_rows, h_cols)), shape=(n, n)).tocsc()
    return h, b


def _apply_delta(nodes: list[PoseNode], delta: np.ndarray) -> list[PoseNode]:
    out = []
    for node in nodes:
        i = 3 * node.id
        est = node.estimate
        out.append(
            PoseNode(
                node.id,
                Pose2(est.x + delta[i], est.y + delta[i + 1], est.theta + delta[i + 2]),
            )
        )
    return out


def optimize(graph: PoseGraph, opts: OptimizeOptions | None = None) -> tuple[PoseGraph, OptimizeStats]:
    """Minimize the graph objective; the returned stats J sequence never increases."""
    opts = opts if opts is not None else OptimizeOptions()
    current = PoseGraph(list(graph.nodes), list(graph.edges), graph.anchor)
    j_curr = objective(current)
    history = [j_curr]
    iterations = 0
    lr = None
    for _ in range(opts.max_iter):
        h, b = _assemble(current)
        if opts.method == "gauss_newton":
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("error")
                    lu = splu(h)
                    delta = lu.solve(-b)
            except (RuntimeError, Warning) as exc:
                raise UnobservableGraphError(
                    "normal equations are singular: graph leaves a rigid-motion "
                    "gauge free beyond the anchor"
                ) from exc
            if not np.all(np.isfinite(delta)):
                raise UnobservableGraphError(
                    "normal equations are singular: graph leaves a rigid-motion "
                    "gauge free beyond the anchor"
                )
        else:
            if lr is None:
                lr = 1.0 / max(float(np.abs(h.diagonal()).max()), 1e-12)
            delta = -2.0 * b * lr
        iterations += 1
        accepted = False
        step = delta
        n_halved = 0
        for _ in range(opts.max_halvings + 1):
            candidate = _apply_delta(current.nodes, step)
            trial = PoseGraph(candidate, current.edges, current.anchor)
            j_new = objective(trial)
            if j_new <= j_curr:
                accepted = True
                break
            step = step / 2.0
            n_halved += 1
        if not accepted:
            break
        if opts.method == "gradient_descent":
            # grow the step after a win so line search stays two-sided
            lr = lr * 0.5**n_halved * 2.0
        current = trial
        history.append(j_new)
        if abs(j_curr - j_new) < opts.tol:
            j_curr = j_new
            break
        j_curr = j_new
    return current, OptimizeStats(
        iterations=iterations,
        j_initial=history[0],
        j_final=history[-1],
        j_history=tuple(history),
    )


def build_graph_front_end(
    deltas: list[Pose2],
    loops: list[tuple[int, int, Pose2]],
    start: Pose2 = Pose2(0.0, 0.0, 0.0),
    odom_info: np.ndarray | None = None,
    loop_info: np.ndarray | None = None,
    anchor_info: np.ndarray | None = None,
) -> PoseGraph:
    """Dead-reckoned nodes, one odometry edge per step, loop edges, node-0 anchor.

    Loop constraints may be (from_id, to_id, relative) tuples or objects with
    those attributes; ones naming unknown nodes are skipped with a warning.
    """
    odom_info = DEFAULT_ODOM_INFO if odom_info is None else odom_info
    loop_info = DEFAULT_LOOP_INFO if loop_info is None else loop_info
    anchor_info = DEFAULT_ANCHOR_INFO if anchor_info is None else anchor_info
    nodes = [PoseNode(0, start)]
    edges = []
    for i, d in enumerate(deltas):
        nodes.append(PoseNode(i + 1, compose(nodes[i].estimate, d)))
        edges.append(GraphEdge("odometry", i, i + 1, d, odom_info))
    n = len(nodes)
    for item in loops:
        if isinstance(item, tuple):
            from_id, to_id, rel = item
        else:
            from_id, to_id, rel = item.from_id, item.to_id, item.relative
        if not (0 <= from_id < n and 0 <= to_id < n) or from_id == to_id:
            warnings.warn(
                f"skipping loop constraint {from_id}->{to_id}: unknown node",
                stacklevel=2,
            )
            continue
        edges.append(GraphEdge("loop", from_id, to_id, rel, loop_info))
    return PoseGraph(nodes, edges, Anchor(0, start, anchor_info))


def save_graph(graph: PoseGraph, path: str | Path) -> None:
    """Text form, one record per line; floats via repr for exact round trips."""
    with open(path, "w", encoding="utf-8") as fh:
        a = graph.anchor
        i = a.information
        def fmt(*vals: float) -> str:
            return " ".join(repr(float(v)) for v in vals)

        fh.write(
            f"ANCHOR {a.node_id} "
            + fmt(
                a.prior.x,
                a.prior.y,
                a.prior.theta,
                i[0, 0],
                i[0, 1],
                i[0, 2],
                i[1, 1],
                i[1, 2],
                i[2, 2],
            )
            + "\n"
        )
        for node in graph.nodes:
            e = node.estimate
            fh.write(f"VERTEX {node.id} {fmt(e.x, e.y, e.theta)}\n")
        for edge in graph.edges:
            m = edge.measurement
            i = edge.information
            fh.write(
                f"EDGE {edge.kind} {edge.from_id} {edge.to_id} "
                + fmt(m.x, m.y, m.theta, i[0, 0], i[0, 1], i[0, 2], i[1, 1], i[1, 2], i[2, 2])
                + "\n"
            )


def _info_from_upper(vals: list[float]) -> np.ndarray:
    i11, i12, i13, i22, i23, i33 = vals
    return np.array([[i11, i12, i13], [i12, i22, i23], [i13, i23, i33]])


def load_graph(path: str | Path) -> PoseGraph:
    nodes = []
    edges = []
    anchor = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            try:
                tag = parts[0]
                if tag == "VERTEX":
                    nodes.append(
                        PoseNode(int(parts[1]), Pose2(*(float(v) for v in parts[2:5])))
                    )
                elif tag == "EDGE":
                    edges.append(
                        GraphEdge(
                            parts[1],
                            int(parts[2]),
                            int(parts[3]),
                            Pose2(*(float(v) for v in parts[4:7])),
                            _info_from_upper([float(v) for v in parts[7:13]]),
                        )
                    )
                elif tag == "ANCHOR":
                    anchor = Anchor(
                        int(parts[1]),
                        Pose2(*(float(v) for v in parts[2:5])),
                        _info_from_upper([float(v) for v in parts[5:11]]),
                    )
                else:
                    raise ValueError(f"unknown record {tag!r}")
            except (IndexError, ValueError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: bad graph record: {exc}") from exc
    if anchor is None:
        raise ValueError(f"{path}: missing ANCHOR record")
    nodes.sort(key=lambda n: n.id)
    return PoseGraph(nodes, edges, anchor)
