"""Grid reachability oracle.

Cells of a window are linked when a sampled constant-control segment of one
time quantum, started at a cell center, lands within h/2 of the target cell.
Strongly connected components of that graph approximate the control sets.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .control_sets import ControlSetDescription, verdicts
from .errors import UnsupportedCase, WindowTooCoarse
from .flows import segment_arrays
from .system import EXACT_TAGS, CaseTag, ControlRange, SystemParams, normal_form

MIN_CELLS_PER_AXIS = 20


@dataclass(frozen=True)
class GridWindow:
    s_min: float = -5.0
    s_max: float = 5.0
    t_min: float = -5.0
    t_max: float = 5.0
    h: float = 0.05

    def __post_init__(self):
        if not (self.s_min < self.s_max and self.t_min < self.t_max and self.h > 0):
            raise ValueError("window needs s_min < s_max, t_min < t_max and h > 0")

    @property
    def shape(self) -> tuple[int, int]:
        """(cells along t, cells along s)."""
        ns = int(round((self.s_max - self.s_min) / self.h))
        nt = int(round((self.t_max - self.t_min) / self.h))
        return nt, ns

    @property
    def n_cells(self) -> int:
        nt, ns = self.shape
        return nt * ns

    def s_centers(self) -> np.ndarray:
        return self.s_min + (np.arange(self.shape[1]) + 0.5) * self.h

    def t_centers(self) -> np.ndarray:
        return self.t_min + (np.arange(self.shape[0]) + 0.5) * self.h

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Flattened center coordinates; cell index = i_t * n_s + i_s."""
        S, T = np.meshgrid(self.s_centers(), self.t_centers())
        return S.ravel(), T.ravel()

    def interior_mask(self) -> np.ndarray:
        """Cells whose h-neighborhood stays inside the window (outer ring dropped)."""
        nt, ns = self.shape
        mask = np.zeros((nt, ns), dtype=bool)
        mask[1:-1, 1:-1] = True
        return mask.ravel()


@dataclass(frozen=True)
class ReachGraph:
    window: GridWindow
    edges: np.ndarray = field(repr=False)
    controls: np.ndarray = field(repr=False)
    dt: float = 0.1

    @property
    def n_cells(self) -> int:
        return self.window.n_cells

    def adjacency(self):
        n = self.n_cells
        data = np.ones(len(self.edges), dtype=np.int8)
        return coo_matrix((data, (self.edges[:, 0], self.edges[:, 1])), shape=(n, n)).tocsr()

    def edges_csv(self) -> str:
        lines = ["from_cell,to_cell"]
        lines.extend(f"{i},{j}" for i, j in self.edges)
        return "\n".join(lines) + "\n"


def oracle_threads() -> int:
    env = os.environ.get("HLCS_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"HLCS_THREADS must be an integer, got {env!r}") from None
    return max(1, min(8, os.cpu_count() or 1))


def _segment_fn(tag: CaseTag, p: SystemParams):
    """Vectorized one-segment flow; reducible systems go through their normal form."""
    if tag in EXACT_TAGS:
        return lambda s0, t0, omega, tau: segment_arrays(tag, p, s0, t0, omega, tau)
    if tag is not CaseTag.REDUCIBLE:
        raise UnsupportedCase(f"no closed-form flow for {tag} systems")
    nf = normal_form(p)
    sign = -1.0 if nf.time_reversed else 1.0

    def flow(s0, t0, omega, tau):
        S, T = nf.conj.forward(s0, t0)
        S1, T1 = segment_arrays(nf.tag, nf.params, S, T, omega, sign * tau)
        return nf.conj.inverse(S1, T1)
    return flow


def _edges_for(flow, win: GridWindow, cells: np.ndarray, controls: np.ndarray, dt: float) -> np.ndarray:
    nt, ns = win.shape
    S, T = win.centers()
    s0 = S[cells][:, None]
    t0 = T[cells][:, None]
    s1, t1 = flow(s0, t0, controls[None, :], dt)
    src = np.broadcast_to(cells[:, None], s1.shape).ravel()
    s1 = s1.ravel()
    t1 = t1.ravel()
    inside = (s1 >= win.s_min) & (s1 < win.s_max) & (t1 >= win.t_min) & (t1 < win.t_max)
    src, s1, t1 = src[inside], s1[inside], t1[inside]
    # fractional cell coordinates measured from cell centers
    u = (s1 - win.s_min) / win.h - 0.5
    w = (t1 - win.t_min) / win.h - 0.5
    i0 = np.floor(u).astype(np.int64)
    j0 = np.floor(w).astype(np.int64)
    out = []
    for di in (0, 1):
        for dj in (0, 1):
            i = i0 + di
            j = j0 + dj
            ok = (np.abs(u - i) < 1.0) & (np.abs(w - j) < 1.0)
            ok &= (i >= 0) & (i < ns) & (j >= 0) & (j < nt)
            dst = j * ns + i
            ok &= dst != src
            out.append(np.stack([src[ok], dst[ok]], axis=1))
    return np.concatenate(out) if out else np.empty((0, 2), dtype=np.int64)


def build_reach_graph(tag: CaseTag, p: SystemParams, W: ControlRange, win: GridWindow,
                      dt: float = 0.1, n_controls: int = 5, threads: int | None = None) -> ReachGraph:
    """Directed graph of one-quantum transitions between grid cells.

    Landings outside the window are dropped, so cells that are only reachable
    from outside look unreachable. Self-loops are not recorded.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    nt, ns = win.shape
    if nt < MIN_CELLS_PER_AXIS or ns < MIN_CELLS_PER_AXIS:
        raise WindowTooCoarse(f"window has {ns}x{nt} cells, need at least "
                              f"{MIN_CELLS_PER_AXIS}x{MIN_CELLS_PER_AXIS}")
    controls = W.samples(n_controls)
    flow = _segment_fn(tag, p)
    threads = oracle_threads() if threads is None else max(1, threads)
    chunks = np.array_split(np.arange(win.n_cells, dtype=np.int64), max(1, 4 * threads))
    if threads == 1:
        parts = [_edges_for(flow, win, c, controls, dt) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda c: _edges_for(flow, win, c, controls, dt), chunks))
    edges = np.unique(np.concatenate(parts), axis=0) if parts else np.empty((0, 2), dtype=np.int64)
    return ReachGraph(win, edges.astype(np.int64), controls, dt)


def approx_control_sets(g: ReachGraph) -> list[np.ndarray]:
    """Strongly connected components with at least one internal edge.

    Components are returned as sorted cell-index arrays, ordered by their
    smallest cell.
    """
    n, labels = connected_components(g.adjacency(), directed=True, connection="strong")
    sizes = np.bincount(labels, minlength=n)
    comps = [np.flatnonzero(labels == k) for k in np.flatnonzero(sizes >= 2)]
    comps.sort(key=lambda c: int(c[0]))
    return comps


def components_csv(sets: list[np.ndarray]) -> str:
    lines = ["cell_index,component_id"]
    for cid, cells in enumerate(sets):
        lines.extend(f"{int(c)},{cid}" for c in cells)
    return "\n".join(lines) + "\n"


def oracle_mask(sets: list[np.ndarray], n_cells: int) -> np.ndarray:
    mask = np.zeros(n_cells, dtype=bool)
    for c in sets:
        mask[c] = True
    return mask


def compare(desc: ControlSetDescription | list[ControlSetDescription], sets: list[np.ndarray],
            win: GridWindow) -> float:
    """Fraction of scored cells where the analytic and oracle verdicts agree.

    Scored cells are interior to the window and farther than h from the
    analytic boundary.
    """
    descs = desc if isinstance(desc, list) else [desc]
    S, T = win.centers()
    codes = np.max([verdicts(d, S, T, tol=win.h) for d in descs], axis=0)
    scored = win.interior_mask() & (codes != 0)
    if not scored.any():
        return 1.0
    analytic = codes[scored] == 1
    oracle = oracle_mask(sets, win.n_cells)[scored]
    return float(np.mean(analytic == oracle))


def coverage(sets: list[np.ndarray], win: GridWindow) -> float:
    """Share of interior cells inside the largest component."""
    interior = win.interior_mask()
    if not sets:
        return 0.0
    best = max(sets, key=len)
    mask = np.zeros(win.n_cells, dtype=bool)
    mask[best] = True
    return float(np.count_nonzero(mask & interior) / np.count_nonzero(interior))


@dataclass(frozen=True)
class ComponentExtent:
    size: int
    s_low: float
    s_high: float

    @property
    def width(self) -> float:
        return self.s_high - self.s_low

    @property
    def center(self) -> float:
        return 0.5 * (self.s_low + self.s_high)


def component_extents(sets: list[np.ndarray], win: GridWindow) -> list[ComponentExtent]:
    """s-extent of each component, measured over whole cells."""
    S, _ = win.centers()
    out = []
    for cells in sets:
        s = S[cells]
        out.append(ComponentExtent(len(cells), float(s.min() - win.h / 2), float(s.max() + win.h / 2)))
    return out
