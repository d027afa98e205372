"""Pseudo-orbit (noise-inflated) transition graphs over a box covering of the
torus: attainability, chain-transitive components, and the attractor/repeller
seeded from the fixed circles of the involution.

A box graph has an edge b -> b' whenever the declared noise square around the
image of some sample point of b meets b'.  Directed paths in the graph are
exactly the discretized noisy orbits, so forward reachability approximates
attainability, strongly connected components approximate chain-transitive
sets, and terminal components of the condensation satisfy the graph-level
stability criterion (no escaping pseudo-orbit).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from . import flow
from .flow import CLOUD_SETTINGS, IntegratorSettings
from .model import TWO_PI, Params


class ChainError(ValueError):
    pass


@dataclass(frozen=True)
class BoxCover:
    """Uniform partition of the torus into n_xi x n_eta boxes, row-major in
    (xi, eta): box id = ix * n_eta + iy."""

    n_xi: int
    n_eta: int

    def __post_init__(self):
        if self.n_xi < 2 or self.n_eta < 2:
            raise ChainError("need at least 2 boxes per axis")

    @property
    def n_boxes(self) -> int:
        return self.n_xi * self.n_eta

    @property
    def widths(self) -> tuple:
        return (TWO_PI / self.n_xi, TWO_PI / self.n_eta)

    @property
    def diagonal(self) -> float:
        w, h = self.widths
        return math.hypot(w, h)

    def box_of(self, pts) -> np.ndarray:
        a = np.asarray(pts, dtype=float) % TWO_PI
        ix = np.minimum((a[..., 0] / self.widths[0]).astype(np.int64), self.n_xi - 1)
        iy = np.minimum((a[..., 1] / self.widths[1]).astype(np.int64), self.n_eta - 1)
        return ix * self.n_eta + iy

    def centers(self) -> np.ndarray:
        w, h = self.widths
        ix, iy = np.meshgrid(np.arange(self.n_xi), np.arange(self.n_eta),
                             indexing="ij")
        return np.stack([(ix.ravel() + 0.5) * w, (iy.ravel() + 0.5) * h], axis=-1)

    def sample_lattice(self, m: int = 3) -> np.ndarray:
        """(n_boxes * m^2, 2) interior lattice samples, box-major."""
        w, h = self.widths
        offs = (np.arange(m) + 1.0) / (m + 1.0)
        ox, oy = np.meshgrid(offs, offs, indexing="ij")
        centers = self.centers() - np.array([0.5 * w, 0.5 * h])
        pts = centers[:, None, :] + np.stack(
            [ox.ravel() * w, oy.ravel() * h], axis=-1
        )[None, :, :]
        return pts.reshape(-1, 2)

    def fix_r_boxes(self) -> np.ndarray:
        """Boxes whose closure meets the circles eta = 0 or eta = pi."""
        rows = {0, self.n_eta - 1}
        half = (self.n_eta * 0.5)
        rows.add(int(math.floor(half)) % self.n_eta)
        rows.add((int(math.ceil(half)) - 1) % self.n_eta)
        iy = np.array(sorted(rows))
        ix = np.arange(self.n_xi)
        return (ix[:, None] * self.n_eta + iy[None, :]).ravel()


@dataclass
class BoxGraph:
    """Directed transitions of the noise-inflated period map over a cover."""

    cover: BoxCover
    noise: float
    adjacency: sparse.csr_matrix
    p: Params
    samples_per_box: int = 9
    _labels: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_boxes(self) -> int:
        return self.cover.n_boxes

    def out_degrees(self) -> np.ndarray:
        return np.diff(self.adjacency.indptr)

    def reversed(self) -> "BoxGraph":
        return BoxGraph(self.cover, self.noise,
                        self.adjacency.T.tocsr(), self.p, self.samples_per_box)

    def scc_labels(self) -> np.ndarray:
        if self._labels is None:
            _, labels = csgraph.connected_components(
                self.adjacency, directed=True, connection="strong"
            )
            self._labels = labels
        return self._labels


def build_graph(p: Params, cover: BoxCover, eps_noise: float,
                samples_per_box: int = 9, *,
                s: IntegratorSettings = CLOUD_SETTINGS, forward: bool = True,
                threads: int = 2) -> BoxGraph:
    """Map a sample lattice of every box through the period map and record
    every box met by the noise square around each image."""
    if eps_noise < 0.5 * cover.diagonal:
        raise ChainError(
            f"eps_noise {eps_noise:.4g} must be >= half the box diagonal "
            f"{0.5 * cover.diagonal:.4g} so the declared noise dominates "
            "discretization error"
        )
    m = int(round(math.sqrt(samples_per_box)))
    if m * m != samples_per_box or m < 1:
        raise ChainError("samples_per_box must be a square number")
    pts = cover.sample_lattice(m)
    kept, _, _ = flow.iterate_cloud_batch(
        pts, p, 1, 0, s, forward=forward, mode=0, threads=threads,
    )
    img = kept[0]
    n_samp = m * m
    w, h = cover.widths
    src = np.repeat(np.arange(cover.n_boxes, dtype=np.int64), n_samp)

    # integer ranges of boxes covered by the inflation square
    lo_x = np.floor((img[:, 0] - eps_noise) / w).astype(np.int64)
    hi_x = np.floor((img[:, 0] + eps_noise) / w).astype(np.int64)
    lo_y = np.floor((img[:, 1] - eps_noise) / h).astype(np.int64)
    hi_y = np.floor((img[:, 1] + eps_noise) / h).astype(np.int64)
    span_x = int((hi_x - lo_x).max()) + 1
    span_y = int((hi_y - lo_y).max()) + 1
    rows = []
    cols = []
    for dx in range(span_x):
        ix = lo_x + dx
        ok_x = ix <= hi_x
        ix = ix % cover.n_xi
        for dy in range(span_y):
            iy = lo_y + dy
            ok = ok_x & (iy <= hi_y)
            iy = iy % cover.n_eta
            rows.append(src[ok])
            cols.append((ix[ok] * cover.n_eta + iy[ok]))
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    adj = sparse.coo_matrix(
        (np.ones(len(rows), dtype=bool), (rows, cols)),
        shape=(cover.n_boxes, cover.n_boxes),
    ).tocsr()
    adj.data[:] = True
    return BoxGraph(cover, eps_noise, adj, p, samples_per_box)


def attainable(g: BoxGraph, from_box: int) -> np.ndarray:
    """Forward reachability closure (includes the start box)."""
    order = csgraph.breadth_first_order(
        g.adjacency, int(from_box), directed=True, return_predecessors=False
    )
    return np.sort(order)


def chain_components(g: BoxGraph) -> list:
    """Strongly connected components as sorted arrays of box ids."""
    labels = g.scc_labels()
    order = np.argsort(labels, kind="stable")
    sorted_labels = labels[order]
    splits = np.flatnonzero(np.diff(sorted_labels)) + 1
    return [np.sort(c) for c in np.split(order, splits)]


def _condensation(g: BoxGraph):
    labels = g.scc_labels()
    n_comp = int(labels.max()) + 1
    coo = g.adjacency.tocoo()
    lr = labels[coo.row]
    lc = labels[coo.col]
    off = lr != lc
    cond = sparse.coo_matrix(
        (np.ones(off.sum(), dtype=bool), (lr[off], lc[off])),
        shape=(n_comp, n_comp),
    ).tocsr()
    return labels, cond


def attractor_of(g: BoxGraph, start: int) -> list:
    """Terminal components of the condensation reachable from the start box.

    Terminal means no outgoing inter-component edge, the graph-level form of
    pseudo-orbit stability: no noisy orbit leaves the component.
    """
    labels, cond = _condensation(g)
    reach = csgraph.breadth_first_order(
        cond, int(labels[start]), directed=True, return_predecessors=False
    )
    out_deg = np.diff(cond.indptr)
    return sorted(int(c) for c in reach if out_deg[c] == 0)


def repeller_of(g: BoxGraph, start: int) -> list:
    """Attractor of the start under the reversed graph."""
    return attractor_of(g.reversed(), start)


def _terminal_from(g: BoxGraph, starts: np.ndarray) -> list:
    labels, cond = _condensation(g)
    out_deg = np.diff(cond.indptr)
    seen = set()
    comp_ids = set()
    for b in starts:
        c0 = int(labels[b])
        if c0 in seen:
            continue
        reach = csgraph.breadth_first_order(
            cond, c0, directed=True, return_predecessors=False
        )
        seen.update(int(c) for c in reach)
        comp_ids.update(int(c) for c in reach if out_deg[c] == 0)
    return sorted(comp_ids)


def reversible_attractor(g: BoxGraph) -> list:
    """Union of the attractors of every box meeting the fixed circles of R."""
    return _terminal_from(g, g.cover.fix_r_boxes())


def reversible_repeller(g: BoxGraph) -> list:
    return _terminal_from(g.reversed(), g.cover.fix_r_boxes())


def component_box_mask(g: BoxGraph, comp_ids) -> np.ndarray:
    """Boolean mask over boxes belonging to the given component ids."""
    labels = g.scc_labels()
    mask = np.zeros(g.n_boxes, dtype=bool)
    for c in comp_ids:
        mask |= labels == c
    return mask


def label_grid(g: BoxGraph) -> np.ndarray:
    """(n_xi, n_eta) grid of component labels."""
    return g.scc_labels().reshape(g.cover.n_xi, g.cover.n_eta)
