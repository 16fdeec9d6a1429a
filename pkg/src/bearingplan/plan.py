"""RRT* with retained collision samples, tree simplification and cell decomposition."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import geom
from .errors import DegenerateInput, NotCovered
from .geom import Polytope2, bisector, box_halfplanes, segment_clear

log = logging.getLogger(__name__)


@dataclass
class Environment:
    """Rectangular workspace with polygonal obstacles and known landmarks.

    ``collision_step`` defaults to 1% of the bounds diagonal.
    """

    bounds_box: tuple
    obstacles: list
    landmarks: np.ndarray
    root: np.ndarray
    collision_step: float | None = None

    def __post_init__(self):
        self.bounds_box = tuple(float(v) for v in self.bounds_box)
        self.obstacles = [np.asarray(o, dtype=float).reshape(-1, 2) for o in self.obstacles]
        self.landmarks = np.asarray(self.landmarks, dtype=float).reshape(-1, 2)
        self.root = geom.as_point(self.root)
        if self.collision_step is None:
            self.collision_step = 0.01 * self.diagonal
        self.collision_step = float(self.collision_step)
        self.obstacle_set = geom.ObstacleSet(self.obstacles)

    @property
    def diagonal(self) -> float:
        xmin, ymin, xmax, ymax = self.bounds_box
        return math.hypot(xmax - xmin, ymax - ymin)

    @property
    def bounds(self) -> Polytope2:
        return Polytope2.box(*self.bounds_box)

    def bounds_halfplanes(self):
        return box_halfplanes(*self.bounds_box)

    def in_bounds(self, p, tol=geom.TOL):
        p = np.atleast_2d(p)
        xmin, ymin, xmax, ymax = self.bounds_box
        return ((p[:, 0] >= xmin - tol) & (p[:, 0] <= xmax + tol)
                & (p[:, 1] >= ymin - tol) & (p[:, 1] <= ymax + tol))

    def in_obstacle(self, p):
        return self.obstacle_set.contains(p)

    def is_free(self, p):
        return self.in_bounds(p) & ~self.in_obstacle(p)

    def validate(self):
        xmin, ymin, xmax, ymax = self.bounds_box
        if not (xmax > xmin and ymax > ymin):
            raise DegenerateInput("bounds must have positive extent")
        if not self.is_free(self.root)[0]:
            raise DegenerateInput("root must lie inside bounds and outside obstacles")
        if len(self.landmarks) < 2:
            raise DegenerateInput("at least two landmarks are required")
        if np.any(self.in_obstacle(self.landmarks)):
            raise DegenerateInput("landmarks must lie outside obstacles")
        for o in self.obstacles:
            if len(o) < 3:
                raise DegenerateInput("obstacle polygons need at least 3 vertices")
        return self


@dataclass
class PlanTree:
    """Tree with parent pointers; node 0 is the root and is its own parent."""

    nodes: np.ndarray
    parent: list
    collision_samples: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float).reshape(-1, 2)
        self.parent = [int(p) for p in self.parent]
        self.collision_samples = np.asarray(self.collision_samples, dtype=float).reshape(-1, 2)

    def __len__(self):
        return len(self.nodes)

    @property
    def root(self) -> int:
        return 0

    def edges(self):
        return [(i, self.parent[i]) for i in range(len(self.nodes)) if i != self.parent[i]]

    def children(self):
        ch = [[] for _ in range(len(self.nodes))]
        for i, j in self.edges():
            ch[j].append(i)
        return ch

    def path_to_root(self, i):
        path = [i]
        while self.parent[path[-1]] != path[-1]:
            path.append(self.parent[path[-1]])
            if len(path) > len(self.nodes):
                raise DegenerateInput("parent pointers contain a cycle")
        return path

    def cost_to_root(self):
        cost = np.zeros(len(self.nodes))
        for i in range(len(self.nodes)):
            p = self.path_to_root(i)
            cost[i] = sum(np.hypot(*(self.nodes[a] - self.nodes[b])) for a, b in zip(p, p[1:]))
        return cost


@dataclass
class Cell:
    edge: tuple
    region: Polytope2
    # nodes whose bisector was shifted so that the parent stays in the cell
    relaxed: list = field(default_factory=list)


def rrt_star(env: Environment, seed: int = 1, max_iter: int = 1500, eta: float = 50.0,
             step: float | None = None) -> PlanTree:
    """Grow an RRT* tree from ``env.root``.

    Free samples are steered toward by at most ``eta``; samples that fall inside
    an obstacle are kept in ``collision_samples`` instead of being dropped.  The
    rewiring radius is ``min(eta, gamma * sqrt(log n / n))`` with
    ``gamma = 2 * eta``.
    """
    if max_iter < 1:
        raise DegenerateInput("max_iter must be >= 1")
    if eta <= 0:
        raise DegenerateInput("eta must be positive")
    step = env.collision_step if step is None else step
    rng = np.random.default_rng(seed)
    xmin, ymin, xmax, ymax = env.bounds_box
    gamma = 2.0 * eta

    nodes = np.zeros((max_iter + 1, 2))
    nodes[0] = env.root
    cost = np.zeros(max_iter + 1)
    parent = [0]
    children = [[]]
    collisions = []
    n = 1

    def clear(a, b):
        return segment_clear(a, b, env, step)

    for _ in range(max_iter):
        q = np.array([rng.uniform(xmin, xmax), rng.uniform(ymin, ymax)])
        if env.in_obstacle(q)[0]:
            collisions.append(q)
            continue
        d = np.hypot(*(nodes[:n] - q).T)
        nearest = int(np.argmin(d))
        if d[nearest] <= geom.TOL:
            continue
        new = q if d[nearest] <= eta else nodes[nearest] + eta * (q - nodes[nearest]) / d[nearest]
        if not env.is_free(new)[0]:
            continue

        dn = np.hypot(*(nodes[:n] - new).T)
        count = n + 1
        radius = min(eta, gamma * math.sqrt(math.log(count) / count))
        near = np.flatnonzero(dn <= radius)
        if nearest not in near:
            near = np.append(near, nearest)
        through = cost[near] + dn[near]
        best = None
        for k in near[np.argsort(through, kind="stable")]:
            if clear(nodes[k], new):
                best = int(k)
                break
        if best is None:
            continue

        idx = n
        nodes[idx] = new
        cost[idx] = cost[best] + dn[best]
        parent.append(best)
        children.append([])
        children[best].append(idx)
        n += 1

        for k in np.sort(near):
            k = int(k)
            if k == best:
                continue
            c = cost[idx] + dn[k]
            if c < cost[k] - 1e-12 and clear(new, nodes[k]):
                children[parent[k]].remove(k)
                parent[k] = idx
                children[idx].append(k)
                delta = c - cost[k]
                stack = [k]
                while stack:
                    m = stack.pop()
                    cost[m] += delta
                    stack.extend(children[m])

    return PlanTree(nodes[:n].copy(), parent, np.array(collisions).reshape(-1, 2))


def simplify_tree(tree: PlanTree, env: Environment, step: float | None = None,
                  clearance: float | None = None) -> PlanTree:
    """Reduce the tree to a small roadmap that still reaches every discarded node.

    Two passes.  Guard selection walks the nodes by decreasing distance to the
    obstacles (then decreasing cost-to-root) and keeps a node only if no node
    kept so far sees it; everything on the guards' paths to the root is
    retained.  Shortcutting then removes an interior node when all of its
    children see its parent with ``clearance`` (default: twice the collision
    step).  Each discarded node keeps a witness: a retained node it
    connects to by a free straight segment.
    """
    step = env.collision_step if step is None else step
    n = len(tree)
    if n <= 1:
        return PlanTree(tree.nodes.copy(), list(tree.parent), tree.collision_samples.copy())
    pts = tree.nodes
    root = tree.root

    def clear(a, b, clearance=0.0):
        return segment_clear(pts[a], pts[b], env, step, clearance)

    cost = tree.cost_to_root()
    # open-space nodes first: they see more and make wider cells
    room = env.obstacle_set.distance(pts)
    order = sorted((i for i in range(n) if i != root), key=lambda i: (-room[i], -cost[i], i))
    guards = []
    witness = {}
    for i in order:
        seen_by = next((g for g in guards if clear(g, i)), None)
        if seen_by is None:
            guards.append(i)
        else:
            witness[i] = seen_by

    keep = {root}
    for g in guards:
        keep.update(tree.path_to_root(g))
    for i in keep:
        witness.pop(i, None)

    parent = {i: tree.parent[i] for i in keep}
    margin = 2.0 * step if clearance is None else clearance
    changed = True
    while changed:
        changed = False
        for i in sorted(keep):
            if i == root:
                continue
            kids = [c for c in keep if c != i and parent[c] == i]
            if not kids:
                continue
            p = parent[i]
            if not all(clear(c, p, margin) for c in kids):
                continue
            others = keep - {i}
            moved = {}
            ok = True
            for r, w in witness.items():
                if w != i:
                    continue
                nw = next((k for k in sorted(others) if clear(r, k)), None)
                if nw is None:
                    ok = False
                    break
                moved[r] = nw
            if not ok:
                continue
            witness.update(moved)
            witness[i] = p
            for c in kids:
                parent[c] = p
            keep.discard(i)
            del parent[i]
            changed = True

    kept = sorted(keep)
    remap = {old: new for new, old in enumerate(kept)}
    return PlanTree(
        pts[kept].copy(),
        [remap[parent[i]] if i != root else 0 for i in kept],
        tree.collision_samples.copy(),
    )


def build_cell(tree: PlanTree, env: Environment, i: int) -> Cell:
    j = tree.parent[i]
    xi, xj = tree.nodes[i], tree.nodes[j]
    hps = env.bounds_halfplanes()
    relaxed = []
    for k in range(len(tree)):
        if k in (i, j):
            continue
        h = bisector(xi, tree.nodes[k])
        if h.value(xj) > geom.TOL:
            # parent would fall outside; slide the boundary onto it
            h = geom.Halfplane(h.normal, float(h.normal @ xj))
            relaxed.append(k)
        hps.append(h)
    return Cell((i, j), Polytope2.from_halfplanes(hps), relaxed)


def build_cells(tree: PlanTree, env: Environment) -> list:
    """One convex cell per tree edge ``(i, parent(i))``.

    The cell is the workspace intersected with the bisector halfplanes between
    node ``i`` and every other node except its parent.  When such a bisector
    would cut the parent off, it is translated to pass through the parent.
    """
    if len(tree) < 2:
        raise DegenerateInput("need at least two nodes to build cells")
    cells = [build_cell(tree, env, i) for i, _ in tree.edges()]
    n_relaxed = sum(1 for c in cells if c.relaxed)
    if n_relaxed:
        log.debug("%d of %d cells relaxed to keep the parent node", n_relaxed, len(cells))
    return cells


def locate_edge(x, tree: PlanTree, cells) -> tuple:
    """Edge whose cell contains ``x``; ties go to the nearest node, then lowest index."""
    x = geom.as_point(x)
    hits = [c for c in cells if c.region.contains(x)]
    if not hits:
        raise NotCovered(f"point {x.tolist()} lies in no cell")
    best = min(hits, key=lambda c: (float(np.hypot(*(x - tree.nodes[c.edge[0]]))), c.edge[0]))
    return best.edge
