"""Input graphs built from a triple set.

Two views are derived from the same triples:

* ``EntityGraph``: entities are nodes, each triple is a labelled directed edge.
  Meta-paths (shortest walks from source entities to sink entities) are read
  off this graph and fed to the recurrent meta-path encoder.
* ``LeviGraph``: every relation occurrence becomes a node pointing at its
  subject and object roots; multi-token entities and relations hang their
  trailing tokens off the root token. This graph feeds the GCN encoder.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .triples import Triple


@dataclass(frozen=True)
class EntityGraph:
    nodes: tuple[str, ...]
    edges: tuple[tuple[int, str, int], ...]

    def out_edges(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in self.nodes]
        for k, (s, _, _) in enumerate(self.edges):
            adj[s].append(k)
        return adj

    def degrees(self) -> tuple[np.ndarray, np.ndarray]:
        indeg = np.zeros(len(self.nodes), dtype=np.int64)
        outdeg = np.zeros(len(self.nodes), dtype=np.int64)
        for s, _, o in self.edges:
            outdeg[s] += 1
            indeg[o] += 1
        return indeg, outdeg


@dataclass(frozen=True)
class MetaPathSequence:
    """Meta-paths as flat token sequences plus the edge ids each one walks."""

    paths: tuple[tuple[str, ...], ...]
    hops: tuple[tuple[int, ...], ...]
    boundary_offsets: tuple[int, ...]
    total_len: int

    @property
    def tokens(self) -> list[str]:
        return [tok for p in self.paths for tok in p]


@dataclass(frozen=True)
class LeviGraph:
    nodes: tuple[str, ...]
    kinds: tuple[str, ...]
    out_adj: np.ndarray

    @property
    def in_adj(self) -> np.ndarray:
        return self.out_adj.T

    def __len__(self) -> int:
        return len(self.nodes)

    def edge_list(self) -> list[tuple[int, int]]:
        src, dst = np.nonzero(self.out_adj)
        return list(zip(src.tolist(), dst.tolist()))


@dataclass(frozen=True)
class NormalizedAdjacency:
    in_norm: np.ndarray
    out_norm: np.ndarray


def build_entity_graph(triples: Sequence[Triple]) -> EntityGraph:
    if not triples:
        raise ValueError("cannot build a graph from zero triples")
    index: dict[str, int] = {}
    nodes: list[str] = []
    edges = []
    for t in triples:
        for ent in (t.subject, t.object):
            if ent not in index:
                index[ent] = len(nodes)
                nodes.append(ent)
        edges.append((index[t.subject], t.relation, index[t.object]))
    return EntityGraph(tuple(nodes), tuple(edges))


def endpoint_sets(g: EntityGraph) -> tuple[list[int], list[int]]:
    """Source and sink node sets, with the imbalance fallback for cycles."""
    indeg, outdeg = g.degrees()
    n = len(g.nodes)
    v_in = [v for v in range(n) if indeg[v] == 0]
    v_out = [v for v in range(n) if outdeg[v] == 0]
    if not v_in:
        bal = outdeg - indeg
        v_in = [v for v in range(n) if bal[v] == bal.max()]
    if not v_out:
        bal = indeg - outdeg
        v_out = [v for v in range(n) if bal[v] == bal.max()]
    return v_in, v_out


def _bfs_parents(g: EntityGraph, adj: list[list[int]], source: int) -> list[int]:
    """Parent edge id for every node reached from ``source`` (-1 = unreached/source)."""
    parent = [-1] * len(g.nodes)
    seen = [False] * len(g.nodes)
    seen[source] = True
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for k in adj[u]:
            v = g.edges[k][2]
            if not seen[v]:
                seen[v] = True
                parent[v] = k
                queue.append(v)
    return parent


def path_tokens(g: EntityGraph, hops: Sequence[int]) -> tuple[str, ...]:
    first = g.edges[hops[0]][0]
    toks = list(g.nodes[first].split())
    for k in hops:
        _, rel, o = g.edges[k]
        toks.extend(rel.split())
        toks.extend(g.nodes[o].split())
    return tuple(toks)


def compute_meta_paths(g: EntityGraph) -> MetaPathSequence:
    """Shortest source-to-sink walks, then any triples no walk covered.

    BFS expands out-edges in insertion order, so among equally short walks
    the one with the lexicographically smallest edge-id sequence wins.
    Unreachable (source, sink) pairs contribute nothing.
    """
    if not g.edges:
        raise ValueError("graph has no edges")
    v_in, v_out = endpoint_sets(g)
    adj = g.out_edges()
    walks: list[tuple[int, ...]] = []
    for src in v_in:
        parent = _bfs_parents(g, adj, src)
        for dst in v_out:
            if dst == src or parent[dst] < 0:
                continue
            hops = []
            v = dst
            while v != src:
                k = parent[v]
                hops.append(k)
                v = g.edges[k][0]
            walks.append(tuple(reversed(hops)))
    covered = {k for w in walks for k in w}
    walks.extend((k,) for k in range(len(g.edges)) if k not in covered)

    paths = tuple(path_tokens(g, w) for w in walks)
    offsets = []
    pos = 0
    for p in paths:
        offsets.append(pos)
        pos += len(p)
    return MetaPathSequence(paths, tuple(walks), tuple(offsets), pos)


def build_levi_graph(triples: Sequence[Triple]) -> LeviGraph:
    if not triples:
        raise ValueError("cannot build a graph from zero triples")
    nodes: list[str] = []
    kinds: list[str] = []
    edges: list[tuple[int, int]] = []
    roots: dict[str, int] = {}

    def add_group(text: str, kind: str) -> int:
        toks = text.split()
        root = len(nodes)
        nodes.append(toks[0])
        kinds.append(kind)
        for tok in toks[1:]:
            edges.append((root, len(nodes)))
            nodes.append(tok)
            kinds.append(kind + "_token")
        return root

    def entity_root(ent: str) -> int:
        if ent not in roots:
            roots[ent] = add_group(ent, "entity")
        return roots[ent]

    for t in triples:
        s = entity_root(t.subject)
        r = add_group(t.relation, "relation")
        o = entity_root(t.object)
        edges.append((r, s))
        edges.append((r, o))

    adj = np.zeros((len(nodes), len(nodes)), dtype=np.float64)
    for a, b in edges:
        adj[a, b] = 1.0
    return LeviGraph(tuple(nodes), tuple(kinds), adj)


def sym_normalize(adj: np.ndarray) -> np.ndarray:
    """D^-1/2 (A + I) D^-1/2 with D the row sums of A + I."""
    a_hat = adj + np.eye(adj.shape[0])
    d = 1.0 / np.sqrt(a_hat.sum(axis=1))
    return d[:, None] * a_hat * d[None, :]


def normalize_adjacency(g: LeviGraph) -> NormalizedAdjacency:
    return NormalizedAdjacency(sym_normalize(g.in_adj), sym_normalize(g.out_adj))


def dump_entity_graph(g: EntityGraph) -> str:
    return "".join(f"{g.nodes[s]} -[{r}]-> {g.nodes[o]}\n" for s, r, o in g.edges)


def dump_levi_graph(g: LeviGraph) -> str:
    lines = []
    for a, b in g.edge_list():
        label = "arg" if g.kinds[a] == "relation" and g.kinds[b] == "entity" else "tok"
        lines.append(f"{g.nodes[a]}#{a} -[{label}]-> {g.nodes[b]}#{b}\n")
    return "".join(lines)
