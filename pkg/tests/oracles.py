"""Independent reference computations used only by the tests."""
from __future__ import annotations

import itertools

import numpy as np


def simple_paths(n_nodes, edges, src, dst):
    """All simple directed walks src -> dst as tuples of edge ids (DFS enumeration)."""
    out = []

    def dfs(node, visited, hops):
        if node == dst and hops:
            out.append(tuple(hops))
            return
        for k, (s, _, o) in enumerate(edges):
            if s == node and o not in visited:
                dfs(o, visited | {o}, hops + [k])

    dfs(src, {src}, [])
    return out


def meta_paths_oracle(triples):
    """Shortest walk per (source, sink) pair; ties -> smallest edge-id tuple; then uncovered edges."""
    names = []
    for t in triples:
        for e in (t.subject, t.object):
            if e not in names:
                names.append(e)
    edges = [(names.index(t.subject), t.relation, names.index(t.object)) for t in triples]
    n = len(names)
    indeg = [sum(1 for _, _, o in edges if o == v) for v in range(n)]
    outdeg = [sum(1 for s, _, _ in edges if s == v) for v in range(n)]
    v_in = [v for v in range(n) if indeg[v] == 0]
    v_out = [v for v in range(n) if outdeg[v] == 0]
    walks = []
    for a in v_in:
        for b in v_out:
            if a == b:
                continue
            cands = simple_paths(n, edges, a, b)
            if cands:
                walks.append(min(cands, key=lambda p: (len(p), p)))
    used = {k for w in walks for k in w}
    walks += [(k,) for k in range(len(edges)) if k not in used]
    return walks


def three_node_dags():
    """Every DAG on 3 labelled nodes with at least one edge (no parallel edges)."""
    pairs = [(0, 1), (0, 2), (1, 2)]
    for states in itertools.product((None, 0, 1), repeat=3):
        edges = []
        for (a, b), st in zip(pairs, states):
            if st == 0:
                edges.append((a, b))
            elif st == 1:
                edges.append((b, a))
        if not edges:
            continue
        if _has_cycle(3, edges):
            continue
        yield edges


def _has_cycle(n, edges):
    adj = {v: [b for a, b in edges if a == v] for v in range(n)}
    state = [0] * n

    def visit(v):
        state[v] = 1
        for w in adj[v]:
            if state[w] == 1 or (state[w] == 0 and visit(w)):
                return True
        state[v] = 2
        return False

    return any(state[v] == 0 and visit(v) for v in range(n))


def random_dag(rng: np.random.Generator, max_nodes=5, max_edges=6):
    n = int(rng.integers(2, max_nodes + 1))
    order = rng.permutation(n)
    m = int(rng.integers(1, max_edges + 1))
    edges = []
    for _ in range(m):
        i, j = sorted(rng.choice(n, size=2, replace=False))
        edges.append((int(order[i]), int(order[j])))
    return edges


def lcs_free_levenshtein(a, b):
    """Plain O(nm) word edit distance (insert/delete/substitute), no shifts."""
    d = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i in range(len(a) + 1):
        d[i][0] = i
    for j in range(len(b) + 1):
        d[0][j] = j
    for i in range(1, len(a) + 1):
        for j in range(1, len(b) + 1):
            d[i][j] = min(d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + (a[i - 1] != b[j - 1]))
    return d[-1][-1]
