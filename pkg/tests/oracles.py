"""Slow reference implementations used only by the tests.

Each one is written from the definitions directly, without calling the
package code it is compared against.
"""
import itertools
from collections import deque

import numpy as np


def p2h_update_bruteforce(metapaths, rule_bodies, weights, alpha, batch_size, rollouts, normalized=False):
    """metapaths / rule_bodies: lists of step tuples; weights: {rule_id: w}.

    Returns the new weights, or the old ones when the batch has no fragments.
    """
    seen = []
    for mp in metapaths:
        for i in range(len(mp) - 1):
            seen.append((tuple(mp[i]), tuple(mp[i + 1])))
    distinct = []
    for f in seen:
        if f not in distinct:
            distinct.append(f)
    if not distinct:
        return dict(weights)
    expected = 1.0 / len(distinct)

    universe = []
    for body in rule_bodies.values():
        for i in range(len(body) - 1):
            f = (tuple(body[i]), tuple(body[i + 1]))
            if f not in universe:
                universe.append(f)
    rho = max(len(universe), 1)
    lo = rho / (batch_size * rollouts)
    hi = float(rho * batch_size * rollouts)

    out = dict(weights)
    for rid, body in rule_bodies.items():
        value = 1.0
        for i in range(len(body) - 1):
            f = (tuple(body[i]), tuple(body[i + 1]))
            observed = 0
            for g in seen:
                if g == f:
                    observed += 1
            if normalized:
                observed = observed / len(seen)
            value *= observed / expected
        mu = value
        if mu < lo:
            mu = lo
        if mu > hi:
            mu = hi
        w = weights[rid]
        new = w + w * 2.0 * alpha * ((mu - 1.0) / (mu + 1.0))
        out[rid] = min(max(new, 0.0), 1.0)
    return out


def metapaths_bruteforce(relations, src_type, dst_type, max_len):
    """relations: [(id, src, dst)] already filtered.  Every chained relation
    sequence, via itertools.product over all sequences of each length."""
    found = []
    for length in range(1, max_len + 1):
        for seq in itertools.product(relations, repeat=length):
            if seq[0][1] != src_type or seq[-1][2] != dst_type:
                continue
            if all(a[2] == b[1] for a, b in zip(seq, seq[1:])):
                found.append(tuple(seq))
    return found


def reachable_bfs(adj, src, dst, max_len, banned_edges):
    """adj: {node: [(rel, nxt)]}; path of <= max_len edges avoiding banned (h, r, t)."""
    dist = {src: 0}
    q = deque([src])
    while q:
        u = q.popleft()
        if dist[u] >= max_len:
            continue
        for r, v in adj.get(u, []):
            if (u, r, v) in banned_edges:
                continue
            if v == dst:
                return True
            if v not in dist:
                dist[v] = dist[u] + 1
                q.append(v)
    return False


def dwpc_listing(triples, source, target, metapath_rels, damping):
    """Explicit list of (path nodes, degree products) plus the DWPC sum.

    triples: [(h, r, t)]; metapath_rels: relation ids in order.
    """
    out_deg, in_deg = {}, {}
    for h, r, t in triples:
        out_deg[(h, r)] = out_deg.get((h, r), 0) + 1
        in_deg[(t, r)] = in_deg.get((t, r), 0) + 1
    paths = [[source]]
    for r in metapath_rels:
        paths = [p + [t] for p in paths for (h, rr, t) in triples if h == p[-1] and rr == r]
    listing = []
    for p in paths:
        if p[-1] != target or len(set(p)) != len(p):
            continue
        degs = [out_deg[(p[i], r)] * in_deg[(p[i + 1], r)] for i, r in enumerate(metapath_rels)]
        listing.append((tuple(p), degs))
    total = sum(float(np.prod(degs)) ** (-damping) for _, degs in listing)
    return listing, total


def numpy_policy_logits(params, layers, inputs, current_vec, query_vec, action_vecs):
    """Reference forward pass for one decision.

    params: numpy arrays w_ih{l}, w_hh{l}, bias{l}, w1, b1, w2, b2.  ``inputs``
    are the LSTM inputs in order (start token first).  Gate order i, f, g, o.
    The scorer sees [h_top, current entity, query relation] and returns one
    dot-product score per action embedding.
    """
    def sigmoid(x):
        return 1.0 / (1.0 + np.exp(-x))

    hidden = params["w_hh0"].shape[1]
    h = [np.zeros(hidden) for _ in range(layers)]
    c = [np.zeros(hidden) for _ in range(layers)]
    for x in inputs:
        for layer in range(layers):
            z = params[f"w_ih{layer}"] @ x + params[f"w_hh{layer}"] @ h[layer] + params[f"bias{layer}"]
            i, f, g, o = np.split(z, 4)
            c[layer] = sigmoid(f) * c[layer] + sigmoid(i) * np.tanh(g)
            h[layer] = sigmoid(o) * np.tanh(c[layer])
            x = h[layer]
    state = np.concatenate([h[-1], current_vec, query_vec])
    hid = np.maximum(params["w1"] @ state + params["b1"], 0.0)
    out = params["w2"] @ hid + params["b2"]
    return np.array([a @ out for a in action_vecs])
