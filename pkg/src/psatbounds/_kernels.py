"""Compiled inner loops for exhaustive and heuristic MAX-SAT on small formulas.

Clauses arrive as two (m, k) arrays: 0-based variable indices and polarities
(1 = positive literal).  A clause is unsatisfied when every one of its k
literal occurrences is false, so repeated or complementary literals need no
special casing.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _occurrences(var, n):
    m, k = var.shape
    counts = np.zeros(n + 1, dtype=np.int64)
    for c in range(m):
        for j in range(k):
            counts[var[c, j] + 1] += 1
    start = np.cumsum(counts)
    occ_clause = np.empty(m * k, dtype=np.int64)
    occ_slot = np.empty(m * k, dtype=np.int64)
    fill = start[:-1].copy()
    for c in range(m):
        for j in range(k):
            v = var[c, j]
            occ_clause[fill[v]] = c
            occ_slot[fill[v]] = j
            fill[v] += 1
    return start, occ_clause, occ_slot


@njit(cache=True, nogil=True)
def profile_histogram(var, sign, n):
    """Count assignments by (H, U) with a Gray-code walk.

    Returns an int64 array of shape (k*m + 1, m + 1); row i holds H = 2i - km.
    """
    m, k = var.shape
    start, occ_clause, occ_slot = _occurrences(var, n)
    bits = np.zeros(n, dtype=np.int8)
    ntrue = np.zeros(m, dtype=np.int64)
    sat_occ = 0
    for c in range(m):
        for j in range(k):
            if sign[c, j] == 0:
                ntrue[c] += 1
                sat_occ += 1
    unsat = 0
    for c in range(m):
        if ntrue[c] == 0:
            unsat += 1
    hist = np.zeros((k * m + 1, m + 1), dtype=np.int64)
    hist[sat_occ, unsat] += 1
    for step in range(1, 1 << n):
        v = 0
        while not (step >> v) & 1:
            v += 1
        bits[v] ^= 1
        b = bits[v]
        for t in range(start[v], start[v + 1]):
            c = occ_clause[t]
            if sign[c, occ_slot[t]] == b:
                if ntrue[c] == 0:
                    unsat -= 1
                ntrue[c] += 1
                sat_occ += 1
            else:
                ntrue[c] -= 1
                sat_occ -= 1
                if ntrue[c] == 0:
                    unsat += 1
        hist[sat_occ, unsat] += 1
    return hist


@njit(cache=True, nogil=True)
def min_unsat_bnb(var, sign, n, bound):
    """Branch and bound for the minimum number of unsatisfied clauses.

    Only solutions with fewer than ``bound`` unsatisfied clauses are sought;
    returns (best, assignment) with best = bound when none exists.
    """
    m, k = var.shape
    start, occ_clause, occ_slot = _occurrences(var, n)
    # branch on frequently occurring variables first
    deg = start[1:] - start[:-1]
    order = np.argsort(-deg, kind="mergesort")
    nfalse = np.zeros(m, dtype=np.int64)
    ntrue = np.zeros(m, dtype=np.int64)
    pos_occ = np.zeros(n, dtype=np.int64)
    for v in range(n):
        for t in range(start[v], start[v + 1]):
            if sign[occ_clause[t], occ_slot[t]] == 1:
                pos_occ[v] += 1
    first_val = np.empty(n, dtype=np.int8)
    for v in range(n):
        first_val[v] = 1 if 2 * pos_occ[v] >= deg[v] else 0
    best = bound
    best_bits = np.zeros(n, dtype=np.int8)
    bits = np.zeros(n, dtype=np.int8)
    tried = np.zeros(n + 1, dtype=np.int8)  # values tried at each depth
    depth = 0
    unsat = 0
    while depth >= 0:
        if depth == n:
            if unsat < best:
                best = unsat
                best_bits[:] = bits
            depth -= 1
            # undo assignment at depth
            if depth >= 0:
                v = order[depth]
                b = bits[v]
                for t in range(start[v], start[v + 1]):
                    c = occ_clause[t]
                    if sign[c, occ_slot[t]] == b:
                        ntrue[c] -= 1
                    else:
                        if nfalse[c] == k and ntrue[c] == 0:
                            unsat -= 1
                        nfalse[c] -= 1
            continue
        v = order[depth]
        if tried[depth] == 2 or best == 0:
            tried[depth] = 0
            depth -= 1
            if depth >= 0:
                u = order[depth]
                b = bits[u]
                for t in range(start[u], start[u + 1]):
                    c = occ_clause[t]
                    if sign[c, occ_slot[t]] == b:
                        ntrue[c] -= 1
                    else:
                        if nfalse[c] == k and ntrue[c] == 0:
                            unsat -= 1
                        nfalse[c] -= 1
            continue
        b = first_val[v] if tried[depth] == 0 else 1 - first_val[v]
        tried[depth] += 1
        bits[v] = b
        for t in range(start[v], start[v + 1]):
            c = occ_clause[t]
            if sign[c, occ_slot[t]] == b:
                ntrue[c] += 1
            else:
                nfalse[c] += 1
                if nfalse[c] == k and ntrue[c] == 0:
                    unsat += 1
        if unsat >= best:
            # prune: undo and try the next value
            for t in range(start[v], start[v + 1]):
                c = occ_clause[t]
                if sign[c, occ_slot[t]] == b:
                    ntrue[c] -= 1
                else:
                    if nfalse[c] == k and ntrue[c] == 0:
                        unsat -= 1
                    nfalse[c] -= 1
            continue
        depth += 1
    return best, best_bits


@njit(cache=True, nogil=True)
def walksat(var, sign, n, steps, noise, restart, seed):
    """Noisy greedy local search; returns (best unsat count, best assignment)."""
    np.random.seed(seed)
    m, k = var.shape
    start, occ_clause, occ_slot = _occurrences(var, n)
    bits = np.zeros(n, dtype=np.int8)
    ntrue = np.zeros(m, dtype=np.int64)
    unsat_list = np.empty(m, dtype=np.int64)
    where = np.full(m, -1, dtype=np.int64)
    delta = np.zeros(m, dtype=np.int64)
    best = m + 1
    best_bits = np.zeros(n, dtype=np.int8)
    n_unsat = 0
    for step in range(steps):
        if step % restart == 0:
            for v in range(n):
                bits[v] = np.random.randint(0, 2)
            n_unsat = 0
            for c in range(m):
                ntrue[c] = 0
                where[c] = -1
                for j in range(k):
                    if bits[var[c, j]] == sign[c, j]:
                        ntrue[c] += 1
                if ntrue[c] == 0:
                    where[c] = n_unsat
                    unsat_list[n_unsat] = c
                    n_unsat += 1
            if n_unsat < best:
                best = n_unsat
                best_bits[:] = bits
        if n_unsat == 0:
            break
        c = unsat_list[np.random.randint(0, n_unsat)]
        if np.random.random() < noise:
            pick = var[c, np.random.randint(0, k)]
        else:
            pick = -1
            pick_break = m + 1
            for j in range(k):
                v = var[c, j]
                # clauses made unsatisfied by flipping v
                for t in range(start[v], start[v + 1]):
                    d = occ_clause[t]
                    if bits[v] == sign[d, occ_slot[t]]:
                        delta[d] -= 1
                brk = 0
                for t in range(start[v], start[v + 1]):
                    d = occ_clause[t]
                    if delta[d] != 0:
                        if ntrue[d] + delta[d] == 0:
                            brk += 1
                        delta[d] = 0
                if brk < pick_break:
                    pick_break = brk
                    pick = v
        v = pick
        bits[v] ^= 1
        b = bits[v]
        for t in range(start[v], start[v + 1]):
            d = occ_clause[t]
            if sign[d, occ_slot[t]] == b:
                if ntrue[d] == 0:
                    # remove d from the unsatisfied list
                    i = where[d]
                    last = unsat_list[n_unsat - 1]
                    unsat_list[i] = last
                    where[last] = i
                    where[d] = -1
                    n_unsat -= 1
                ntrue[d] += 1
            else:
                ntrue[d] -= 1
                if ntrue[d] == 0:
                    where[d] = n_unsat
                    unsat_list[n_unsat] = d
                    n_unsat += 1
        if n_unsat < best:
            best = n_unsat
            best_bits[:] = bits
    return best, best_bits
