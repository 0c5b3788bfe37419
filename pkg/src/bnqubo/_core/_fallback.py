"""Pure-Python kernels mirroring ``_kernels.pyx`` operation for operation."""

import math

import numpy as np

NAME = "python"

_MASK = (1 << 64) - 1
REJECT_ABOVE = 40.0


def _splitmix(state):
    state = (state + 0x9E3779B97F4A7C15) & _MASK
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return state, z ^ (z >> 31)


def _anneal_one(indptr, indices, data, h, betas, seed):
    n = len(h)
    state = int(seed)
    x = [0] * n
    for v in range(n):
        state, z = _splitmix(state)
        x[v] = z >> 63
    nbrs = [list(zip(indices[indptr[v] : indptr[v + 1]], data[indptr[v] : indptr[v + 1]])) for v in range(n)]
    field = []
    for v in range(n):
        acc = h[v]
        for u, c in nbrs[v]:
            if x[u]:
                acc += c
        field.append(acc)
    exp = math.exp
    for beta in betas:
        for v in range(n):
            delta = field[v] if x[v] == 0 else -field[v]
            if delta > 0.0:
                if beta * delta >= REJECT_ABOVE:
                    continue
                state, z = _splitmix(state)
                if not ((z >> 11) * (1.0 / 9007199254740992.0) < exp(-beta * delta)):
                    continue
            if x[v] == 0:
                x[v] = 1
                for u, c in nbrs[v]:
                    field[u] += c
            else:
                x[v] = 0
                for u, c in nbrs[v]:
                    field[u] -= c
    return x


def anneal(indptr, indices, data, h, betas, seeds, out):
    """Run one Metropolis annealing read per seed, writing final states to ``out``."""
    args = (indptr.tolist(), indices.tolist(), data.tolist(), h.tolist(), np.asarray(betas).tolist())
    for r, seed in enumerate(np.asarray(seeds).tolist()):
        out[r, :] = _anneal_one(*args, seed)


def exhaustive_energies(indptr, indices, data, h, offset, chunk=1 << 14):
    n = len(h)
    rows = np.repeat(np.arange(n), np.diff(indptr))
    upper = rows < indices
    qu, qv, qc = rows[upper], indices[upper].astype(np.int64), data[upper]
    out = np.empty(1 << n, dtype=np.float64)
    shifts = np.arange(n, dtype=np.int64)
    for start in range(0, 1 << n, chunk):
        idx = np.arange(start, min(start + chunk, 1 << n), dtype=np.int64)
        X = ((idx[:, None] >> shifts) & 1).astype(np.float64)
        out[idx] = offset + X @ h + (X[:, qu] * X[:, qv]) @ qc
    return out
