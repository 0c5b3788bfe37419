# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled annealing and enumeration kernels.

Must stay step-for-step identical to ``_fallback.py``: same splitmix64
stream, same sweep order, same acceptance test.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp
from libc.stdint cimport uint64_t, int64_t, int32_t, uint8_t
from libc.stdlib cimport malloc, free

cnp.import_array()

NAME = "compiled"

# exp(-40) < 2**-53: such moves are rejected without drawing
cdef double REJECT_ABOVE = 40.0


cdef inline uint64_t _next(uint64_t* state) noexcept nogil:
    cdef uint64_t z
    state[0] += <uint64_t>0x9E3779B97F4A7C15ULL
    z = state[0]
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline double _uniform(uint64_t* state) noexcept nogil:
    return <double>(_next(state) >> 11) * (1.0 / 9007199254740992.0)


cdef void _anneal_one(
    const int64_t[:] indptr, const int32_t[:] indices, const double[:] data,
    const double[:] h, const double[:] betas, uint64_t seed,
    uint8_t[:] x, double* field,
) noexcept nogil:
    cdef Py_ssize_t n = h.shape[0]
    cdef Py_ssize_t nsweeps = betas.shape[0]
    cdef Py_ssize_t v, k, s
    cdef uint64_t state = seed
    cdef double beta, delta, acc
    for v in range(n):
        x[v] = <uint8_t>(_next(&state) >> 63)
    for v in range(n):
        acc = h[v]
        for k in range(indptr[v], indptr[v + 1]):
            if x[indices[k]]:
                acc += data[k]
        field[v] = acc
    for s in range(nsweeps):
        beta = betas[s]
        for v in range(n):
            delta = field[v] if x[v] == 0 else -field[v]
            if delta > 0.0:
                if beta * delta >= REJECT_ABOVE:
                    continue
                if not (_uniform(&state) < exp(-beta * delta)):
                    continue
            if x[v] == 0:
                x[v] = 1
                for k in range(indptr[v], indptr[v + 1]):
                    field[indices[k]] += data[k]
            else:
                x[v] = 0
                for k in range(indptr[v], indptr[v + 1]):
                    field[indices[k]] -= data[k]


def anneal(const int64_t[:] indptr, const int32_t[:] indices, const double[:] data,
           const double[:] h, const double[:] betas, const uint64_t[:] seeds,
           uint8_t[:, :] out):
    """Run one Metropolis annealing read per seed, writing final states to ``out``."""
    cdef Py_ssize_t n = h.shape[0]
    cdef Py_ssize_t r
    cdef double* field = <double*>malloc(max(n, 1) * sizeof(double))
    if field == NULL:
        raise MemoryError()
    try:
        with nogil:
            for r in range(seeds.shape[0]):
                _anneal_one(indptr, indices, data, h, betas, seeds[r], out[r], field)
    finally:
        free(field)


def exhaustive_energies(const int64_t[:] indptr, const int32_t[:] indices, const double[:] data,
                        const double[:] h, double offset):
    """Energies of all ``2**n`` assignments, indexed by the integer whose bit v is x_v.

    Visits states in Gray-code order with incremental updates, so values
    carry O(2**n) accumulated rounding; callers re-evaluate the winners.
    """
    cdef Py_ssize_t n = h.shape[0]
    cdef Py_ssize_t total = (<Py_ssize_t>1) << n
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out_arr = np.empty(total, dtype=np.float64)
    cdef double[:] out = out_arr
    cdef double[:] field = np.array(h, dtype=np.float64)
    cdef uint8_t[:] x = np.zeros(n, dtype=np.uint8)
    cdef Py_ssize_t k, v, j, gray
    cdef double e = offset
    with nogil:
        out[0] = e
        gray = 0
        for k in range(1, total):
            v = 0
            while not ((k >> v) & 1):
                v += 1
            if x[v] == 0:
                e += field[v]
                x[v] = 1
                for j in range(indptr[v], indptr[v + 1]):
                    field[indices[j]] += data[j]
            else:
                e -= field[v]
                x[v] = 0
                for j in range(indptr[v], indptr[v + 1]):
                    field[indices[j]] -= data[j]
            gray ^= (<Py_ssize_t>1) << v
            out[gray] = e
    return out_arr
