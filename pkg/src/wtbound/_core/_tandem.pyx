# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled slot loop for the fluid tandem queue."""

from libc.stdlib cimport malloc, free


def propagate(const double[:, :, ::1] cap, const double[::1] arrivals,
              const double[::1] backlog, bint store_forward, double[:, ::1] out):
    """Fill ``out[b, i]`` with end-to-end departures by slot ``i`` for trial ``b``.

    ``cap[b, i, n]`` is the capacity of hop ``n`` in slot ``i``; ``out`` has
    one more column than ``cap`` has slots.
    """
    cdef Py_ssize_t B = cap.shape[0], H = cap.shape[1], N = cap.shape[2]
    cdef Py_ssize_t b, i, n
    cdef double o, c, dep
    if arrivals.shape[0] < H or backlog.shape[0] != N:
        raise ValueError("arrivals/backlog do not match capacity array")
    if out.shape[0] != B or out.shape[1] != H + 1:
        raise ValueError("out must have shape (trials, slots + 1)")
    cdef double *q = <double *> malloc(2 * N * sizeof(double))
    if q == NULL:
        raise MemoryError()
    cdef double *fly = q + N
    try:
        with nogil:
            for b in range(B):
                for n in range(N):
                    q[n] = backlog[n]
                    fly[n] = 0.0
                dep = 0.0
                out[b, 0] = 0.0
                for i in range(H):
                    if store_forward:
                        for n in range(1, N):
                            q[n] = q[n] + fly[n]
                        q[0] = q[0] + arrivals[i]
                        for n in range(N):
                            c = cap[b, i, n]
                            o = q[n] if q[n] < c else c
                            q[n] = q[n] - o
                            if n + 1 < N:
                                fly[n + 1] = o
                            else:
                                dep = dep + o
                    else:
                        q[0] = q[0] + arrivals[i]
                        for n in range(N):
                            c = cap[b, i, n]
                            o = q[n] if q[n] < c else c
                            q[n] = q[n] - o
                            if n + 1 < N:
                                q[n + 1] = q[n + 1] + o
                            else:
                                dep = dep + o
                    out[b, i + 1] = dep
    finally:
        free(q)
