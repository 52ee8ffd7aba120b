# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the kernels in ``_pykernels``; same streams, same layout."""
import numpy as np

from libc.math cimport cos, log, pow, sin, sqrt
from libc.stdint cimport uint64_t

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef double TWO_M53 = 1.1102230246251565e-16
cdef double TWO_PI = 6.283185307179586


cdef inline uint64_t mix(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline double unit(uint64_t bits) noexcept nogil:
    return (<double>(bits >> 11) + 0.5) * TWO_M53


def stream_keys(seed, tag, replicas, Py_ssize_t n_particles):
    cdef uint64_t root = mix(<uint64_t>((int(seed) + (int(tag) + 1) * GOLDEN) & 0xFFFFFFFFFFFFFFFF))
    cdef const uint64_t[::1] reps = np.ascontiguousarray(replicas, dtype=np.uint64)
    cdef Py_ssize_t nr = reps.shape[0], r, p
    out = np.empty((nr, n_particles), dtype=np.uint64)
    cdef uint64_t[:, ::1] o = out
    cdef uint64_t kr
    with nogil:
        for r in range(nr):
            kr = mix(root + (reps[r] + 1) * GOLDEN)
            for p in range(n_particles):
                o[r, p] = mix(kr + <uint64_t>(p + 1) * GOLDEN)
    return out


def uniforms(keys, step, Py_ssize_t d):
    k = np.ascontiguousarray(keys, dtype=np.uint64)
    shape = k.shape
    cdef const uint64_t[::1] kf = k.reshape(-1)
    cdef Py_ssize_t n = kf.shape[0], i, j
    out = np.empty((n, d))
    cdef double[:, ::1] o = out
    cdef uint64_t off = <uint64_t>((int(step) + 1) * GOLDEN & 0xFFFFFFFFFFFFFFFF)
    cdef uint64_t sub
    with nogil:
        for i in range(n):
            sub = mix(kf[i] + off)
            for j in range(d):
                o[i, j] = unit(mix(sub + <uint64_t>(j + 1) * GOLDEN))
    return out.reshape(shape + (d,))


def normals(keys, step, Py_ssize_t d):
    k = np.ascontiguousarray(keys, dtype=np.uint64)
    shape = k.shape
    cdef const uint64_t[::1] kf = k.reshape(-1)
    cdef Py_ssize_t n = kf.shape[0], i, j, q
    out = np.empty((n, d))
    cdef double[:, ::1] o = out
    cdef uint64_t off = <uint64_t>((int(step) + 1) * GOLDEN & 0xFFFFFFFFFFFFFFFF)
    cdef uint64_t sub
    cdef double u1, u2, r, ang
    with nogil:
        for i in range(n):
            sub = mix(kf[i] + off)
            j = 0
            q = 0
            while j < d:
                u1 = unit(mix(sub + <uint64_t>(2 * q + 1) * GOLDEN))
                u2 = unit(mix(sub + <uint64_t>(2 * q + 2) * GOLDEN))
                r = sqrt(-2.0 * log(u1))
                ang = TWO_PI * u2
                o[i, j] = r * cos(ang)
                if j + 1 < d:
                    o[i, j + 1] = r * sin(ang)
                j += 2
                q += 1
    return out.reshape(shape + (d,))


def power_kernel_sum(x, y, w, double alpha2, double delta):
    cdef const double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[:, ::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef const double[::1] wv = np.ascontiguousarray(w, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0], m = yv.shape[0], d = xv.shape[1]
    cdef Py_ssize_t i, j, k
    cdef Py_ssize_t bad = -1
    out = np.zeros((n, d))
    cdef double[:, ::1] o = out
    cdef double r2, r, s, diff
    with nogil:
        for i in range(n):
            for j in range(m):
                r2 = 0.0
                for k in range(d):
                    diff = xv[i, k] - yv[j, k]
                    r2 = r2 + diff * diff
                r = sqrt(r2)
                if r < delta:
                    r = delta
                if r == 0.0:
                    bad = i
                    break
                s = wv[j] * pow(r, -alpha2)
                for k in range(d):
                    o[i, k] = o[i, k] + s * (xv[i, k] - yv[j, k])
            if bad >= 0:
                break
    if bad >= 0:
        out[:] = np.nan
    return out, bad
