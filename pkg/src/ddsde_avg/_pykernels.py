"""Pure numpy implementation of the hot kernels.

This is the reference the compiled module is checked against. Every random
draw is a pure function of ``(seed, tag, replica, particle, step, slot)``:
a SplitMix64-style finalizer chained over the coordinates gives one 64-bit
key per (replica, particle) stream, the step index selects the substream and
Box-Muller turns pairs of uniforms into normals.
"""
import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_TWO_M53 = 2.0 ** -53
_TWO_PI = 2.0 * np.pi

MASK64 = (1 << 64) - 1


def mix64(z):
    """SplitMix64 finalizer on a uint64 array (wrapping arithmetic)."""
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> _S30)) * _M1
        z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def _offset(k):
    # (k + 1) * GOLDEN mod 2**64, computed on python ints to avoid overflow checks
    return np.uint64(((int(k) + 1) * int(GOLDEN)) & MASK64)


def stream_keys(seed, tag, replicas, n_particles):
    """Base keys, shape ``(len(replicas), n_particles)``, one per particle stream."""
    root = mix64(np.uint64((int(seed) + int(_offset(tag))) & MASK64))
    reps = np.asarray(replicas, dtype=np.uint64)
    with np.errstate(over="ignore"):
        kr = mix64(root + (reps + np.uint64(1)) * GOLDEN)
        parts = np.arange(1, n_particles + 1, dtype=np.uint64)
        return mix64(kr[:, None] + parts[None, :] * GOLDEN)


def _uniform_slots(keys, step, n_slots):
    with np.errstate(over="ignore"):
        sub = mix64(keys + _offset(step))
        slots = np.arange(1, n_slots + 1, dtype=np.uint64) * GOLDEN
        bits = mix64(sub[..., None] + slots)
    return ((bits >> _S11).astype(np.float64) + 0.5) * _TWO_M53


def uniforms(keys, step, d):
    """Uniforms on (0, 1), shape ``keys.shape + (d,)``."""
    keys = np.asarray(keys, dtype=np.uint64)
    return _uniform_slots(keys, step, d)


def normals(keys, step, d):
    """Standard normals, shape ``keys.shape + (d,)``."""
    keys = np.asarray(keys, dtype=np.uint64)
    npairs = (d + 1) // 2
    u = _uniform_slots(keys, step, 2 * npairs)
    u1 = u[..., 0::2]
    u2 = u[..., 1::2]
    r = np.sqrt(-2.0 * np.log(u1))
    ang = _TWO_PI * u2
    z = np.empty(keys.shape + (2 * npairs,))
    z[..., 0::2] = r * np.cos(ang)
    z[..., 1::2] = r * np.sin(ang)
    return z[..., :d]


def power_kernel_sum(x, y, w, alpha2, delta):
    """Sum_j w_j (x_i - y_j) / max(|x_i - y_j|, delta)**alpha2 for every row of ``x``.

    Returns ``(out, bad)`` where ``bad`` is the first row index hitting a
    zero distance with ``delta == 0`` (or -1).
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    n, d = x.shape
    out = np.empty((n, d))
    bad = -1
    # chunk rows to bound the (n, m, d) temporary
    chunk = max(1, 2_000_000 // max(1, y.shape[0] * d))
    for i0 in range(0, n, chunk):
        diff = x[i0:i0 + chunk, None, :] - y[None, :, :]
        r = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        if delta > 0.0:
            scale = np.maximum(r, delta) ** (-alpha2)
        else:
            zero = r == 0.0
            if zero.any():
                rows = np.nonzero(zero.any(axis=1))[0]
                bad = i0 + int(rows[0])
                out[:] = np.nan
                return out, bad
            scale = r ** (-alpha2)
        out[i0:i0 + chunk] = np.einsum("ij,ijk->ik", scale * w[None, :], diff)
    return out, bad
