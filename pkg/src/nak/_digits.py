"""Low level digit conversions and F_p polynomial products.

Integers are converted to base-p digit arrays through gmpy2 when the base
fits its alphabet; polynomial products over F_p go through Kronecker
substitution so that the heavy lifting is a single big-integer multiply.
"""

import gmpy2
import numpy as np

# gmpy2 spells digit 10 as "a" up to base 36 and as "A" above it
_ALPHABETS = ("0123456789abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ",
              "0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz")
_DECODE, _ENCODE = [], []
for _a in _ALPHABETS:
    _t = np.full(256, 255, dtype=np.uint8)
    for _i, _c in enumerate(_a):
        _t[ord(_c)] = _i
    _DECODE.append(_t)
    _ENCODE.append(np.frombuffer(_a.encode(), dtype=np.uint8))


def int_to_digits(u, p, n):
    """Little-endian base-p digits of u mod p^n, as an int64 array of length n."""
    out = np.zeros(n, dtype=np.int64)
    if n <= 0 or u == 0:
        return out
    if p <= 62:
        s = gmpy2.mpz(u).digits(p)
        raw = _DECODE[p > 36][np.frombuffer(s.encode(), dtype=np.uint8)][::-1]
        m = min(n, raw.size)
        out[:m] = raw[:m]
        return out
    i = 0
    u = int(u)
    while u and i < n:
        u, out[i] = divmod(u, p)
        i += 1
    return out


def digits_to_int(ds, p):
    """Inverse of int_to_digits (little-endian digits, any length)."""
    ds = np.asarray(ds, dtype=np.int64)
    if ds.size == 0:
        return 0
    if p <= 62:
        s = _ENCODE[p > 36][ds[::-1]].tobytes().decode()
        return int(gmpy2.mpz(s, p))
    u = 0
    for d in ds[::-1].tolist():
        u = u * p + d
    return u


def _slot_dtype(bound):
    for dt in (np.uint8, np.uint16, np.uint32, np.uint64):
        if bound < np.iinfo(dt).max:
            return dt
    raise OverflowError("coefficient bound too large for Kronecker packing")


def poly_mul(a, b, p, n=None):
    """Product of two F_p coefficient arrays (little-endian), truncated to n terms."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    if a.size == 0 or b.size == 0:
        return np.zeros(0 if n is None else n, dtype=np.int64)
    full = a.size + b.size - 1
    if n is None:
        n = full
    if n < full:
        a = a[:n]
        b = b[:n]
        full = a.size + b.size - 1
    if min(a.size, b.size) <= 64:
        c = np.convolve(a, b) % p
    else:
        dt = _slot_dtype(min(a.size, b.size) * (p - 1) ** 2 + 1)
        w = np.dtype(dt).itemsize
        ia = int.from_bytes(a.astype(dt).tobytes(), "little")
        ib = int.from_bytes(b.astype(dt).tobytes(), "little")
        prod = (gmpy2.mpz(ia) * gmpy2.mpz(ib))
        nbytes = full * w
        raw = int(prod).to_bytes(nbytes, "little")
        c = np.frombuffer(raw, dtype=dt).astype(np.int64) % p
    out = np.zeros(n, dtype=np.int64)
    m = min(n, c.size)
    out[:m] = c[:m]
    return out


def poly_inv(a, p, n):
    """Inverse of a power series with a[0] != 0, modulo t^n (Newton iteration)."""
    a = np.asarray(a, dtype=np.int64)
    inv0 = pow(int(a[0]), -1, p)
    y = np.array([inv0], dtype=np.int64)
    k = 1
    while k < n:
        k = min(2 * k, n)
        ay = poly_mul(a[:k], y, p, k)
        # y <- y (2 - a y)
        corr = (-ay) % p
        corr[0] = (corr[0] + 2) % p
        y = poly_mul(y, corr, p, k)
    return y[:n]


def frobenius_spread(a, p, n):
    """a(t)^p = a(t^p) over F_p, truncated to n terms."""
    out = np.zeros(n, dtype=np.int64)
    m = min(a.size, (n + p - 1) // p)
    out[: m * p : p] = a[:m]
    return out


def poly_pow(a, e, p, n):
    """a^e mod t^n for a power series a over F_p, using Frobenius on p-divisible exponents."""
    if e == 0:
        out = np.zeros(n, dtype=np.int64)
        if n:
            out[0] = 1
        return out
    q, s = divmod(e, p)
    if q:
        w = frobenius_spread(poly_pow(a, q, p, (n + p - 1) // p), p, n)
    else:
        w = None
    if s:
        r = _small_pow(a[:n], s, p, n)
        return r if w is None else poly_mul(r, w, p, n)
    return w


def _small_pow(a, s, p, n):
    result = None
    base = np.asarray(a[:n], dtype=np.int64)
    while s:
        if s & 1:
            result = base if result is None else poly_mul(result, base, p, n)
        s >>= 1
        if s:
            base = poly_mul(base, base, p, n)
    return result
