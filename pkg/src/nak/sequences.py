"""Fast residue-cell streams for ([alpha x^n]) and ([beta^n x]).

Monte-Carlo points x are finite expansions with D random digits, taken as
exact.  In Q_p the integral part of c * m^n * p^-s_n is read off the digits
s_n .. s_n + L - 1 of the p-adic integer c m^n, which a numba kernel keeps in
redundant base-p^k limbs and multiplies by m once per step.  In F_p((t)) the
window of u^n around degree r n comes from the window of u^(n // p) by the
Frobenius identity u^(p m + s) = u^s (u^m)(t^p).

`reference_cells` recomputes the same cells through the element arithmetic
and is what the tests cross-check against.
"""

from dataclasses import dataclass
from fractions import Fraction

import gmpy2
import numba
import numpy as np

from .errors import InvalidConfiguration, InvalidInput
from .field import FieldSpec, LocalFieldElement, from_fraction, vp_int
from .measures import integral_cell

BLOCK = 2000


# ----- characteristic 0 -------------------------------------------------

LIMB_CAP = 1_700_000_000


def limb_params(p):
    """(k, B = p^k) with B below LIMB_CAP: three products of limbs < B + 3 fit in int64
    and the float quotient P / B is exact to within one."""
    k = 1
    while p ** (k + 1) < LIMB_CAP:
        k += 1
    return k, p ** k


def to_limbs(u, p, k, n):
    """Little-endian base p^k limbs of the nonnegative integer u (first n limbs)."""
    out = np.zeros(n, dtype=np.int64)
    u = gmpy2.mpz(u)
    if u == 0:
        return out
    if p <= 62:
        arr = np.frombuffer(u.digits(p).encode(), dtype=np.uint8)[::-1]
        if p <= 10:
            arr = arr.astype(np.int64) - 48
        else:
            arr = arr.astype(np.int64)
            # gmpy2 writes 10.. as a.. up to base 36, as A..Z then a..z above it
            low = 87 if p <= 36 else 61
            arr = np.where(arr >= 97, arr - low, np.where(arr >= 65, arr - 55, arr - 48))
        pad = (-len(arr)) % k
        arr = np.concatenate([arr, np.zeros(pad, np.int64)]).reshape(-1, k)
        vals = arr @ np.array([p ** i for i in range(k)], dtype=np.int64)
        m = min(n, len(vals))
        out[:m] = vals[:m]
        return out
    B = gmpy2.mpz(p) ** k
    i = 0
    while u and i < n:
        u, r = gmpy2.f_divmod(u, B)
        out[i] = int(r)
        i += 1
    return out


@numba.njit(cache=True)
def _carry_into(Y, j, B):
    # carry (0 or 1) into limb j from the redundant lower limbs (each < 2B)
    i = j - 1
    while i >= 0:
        y = Y[i]
        if y >= B:
            return 1
        if y < B - 1:
            return 0
        i -= 1
    return 0


@numba.njit(cache=True)
def _power_cells(y0, mult, e0, e1, N, L, nlimbs, p, k, B, PW):
    """Cells of the digits s_n .. s_n + L - 1 of y0 * mult^n, s_n = -(e0 + n e1), n = 1..N.

    Limbs stay below B + 3.  Each step splits P_i = Y_i m0 + Y_(i-1) m1 + Y_(i-2) m2
    as h_i B + lo_i, then lo_i + h_(i-1) as g_i B + r_i, and sets Y_i = r_i + g_(i-1).
    No pass carries a serial chain, so the loops vectorize.
    """
    invB = 1.0 / B
    Y = np.zeros(nlimbs + 2, np.int64)
    for i in range(min(len(y0), nlimbs)):
        Y[i + 2] = y0[i]
    H = np.zeros(nlimbs + 1, np.int64)
    LO = np.zeros(nlimbs, np.int64)
    G = np.zeros(nlimbs + 1, np.int64)
    m0 = mult[0]
    m1 = mult[1]
    m2 = mult[2]
    out = np.empty(N, np.int64)
    for n in range(1, N + 1):
        for i in range(nlimbs):
            P = Y[i + 2] * m0 + Y[i + 1] * m1 + Y[i] * m2
            h = np.int64(P * invB)
            lo = P - h * B
            # the float quotient is off by at most one either way
            neg = lo >> 63
            h += neg
            lo += B & neg
            big = (B - 1 - lo) >> 63
            h -= big
            lo -= B & big
            H[i + 1] = h
            LO[i] = lo
        for i in range(nlimbs):
            t = LO[i] + H[i]
            g = np.int64(t * invB)
            r = t - g * B
            neg = r >> 63
            g += neg
            r += B & neg
            big = (B - 1 - r) >> 63
            g -= big
            r -= B & big
            LO[i] = r
            G[i + 1] = g
        for i in range(nlimbs):
            Y[i + 2] = LO[i] + G[i]
        s = -(e0 + n * e1)
        cell = 0
        w = 1
        lastj = -1
        cur = 0
        cin = 0
        for d in range(L):
            pos = s + d
            if pos >= 0:
                j = pos // k
                if j != lastj:
                    if lastj == j - 1:
                        cin = 1 if cur >= B else 0
                    else:
                        cin = _carry_into(Y[2:], j, B)
                    cur = Y[j + 2] + cin
                    lastj = j
                v = cur - B if cur >= B else cur
                cell += ((v // PW[pos % k]) % p) * w
            w *= p
        out[n - 1] = cell
    return out


def _unit_mod(c, p, M):
    """(v_p(c), unit part of the rational c modulo p^M)."""
    c = Fraction(c)
    if c == 0:
        raise InvalidInput("coefficient must be nonzero")
    v = vp_int(c.numerator, p) - vp_int(c.denominator, p)
    num = c.numerator // p ** max(v, 0)
    den = c.denominator // p ** max(-v, 0)
    mod = gmpy2.mpz(p) ** M
    return v, int(gmpy2.mpz(num) * gmpy2.invert(den, mod) % mod)


def qp_cells(p, c0, mult, s0, s1, N, L, block=BLOCK):
    """Level-L cells of the digits s0 + n s1 .. + L - 1 of c0 * mult^n for n = 1..N.

    c0 and mult are p-adic integers given as nonnegative ints (mult a unit).
    Uses the limb kernel when mult fits in three limbs, gmpy2 otherwise.
    """
    if s1 < 0:
        raise InvalidInput("the digit offset must not decrease")
    k, B = limb_params(p)
    top_digit = s0 + N * s1 + L + 2
    full = gmpy2.mpz(p) ** max(top_digit, 1)
    mult = gmpy2.mpz(mult) % full
    y = gmpy2.mpz(c0) % full
    out = np.empty(N, dtype=np.int64)
    if p >= LIMB_CAP or mult >= gmpy2.mpz(B) ** 3:
        pL = gmpy2.mpz(p) ** L
        for n in range(1, N + 1):
            y = y * mult % full
            s = s0 + n * s1
            out[n - 1] = int((y // gmpy2.mpz(p) ** s) % pL) if s >= 0 else int((y * gmpy2.mpz(p) ** -s) % pL)
        return out
    ml = to_limbs(mult, p, k, 3)
    PW = np.array([p ** i for i in range(k + 1)], dtype=np.int64)
    mb = gmpy2.powmod(mult, block, full)
    for a in range(1, N + 1, block):
        cnt = min(block, N + 1 - a)
        if a > 1:
            y = y * mb % full
        top = s0 + (a - 1 + cnt) * s1 + L + 1
        nl = max(top, 1) // k + 2
        yl = to_limbs(y, p, k, nl)
        # s_n inside the block: s0 + (a - 1 + n) s1 = -(e0 + n e1)
        e0 = -(s0 + (a - 1) * s1)
        out[a - 1: a - 1 + cnt] = _power_cells(yl, ml, e0, -s1, cnt, L, nl, p, k, B, PW)
    return out


# ----- characteristic p -------------------------------------------------

@numba.njit(cache=True)
def _frobenius_windows(upow, D, p, r, A, Bw, N, vshift, L, a_poly, out):
    """Cells of the coefficients of a * u^n at degrees r n - vshift .. + L - 1, n = 1..N.

    W[n, j + A] holds the coefficient of t^(r n + j) in u^n for -A <= j <= Bw.
    upow[s] holds u^s in full for s < p (degree <= s (D - 1)).
    """
    W = np.zeros((N + 1, A + Bw + 1), np.int16)
    W[0, A] = 1
    da = len(a_poly)
    for n in range(1, N + 1):
        m = n // p
        s = n - m * p
        rn = r * n
        rm = r * m
        degs = s * (D - 1)
        for jj in range(A + Bw + 1):
            j = rn - A + jj
            if j < 0:
                continue
            acc = 0
            # j = i + p e with 0 <= i <= deg(u^s) and e inside the stored window of u^m
            ilo = j - p * (rm + Bw)
            if ilo < 0:
                ilo = 0
            ihi = j - p * (rm - A)
            if ihi > degs:
                ihi = degs
            if ihi > j:
                ihi = j
            i = ilo + ((j - ilo) % p)
            while i <= ihi:
                acc += upow[s, i] * W[m, (j - i) // p - rm + A]
                i += p
            W[n, jj] = acc % p
        # a * u^n at degree rn - vshift + d, d = 0..L-1
        cell = 0
        w = 1
        for d in range(L):
            deg = rn - vshift + d
            acc = 0
            for i in range(da):
                jj = deg - i - rn + A
                if 0 <= jj <= A + Bw:
                    acc += a_poly[i] * W[n, jj]
            cell += (acc % p) * w
            w *= p
        out[n - 1] = cell


@numba.njit(cache=True)
def _popcount64(x):
    x = x - ((x >> np.uint64(1)) & np.uint64(0x5555555555555555))
    x = (x & np.uint64(0x3333333333333333)) + ((x >> np.uint64(2)) & np.uint64(0x3333333333333333))
    x = (x + (x >> np.uint64(4))) & np.uint64(0x0F0F0F0F0F0F0F0F)
    return (x * np.uint64(0x0101010101010101)) >> np.uint64(56)


@numba.njit(cache=True)
def _frobenius_windows_f2(u, r, A, Bw, N, va, L, a_poly, out):
    """p = 2 version of _frobenius_windows with bit-packed dot products.

    For odd n = 2m + 1, coefficient j of u^n is the parity of
    sum_k u_(c + 2k) (u^m)_((j - c)/2 - k), c = j mod 2: an AND of the
    decimated u against the reversed window of u^m, then a popcount.
    """
    D = len(u)
    Wd = A + Bw + 1
    keep = N // 2 + 1
    W = np.zeros((keep + 1, Wd), np.uint8)
    W[0, A] = 1
    row = np.zeros(Wd, np.uint8)
    half = (D + 1) // 2
    nk = (half + 63) // 64
    # decimated u, both parities, packed little-endian into words
    V = np.zeros((2, nk), np.uint64)
    for c in range(2):
        k = 0
        i = c
        while i < D:
            if u[i]:
                V[c, k >> 6] |= np.uint64(1) << np.uint64(k & 63)
            k += 1
            i += 2
    # reversed window of u^m padded by nk + 1 words of zeros on both sides
    pad = 64 * (nk + 1)
    nR = (Wd + 2 * pad + 63) // 64 + 1
    R = np.zeros(nR, np.uint64)
    da = len(a_poly)
    for n in range(1, N + 1):
        m = n // 2
        s = n - 2 * m
        rn = r * n
        rm = r * m
        if s == 0:
            for jj in range(Wd):
                j = rn - A + jj
                row[jj] = 0
                if j >= 0 and (j & 1) == 0:
                    idx = j // 2 - rm + A
                    if 0 <= idx < Wd:
                        row[jj] = W[m, idx]
        else:
            for w in range(nR):
                R[w] = 0
            # R bit (pad + Wd - 1 - t) = (u^m)_t in window coordinates
            for t in range(Wd):
                if W[m, t]:
                    b = pad + Wd - 1 - t
                    R[b >> 6] |= np.uint64(1) << np.uint64(b & 63)
            for jj in range(Wd):
                j = rn - A + jj
                if j < 0:
                    row[jj] = 0
                    continue
                c = j & 1
                e0 = (j - c) // 2 - rm + A
                off = pad + Wd - 1 - e0
                acc = np.uint64(0)
                for w in range(nk):
                    b = off + 64 * w
                    q = b >> 6
                    sh = b & 63
                    if sh == 0:
                        seg = R[q]
                    else:
                        seg = (R[q] >> np.uint64(sh)) | (R[q + 1] << np.uint64(64 - sh))
                    acc += _popcount64(seg & V[c, w])
                row[jj] = np.uint8(acc & np.uint64(1))
        if n <= keep:
            for jj in range(Wd):
                W[n, jj] = row[jj]
        cell = 0
        wgt = 1
        for d in range(L):
            deg = rn - va + d
            acc2 = 0
            for i in range(da):
                jj = deg - i - rn + A
                if 0 <= jj < Wd:
                    acc2 += a_poly[i] * row[jj]
            cell += (acc2 & 1) * wgt
            wgt *= 2
        out[n - 1] = cell


def _poly_powers(u, p, count):
    D = len(u)
    width = (count - 1) * (D - 1) + 1
    out = np.zeros((count, max(width, 1)), dtype=np.int64)
    out[0, 0] = 1
    cur = np.array([1], dtype=np.int64)
    for s in range(1, count):
        cur = np.convolve(cur, u) % p
        out[s, : len(cur)] = cur
    return out


def fpt_cells(p, u, r, N, L, a_poly=(1,), va=0):
    """Level-L cells of [alpha x^n], n = 1..N, x = t^-r u (u a polynomial, u_0 != 0), alpha = t^va a(t)."""
    u = np.asarray(u, dtype=np.int64) % p
    if u[0] == 0:
        raise InvalidInput("u must have a nonzero constant term")
    a = np.asarray(a_poly, dtype=np.int64) % p
    D = len(u)
    # coefficient i of alpha x^n is coefficient i + r n - va of a u^n
    A = max(D - 1, va + len(a) - 1, 0) + 1
    Bw = max(r, L - 1 - va, 0) + 1
    out = np.empty(N, dtype=np.int64)
    if p == 2:
        _frobenius_windows_f2(u, r, A, Bw, N, va, L, a, out)
        return out
    upow = _poly_powers(u, p, p)
    _frobenius_windows(upow, D, p, r, A, Bw, N, va, L, a, out)
    return out


# ----- reference path ---------------------------------------------------

def reference_cells(spec, kind, coef, x, N, L, start=1):
    """The same cells through LocalFieldElement arithmetic (slow; for cross-checks)."""
    out = []
    if kind == "power":
        c = coef if isinstance(coef, LocalFieldElement) else None
        for n in range(start, start + N):
            y = x ** n
            if c is None:
                cc = _embed_coef(coef, spec, y.rel_precision + 4)
            else:
                cc = c
            out.append(integral_cell(cc * y, L))
        return np.array(out, dtype=np.int64)
    b = coef if isinstance(coef, LocalFieldElement) else _embed_coef(coef, spec, x.rel_precision + 8)
    y = x
    for n in range(start, start + N):
        y = b * y if n > start or start == 1 else (b ** n) * x
        out.append(integral_cell(y, L))
    return np.array(out, dtype=np.int64)


def _embed_coef(c, spec, rel):
    c = Fraction(c)
    v = vp_int(c.numerator, spec.p) - vp_int(c.denominator, spec.p)
    return from_fraction(c, spec, v + rel)


# ----- sources ------------------------------------------------------------

@dataclass
class FiniteX:
    """x = pi^-r * u with u a finite digit string, treated as exact."""

    spec: FieldSpec
    r: int
    digits: np.ndarray

    def unit_int(self):
        p = self.spec.p
        return int(sum(int(d) * p ** i for i, d in enumerate(self.digits.tolist())))

    def element(self, extra=0):
        D = len(self.digits)
        return LocalFieldElement.from_digits(self.spec, -self.r, self.digits, -self.r + D).as_exact(-self.r + D + extra)

    def to_json(self):
        return {"r": self.r, "digits": self.digits.tolist()}


def random_x(spec, r, rng, D):
    """Haar-random x on the sphere |x| = q^r truncated to D digits: leading digit nonzero."""
    ds = rng.integers(0, spec.p, size=D, dtype=np.int64)
    ds[0] = rng.integers(1, spec.p)
    return FiniteX(spec, r, ds)


def explicit_x(el):
    return FiniteX(el.spec, -el.valuation, np.array(el.digits, dtype=np.int64))


def power_map_cells(x, alpha, N, L):
    """Level-L cells of [alpha x^n] for n = 1..N."""
    spec = x.spec
    p = spec.p
    if spec.char_p:
        if isinstance(alpha, LocalFieldElement):
            va, a = alpha.valuation, list(alpha.digits)
        else:
            c = Fraction(alpha)
            cv = c.numerator % p * pow(c.denominator % p, -1, p) % p
            if cv == 0:
                raise InvalidInput("alpha vanishes in characteristic p")
            va, a = 0, [cv]
        return fpt_cells(p, x.digits, x.r, N, L, a, va)
    if isinstance(alpha, LocalFieldElement):
        va = alpha.valuation
        c0 = alpha.unit_int()
        if alpha.rel_precision < x.r * N + L + 2:
            raise InvalidInput("alpha is not known precisely enough")
    else:
        va, c0 = _unit_mod(alpha, p, x.r * N + abs(_v(alpha, p)) + L + 4)
    # alpha x^n = c0 u^n p^(va - r n): digit i of [.] is digit i + r n - va of c0 u^n
    return qp_cells(p, c0, x.unit_int(), -va, x.r, N, L)


def geometric_map_cells(x, beta, N, L):
    """Level-L cells of [beta^n x] for n = 1..N (characteristic 0)."""
    spec = x.spec
    p = spec.p
    if spec.char_p:
        raise InvalidInput("geometric streams are implemented for Q_p")
    vb = _v(beta, p)
    if vb >= 0:
        raise InvalidConfiguration("need |beta| > 1")
    M = -vb * N + x.r + L + 4
    _, bu = _unit_mod(beta, p, M)
    return qp_cells(p, x.unit_int(), bu, x.r, -vb, N, L)


def _v(c, p):
    c = Fraction(c)
    return vp_int(c.numerator, p) - vp_int(c.denominator, p)
