# cython: language_level=3
"""Compiled kernels: GMP big-integer primitives and the blur pixel loop.

Mirrors parksense._purekernels exactly; parksense.backend picks whichever is
importable.
"""

from libc.stdlib cimport free

NAME = "native"

cdef extern from "gmp.h":
    ctypedef struct __mpz_struct:
        pass
    ctypedef __mpz_struct mpz_t[1]
    void mpz_init(mpz_t x)
    void mpz_clear(mpz_t x)
    int mpz_set_str(mpz_t rop, const char *s, int base)
    char *mpz_get_str(char *s, int base, const mpz_t op)
    void mpz_powm(mpz_t rop, const mpz_t base, const mpz_t exp, const mpz_t mod)
    int mpz_invert(mpz_t rop, const mpz_t op1, const mpz_t op2)
    int mpz_probab_prime_p(const mpz_t n, int reps)


cdef int _set(mpz_t x, v) except -1:
    cdef bytes s = format(v, "x").encode("ascii")
    if mpz_set_str(x, s, 16) != 0:
        raise ValueError("could not convert integer")
    return 0


cdef object _get(mpz_t x):
    cdef char *s = mpz_get_str(NULL, 16, x)
    try:
        return int(<bytes>s, 16)
    finally:
        free(s)


def powmod(base, exp, mod):
    """base**exp mod `mod` for exp >= 0, mod >= 1."""
    if mod <= 0:
        raise ValueError("modulus must be positive")
    if exp < 0:
        raise ValueError("exponent must be non-negative")
    cdef mpz_t b, e, m, r
    mpz_init(b)
    mpz_init(e)
    mpz_init(m)
    mpz_init(r)
    try:
        _set(b, base % mod)
        _set(e, exp)
        _set(m, mod)
        mpz_powm(r, b, e, m)
        return _get(r)
    finally:
        mpz_clear(b)
        mpz_clear(e)
        mpz_clear(m)
        mpz_clear(r)


def invmod(a, mod):
    """Multiplicative inverse of a mod `mod`; ValueError if none exists."""
    if mod <= 0:
        raise ValueError("modulus must be positive")
    cdef mpz_t x, m, r
    cdef int ok
    mpz_init(x)
    mpz_init(m)
    mpz_init(r)
    try:
        _set(x, a % mod)
        _set(m, mod)
        ok = mpz_invert(r, x, m)
        if ok == 0:
            raise ValueError("base is not invertible for the given modulus")
        return _get(r)
    finally:
        mpz_clear(x)
        mpz_clear(m)
        mpz_clear(r)


def is_probable_prime(n, reps=32):
    if n < 2:
        return False
    cdef mpz_t x
    cdef int res
    mpz_init(x)
    try:
        _set(x, n)
        res = mpz_probab_prime_p(x, reps)
    finally:
        mpz_clear(x)
    return res > 0


def edge_sharp_total(const unsigned char[::1] pixels, int width, int height):
    """Sum over pixels of the maximum signed difference to any 8-neighbor."""
    if width <= 0 or height <= 0:
        raise ValueError("image dimensions must be positive")
    if pixels.shape[0] != width * height:
        raise ValueError("pixel buffer does not match dimensions")
    cdef long long total = 0
    cdef int x, y, nx, ny, me, diff, best, have
    for y in range(height):
        for x in range(width):
            me = pixels[y * width + x]
            best = 0
            have = 0
            for ny in range(y - 1, y + 2):
                if ny < 0 or ny >= height:
                    continue
                for nx in range(x - 1, x + 2):
                    if nx < 0 or nx >= width or (nx == x and ny == y):
                        continue
                    diff = me - pixels[ny * width + nx]
                    if not have or diff > best:
                        best = diff
                        have = 1
            if have:
                total += best
    return total
