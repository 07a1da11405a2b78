# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``_pure.py``."""

from libc.stdint cimport uint64_t, uint8_t
from libc.string cimport memset, memcpy

cdef uint64_t RC[24]
RC[:] = [
    0x0000000000000001ULL, 0x0000000000008082ULL, 0x800000000000808AULL, 0x8000000080008000ULL,
    0x000000000000808BULL, 0x0000000080000001ULL, 0x8000000080008081ULL, 0x8000000000008009ULL,
    0x000000000000008AULL, 0x0000000000000088ULL, 0x0000000080008009ULL, 0x000000008000000AULL,
    0x000000008000808BULL, 0x800000000000008BULL, 0x8000000000008089ULL, 0x8000000000008003ULL,
    0x8000000000008002ULL, 0x8000000000000080ULL, 0x000000000000800AULL, 0x800000008000000AULL,
    0x8000000080008081ULL, 0x8000000000008080ULL, 0x0000000080000001ULL, 0x8000000080008008ULL,
]

cdef int ROT[25]
ROT[:] = [0, 1, 62, 28, 27, 36, 44, 6, 55, 20, 3, 10, 43, 25, 39,
          41, 45, 15, 21, 8, 18, 2, 61, 56, 14]

cdef int PI[25]

cdef int _i, _x, _y
for _x in range(5):
    for _y in range(5):
        _i = _x + 5 * _y
        PI[_i] = _y + 5 * ((2 * _x + 3 * _y) % 5)

cdef enum:
    RATE = 136


cdef inline uint64_t rotl(uint64_t v, int n) nogil:
    if n == 0:
        return v
    return (v << n) | (v >> (64 - n))


cdef void keccak_f(uint64_t* a) nogil:
    cdef uint64_t c[5]
    cdef uint64_t d[5]
    cdef uint64_t b[25]
    cdef int r, x, y, i
    for r in range(24):
        for x in range(5):
            c[x] = a[x] ^ a[x + 5] ^ a[x + 10] ^ a[x + 15] ^ a[x + 20]
        for x in range(5):
            d[x] = c[(x + 4) % 5] ^ rotl(c[(x + 1) % 5], 1)
        for i in range(25):
            a[i] ^= d[i % 5]
        for i in range(25):
            b[PI[i]] = rotl(a[i], ROT[i])
        for y in range(0, 25, 5):
            for x in range(5):
                a[y + x] = b[y + x] ^ ((~b[y + (x + 1) % 5]) & b[y + (x + 2) % 5])
        a[0] ^= RC[r]


cdef inline uint64_t load64(const uint8_t* p) nogil:
    cdef uint64_t v = 0
    cdef int k
    for k in range(8):
        v |= (<uint64_t>p[k]) << (8 * k)
    return v


def keccak256(data):
    cdef const uint8_t[:] view = bytes(data)
    cdef Py_ssize_t n = view.shape[0]
    cdef uint64_t state[25]
    cdef uint8_t block[RATE]
    cdef Py_ssize_t off = 0
    cdef Py_ssize_t rem
    cdef int i
    cdef uint8_t out[32]

    memset(state, 0, sizeof(state))
    while n - off >= RATE:
        for i in range(RATE // 8):
            state[i] ^= load64(&view[off + 8 * i])
        keccak_f(state)
        off += RATE

    memset(block, 0, RATE)
    rem = n - off
    if rem > 0:
        memcpy(block, &view[off], rem)
    block[rem] = 0x01
    block[RATE - 1] |= 0x80
    for i in range(RATE // 8):
        state[i] ^= load64(&block[8 * i])
    keccak_f(state)

    for i in range(32):
        out[i] = <uint8_t>(state[i // 8] >> (8 * (i % 8)))
    return bytes(out[:32])


def valid_jumpdests(code):
    cdef const uint8_t[:] view = bytes(code)
    cdef Py_ssize_t n = view.shape[0]
    cdef bytearray mask = bytearray(n)
    cdef uint8_t[:] m = mask
    cdef Py_ssize_t i = 0
    cdef uint8_t op
    while i < n:
        op = view[i]
        if op == 0x5B:
            m[i] = 1
        elif 0x60 <= op <= 0x7F:
            i += op - 0x5F
        i += 1
    return bytes(mask)


def instruction_starts(code):
    cdef const uint8_t[:] view = bytes(code)
    cdef Py_ssize_t n = view.shape[0]
    cdef Py_ssize_t i = 0
    cdef uint8_t op
    out = []
    while i < n:
        out.append(i)
        op = view[i]
        if 0x60 <= op <= 0x7F:
            i += op - 0x5F
        i += 1
    return out
