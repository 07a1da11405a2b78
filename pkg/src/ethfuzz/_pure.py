"""Pure-Python implementations of the hot kernels.

These are the reference versions; ``_speedups.pyx`` mirrors them in Cython.
"""

_MASK64 = (1 << 64) - 1

_ROUND_CONSTANTS = (
    0x0000000000000001, 0x0000000000008082, 0x800000000000808A, 0x8000000080008000,
    0x000000000000808B, 0x0000000080000001, 0x8000000080008081, 0x8000000000008009,
    0x000000000000008A, 0x0000000000000088, 0x0000000080008009, 0x000000008000000A,
    0x000000008000808B, 0x800000000000008B, 0x8000000000008089, 0x8000000000008003,
    0x8000000000008002, 0x8000000000000080, 0x000000000000800A, 0x800000008000000A,
    0x8000000080008081, 0x8000000000008080, 0x0000000080000001, 0x8000000080008008,
)

# rotation offsets indexed by x + 5*y
_ROTATIONS = (
    0, 1, 62, 28, 27,
    36, 44, 6, 55, 20,
    3, 10, 43, 25, 39,
    41, 45, 15, 21, 8,
    18, 2, 61, 56, 14,
)

_RATE = 136  # bytes, for a 256-bit capacity of 512


def _rotl(v, n):
    return ((v << n) | (v >> (64 - n))) & _MASK64 if n else v


def _keccak_f(a):
    for rc in _ROUND_CONSTANTS:
        # theta
        c = [a[x] ^ a[x + 5] ^ a[x + 10] ^ a[x + 15] ^ a[x + 20] for x in range(5)]
        d = [c[(x - 1) % 5] ^ _rotl(c[(x + 1) % 5], 1) for x in range(5)]
        for i in range(25):
            a[i] ^= d[i % 5]
        # rho + pi
        b = [0] * 25
        for x in range(5):
            for y in range(5):
                i = x + 5 * y
                b[y + 5 * ((2 * x + 3 * y) % 5)] = _rotl(a[i], _ROTATIONS[i])
        # chi
        for y in range(0, 25, 5):
            row = b[y:y + 5]
            for x in range(5):
                a[y + x] = row[x] ^ ((~row[(x + 1) % 5]) & row[(x + 2) % 5] & _MASK64)
        # iota
        a[0] ^= rc


def keccak256(data: bytes) -> bytes:
    """Keccak-256 with the original 0x01 domain padding (not NIST SHA3-256)."""
    data = bytes(data)
    padded = bytearray(data)
    padded.append(0x01)
    padded.extend(b"\x00" * (-len(padded) % _RATE))
    padded[-1] |= 0x80

    state = [0] * 25
    for off in range(0, len(padded), _RATE):
        block = padded[off:off + _RATE]
        for i in range(_RATE // 8):
            state[i] ^= int.from_bytes(block[8 * i:8 * i + 8], "little")
        _keccak_f(state)

    return b"".join(lane.to_bytes(8, "little") for lane in state[:4])


def valid_jumpdests(code: bytes) -> bytes:
    """Return a byte mask over ``code``: 1 where a reachable JUMPDEST opcode sits.

    Bytes inside PUSH immediates are never marked.
    """
    code = bytes(code)
    n = len(code)
    mask = bytearray(n)
    i = 0
    while i < n:
        op = code[i]
        if op == 0x5B:
            mask[i] = 1
        elif 0x60 <= op <= 0x7F:
            i += op - 0x5F
        i += 1
    return bytes(mask)


def instruction_starts(code: bytes) -> list:
    """Offsets at which instructions begin in a linear sweep."""
    code = bytes(code)
    n = len(code)
    out = []
    i = 0
    while i < n:
        out.append(i)
        op = code[i]
        if 0x60 <= op <= 0x7F:
            i += op - 0x5F
        i += 1
    return out
