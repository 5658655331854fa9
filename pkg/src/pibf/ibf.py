"""Invertible Bloom filter over Z_p with signed peeling.

A table has ``t`` cells of ``(count, idSum, gSum)`` residues. Cells are
split into ``k`` equal sub-tables and hash function ``i`` only addresses
sub-table ``i``, so every item lands in ``k`` distinct cells.

Hashing is two-level: a keyed BLAKE2b derives a 128-bit key per hash
function from the 16-byte table seed, and items are then mixed with a
keyed 64-bit finalizer.  The finalizer has a scalar and a numpy path
that agree bit-for-bit, which keeps bulk construction fast.
"""

from __future__ import annotations

import enum
import hashlib
import heapq
import math
import secrets
import struct
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, NamedTuple, Sequence

import gmpy2
import numpy as np

from .errors import ParamsMismatchError, WireError

__all__ = [
    "DEFAULT_PRIME",
    "Cell",
    "DecodeResult",
    "Ibf",
    "IbfParams",
    "Membership",
    "list_items",
    "make_params",
    "privacy_threshold",
    "subtract",
]

DEFAULT_PRIME = (1 << 61) - 1
MAGIC = b"PIBF"
VERSION = 1
_HEADER = struct.Struct("<4sBIHHQ16s")
HEADER_SIZE = _HEADER.size

_M64 = (1 << 64) - 1
_C1 = 0xFF51AFD7ED558CCD
_C2 = 0xC4CEB9FE1A85EC53
# bincount sums float64 weights; 30/31-bit limbs stay exact below this many items
_BULK_CHUNK = 1 << 21


def _fmix64(z: int) -> int:
    z ^= z >> 33
    z = (z * _C1) & _M64
    z ^= z >> 33
    z = (z * _C2) & _M64
    z ^= z >> 33
    return z


def _fmix64_np(z: np.ndarray) -> np.ndarray:
    z = z ^ (z >> np.uint64(33))
    z = z * np.uint64(_C1)
    z = z ^ (z >> np.uint64(33))
    z = z * np.uint64(_C2)
    z = z ^ (z >> np.uint64(33))
    return z


@dataclass(frozen=True)
class IbfParams:
    """Table geometry, checksum width, field modulus and hash seed.

    ``lambda_bits`` is the width of the checksum hash ``g``, whose range
    is ``[1, 2**lambda_bits)``.  The constructor enforces structural
    validity; :meth:`check_sizing` additionally enforces the
    ``lambda_bits >= k + ceil(log2 k)`` bound that the decode guarantee
    depends on (tiny toy tables used in exhaustive tests skip it).
    """

    t: int
    k: int
    lambda_bits: int
    p: int = DEFAULT_PRIME
    hash_seed: bytes = field(default=bytes(16), repr=False)

    def __post_init__(self) -> None:
        if self.k < 2:
            raise ValueError(f"k must be at least 2, got {self.k}")
        if self.t <= 0 or self.t % self.k:
            raise ValueError(f"t must be a positive multiple of k={self.k}, got {self.t}")
        if self.t >= 1 << 32 or self.k >= 1 << 16:
            raise ValueError("t or k too large for the wire header")
        if not 1 <= self.lambda_bits < 64:
            raise ValueError(f"lambda_bits out of range: {self.lambda_bits}")
        if not (2 < self.p < 1 << 62) or not gmpy2.is_prime(self.p):
            raise ValueError(f"p must be an odd prime below 2**62, got {self.p}")
        if self.p <= 1 << self.lambda_bits:
            raise ValueError("p must exceed 2**lambda_bits")
        if len(self.hash_seed) != 16:
            raise ValueError("hash_seed must be 16 bytes")

    @property
    def width(self) -> int:
        """Cells per sub-table."""
        return self.t // self.k

    def check_sizing(self) -> None:
        need = self.k + math.ceil(math.log2(self.k))
        if self.lambda_bits < need:
            raise ValueError(f"lambda_bits={self.lambda_bits} below k + ceil(log2 k) = {need}")

    def privacy_threshold(self, epsilon: float) -> int:
        return privacy_threshold(self.t, self.k, epsilon)

    def with_seed(self, hash_seed: bytes) -> IbfParams:
        return IbfParams(self.t, self.k, self.lambda_bits, self.p, hash_seed)

    @cached_property
    def _keys(self) -> np.ndarray:
        # row 0 keys g, rows 1..k key h_1..h_k; columns are the two 64-bit halves
        rows = []
        for i in range(self.k + 1):
            d = hashlib.blake2b(
                i.to_bytes(4, "little"), key=self.hash_seed, digest_size=16, person=b"pibf-hash-v1"
            ).digest()
            rows.append(struct.unpack("<QQ", d))
        return np.array(rows, dtype=np.uint64)

    @cached_property
    def _key_ints(self) -> tuple[tuple[int, int], ...]:
        return tuple((int(a), int(b)) for a, b in self._keys)

    def cell_indices(self, x: int) -> list[int]:
        """The k distinct cells of item ``x``, in hash-function order."""
        w = self.width
        keys = self._key_ints
        return [i * w + _fmix64(_fmix64(x ^ keys[i + 1][0]) ^ keys[i + 1][1]) % w for i in range(self.k)]

    def checksum(self, x: int) -> int:
        """g(x), in ``[1, 2**lambda_bits)``."""
        a, b = self._key_ints[0]
        return 1 + _fmix64(_fmix64(x ^ a) ^ b) % ((1 << self.lambda_bits) - 1)

    def cell_indices_many(self, xs: np.ndarray) -> np.ndarray:
        """Vectorized :meth:`cell_indices`; returns shape ``(k, len(xs))``."""
        xs = np.asarray(xs, dtype=np.uint64)
        w = np.uint64(self.width)
        keys = self._keys
        out = np.empty((self.k, xs.size), dtype=np.int64)
        for i in range(self.k):
            z = _fmix64_np(_fmix64_np(xs ^ keys[i + 1, 0]) ^ keys[i + 1, 1])
            out[i] = (z % w).astype(np.int64) + i * self.width
        return out

    def checksum_many(self, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=np.uint64)
        z = _fmix64_np(_fmix64_np(xs ^ self._keys[0, 0]) ^ self._keys[0, 1])
        return np.uint64(1) + z % np.uint64((1 << self.lambda_bits) - 1)

    def header_bytes(self) -> bytes:
        return _HEADER.pack(MAGIC, VERSION, self.t, self.k, self.lambda_bits, self.p, self.hash_seed)

    @classmethod
    def from_header(cls, data: bytes) -> IbfParams:
        if len(data) < HEADER_SIZE:
            raise WireError(f"IBF header truncated: {len(data)} < {HEADER_SIZE} bytes")
        magic, version, t, k, lam, p, seed = _HEADER.unpack_from(data)
        if magic != MAGIC:
            raise WireError(f"bad IBF magic {magic!r}")
        if version != VERSION:
            raise WireError(f"unsupported IBF version {version}")
        try:
            return cls(t, k, lam, p, seed)
        except ValueError as exc:
            raise WireError(f"invalid IBF parameters: {exc}") from exc


def make_params(
    tau: int, epsilon: float, *, hash_seed: bytes | None = None, p: int = DEFAULT_PRIME
) -> IbfParams:
    """Size a table to decode ``tau`` differences with failure probability ``epsilon``.

    ``k = ceil(log2(tau / epsilon)) + 1``, ``t = 2 k tau`` and
    ``lambda = k + ceil(log2 k)``.  A fresh random seed is drawn unless
    one is supplied.

    >>> p = make_params(100, 0.01, hash_seed=bytes(16))
    >>> p.k, p.t
    (15, 3000)
    """
    if not isinstance(tau, int) or tau < 1:
        raise ValueError(f"tau must be a positive integer, got {tau!r}")
    if not 0 < epsilon < 1:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon!r}")
    k = math.ceil(math.log2(tau / epsilon)) + 1
    t = 2 * k * tau
    lam = k + math.ceil(math.log2(k))
    if p <= 1 << lam:
        raise ValueError(f"checksum width {lam} bits does not fit below p; epsilon too small")
    params = IbfParams(t, k, lam, p, secrets.token_bytes(16) if hash_seed is None else hash_seed)
    params.check_sizing()
    return params


def privacy_threshold(t: int, k: int, epsilon: float) -> int:
    """Smallest item count at which, w.p. >= 1 - epsilon, no cell is peelable.

    Evaluates ``ceil(1 + (t/k)(ln t + ln ln t + ln k + ln(1/epsilon)))``.
    """
    if not 0 < epsilon < 1:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon!r}")
    if t < 3:
        raise ValueError("privacy threshold needs t >= 3")
    if k < 2:
        raise ValueError("privacy threshold needs k >= 2")
    bound = 1 + (t / k) * (math.log(t) + math.log(math.log(t)) + math.log(k) + math.log(1 / epsilon))
    return math.ceil(bound)


class Cell(NamedTuple):
    count: int
    id_sum: int
    g_sum: int


class Membership(enum.Enum):
    FALSE = "false"
    TRUE = "true"
    INDETERMINATE = "not determined"


@dataclass
class DecodeResult:
    positives: list[int]
    negatives: list[int]
    complete: bool

    def __len__(self) -> int:
        return len(self.positives) + len(self.negatives)


class Ibf:
    """A table of ``t`` cells over ``Z_p``.

    Fields are stored as three ``uint64`` arrays of canonical residues.
    ``insert``/``delete`` mutate in place; :func:`subtract` and
    :func:`list_items` are pure.
    """

    __slots__ = ("params", "count", "id_sum", "g_sum")

    def __init__(
        self,
        params: IbfParams,
        count: np.ndarray | None = None,
        id_sum: np.ndarray | None = None,
        g_sum: np.ndarray | None = None,
    ):
        self.params = params
        t = params.t
        self.count = np.zeros(t, np.uint64) if count is None else np.array(count, dtype=np.uint64)
        self.id_sum = np.zeros(t, np.uint64) if id_sum is None else np.array(id_sum, dtype=np.uint64)
        self.g_sum = np.zeros(t, np.uint64) if g_sum is None else np.array(g_sum, dtype=np.uint64)
        for arr in (self.count, self.id_sum, self.g_sum):
            if arr.shape != (t,):
                raise ValueError(f"field arrays must have shape ({t},)")

    @classmethod
    def from_items(cls, params: IbfParams, items: Iterable[int]) -> Ibf:
        ibf = cls(params)
        ibf.insert_many(items)
        return ibf

    def copy(self) -> Ibf:
        return Ibf(self.params, self.count, self.id_sum, self.g_sum)

    def cell(self, i: int) -> Cell:
        p = self.params.p
        c = int(self.count[i])
        return Cell(c if c <= (p - 1) // 2 else c - p, int(self.id_sum[i]), int(self.g_sum[i]))

    @property
    def cells(self) -> list[Cell]:
        """Cells with ``count`` in signed form."""
        return [self.cell(i) for i in range(self.params.t)]

    def __len__(self) -> int:
        return self.params.t

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Ibf):
            return NotImplemented
        return (
            self.params == other.params
            and np.array_equal(self.count, other.count)
            and np.array_equal(self.id_sum, other.id_sum)
            and np.array_equal(self.g_sum, other.g_sum)
        )

    def __repr__(self) -> str:
        nonzero = int(np.count_nonzero(self.count | self.id_sum | self.g_sum))
        return f"Ibf(t={self.params.t}, k={self.params.k}, nonzero_cells={nonzero})"

    def is_zero(self) -> bool:
        return not (self.count.any() or self.id_sum.any() or self.g_sum.any())

    def _check_item(self, x: int) -> None:
        if not 0 < x < self.params.p:
            raise ValueError(f"item id {x} outside (0, p)")

    def _apply(self, x: int, sign: int) -> None:
        self._check_item(x)
        p = self.params.p
        gx = self.params.checksum(x)
        dc, dx, dg = (1, x, gx) if sign > 0 else (p - 1, p - x, p - gx)
        for j in self.params.cell_indices(x):
            self.count[j] = (int(self.count[j]) + dc) % p
            self.id_sum[j] = (int(self.id_sum[j]) + dx) % p
            self.g_sum[j] = (int(self.g_sum[j]) + dg) % p

    def insert(self, x: int) -> None:
        self._apply(x, +1)

    def delete(self, x: int) -> None:
        """Remove ``x``; deleting a non-member leaves negative-signed content."""
        self._apply(x, -1)

    def insert_many(self, items: Iterable[int]) -> None:
        self._apply_many(items, +1)

    def delete_many(self, items: Iterable[int]) -> None:
        self._apply_many(items, -1)

    def _apply_many(self, items: Iterable[int], sign: int) -> None:
        if isinstance(items, np.ndarray):
            xs = items.astype(np.uint64, copy=False).ravel()
            if xs.size and (not xs.min() > 0 or not xs.max() < self.params.p):
                raise ValueError("item id outside (0, p)")
        else:
            lst = list(items)
            for x in lst:
                self._check_item(x)
            xs = np.array(lst, dtype=np.uint64)
        for start in range(0, xs.size, _BULK_CHUNK):
            self._scatter(xs[start : start + _BULK_CHUNK], sign)

    def _scatter(self, xs: np.ndarray, sign: int) -> None:
        if xs.size == 0:
            return
        params, p, t = self.params, self.params.p, self.params.t
        idx = params.cell_indices_many(xs).ravel()
        gs = params.checksum_many(xs)
        n_rep = params.k
        cnt = np.bincount(idx, minlength=t)
        ids = _limb_sums(idx, np.tile(xs, n_rep), t)
        gsums = _limb_sums(idx, np.tile(gs, n_rep), t)
        new_c, new_i, new_g = [], [], []
        for c0, i0, g0, dc, di, dg in zip(
            self.count.tolist(), self.id_sum.tolist(), self.g_sum.tolist(), cnt.tolist(), ids, gsums
        ):
            new_c.append((c0 + sign * dc) % p)
            new_i.append((i0 + sign * di) % p)
            new_g.append((g0 + sign * dg) % p)
        self.count = np.array(new_c, dtype=np.uint64)
        self.id_sum = np.array(new_i, dtype=np.uint64)
        self.g_sum = np.array(new_g, dtype=np.uint64)

    def is_member(self, x: int) -> Membership:
        self._check_item(x)
        gx = self.params.checksum(x)
        for j in self.params.cell_indices(x):
            c, s, g = int(self.count[j]), int(self.id_sum[j]), int(self.g_sum[j])
            if c == 0 and s == 0 and g == 0:
                return Membership.FALSE
            if c == 1 and s == x and g == gx:
                return Membership.TRUE
        return Membership.INDETERMINATE

    def pure_cells(self) -> list[int]:
        """Indices of cells with ``|count| = 1`` whose checksum validates."""
        p = self.params.p
        cand = np.flatnonzero((self.count == 1) | (self.count == p - 1))
        out = []
        for i in cand.tolist():
            if _pure_item(self.params, int(self.count[i]), int(self.id_sum[i]), int(self.g_sum[i])):
                out.append(i)
        return out

    def to_bytes(self) -> bytes:
        body = np.stack([self.count, self.id_sum, self.g_sum], axis=1).astype("<u8")
        return self.params.header_bytes() + body.tobytes()

    @property
    def nbytes(self) -> int:
        return HEADER_SIZE + 24 * self.params.t

    @classmethod
    def from_bytes(cls, data: bytes) -> Ibf:
        ibf, used = cls.read_from(data)
        if used != len(data):
            raise WireError(f"{len(data) - used} trailing bytes after IBF body")
        return ibf

    @classmethod
    def read_from(cls, data: bytes, offset: int = 0) -> tuple[Ibf, int]:
        """Parse an IBF at ``offset``; returns it and the offset just past it."""
        params = IbfParams.from_header(data[offset : offset + HEADER_SIZE])
        start = offset + HEADER_SIZE
        end = start + 24 * params.t
        if len(data) < end:
            raise WireError(f"IBF body truncated: need {end - start} bytes, have {len(data) - start}")
        body = np.frombuffer(data, dtype="<u8", count=3 * params.t, offset=start).reshape(params.t, 3)
        if (body >= np.uint64(params.p)).any():
            raise WireError("IBF cell residue not below p")
        body = body.astype(np.uint64)
        return cls(params, body[:, 0], body[:, 1], body[:, 2]), end


def _limb_sums(idx: np.ndarray, values: np.ndarray, t: int) -> list[int]:
    lo = np.bincount(idx, weights=(values & np.uint64((1 << 30) - 1)).astype(np.float64), minlength=t)
    hi = np.bincount(idx, weights=(values >> np.uint64(30)).astype(np.float64), minlength=t)
    return [(int(h) << 30) + int(lo_) for h, lo_ in zip(hi.astype(np.int64).tolist(), lo.astype(np.int64).tolist())]


def _pure_item(params: IbfParams, c: int, s: int, g: int) -> int:
    """Signed item held alone by a cell, or 0 if the cell is not pure."""
    p = params.p
    if c == 1:
        if s != 0 and g == params.checksum(s):
            return s
    elif c == p - 1:
        x = (p - s) % p
        if x != 0 and (p - g) % p == params.checksum(x):
            return -x
    return 0


def _check_compatible(a: IbfParams, b: IbfParams) -> None:
    if a != b:
        raise ParamsMismatchError(f"incompatible IBF parameters: {a} vs {b} (or differing seeds)")


def subtract(a: Ibf, b: Ibf) -> Ibf:
    """Cell-wise ``a - b`` mod p; the inputs are left untouched."""
    _check_compatible(a.params, b.params)
    p = np.uint64(a.params.p)
    return Ibf(
        a.params,
        (a.count + (p - b.count)) % p,
        (a.id_sum + (p - b.id_sum)) % p,
        (a.g_sum + (p - b.g_sum)) % p,
    )


def list_items(ibf: Ibf) -> DecodeResult:
    """Peel a working copy of ``ibf``.

    Pure cells are processed lowest index first.  The result is complete
    only if the residual table is all zero.
    """
    params, p = ibf.params, ibf.params.p
    c = ibf.count.tolist()
    s = ibf.id_sum.tolist()
    g = ibf.g_sum.tolist()
    heap = np.flatnonzero((ibf.count == 1) | (ibf.count == p - 1)).tolist()
    heapq.heapify(heap)
    positives: list[int] = []
    negatives: list[int] = []
    while heap:
        i = heapq.heappop(heap)
        item = _pure_item(params, c[i], s[i], g[i])
        if not item:
            continue
        if item > 0:
            x = item
            positives.append(x)
            dc, dx, dg = p - 1, p - x, p - params.checksum(x)
        else:
            x = -item
            negatives.append(x)
            dc, dx, dg = 1, x, params.checksum(x)
        for j in params.cell_indices(x):
            c[j] = (c[j] + dc) % p
            s[j] = (s[j] + dx) % p
            g[j] = (g[j] + dg) % p
            if c[j] == 1 or c[j] == p - 1:
                heapq.heappush(heap, j)
    complete = not (any(c) or any(s) or any(g))
    return DecodeResult(positives, negatives, complete)


def counts_signed(ibf: Ibf) -> Sequence[int]:
    """Signed view of the count field, mainly for diagnostics."""
    p = ibf.params.p
    return [c if c <= (p - 1) // 2 else c - p for c in ibf.count.tolist()]
