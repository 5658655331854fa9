"""Additively homomorphic encryption of IBF cells (Paillier, g = N + 1).

Plaintexts live in Z_N.  Signed Z_p residues are embedded by sending
negative values ``-v`` to ``N - v``; decryption undoes this with a
midpoint test before reducing back into Z_p.  This is exact as long as
no field sum wraps past N/2, which ``N > p**2 * t`` guarantees for any
realistic number of contributions.
"""

from __future__ import annotations

import hashlib
import secrets
import struct
from dataclasses import dataclass, field

import gmpy2

from .errors import ParamsMismatchError, WireError
from .ibf import HEADER_SIZE, Ibf, IbfParams

MIN_SECURE_BITS = 1024
_U32 = struct.Struct("<I")


@dataclass(frozen=True)
class PublicKey:
    n: int
    n_sq: int = field(init=False, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "n_sq", self.n * self.n)

    @property
    def bits(self) -> int:
        return self.n.bit_length()

    @property
    def fingerprint(self) -> bytes:
        return hashlib.sha256(_int_bytes(self.n)).digest()

    @property
    def ciphertext_size(self) -> int:
        return (self.n_sq.bit_length() + 7) // 8

    def encrypt(self, m: int) -> int:
        """E(m) for ``0 <= m < n`` with fresh randomness."""
        if not 0 <= m < self.n:
            raise ValueError("plaintext outside [0, n)")
        n, n_sq = self.n, self.n_sq
        while True:
            r = secrets.randbelow(n - 1) + 1
            if gmpy2.gcd(r, n) == 1:
                break
        return int((1 + m * n) % n_sq * gmpy2.powmod(r, n, n_sq) % n_sq)

    def encrypt_signed(self, v: int) -> int:
        return self.encrypt(v % self.n)

    def to_bytes(self) -> bytes:
        raw = _int_bytes(self.n)
        return _U32.pack(len(raw)) + raw

    @classmethod
    def from_bytes(cls, data: bytes) -> PublicKey:
        if len(data) < 4:
            raise WireError("public key truncated")
        (length,) = _U32.unpack_from(data)
        if len(data) != 4 + length:
            raise WireError(f"public key length field {length} does not match {len(data) - 4} bytes")
        n = int.from_bytes(data[4:], "big")
        if n < 3 or n % 2 == 0:
            raise WireError("public key modulus is not an odd integer above 2")
        return cls(n)


@dataclass(frozen=True)
class SecretKey:
    public: PublicKey
    p: int = field(repr=False)
    q: int = field(repr=False)
    lam: int = field(init=False, repr=False)
    mu: int = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.p * self.q != self.public.n:
            raise ValueError("p * q does not match the public modulus")
        lam = (self.p - 1) * (self.q - 1)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "mu", int(gmpy2.invert(lam, self.public.n)))

    def decrypt(self, c: int) -> int:
        n, n_sq = self.public.n, self.public.n_sq
        if not 0 < c < n_sq:
            raise ValueError("ciphertext outside (0, n**2)")
        u = gmpy2.powmod(c, self.lam, n_sq)
        return int((u - 1) // n * self.mu % n)

    def decrypt_signed(self, c: int) -> int:
        v = self.decrypt(c)
        return v - self.public.n if v > self.public.n // 2 else v

    def to_bytes(self) -> bytes:
        a, b = _int_bytes(self.p), _int_bytes(self.q)
        return _U32.pack(len(a)) + a + _U32.pack(len(b)) + b

    @classmethod
    def from_bytes(cls, data: bytes) -> SecretKey:
        try:
            (la,) = _U32.unpack_from(data, 0)
            p = int.from_bytes(data[4 : 4 + la], "big")
            (lb,) = _U32.unpack_from(data, 4 + la)
            q = int.from_bytes(data[8 + la : 8 + la + lb], "big")
        except struct.error as exc:
            raise WireError("secret key truncated") from exc
        if 8 + la + lb != len(data):
            raise WireError("secret key has trailing bytes")
        return cls(PublicKey(p * q), p, q)


def _int_bytes(v: int) -> bytes:
    return v.to_bytes((v.bit_length() + 7) // 8 or 1, "big")


def _random_prime(bits: int) -> int:
    while True:
        # top two bits set so the product has exactly 2 * bits bits
        cand = secrets.randbits(bits) | (3 << (bits - 2)) | 1
        cand = int(gmpy2.next_prime(cand))
        if cand.bit_length() == bits:
            return cand


def keygen(bits: int = 2048, *, insecure_test: bool = False) -> tuple[PublicKey, SecretKey]:
    """Generate a Paillier key pair with an exactly ``bits``-bit modulus.

    Moduli below 1024 bits are refused unless ``insecure_test`` is set.
    """
    if bits < MIN_SECURE_BITS and not insecure_test:
        raise ValueError(f"refusing {bits}-bit key; pass insecure_test=True for test keys")
    if bits < 64 or bits % 2:
        raise ValueError("key size must be an even number of at least 64 bits")
    while True:
        p = _random_prime(bits // 2)
        q = _random_prime(bits // 2)
        if p == q:
            continue
        n = p * q
        if gmpy2.gcd(n, (p - 1) * (q - 1)) != 1:
            continue
        pk = PublicKey(n)
        sk = SecretKey(pk, p, q)
        if all(sk.decrypt(pk.encrypt(x)) == x for x in (0, 1, secrets.randbelow(n))):
            return pk, sk


def hom_add(pk: PublicKey, c1: int, c2: int) -> int:
    """Ciphertext of the plaintext sum."""
    return c1 * c2 % pk.n_sq


def hom_neg(pk: PublicKey, c: int) -> int:
    """Ciphertext of the negated plaintext."""
    return int(gmpy2.invert(c, pk.n_sq))


@dataclass
class EncryptedIbf:
    """Cell-wise ciphertexts of an IBF; the geometry travels in clear."""

    params: IbfParams
    fingerprint: bytes
    count: list[int]
    id_sum: list[int]
    g_sum: list[int]

    def copy(self) -> EncryptedIbf:
        return EncryptedIbf(self.params, self.fingerprint, list(self.count), list(self.id_sum), list(self.g_sum))

    def to_bytes(self, ciphertext_size: int | None = None) -> bytes:
        """Header, key fingerprint, then ``t * 3`` length-prefixed big-endian ciphertexts.

        Ciphertexts are padded to a common width (the key's
        ``ciphertext_size`` when given) so the encoding size depends only
        on the key and the geometry.
        """
        width = ciphertext_size or max(
            (c.bit_length() + 7) // 8 for c in self.count + self.id_sum + self.g_sum
        )
        prefix = _U32.pack(width)
        parts = [self.params.header_bytes(), self.fingerprint]
        for triple in zip(self.count, self.id_sum, self.g_sum):
            for c in triple:
                parts.append(prefix)
                parts.append(c.to_bytes(width, "big"))
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, data: bytes) -> EncryptedIbf:
        ibf, used = cls.read_from(data)
        if used != len(data):
            raise WireError(f"{len(data) - used} trailing bytes after encrypted IBF")
        return ibf

    @classmethod
    def read_from(cls, data: bytes, offset: int = 0) -> tuple[EncryptedIbf, int]:
        params = IbfParams.from_header(data[offset : offset + HEADER_SIZE])
        pos = offset + HEADER_SIZE
        fp = data[pos : pos + 32]
        if len(fp) != 32:
            raise WireError("encrypted IBF fingerprint truncated")
        pos += 32
        fields: list[list[int]] = [[], [], []]
        for _ in range(params.t):
            for f in fields:
                if pos + 4 > len(data):
                    raise WireError("encrypted IBF body truncated")
                (length,) = _U32.unpack_from(data, pos)
                pos += 4
                if pos + length > len(data):
                    raise WireError("encrypted IBF ciphertext truncated")
                f.append(int.from_bytes(data[pos : pos + length], "big"))
                pos += length
        return cls(params, fp, *fields), pos


def _lift(r: int, p: int) -> int:
    """Signed integer represented by residue ``r`` of Z_p."""
    return r - p if r > (p - 1) // 2 else r


def check_capacity(pk: PublicKey, params: IbfParams) -> None:
    if pk.n <= params.p * params.p * params.t:
        raise ValueError(
            f"{pk.bits}-bit modulus too small for p={params.p}, t={params.t}; need N > p**2 * t"
        )


def encrypt_ibf(pk: PublicKey, ibf: Ibf) -> EncryptedIbf:
    params = ibf.params
    check_capacity(pk, params)
    p = params.p

    def enc(arr) -> list[int]:
        return [pk.encrypt_signed(_lift(r, p)) for r in arr.tolist()]

    return EncryptedIbf(params, pk.fingerprint, enc(ibf.count), enc(ibf.id_sum), enc(ibf.g_sum))


def decrypt_ibf(sk: SecretKey, eibf: EncryptedIbf) -> Ibf:
    """Decrypt every field and map back to canonical Z_p residues."""
    if eibf.fingerprint != sk.public.fingerprint:
        raise ParamsMismatchError("encrypted IBF was made under a different public key")
    p = eibf.params.p

    def dec(cs: list[int]) -> list[int]:
        return [sk.decrypt_signed(c) % p for c in cs]

    return Ibf(eibf.params, dec(eibf.count), dec(eibf.id_sum), dec(eibf.g_sum))


def encrypted_delete(pk: PublicKey, eibf: EncryptedIbf, items) -> EncryptedIbf:
    """Homomorphically delete one item id or an iterable of them.

    The caller's own constants ``-1, -x, -g(x)`` are freshly encrypted and
    added into each of the item's k cells.  Returns a new table.
    """
    if eibf.fingerprint != pk.fingerprint:
        raise ParamsMismatchError("encrypted IBF was made under a different public key")
    params = eibf.params
    out = eibf.copy()
    for x in [items] if isinstance(items, int) else items:
        if not 0 < x < params.p:
            raise ValueError(f"item id {x} outside (0, p)")
        gx = params.checksum(x)
        for j in params.cell_indices(x):
            out.count[j] = hom_add(pk, out.count[j], pk.encrypt_signed(-1))
            out.id_sum[j] = hom_add(pk, out.id_sum[j], pk.encrypt_signed(-x))
            out.g_sum[j] = hom_add(pk, out.g_sum[j], pk.encrypt_signed(-gx))
    return out
