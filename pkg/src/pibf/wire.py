"""Framed binary messages exchanged by the protocol roles.

Every frame is ``u32 length | u8 type | payload`` (little-endian), where
``length`` counts the type byte plus the payload.  A stream of frames
ends with a clean EOF on a frame boundary.
"""

from __future__ import annotations

import enum
import math
import struct
from dataclasses import dataclass
from typing import BinaryIO, Iterator, Union

from .errors import WireError
from .genome import NO_REFERENCE, Range
from .homomorphic import EncryptedIbf, PublicKey
from .ibf import HEADER_SIZE, Ibf, IbfParams, make_params

_FRAME = struct.Struct("<IB")
_CONFIG = struct.Struct("<IdBBQQ16s")
_INDEX = struct.Struct("<I")
MAX_FRAME = 1 << 31


class MsgType(enum.IntEnum):
    CONFIG = 0x01
    MASKED_QUERY = 0x02
    ENTRY_RESPONSE = 0x03
    ENCRYPTED_QUERY = 0x04
    ENCRYPTED_RESPONSE = 0x05
    PUBLIC_KEY = 0x06


class Scenario(enum.IntEnum):
    MASKED = 1
    HOMOMORPHIC = 2


@dataclass(frozen=True)
class ProtocolConfig:
    """Everything both parties must agree on; travels as message 1."""

    tau: int
    epsilon: float
    scenario: Scenario
    params: IbfParams
    range: Range | None = None
    reference_id: bytes = NO_REFERENCE

    @classmethod
    def create(
        cls,
        tau: int,
        epsilon: float,
        scenario: Scenario = Scenario.MASKED,
        *,
        range: Range | None = None,
        reference_id: bytes = NO_REFERENCE,
        hash_seed: bytes | None = None,
    ) -> ProtocolConfig:
        params = make_params(tau, epsilon, hash_seed=hash_seed)
        return cls(tau, epsilon, Scenario(scenario), params, range, reference_id)

    def validate(self) -> None:
        """Check that ``params`` is what ``(tau, epsilon)`` sizes to."""
        if not (isinstance(self.tau, int) and self.tau >= 1 and 0 < self.epsilon < 1):
            raise WireError(f"config has invalid tau={self.tau} or epsilon={self.epsilon}")
        if not math.isfinite(self.epsilon):
            raise WireError("config epsilon is not finite")
        expect = make_params(self.tau, self.epsilon, hash_seed=self.params.hash_seed, p=self.params.p)
        if expect != self.params:
            raise WireError(
                f"config params (t={self.params.t}, k={self.params.k}, lambda={self.params.lambda_bits}) "
                f"do not match tau={self.tau}, epsilon={self.epsilon}"
            )

    def with_range(self, r: Range | None) -> ProtocolConfig:
        return ProtocolConfig(self.tau, self.epsilon, self.scenario, self.params, r, self.reference_id)


@dataclass(frozen=True)
class MaskedQuery:
    ibf: Ibf


@dataclass(frozen=True)
class EntryResponse:
    index: int
    ibf: Ibf


@dataclass(frozen=True)
class EncryptedQuery:
    eibf: EncryptedIbf
    ciphertext_size: int


@dataclass(frozen=True)
class EncryptedResponse:
    index: int
    eibf: EncryptedIbf
    ciphertext_size: int


@dataclass(frozen=True)
class PublicKeyMsg:
    key: PublicKey


Message = Union[ProtocolConfig, MaskedQuery, EntryResponse, EncryptedQuery, EncryptedResponse, PublicKeyMsg]


def _enc_payload(msg: Message) -> tuple[MsgType, bytes]:
    if isinstance(msg, ProtocolConfig):
        r = msg.range
        head = _CONFIG.pack(
            msg.tau,
            msg.epsilon,
            int(msg.scenario),
            0 if r is None else 1,
            0 if r is None else r.start,
            0 if r is None else r.end,
            msg.reference_id,
        )
        return MsgType.CONFIG, head + msg.params.header_bytes()
    if isinstance(msg, MaskedQuery):
        return MsgType.MASKED_QUERY, msg.ibf.to_bytes()
    if isinstance(msg, EntryResponse):
        return MsgType.ENTRY_RESPONSE, _INDEX.pack(msg.index) + msg.ibf.to_bytes()
    if isinstance(msg, EncryptedQuery):
        return MsgType.ENCRYPTED_QUERY, msg.eibf.to_bytes(msg.ciphertext_size)
    if isinstance(msg, EncryptedResponse):
        return MsgType.ENCRYPTED_RESPONSE, _INDEX.pack(msg.index) + msg.eibf.to_bytes(msg.ciphertext_size)
    if isinstance(msg, PublicKeyMsg):
        return MsgType.PUBLIC_KEY, msg.key.to_bytes()
    raise TypeError(f"not a protocol message: {type(msg).__name__}")


def encode(msg: Message) -> bytes:
    """Serialize one message as a complete frame."""
    mtype, payload = _enc_payload(msg)
    return _FRAME.pack(len(payload) + 1, int(mtype)) + payload


def _ciphertext_width(eibf_bytes: bytes) -> int:
    off = HEADER_SIZE + 32
    if len(eibf_bytes) < off + 4:
        return 0
    return _INDEX.unpack_from(eibf_bytes, off)[0]


def decode_payload(mtype: int, payload: bytes) -> Message:
    try:
        mtype = MsgType(mtype)
    except ValueError:
        raise WireError(f"unknown message type {mtype:#04x}") from None
    if mtype is MsgType.CONFIG:
        if len(payload) != _CONFIG.size + HEADER_SIZE:
            raise WireError(f"config payload has {len(payload)} bytes, expected {_CONFIG.size + HEADER_SIZE}")
        tau, eps, scen, has_range, start, end, ref = _CONFIG.unpack_from(payload)
        try:
            scenario = Scenario(scen)
            r = Range(start, end) if has_range else None
        except ValueError as exc:
            raise WireError(f"bad config field: {exc}") from None
        if has_range not in (0, 1):
            raise WireError("bad range flag")
        return ProtocolConfig(tau, eps, scenario, IbfParams.from_header(payload[_CONFIG.size :]), r, ref)
    if mtype is MsgType.MASKED_QUERY:
        return MaskedQuery(Ibf.from_bytes(payload))
    if mtype is MsgType.ENTRY_RESPONSE:
        if len(payload) < 4:
            raise WireError("entry response truncated")
        return EntryResponse(_INDEX.unpack_from(payload)[0], Ibf.from_bytes(payload[4:]))
    if mtype is MsgType.ENCRYPTED_QUERY:
        return EncryptedQuery(EncryptedIbf.from_bytes(payload), _ciphertext_width(payload))
    if mtype is MsgType.ENCRYPTED_RESPONSE:
        if len(payload) < 4:
            raise WireError("encrypted response truncated")
        body = payload[4:]
        return EncryptedResponse(_INDEX.unpack_from(payload)[0], EncryptedIbf.from_bytes(body), _ciphertext_width(body))
    return PublicKeyMsg(PublicKey.from_bytes(payload))


def split_frame(data: bytes, offset: int = 0) -> tuple[int, bytes, int] | None:
    """Parse one frame at ``offset``: ``(type, payload, next_offset)``, or None at end of data."""
    if offset == len(data):
        return None
    if len(data) - offset < _FRAME.size:
        raise WireError("frame header truncated")
    length, mtype = _FRAME.unpack_from(data, offset)
    if length < 1 or length > MAX_FRAME:
        raise WireError(f"bad frame length {length}")
    end = offset + 4 + length
    if end > len(data):
        raise WireError(f"frame truncated: need {length} bytes, have {len(data) - offset - 4}")
    return mtype, data[offset + _FRAME.size : end], end


def decode(data: bytes) -> Message:
    """Inverse of :func:`encode` for exactly one frame."""
    got = split_frame(data)
    if got is None:
        raise WireError("empty input")
    mtype, payload, end = got
    if end != len(data):
        raise WireError(f"{len(data) - end} bytes after frame")
    return decode_payload(mtype, payload)


def decode_all(data: bytes) -> list[Message]:
    out = []
    off = 0
    while (got := split_frame(data, off)) is not None:
        mtype, payload, off = got
        out.append(decode_payload(mtype, payload))
    return out


def _read_exact(stream: BinaryIO, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        chunk = stream.read(n - len(buf))
        if not chunk:
            break
        buf += chunk
    return bytes(buf)


def read_frame(stream: BinaryIO) -> tuple[Message, int] | None:
    """Read one message and its frame size from a byte stream; None on clean EOF."""
    head = _read_exact(stream, _FRAME.size)
    if not head:
        return None
    if len(head) < _FRAME.size:
        raise WireError("frame header truncated")
    length, mtype = _FRAME.unpack(head)
    if length < 1 or length > MAX_FRAME:
        raise WireError(f"bad frame length {length}")
    payload = _read_exact(stream, length - 1)
    if len(payload) != length - 1:
        raise WireError(f"frame truncated: need {length - 1} payload bytes, got {len(payload)}")
    return decode_payload(mtype, payload), 4 + length


def iter_frames(stream: BinaryIO) -> Iterator[tuple[Message, int]]:
    while (got := read_frame(stream)) is not None:
        yield got


def write_frame(stream: BinaryIO, msg: Message) -> int:
    data = encode(msg)
    stream.write(data)
    stream.flush()
    return len(data)
