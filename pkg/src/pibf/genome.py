"""Reference-compressed genomes as sets of variant events.

Positions are 0-based and absolute throughout; the text format is the
only place 1-based positions appear.

Item-id layout (61 bits, always below the default field prime 2**61 - 1)::

    bits 60..59  kind tag      01 substitution, 10 insertion, 11 deletion
                               (00 is reserved for caller-assigned opaque ids)
    bits 58..21  position      38 bits
    bits 20..0   payload       21 bits, per kind:

    substitution  bits 1..0 base (A=0, C=1, G=2, T=3), bits 20..2 zero
    insertion     bits 20..15 chunk ordinal, bits 14..12 base count (1..6),
                  bits 11..0 up to six bases, first base highest, unused bits zero
    deletion      bits 20..0 length (1 .. 2**21 - 1)

Insertions longer than six bases are split into chunks at the same
position with consecutive ordinals, so a single position can carry up
to 64 * 6 = 384 inserted bases.
"""

from __future__ import annotations

import enum
import hashlib
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

from .errors import CodecError

BASES = "ACGT"
_BASE_CODE = {b: i for i, b in enumerate(BASES)}

POSITION_BITS = 38
PAYLOAD_BITS = 21
MAX_POSITION = (1 << POSITION_BITS) - 1
MAX_DELETION = (1 << PAYLOAD_BITS) - 1
CHUNK_BASES = 6
MAX_CHUNKS = 64
ITEM_LIMIT = (1 << 61) - 1
OPAQUE_LIMIT = 1 << 59

_TAG_SHIFT = POSITION_BITS + PAYLOAD_BITS
_PAYLOAD_MASK = (1 << PAYLOAD_BITS) - 1


class EventKind(enum.IntEnum):
    # value is the item-id kind tag and also the sort rank at equal positions
    SUBSTITUTION = 1
    INSERTION = 2
    DELETION = 3


@dataclass(frozen=True)
class VariantEvent:
    """One event against the reference.

    ``payload`` is the substituted base, the inserted bases of one chunk,
    or the deletion length.  ``chunk`` is only meaningful for insertions.
    """

    position: int
    kind: EventKind
    payload: str | int
    chunk: int = 0

    def __post_init__(self) -> None:
        if not isinstance(self.position, int) or not 0 <= self.position <= MAX_POSITION:
            raise CodecError(f"position {self.position!r} outside [0, 2**{POSITION_BITS})")
        try:
            kind = EventKind(self.kind)
        except ValueError:
            raise CodecError(f"unknown event kind {self.kind!r}") from None
        object.__setattr__(self, "kind", kind)
        if kind is EventKind.SUBSTITUTION:
            if not (isinstance(self.payload, str) and len(self.payload) == 1 and self.payload in BASES):
                raise CodecError(f"substitution base must be one of {BASES}, got {self.payload!r}")
        elif kind is EventKind.INSERTION:
            if not isinstance(self.payload, str) or not 1 <= len(self.payload) <= CHUNK_BASES:
                raise CodecError(f"insertion chunk must hold 1..{CHUNK_BASES} bases, got {self.payload!r}")
            if any(b not in _BASE_CODE for b in self.payload):
                raise CodecError(f"invalid base in insertion {self.payload!r}")
            if not 0 <= self.chunk < MAX_CHUNKS:
                raise CodecError(f"insertion chunk ordinal {self.chunk} outside [0, {MAX_CHUNKS})")
        elif kind is EventKind.DELETION:
            if isinstance(self.payload, bool) or not isinstance(self.payload, int):
                raise CodecError("deletion length must be an integer")
            if not 1 <= self.payload <= MAX_DELETION:
                raise CodecError(f"deletion length {self.payload} outside [1, {MAX_DELETION}]")
            if self.position == MAX_POSITION and self.payload == MAX_DELETION:
                raise CodecError("deletion id would equal the field prime")
        else:
            raise CodecError(f"unknown event kind {kind!r}")
        if kind is not EventKind.INSERTION and self.chunk:
            raise CodecError("only insertions carry a chunk ordinal")

    def sort_key(self) -> tuple:
        return (self.position, int(self.kind), self.chunk, str(self.payload))

    @classmethod
    def sub(cls, position: int, base: str) -> VariantEvent:
        return cls(position, EventKind.SUBSTITUTION, base)

    @classmethod
    def ins(cls, position: int, bases: str, chunk: int = 0) -> VariantEvent:
        return cls(position, EventKind.INSERTION, bases, chunk)

    @classmethod
    def deletion(cls, position: int, length: int) -> VariantEvent:
        return cls(position, EventKind.DELETION, length)


def insertion_events(position: int, bases: str) -> list[VariantEvent]:
    """Split an insertion of any length (up to 384 bases) into chunk events."""
    if not bases:
        raise CodecError("empty insertion")
    chunks = [bases[i : i + CHUNK_BASES] for i in range(0, len(bases), CHUNK_BASES)]
    if len(chunks) > MAX_CHUNKS:
        raise CodecError(f"insertion of {len(bases)} bases exceeds {MAX_CHUNKS * CHUNK_BASES}")
    return [VariantEvent.ins(position, c, j) for j, c in enumerate(chunks)]


def deletion_events(position: int, length: int) -> list[VariantEvent]:
    """Split a long deletion into consecutive maximal-length deletion events."""
    out = []
    while length > 0:
        step = min(length, MAX_DELETION)
        out.append(VariantEvent.deletion(position, step))
        position += step
        length -= step
    return out


def reference_id(reference: str) -> bytes:
    """16-byte digest identifying a reference string."""
    return hashlib.sha256(reference.encode("ascii")).digest()[:16]


NO_REFERENCE = bytes(16)


@dataclass(frozen=True)
class CompressedGenome:
    """A sequence expressed as a canonical, sorted set of events.

    ``opaque`` holds caller-assigned item ids for events this codec does
    not model (complex rearrangements); they must lie in ``(0, 2**59)``.
    """

    reference_id: bytes
    events: tuple[VariantEvent, ...] = ()
    opaque: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        if len(self.reference_id) != 16:
            raise CodecError("reference_id must be 16 bytes")
        evs = sorted(set(self.events), key=VariantEvent.sort_key)
        if len(evs) != len(self.events):
            raise CodecError("duplicate events")
        object.__setattr__(self, "events", tuple(evs))
        ops = frozenset(self.opaque)
        if any(not (0 < o < OPAQUE_LIMIT) for o in ops):
            raise CodecError("opaque ids must lie in (0, 2**59)")
        object.__setattr__(self, "opaque", ops)

    @classmethod
    def from_events(
        cls, events: Iterable[VariantEvent], reference_id: bytes = NO_REFERENCE, opaque: Iterable[int] = ()
    ) -> CompressedGenome:
        return cls(reference_id, tuple(events), frozenset(opaque))

    def __len__(self) -> int:
        return len(self.events) + len(self.opaque)

    def __iter__(self) -> Iterator[VariantEvent]:
        return iter(self.events)

    def item_ids(self) -> list[int]:
        return [event_to_item_id(e) for e in self.events] + sorted(self.opaque)

    def to_text(self) -> str:
        return format_events(self)


def event_to_item_id(event: VariantEvent) -> int:
    kind = event.kind
    if kind is EventKind.SUBSTITUTION:
        payload = _BASE_CODE[event.payload]
    elif kind is EventKind.INSERTION:
        bases = 0
        for b in event.payload:
            bases = (bases << 2) | _BASE_CODE[b]
        bases <<= 2 * (CHUNK_BASES - len(event.payload))
        payload = (event.chunk << 15) | (len(event.payload) << 12) | bases
    else:
        payload = event.payload
    return (int(kind) << _TAG_SHIFT) | (event.position << PAYLOAD_BITS) | payload


def item_id_to_event(item: int) -> VariantEvent:
    """Exact inverse of :func:`event_to_item_id`.

    Raises :class:`CodecError` for ids no event maps to, which usually
    signals a corrupted decode.
    """
    if not 0 < item < ITEM_LIMIT:
        raise CodecError(f"item id {item} outside (0, 2**61 - 1)")
    tag = item >> _TAG_SHIFT
    position = (item >> PAYLOAD_BITS) & MAX_POSITION
    payload = item & _PAYLOAD_MASK
    if tag == EventKind.SUBSTITUTION:
        if payload >> 2:
            raise CodecError(f"substitution id {item:#x} has stray payload bits")
        return VariantEvent.sub(position, BASES[payload])
    if tag == EventKind.INSERTION:
        chunk = payload >> 15
        n = (payload >> 12) & 0b111
        bases = payload & 0xFFF
        if not 1 <= n <= CHUNK_BASES:
            raise CodecError(f"insertion id {item:#x} has invalid base count {n}")
        if bases & ((1 << 2 * (CHUNK_BASES - n)) - 1):
            raise CodecError(f"insertion id {item:#x} has stray padding bits")
        seq = "".join(BASES[(bases >> (2 * (CHUNK_BASES - 1 - i))) & 3] for i in range(n))
        return VariantEvent.ins(position, seq, chunk)
    if tag == EventKind.DELETION:
        if payload == 0:
            raise CodecError(f"deletion id {item:#x} has zero length")
        return VariantEvent.deletion(position, payload)
    raise CodecError(f"item id {item:#x} carries the reserved kind tag 00")


def decode_item(item: int) -> VariantEvent | int:
    """Events for modelled ids, the raw int for opaque (tag 00) ids."""
    if 0 < item < OPAQUE_LIMIT:
        return item
    return item_id_to_event(item)


def item_sort_key(item: VariantEvent | int) -> tuple:
    """Events in genome order, then opaque ids numerically."""
    return (1, item, ()) if isinstance(item, int) else (0, 0, item.sort_key())


def _check_bases(seq: str, what: str) -> None:
    bad = set(seq) - set(BASES)
    if bad:
        raise CodecError(f"invalid base(s) {''.join(sorted(bad))!r} in {what}")


def diff_substitutions(seq: str, reference: str) -> CompressedGenome:
    """One substitution per mismatching position of two equal-length strings."""
    if len(seq) != len(reference):
        raise CodecError(f"length mismatch: sequence {len(seq)} vs reference {len(reference)}")
    _check_bases(seq, "sequence")
    _check_bases(reference, "reference")
    events = [VariantEvent.sub(i, a) for i, (a, r) in enumerate(zip(seq, reference)) if a != r]
    return CompressedGenome(reference_id(reference), tuple(events))


def relative_to_absolute(
    gapped: Sequence[VariantEvent], reference_id: bytes = NO_REFERENCE
) -> CompressedGenome:
    """Prefix-sum gap-encoded positions into absolute ones.

    Each input event's ``position`` is read as the offset from the
    previous event (from 0 for the first one).
    """
    out = []
    pos = 0
    for ev in gapped:
        pos += ev.position
        if pos > MAX_POSITION:
            raise CodecError(f"absolute position {pos} overflows {POSITION_BITS} bits")
        out.append(VariantEvent(pos, ev.kind, ev.payload, ev.chunk))
    return CompressedGenome(reference_id, tuple(out))


def absolute_to_relative(genome: CompressedGenome) -> list[VariantEvent]:
    out = []
    prev = 0
    for ev in genome.events:
        out.append(VariantEvent(ev.position - prev, ev.kind, ev.payload, ev.chunk))
        prev = ev.position
    return out


def apply_events(reference: str, genome: CompressedGenome) -> str:
    """Rebuild the sequence a genome describes against ``reference``."""
    if genome.reference_id not in (NO_REFERENCE, reference_id(reference)):
        raise CodecError("genome was encoded against a different reference")
    n = len(reference)
    seq = list(reference)
    subs: dict[int, str] = {}
    inserts: dict[int, dict[int, str]] = {}
    deletes: dict[int, int] = {}
    for ev in genome.events:
        if ev.kind is EventKind.SUBSTITUTION:
            if ev.position >= n:
                raise CodecError(f"substitution at {ev.position} past reference end {n}")
            if ev.position in subs:
                raise CodecError(f"conflicting substitutions at {ev.position}")
            subs[ev.position] = ev.payload
        elif ev.kind is EventKind.INSERTION:
            if ev.position > n:
                raise CodecError(f"insertion at {ev.position} past reference end {n}")
            inserts.setdefault(ev.position, {})[ev.chunk] = ev.payload
        else:
            if ev.position + ev.payload > n:
                raise CodecError(f"deletion {ev.position}+{ev.payload} past reference end {n}")
            if ev.position in deletes:
                raise CodecError(f"conflicting deletions at {ev.position}")
            deletes[ev.position] = ev.payload

    deleted: list[tuple[int, int]] = sorted((s, s + ln) for s, ln in deletes.items())
    for (s0, e0), (s1, _) in zip(deleted, deleted[1:]):
        if s1 < e0:
            raise CodecError(f"overlapping deletions at {s0} and {s1}")
    for s, e in deleted:
        if any(s <= i < e for i in subs):
            raise CodecError(f"substitution inside deletion [{s}, {e})")
        if any(s < i < e for i in inserts):
            raise CodecError(f"insertion inside deletion [{s}, {e})")
    for pos, chunks in inserts.items():
        if sorted(chunks) != list(range(len(chunks))):
            raise CodecError(f"insertion chunks at {pos} are not consecutive from 0")

    for i, b in subs.items():
        seq[i] = b
    for pos in sorted(set(inserts) | set(deletes), reverse=True):
        ins = "".join(inserts[pos][j] for j in range(len(inserts[pos]))) if pos in inserts else ""
        seq[pos : pos + deletes.get(pos, 0)] = list(ins)
    return "".join(seq)


@dataclass(frozen=True)
class Range:
    """Half-open interval ``[start, end)`` of absolute positions."""

    start: int
    end: int

    def __post_init__(self) -> None:
        if not 0 <= self.start <= self.end:
            raise ValueError(f"invalid range [{self.start}, {self.end})")

    def __contains__(self, position: int) -> bool:
        return self.start <= position < self.end

    def intersect(self, other: Range) -> Range:
        start = max(self.start, other.start)
        return Range(start, max(start, min(self.end, other.end)))

    @classmethod
    def parse(cls, text: str) -> Range:
        """Parse ``START..END`` given as 1-based inclusive positions."""
        m = re.fullmatch(r"\s*(\d+)\s*\.\.\s*(\d+)\s*", text)
        if not m:
            raise ValueError(f"range must look like START..END, got {text!r}")
        start, end = int(m.group(1)), int(m.group(2))
        if start < 1 or end < start - 1:
            raise ValueError(f"invalid 1-based range {text!r}")
        return cls(start - 1, end)


def restrict(genome: CompressedGenome, r: Range) -> CompressedGenome:
    """Keep events whose position falls in ``r``; opaque ids have no position and are dropped."""
    return CompressedGenome(genome.reference_id, tuple(e for e in genome.events if e.position in r))


# text format ---------------------------------------------------------------

_LINE = re.compile(
    r"S(?P<spos>\d+)(?P<base>[ACGT])"
    r"|I(?P<ipos>\d+)(?:\.(?P<chunk>\d+))?:(?P<bases>[ACGT]+)"
    r"|D(?P<dpos>\d+):(?P<len>\d+)"
    r"|X(?P<opaque>[0-9a-fA-F]+)"
)


def format_event(ev: VariantEvent) -> str:
    pos = ev.position + 1
    if ev.kind is EventKind.SUBSTITUTION:
        return f"S{pos}{ev.payload}"
    if ev.kind is EventKind.INSERTION:
        return f"I{pos}.{ev.chunk}:{ev.payload}" if ev.chunk else f"I{pos}:{ev.payload}"
    return f"D{pos}:{ev.payload}"


def format_item(item: VariantEvent | int) -> str:
    return f"X{item:x}" if isinstance(item, int) else format_event(item)


def format_events(genome: CompressedGenome) -> str:
    lines = []
    if genome.reference_id != NO_REFERENCE:
        lines.append(f"#reference {genome.reference_id.hex()}")
    lines.extend(format_event(e) for e in genome.events)
    lines.extend(f"X{o:x}" for o in sorted(genome.opaque))
    return "\n".join(lines) + "\n" if lines else ""


def parse_events(text: str, source: str = "<events>") -> CompressedGenome:
    """Parse the one-event-per-line text format.

    ``I<pos>:<bases>`` without an explicit ``.chunk`` longer than six
    bases is split into chunks.  Blank lines and ``#`` comments are
    skipped; ``#reference <hex>`` sets the reference id.
    """
    ref = NO_REFERENCE
    events: list[VariantEvent] = []
    opaque: list[int] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if len(parts) == 2 and parts[0] == "reference":
                try:
                    ref = bytes.fromhex(parts[1])
                except ValueError:
                    ref = b""
                if len(ref) != 16:
                    raise CodecError(f"{source}:{lineno}: malformed reference id")
            continue
        m = _LINE.fullmatch(line)
        if not m:
            raise CodecError(f"{source}:{lineno}: cannot parse event {line!r}")
        try:
            if m["spos"] is not None:
                events.append(VariantEvent.sub(_pos(m["spos"]), m["base"]))
            elif m["ipos"] is not None:
                if m["chunk"] is not None:
                    events.append(VariantEvent.ins(_pos(m["ipos"]), m["bases"], int(m["chunk"])))
                else:
                    events.extend(insertion_events(_pos(m["ipos"]), m["bases"]))
            elif m["dpos"] is not None:
                events.append(VariantEvent.deletion(_pos(m["dpos"]), int(m["len"])))
            else:
                opaque.append(int(m["opaque"], 16))
        except CodecError as exc:
            raise CodecError(f"{source}:{lineno}: {exc}") from None
    try:
        return CompressedGenome(ref, tuple(events), frozenset(opaque))
    except CodecError as exc:
        raise CodecError(f"{source}: {exc}") from None


def _pos(text: str) -> int:
    pos = int(text)
    if pos < 1:
        raise CodecError("text positions are 1-based")
    return pos - 1


def read_reference(text: str) -> str:
    """Read a FASTA-like reference: optional ``>`` header lines, sequence lines concatenated."""
    seq = "".join(line.strip() for line in text.splitlines() if line.strip() and not line.startswith(">"))
    seq = seq.upper()
    _check_bases(seq, "reference")
    return seq
