"""Role state machines for the three query scenarios.

Masked (Bob and Alice)::

    Bob -> Alice    Config, MaskedQuery(pad + IBF(Q))
    Alice -> Bob    EntryResponse(i, query - IBF(Y_i))   for each entry i
    Bob             unmask, peel

Homomorphic (Bob, Alice, Charles)::

    Bob -> Alice    Config, PublicKey, EncryptedQuery(E(IBF(Q)))
    Alice -> Charles  Config, EncryptedResponse(i, E(IBF(Q) - IBF(Y_i)))
    Charles         decrypt, peel

A range in the config makes both sides restrict their genomes first.
The role classes do no I/O; the ``*_session`` helpers drive them over
binary streams.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import BinaryIO, Sequence

from .errors import CodecError, ProtocolError
from .genome import NO_REFERENCE, CompressedGenome, VariantEvent, decode_item, item_sort_key, restrict
from .homomorphic import PublicKey, SecretKey, decrypt_ibf, encrypt_ibf, encrypted_delete
from .ibf import DecodeResult, Ibf, list_items
from .masking import Pad, make_pad, mask_build, unmask
from .wire import (
    EncryptedQuery,
    EncryptedResponse,
    EntryResponse,
    MaskedQuery,
    Message,
    ProtocolConfig,
    PublicKeyMsg,
    Scenario,
    encode,
    decode,
    iter_frames,
    write_frame,
)

log = logging.getLogger(__name__)

Item = VariantEvent | int


@dataclass(frozen=True)
class EntryOutcome:
    """Result for one of Alice's entries.

    ``positives`` are the querier's events missing from the entry,
    ``negatives`` the entry's events missing from the query.  Both are
    empty when the entry did not match.
    """

    index: int
    matched: bool
    positives: tuple[Item, ...] = ()
    negatives: tuple[Item, ...] = ()

    @property
    def difference(self) -> int:
        return len(self.positives) + len(self.negatives)


@dataclass(frozen=True)
class Outcome:
    entries: tuple[EntryOutcome, ...]
    traffic: tuple[tuple[str, str, int], ...] = field(default=(), compare=False)

    def matches(self) -> list[EntryOutcome]:
        return [e for e in self.entries if e.matched]


def outcome_from_decode(index: int, result: DecodeResult, t: int) -> EntryOutcome:
    """Match iff the table peeled completely into well-formed item ids."""
    if not result.complete or len(result) > t:
        return EntryOutcome(index, False)
    try:
        pos = sorted((decode_item(x) for x in result.positives), key=item_sort_key)
        neg = sorted((decode_item(x) for x in result.negatives), key=item_sort_key)
    except CodecError:
        return EntryOutcome(index, False)
    return EntryOutcome(index, True, tuple(pos), tuple(neg))


def _prepare(genome: CompressedGenome, cfg: ProtocolConfig) -> CompressedGenome:
    return genome if cfg.range is None else restrict(genome, cfg.range)


def _check_reference(cfg: ProtocolConfig, genome: CompressedGenome, who: str) -> None:
    if NO_REFERENCE in (cfg.reference_id, genome.reference_id):
        return
    if cfg.reference_id != genome.reference_id:
        raise ProtocolError(f"{who} genome uses a different reference than the query")


class MaskedQuerier:
    """Bob in the masked scenario."""

    def __init__(self, genome: CompressedGenome, cfg: ProtocolConfig, *, pad: Pad | None = None):
        if cfg.scenario is not Scenario.MASKED:
            raise ProtocolError("masked querier needs a masked-scenario config")
        cfg.validate()
        _check_reference(cfg, genome, "Bob's")
        self.cfg = cfg
        self.genome = _prepare(genome, cfg)
        self.pad = make_pad(cfg.params) if pad is None else pad
        if self.pad.params != cfg.params:
            raise ProtocolError("pad geometry does not match the config")

    def opening(self) -> list[Message]:
        return [self.cfg, MaskedQuery(mask_build(self.pad, self.genome.item_ids()))]

    def receive(self, msg: Message) -> EntryOutcome:
        if not isinstance(msg, EntryResponse):
            raise ProtocolError(f"expected EntryResponse, got {type(msg).__name__}")
        if msg.ibf.params != self.cfg.params:
            raise ProtocolError("response parameters differ from the query")
        result = list_items(unmask(msg.ibf, self.pad))
        return outcome_from_decode(msg.index, result, self.cfg.params.t)

    def close(self) -> None:
        self.pad.destroy()


class HomomorphicQuerier:
    """Bob in the third-party scenario; he learns nothing back."""

    def __init__(self, genome: CompressedGenome, cfg: ProtocolConfig, public_key: PublicKey):
        if cfg.scenario is not Scenario.HOMOMORPHIC:
            raise ProtocolError("homomorphic querier needs a homomorphic-scenario config")
        cfg.validate()
        _check_reference(cfg, genome, "Bob's")
        self.cfg = cfg
        self.genome = _prepare(genome, cfg)
        self.pk = public_key

    def opening(self) -> list[Message]:
        plain = Ibf.from_items(self.cfg.params, self.genome.item_ids())
        eibf = encrypt_ibf(self.pk, plain)
        return [self.cfg, PublicKeyMsg(self.pk), EncryptedQuery(eibf, self.pk.ciphertext_size)]


class Responder:
    """Alice: answers one query with one response per database entry."""

    def __init__(self, database: Sequence[CompressedGenome]):
        self.database = list(database)
        self.cfg: ProtocolConfig | None = None
        self.pk: PublicKey | None = None

    def receive(self, msg: Message) -> list[Message]:
        """Feed one inbound message; returns the messages to send onward."""
        if isinstance(msg, ProtocolConfig):
            if self.cfg is not None:
                raise ProtocolError("duplicate config")
            msg.validate()
            for g in self.database:
                _check_reference(msg, g, "Alice's")
            self.cfg = msg
            # Charles needs the config to check the geometry he decodes
            return [msg] if msg.scenario is Scenario.HOMOMORPHIC else []
        cfg = self._need_cfg()
        if isinstance(msg, PublicKeyMsg):
            if cfg.scenario is not Scenario.HOMOMORPHIC:
                raise ProtocolError("public key sent in the masked scenario")
            self.pk = msg.key
            return []
        if isinstance(msg, MaskedQuery):
            if cfg.scenario is not Scenario.MASKED:
                raise ProtocolError("masked query under a homomorphic config")
            self._check_params(msg.ibf.params)
            return [EntryResponse(i, self._delete_plain(msg.ibf, g)) for i, g in enumerate(self.database)]
        if isinstance(msg, EncryptedQuery):
            if cfg.scenario is not Scenario.HOMOMORPHIC or self.pk is None:
                raise ProtocolError("encrypted query without a homomorphic config and public key")
            self._check_params(msg.eibf.params)
            if msg.eibf.fingerprint != self.pk.fingerprint:
                raise ProtocolError("encrypted query does not match the announced public key")
            out = []
            for i, g in enumerate(self.database):
                ids = _prepare(g, cfg).item_ids()
                out.append(EncryptedResponse(i, encrypted_delete(self.pk, msg.eibf, ids), self.pk.ciphertext_size))
            return out
        raise ProtocolError(f"Alice cannot handle {type(msg).__name__}")

    def _need_cfg(self) -> ProtocolConfig:
        if self.cfg is None:
            raise ProtocolError("message received before config")
        return self.cfg

    def _check_params(self, params) -> None:
        if params != self._need_cfg().params:
            raise ProtocolError("query parameters differ from the config")

    def _delete_plain(self, query: Ibf, genome: CompressedGenome) -> Ibf:
        out = query.copy()
        out.delete_many(_prepare(genome, self._need_cfg()).item_ids())
        return out


class Arbiter:
    """Charles: decrypts responses and peels them."""

    def __init__(self, secret_key: SecretKey):
        self.sk = secret_key
        self.cfg: ProtocolConfig | None = None

    def receive(self, msg: Message) -> EntryOutcome | None:
        if isinstance(msg, ProtocolConfig):
            if msg.scenario is not Scenario.HOMOMORPHIC:
                raise ProtocolError("Charles only serves the homomorphic scenario")
            msg.validate()
            self.cfg = msg
            return None
        if not isinstance(msg, EncryptedResponse):
            raise ProtocolError(f"Charles cannot handle {type(msg).__name__}")
        if self.cfg is None:
            raise ProtocolError("response received before config")
        if msg.eibf.params != self.cfg.params:
            raise ProtocolError("response geometry differs from the config")
        plain = decrypt_ibf(self.sk, msg.eibf)
        return outcome_from_decode(msg.index, list_items(plain), self.cfg.params.t)


# in-memory runs ------------------------------------------------------------


class _Wire:
    """Pushes every message through its byte encoding and logs sizes."""

    def __init__(self) -> None:
        self.traffic: list[tuple[str, str, int]] = []

    def send(self, route: str, msg: Message) -> Message:
        data = encode(msg)
        self.traffic.append((route, type(msg).__name__, len(data)))
        return decode(data)


def scenario1_run(
    bob: CompressedGenome,
    alice: Sequence[CompressedGenome],
    cfg: ProtocolConfig,
    *,
    pad: Pad | None = None,
) -> Outcome:
    """Masked scenario end to end; the outcome is what Bob learns."""
    wire = _Wire()
    querier = MaskedQuerier(bob, cfg, pad=pad)
    responder = Responder(alice)
    replies = []
    for msg in querier.opening():
        replies.extend(responder.receive(wire.send("bob->alice", msg)))
    try:
        entries = [querier.receive(wire.send("alice->bob", r)) for r in replies]
    finally:
        querier.close()
    return Outcome(tuple(entries), tuple(wire.traffic))


def scenario2_run(
    bob: CompressedGenome,
    alice: Sequence[CompressedGenome],
    charles_keys: tuple[PublicKey, SecretKey],
    cfg: ProtocolConfig,
) -> Outcome:
    """Third-party scenario end to end; the outcome is what Charles learns."""
    pk, sk = charles_keys
    wire = _Wire()
    querier = HomomorphicQuerier(bob, cfg, pk)
    responder = Responder(alice)
    arbiter = Arbiter(sk)
    entries = []
    for msg in querier.opening():
        for fwd in responder.receive(wire.send("bob->alice", msg)):
            got = arbiter.receive(wire.send("alice->charles", fwd))
            if got is not None:
                entries.append(got)
    return Outcome(tuple(entries), tuple(wire.traffic))


def run_scenario(
    bob: CompressedGenome,
    alice: Sequence[CompressedGenome],
    cfg: ProtocolConfig,
    *,
    charles_keys: tuple[PublicKey, SecretKey] | None = None,
    pad: Pad | None = None,
) -> Outcome:
    if cfg.scenario is Scenario.MASKED:
        return scenario1_run(bob, alice, cfg, pad=pad)
    if charles_keys is None:
        raise ProtocolError("homomorphic scenario needs Charles's key pair")
    return scenario2_run(bob, alice, charles_keys, cfg)


def scenario3_restrict(
    bob: CompressedGenome,
    alice: Sequence[CompressedGenome],
    cfg: ProtocolConfig,
    **kwargs,
) -> Outcome:
    """Either scenario, restricted to ``cfg.range`` on both sides."""
    if cfg.range is None:
        raise ProtocolError("range query needs a range in the config")
    return run_scenario(bob, alice, cfg, **kwargs)


# stream sessions -----------------------------------------------------------


def bob_session(
    genome: CompressedGenome,
    cfg: ProtocolConfig,
    rfile: BinaryIO | None,
    wfile: BinaryIO,
    public_key: PublicKey | None = None,
) -> list[EntryOutcome]:
    """Run Bob over streams.  Only the masked scenario reads replies."""
    if cfg.scenario is Scenario.HOMOMORPHIC:
        if public_key is None:
            raise ProtocolError("homomorphic scenario needs Charles's public key")
        for msg in HomomorphicQuerier(genome, cfg, public_key).opening():
            log.info("bob -> alice %s %d bytes", type(msg).__name__, write_frame(wfile, msg))
        wfile.close()
        return []
    querier = MaskedQuerier(genome, cfg)
    try:
        for msg in querier.opening():
            log.info("bob -> alice %s %d bytes", type(msg).__name__, write_frame(wfile, msg))
        out = []
        for msg, size in iter_frames(rfile):
            log.info("alice -> bob %s %d bytes", type(msg).__name__, size)
            out.append(querier.receive(msg))
        return out
    finally:
        querier.close()


def alice_session(database: Sequence[CompressedGenome], rfile: BinaryIO, wfile: BinaryIO) -> int:
    """Run Alice: ``wfile`` leads back to Bob (masked) or on to Charles (homomorphic)."""
    responder = Responder(database)
    sent = 0
    for msg, size in iter_frames(rfile):
        log.info("recv %s %d bytes", type(msg).__name__, size)
        for out in responder.receive(msg):
            n = write_frame(wfile, out)
            log.info("send %s %d bytes", type(out).__name__, n)
            sent += 1
        if isinstance(msg, (MaskedQuery, EncryptedQuery)):
            break
    wfile.close()
    return sent


def charles_session(secret_key: SecretKey, rfile: BinaryIO) -> list[EntryOutcome]:
    arbiter = Arbiter(secret_key)
    out = []
    for msg, size in iter_frames(rfile):
        log.info("alice -> charles %s %d bytes", type(msg).__name__, size)
        got = arbiter.receive(msg)
        if got is not None:
            out.append(got)
    return out

