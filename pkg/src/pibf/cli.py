"""Command line entry point: ``pibf <command> ...``.

Exit codes: 0 success or match, 1 usage error, 2 undecodable,
3 protocol error, 4 I/O or input-file error.
"""

from __future__ import annotations

import argparse
import logging
import os
import socket
import sys
import time
from pathlib import Path
from typing import BinaryIO, Sequence

from . import experiments as ex
from .errors import CodecError, ParamsMismatchError, PibfError, ProtocolError, WireError
from .genome import (
    NO_REFERENCE,
    CompressedGenome,
    Range,
    decode_item,
    diff_substitutions,
    format_item,
    item_sort_key,
    parse_events,
    read_reference,
    restrict,
)
from .homomorphic import PublicKey, SecretKey, keygen
from .ibf import Ibf, list_items, make_params, subtract
from .protocol import EntryOutcome, alice_session, bob_session, charles_session
from .wire import ProtocolConfig, Scenario

EXIT_OK, EXIT_USAGE, EXIT_UNDECODABLE, EXIT_PROTOCOL, EXIT_IO = 0, 1, 2, 3, 4
KEY_ENV = "PIBF_KEY"

log = logging.getLogger("pibf")


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


class InputError(PibfError):
    pass


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _fraction(text: str) -> float:
    v = float(text)
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError(f"expected a value in (0, 1), got {text}")
    return v


# file helpers --------------------------------------------------------------


def _read_text(path: str) -> str:
    try:
        return sys.stdin.read() if path == "-" else Path(path).read_text()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from exc


def load_events(path: str) -> CompressedGenome:
    return parse_events(_read_text(path), source=path)


def _write_text(path: str | None, text: str) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        Path(path).write_text(text)


def _key_path(arg: str | None) -> Path:
    path = arg or os.environ.get(KEY_ENV)
    if not path:
        raise InputError(f"no key path given and ${KEY_ENV} is unset")
    return Path(path)


def load_secret_key(arg: str | None) -> SecretKey:
    path = _key_path(arg)
    try:
        return SecretKey.from_bytes(bytes.fromhex(path.read_text().strip()))
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from exc
    except ValueError as exc:
        raise InputError(f"{path}: not a secret key file ({exc})") from exc


def load_public_key(arg: str | None) -> PublicKey:
    path = Path(arg) if arg else Path(str(_key_path(None)) + ".pub")
    try:
        return PublicKey.from_bytes(bytes.fromhex(path.read_text().strip()))
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from exc
    except ValueError as exc:
        raise InputError(f"{path}: not a public key file ({exc})") from exc


# transports ----------------------------------------------------------------


class _SockReader:
    def __init__(self, sock: socket.socket):
        self.sock = sock

    def read(self, n: int) -> bytes:
        return self.sock.recv(n)


class _SockWriter:
    def __init__(self, sock: socket.socket):
        self.sock = sock

    def write(self, data: bytes) -> int:
        self.sock.sendall(data)
        return len(data)

    def flush(self) -> None:
        pass

    def close(self) -> None:
        try:
            self.sock.shutdown(socket.SHUT_WR)
        except OSError:
            pass


def _hostport(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    if not port.isdigit():
        raise InputError(f"expected HOST:PORT, got {text!r}")
    return host or "127.0.0.1", int(port)


def open_transport(listen: str | None, connect: str | None, timeout: float = 30.0) -> tuple[BinaryIO, BinaryIO]:
    """Reader and writer for a peer: TCP when asked, else stdin/stdout."""
    if listen:
        srv = socket.create_server(_hostport(listen))
        srv.settimeout(timeout)
        sock, _ = srv.accept()
        srv.close()
    elif connect:
        addr = _hostport(connect)
        deadline = time.monotonic() + timeout
        while True:
            try:
                sock = socket.create_connection(addr)
                break
            except ConnectionRefusedError:
                if time.monotonic() > deadline:
                    raise
                time.sleep(0.05)
    else:
        return sys.stdin.buffer, sys.stdout.buffer
    sock.settimeout(None)
    return _SockReader(sock), _SockWriter(sock)


# commands ------------------------------------------------------------------


def cmd_encode(args) -> int:
    seq = read_reference(_read_text(args.sequence))
    ref = read_reference(_read_text(args.reference))
    try:
        genome = diff_substitutions(seq, ref)
    except CodecError as exc:
        raise InputError(f"{args.sequence} vs {args.reference}: {exc}") from exc
    _write_text(args.output, genome.to_text())
    return EXIT_OK


def _range(args) -> Range | None:
    return Range.parse(args.range) if args.range else None


def cmd_diff(args) -> int:
    a, b = load_events(args.a), load_events(args.b)
    if NO_REFERENCE not in (a.reference_id, b.reference_id) and a.reference_id != b.reference_id:
        raise InputError(f"{args.a} and {args.b} use different references")
    r = _range(args)
    if r is not None:
        a, b = restrict(a, r), restrict(b, r)
    params = make_params(args.tau, args.epsilon, hash_seed=_seed_bytes(args.seed))
    res = list_items(subtract(Ibf.from_items(params, a.item_ids()), Ibf.from_items(params, b.item_ids())))
    if not res.complete:
        print(f"undecodable: difference exceeds capacity (tau={args.tau})", file=sys.stderr)
        return EXIT_UNDECODABLE
    lines = [f"+{format_item(x)}" for x in sorted(map(decode_item, res.positives), key=item_sort_key)]
    lines += [f"-{format_item(x)}" for x in sorted(map(decode_item, res.negatives), key=item_sort_key)]
    _write_text(args.output, "".join(line + "\n" for line in lines))
    return EXIT_OK


def cmd_keygen(args) -> int:
    path = _key_path(args.out)
    pk, sk = keygen(args.bits, insecure_test=args.insecure_test_keys)
    path.write_text(sk.to_bytes().hex() + "\n")
    Path(str(path) + ".pub").write_text(pk.to_bytes().hex() + "\n")
    print(f"wrote {path} and {path}.pub ({pk.bits}-bit modulus)", file=sys.stderr)
    return EXIT_OK


def _seed_bytes(seed: int | None) -> bytes | None:
    return None if seed is None else seed.to_bytes(16, "little")


def format_outcomes(entries: Sequence[EntryOutcome]) -> str:
    out = []
    for e in entries:
        if e.matched:
            out.append(f"entry {e.index}: match ({e.difference} differences)")
            out.extend(f"  +{format_item(x)}" for x in e.positives)
            out.extend(f"  -{format_item(x)}" for x in e.negatives)
        else:
            out.append(f"entry {e.index}: no match")
    return "".join(line + "\n" for line in out)


def _report(entries: Sequence[EntryOutcome], args, to_stderr: bool) -> int:
    text = format_outcomes(entries)
    if args.output and args.output != "-":
        Path(args.output).write_text(text)
    elif to_stderr:
        sys.stderr.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK if any(e.matched for e in entries) else EXIT_UNDECODABLE


def cmd_bob(args) -> int:
    genome = load_events(args.events)
    scenario = Scenario.MASKED if args.scenario == "masked" else Scenario.HOMOMORPHIC
    cfg = ProtocolConfig.create(
        args.tau, args.epsilon, scenario, range=_range(args),
        reference_id=genome.reference_id, hash_seed=_seed_bytes(args.seed),
    )
    pk = load_public_key(args.public_key) if scenario is Scenario.HOMOMORPHIC else None
    rfile, wfile = open_transport(args.listen, args.connect)
    entries = bob_session(genome, cfg, rfile, wfile, pk)
    if scenario is Scenario.HOMOMORPHIC:
        return EXIT_OK
    return _report(entries, args, to_stderr=not (args.listen or args.connect))


def cmd_alice(args) -> int:
    db = [load_events(p) for p in args.db]
    rfile, wfile = open_transport(args.listen, args.connect)
    if args.forward:
        _, wfile = open_transport(None, args.forward)
    alice_session(db, rfile, wfile)
    return EXIT_OK


def cmd_charles(args) -> int:
    sk = load_secret_key(args.key)
    rfile, _ = open_transport(args.listen, args.connect)
    entries = charles_session(sk, rfile)
    return _report(entries, args, to_stderr=False)


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def cmd_experiment(args) -> int:
    if args.kind == "decode-rate":
        grid = [ex.DecodeRateConfig(m, args.epsilon, args.shared, args.tau) for m in _ints(args.m)]
        reports = ex.decode_rate(grid, args.trials, args.seed, args.workers)
    else:
        if args.tau:
            params = make_params(args.tau, args.epsilon, hash_seed=bytes(16))
            t, k = params.t, params.k
        else:
            t, k = args.t, args.k
        ns = _ints(args.n) if args.n else [None]
        grid = [ex.PrivacyRateConfig(t, k, args.epsilon, n) for n in ns]
        reports = ex.privacy_rate(grid, args.trials, args.seed, args.workers)
    _write_text(args.output, ex.to_csv(reports, timing=not args.no_timing))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="pibf", description="Privacy-enhanced IBF set reconciliation for genome variant sets.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("encode", help="encode a sequence as substitutions against a reference")
    p.add_argument("sequence")
    p.add_argument("reference")
    p.add_argument("-o", "--output")
    p.set_defaults(fn=cmd_encode)

    def sizing(p):
        p.add_argument("--tau", type=_positive, default=100)
        p.add_argument("--epsilon", type=_fraction, default=0.01)
        p.add_argument("--range", metavar="START..END", help="1-based inclusive positions")
        p.add_argument("--seed", type=int, help="fixed hash seed (default random)")

    p = sub.add_parser("diff", help="local, non-private difference of two event files")
    p.add_argument("a")
    p.add_argument("b")
    sizing(p)
    p.add_argument("-o", "--output")
    p.set_defaults(fn=cmd_diff)

    p = sub.add_parser("keygen", help="generate Charles's key pair")
    p.add_argument("--out", help=f"secret key path (default ${KEY_ENV}); public key goes to PATH.pub")
    p.add_argument("--bits", type=int, default=2048)
    p.add_argument("--insecure-test-keys", action="store_true", help="allow moduli below 1024 bits")
    p.set_defaults(fn=cmd_keygen)

    role = sub.add_parser("role", help="run one protocol party").add_subparsers(
        dest="role", required=True, parser_class=_Parser
    )

    def transport(p):
        g = p.add_mutually_exclusive_group()
        g.add_argument("--listen", metavar="HOST:PORT")
        g.add_argument("--connect", metavar="HOST:PORT")
        p.add_argument("-o", "--output")

    p = role.add_parser("bob", help="querier")
    p.add_argument("--events", required=True)
    p.add_argument("--scenario", choices=("masked", "hom"), default="masked")
    p.add_argument("--public-key", help=f"Charles's public key (default ${KEY_ENV}.pub)")
    sizing(p)
    transport(p)
    p.set_defaults(fn=cmd_bob)

    p = role.add_parser("alice", help="database holder")
    p.add_argument("--db", nargs="+", required=True, help="one event file per database entry")
    p.add_argument("--forward", metavar="HOST:PORT", help="connect to Charles here (homomorphic scenario)")
    transport(p)
    p.set_defaults(fn=cmd_alice)

    p = role.add_parser("charles", help="trusted third party")
    p.add_argument("--key", help=f"secret key path (default ${KEY_ENV})")
    transport(p)
    p.set_defaults(fn=cmd_charles)

    p = sub.add_parser("experiment", help="Monte-Carlo decode/privacy rates as CSV")
    p.add_argument("kind", choices=("decode-rate", "privacy-rate"))
    p.add_argument("--m", default="10,50,100", help="difference sizes (decode-rate)")
    p.add_argument("--shared", type=int, default=100, help="shared items per trial (decode-rate)")
    p.add_argument("--tau", type=_positive, help="size tables for this tau instead of m (decode-rate) or to derive t, k")
    p.add_argument("--t", type=int, default=3000)
    p.add_argument("--k", type=int, default=15)
    p.add_argument("--n", help="item counts (privacy-rate; default the privacy threshold)")
    p.add_argument("--epsilon", type=_fraction, default=0.01)
    p.add_argument("--trials", type=_positive, default=1000)
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--workers", type=_positive, default=1)
    p.add_argument("--no-timing", action="store_true", help="write 0 in the seconds column")
    p.add_argument("-o", "--output")
    p.set_defaults(fn=cmd_experiment)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.fn(args)
    except (ProtocolError, WireError, ParamsMismatchError) as exc:
        print(f"pibf: protocol error: {exc}", file=sys.stderr)
        return EXIT_PROTOCOL
    except (InputError, CodecError, OSError) as exc:
        print(f"pibf: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"pibf: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
