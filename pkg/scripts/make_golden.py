"""Regenerate the wire golden files under tests/golden.

Plain messages are deterministic and always rewritten.  Encrypted
messages and the frozen test key are random, so they are only written
when missing (or with --force, which invalidates the old files).
"""

import argparse
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "tests"))

from helpers import GOLDEN_KEY, golden_plain_ibf, plain_messages  # noqa: E402

from pibf.homomorphic import SecretKey, encrypt_ibf, encrypted_delete, keygen  # noqa: E402
from pibf.wire import EncryptedQuery, EncryptedResponse, PublicKeyMsg, encode  # noqa: E402


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=ROOT / "tests" / "golden")
    ap.add_argument("--force", action="store_true", help="also redraw the key and encrypted messages")
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    for name, msg in plain_messages().items():
        (args.out / f"{name}.bin").write_bytes(encode(msg))

    key_path = args.out / GOLDEN_KEY
    if args.force or not key_path.exists():
        _, sk = keygen(512, insecure_test=True)
        key_path.write_text(sk.to_bytes().hex() + "\n")
    sk = SecretKey.from_bytes(bytes.fromhex(key_path.read_text().strip()))
    pk = sk.public

    enc_paths = [args.out / n for n in ("encrypted_query.bin", "encrypted_response.bin")]
    if args.force or not all(p.exists() for p in enc_paths):
        eibf = encrypt_ibf(pk, golden_plain_ibf())
        enc_paths[0].write_bytes(encode(EncryptedQuery(eibf, pk.ciphertext_size)))
        resp = encrypted_delete(pk, eibf, [6, 9])
        enc_paths[1].write_bytes(encode(EncryptedResponse(1, resp, pk.ciphertext_size)))
    (args.out / "public_key.bin").write_bytes(encode(PublicKeyMsg(pk)))
    print(f"golden files written to {args.out}")


if __name__ == "__main__":
    main()
