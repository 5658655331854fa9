"""Shared builders for tests."""

import itertools
import random
from collections import Counter

import numpy as np

from pibf.genome import CompressedGenome, Range, VariantEvent, reference_id
from pibf.ibf import Ibf, make_params
from pibf.masking import Pad, make_pad, mask_build
from pibf.wire import EntryResponse, MaskedQuery, ProtocolConfig, Scenario


def random_reference(rng: random.Random, n: int) -> str:
    return "".join(rng.choice("ACGT") for _ in range(n))


def mutate(rng: random.Random, ref: str, positions) -> str:
    s = list(ref)
    for i in positions:
        s[i] = rng.choice([b for b in "ACGT" if b != s[i]])
    return "".join(s)


def genome_pair(rng: random.Random, n_shared: int, n_bob: int, n_alice: int, length: int = 100_000):
    """Two substitution genomes sharing ``n_shared`` events, with private extras."""
    positions = rng.sample(range(length), n_shared + n_bob + n_alice)
    bases = {p: rng.choice("ACGT") for p in positions}
    shared = positions[:n_shared]
    bob = shared + positions[n_shared : n_shared + n_bob]
    alice = shared + positions[n_shared + n_bob :]
    ref = reference_id(f"synthetic-{length}")
    mk = lambda ps: CompressedGenome(ref, tuple(VariantEvent.sub(p, bases[p]) for p in ps))
    return mk(bob), mk(alice)


def masked_image(params, items) -> Counter:
    """Multiset of masked tables over every possible pad of a toy geometry."""
    seen = Counter()
    for vals in itertools.product(range(params.p), repeat=3 * params.t):
        a = np.array(vals, dtype=np.uint64).reshape(3, params.t)
        out = mask_build(Pad(Ibf(params, a[0], a[1], a[2])), items)
        seen[out.to_bytes()] += 1
    return seen


GOLDEN_SEED = bytes(range(16))
GOLDEN_KEY = "paillier-512.key"


def plain_messages() -> dict:
    """Deterministic messages of every type that needs no key, keyed by golden file stem."""
    cfg = ProtocolConfig.create(
        5, 0.01, Scenario.MASKED, range=Range(10, 2000), reference_id=reference_id("ACGT"), hash_seed=GOLDEN_SEED
    )
    pad = make_pad(cfg.params, np.random.default_rng(7))
    masked = mask_build(pad, [1 << 59, (1 << 59) | (4 << 21) | 3])
    resp = masked.copy()
    resp.delete_many([1 << 59, 77])
    return {"config": cfg, "masked_query": MaskedQuery(masked), "entry_response": EntryResponse(3, resp)}


def golden_plain_ibf():
    """The plaintext table frozen inside the encrypted golden messages."""
    params = make_params(2, 0.25, hash_seed=GOLDEN_SEED)
    return Ibf.from_items(params, [5, 6, 2**40])
