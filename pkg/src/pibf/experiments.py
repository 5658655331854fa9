"""Monte-Carlo checks of the decode and privacy bounds.

Each trial draws its own RNG from ``SeedSequence(master, spawn_key=(cell, trial))``
so results do not depend on execution order or worker count.
"""

from __future__ import annotations

import csv
import io
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .ibf import DEFAULT_PRIME, Ibf, IbfParams, list_items, make_params, privacy_threshold, subtract

CSV_COLUMNS = ("n", "m", "t", "k", "lambda", "epsilon", "trials", "successes", "decodable_cells_trials", "seconds")


@dataclass
class ExperimentReport:
    """One grid point.

    For decode-rate runs ``n`` is the number of shared items and ``m`` the
    size of the symmetric difference; for privacy-rate runs ``n = m`` is
    the number of items loaded into an otherwise empty table.
    ``successes`` counts trials that decoded exactly and completely,
    ``decodable_cells_trials`` those whose initial table had a pure cell.
    """

    n: int
    m: int
    t: int
    k: int
    lambda_bits: int
    epsilon: float
    trials: int
    successes: int
    decodable_cells_trials: int
    seconds: float
    false_emissions: int = 0

    @property
    def failure_rate(self) -> float:
        return 1 - self.successes / self.trials if self.trials else 0.0

    @property
    def decodable_rate(self) -> float:
        return self.decodable_cells_trials / self.trials if self.trials else 0.0

    def row(self) -> list:
        return [
            self.n, self.m, self.t, self.k, self.lambda_bits, self.epsilon,
            self.trials, self.successes, self.decodable_cells_trials, f"{self.seconds:.3f}",
        ]


@dataclass(frozen=True)
class DecodeRateConfig:
    m: int
    epsilon: float = 0.01
    shared: int = 100
    tau: int | None = None

    def params(self, hash_seed: bytes) -> IbfParams:
        return make_params(self.tau or max(self.m, 1), self.epsilon, hash_seed=hash_seed)


@dataclass(frozen=True)
class PrivacyRateConfig:
    t: int
    k: int
    epsilon: float = 0.01
    n: int | None = None
    lambda_bits: int | None = None

    @property
    def items(self) -> int:
        return privacy_threshold(self.t, self.k, self.epsilon) if self.n is None else self.n

    def params(self, hash_seed: bytes) -> IbfParams:
        lam = self.lambda_bits or self.k + int(np.ceil(np.log2(self.k)))
        return IbfParams(self.t, self.k, lam, DEFAULT_PRIME, hash_seed)


def trial_rng(master_seed: int, cell: int, trial: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(master_seed, spawn_key=(cell, trial))))


def distinct_ids(rng: np.random.Generator, n: int, p: int = DEFAULT_PRIME) -> np.ndarray:
    """``n`` distinct item ids drawn uniformly from ``(0, p)``."""
    ids = np.unique(rng.integers(1, p, size=n, dtype=np.uint64))
    while ids.size < n:
        ids = np.unique(np.concatenate([ids, rng.integers(1, p, size=n - ids.size, dtype=np.uint64)]))
    return rng.permutation(ids)


def decode_trial(cfg: DecodeRateConfig, rng: np.random.Generator) -> tuple[bool, bool, int]:
    """One exact-recovery attempt: ``(success, had_pure_cell, false_emissions)``."""
    params = cfg.params(rng.bytes(16))
    ids = distinct_ids(rng, cfg.shared + cfg.m, params.p)
    n_pos = cfg.m - cfg.m // 2
    shared = ids[: cfg.shared]
    only_x = ids[cfg.shared : cfg.shared + n_pos]
    only_y = ids[cfg.shared + n_pos :]
    a = Ibf.from_items(params, np.concatenate([shared, only_x]))
    b = Ibf.from_items(params, np.concatenate([shared, only_y]))
    diff = subtract(a, b)
    res = list_items(diff)
    want_pos, want_neg = set(only_x.tolist()), set(only_y.tolist())
    got_pos, got_neg = set(res.positives), set(res.negatives)
    false = len(got_pos - want_pos) + len(got_neg - want_neg)
    ok = res.complete and got_pos == want_pos and got_neg == want_neg
    return ok, bool(diff.pure_cells()), false


def privacy_trial(cfg: PrivacyRateConfig, rng: np.random.Generator) -> tuple[bool, bool, int]:
    params = cfg.params(rng.bytes(16))
    ibf = Ibf.from_items(params, distinct_ids(rng, cfg.items, params.p))
    decodable = bool(ibf.pure_cells())
    complete = list_items(ibf).complete if decodable else cfg.items == 0
    return complete, decodable, 0


def _run_chunk(kind: str, cfg, master_seed: int, cell: int, trials: Sequence[int]) -> tuple[int, int, int]:
    fn = decode_trial if kind == "decode" else privacy_trial
    s = d = f = 0
    for i in trials:
        ok, dec, false = fn(cfg, trial_rng(master_seed, cell, i))
        s += ok
        d += dec
        f += false
    return s, d, f


def _run(kind: str, cfg, trials: int, master_seed: int, cell: int, workers: int) -> tuple[int, int, int, float]:
    start = time.perf_counter()
    if workers <= 1:
        s, d, f = _run_chunk(kind, cfg, master_seed, cell, range(trials))
    else:
        chunks = [range(i, trials, workers) for i in range(workers)]
        with ProcessPoolExecutor(workers) as ex:
            parts = list(ex.map(_run_chunk, [kind] * workers, [cfg] * workers, [master_seed] * workers,
                                [cell] * workers, chunks))
        s, d, f = (sum(x) for x in zip(*parts))
    return s, d, f, time.perf_counter() - start


def decode_rate(
    grid: Iterable[DecodeRateConfig], trials: int = 1000, master_seed: int = 0, workers: int = 1
) -> list[ExperimentReport]:
    out = []
    for cell, cfg in enumerate(grid):
        params = cfg.params(bytes(16))
        s, d, f, secs = _run("decode", cfg, trials, master_seed, cell, workers)
        out.append(ExperimentReport(cfg.shared, cfg.m, params.t, params.k, params.lambda_bits, cfg.epsilon,
                                    trials, s, d, secs, f))
    return out


def privacy_rate(
    grid: Iterable[PrivacyRateConfig], trials: int = 1000, master_seed: int = 0, workers: int = 1
) -> list[ExperimentReport]:
    out = []
    for cell, cfg in enumerate(grid):
        params = cfg.params(bytes(16))
        s, d, f, secs = _run("privacy", cfg, trials, master_seed, cell, workers)
        out.append(ExperimentReport(cfg.items, cfg.items, params.t, params.k, params.lambda_bits, cfg.epsilon,
                                    trials, s, d, secs, f))
    return out


def to_csv(reports: Iterable[ExperimentReport], *, timing: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in reports:
        row = r.row()
        if not timing:
            row[-1] = "0"
        w.writerow(row)
    return buf.getvalue()

