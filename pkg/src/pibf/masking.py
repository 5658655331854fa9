"""One-time-pad masking of an IBF.

Bob draws a table of uniform residues, inserts his items into a copy of
it and ships the copy.  Since ``pad -> pad + IBF(S)`` is a bijection on
tables, a uniform pad makes the shipped table uniform regardless of S.
"""

from __future__ import annotations

import os

import numpy as np

from .errors import PadReuseError, ParamsMismatchError
from .ibf import Ibf, IbfParams, subtract


def _secure_residues(p: int, n: int) -> np.ndarray:
    bits = p.bit_length()
    mask = np.uint64((1 << bits) - 1)
    out = np.empty(0, dtype=np.uint64)
    while out.size < n:
        # rejection sampling; acceptance is > 1/2 since p > 2**(bits - 1)
        need = 2 * (n - out.size) + 16
        raw = np.frombuffer(os.urandom(8 * need), dtype="<u8").astype(np.uint64) & mask
        out = np.concatenate([out, raw[raw < np.uint64(p)]])
    return out[:n]


class Pad:
    """A random IBF-shaped table kept by the querier.

    A pad may mask exactly one message.  Unmasking any number of
    responses derived from that message is fine; call :meth:`destroy` (or
    use the pad as a context manager) once the session ends.
    """

    def __init__(self, table: Ibf):
        self.table = table
        self._issued = False
        self._destroyed = False

    @property
    def params(self) -> IbfParams:
        return self.table.params

    @property
    def destroyed(self) -> bool:
        return self._destroyed

    def destroy(self) -> None:
        for arr in (self.table.count, self.table.id_sum, self.table.g_sum):
            arr.fill(0)
        self._destroyed = True

    def __enter__(self) -> Pad:
        return self

    def __exit__(self, *exc) -> None:
        self.destroy()

    def _live(self) -> Ibf:
        if self._destroyed:
            raise PadReuseError("pad has been destroyed")
        return self.table


def make_pad(params: IbfParams, insecure_rng: np.random.Generator | None = None) -> Pad:
    """Draw ``3t`` independent uniform residues in ``[0, p)``.

    Randomness comes from ``os.urandom``.  ``insecure_rng`` exists so
    tests can reproduce pads and must never be used for real queries.
    """
    n = 3 * params.t
    if insecure_rng is None:
        vals = _secure_residues(params.p, n)
    else:
        vals = insecure_rng.integers(0, params.p, size=n, dtype=np.uint64)
    vals = vals.reshape(3, params.t)
    return Pad(Ibf(params, vals[0], vals[1], vals[2]))


def mask_build(pad: Pad, items) -> Ibf:
    """Copy of the pad with every item inserted."""
    table = pad._live()
    if pad._issued:
        raise PadReuseError("pad already masked a message; draw a fresh pad")
    out = table.copy()
    out.insert_many(items)
    pad._issued = True
    return out


def unmask(response: Ibf, pad: Pad) -> Ibf:
    """Strip the pad from a response, leaving a plain IBF ready for peeling."""
    table = pad._live()
    if response.params != table.params:
        raise ParamsMismatchError("response and pad have different parameters")
    return subtract(response, table)
