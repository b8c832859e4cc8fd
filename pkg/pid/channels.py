import logging
from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np

from pid.errors import AlphabetMismatchError, InvalidChannelError
from pid.probcore import EPS_P, Alphabet, Dist

logger = logging.getLogger(__name__)

# Decimal places used when channels are hashed (JoinMeet search, tie-breaks).
KEY_DECIMALS = 12


@dataclass(frozen=True, eq=False)
class Channel:
    """Row-stochastic matrix K[x, y] = p(y | x)."""
    input_alphabet: Alphabet
    output_alphabet: Alphabet
    rows: np.ndarray

    def __post_init__(self):
        rows = np.array(self.rows, dtype=float)
        expected = (self.input_alphabet.size, self.output_alphabet.size)
        if rows.shape != expected:
            raise InvalidChannelError(f"Channel matrix of shape {rows.shape}, expected {expected}")
        if not np.all(np.isfinite(rows)) or np.any(rows < -EPS_P):
            raise InvalidChannelError("Channel has negative or non-finite entries")
        sums = rows.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > EPS_P):
            raise InvalidChannelError(f"Channel rows must sum to 1, got {sums}")
        if np.any(rows < 0):
            rows = np.clip(rows, 0.0, None)
        rows.setflags(write=False)
        object.__setattr__(self, 'rows', rows)

    @classmethod
    def from_rows(cls, rows, input_labels: Optional[Sequence[str]] = None,
                  output_labels: Optional[Sequence[str]] = None) -> 'Channel':
        rows = np.asarray(rows, dtype=float)
        if rows.ndim != 2:
            raise InvalidChannelError(f"Channel matrix must be two-dimensional, got shape {rows.shape}")
        inputs = Alphabet(tuple(input_labels)) if input_labels is not None else Alphabet.of_size(rows.shape[0])
        outputs = Alphabet(tuple(output_labels)) if output_labels is not None else Alphabet.of_size(rows.shape[1])
        return cls(inputs, outputs, rows)

    @classmethod
    def identity(cls, alphabet: Alphabet) -> 'Channel':
        return cls(alphabet, alphabet, np.eye(alphabet.size))

    @classmethod
    def constant(cls, input_alphabet: Alphabet, output: Optional[Dist] = None) -> 'Channel':
        """Every row equal to `output` (a point mass on a single symbol by default)."""
        if output is None:
            output = Dist(Alphabet(('c',)), [1.0])
        rows = np.tile(output.probs, (input_alphabet.size, 1))
        return cls(input_alphabet, output.alphabet, rows)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.rows.shape

    def pad_outputs(self, size: int, prefix: str = 'q') -> 'Channel':
        """Append zero columns up to `size` outputs; labels become prefix + index."""
        n_in, n_out = self.rows.shape
        if size < n_out:
            raise InvalidChannelError(f"Cannot pad a channel with {n_out} outputs down to {size}")
        rows = np.zeros((n_in, size))
        rows[:, :n_out] = self.rows
        return Channel(self.input_alphabet, Alphabet.of_size(size, prefix), rows)

    def key(self) -> Tuple:
        return (self.rows.shape,) + tuple(np.round(self.rows, KEY_DECIMALS).ravel().tolist())

    def allclose(self, other: 'Channel', tol: float = EPS_P) -> bool:
        return self.rows.shape == other.rows.shape and bool(np.all(np.abs(self.rows - other.rows) <= tol))

    def __repr__(self) -> str:
        return f"Channel({np.round(self.rows, 6).tolist()})"


def compose(Kab: Channel, Kbc: Channel) -> Channel:
    """Channel of the cascade a -> b -> c (matrix product)."""
    if Kab.output_alphabet != Kbc.input_alphabet:
        raise AlphabetMismatchError(
            f"Cannot compose: output alphabet {Kab.output_alphabet.labels} != input {Kbc.input_alphabet.labels}")
    rows = Kab.rows @ Kbc.rows
    return Channel(Kab.input_alphabet, Kbc.output_alphabet, rows / rows.sum(axis=1, keepdims=True))


def output_dist(p: Dist, K: Channel) -> Dist:
    if p.alphabet != K.input_alphabet:
        raise AlphabetMismatchError("Distribution alphabet differs from the channel input alphabet")
    out = p.probs @ K.rows
    return Dist(K.output_alphabet, out / out.sum())


def join_meet(K: Channel, i: int, j: int) -> Channel:
    """
    JoinMeet operator: column i takes the row-wise maximum of columns i and j,
    column j the minimum; other columns are unchanged.
    """
    n_out = K.rows.shape[1]
    if i == j:
        raise InvalidChannelError("join_meet needs two distinct columns")
    if not (0 <= i < n_out and 0 <= j < n_out):
        raise InvalidChannelError(f"Columns ({i}, {j}) outside a channel with {n_out} outputs")
    rows = np.array(K.rows)
    rows[:, i] = np.maximum(K.rows[:, i], K.rows[:, j])
    rows[:, j] = np.minimum(K.rows[:, i], K.rows[:, j])
    return Channel(K.input_alphabet, K.output_alphabet, rows)


def merge_columns(K: Channel, i: int, j: int) -> Channel:
    """Deterministic garbling that relabels output j as output i."""
    n_out = K.rows.shape[1]
    if i == j or not (0 <= i < n_out and 0 <= j < n_out):
        raise InvalidChannelError(f"Cannot merge columns ({i}, {j}) of a channel with {n_out} outputs")
    rows = np.array(K.rows)
    rows[:, i] += rows[:, j]
    rows = np.delete(rows, j, axis=1)
    labels = list(K.output_alphabet.labels)
    labels[i] = f"{labels[i]}+{labels[j]}"
    del labels[j]
    return Channel(K.input_alphabet, Alphabet(tuple(labels)), rows)


def _set_partitions(items: List[int]) -> Iterator[List[List[int]]]:
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for blocks in _set_partitions(rest):
        yield [[first]] + blocks
        for b in range(len(blocks)):
            yield blocks[:b] + [[first] + blocks[b]] + blocks[b + 1:]


def coarsenings(K: Channel) -> Iterator[Channel]:
    """K followed by every deterministic merge of its outputs, one per set partition."""
    labels = K.output_alphabet.labels
    for blocks in _set_partitions(list(range(len(labels)))):
        blocks = sorted(blocks)
        rows = np.stack([K.rows[:, block].sum(axis=1) for block in blocks], axis=1)
        merged = Alphabet(tuple("+".join(labels[c] for c in block) for block in blocks))
        yield Channel(K.input_alphabet, merged, rows)


def channel_sort_key(K: Channel) -> Tuple:
    """Canonical order for channel banks, independent of source order."""
    return K.key()


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO)
    k3 = Channel.from_rows([[1, 0], [0, 1], [0.5, 0.5]])
    print(f"  K3 = {k3}")
    print(f"  join_meet(K3, 0, 1) = {join_meet(k3, 0, 1)}")
