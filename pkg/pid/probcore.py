import itertools
import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import comb, entr, rel_entr

from pid.errors import AlphabetMismatchError, InvalidChannelError, InvalidDistributionError

if TYPE_CHECKING:
    from pid.channels import Channel

logger = logging.getLogger(__name__)

# Validation tolerance for probabilities and the equality tolerance for bits.
EPS_P = 1e-9
EPS_I = 1e-6

LN2 = np.log(2.0)


@dataclass(frozen=True)
class Alphabet:
    """Ordered list of distinct symbol labels."""
    labels: Tuple[str, ...]

    def __post_init__(self):
        labels = tuple(str(label) for label in self.labels)
        if not labels:
            raise InvalidDistributionError("Alphabet needs at least one symbol")
        if len(set(labels)) != len(labels):
            raise InvalidDistributionError(f"Alphabet labels are not distinct: {labels}")
        object.__setattr__(self, 'labels', labels)

    @classmethod
    def of_size(cls, size: int, prefix: str = '') -> 'Alphabet':
        return cls(tuple(f"{prefix}{i}" for i in range(size)))

    @property
    def size(self) -> int:
        return len(self.labels)

    def index(self, symbol: Union[str, int]) -> int:
        if isinstance(symbol, (int, np.integer)):
            if not 0 <= symbol < self.size:
                raise InvalidDistributionError(f"Symbol index {symbol} outside alphabet of size {self.size}")
            return int(symbol)
        try:
            return self.labels.index(str(symbol))
        except ValueError:
            raise InvalidDistributionError(f"Unknown symbol {symbol!r}; alphabet is {self.labels}")

    def __len__(self) -> int:
        return self.size


def product_alphabet(alphabets: Sequence[Alphabet]) -> Alphabet:
    """Alphabet of tuples in C order, labels joined with commas."""
    return Alphabet(tuple(",".join(combo) for combo in itertools.product(*(a.labels for a in alphabets))))


def _frozen_array(values) -> np.ndarray:
    array = np.array(values, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Dist:
    alphabet: Alphabet
    probs: np.ndarray

    def __post_init__(self):
        probs = np.array(self.probs, dtype=float)
        if probs.ndim != 1 or probs.shape[0] != self.alphabet.size:
            raise InvalidDistributionError(
                f"Distribution of length {probs.size} does not match alphabet of size {self.alphabet.size}")
        if not np.all(np.isfinite(probs)) or np.any(probs < -EPS_P):
            raise InvalidDistributionError(f"Distribution has negative or non-finite entries: {probs}")
        if abs(probs.sum() - 1.0) > EPS_P:
            raise InvalidDistributionError(f"Distribution sums to {probs.sum()!r}, expected 1")
        if np.any(probs < 0):
            probs = np.clip(probs, 0.0, None)
        object.__setattr__(self, 'probs', _frozen_array(probs))

    @classmethod
    def from_probs(cls, probs, labels: Optional[Sequence[str]] = None) -> 'Dist':
        probs = np.asarray(probs, dtype=float)
        alphabet = Alphabet(tuple(labels)) if labels is not None else Alphabet.of_size(probs.size)
        return cls(alphabet, probs)

    @classmethod
    def uniform(cls, alphabet: Alphabet) -> 'Dist':
        return cls(alphabet, np.full(alphabet.size, 1.0 / alphabet.size))

    @property
    def support(self) -> np.ndarray:
        return self.probs > 0

    def __len__(self) -> int:
        return self.alphabet.size

    def __repr__(self) -> str:
        return f"Dist({dict(zip(self.alphabet.labels, np.round(self.probs, 6).tolist()))})"


@dataclass(frozen=True, eq=False)
class JointTable:
    """p(t, y1, ..., yn); axis 0 is the target, axes 1..n the sources."""
    axes: Tuple[Alphabet, ...]
    probs: np.ndarray
    names: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        axes = tuple(self.axes)
        probs = np.array(self.probs, dtype=float)
        if probs.shape != tuple(a.size for a in axes):
            raise InvalidDistributionError(
                f"Joint table of shape {probs.shape} does not match alphabets {[a.size for a in axes]}")
        if not np.all(np.isfinite(probs)) or np.any(probs < 0):
            raise InvalidDistributionError("Joint table has negative or non-finite entries")
        total = probs.sum()
        if total <= 0:
            raise InvalidDistributionError("Joint table is all zero")
        if abs(total - 1.0) > EPS_P:
            raise InvalidDistributionError(f"Joint table sums to {total!r}, expected 1")
        names = tuple(self.names) if self.names is not None else default_names(len(axes) - 1)
        if len(names) != len(axes):
            raise InvalidDistributionError(f"Expected {len(axes)} variable names, got {names}")
        object.__setattr__(self, 'axes', axes)
        object.__setattr__(self, 'probs', _frozen_array(probs))
        object.__setattr__(self, 'names', names)

    @property
    def n_sources(self) -> int:
        return len(self.axes) - 1

    def marginal(self, keep: Sequence[int]) -> np.ndarray:
        """Marginal over the listed axes, returned in the listed order."""
        keep = list(keep)
        others = tuple(a for a in range(self.probs.ndim) if a not in keep)
        reduced = self.probs.sum(axis=others) if others else np.array(self.probs)
        ordered = sorted(keep)
        return np.transpose(reduced, [ordered.index(a) for a in keep])


def default_names(n_sources: int) -> Tuple[str, ...]:
    return ('T',) + tuple(f"Y{i + 1}" for i in range(n_sources))


@dataclass(frozen=True, eq=False)
class JointSystem:
    """Target marginal plus one channel p(y_i | t) per source."""
    target_marginal: Dist
    channels: Tuple['Channel', ...]
    source_alphabets: Tuple[Alphabet, ...]
    joint: Optional[JointTable] = None
    unsupported_rows: Tuple[int, ...] = ()

    def __post_init__(self):
        channels = tuple(self.channels)
        alphabets = tuple(self.source_alphabets)
        if len(channels) != len(alphabets):
            raise InvalidChannelError(f"{len(channels)} channels for {len(alphabets)} source alphabets")
        for i, (channel, alphabet) in enumerate(zip(channels, alphabets)):
            if channel.input_alphabet != self.target_marginal.alphabet:
                raise AlphabetMismatchError(f"Channel {i + 1} input alphabet differs from the target alphabet")
            if channel.output_alphabet != alphabet:
                raise AlphabetMismatchError(f"Channel {i + 1} output alphabet differs from source alphabet")
        if self.joint is not None:
            self._check_joint(channels, alphabets)
        object.__setattr__(self, 'channels', channels)
        object.__setattr__(self, 'source_alphabets', alphabets)
        object.__setattr__(self, 'unsupported_rows', tuple(int(r) for r in self.unsupported_rows))

    def _check_joint(self, channels, alphabets):
        if self.joint.axes != (self.target_marginal.alphabet,) + alphabets:
            raise AlphabetMismatchError("Joint table axes differ from the target and source alphabets")
        p_t = self.target_marginal.probs
        if not np.allclose(self.joint.marginal([0]), p_t, rtol=0.0, atol=EPS_P):
            raise InvalidDistributionError("Joint table does not reproduce the target marginal")
        for i, channel in enumerate(channels):
            if not np.allclose(p_t[:, None] * channel.rows, self.joint.marginal([0, i + 1]), rtol=0.0, atol=EPS_P):
                raise InvalidDistributionError(f"p(t) K^({i + 1}) differs from the joint (T, Y{i + 1}) marginal")

    @property
    def n_sources(self) -> int:
        return len(self.channels)

    @property
    def target_alphabet(self) -> Alphabet:
        return self.target_marginal.alphabet

    @property
    def names(self) -> Tuple[str, ...]:
        return self.joint.names if self.joint is not None else default_names(self.n_sources)

    def restricted_to_support(self) -> 'JointSystem':
        """Drop target symbols with zero probability."""
        keep = np.flatnonzero(self.target_marginal.probs > 0)
        if keep.size == self.target_alphabet.size:
            return self
        from pid.channels import Channel

        alphabet = Alphabet(tuple(self.target_alphabet.labels[i] for i in keep))
        probs = self.target_marginal.probs[keep]
        channels = tuple(Channel(alphabet, k.output_alphabet, k.rows[keep]) for k in self.channels)
        joint = None
        if self.joint is not None:
            joint = JointTable((alphabet,) + self.joint.axes[1:], self.joint.probs[keep], self.joint.names)
        return JointSystem(Dist(alphabet, probs / probs.sum()), channels, self.source_alphabets, joint)

    def with_sources(self, order: Sequence[int]) -> 'JointSystem':
        """Select, permute or duplicate sources; the joint table follows."""
        order = [int(i) for i in order]
        channels = tuple(self.channels[i] for i in order)
        alphabets = tuple(self.source_alphabets[i] for i in order)
        joint = None
        if self.joint is not None:
            shape = (self.target_alphabet.size,) + tuple(a.size for a in alphabets)
            probs = np.zeros(shape)
            cells = np.argwhere(self.joint.probs > 0)
            values = self.joint.probs[tuple(cells.T)]
            index = (cells[:, 0],) + tuple(cells[:, 1 + i] for i in order)
            np.add.at(probs, index, values)
            names = (self.joint.names[0],) + tuple(self.joint.names[1 + i] for i in order)
            if len(set(names)) != len(names):
                names = default_names(len(order))
            joint = JointTable((self.target_alphabet,) + alphabets, probs, names)
        return JointSystem(self.target_marginal, channels, alphabets, joint, self.unsupported_rows)

    def joint_channel(self) -> 'Channel':
        """Channel from T to the tuple (Y1, ..., Yn)."""
        from pid.channels import Channel

        if self.joint is None:
            raise InvalidDistributionError("System carries no joint table")
        alphabet = product_alphabet(self.source_alphabets)
        p_t = self.target_marginal.probs
        flat = self.joint.probs.reshape(p_t.size, -1)
        rows = np.full(flat.shape, 1.0 / flat.shape[1])
        supported = p_t > 0
        rows[supported] = flat[supported] / p_t[supported, None]
        return Channel(self.target_alphabet, alphabet, rows)

    def source_marginal_table(self) -> JointTable:
        """Sources-only table p(y1, ..., yn)."""
        if self.joint is None:
            raise InvalidDistributionError("System carries no joint table")
        return JointTable(self.joint.axes[1:], self.joint.probs.sum(axis=0), self.joint.names[1:])


def entropy(d: Dist) -> float:
    """Shannon entropy in bits."""
    return max(0.0, float(entr(d.probs).sum() / LN2))


def mutual_information_array(p: np.ndarray, K: np.ndarray) -> float:
    """I(T;Y) in bits for input vector p and a (not necessarily normalised) matrix K."""
    support = p > 0
    r = p @ K
    divergences = rel_entr(K[support], r[None, :]).sum(axis=1)
    return max(0.0, float(np.dot(p[support], divergences) / LN2))


def mutual_information_batch(P: np.ndarray, K: np.ndarray) -> np.ndarray:
    """I(T;Y) in bits for every row of P (one input distribution per row)."""
    R = P @ K
    with np.errstate(invalid='ignore'):
        divergences = rel_entr(K[None, :, :], R[:, None, :]).sum(axis=2)
    divergences = np.where(P > 0, divergences, 0.0)
    return np.maximum((P * divergences).sum(axis=1) / LN2, 0.0)


def mutual_information(p_t: Dist, K: 'Channel') -> float:
    """Shannon mutual information between the channel input and output, in bits."""
    if K.input_alphabet != p_t.alphabet:
        raise AlphabetMismatchError("Channel input alphabet differs from the distribution alphabet")
    return mutual_information_array(p_t.probs, K.rows)


def specific_information(p_t: Dist, K: 'Channel', t: Union[str, int]) -> float:
    """
    Specific information of outcome t, sum_y p(y|t) log2(p(t|y) / p(t)).
    Equals D(p(y|t) || p(y)).
    """
    if K.input_alphabet != p_t.alphabet:
        raise AlphabetMismatchError("Channel input alphabet differs from the distribution alphabet")
    index = p_t.alphabet.index(t)
    if p_t.probs[index] <= 0:
        raise InvalidDistributionError(f"Outcome {p_t.alphabet.labels[index]!r} has zero probability")
    r = p_t.probs @ K.rows
    return max(0.0, float(rel_entr(K.rows[index], r).sum() / LN2))


def chi_square_array(u: np.ndarray, v: np.ndarray) -> float:
    diff = np.square(u - v)
    with np.errstate(divide='ignore', invalid='ignore'):
        terms = np.where(v > 0, diff / np.where(v > 0, v, 1.0), np.where(diff > 0, np.inf, 0.0))
    return float(terms.sum())


def chi_square_matrix(A: np.ndarray, B: np.ndarray, chunk: int = 256) -> np.ndarray:
    """chi^2(A[a] || B[b]) for every row pair, shape (len(A), len(B))."""
    out = np.empty((A.shape[0], B.shape[0]))
    denom = B[None, :, :]
    positive = denom > 0
    safe = np.where(positive, denom, 1.0)
    for start in range(0, A.shape[0], chunk):
        diff = np.square(A[start:start + chunk, None, :] - denom)
        terms = np.where(positive, diff / safe, np.where(diff > 0, np.inf, 0.0))
        out[start:start + chunk] = terms.sum(axis=2)
    return out


def chi_square(u: Dist, v: Dist) -> float:
    """chi^2(u || v); +inf when u puts mass where v has none."""
    if u.alphabet != v.alphabet:
        raise AlphabetMismatchError("chi_square needs distributions over the same alphabet")
    return chi_square_array(u.probs, v.probs)


def _compositions(total: int, parts: int) -> Iterator[Tuple[int, ...]]:
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def simplex_grid_array(dim: int, resolution: int) -> np.ndarray:
    if dim < 1 or resolution < 1:
        raise InvalidDistributionError(f"simplex_grid needs dim >= 1 and resolution >= 1, got {dim}, {resolution}")
    counts = np.array(list(_compositions(resolution, dim)), dtype=float)
    return counts / resolution


def budgeted_resolution(dim: int, resolution: int, max_points: int, label: str = 'simplex') -> int:
    """Largest resolution <= `resolution` whose grid on dim symbols has at most max_points points."""
    used = resolution
    while used > 1 and comb(used + dim - 1, dim - 1, exact=True) > max_points:
        used -= 1
    if used != resolution:
        logger.warning(f"{label} grid resolution lowered from {resolution} to {used} "
                       f"to stay within {max_points} points")
    return used


def simplex_grid(dim: int, resolution: int) -> List[Dist]:
    """All distributions on dim symbols with entries in {0, 1/m, ..., 1}."""
    alphabet = Alphabet.of_size(dim)
    return [Dist(alphabet, row) for row in simplex_grid_array(dim, resolution)]


def joint_to_system(j: JointTable) -> JointSystem:
    """Split a joint table into p(t) and the channels p(y_i | t)."""
    from pid.channels import Channel

    p_t = j.marginal([0])
    if p_t.sum() <= 0:
        raise InvalidDistributionError("Joint table is all zero")
    supported = p_t > 0
    unsupported = tuple(int(i) for i in np.flatnonzero(~supported))
    if unsupported:
        labels = [j.axes[0].labels[i] for i in unsupported]
        logger.warning(f"Target symbols {labels} have zero probability; their channel rows are filled uniformly")
    channels = []
    for i in range(1, len(j.axes)):
        pair = j.marginal([0, i])
        rows = np.full(pair.shape, 1.0 / pair.shape[1])
        rows[supported] = pair[supported] / p_t[supported, None]
        channels.append(Channel(j.axes[0], j.axes[i], rows))
    return JointSystem(Dist(j.axes[0], p_t), tuple(channels), j.axes[1:], j, unsupported)


def system_from_channels(p_t: Dist, channels: Sequence['Channel'],
                         names: Optional[Sequence[str]] = None) -> JointSystem:
    """Joint system with sources conditionally independent given T."""
    probs = np.array(p_t.probs)
    for k in channels:
        if k.input_alphabet != p_t.alphabet:
            raise AlphabetMismatchError("Every channel must read the target alphabet")
        probs = probs[..., None] * k.rows.reshape((k.rows.shape[0],) + (1,) * (probs.ndim - 1) + (k.rows.shape[1],))
    axes = (p_t.alphabet,) + tuple(k.output_alphabet for k in channels)
    joint = JointTable(axes, probs, tuple(names) if names is not None else None)
    unsupported = tuple(int(i) for i in np.flatnonzero(p_t.probs <= 0))
    return JointSystem(p_t, tuple(channels), axes[1:], joint, unsupported)
