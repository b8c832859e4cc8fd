"""
Plain-text distribution and channel files.

Distribution files list a joint table p(t, y1, ..., yn):

    # comment
    @vars       T   Y1  Y2
    @alphabet   T   0   1
    0   0   0   0.25

Channel files hold named channels that share an input alphabet:

    @marginal   0.4 0.6
    @channel    K1
    @outputs    0   1
    t0  0.25    0.75

Fields are tab-separated; '#' starts a comment.
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from pid.channels import Channel
from pid.errors import DistributionFileError, PIDError
from pid.probcore import EPS_P, Alphabet, Dist, JointTable

logger = logging.getLogger(__name__)

# Largest deviation from 1 that is silently renormalized (with a warning).
RENORMALIZE_TOL = 1e-6

PathLike = Union[str, Path]


def _lines(text: str):
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if line:
            yield number, line.split()


def _probability(token: str, number: int) -> float:
    try:
        value = float(token)
    except ValueError:
        raise DistributionFileError(f"line {number}: {token!r} is not a probability")
    if not np.isfinite(value) or value < 0:
        raise DistributionFileError(f"line {number}: probability {token} must be finite and non-negative")
    return value


def _normalized(values: np.ndarray, what: str) -> np.ndarray:
    total = values.sum()
    deviation = abs(total - 1.0)
    if deviation <= EPS_P:
        return values
    if deviation <= RENORMALIZE_TOL:
        logger.warning(f"{what} sums to {total!r}; renormalizing")
        return values / total
    raise DistributionFileError(f"{what} sums to {total!r}, expected 1")


@dataclass
class DistributionFile:
    """Header (variable names and alphabets) plus the listed outcome records."""
    names: Tuple[str, ...]
    alphabets: Dict[str, List[str]] = field(default_factory=dict)
    records: List[Tuple[Tuple[str, ...], float]] = field(default_factory=list)

    def to_joint_table(self) -> JointTable:
        axes = tuple(Alphabet(tuple(self.alphabets[name])) for name in self.names)
        probs = np.zeros(tuple(a.size for a in axes))
        for outcome, p in self.records:
            probs[tuple(axis.index(symbol) for axis, symbol in zip(axes, outcome))] = p
        probs = _normalized(probs, "Distribution")
        return JointTable(axes, probs, self.names)


def parse_distribution(text: str) -> DistributionFile:
    names: Optional[Tuple[str, ...]] = None
    declared: Dict[str, List[str]] = {}
    seen_symbols: Dict[str, List[str]] = {}
    records = []
    outcomes = set()
    for number, fields in _lines(text):
        if fields[0] == '@vars':
            if names is not None:
                raise DistributionFileError(f"line {number}: duplicate @vars header")
            names = tuple(fields[1:])
            if len(names) < 2 or len(set(names)) != len(names):
                raise DistributionFileError(f"line {number}: @vars needs a target and at least one source, all distinct")
            continue
        if fields[0] == '@alphabet':
            if len(fields) < 3:
                raise DistributionFileError(f"line {number}: @alphabet needs a name and symbols")
            declared[fields[1]] = fields[2:]
            continue
        if fields[0].startswith('@'):
            raise DistributionFileError(f"line {number}: unknown directive {fields[0]}")
        if names is None:
            raise DistributionFileError(f"line {number}: record before the @vars header")
        if len(fields) != len(names) + 1:
            raise DistributionFileError(f"line {number}: expected {len(names) + 1} fields, got {len(fields)}")
        outcome = tuple(fields[:-1])
        if outcome in outcomes:
            raise DistributionFileError(f"line {number}: duplicate outcome {outcome}")
        outcomes.add(outcome)
        for name, symbol in zip(names, outcome):
            if name in declared and symbol not in declared[name]:
                raise DistributionFileError(f"line {number}: symbol {symbol!r} not in the alphabet of {name}")
            symbols = seen_symbols.setdefault(name, [])
            if symbol not in symbols:
                symbols.append(symbol)
        records.append((outcome, _probability(fields[-1], number)))

    if names is None:
        raise DistributionFileError("missing @vars header")
    if not records:
        raise DistributionFileError("no probability records")
    unknown = set(declared) - set(names)
    if unknown:
        raise DistributionFileError(f"@alphabet for undeclared variables {sorted(unknown)}")
    alphabets = {name: declared.get(name, seen_symbols.get(name, [])) for name in names}
    return DistributionFile(names, alphabets, records)


def read_distribution(path: PathLike) -> JointTable:
    try:
        text = Path(path).read_text(encoding='utf-8')
    except OSError as e:
        raise DistributionFileError(f"cannot read {path}: {e}")
    try:
        table = parse_distribution(text).to_joint_table()
    except DistributionFileError:
        raise
    except PIDError as e:
        raise DistributionFileError(f"{path}: {e}")
    logger.info(f"Loaded a {'x'.join(str(a.size) for a in table.axes)} joint table from {path}")
    return table


def format_distribution(table: JointTable) -> str:
    """Text form that reads back to the identical table (zero cells are omitted)."""
    lines = ["# joint distribution p(" + ", ".join(table.names) + ")",
             "\t".join(("@vars",) + table.names)]
    for name, axis in zip(table.names, table.axes):
        lines.append("\t".join(("@alphabet", name) + axis.labels))
    for cell in np.argwhere(table.probs > 0):
        symbols = [axis.labels[i] for axis, i in zip(table.axes, cell)]
        lines.append("\t".join(symbols + [repr(float(table.probs[tuple(cell)]))]))
    return "\n".join(lines) + "\n"


def write_distribution(table: JointTable, path: PathLike):
    Path(path).write_text(format_distribution(table), encoding='utf-8')
    logger.info(f"Wrote distribution to {path}")


@dataclass
class ChannelFile:
    channels: Dict[str, Channel]
    marginal: Optional[Dist] = None

    def channel(self, name: str) -> Channel:
        try:
            return self.channels[name]
        except KeyError:
            raise DistributionFileError(f"no channel named {name!r}; file has {list(self.channels)}")


def parse_channels(text: str) -> ChannelFile:
    marginal_values: Optional[List[float]] = None
    blocks: Dict[str, dict] = {}
    current: Optional[dict] = None
    for number, fields in _lines(text):
        directive = fields[0]
        if directive == '@marginal':
            marginal_values = [_probability(token, number) for token in fields[1:]]
        elif directive == '@channel':
            if len(fields) != 2:
                raise DistributionFileError(f"line {number}: @channel takes exactly one name")
            if fields[1] in blocks:
                raise DistributionFileError(f"line {number}: duplicate channel {fields[1]}")
            current = blocks[fields[1]] = {'outputs': None, 'rows': {}}
        elif directive == '@outputs':
            if current is None:
                raise DistributionFileError(f"line {number}: @outputs outside a @channel block")
            current['outputs'] = fields[1:]
        elif directive.startswith('@'):
            raise DistributionFileError(f"line {number}: unknown directive {directive}")
        else:
            if current is None or current['outputs'] is None:
                raise DistributionFileError(f"line {number}: channel row before @channel/@outputs")
            if len(fields) != len(current['outputs']) + 1:
                raise DistributionFileError(
                    f"line {number}: expected {len(current['outputs']) + 1} fields, got {len(fields)}")
            if fields[0] in current['rows']:
                raise DistributionFileError(f"line {number}: duplicate input {fields[0]}")
            current['rows'][fields[0]] = np.array([_probability(token, number) for token in fields[1:]])

    if not blocks:
        raise DistributionFileError("no @channel blocks")
    inputs = None
    channels = {}
    for name, block in blocks.items():
        if inputs is None:
            inputs = list(block['rows'])
        if sorted(block['rows']) != sorted(inputs):
            raise DistributionFileError(f"channel {name} reads inputs {list(block['rows'])}, expected {inputs}")
        rows = np.array([_normalized(block['rows'][x], f"Row {x} of channel {name}") for x in inputs])
        try:
            channels[name] = Channel(Alphabet(tuple(inputs)), Alphabet(tuple(block['outputs'])), rows)
        except PIDError as e:
            raise DistributionFileError(f"channel {name}: {e}")
    marginal = None
    if marginal_values is not None:
        if len(marginal_values) != len(inputs):
            raise DistributionFileError(f"@marginal has {len(marginal_values)} entries for {len(inputs)} inputs")
        marginal = Dist(Alphabet(tuple(inputs)), _normalized(np.array(marginal_values), "@marginal"))
    return ChannelFile(channels, marginal)


def read_channels(path: PathLike) -> ChannelFile:
    try:
        text = Path(path).read_text(encoding='utf-8')
    except OSError as e:
        raise DistributionFileError(f"cannot read {path}: {e}")
    channel_file = parse_channels(text)
    logger.info(f"Loaded channels {list(channel_file.channels)} from {path}")
    return channel_file


def format_channels(channels: Dict[str, Channel], marginal: Optional[Dist] = None) -> str:
    lines = []
    if marginal is not None:
        lines.append("\t".join(["@marginal"] + [repr(float(p)) for p in marginal.probs]))
    for name, k in channels.items():
        lines.append(f"@channel\t{name}")
        lines.append("\t".join(("@outputs",) + k.output_alphabet.labels))
        for label, row in zip(k.input_alphabet.labels, k.rows):
            lines.append("\t".join([label] + [repr(float(p)) for p in row]))
    return "\n".join(lines) + "\n"


def write_channels(channels: Dict[str, Channel], path: PathLike, marginal: Optional[Dist] = None):
    Path(path).write_text(format_channels(channels, marginal), encoding='utf-8')
    logger.info(f"Wrote {len(channels)} channels to {path}")
