import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np

from pid.channels import Channel, channel_sort_key, coarsenings
from pid.errors import InvalidDistributionError, MeasureMismatchError, UnknownNameError
from pid.optimize import (OptimizerConfig, degradation_feasible_oracle, ln_sampled_oracle, maximize_mi,
                          mc_sampled_oracle)
from pid.preorders import check_ds_bounded
from pid.probcore import (EPS_I, Alphabet, Dist, JointSystem, JointTable, entropy, joint_to_system,
                          mutual_information, product_alphabet, specific_information)

logger = logging.getLogger(__name__)

# Tolerance of the per-outcome specific-information comparison at approximate optima.
DOMINATION_TOL = 1e-3
# Largest source alphabet whose output merges all join the degradation starts.
MAX_COARSENED_OUTPUTS = 6
# Allowed gap between the mc measure and C(Y1 ^ Y2) on copy-target systems.
COPY_TARGET_TOL = 1e-4


class MeasureKind(Enum):
    GH = 'gh'
    D = 'd'
    LN = 'ln'
    MC = 'mc'
    DS = 'ds'
    MMI = 'mmi'

    @property
    def symbol(self) -> str:
        return '◁' if self is MeasureKind.GH else self.value


CHAIN_ORDER = (MeasureKind.GH, MeasureKind.D, MeasureKind.LN, MeasureKind.MC, MeasureKind.DS, MeasureKind.MMI)

FLAGS = {
    MeasureKind.GH: 'exact',
    MeasureKind.D: 'optimized',
    MeasureKind.LN: 'upper_bound',
    MeasureKind.MC: 'upper_bound',
    MeasureKind.DS: 'lower_bound',
    MeasureKind.MMI: 'exact',
}


class MeasureResult(NamedTuple):
    value: float
    argmax: Optional[Channel]
    flag: str
    details: Optional[Dict] = None


@dataclass(frozen=True)
class Decomposition:
    """R + U_1 + U_2 + S = I(T; Y) for two sources; only R for other source counts."""
    measure: MeasureKind
    redundancy: float
    unique: Optional[Tuple[float, ...]]
    synergy: Optional[float]
    total: float
    informations: Tuple[float, ...]
    argmax_channel: Optional[Channel] = None
    flags: Tuple[str, ...] = ()
    details: Dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class CommonVariable:
    """Gács-Körner common variable: source cells mapped to connected components."""
    labeling: Dict[Tuple[int, ...], int]
    dist: Dist

    @property
    def entropy(self) -> float:
        return entropy(self.dist)


def _coerce_kind(kind: Union[MeasureKind, str]) -> MeasureKind:
    if isinstance(kind, MeasureKind):
        return kind
    if kind == '◁':
        return MeasureKind.GH
    try:
        return MeasureKind(kind)
    except ValueError:
        raise UnknownNameError(f"Unknown measure {kind!r}; expected one of {[k.value for k in MeasureKind]}")


def gk_common_variable(joint: JointTable, source_axes: Optional[Sequence[int]] = None) -> CommonVariable:
    """
    Connected components of the support graph: one vertex per (axis, symbol),
    and every positive cell links the symbols it contains. Components are
    numbered in the order of their first cell.
    """
    axes = list(range(len(joint.axes))) if source_axes is None else list(source_axes)
    table = joint.marginal(axes)
    cells = [tuple(int(v) for v in cell) for cell in np.argwhere(table > 0)]
    if not cells:
        raise InvalidDistributionError("Empty support")

    graph = nx.Graph()
    for cell in cells:
        nodes = [(axis, value) for axis, value in enumerate(cell)]
        graph.add_nodes_from(nodes)
        graph.add_edges_from(zip(nodes[:-1], nodes[1:]))
    component_of = {}
    for component in nx.connected_components(graph):
        for node in component:
            component_of[node] = frozenset(component)

    ids: Dict[frozenset, int] = {}
    labeling = {}
    for cell in cells:
        component = component_of[(0, cell[0])]
        labeling[cell] = ids.setdefault(component, len(ids))
    probs = np.zeros(len(ids))
    for cell, label in labeling.items():
        probs[label] += table[cell]
    return CommonVariable(labeling, Dist(Alphabet.of_size(len(ids), 'c'), probs / probs.sum()))


def common_variable_channel(system: JointSystem) -> Channel:
    """p(c | t) for the Gács-Körner common variable C of the sources."""
    system = system.restricted_to_support()
    if system.joint is None:
        raise InvalidDistributionError("Gács-Körner common variable needs the joint table")
    common = gk_common_variable(system.joint, range(1, system.n_sources + 1))
    p_t = system.target_marginal.probs
    rows = np.zeros((p_t.size, common.dist.alphabet.size))
    for cell in np.argwhere(system.joint.probs > 0):
        t, rest = int(cell[0]), tuple(int(v) for v in cell[1:])
        rows[t, common.labeling[rest]] += system.joint.probs[tuple(cell)]
    return Channel(system.target_alphabet, common.dist.alphabet, rows / p_t[:, None])


def _source_informations(system: JointSystem) -> Tuple[float, ...]:
    return tuple(mutual_information(system.target_marginal, k) for k in system.channels)


def _feasible_coarsenings(channels: Sequence[Channel], oracle) -> List[Channel]:
    """
    Output merges of the source with the fewest outputs that are garblings of
    every source. The Gács-Körner common variable of any coupling of the
    sources is one of them, which keeps d >= ◁ without reading the coupling.
    """
    smallest = min(channels, key=lambda k: (k.rows.shape[1], channel_sort_key(k)))
    if smallest.rows.shape[1] > MAX_COARSENED_OUTPUTS:
        logger.debug(f"Skipping output merges of a source with {smallest.rows.shape[1]} outputs")
        return []
    return [c for c in coarsenings(smallest) if c.rows.shape[1] > 1 and oracle.predicate(c.rows)]


def _optimized(system: JointSystem, kind: MeasureKind, config: OptimizerConfig, seeds, certified) -> MeasureResult:
    channels = system.channels
    p_t = system.target_marginal
    if kind is MeasureKind.D:
        oracle = degradation_feasible_oracle(channels, config.tolerance)
        certified = list(certified) + _feasible_coarsenings(channels, oracle)
    elif kind is MeasureKind.LN:
        oracle = ln_sampled_oracle(channels, config.grid_resolution, p_t, config.max_pair_points,
                                   config.max_grid_points, config.tolerance)
    else:
        oracle = mc_sampled_oracle(channels, config.grid_resolution, p_t, config.max_grid_points, config.tolerance)
    result = maximize_mi(p_t, oracle, config, seeds=list(seeds) + list(channels), certified=certified)
    return MeasureResult(result.value, result.argmax, FLAGS[kind], dict(oracle.details))


NESTED_ORDER = (MeasureKind.D, MeasureKind.LN, MeasureKind.MC)


def _nested_optima(system: JointSystem, upto: MeasureKind, config: OptimizerConfig, seeds,
                   certified) -> Dict[MeasureKind, MeasureResult]:
    """
    Optima of d, ln and mc up to `upto`, each started from the argmax of every
    finer measure. A channel below all sources under d is below them under ln
    and mc as well, so those starts are feasible and the values stay ordered.
    Only p(t) and the channels are read, never the coupling of the sources.
    """
    results = {}
    starts = list(certified)
    for kind in NESTED_ORDER:
        logger.info(f"Computing I∩^{kind.value}")
        results[kind] = _optimized(system, kind, config, seeds, starts)
        starts = [results[kind].argmax] + starts
        if kind is upto:
            break
    return results


def _ds_from_degradation(system: JointSystem, degradation: MeasureResult) -> MeasureResult:
    value, argmax = degradation.value, degradation.argmax
    certified_sources = []
    informations = _source_informations(system)
    for j, k in enumerate(system.channels):
        others = [other for i, other in enumerate(system.channels) if i != j]
        if all(check_ds_bounded(k, other).holds for other in others):
            certified_sources.append(j)
            if informations[j] > value:
                value, argmax = informations[j], k
    return MeasureResult(value, argmax, FLAGS[MeasureKind.DS], {'ds_below_all': certified_sources})


def ii_measure(system: JointSystem, kind: Union[MeasureKind, str], config: Optional[OptimizerConfig] = None,
               seeds: Sequence = (), certified: Sequence = ()) -> MeasureResult:
    """
    I∩ of the sources about T for one measure, computed on the system with
    zero-probability targets removed. The source channels always join the
    starting points of the optimized measures, and d, ln and mc also start
    from the optima of the finer measures, so a value computed on its own
    equals the one measure_chain reports.
    """
    kind = _coerce_kind(kind)
    config = config or OptimizerConfig()
    system = system.restricted_to_support()
    logger.debug(f"Computing I∩^{kind.value} for {system.n_sources} sources")
    if kind is MeasureKind.MMI:
        informations = _source_informations(system)
        j = int(np.argmin(informations))
        return MeasureResult(informations[j], system.channels[j], FLAGS[kind], {'source': j})
    if kind is MeasureKind.GH:
        channel = common_variable_channel(system)
        return MeasureResult(mutual_information(system.target_marginal, channel), channel, FLAGS[kind], {})
    if kind is MeasureKind.DS:
        nested = _nested_optima(system, MeasureKind.D, config, seeds, certified)
        return _ds_from_degradation(system, nested[MeasureKind.D])
    return _nested_optima(system, kind, config, seeds, certified)[kind]


def measure_chain(system: JointSystem, config: Optional[OptimizerConfig] = None) -> Dict[MeasureKind, MeasureResult]:
    """
    All six measures. d starts from every output merge that is a garbling of
    all sources and ln, mc from the optima of the finer measures, so
    ◁ <= d <= ln <= mc <= mmi holds on the numbers as well.
    """
    config = config or OptimizerConfig()
    system = system.restricted_to_support()
    results = _nested_optima(system, MeasureKind.MC, config, (), ())
    results[MeasureKind.GH] = ii_measure(system, MeasureKind.GH, config)
    results[MeasureKind.DS] = _ds_from_degradation(system, results[MeasureKind.D])
    results[MeasureKind.MMI] = ii_measure(system, MeasureKind.MMI, config)
    return {kind: results[kind] for kind in CHAIN_ORDER}


def _decomposition(system: JointSystem, kind: MeasureKind, result: MeasureResult) -> Decomposition:
    system = system.restricted_to_support()
    informations = _source_informations(system)
    total = mutual_information(system.target_marginal, system.joint_channel()) if system.joint is not None \
        else float('nan')
    R = result.value
    if system.n_sources != 2:
        return Decomposition(kind, R, None, None, total, informations, result.argmax, (result.flag,),
                             dict(result.details))
    unique = tuple(info - R for info in informations)
    synergy = total - R - sum(unique)
    if min(unique) < -EPS_I:
        logger.warning(f"Negative unique information {min(unique):.3g} for I∩^{kind.value}")
    return Decomposition(kind, R, unique, synergy, total, informations, result.argmax, (result.flag,),
                         dict(result.details))


def pid_decompose(system: JointSystem, kind: Union[MeasureKind, str],
                  config: Optional[OptimizerConfig] = None) -> Decomposition:
    """Partial information decomposition R, U_1, U_2, S of a two-source system."""
    kind = _coerce_kind(kind)
    if system.n_sources != 2:
        raise ValueError(f"pid_decompose needs exactly two sources, got {system.n_sources}")
    return _decomposition(system, kind, ii_measure(system, kind, config))


def decompose(system: JointSystem, kind: Union[MeasureKind, str],
              config: Optional[OptimizerConfig] = None) -> Decomposition:
    """Like pid_decompose, but for any number of sources (R only unless n = 2)."""
    kind = _coerce_kind(kind)
    return _decomposition(system, kind, ii_measure(system, kind, config))


def decompose_all(system: JointSystem, config: Optional[OptimizerConfig] = None) -> Dict[MeasureKind, Decomposition]:
    chain = measure_chain(system, config)
    return {kind: _decomposition(system, kind, result) for kind, result in chain.items()}


@dataclass(frozen=True)
class DominationFailure:
    target: str
    source: int
    source_information: float
    q_information: float


def specific_information_domination(system: JointSystem, Q: Channel,
                                    tol: float = DOMINATION_TOL) -> List[DominationFailure]:
    """Outcomes t and sources i with I(Y_i; T=t) < I(Q; T=t) - tol."""
    system = system.restricted_to_support()
    p_t = system.target_marginal
    failures = []
    for t, label in enumerate(p_t.alphabet.labels):
        q_info = specific_information(p_t, Q, t)
        for i, k in enumerate(system.channels):
            source_info = specific_information(p_t, k, t)
            if source_info < q_info - tol:
                failures.append(DominationFailure(label, i, source_info, q_info))
                logger.warning(f"Specific information of Y{i + 1} at T={label} is {source_info:.4f} "
                               f"< {q_info:.4f} for the optimizer channel")
    return failures


@dataclass
class AxiomViolation:
    axiom: str
    trial: int
    detail: str
    system: List


@dataclass
class AxiomReport:
    kind: MeasureKind
    trials: int
    violations: List[AxiomViolation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def random_system(rng: np.random.Generator, n_sources: int = 2, target_sizes: Sequence[int] = (2, 3),
                  source_sizes: Sequence[int] = (2, 3)) -> JointSystem:
    """Joint table drawn from a flat Dirichlet over randomly sized alphabets."""
    shape = (int(rng.choice(target_sizes)),) + tuple(int(rng.choice(source_sizes)) for _ in range(n_sources))
    probs = rng.dirichlet(np.ones(int(np.prod(shape)))).reshape(shape)
    return joint_to_system(JointTable(tuple(Alphabet.of_size(s) for s in shape), probs))


def random_copy_source_joint(rng: np.random.Generator, sizes: Sequence[int] = (2, 3),
                             keep: float = 0.5) -> JointTable:
    """Sources-only table p(y1, y2) with a random support pattern."""
    shape = (int(rng.choice(sizes)), int(rng.choice(sizes)))
    mask = rng.random(shape) < keep
    mask[tuple(rng.integers(s) for s in shape)] = True
    weights = rng.dirichlet(np.ones(int(np.prod(shape)))).reshape(shape) * mask
    return JointTable(tuple(Alphabet.of_size(s) for s in shape), weights / weights.sum(), ('Y1', 'Y2'))


def _system_record(system: JointSystem) -> List:
    return np.round(system.joint.probs, 12).tolist() if system.joint is not None else []


def check_wb_axioms(kind: Union[MeasureKind, str],
                    generator: Optional[Callable[[np.random.Generator], JointSystem]] = None,
                    trials: int = 100, tol: float = EPS_I,
                    config: Optional[OptimizerConfig] = None) -> AxiomReport:
    """
    Williams-Beer axioms on random two-source systems: symmetry, self-redundancy,
    monotonicity, and equality when a source is duplicated.
    """
    kind = _coerce_kind(kind)
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    config = config or OptimizerConfig()
    generator = generator or random_system
    rng = np.random.default_rng(config.seed)
    report = AxiomReport(kind, trials)

    for trial in range(trials):
        system = generator(rng)

        def violation(axiom, detail):
            report.violations.append(AxiomViolation(axiom, trial, detail, _system_record(system)))
            logger.warning(f"Trial {trial}: {axiom} violated for I∩^{kind.value} ({detail})")

        both = ii_measure(system, kind, config).value
        swapped = ii_measure(system.with_sources([1, 0]), kind, config).value
        singles = [ii_measure(system.with_sources([i]), kind, config).value for i in range(2)]
        duplicated = ii_measure(system.with_sources([0, 0]), kind, config).value
        informations = _source_informations(system.restricted_to_support())

        if abs(both - swapped) > tol:
            violation('symmetry', f"{both:.9g} != {swapped:.9g}")
        for i in range(2):
            if abs(singles[i] - informations[i]) > tol:
                violation('self_redundancy', f"I∩(Y{i + 1}) = {singles[i]:.9g}, I(T;Y{i + 1}) = {informations[i]:.9g}")
            if both > singles[i] + tol:
                violation('monotonicity', f"I∩(Y1,Y2) = {both:.9g} > I∩(Y{i + 1}) = {singles[i]:.9g}")
        if abs(duplicated - singles[0]) > tol:
            violation('equality', f"I∩(Y1,Y1) = {duplicated:.9g}, I∩(Y1) = {singles[0]:.9g}")

    logger.info(f"Axiom suite for I∩^{kind.value}: {len(report.violations)} violations in {trials} trials")
    return report


def copy_target_system(source_joint: JointTable) -> JointSystem:
    """T = (Y1, ..., Yn) restricted to the cells with positive probability."""
    cells = np.argwhere(source_joint.probs > 0)
    labels = product_alphabet(source_joint.axes).labels
    flat = np.ravel_multi_index(tuple(cells.T), source_joint.probs.shape)
    target = Alphabet(tuple(labels[i] for i in flat))
    probs = np.zeros((len(cells),) + source_joint.probs.shape)
    for t, cell in enumerate(cells):
        probs[(t,) + tuple(cell)] = source_joint.probs[tuple(cell)]
    names = ('T',) + tuple(f"Y{i + 1}" for i in range(len(source_joint.axes)))
    return joint_to_system(JointTable((target,) + tuple(source_joint.axes), probs, names))


def copy_target_measures(source_joint: JointTable, config: Optional[OptimizerConfig] = None,
                         tol: float = COPY_TARGET_TOL) -> float:
    """
    C(Y1 ^ Y2) for the copy target T = (Y1, Y2), checked against the mc
    measure, which equals it on such systems.
    """
    common = gk_common_variable(source_joint)
    value = common.entropy
    system = copy_target_system(source_joint)
    mc = ii_measure(system, MeasureKind.MC, config, certified=[common_variable_channel(system)])
    if abs(mc.value - value) > tol:
        raise MeasureMismatchError(f"mc measure {mc.value:.6f} differs from C(Y1 ^ Y2) = {value:.6f}")
    return value


def identity_property_report(source_joint: JointTable, config: Optional[OptimizerConfig] = None) -> Dict[str, Any]:
    """I(Y1;Y2) next to C(Y1 ^ Y2) and the mc measure of the copy system."""
    system = copy_target_system(source_joint)
    p = source_joint.probs
    marginals = [Dist.from_probs(p.sum(axis=1)), Dist.from_probs(p.sum(axis=0))]
    mutual = sum(entropy(d) for d in marginals) - entropy(Dist.from_probs(p.ravel()))
    common = gk_common_variable(source_joint).entropy
    mc = ii_measure(system, MeasureKind.MC, config, certified=[common_variable_channel(system)]).value
    return {'mutual_information': mutual, 'common_information': common, 'mc': mc,
            'identity_property': abs(mc - mutual) <= EPS_I}


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO)
    table = JointTable((Alphabet.of_size(2), Alphabet.of_size(3)),
                       np.array([[1, 1, 0], [0, 0, 1]]) / 3, ('Y1', 'Y2'))
    print(f"  C(Y1 ^ Y2) = {gk_common_variable(table).entropy:.4f}")
