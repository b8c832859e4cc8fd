import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import linprog

from pid.channels import Channel, join_meet, merge_columns
from pid.errors import AlphabetMismatchError, InvalidChannelError, OptimizerError
from pid.probcore import (EPS_I, Dist, JointSystem, budgeted_resolution, chi_square_array,
                          chi_square_matrix, mutual_information_array, mutual_information_batch,
                          simplex_grid_array)

logger = logging.getLogger(__name__)

DEFAULT_DEGRADATION_TOL = 1e-7
DEFAULT_GRID_RESOLUTION = 10
DEFAULT_MAX_OPS = 8
DEFAULT_DS_DEPTH = 3
DEFAULT_MAX_STATES = 2000
DEFAULT_MAX_GRID_POINTS = 3000
DEFAULT_MAX_PAIR_POINTS = 250

# Relative and absolute slack when comparing chi^2 values of two channels.
CHI_SLACK = 1e-9

RELATIONS = ('d', 'ln', 'mc', 's', 'ds')


class VerdictStatus(Enum):
    HOLDS = 'Holds'
    FALSIFIED = 'Falsified'
    UNKNOWN = 'Unknown'


@dataclass(frozen=True)
class PreorderVerdict:
    relation: str
    status: VerdictStatus
    witness: Any = None
    counterexample: Any = None
    budget_info: Dict[str, Any] = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return self.status is VerdictStatus.HOLDS

    @property
    def falsified(self) -> bool:
        return self.status is VerdictStatus.FALSIFIED

    @property
    def unknown(self) -> bool:
        return self.status is VerdictStatus.UNKNOWN


@dataclass(frozen=True, eq=False)
class LessNoisyCounterexample:
    p: Dist
    q: Dist
    chi_w: float
    chi_v: float


@dataclass(frozen=True, eq=False)
class MoreCapableCounterexample:
    p: Dist
    info_w: float
    info_v: float


@dataclass(frozen=True, eq=False)
class ChainStep:
    """One link of a ds chain; `channel` is the channel after the step."""
    relation: str
    channel: Channel
    detail: Any = None

    def describe(self) -> str:
        if self.relation == 's':
            i, j = self.detail
            return f"⋄({i + 1},{j + 1})"
        if self.relation == 'merge':
            i, j = self.detail
            return f"merge({i + 1},{j + 1})"
        return "garble"


@dataclass
class FeasibilityProblem:
    """Linear program: minimise c @ x subject to A_ub x <= b_ub, A_eq x = b_eq, x >= 0."""
    c: np.ndarray
    A_ub: Optional[np.ndarray] = None
    b_ub: Optional[np.ndarray] = None
    A_eq: Optional[np.ndarray] = None
    b_eq: Optional[np.ndarray] = None
    method: str = 'highs'

    def __post_init__(self):
        n = self.c.shape[0]
        for name, A, b in (('ub', self.A_ub, self.b_ub), ('eq', self.A_eq, self.b_eq)):
            if A is None:
                continue
            if A.shape[1] != n or A.shape[0] != b.shape[0]:
                raise OptimizerError(f"Inconsistent {name} constraints: A {A.shape}, b {b.shape}, {n} variables")

    def solve(self):
        result = linprog(self.c, A_ub=self.A_ub, b_ub=self.b_ub, A_eq=self.A_eq, b_eq=self.b_eq,
                         bounds=(0, None), method=self.method)
        if result.status != 0:
            raise OptimizerError(f"Linear program failed: {result.message}")
        return result


def _check_same_input(W: Channel, V: Channel):
    if W.input_alphabet != V.input_alphabet:
        raise AlphabetMismatchError("Channels must share the input alphabet")


def degradation_problem(W: Channel, V: Channel, rows: Optional[Sequence[int]] = None) -> FeasibilityProblem:
    """min t over row-stochastic U with |W - V U| <= t elementwise (on the selected rows)."""
    rows = list(range(W.rows.shape[0])) if rows is None else list(rows)
    a, b = V.rows.shape[1], W.rows.shape[1]
    n_u = a * b
    expr = np.kron(V.rows[rows], np.eye(b))
    ones = np.ones((expr.shape[0], 1))
    target = W.rows[rows].ravel()
    A_ub = np.vstack([np.hstack([-expr, -ones]), np.hstack([expr, -ones])])
    b_ub = np.concatenate([-target, target])
    A_eq = np.hstack([np.kron(np.eye(a), np.ones((1, b))), np.zeros((a, 1))])
    c = np.zeros(n_u + 1)
    c[-1] = 1.0
    return FeasibilityProblem(c, A_ub, b_ub, A_eq, np.ones(a))


def check_degradation(W: Channel, V: Channel, tol: float = DEFAULT_DEGRADATION_TOL,
                      rows: Optional[Sequence[int]] = None) -> PreorderVerdict:
    """
    Decides W ⪯_d V: is there a row-stochastic K^U with W = V K^U?
    Solved exactly as a linear program minimising the max-norm residual.
    """
    _check_same_input(W, V)
    selected = list(range(W.rows.shape[0])) if rows is None else list(rows)
    result = degradation_problem(W, V, selected).solve()
    a, b = V.rows.shape[1], W.rows.shape[1]
    U = np.clip(result.x[:a * b].reshape(a, b), 0.0, None)
    U = U / U.sum(axis=1, keepdims=True)
    residual = float(np.max(np.abs(W.rows[selected] - V.rows[selected] @ U)))
    budget = {'method': 'lp', 'residual': residual, 'tol': tol}
    if residual <= tol:
        witness = Channel(V.output_alphabet, W.output_alphabet, U)
        return PreorderVerdict('d', VerdictStatus.HOLDS, witness=witness, budget_info=budget)
    return PreorderVerdict('d', VerdictStatus.FALSIFIED, counterexample=residual, budget_info=budget)


def _as_dist(p: Union[Dist, Sequence[float]], K: Channel) -> Dist:
    return p if isinstance(p, Dist) else Dist(K.input_alphabet, np.asarray(p, dtype=float))


def less_noisy_margin(W: Channel, V: Channel, p, q) -> Tuple[float, float]:
    """Both sides of chi^2(pW || qW) >= chi^2(pV || qV)."""
    _check_same_input(W, V)
    p, q = _as_dist(p, W), _as_dist(q, W)
    chi_w = chi_square_array(p.probs @ W.rows, q.probs @ W.rows)
    chi_v = chi_square_array(p.probs @ V.rows, q.probs @ V.rows)
    return chi_w, chi_v


def less_noisy_violated(chi_w, chi_v):
    """
    True where the V side beats the W side. Pairs with an infinite W side never
    count (this covers both sides infinite); an infinite V side against a finite
    W side does.
    """
    chi_w = np.asarray(chi_w, dtype=float)
    with np.errstate(invalid='ignore'):
        return np.isfinite(chi_w) & (np.asarray(chi_v) > chi_w + CHI_SLACK * (1.0 + np.abs(chi_w)))


def check_less_noisy_sampled(W: Channel, V: Channel, grid_resolution: int = DEFAULT_GRID_RESOLUTION,
                             pairs: Optional[Sequence[Tuple[Any, Any]]] = None,
                             max_points: int = DEFAULT_MAX_PAIR_POINTS) -> PreorderVerdict:
    """
    Tests V ⪯_ln W (W less noisy than V) through the chi^2 criterion on every
    ordered pair of grid distributions, or on the explicit `pairs`. The grid
    resolution is lowered until the grid has at most max_points points.
    A finite sample can only falsify: Holds is never returned.
    """
    _check_same_input(W, V)
    if pairs is not None:
        for p, q in pairs:
            chi_w, chi_v = less_noisy_margin(W, V, p, q)
            if less_noisy_violated(chi_w, chi_v):
                ce = LessNoisyCounterexample(_as_dist(p, W), _as_dist(q, W), chi_w, chi_v)
                return PreorderVerdict('ln', VerdictStatus.FALSIFIED, counterexample=ce,
                                       budget_info={'pairs_checked': len(pairs)})
        return PreorderVerdict('ln', VerdictStatus.UNKNOWN, budget_info={'pairs_checked': len(pairs)})

    used = budgeted_resolution(W.rows.shape[0], grid_resolution, max_points, 'ln')
    points = simplex_grid_array(W.rows.shape[0], used)
    chi_w = chi_square_matrix(points @ W.rows, points @ W.rows)
    chi_v = chi_square_matrix(points @ V.rows, points @ V.rows)
    violations = np.argwhere(less_noisy_violated(chi_w, chi_v))
    budget = {'grid_resolution': used, 'requested_resolution': grid_resolution,
              'pairs_checked': int(points.shape[0] ** 2)}
    if violations.size:
        a, b = violations[0]
        ce = LessNoisyCounterexample(Dist(W.input_alphabet, points[a]), Dist(W.input_alphabet, points[b]),
                                     float(chi_w[a, b]), float(chi_v[a, b]))
        logger.debug(f"Less-noisy violation at p={points[a]}, q={points[b]}")
        return PreorderVerdict('ln', VerdictStatus.FALSIFIED, counterexample=ce, budget_info=budget)
    return PreorderVerdict('ln', VerdictStatus.UNKNOWN, budget_info=budget)


def more_capable_margin(W: Channel, V: Channel, p) -> Tuple[float, float]:
    """Both sides of I_p(W) <= I_p(V)."""
    _check_same_input(W, V)
    p = _as_dist(p, W)
    return mutual_information_array(p.probs, W.rows), mutual_information_array(p.probs, V.rows)


def check_more_capable_sampled(W: Channel, V: Channel, grid_resolution: int = DEFAULT_GRID_RESOLUTION,
                               points: Optional[Sequence[Any]] = None,
                               max_points: int = DEFAULT_MAX_GRID_POINTS) -> PreorderVerdict:
    """Tests W ⪯_mc V: I_p(W) <= I_p(V) on every grid distribution. Never returns Holds."""
    _check_same_input(W, V)
    if points is None:
        used = budgeted_resolution(W.rows.shape[0], grid_resolution, max_points, 'mc')
        P = simplex_grid_array(W.rows.shape[0], used)
        budget = {'grid_resolution': used, 'requested_resolution': grid_resolution}
    else:
        P = np.array([_as_dist(p, W).probs for p in points])
        budget = {}
    info_w = mutual_information_batch(P, W.rows)
    info_v = mutual_information_batch(P, V.rows)
    budget['points_checked'] = int(P.shape[0])
    violations = np.flatnonzero(info_w > info_v + EPS_I)
    if violations.size:
        s = violations[0]
        ce = MoreCapableCounterexample(Dist(W.input_alphabet, P[s]), float(info_w[s]), float(info_v[s]))
        return PreorderVerdict('mc', VerdictStatus.FALSIFIED, counterexample=ce, budget_info=budget)
    return PreorderVerdict('mc', VerdictStatus.UNKNOWN, budget_info=budget)


def _column_pairs(n: int):
    return [(i, j) for i in range(n) for j in range(n) if i != j]


def check_supermodular_reachable(W: Channel, V: Channel, max_ops: int = DEFAULT_MAX_OPS) -> PreorderVerdict:
    """
    Tests W ⪯_s V by breadth-first search over JoinMeet sequences applied to V.
    The witness lists (i, j) pairs in application order (0-based columns).
    """
    _check_same_input(W, V)
    if W.rows.shape != V.rows.shape:
        raise InvalidChannelError(f"Supermodular search needs equal shapes, got {W.rows.shape} and {V.rows.shape}")
    if V.allclose(W):
        return PreorderVerdict('s', VerdictStatus.HOLDS, witness=[], budget_info={'max_ops': max_ops})

    seen = {V.key()}
    frontier = [(V, [])]
    exhausted = False
    for _ in range(max_ops):
        next_frontier = []
        for U, sequence in frontier:
            for i, j in _column_pairs(U.rows.shape[1]):
                reached = join_meet(U, i, j)
                key = reached.key()
                if key in seen:
                    continue
                seen.add(key)
                path = sequence + [(i, j)]
                if reached.allclose(W):
                    return PreorderVerdict('s', VerdictStatus.HOLDS, witness=path,
                                           budget_info={'max_ops': max_ops, 'states_visited': len(seen)})
                next_frontier.append((reached, path))
        if not next_frontier:
            exhausted = True
            break
        frontier = next_frontier
    return PreorderVerdict('s', VerdictStatus.UNKNOWN,
                           budget_info={'max_ops': max_ops, 'states_visited': len(seen), 'exhausted': exhausted})


def check_ds_bounded(W: Channel, V: Channel, depth: int = DEFAULT_DS_DEPTH,
                     tol: float = DEFAULT_DEGRADATION_TOL, max_states: int = DEFAULT_MAX_STATES) -> PreorderVerdict:
    """
    Sound but incomplete search for W ⪯_ds V. Every layer tries an exact
    degradation from each frontier channel to W, then expands the frontier by
    one JoinMeet or one column merge. Never returns Falsified.
    """
    _check_same_input(W, V)
    seen = {V.key()}
    frontier: List[Tuple[Channel, List[ChainStep]]] = [(V, [])]
    truncated = False
    for layer in range(depth + 1):
        for U, chain in frontier:
            if U.allclose(W):
                return PreorderVerdict('ds', VerdictStatus.HOLDS, witness=chain,
                                       budget_info={'depth': depth, 'layer': layer, 'states': len(seen)})
            verdict = check_degradation(W, U, tol)
            if verdict.holds:
                chain = chain + [ChainStep('d', W, verdict.witness)]
                return PreorderVerdict('ds', VerdictStatus.HOLDS, witness=chain,
                                       budget_info={'depth': depth, 'layer': layer, 'states': len(seen)})
        if layer == depth:
            break
        next_frontier = []
        for U, chain in frontier:
            n_out = U.rows.shape[1]
            moves = [('s', pair, join_meet(U, *pair)) for pair in _column_pairs(n_out)]
            if n_out > 1:
                moves += [('merge', (i, j), merge_columns(U, i, j)) for i in range(n_out) for j in range(i + 1, n_out)]
            for relation, pair, reached in moves:
                key = reached.key()
                if key in seen:
                    continue
                if len(seen) >= max_states:
                    truncated = True
                    break
                seen.add(key)
                next_frontier.append((reached, chain + [ChainStep(relation, reached, pair)]))
        if not next_frontier:
            break
        frontier = next_frontier
    logger.debug(f"ds search gave up after {len(seen)} states (depth {depth})")
    return PreorderVerdict('ds', VerdictStatus.UNKNOWN,
                           budget_info={'depth': depth, 'states': len(seen), 'truncated': truncated})


def check_relation(W: Channel, V: Channel, relation: str, grid_resolution: int = DEFAULT_GRID_RESOLUTION,
                   max_ops: int = DEFAULT_MAX_OPS, depth: int = DEFAULT_DS_DEPTH,
                   tol: float = DEFAULT_DEGRADATION_TOL) -> PreorderVerdict:
    """Tests W ⪯ V for any supported relation."""
    if relation == 'd':
        return check_degradation(W, V, tol)
    if relation == 'ln':
        return check_less_noisy_sampled(V, W, grid_resolution)
    if relation == 'mc':
        return check_more_capable_sampled(W, V, grid_resolution)
    if relation == 's':
        return check_supermodular_reachable(W, V, max_ops)
    if relation == 'ds':
        return check_ds_bounded(W, V, depth, tol)
    raise ValueError(f"Unknown relation {relation!r}; expected one of {RELATIONS}")


def describe_verdict(verdict: PreorderVerdict) -> str:
    """One-line human summary with the witness or counterexample."""
    text = verdict.status.value
    if verdict.holds:
        if verdict.relation == 's':
            chain = " ".join(f"⋄({i + 1},{j + 1})" for i, j in verdict.witness) or "identity"
            text += f", chain {chain}"
        elif verdict.relation == 'ds':
            text += ", chain " + (" ".join(step.describe() for step in verdict.witness) or "identity")
        elif verdict.relation == 'd':
            text += f", K^U = {np.round(verdict.witness.rows, 6).tolist()}"
    elif verdict.falsified:
        ce = verdict.counterexample
        if isinstance(ce, LessNoisyCounterexample):
            text += (f", p={np.round(ce.p.probs, 6).tolist()} q={np.round(ce.q.probs, 6).tolist()}"
                     f" chi2_W={ce.chi_w:.6g} chi2_V={ce.chi_v:.6g}")
        elif isinstance(ce, MoreCapableCounterexample):
            text += f", p={np.round(ce.p.probs, 6).tolist()} I_W={ce.info_w:.6g} I_V={ce.info_v:.6g}"
        else:
            text += f", min residual {ce:.6g}"
    else:
        text += f" ({', '.join(f'{k}={v}' for k, v in sorted(verdict.budget_info.items()))})"
    return text


def check_kolchinsky_axioms(system: JointSystem, relation: str, **budgets) -> Dict[str, List[PreorderVerdict]]:
    """
    Checks the three axioms a preorder needs to induce an I∩ measure on a
    concrete system: reflexivity, the constant channel below every source, and
    every source below the joint channel of all sources.
    """
    if relation not in ('d', 'ln', 'mc', 'ds'):
        raise ValueError(f"Kolchinsky axioms are checked for d, ln, mc or ds, not {relation!r}")
    system = system.restricted_to_support()
    constant = Channel.constant(system.target_alphabet)
    joint = system.joint_channel()
    report = {'reflexivity': [], 'constant_below': [], 'below_joint': []}
    for k in system.channels:
        report['reflexivity'].append(check_relation(k, k, relation, **budgets))
        report['constant_below'].append(check_relation(constant, k, relation, **budgets))
        report['below_joint'].append(check_relation(k, joint, relation, **budgets))
    failed = [name for name, verdicts in report.items() if any(v.falsified for v in verdicts)]
    if failed:
        logger.warning(f"Relation {relation} fails Kolchinsky axioms {failed} on this system")
    return report


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO)
    k3 = Channel.from_rows([[1, 0], [0, 1], [0.5, 0.5]])
    k4 = Channel.from_rows([[1, 0], [1, 0], [0.5, 0.5]])
    print(f"  K4 ⪯_d K3:  {describe_verdict(check_degradation(k4, k3))}")
    print(f"  K4 ⪯_s K3:  {describe_verdict(check_supermodular_reachable(k4, k3))}")
    print(f"  K4 ⪯_ds K3: {describe_verdict(check_ds_bounded(k4, k3))}")
