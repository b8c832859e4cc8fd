import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from pid.channels import Channel, channel_sort_key
from pid.errors import OptimizerError
from pid.preorders import DEFAULT_MAX_GRID_POINTS, DEFAULT_MAX_PAIR_POINTS, FeasibilityProblem, check_degradation
from pid.probcore import (LN2, Alphabet, Dist, budgeted_resolution, chi_square_matrix,
                          mutual_information_array, mutual_information_batch, simplex_grid_array)

logger = logging.getLogger(__name__)

# Floor inside the gradient logarithm.
GRADIENT_FLOOR = 1e-12
# Smallest step tried by the projected ascent before giving up on a direction.
MIN_STEP = 1e-6
# Improvements below this are treated as ties.
IMPROVEMENT_EPS = 1e-12
REPAIR_ITERATIONS = 40

Matrix = np.ndarray


@dataclass(frozen=True)
class OptimizerConfig:
    """Knobs of the multi-start maximizer and of the sampled oracles."""
    support_size: Optional[int] = None  # None: sum |Y_i| - n + 1 of the constraint bank
    num_starts: int = 8
    max_iters: int = 200
    step_size: float = 0.5
    seed: int = 0
    tolerance: float = 1e-7
    grid_resolution: int = 10
    max_grid_points: int = DEFAULT_MAX_GRID_POINTS
    max_pair_points: int = DEFAULT_MAX_PAIR_POINTS

    def __post_init__(self):
        if self.support_size is not None and self.support_size < 1:
            raise ValueError(f"support_size must be >= 1, got {self.support_size}")
        if self.num_starts < 1:
            raise ValueError(f"num_starts must be >= 1, got {self.num_starts}")
        if self.step_size <= 0:
            raise ValueError(f"step_size must be positive, got {self.step_size}")
        if self.grid_resolution < 1:
            raise ValueError(f"grid_resolution must be >= 1, got {self.grid_resolution}")


@dataclass
class FeasibilityOracle:
    """
    Constraint set for K^Q given as a predicate on row-stochastic matrices.

    `repair` maps an infeasible matrix to a nearby feasible one (or None),
    `linear_step` maximizes a linear objective <G, K> over the set and returns
    a vertex (only for polyhedral sets).
    """
    name: str
    predicate: Callable[[Matrix], bool]
    repair: Optional[Callable[[Matrix], Optional[Matrix]]] = None
    linear_step: Optional[Callable[[Matrix], Optional[Matrix]]] = None
    details: Dict[str, Any] = field(default_factory=dict)

    def is_feasible(self, K: Union[Channel, Matrix]) -> bool:
        rows = K.rows if isinstance(K, Channel) else np.asarray(K, dtype=float)
        return bool(self.predicate(rows))

    def repaired(self, K: Matrix) -> Optional[Matrix]:
        if self.repair is None:
            return None
        fixed = self.repair(K)
        if fixed is None or not self.predicate(fixed):
            return None
        return fixed


class MaximizationResult(NamedTuple):
    value: float
    argmax: Channel


def mi_value(p: np.ndarray, K: Matrix) -> float:
    return mutual_information_array(p, K)


def mi_gradient(p: np.ndarray, K: Matrix) -> Matrix:
    """dI/dK[t, q] = p(t) log2(K[t, q] / r[q]) with r = p K (in bits)."""
    r = np.maximum(p @ K, GRADIENT_FLOOR)
    return p[:, None] * np.log(np.maximum(K, GRADIENT_FLOOR) / r[None, :]) / LN2


def project_rows_to_simplex(V: Matrix) -> Matrix:
    """Euclidean projection of every row onto the probability simplex."""
    n_features = V.shape[1]
    U = np.sort(V, axis=1)[:, ::-1]
    cssv = np.cumsum(U, axis=1) - 1.0
    ind = np.arange(n_features) + 1
    cond = U - cssv / ind > 0
    rho = np.count_nonzero(cond, axis=1)
    theta = cssv[np.arange(len(V)), rho - 1] / rho
    return np.maximum(V - theta[:, np.newaxis], 0)


def _normalized(K: Matrix) -> Matrix:
    K = np.clip(K, 0.0, None)
    return K / K.sum(axis=1, keepdims=True)


def _padded(K: Union[Channel, Matrix], width: int) -> Matrix:
    rows = K.rows if isinstance(K, Channel) else np.asarray(K, dtype=float)
    if rows.shape[1] > width:
        raise OptimizerError(f"Seed with {rows.shape[1]} outputs exceeds support size {width}")
    out = np.zeros((rows.shape[0], width))
    out[:, :rows.shape[1]] = rows
    return out


def radial_repair(p: np.ndarray, K: Matrix, predicate: Callable[[Matrix], bool],
                  iterations: int = REPAIR_ITERATIONS) -> Matrix:
    """
    Bisects along the segment from the constant channel with rows p K towards
    K and returns the feasible end. The constant channel has zero mutual
    information and zero chi^2 between any two inputs, so it lies in every
    sampled constraint set.
    """
    center = np.tile(p @ K, (K.shape[0], 1))
    if predicate(K):
        return K
    lo, hi = 0.0, 1.0
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if predicate((1.0 - mid) * center + mid * K):
            lo = mid
        else:
            hi = mid
    return _normalized((1.0 - lo) * center + lo * K)


def default_support_size(channels: Sequence[Channel]) -> int:
    """sum_i |Y_i| - n + 1, enough for the degradation optimum."""
    return int(sum(k.rows.shape[1] for k in channels) - len(channels) + 1)


def unconstrained_oracle() -> FeasibilityOracle:
    def linear_step(G):
        best = np.zeros_like(G)
        best[np.arange(G.shape[0]), np.argmax(G, axis=1)] = 1.0
        return best

    return FeasibilityOracle('unconstrained', lambda K: True, linear_step=linear_step)


def equal_rows_oracle(tol: float = 1e-9) -> FeasibilityOracle:
    """All rows equal, i.e. Q independent of T."""
    def predicate(K):
        return bool(np.all(np.abs(K - K[0]) <= tol))

    def linear_step(G):
        best = np.zeros_like(G)
        best[:, np.argmax(G.sum(axis=0))] = 1.0
        return best

    def repair(K):
        return np.tile(K.mean(axis=0), (K.shape[0], 1))

    return FeasibilityOracle('equal_rows', predicate, repair=repair, linear_step=linear_step)


class _DegradationPolytope:
    """
    {K_1 U_1 : K_1 U_1 = K_i U_i for every i, U_i row-stochastic} for a fixed
    number of outputs. Variables are the flattened U_i, stacked.
    """

    def __init__(self, channels: Sequence[Channel], width: int):
        self.width = width
        self.sizes = [k.rows.shape[1] * width for k in channels]
        self.offsets = np.concatenate([[0], np.cumsum(self.sizes)])
        n_vars = int(self.offsets[-1])
        eye = np.eye(width)
        self.first = np.kron(channels[0].rows, eye)
        equalities, rhs = [], []
        for i, k in enumerate(channels):
            block = np.zeros((k.rows.shape[1], n_vars))
            block[:, self.offsets[i]:self.offsets[i + 1]] = np.kron(np.eye(k.rows.shape[1]), np.ones((1, width)))
            equalities.append(block)
            rhs.append(np.ones(k.rows.shape[1]))
            if i == 0:
                continue
            link = np.zeros((self.first.shape[0], n_vars))
            link[:, :self.sizes[0]] = self.first
            link[:, self.offsets[i]:self.offsets[i + 1]] = -np.kron(k.rows, eye)
            equalities.append(link)
            rhs.append(np.zeros(self.first.shape[0]))
        self.A_eq = np.vstack(equalities)
        self.b_eq = np.concatenate(rhs)
        self.n_vars = n_vars

    def _expression(self) -> np.ndarray:
        expr = np.zeros((self.first.shape[0], self.n_vars))
        expr[:, :self.sizes[0]] = self.first
        return expr

    def matrix(self, x: np.ndarray) -> Matrix:
        K = (self.first @ x[:self.sizes[0]]).reshape(-1, self.width)
        return _normalized(K)

    def maximize(self, G: Matrix) -> Matrix:
        c = -(G.ravel() @ self._expression())
        result = FeasibilityProblem(c, A_eq=self.A_eq, b_eq=self.b_eq).solve()
        return self.matrix(result.x)

    def nearest(self, K: Matrix) -> Matrix:
        """L1-nearest point of the polytope, written as K_1 U_1."""
        expr = self._expression()
        n_slack = expr.shape[0]
        eye = np.eye(n_slack)
        A_ub = np.vstack([np.hstack([expr, -eye]), np.hstack([-expr, -eye])])
        b_ub = np.concatenate([K.ravel(), -K.ravel()])
        A_eq = np.hstack([self.A_eq, np.zeros((self.A_eq.shape[0], n_slack))])
        c = np.concatenate([np.zeros(self.n_vars), np.ones(n_slack)])
        result = FeasibilityProblem(c, A_ub, b_ub, A_eq, self.b_eq).solve()
        return self.matrix(result.x[:self.n_vars])


def degradation_feasible_oracle(channels: Sequence[Channel], tol: float = 1e-7) -> FeasibilityOracle:
    """K^Q feasible iff it is a garbling of every channel in the bank (exact LP)."""
    bank = sorted(channels, key=channel_sort_key)
    polytopes: Dict[int, _DegradationPolytope] = {}

    def polytope(width: int) -> _DegradationPolytope:
        if width not in polytopes:
            polytopes[width] = _DegradationPolytope(bank, width)
        return polytopes[width]

    def predicate(K):
        candidate = Channel(bank[0].input_alphabet, Alphabet.of_size(K.shape[1], 'q'), _normalized(K))
        return all(check_degradation(candidate, k, tol).holds for k in bank)

    return FeasibilityOracle('degradation', predicate,
                             repair=lambda K: polytope(K.shape[1]).nearest(K),
                             linear_step=lambda G: polytope(G.shape[1]).maximize(G),
                             details={'channels': len(bank), 'support_size': default_support_size(bank)})


def _sample_points(dim: int, resolution: int, max_points: int, target_marginal: Optional[Dist],
                   label: str) -> Tuple[np.ndarray, int]:
    used = budgeted_resolution(dim, resolution, max_points, label)
    points = simplex_grid_array(dim, used)
    if target_marginal is not None:
        points = np.vstack([points, target_marginal.probs[None, :]])
    return points, used


def _mc_constraints(bank: Sequence[Channel], points: np.ndarray, tol: float) -> Callable[[Matrix], bool]:
    bound = np.min([mutual_information_batch(points, k.rows) for k in bank], axis=0)
    limit = bound + tol * (1.0 + np.abs(bound))

    def predicate(K):
        return bool(np.all(mutual_information_batch(points, K) <= limit))

    return predicate


def mc_sampled_oracle(channels: Sequence[Channel], grid_resolution: int = 10,
                      target_marginal: Optional[Dist] = None, max_grid_points: int = DEFAULT_MAX_GRID_POINTS,
                      tol: float = 1e-7) -> FeasibilityOracle:
    """I_p(K^Q) <= I_p(K_i) on the grid, its vertices and the true target marginal."""
    bank = sorted(channels, key=channel_sort_key)
    points, used = _sample_points(bank[0].rows.shape[0], grid_resolution, max_grid_points, target_marginal, 'mc')
    predicate = _mc_constraints(bank, points, tol)
    p = target_marginal.probs if target_marginal is not None else np.full(points.shape[1], 1.0 / points.shape[1])
    logger.debug(f"mc oracle with {points.shape[0]} sampled inputs")
    return FeasibilityOracle('more_capable', predicate,
                             repair=lambda K: radial_repair(p, K, predicate),
                             details={'grid_resolution': used, 'points': int(points.shape[0]),
                                      'support_size': default_support_size(bank)})


def ln_sampled_oracle(channels: Sequence[Channel], grid_resolution: int = 10,
                      target_marginal: Optional[Dist] = None, max_pair_points: int = DEFAULT_MAX_PAIR_POINTS,
                      max_grid_points: int = DEFAULT_MAX_GRID_POINTS, tol: float = 1e-7) -> FeasibilityOracle:
    """
    chi^2(p K^Q || q K^Q) <= chi^2(p K_i || q K_i) on every ordered pair of
    sampled inputs, together with the mc constraints on the full mc sample set.
    """
    bank = sorted(channels, key=channel_sort_key)
    dim = bank[0].rows.shape[0]
    pair_points, used = _sample_points(dim, grid_resolution, max_pair_points, target_marginal, 'ln')
    mc_points, mc_used = _sample_points(dim, grid_resolution, max_grid_points, target_marginal, 'mc')
    mc_predicate = _mc_constraints(bank, mc_points, tol)
    bound = np.min([chi_square_matrix(pair_points @ k.rows, pair_points @ k.rows) for k in bank], axis=0)
    finite = np.isfinite(bound)
    limit = np.where(finite, bound + tol * (1.0 + np.abs(np.where(finite, bound, 0.0))), np.inf)

    def predicate(K):
        if not mc_predicate(K):
            return False
        out = pair_points @ K
        return bool(np.all(chi_square_matrix(out, out)[finite] <= limit[finite]))

    p = target_marginal.probs if target_marginal is not None else np.full(dim, 1.0 / dim)
    logger.debug(f"ln oracle with {pair_points.shape[0] ** 2} sampled pairs")
    return FeasibilityOracle('less_noisy', predicate,
                             repair=lambda K: radial_repair(p, K, predicate),
                             details={'grid_resolution': used, 'mc_grid_resolution': mc_used,
                                      'pairs': int(pair_points.shape[0] ** 2),
                                      'support_size': default_support_size(bank)})


def _prepare_start(p: np.ndarray, K: Matrix, oracle: FeasibilityOracle) -> Optional[Matrix]:
    if oracle.predicate(K):
        return K
    if oracle.linear_step is not None:
        return oracle.linear_step(mi_gradient(p, K))
    return oracle.repaired(K)


def _vertex_polish(p: np.ndarray, K: Matrix, value: float, oracle: FeasibilityOracle):
    """First feasible improvement obtained by sending one input row to a single output."""
    for t in range(K.shape[0]):
        for q in range(K.shape[1]):
            if K[t, q] == 1.0:
                continue
            candidate = np.array(K)
            candidate[t] = 0.0
            candidate[t, q] = 1.0
            v = mi_value(p, candidate)
            if v > value + IMPROVEMENT_EPS and oracle.predicate(candidate):
                return candidate, v
    return None


def _ascend(p: np.ndarray, K: Matrix, oracle: FeasibilityOracle, config: OptimizerConfig):
    value = mi_value(p, K)
    for _ in range(config.max_iters):
        gradient = mi_gradient(p, K)
        improved = False
        if oracle.linear_step is not None:
            candidate = oracle.linear_step(gradient)
            v = mi_value(p, candidate)
            if v > value + IMPROVEMENT_EPS:
                K, value, improved = candidate, v, True
        else:
            norm = np.linalg.norm(gradient)
            h = config.step_size
            while norm > 0 and h >= MIN_STEP:
                candidate = project_rows_to_simplex(K + h * gradient / norm)
                v = mi_value(p, candidate)
                if v > value + IMPROVEMENT_EPS and oracle.predicate(candidate):
                    K, value, improved = candidate, v, True
                    break
                h /= 2
        if not improved:
            polished = _vertex_polish(p, K, value, oracle)
            if polished is None:
                break
            K, value = polished
    return K, value


def maximize_mi(p_t: Dist, oracle: FeasibilityOracle, config: Optional[OptimizerConfig] = None,
                seeds: Sequence[Union[Channel, Matrix]] = (),
                certified: Sequence[Union[Channel, Matrix]] = ()) -> MaximizationResult:
    """
    Multi-start ascent of I(Q;T) over the oracle's constraint set.

    Starts are the `certified` channels (known to be feasible, taken as they
    are), the caller `seeds`, the constant channel and `num_starts` random
    deterministic channels drawn from default_rng([seed, start_index]).
    Returns the best value; near-ties go to the lexicographically smallest matrix.
    """
    config = config or OptimizerConfig()
    p = np.asarray(p_t.probs, dtype=float)
    n_in = p.size
    width = config.support_size or oracle.details.get('support_size') or n_in
    for K in list(seeds) + list(certified):
        width = max(width, (K.rows if isinstance(K, Channel) else np.asarray(K)).shape[1])

    starts: List[tuple] = [('certified', _padded(K, width), True) for K in certified]
    starts += [('seed', _padded(K, width), False) for K in seeds]
    constant = np.zeros((n_in, width))
    constant[:, 0] = 1.0
    starts.append(('constant', constant, False))
    for index in range(config.num_starts):
        rng = np.random.default_rng([config.seed, index])
        vertex = np.zeros((n_in, width))
        vertex[np.arange(n_in), rng.integers(width, size=n_in)] = 1.0
        starts.append(('random', vertex, False))

    results = []
    for label, K0, trusted in starts:
        try:
            K = K0 if trusted else _prepare_start(p, K0, oracle)
            if K is None:
                logger.debug(f"Skipping infeasible {label} start for oracle {oracle.name}")
                continue
            K, value = _ascend(p, K, oracle, config)
            results.append((value, K))
        except OptimizerError as e:
            logger.warning(f"{label} start failed for oracle {oracle.name}: {e}")
            continue
    if not results:
        raise OptimizerError(f"Oracle {oracle.name} rejected every start")

    best = max(value for value, _ in results)
    ties = [K for value, K in results if value >= best - IMPROVEMENT_EPS]
    argmax = _normalized(min(ties, key=lambda K: tuple(np.round(K, 12).ravel().tolist())))
    channel = Channel(p_t.alphabet, Alphabet.of_size(width, 'q'), argmax)
    value = mi_value(p, channel.rows)
    logger.debug(f"Oracle {oracle.name}: {len(results)} starts, best I = {value:.6f}")
    return MaximizationResult(value, channel)


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO)
    p = Dist.from_probs([0.5, 0.25, 0.25])
    result = maximize_mi(p, unconstrained_oracle(), OptimizerConfig(support_size=3))
    print(f"  unconstrained max I = {result.value:.4f} (H(p) = 1.5)")
    and_channel = Channel.from_rows([[1, 0], [1, 0], [1, 0], [0, 1]])
    result = maximize_mi(Dist.from_probs([0.25] * 4), degradation_feasible_oracle([and_channel]))
    print(f"  single-channel degradation optimum = {result.value:.4f}")
