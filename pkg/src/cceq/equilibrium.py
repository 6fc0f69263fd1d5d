"""Equilibrium selection programs over finite games.

Covers the full pipeline: assembling (tightened) incentive-compatibility
rows, solving the correlated-equilibrium selection LP, checking a given
distribution, enumerating chance-constrained pure Nash equilibria (CC-PNE),
the reduced-rank program over their convex hull, and sampling
recommendations.

Chance constraints are never Monte-Carlo estimated here: each probabilistic
incentive constraint is replaced by its exact deterministic equivalent, the
nominal margin tightened by the perturbation's alpha-quantile. With zero
perturbation every operation reduces exactly to its nominal counterpart.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import lp as lpmod
from .game import (
    BudgetExceededError,
    FiniteGame,
    JointDistribution,
    flat_index,
    unflatten,
)
from .lp import LinearProgram, LpStatus, SolverFailureError
from .uncertainty import UncertaintyModel

__all__ = [
    "CcPneSet",
    "DeviationConstraintId",
    "EquilibriumResult",
    "FEASIBILITY_TOL",
    "JOINT_SPACE_CAP",
    "RrSolution",
    "assemble_ce_constraints",
    "build_tightening",
    "ccce_program",
    "check_ccce_feasibility",
    "deviation_ids",
    "enumerate_cc_pne",
    "is_cc_pne",
    "sample_recommendation",
    "solve_full_ccce",
    "solve_nominal_ce",
    "solve_reduced_rank",
    "solve_reduced_rank_lp",
    "zero_tightening",
]

# Constraint replay tolerance, consistent with the LP module contract.
FEASIBILITY_TOL = 1e-7
# Hard cap on enumerable joint action spaces.
JOINT_SPACE_CAP = 2 ** 24


class DeviationConstraintId(NamedTuple):
    """One incentive constraint: agent i recommended `recommended`, tempted by `alternative`."""

    agent: int
    recommended: int
    alternative: int


@dataclass(frozen=True)
class CcPneSet:
    """CC-PNE profiles found at a given confidence level, ascending flat order."""

    profiles: tuple[tuple[int, ...], ...]
    alpha_used: float

    def __len__(self) -> int:
        return len(self.profiles)


@dataclass(frozen=True)
class EquilibriumResult:
    """Outcome of a CE / CC-CE selection solve."""

    status: LpStatus
    distribution: JointDistribution | None = None
    objective: float | None = None


@dataclass(frozen=True)
class RrSolution:
    """Reduced-rank solution: simplex weights over the CC-PNE profiles."""

    status: LpStatus
    weights: np.ndarray | None = None
    induced: JointDistribution | None = None
    objective: float | None = None


def _validate_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"confidence level must lie strictly in (0, 1), got {alpha!r}")
    return alpha


def _validate_model(game: FiniteGame, unc: UncertaintyModel) -> None:
    if unc.num_agents != game.num_agents:
        raise ValueError(
            f"uncertainty model covers {unc.num_agents} agents, game has {game.num_agents}"
        )


def deviation_ids(game: FiniteGame) -> list[DeviationConstraintId]:
    """All constraint ids in canonical order (agent, recommended, alternative)."""
    ids = []
    for i, m in enumerate(game.action_counts):
        for rec in range(m):
            for alt in range(m):
                if alt != rec:
                    ids.append(DeviationConstraintId(i, rec, alt))
    return ids


def build_tightening(game: FiniteGame, unc: UncertaintyModel, alpha: float):
    """Tightening map c -> alpha-quantile of agent i(c)'s perturbation."""
    alpha = _validate_alpha(alpha)
    _validate_model(game, unc)
    quantiles = unc.quantiles(alpha)
    return {cid: float(quantiles[cid.agent]) for cid in deviation_ids(game)}


def zero_tightening(game: FiniteGame):
    """Tightening map for the nominal CE program (all zeros)."""
    return {cid: 0.0 for cid in deviation_ids(game)}


def assemble_ce_constraints(game: FiniteGame, tightening):
    """Incentive rows of the (tightened) CE program.

    Returns ``(rows, ids)`` where ``rows @ z <= 0`` encodes, for each
    constraint c = (i, rec, alt), the unnormalized form

        sum_{x_others} z(rec, x_others) * (dJ(rec, alt, x_others) + t_c) <= 0,

    which is the deterministic equivalent of the conditional constraint
    whenever the recommendation's marginal is positive, and vacuous (0 <= 0)
    when it is zero. Row count is sum_i m_i * (m_i - 1). The caller adds the
    probability-simplex rows.
    """
    ids = deviation_ids(game)
    rows = np.zeros((len(ids), game.num_joint))
    k = 0
    for i, m in enumerate(game.action_counts):
        cost = np.moveaxis(game.cost_grid(i), i, 0)
        tail_shape = cost.shape[1:]
        for rec in range(m):
            for alt in range(m):
                if alt == rec:
                    continue
                cid = DeviationConstraintId(i, rec, alt)
                try:
                    t = float(tightening[cid])
                except KeyError:
                    raise ValueError(f"tightening is missing an entry for {cid}") from None
                grid = np.zeros((m, *tail_shape))
                grid[rec] = cost[rec] - cost[alt] + t
                rows[k] = np.moveaxis(grid, 0, i).reshape(-1)
                k += 1
    return rows, ids


def ccce_program(game: FiniteGame, tightening, sys_cost) -> LinearProgram:
    """The selection LP: minimize expected system cost over the tightened CE polytope."""
    objective = np.ascontiguousarray(sys_cost, dtype=float)
    if objective.shape != (game.num_joint,):
        raise ValueError("sys_cost must assign one finite value per joint action")
    if not np.all(np.isfinite(objective)):
        raise ValueError("sys_cost must be finite everywhere")
    rows, _ = assemble_ce_constraints(game, tightening)
    return LinearProgram(
        objective=objective,
        ineq_matrix=rows,
        ineq_rhs=np.zeros(rows.shape[0]),
        eq_matrix=np.ones((1, game.num_joint)),
        eq_rhs=np.ones(1),
        lower_bounds=np.zeros(game.num_joint),
    )


def _solve_selection(game: FiniteGame, tightening, sys_cost) -> EquilibriumResult:
    solution = lpmod.solve(ccce_program(game, tightening, sys_cost))
    if solution.status == LpStatus.INFEASIBLE:
        return EquilibriumResult(LpStatus.INFEASIBLE)
    if solution.status != LpStatus.OPTIMAL:  # bounded feasible set; defensive
        raise SolverFailureError("selection LP reported unbounded")
    mass = np.maximum(solution.values, 0.0)
    mass /= mass.sum()
    dist = JointDistribution(mass, game.action_counts)
    return EquilibriumResult(LpStatus.OPTIMAL, dist, float(solution.objective_value))


def solve_nominal_ce(game: FiniteGame, sys_cost) -> EquilibriumResult:
    """Minimize expected system cost over the nominal CE polytope."""
    return _solve_selection(game, zero_tightening(game), sys_cost)


def solve_full_ccce(
    game: FiniteGame, unc: UncertaintyModel, alpha: float, sys_cost
) -> EquilibriumResult:
    """Minimize expected system cost over the chance-constrained CE polytope.

    Every incentive row is tightened by the alpha-quantile of the acting
    agent's perturbation. Infeasibility of the tightened polytope is reported
    through the result status; LP solver failures propagate.
    """
    return _solve_selection(game, build_tightening(game, unc, alpha), sys_cost)


def check_ccce_feasibility(
    game: FiniteGame,
    z: JointDistribution,
    unc: UncertaintyModel,
    alpha: float,
    tol: float = FEASIBILITY_TOL,
) -> tuple[bool, float]:
    """Check a distribution against every tightened incentive constraint.

    Returns ``(feasible, worst)`` where ``worst`` is the maximum over
    constraints with positive recommendation marginal of the normalized
    left-hand side (conditional expected deviation plus tightening);
    ``feasible`` means ``worst <= tol``. Zero-marginal constraints are
    vacuous and excluded from the maximum.
    """
    alpha = _validate_alpha(alpha)
    _validate_model(game, unc)
    if z.action_counts != game.action_counts:
        raise ValueError("distribution does not match the game's action space")
    worst = -math.inf
    for i, m in enumerate(game.action_counts):
        if m == 1:
            continue
        zmat = np.moveaxis(z.grid, i, 0).reshape(m, -1)
        jmat = np.moveaxis(game.cost_grid(i), i, 0).reshape(m, -1)
        marginals = zmat.sum(axis=1)
        positive = marginals > 0.0
        if not positive.any():
            continue
        # pairwise[rec, alt] = sum_k z(rec, k) * J(alt, k)
        pairwise = zmat @ jmat.T
        own = np.diag(pairwise)
        safe = np.where(positive, marginals, 1.0)
        margins = (own[:, None] - pairwise) / safe[:, None] + unc.quantile(i, alpha)
        margins[~positive, :] = -math.inf
        np.fill_diagonal(margins, -math.inf)
        worst = max(worst, float(margins.max()))
    return worst <= tol, worst


def is_cc_pne(game: FiniteGame, profile, unc: UncertaintyModel, alpha: float) -> bool:
    """Whether a pure profile is a CC-PNE at the given confidence level.

    Deterministic equivalent check: for every agent and every alternative,
    the nominal deviation margin plus the agent's alpha-quantile must be
    nonpositive. Costs sum_i (m_i - 1) comparisons.
    """
    alpha = _validate_alpha(alpha)
    _validate_model(game, unc)
    coords = tuple(int(c) for c in profile)
    flat_index(coords, game.action_counts)  # validates ranges
    for i, m in enumerate(game.action_counts):
        if m == 1:
            continue
        selector = list(coords)
        selector[i] = slice(None)
        line = game.cost_grid(i)[tuple(selector)]
        own = line[coords[i]]
        others = np.delete(line, coords[i])
        if own + unc.quantile(i, alpha) > others.min():
            return False
    return True


def enumerate_cc_pne(
    game: FiniteGame,
    unc: UncertaintyModel,
    alpha: float,
    limit: int | None = None,
    joint_space_cap: int = JOINT_SPACE_CAP,
) -> CcPneSet:
    """Exhaustively enumerate CC-PNE profiles, in ascending flat-index order.

    An empty set is a valid result. ``limit`` truncates to the first matches
    in enumeration order; a joint space larger than ``joint_space_cap``
    raises :class:`BudgetExceededError`.
    """
    alpha = _validate_alpha(alpha)
    _validate_model(game, unc)
    if game.num_joint > joint_space_cap:
        raise BudgetExceededError(
            f"joint space of size {game.num_joint} exceeds the cap of {joint_space_cap}"
        )
    ok = np.ones(game.action_counts, dtype=bool)
    for i, m in enumerate(game.action_counts):
        if m == 1:
            continue
        cost = np.moveaxis(game.cost_grid(i), i, 0)
        two_smallest = np.partition(cost, 1, axis=0)
        lowest, second = two_smallest[0], two_smallest[1]
        at_min = cost == lowest
        unique_min = at_min.sum(axis=0) == 1
        # cheapest alternative: the runner-up when this action is the unique
        # minimizer, the (tied) minimum otherwise
        best_other = np.where(at_min & unique_min, second, lowest)
        ok &= np.moveaxis(cost + unc.quantile(i, alpha) <= best_other, 0, i)
    flats = np.nonzero(ok.reshape(-1))[0]
    if limit is not None:
        flats = flats[: int(limit)]
    profiles = tuple(unflatten(int(f), game.action_counts) for f in flats)
    return CcPneSet(profiles=profiles, alpha_used=alpha)


def solve_reduced_rank(game: FiniteGame, pne_set: CcPneSet, sys_cost) -> RrSolution:
    """Minimize system cost over convex combinations of the given pure profiles.

    Closed form: all weight on the cheapest profile, ties broken toward the
    lowest index. An empty profile set yields an infeasible result.
    """
    if len(pne_set) == 0:
        return RrSolution(LpStatus.INFEASIBLE)
    sys_cost = np.asarray(sys_cost, dtype=float)
    flats = [flat_index(p, game.action_counts) for p in pne_set.profiles]
    values = sys_cost[flats]
    best = int(np.argmin(values))  # first minimum: lowest-index tie rule
    weights = np.zeros(len(flats))
    weights[best] = 1.0
    mass = np.zeros(game.num_joint)
    mass[flats] = weights
    induced = JointDistribution(mass, game.action_counts)
    return RrSolution(LpStatus.OPTIMAL, weights, induced, float(values[best]))


def solve_reduced_rank_lp(game: FiniteGame, pne_set: CcPneSet, sys_cost) -> RrSolution:
    """LP formulation of :func:`solve_reduced_rank`; must agree on the objective."""
    if len(pne_set) == 0:
        return RrSolution(LpStatus.INFEASIBLE)
    sys_cost = np.asarray(sys_cost, dtype=float)
    flats = [flat_index(p, game.action_counts) for p in pne_set.profiles]
    values = sys_cost[flats]
    program = LinearProgram.from_rows(
        objective=values, eq=[(np.ones(len(flats)), 1.0)]
    )
    solution = lpmod.solve(program)
    if solution.status != LpStatus.OPTIMAL:  # the simplex is never empty
        raise SolverFailureError("reduced-rank LP did not reach optimality")
    weights = np.maximum(solution.values, 0.0)
    weights /= weights.sum()
    mass = np.zeros(game.num_joint)
    mass[flats] = weights
    induced = JointDistribution(mass, game.action_counts)
    return RrSolution(LpStatus.OPTIMAL, weights, induced, float(solution.objective_value))


def sample_recommendation(z: JointDistribution, rng: np.random.Generator) -> tuple[int, ...]:
    """Draw one joint action from z by inverse CDF over its support.

    Zero-mass joint actions are never returned; a fixed generator state gives
    a fixed draw.
    """
    support = z.support
    if support.size == 0:
        raise ValueError("distribution has empty support")
    cumulative = np.cumsum(z.mass[support])
    u = rng.random() * cumulative[-1]
    k = int(np.searchsorted(cumulative, u, side="right"))
    k = min(k, support.size - 1)
    return unflatten(int(support[k]), z.action_counts)
