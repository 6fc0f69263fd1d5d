"""Finite normal-form games with dense joint-action cost tables.

Joint actions are indexed two ways: as per-agent coordinate tuples and as a
flat mixed-radix index with agent 0 most significant. The flat order matches
C-order raveling, so reshaping a flat table to the action-shaped grid (and
back) is free. Costs are minimized throughout: lower is better for every
agent.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "BudgetExceededError",
    "FiniteGame",
    "JointDistribution",
    "MASS_TOL",
    "conditional_expected_deviation",
    "deviation_cost",
    "flat_index",
    "game_from_dict",
    "game_to_dict",
    "joint_space_size",
    "load_game",
    "save_game",
    "unflatten",
    "unnormalized_expected_deviation",
]

# Probability masses must sum to one within this tolerance.
MASS_TOL = 1e-9


class BudgetExceededError(RuntimeError):
    """Raised when an action space exceeds its configured size cap."""


def joint_space_size(action_counts) -> int:
    """Number of joint actions, the product of per-agent action counts."""
    return math.prod(int(m) for m in action_counts)


def flat_index(coords, action_counts) -> int:
    """Mixed-radix flat index of a joint action (agent 0 most significant)."""
    if len(coords) != len(action_counts):
        raise ValueError(
            f"coords has {len(coords)} entries for {len(action_counts)} agents"
        )
    flat = 0
    for c, m in zip(coords, action_counts):
        c = int(c)
        if not 0 <= c < m:
            raise ValueError(f"coordinate {c} out of range [0, {m})")
        flat = flat * int(m) + c
    return flat


def unflatten(flat, action_counts) -> tuple[int, ...]:
    """Inverse of :func:`flat_index`."""
    flat = int(flat)
    size = joint_space_size(action_counts)
    if not 0 <= flat < size:
        raise ValueError(f"flat index {flat} out of range [0, {size})")
    coords = []
    for m in reversed(action_counts):
        coords.append(flat % int(m))
        flat //= int(m)
    return tuple(reversed(coords))


@dataclass(frozen=True)
class FiniteGame:
    """A finite game: per-agent costs over the full joint action space.

    ``costs[i, k]`` is agent ``i``'s cost at the joint action with flat index
    ``k``. Instances are immutable (arrays are marked read-only) and safe to
    share across threads.
    """

    action_counts: tuple[int, ...]
    costs: np.ndarray
    action_labels: tuple[tuple[str, ...], ...] | None = None

    def __post_init__(self):
        counts = tuple(int(m) for m in self.action_counts)
        if len(counts) < 1:
            raise ValueError("game needs at least one agent")
        if any(m < 1 for m in counts):
            raise ValueError("every agent needs at least one action")
        object.__setattr__(self, "action_counts", counts)

        costs = np.ascontiguousarray(self.costs, dtype=float)
        expected = (len(counts), joint_space_size(counts))
        if costs.shape != expected:
            raise ValueError(f"costs shape {costs.shape}, expected {expected}")
        if not np.all(np.isfinite(costs)):
            raise ValueError("costs must be finite for every agent and joint action")
        costs.setflags(write=False)
        object.__setattr__(self, "costs", costs)

        if self.action_labels is not None:
            labels = tuple(tuple(str(s) for s in per_agent) for per_agent in self.action_labels)
            if len(labels) != len(counts) or any(
                len(per_agent) != m for per_agent, m in zip(labels, counts)
            ):
                raise ValueError("action_labels must match action_counts")
            object.__setattr__(self, "action_labels", labels)

    @property
    def num_agents(self) -> int:
        return len(self.action_counts)

    @property
    def num_joint(self) -> int:
        return self.costs.shape[1]

    def cost(self, agent: int, coords) -> float:
        """Cost of one agent at a joint action given as coordinates."""
        return float(self.costs[agent, flat_index(coords, self.action_counts)])

    def cost_grid(self, agent: int) -> np.ndarray:
        """Agent's cost table reshaped to the action-counts grid (read-only view)."""
        return self.costs[agent].reshape(self.action_counts)


@dataclass(frozen=True)
class JointDistribution:
    """Probability mass over joint actions, stored densely by flat index."""

    mass: np.ndarray
    action_counts: tuple[int, ...]

    def __post_init__(self):
        counts = tuple(int(m) for m in self.action_counts)
        object.__setattr__(self, "action_counts", counts)
        mass = np.ascontiguousarray(self.mass, dtype=float)
        if mass.shape != (joint_space_size(counts),):
            raise ValueError(
                f"mass has length {mass.shape}, joint space is {joint_space_size(counts)}"
            )
        if mass.size and float(mass.min()) < 0.0:
            raise ValueError("probability masses must be nonnegative")
        total = float(mass.sum())
        if abs(total - 1.0) > MASS_TOL:
            raise ValueError(f"masses sum to {total!r}, expected 1 within {MASS_TOL}")
        mass.setflags(write=False)
        object.__setattr__(self, "mass", mass)

    @classmethod
    def point_mass(cls, coords, action_counts) -> "JointDistribution":
        """Distribution concentrated on a single joint action."""
        mass = np.zeros(joint_space_size(action_counts))
        mass[flat_index(coords, action_counts)] = 1.0
        return cls(mass, tuple(action_counts))

    @property
    def grid(self) -> np.ndarray:
        return self.mass.reshape(self.action_counts)

    @property
    def support(self) -> np.ndarray:
        """Flat indices carrying strictly positive mass."""
        return np.nonzero(self.mass > 0.0)[0]

    def prob(self, coords) -> float:
        return float(self.mass[flat_index(coords, self.action_counts)])

    def marginal(self, agent: int, action: int) -> float:
        """Probability that ``agent`` is recommended ``action``."""
        sliced = np.moveaxis(self.grid, agent, 0)[action]
        return float(sliced.sum())


def deviation_cost(game: FiniteGame, agent: int, recommended: int, alternative: int, others) -> float:
    """Cost change J_i(rec, others) - J_i(alt, others) from a unilateral switch.

    ``others`` lists the remaining agents' actions in ascending agent order.
    Positive means the alternative is cheaper, i.e. deviating pays off.
    """
    if recommended == alternative:
        raise ValueError("alternative action must differ from the recommended one")
    coords = list(others)
    if len(coords) != game.num_agents - 1:
        raise ValueError(
            f"expected {game.num_agents - 1} opponent actions, got {len(coords)}"
        )
    coords.insert(agent, recommended)
    stay = game.cost(agent, coords)
    coords[agent] = alternative
    switch = game.cost(agent, coords)
    return stay - switch


def _sliced(game: FiniteGame, z: JointDistribution, agent: int):
    """Mass and cost grids with the agent's own axis moved first."""
    if z.action_counts != game.action_counts:
        raise ValueError("distribution does not match the game's action space")
    zg = np.moveaxis(z.grid, agent, 0)
    jg = np.moveaxis(game.cost_grid(agent), agent, 0)
    return zg, jg


def unnormalized_expected_deviation(
    game: FiniteGame, z: JointDistribution, agent: int, recommended: int, alternative: int
) -> float:
    """Sum over opponents of z(rec, x_others) * (J(rec, .) - J(alt, .)).

    This is the raw affine-in-z quantity the equilibrium LP rows are built
    from; dividing by the marginal of the recommendation gives the
    conditional expectation.
    """
    if recommended == alternative:
        raise ValueError("alternative action must differ from the recommended one")
    zg, jg = _sliced(game, z, agent)
    diff = jg[recommended] - jg[alternative]
    return float(np.sum(zg[recommended] * diff))


def conditional_expected_deviation(
    game: FiniteGame, z: JointDistribution, agent: int, recommended: int, alternative: int
) -> float:
    """Expected deviation cost conditioned on the recommendation.

    Returns 0 when the recommendation has zero marginal probability: the
    corresponding incentive constraint is vacuous.
    """
    if recommended == alternative:
        raise ValueError("alternative action must differ from the recommended one")
    zg, jg = _sliced(game, z, agent)
    marginal = float(zg[recommended].sum())
    if marginal <= 0.0:
        return 0.0
    diff = jg[recommended] - jg[alternative]
    return float(np.sum(zg[recommended] * diff)) / marginal


# --- JSON serialization -----------------------------------------------------
#
# Schema (used by the CLI's --game-file option):
#   {"agents": n,
#    "action_counts": [m_0, ..., m_{n-1}],
#    "costs": [[...one value per flat joint index...]  per agent],
#    "labels": [[...m_i strings...] per agent]}        # optional


def game_to_dict(game: FiniteGame) -> dict:
    doc = {
        "agents": game.num_agents,
        "action_counts": list(game.action_counts),
        "costs": [list(map(float, row)) for row in game.costs],
    }
    if game.action_labels is not None:
        doc["labels"] = [list(per_agent) for per_agent in game.action_labels]
    return doc


def game_from_dict(doc: dict) -> FiniteGame:
    counts = tuple(int(m) for m in doc["action_counts"])
    if int(doc["agents"]) != len(counts):
        raise ValueError("'agents' disagrees with the length of 'action_counts'")
    labels = doc.get("labels")
    return FiniteGame(
        action_counts=counts,
        costs=np.asarray(doc["costs"], dtype=float),
        action_labels=tuple(tuple(per_agent) for per_agent in labels) if labels else None,
    )


def save_game(game: FiniteGame, path) -> None:
    Path(path).write_text(json.dumps(game_to_dict(game), indent=2) + "\n")


def load_game(path) -> FiniteGame:
    return game_from_dict(json.loads(Path(path).read_text()))
