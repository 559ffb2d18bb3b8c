"""Two-player zero-sum Markov games, softmax policies and the game file format."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

STOCHASTIC_TOL = 1e-12


class GameValidationError(ValueError):
    """Raised when a game document or tensor violates the model invariants."""


class InvalidParameterError(ValueError):
    """Raised for non-finite policy logits."""


class InvalidDistributionError(ValueError):
    """Raised when a probability vector has negative entries."""


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=np.float64, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class MarkovGame:
    """The tuple (S, A, B, P, gamma, r, rho).

    ``transition[s, a, b, s']`` is the probability of moving to ``s'`` and
    ``reward[s, a, b]`` is the payoff to the max player.  Arrays are copied
    and made read-only on construction.
    """

    transition: np.ndarray
    reward: np.ndarray
    gamma: float
    rho: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "transition", _frozen(self.transition))
        object.__setattr__(self, "reward", _frozen(self.reward))
        object.__setattr__(self, "rho", _frozen(self.rho))
        object.__setattr__(self, "gamma", float(self.gamma))
        validate_game(self)

    @property
    def n_states(self) -> int:
        return self.reward.shape[0]

    @property
    def n_actions_max(self) -> int:
        return self.reward.shape[1]

    @property
    def n_actions_min(self) -> int:
        return self.reward.shape[2]

    @property
    def rho_min(self) -> float:
        return float(self.rho.min())

    @property
    def satisfies_positive_rho(self) -> bool:
        """Whether every state has positive initial probability."""
        return self.rho_min > 0.0

    @property
    def reward_min(self) -> float:
        return float(self.reward.min())

    @property
    def reward_max(self) -> float:
        return float(self.reward.max())

    @property
    def rewards_in_unit_interval(self) -> bool:
        return self.reward_min >= 0.0 and self.reward_max <= 1.0

    def normalized_rewards(self) -> "MarkovGame":
        """Affinely rescale rewards into [0, 1].

        Equilibrium policies are unchanged; values transform by the same map
        (after accounting for the 1/(1-gamma) factor on the shift).
        """
        lo, hi = self.reward_min, self.reward_max
        span = hi - lo if hi > lo else 1.0
        return MarkovGame(self.transition, (self.reward - lo) / span, self.gamma, self.rho)

    def __eq__(self, other):
        if not isinstance(other, MarkovGame):
            return NotImplemented
        return (
            self.gamma == other.gamma
            and np.array_equal(self.transition, other.transition)
            and np.array_equal(self.reward, other.reward)
            and np.array_equal(self.rho, other.rho)
        )

    __hash__ = None


def validate_game(game: MarkovGame) -> None:
    P, r, rho = game.transition, game.reward, game.rho
    if r.ndim != 3:
        raise GameValidationError(f"reward must be a 3-d tensor [s][a][b], got shape {r.shape}")
    S, A, B = r.shape
    if min(S, A, B) < 1:
        raise GameValidationError(f"empty dimension in reward shape {r.shape}")
    if P.shape != (S, A, B, S):
        raise GameValidationError(
            f"transition shape {P.shape} does not match (n_states, n_actions_max, n_actions_min, n_states) = {(S, A, B, S)}"
        )
    if rho.shape != (S,):
        raise GameValidationError(f"rho has shape {rho.shape}, expected ({S},)")
    if not (0.0 < game.gamma < 1.0):
        raise GameValidationError(f"gamma must lie in (0, 1), got {game.gamma}")
    for name, arr in (("reward", r), ("transition", P), ("rho", rho)):
        if not np.all(np.isfinite(arr)):
            idx = tuple(int(i) for i in np.argwhere(~np.isfinite(arr))[0])
            raise GameValidationError(f"non-finite {name} entry at index {idx}")
    if np.any(P < 0):
        idx = tuple(int(i) for i in np.argwhere(P < 0)[0])
        raise GameValidationError(f"negative transition probability at (s, a, b, s') = {idx}")
    row_sums = P.sum(axis=3)
    bad = np.abs(row_sums - 1.0) > STOCHASTIC_TOL
    if np.any(bad):
        s, a, b = (int(i) for i in np.argwhere(bad)[0])
        raise GameValidationError(
            f"transition row (s, a, b) = ({s}, {a}, {b}) sums to {row_sums[s, a, b]!r}, not 1"
        )
    if np.any(rho < 0):
        raise GameValidationError(f"negative rho entry at s = {int(np.argmax(rho < 0))}")
    if abs(rho.sum() - 1.0) > STOCHASTIC_TOL:
        raise GameValidationError(f"rho sums to {rho.sum()!r}, not 1")


@dataclass(frozen=True, eq=False)
class PolicyParams:
    """Softmax logit tables: ``theta`` (S x A) for the max player, ``psi`` (S x B) for the min player."""

    theta: np.ndarray
    psi: np.ndarray

    def __post_init__(self):
        theta = _frozen(self.theta)
        psi = _frozen(self.psi)
        if theta.ndim != 2 or psi.ndim != 2 or theta.shape[0] != psi.shape[0]:
            raise InvalidParameterError(f"bad logit shapes {theta.shape}, {psi.shape}")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "psi", psi)

    @classmethod
    def zeros(cls, game: MarkovGame) -> "PolicyParams":
        """Uniform-policy initialization theta = 0, psi = 0."""
        return cls(
            np.zeros((game.n_states, game.n_actions_max)),
            np.zeros((game.n_states, game.n_actions_min)),
        )

    @property
    def finite(self) -> bool:
        return bool(np.all(np.isfinite(self.theta)) and np.all(np.isfinite(self.psi)))


@dataclass(frozen=True, eq=False)
class PolicyPair:
    """Row-stochastic policy matrices ``pi`` (S x A) and ``phi`` (S x B).

    ``log_pi``/``log_phi`` are kept when the pair comes from logits so that
    log-probabilities never have to be recovered from underflowed entries.
    """

    pi: np.ndarray
    phi: np.ndarray
    log_pi: np.ndarray | None = field(default=None, repr=False)
    log_phi: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        for name in ("pi", "phi", "log_pi", "log_phi"):
            val = getattr(self, name)
            if val is not None:
                object.__setattr__(self, name, _frozen(val))

    @property
    def min_pi_entry(self) -> float:
        return float(self.pi.min())

    @property
    def min_phi_entry(self) -> float:
        return float(self.phi.min())

    def logs(self) -> tuple[np.ndarray, np.ndarray]:
        """(log pi, log phi); zero entries map to -inf."""
        with np.errstate(divide="ignore"):
            lp = self.log_pi if self.log_pi is not None else np.log(self.pi)
            lq = self.log_phi if self.log_phi is not None else np.log(self.phi)
        return lp, lq


def log_softmax_rows(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def softmax_rows(logits: np.ndarray) -> np.ndarray:
    z = np.exp(logits - logits.max(axis=1, keepdims=True))
    return z / z.sum(axis=1, keepdims=True)


def softmax_policies(params: PolicyParams) -> PolicyPair:
    if not params.finite:
        raise InvalidParameterError("policy logits must be finite")
    lp = log_softmax_rows(params.theta)
    lq = log_softmax_rows(params.psi)
    return PolicyPair(softmax_rows(params.theta), softmax_rows(params.psi), lp, lq)


def policy_pair(pi, phi) -> PolicyPair:
    """Wrap explicit policy matrices, checking row-stochasticity."""
    pi = np.asarray(pi, dtype=np.float64)
    phi = np.asarray(phi, dtype=np.float64)
    for name, m in (("pi", pi), ("phi", phi)):
        if m.ndim != 2:
            raise InvalidDistributionError(f"{name} must be a matrix")
        if np.any(m < 0):
            raise InvalidDistributionError(f"{name} has negative entries")
        if np.any(np.abs(m.sum(axis=1) - 1.0) > 1e-9):
            raise InvalidDistributionError(f"{name} rows do not sum to 1")
    return PolicyPair(pi, phi)


def logits_from_policy(policy: np.ndarray) -> np.ndarray:
    """Logits whose softmax is ``policy`` (requires strictly positive entries)."""
    policy = np.asarray(policy, dtype=np.float64)
    if np.any(policy <= 0):
        raise InvalidDistributionError("logits need strictly positive probabilities")
    return np.log(policy)


def policy_entropy(row) -> float:
    """Shannon entropy -sum p log p with the 0 log 0 = 0 convention."""
    p = np.asarray(row, dtype=np.float64)
    if np.any(p < 0):
        raise InvalidDistributionError(f"negative probability in {p}")
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())


def row_entropies(policy: np.ndarray, log_policy: np.ndarray | None = None) -> np.ndarray:
    """Per-state entropies of a row-stochastic matrix."""
    if log_policy is None:
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(policy > 0, policy * np.log(np.where(policy > 0, policy, 1.0)), 0.0)
    else:
        terms = np.where(policy > 0, policy * log_policy, 0.0)
    return -terms.sum(axis=1)


# -- file format --------------------------------------------------------------

_FIELDS = ("n_states", "n_actions_max", "n_actions_min", "gamma", "rho", "reward", "transition")


def game_to_dict(game: MarkovGame) -> dict:
    return {
        "n_states": game.n_states,
        "n_actions_max": game.n_actions_max,
        "n_actions_min": game.n_actions_min,
        "gamma": game.gamma,
        "rho": game.rho.tolist(),
        "reward": game.reward.tolist(),
        "transition": game.transition.tolist(),
    }


def save_game(game: MarkovGame) -> str:
    """Serialize to the JSON game document.

    Floats are written with the shortest repr that round-trips, so
    ``load_game(save_game(g)) == g`` bit for bit.
    """
    return json.dumps(game_to_dict(game), indent=1) + "\n"


def _as_array(doc, key, shape):
    try:
        arr = np.array(doc[key], dtype=np.float64)
    except (ValueError, TypeError) as exc:
        raise GameValidationError(f"field {key!r} is not a rectangular numeric array: {exc}") from None
    if arr.shape != shape:
        raise GameValidationError(f"field {key!r} has shape {arr.shape}, expected {shape}")
    return arr


def game_from_dict(doc: dict) -> MarkovGame:
    missing = [k for k in _FIELDS if k not in doc]
    if missing:
        raise GameValidationError(f"missing field(s): {', '.join(missing)}")
    try:
        S, A, B = (int(doc[k]) for k in ("n_states", "n_actions_max", "n_actions_min"))
    except (TypeError, ValueError):
        raise GameValidationError("dimension fields must be integers") from None
    if min(S, A, B) < 1:
        raise GameValidationError("dimensions must be positive")
    rho = _as_array(doc, "rho", (S,))
    reward = _as_array(doc, "reward", (S, A, B))
    transition = _as_array(doc, "transition", (S, A, B, S))
    return MarkovGame(transition, reward, float(doc["gamma"]), rho)


def load_game(text: str) -> MarkovGame:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GameValidationError(f"not a valid game document: {exc}") from None
    if not isinstance(doc, dict):
        raise GameValidationError("game document must be an object")
    return game_from_dict(doc)


def game_digest(game: MarkovGame) -> str:
    """Short content hash used to tag runs."""
    import hashlib

    return hashlib.sha256(save_game(game).encode()).hexdigest()[:16]
