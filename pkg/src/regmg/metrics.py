"""Convergence metrics and CSV logging.

The regularized metrics at weight tau are

    delta_pi  = J_tau(pi_tau*, phi_tau*) - g_tau(pi)
    delta_phi = J_tau(pi, phi) - g_tau(pi)

and the unregularized gaps are ``gap_max = J(pi*, phi*) - g_0(pi)`` and
``gap_min = J(pi, phi) - g_0(pi)``.  The Nash gap reported by the solvers is
the larger of the two.
"""
from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, fields, replace

import numpy as np

from .best_response import DEFAULT_TOL, best_response_min
from .equilibrium import EquilibriumSolution, shapley_solve
from .evaluation import objective, policy_gradients
from .game import MarkovGame, PolicyPair, PolicyParams, softmax_policies

CSV_COLUMNS = (
    "k", "tau", "alpha", "beta", "delta_pi", "delta_phi", "composite",
    "gap_max_unreg", "gap_min_unreg", "min_pi", "min_phi",
    "grad_theta_norm", "grad_psi_norm", "dist_to_ne",
)
AVERAGE_COLUMNS = ("avg_gap_max_unreg", "avg_gap_min_unreg")
_ATTR = {"min_pi": "min_pi_entry", "min_phi": "min_phi_entry",
         "grad_theta_norm": "grad_norm_theta", "grad_psi_norm": "grad_norm_psi"}


@dataclass(frozen=True)
class IterateRecord:
    """One logged iterate.  ``None`` marks a metric that was not computed."""

    k: int
    tau_k: float
    alpha_k: float
    beta_k: float
    delta_pi: float | None = None
    delta_phi: float | None = None
    composite: float | None = None
    gap_max_unreg: float | None = None
    gap_min_unreg: float | None = None
    min_pi_entry: float | None = None
    min_phi_entry: float | None = None
    grad_norm_theta: float | None = None
    grad_norm_psi: float | None = None
    dist_to_ne: float | None = None
    avg_gap_max_unreg: float | None = None
    avg_gap_min_unreg: float | None = None

    @property
    def nash_gap(self) -> float | None:
        if self.gap_max_unreg is None or self.gap_min_unreg is None:
            return None
        return max(self.gap_max_unreg, self.gap_min_unreg)

    @property
    def avg_nash_gap(self) -> float | None:
        if self.avg_gap_max_unreg is None or self.avg_gap_min_unreg is None:
            return None
        return max(self.avg_gap_max_unreg, self.avg_gap_min_unreg)


class EquilibriumCache:
    """Memoized ``shapley_solve`` results keyed by tau.

    A miss is warm-started from the cached solution with the nearest tau,
    which makes the fresh solves along a decaying schedule cheap.
    """

    def __init__(self, game: MarkovGame, tol: float = DEFAULT_TOL, *, max_entries: int = 64):
        self.game = game
        self.tol = tol
        self.max_entries = max_entries
        self._store: dict[float, EquilibriumSolution] = {}
        self.solves = 0

    def get(self, tau: float) -> EquilibriumSolution:
        tau = float(tau)
        hit = self._store.get(tau)
        if hit is not None:
            return hit
        v0 = None
        if self._store:
            near = min(self._store, key=lambda t: abs(t - tau))
            v0 = self._store[near].value_vector
        sol = shapley_solve(self.game, tau, self.tol, v0=v0, compute_gap=False)
        self.solves += 1
        if len(self._store) >= self.max_entries:
            # keep tau = 0 (shared by every unregularized gap) and drop the oldest other entry
            victim = next(t for t in self._store if t != 0.0)
            del self._store[victim]
        self._store[tau] = sol
        return sol

    def put(self, sol: EquilibriumSolution) -> None:
        self._store[float(sol.tau)] = sol


def _pair(params_or_pair) -> PolicyPair:
    if isinstance(params_or_pair, PolicyPair):
        return params_or_pair
    return softmax_policies(params_or_pair)


def compute_deltas(game: MarkovGame, params, tau: float, eq_cache: EquilibriumCache, tol: float = DEFAULT_TOL):
    """(delta_pi, delta_phi) at weight ``tau > 0``; ``params`` may be logits or a PolicyPair."""
    if not tau > 0:
        raise ValueError(f"delta metrics need tau > 0, got {tau}")
    pair = _pair(params)
    g = best_response_min(game, pair.pi, tau, tol).j_value
    j_star = eq_cache.get(tau).j_star
    return j_star - g, objective(game, pair, tau) - g


def compute_unregularized_gaps(game: MarkovGame, params, eq0_cache: EquilibriumCache, tol: float = DEFAULT_TOL):
    """(gap_max, gap_min) against the tau = 0 equilibrium value."""
    pair = _pair(params)
    g0 = best_response_min(game, pair.pi, 0.0, tol).j_value
    j_star = eq0_cache.get(0.0).j_star
    return j_star - g0, objective(game, PolicyPair(pair.pi, pair.phi), 0.0) - g0


class MetricTracker:
    """Builds IterateRecords for the solvers at a fixed cadence.

    Iterations ``0``, every multiple of ``log_every`` and the final one are
    logged.  ``reference`` is an optional (pi, phi) pair for ``dist_to_ne``.
    """

    def __init__(
        self,
        game: MarkovGame,
        *,
        log_every: int = 50,
        tol: float = DEFAULT_TOL,
        deltas: bool = True,
        unregularized: bool = True,
        reference=None,
        cache: EquilibriumCache | None = None,
    ):
        if log_every < 1:
            raise ValueError("log_every must be >= 1")
        self.game = game
        self.log_every = int(log_every)
        self.tol = tol
        self.deltas = deltas
        self.unregularized = unregularized
        self.reference = None if reference is None else (np.asarray(reference[0]), np.asarray(reference[1]))
        self.cache = cache if cache is not None else EquilibriumCache(game, tol)
        self.records: list[IterateRecord] = []

    def due(self, k: int, final: bool = False) -> bool:
        return final or k % self.log_every == 0

    def record(self, k, params: PolicyParams, tau, alpha, beta, *, average: PolicyPair | None = None) -> IterateRecord:
        game = self.game
        pair = softmax_policies(params)
        g_theta, g_psi, _ = policy_gradients(game, params, tau)
        vals = dict(
            min_pi_entry=pair.min_pi_entry,
            min_phi_entry=pair.min_phi_entry,
            grad_norm_theta=float(np.linalg.norm(g_theta)),
            grad_norm_psi=float(np.linalg.norm(g_psi)),
        )
        if self.deltas and tau > 0:
            dp, df = compute_deltas(game, pair, tau, self.cache, self.tol)
            vals.update(delta_pi=dp, delta_phi=df, composite=3.0 * dp + df)
        if self.unregularized:
            gm, gn = compute_unregularized_gaps(game, pair, self.cache, self.tol)
            vals.update(gap_max_unreg=gm, gap_min_unreg=gn)
            if average is not None:
                am, an = compute_unregularized_gaps(game, average, self.cache, self.tol)
                vals.update(avg_gap_max_unreg=am, avg_gap_min_unreg=an)
        if self.reference is not None:
            vals["dist_to_ne"] = float(
                max(np.abs(pair.pi - self.reference[0]).max(), np.abs(pair.phi - self.reference[1]).max())
            )
        rec = IterateRecord(int(k), float(tau), float(alpha), float(beta), **vals)
        self.records.append(rec)
        return rec


# -- CSV ----------------------------------------------------------------------

def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _clamped(rec: IterateRecord, tol: float) -> IterateRecord:
    """Zero out negative values within -10*tol; composite is recomputed when a delta is clamped."""
    changes = {}
    for name in ("delta_pi", "delta_phi", "gap_max_unreg", "gap_min_unreg", "avg_gap_max_unreg", "avg_gap_min_unreg"):
        v = getattr(rec, name)
        if v is not None and -10.0 * tol <= v < 0.0:
            changes[name] = 0.0
    if not changes:
        return rec
    out = replace(rec, **changes)
    if ("delta_pi" in changes or "delta_phi" in changes) and out.delta_pi is not None and out.delta_phi is not None:
        out = replace(out, composite=3.0 * out.delta_pi + out.delta_phi)
    return out


def _row(rec: IterateRecord, with_average: bool):
    values = [rec.k, rec.tau_k, rec.alpha_k, rec.beta_k]
    for col in CSV_COLUMNS[4:]:
        values.append(getattr(rec, _ATTR.get(col, col)))
    if with_average:
        values += [rec.avg_gap_max_unreg, rec.avg_gap_min_unreg]
    return [_fmt(v) for v in values]


def write_csv(records, destination, *, tol: float = DEFAULT_TOL, average_columns: bool | None = None) -> None:
    """Write records to a path or text stream.

    Averaged-iterate columns are appended after the standard ones when any
    record carries them (or when ``average_columns`` forces it).
    """
    records = list(records)
    if average_columns is None:
        average_columns = any(r.avg_gap_max_unreg is not None for r in records)
    header = list(CSV_COLUMNS) + (list(AVERAGE_COLUMNS) if average_columns else [])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for rec in records:
        w.writerow(_row(_clamped(rec, tol), average_columns))
    text = buf.getvalue()
    if hasattr(destination, "write"):
        destination.write(text)
        return
    try:
        with open(os.fspath(destination), "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write CSV to {destination}: {exc.strerror or exc}") from exc


def read_csv(source) -> list[IterateRecord]:
    """Parse a file written by ``write_csv`` (path or text stream)."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(os.fspath(source), encoding="utf-8", newline="") as fh:
            text = fh.read()
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise ValueError("empty CSV")
    header = rows[0]
    if tuple(header[: len(CSV_COLUMNS)]) != CSV_COLUMNS:
        raise ValueError(f"unexpected CSV header {header}")
    names = [f.name for f in fields(IterateRecord)]
    out = []
    for row in rows[1:]:
        vals = {}
        for col, cell in zip(header, row):
            attr = {"tau": "tau_k", "alpha": "alpha_k", "beta": "beta_k"}.get(col, _ATTR.get(col, col))
            if attr not in names:
                continue
            if attr == "k":
                vals[attr] = int(cell)
            else:
                vals[attr] = None if cell == "" else float(cell)
        out.append(IterateRecord(**vals))
    return out
