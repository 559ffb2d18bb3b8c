import io

import numpy as np
import pytest

from regmg.game import PolicyParams
from regmg.metrics import (
    AVERAGE_COLUMNS,
    CSV_COLUMNS,
    EquilibriumCache,
    IterateRecord,
    MetricTracker,
    compute_deltas,
    compute_unregularized_gaps,
    read_csv,
    write_csv,
)

from conftest import random_pair


def test_header_exact():
    buf = io.StringIO()
    write_csv([], buf)
    assert buf.getvalue() == ",".join(CSV_COLUMNS) + "\n"


def test_round_trip_with_missing_cells(tmp_path):
    recs = [
        IterateRecord(0, 1.0, 1e-3, 1e-2, 0.1, 0.2, 0.5, 1.0, 2.0, 0.5, 0.5, 0.3, 0.4, 0.01),
        IterateRecord(10, 0.5, 1e-3, 1e-2, gap_max_unreg=1 / 3, gap_min_unreg=2 / 3),
    ]
    path = tmp_path / "m.csv"
    write_csv(recs, path)
    raw = path.read_bytes()
    assert b"\r" not in raw
    assert raw.splitlines()[2].endswith(b",,,,")
    assert read_csv(path) == recs


def test_average_columns_appended():
    rec = IterateRecord(0, 0.0, 1e-3, 1e-2, avg_gap_max_unreg=0.1, avg_gap_min_unreg=0.2)
    buf = io.StringIO()
    write_csv([rec], buf)
    header = buf.getvalue().splitlines()[0].split(",")
    assert header == list(CSV_COLUMNS) + list(AVERAGE_COLUMNS)
    assert read_csv(io.StringIO(buf.getvalue()))[0].avg_nash_gap == 0.2


def test_clamping_and_composite():
    rec = IterateRecord(0, 1.0, 0.1, 0.1, delta_pi=-5e-10, delta_phi=0.25, composite=0.25 - 1.5e-9,
                        gap_max_unreg=-1e-3)
    buf = io.StringIO()
    write_csv([rec], buf, tol=1e-10)
    back = read_csv(io.StringIO(buf.getvalue()))[0]
    assert back.delta_pi == 0.0
    assert back.composite == 0.25
    assert back.gap_max_unreg == -1e-3  # beyond -10 tol: left as is


def test_deltas_vanish_at_regularized_equilibrium(mixed):
    cache = EquilibriumCache(mixed, 1e-11)
    sol = cache.get(0.5)
    from regmg.game import policy_pair

    dp, df = compute_deltas(mixed, policy_pair(sol.pi_star, sol.phi_star), 0.5, cache, 1e-11)
    assert abs(dp) < 1e-8 and abs(df) < 1e-8


def test_deltas_nonnegative(small_random):
    cache = EquilibriumCache(small_random)
    for seed in range(5):
        params, _ = random_pair(small_random, seed)
        dp, df = compute_deltas(small_random, params, 0.3, cache)
        gm, gn = compute_unregularized_gaps(small_random, params, cache)
        assert min(dp, df, gm, gn) > -1e-9
    with pytest.raises(ValueError):
        compute_deltas(small_random, params, 0.0, cache)


def test_cache_reuses_solutions(mixed):
    cache = EquilibriumCache(mixed, max_entries=3)
    for t in (0.0, 1.0, 0.5, 0.25, 1.0):
        cache.get(t)
    assert cache.solves == 5  # 1.0 was evicted before its second lookup
    cache.get(0.0)
    assert cache.solves == 5


def test_tracker_cadence(mixed):
    tr = MetricTracker(mixed, log_every=5, reference=(np.full((2, 2), 0.5), np.full((2, 2), 0.5)))
    assert tr.due(0) and tr.due(10) and not tr.due(3) and tr.due(3, final=True)
    rec = tr.record(0, PolicyParams.zeros(mixed), 1.0, 1e-3, 1e-2)
    assert rec.dist_to_ne == 0.0
    assert rec.composite == pytest.approx(3 * rec.delta_pi + rec.delta_phi)
    assert rec.nash_gap == max(rec.gap_max_unreg, rec.gap_min_unreg)
