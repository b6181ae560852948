import math

import pytest

from greedygn import bench
from greedygn.bench import (
    GridSpec,
    default_prob,
    export_grid,
    grid_to_text,
    read_grid,
    recovery_boundary,
    run_grid,
    trial_seeds,
)
from greedygn.numlin import InvalidInputError


def _small_grid(**kw):
    opts = dict(kind="quadratic", N=30, s=2, m_values=(10, 12), n_values=(2, 3),
                trials=2, strategies=("md", "l1"))
    opts.update(kw)
    return GridSpec(**opts)


def test_recovery_boundary():
    assert recovery_boundary(100, 20) == pytest.approx(20 / (2 * math.log(100)))
    with pytest.raises(InvalidInputError):
        recovery_boundary(1, 5)


def test_default_prob():
    assert default_prob("quadratic", 40) == 0.02
    assert default_prob("exponential", 40) == pytest.approx(0.06)


def test_admissible_cells():
    spec = GridSpec(kind="quadratic", m_values=(16, 20), n_values=(2, 4, 6))
    assert len(spec.cells()) == 6
    spec = GridSpec(kind="exponential", s=4, m_values=(20, 40), n_values=(2, 10, 30))
    assert spec.cells() == [(20, 2), (20, 10), (40, 2), (40, 10), (40, 30)]


def test_invalid_spec():
    with pytest.raises(InvalidInputError):
        GridSpec(kind="cubic")
    with pytest.raises(InvalidInputError):
        GridSpec(strategies=("xx",))
    with pytest.raises(InvalidInputError):
        GridSpec(trials=-1)


def test_seeds_do_not_depend_on_strategy_or_order():
    assert trial_seeds(0, 20, 6, 3) == trial_seeds(0, 20, 6, 3)
    assert trial_seeds(0, 20, 6, 3) != trial_seeds(0, 20, 6, 4)


@pytest.fixture(scope="module")
def grid():
    return run_grid(_small_grid())


def test_grid_shape_and_counts(grid):
    assert len(grid.cells) == 8
    for c in grid.cells:
        assert c.trials == 2
        assert c.successes + c.failures == 2
        assert 0 <= c.recovery_rate <= c.success_rate <= 1


def test_grid_is_deterministic(grid):
    again = run_grid(_small_grid())
    assert grid_to_text(grid) == grid_to_text(again)


def test_cell_order_does_not_matter(grid):
    reordered = run_grid(_small_grid(m_values=(12, 10), n_values=(3, 2),
                                     strategies=("l1", "md")))
    for c in grid.cells:
        d = reordered.cell(c.m, c.n, c.strategy)
        assert (c.successes, c.mean_sparsity, c.mean_iterations) == \
            (d.successes, d.mean_sparsity, d.mean_iterations)


def test_parallel_matches_serial(grid):
    parallel = run_grid(_small_grid(), workers=2)
    assert grid_to_text(parallel, "json") == grid_to_text(grid, "json")


def test_zero_trials_gives_absent_rates(tmp_path):
    result = run_grid(_small_grid(trials=0))
    assert len(result.cells) == 8
    assert all(c.success_rate is None and c.mean_sparsity is None for c in result.cells)
    rows = read_grid(export_grid(result, tmp_path / "empty.csv"))
    assert all(r["success_rate"] is None for r in rows)


@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_export_round_trip(grid, tmp_path, fmt):
    path = export_grid(grid, tmp_path / f"g.{fmt}", fmt)
    rows = read_grid(path)
    assert len(rows) == len(grid.cells)
    for row, c in zip(rows, grid.cells):
        assert (row["m"], row["n"], row["strategy"]) == (c.m, c.n, c.strategy)
        assert row["success_rate"] == c.success_rate
        assert row["mean_sparsity"] == c.mean_sparsity
        assert "mean_wall_time" not in row


def test_timing_column_is_opt_in(grid):
    assert "mean_wall_time" in grid_to_text(grid, timing=True)
    assert "mean_wall_time" not in grid_to_text(grid)


def test_read_grid_rejects_foreign_files(tmp_path):
    bad = tmp_path / "x.csv"
    bad.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        read_grid(bad)


def test_exponential_uses_prob_per_cell(monkeypatch):
    seen = {}
    real = bench.solve

    def spy(system, cfg, on_row=None):
        seen.setdefault(system.n_eqs, set()).add(cfg.prob)
        return real(system, cfg)

    monkeypatch.setattr(bench, "solve", spy)
    spec = GridSpec(kind="exponential", N=40, s=2, p=1, m_values=(12, 20),
                    n_values=(2,), trials=1, solver_overrides={"k_max": 5})
    run_grid(spec)
    assert {m: sorted(s) for m, s in seen.items()} == {
        12: [pytest.approx(0.032)],
        20: [pytest.approx(0.04)],
    }


def test_recovery_boundary_examples():
    assert recovery_boundary(math.e**2, 8) == pytest.approx(2.0)
    assert recovery_boundary(100, 20) == pytest.approx(2.1715, abs=1e-4)
    assert recovery_boundary(100, 20) < recovery_boundary(100, 21)


def test_empty_grid_exports_header_only(tmp_path):
    result = run_grid(GridSpec(kind="quadratic", m_values=(10,), n_values=(8,)))
    assert result.cells == []
    path = export_grid(result, tmp_path / "e.csv")
    assert len(path.read_text().splitlines()) == 2
    assert read_grid(path) == []


def test_export_errors_carry_path(grid, tmp_path):
    with pytest.raises(OSError, match="missing"):
        export_grid(grid, tmp_path / "missing" / "g.csv")
