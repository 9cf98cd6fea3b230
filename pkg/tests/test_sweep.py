import csv
import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from anls import GridSpec, ValidationError
from anls.sweep import (SweepResult, SweepRow, auto_grid, emit_plotdata, frontier, parse_range,
                        run_sweep, sweep_cell)

FAST = GridSpec(128, 512, 32.0, 128.0)


@pytest.fixture(scope="module")
def small_sweep():
    return run_sweep([0.5], [3.0, 4.0, 6.0], grid=FAST)


class TestParseRange:
    def test_forms(self):
        assert parse_range("2.5:3.0:0.25") == [2.5, 2.75, 3.0]
        assert parse_range("0.3,0.5") == [0.3, 0.5]
        assert parse_range("4") == [4.0]

    @given(st.floats(0, 5), st.integers(0, 30), st.sampled_from([0.05, 0.1, 0.25]))
    def test_count_and_endpoints(self, a, n, h):
        b = a + n * h
        vals = parse_range(f"{a!r}:{b!r}:{h!r}")
        assert len(vals) == n + 1
        assert np.isclose(vals[0], a) and np.isclose(vals[-1], b)

    @pytest.mark.parametrize("bad", ["1:0:0.1", "0:1:0", "0:1", ""])
    def test_rejects(self, bad):
        with pytest.raises(ValidationError):
            parse_range(bad)


class TestAutoGrid:
    @given(st.floats(0.3, 0.9), st.floats(2.5, 5.5))
    def test_powers_of_two_and_caps(self, s, p):
        for target in ("verdict", "pohozaev"):
            g = auto_grid(s, p, 1.0, target)
            assert g.ny <= 2**17 and g.lx == 48.0

    def test_omega_scaling(self):
        g1, g4 = auto_grid(0.5, 3, 1.0), auto_grid(0.5, 3, 4.0)
        assert np.isclose(g4.lx, g1.lx / 2) and np.isclose(g4.ly, g1.ly / 4)

    def test_unknown_target(self):
        with pytest.raises(ValidationError):
            auto_grid(0.5, 3, 1.0, "fast")


class TestCells:
    def test_no_solitons_skips_solver(self, small_sweep):
        row = small_sweep.rows[2]
        assert row.verdict == "NoSolitons" and not row.solver_launched and row.d11_solve is None

    def test_verdicts(self, small_sweep):
        assert [r.verdict for r in small_sweep.rows[:2]] == ["Stable", "Unstable"]
        assert frontier(small_sweep) == {0.5: (3.0, 4.0)}

    def test_failure_becomes_row(self):
        row = sweep_cell(0.5, 3.0, grid=GridSpec(16, 16, 4.0, 4.0), tol=1e-9)
        assert row.verdict == "Failed" and row.error_code != 0 and row.error

    def test_lexicographic_order(self):
        res = run_sweep([0.9, 0.3], [9.0, 8.0])
        assert [(r.s, r.p) for r in res.rows] == [(0.9, 9.0), (0.9, 8.0), (0.3, 9.0), (0.3, 8.0)]
        assert all(r.verdict == "NoSolitons" for r in res.rows[2:])

    def test_empty(self):
        with pytest.raises(ValidationError):
            run_sweep([], [3.0])


class TestOutputs:
    def test_csv_deterministic(self, small_sweep, tmp_path):
        small_sweep.to_csv(tmp_path / "a.csv")
        again = SweepResult([SweepRow(**{**r.__dict__, "wall_time": 99.0}) for r in small_sweep.rows])
        again.to_csv(tmp_path / "b.csv")
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
        rows = list(csv.DictReader(open(tmp_path / "a.csv")))
        assert float(rows[0]["d11_solve"]) == small_sweep.rows[0].d11_solve

    def test_stability_map(self, small_sweep, tmp_path):
        small_sweep.to_json(tmp_path / "s.json")
        emit_plotdata(tmp_path / "s.json", "stability_map", tmp_path / "m.csv")
        rows = list(csv.reader(open(tmp_path / "m.csv")))
        assert rows[0] == ["s", "p", "verdict", "d11_solve"] and len(rows) == 4

    def test_version_check(self, small_sweep, tmp_path):
        small_sweep.to_json(tmp_path / "s.json")
        obj = json.loads((tmp_path / "s.json").read_text())
        obj["anls_version"] = "0.0.0"
        (tmp_path / "s.json").write_text(json.dumps(obj))
        with pytest.raises(ValidationError):
            emit_plotdata(tmp_path / "s.json", "stability_map", tmp_path / "m.csv")

    def test_unknown_kind(self, tmp_path):
        with pytest.raises(ValidationError):
            emit_plotdata([], "heatmap", tmp_path / "x.csv")
