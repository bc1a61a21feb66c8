import numpy as np
import pytest

from uavbc import cli
from uavbc_figures.render import (FigureSpec, RenderError, main, read_table,
                                  render, trajectory_polyline)


@pytest.fixture(scope="session")
def desk_run(tmp_path_factory):
    """Artifacts from one full desk-profile fly-scheme optimization."""
    root = tmp_path_factory.mktemp("deskrun")
    assert cli.main(["gen-scenario", "--seed", "0",
                     "--out-dir", str(root)]) == 0
    assert cli.main(["optimize", "--scenario", str(root / "scenario.json"),
                     "--scheme", "fly", "--out-dir", str(root)]) == 0
    return root


@pytest.fixture(scope="session")
def sweep_table(tmp_path_factory):
    """A sweep.csv produced by the CLI on a small scenario."""
    root = tmp_path_factory.mktemp("sweeprun")
    assert cli.main(["gen-scenario", "--seed", "2", "--out-dir", str(root),
                     "--set", "M=1", "--set", "K=2", "--set", "num_slots=12",
                     "--set", "qbar=8", "--set", "ebar=1e-5"]) == 0
    assert cli.main(["sweep", "--scenario", str(root / "scenario.json"),
                     "--param", "qbar", "--values", "8",
                     "--out-dir", str(root)]) == 0
    return root / "sweep.csv"


def test_all_five_kinds_render(desk_run, sweep_table, tmp_path):
    specs = [
        FigureSpec("trajectory", [str(desk_run / "trajectory.csv"),
                                  str(desk_run / "scenario.json")],
                   str(tmp_path / "trajectory.png")),
        FigureSpec("sweep", [str(sweep_table)], str(tmp_path / "sweep.png")),
        FigureSpec("allocation", [str(desk_run / "schedule.csv")],
                   str(tmp_path / "allocation.png")),
        FigureSpec("timeline", [str(desk_run / "trajectory.csv")],
                   str(tmp_path / "timeline.png")),
        FigureSpec("convergence", [str(desk_run / "convergence.csv")],
                   str(tmp_path / "convergence.png")),
    ]
    for spec in specs:
        path = render(spec)
        assert path == spec.output
        assert (tmp_path / f"{spec.kind}.png").stat().st_size > 0


def test_trajectory_polyline_is_closed(desk_run):
    table = read_table(str(desk_run / "trajectory.csv"))
    poly = trajectory_polyline(table)
    assert poly.shape == (len(table["slot"]) + 1, 2)
    assert np.array_equal(poly[0], poly[-1])


def test_hover_allocation_uses_time_bars(tmp_path):
    table = tmp_path / "power.csv"
    table.write_text("slot,hover_time_s,leg_m,ce_power_w,rate_bits_per_hz\n"
                     "1,4.5,10.0,3.0,8.0\n2,6.5,12.0,3.0,8.0\n")
    out = tmp_path / "alloc.png"
    render(FigureSpec("allocation", [str(table)], str(out)))
    assert out.stat().st_size > 0


def test_identical_inputs_identical_bytes(desk_run, tmp_path):
    a, b = tmp_path / "a.png", tmp_path / "b.png"
    for out in (a, b):
        render(FigureSpec("convergence", [str(desk_run / "convergence.csv")],
                          str(out), title="convergence"))
    assert a.read_bytes() == b.read_bytes()


def test_empty_table_errors_and_writes_nothing(tmp_path):
    table = tmp_path / "trajectory.csv"
    table.write_text("slot,x_m,y_m,speed_mps,propulsion_power_w,"
                     "scheduled,active_ce_power_w\n")
    out = tmp_path / "fig.png"
    with pytest.raises(RenderError, match="no data rows"):
        render(FigureSpec("trajectory", [str(table)], str(out)))
    assert not out.exists()
    assert not list(tmp_path.glob("*.tmp"))


def test_missing_column_names_the_column(tmp_path):
    table = tmp_path / "trajectory.csv"
    table.write_text("slot,x_m\n1,0.0\n")
    out = tmp_path / "fig.png"
    with pytest.raises(RenderError, match="y_m"):
        render(FigureSpec("trajectory", [str(table)], str(out)))
    assert not out.exists()


def test_missing_file_errors(tmp_path):
    with pytest.raises(RenderError, match="not found"):
        render(FigureSpec("timeline", [str(tmp_path / "nope.csv")],
                          str(tmp_path / "fig.png")))


def test_unknown_kind_rejected(tmp_path):
    with pytest.raises(RenderError, match="unknown figure kind"):
        FigureSpec("pie", ["x.csv"], str(tmp_path / "fig.png"))


def test_cli_render_round_trip(tmp_path, capsys):
    table = tmp_path / "convergence.csv"
    table.write_text("index,iteration,block,ee\n0,0,init,0.5\n1,1,power,0.6\n")
    out = tmp_path / "fig.png"
    rc = main(["render", "--kind", "convergence", "--in", str(table),
               "--out", str(out), "--title", "demo"])
    assert rc == 0
    assert str(out) in capsys.readouterr().out
    assert out.stat().st_size > 0


def test_cli_reports_input_errors(tmp_path, capsys):
    rc = main(["render", "--kind", "sweep", "--in",
               str(tmp_path / "missing.csv"), "--out",
               str(tmp_path / "fig.png")])
    assert rc == 2
    assert "error:" in capsys.readouterr().err
