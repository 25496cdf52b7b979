"""Figure rendering from synthetic artifacts; no simulation code involved."""

import csv
import json
import math

import pytest

from slipfigures import FigureError, FigureSpec, render
from slipfigures.cli import main


def _write_region_csv(path, n=60, value_fn=lambda i, r, vy: r + vy):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["vertex_id", "r_m", "vy_m_s", "value"])
        for i in range(n):
            ang = 2.0 * math.pi * i / n
            rad = 0.08 * ((i % 5) + 1) / 5.0
            r = 0.95 + rad * math.cos(ang)
            vy = 1.2 * rad * math.sin(ang)
            v = value_fn(i, r, vy)
            w.writerow([i, repr(r), repr(vy), "" if v is None else repr(v)])
    return path


def _write_trajectory_csv(path, n=200):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t_s", "chart", "x_m", "y_m", "vx_m_s", "vy_m_s",
                    "front_foot_x_m", "back_foot_x_m", "event"])
        for i in range(n):
            t = 0.01 * i
            y = 0.95 + 0.05 * math.sin(8.0 * t)
            event = "section" if i % 50 == 25 else ""
            w.writerow([repr(t), "s", repr(t), repr(y), "1.0", "0.0", "0.0",
                        "", event])
    return path


@pytest.mark.parametrize("kind,cap", [("stability", 25.0),
                                      ("viability", 10.0),
                                      ("one-step", None)])
def test_region_kinds_render(tmp_path, kind, cap):
    src = _write_region_csv(tmp_path / "region.csv",
                            value_fn=lambda i, r, vy: None if i % 7 == 0 else i % 12)
    out = tmp_path / f"{kind}.png"
    render(FigureSpec(kind=kind, inputs=[src], out=out, cap=cap))
    assert out.exists() and out.stat().st_size > 1000


def test_transition_overlay_renders(tmp_path):
    window = _write_region_csv(tmp_path / "window.csv",
                               value_fn=lambda i, r, vy: i % 8)
    angles = _write_region_csv(tmp_path / "angles.csv",
                               value_fn=lambda i, r, vy: 70.0 if i % 3 == 0 else None)
    out = tmp_path / "overlay.png"
    render(FigureSpec(kind="transition-overlay", inputs=[window, angles],
                      out=out))
    assert out.exists() and out.stat().st_size > 1000


def test_trajectory_renders_with_plan_markers(tmp_path):
    traj = _write_trajectory_csv(tmp_path / "traj.csv")
    plan = tmp_path / "plan.json"
    plan.write_text(json.dumps({"transition_indices": [1, 2]}))
    out = tmp_path / "traj.png"
    render(FigureSpec(kind="trajectory", inputs=[traj], out=out,
                      extra={"plan": str(plan)}))
    assert out.exists() and out.stat().st_size > 1000


def test_empty_csv_is_a_clean_error(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("vertex_id,r_m,vy_m_s,value\n")
    out = tmp_path / "never.png"
    with pytest.raises(FigureError, match="no data rows"):
        render(FigureSpec(kind="stability", inputs=[empty], out=out))
    assert not out.exists()


def test_missing_columns_and_files_are_clean_errors(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n")
    with pytest.raises(FigureError, match="expected columns"):
        render(FigureSpec(kind="viability", inputs=[bad], out=tmp_path / "x.png"))
    with pytest.raises(FigureError, match="not found"):
        render(FigureSpec(kind="stability", inputs=[tmp_path / "nope.csv"],
                          out=tmp_path / "x.png"))


def test_overlay_requires_two_inputs(tmp_path):
    src = _write_region_csv(tmp_path / "one.csv")
    with pytest.raises(FigureError, match="two inputs"):
        render(FigureSpec(kind="transition-overlay", inputs=[src],
                          out=tmp_path / "x.png"))


def test_unknown_kind_rejected(tmp_path):
    with pytest.raises(FigureError, match="unknown figure kind"):
        FigureSpec(kind="pie", inputs=["x.csv"], out=tmp_path / "x.png")


def test_cli_exit_codes(tmp_path, capsys):
    src = _write_region_csv(tmp_path / "region.csv")
    out = tmp_path / "fig.png"
    assert main(["--kind", "stability", "--input", str(src),
                 "--out", str(out)]) == 0
    assert out.exists()
    assert main(["--kind", "stability", "--input", str(tmp_path / "nope.csv"),
                 "--out", str(tmp_path / "no.png")]) == 2
    err = capsys.readouterr().err
    assert "error:" in err
