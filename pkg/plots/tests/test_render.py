import csv
import json
import os
import shutil

import pytest

from sykbattery_plots.render import (
    FigureRecipe,
    SchemaError,
    build_figure,
    discover_inputs,
    load_table,
    main,
    render,
)

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")


def vertical_line_positions(ax):
    positions = []
    for line in ax.lines:
        xdata = line.get_xdata()
        ydata = line.get_ydata()
        if len(xdata) == 2 and xdata[0] == xdata[1] and ydata[0] != ydata[1]:
            positions.append(float(xdata[0]))
    return positions


def read_p2_csv(name):
    with open(os.path.join(FIXTURES, name), newline="") as fh:
        rows = list(csv.DictReader(fh))
    return float(rows[0]["p2"])


@pytest.mark.parametrize("kind,count", [
    ("gap", 2), ("sff", 2), ("population", 1), ("energy", 2), ("efficiency", 1),
])
def test_every_kind_renders_from_fixtures(tmp_path, kind, count):
    inputs = discover_inputs(FIXTURES, kind)
    assert len(inputs) == count
    out = tmp_path / f"{kind}.png"
    rendered = render(FigureRecipe(kind=kind, inputs=inputs, output=str(out)))
    assert os.path.exists(rendered)
    assert out.stat().st_size > 0


def test_gap_markers_at_csv_reported_values():
    import matplotlib.pyplot as plt

    inputs = discover_inputs(FIXTURES, "gap")
    fig = build_figure(FigureRecipe(kind="gap", inputs=inputs, output="x.png"))
    try:
        markers = vertical_line_positions(fig.axes[0])
        for name in ("gap_ratio_N4_p2.csv", "gap_ratio_N6_p2.csv"):
            assert read_p2_csv(name) in markers
    finally:
        plt.close(fig)


def test_efficiency_marker_at_reported_value():
    import matplotlib.pyplot as plt

    inputs = discover_inputs(FIXTURES, "efficiency")
    fig = build_figure(FigureRecipe(kind="efficiency", inputs=inputs,
                                    output="x.png"))
    try:
        markers = vertical_line_positions(fig.axes[0])
        with open(os.path.join(FIXTURES, "efficiency_N4.sidecar.json")) as fh:
            expected = json.load(fh)["extra"]["p2"]
        assert expected in markers
    finally:
        plt.close(fig)


def test_schema_mismatch_names_offending_column(tmp_path):
    for name in os.listdir(FIXTURES):
        shutil.copy(os.path.join(FIXTURES, name), tmp_path / name)
    target = tmp_path / "efficiency_N4.csv"
    lines = target.read_text().splitlines()
    lines[0] = lines[0].replace("e_mean", "mean_e")
    target.write_text("\n".join(lines) + "\n")
    with pytest.raises(SchemaError) as err:
        load_table(str(target))
    assert "e_mean" in str(err.value)


def test_missing_sidecar_rejected(tmp_path):
    shutil.copy(os.path.join(FIXTURES, "efficiency_N4.csv"),
                tmp_path / "efficiency_N4.csv")
    with pytest.raises(SchemaError):
        load_table(str(tmp_path / "efficiency_N4.csv"))


def test_render_is_deterministic_and_read_only(tmp_path):
    inputs = discover_inputs(FIXTURES, "sff")
    before = {path: open(path, "rb").read() for path in inputs}
    out_a = tmp_path / "a.png"
    out_b = tmp_path / "b.png"
    render(FigureRecipe(kind="sff", inputs=inputs, output=str(out_a)))
    render(FigureRecipe(kind="sff", inputs=inputs, output=str(out_b)))
    assert out_a.read_bytes() == out_b.read_bytes()
    for path, blob in before.items():
        assert open(path, "rb").read() == blob


def test_cli_entrypoint(tmp_path):
    out = tmp_path / "gap.png"
    assert main(["--in", FIXTURES, "--out", str(out), "--kind", "gap"]) == 0
    assert out.exists()
    assert main(["--in", str(tmp_path), "--out", str(out), "--kind", "gap"]) == 2


def test_recipe_validation():
    with pytest.raises(ValueError):
        FigureRecipe(kind="bogus", inputs=["x.csv"], output="y.png")
    with pytest.raises(ValueError):
        FigureRecipe(kind="gap", inputs=[], output="y.png")
