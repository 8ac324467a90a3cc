import pytest

from pano_probe.errors import ValidationError
from pano_probe.probes import ProbeConfig, probe_textual, probe_visual
from pano_probe.report import boxplot_summary, format_raw_p, render_table
from pano_probe.stats import stability_bound


def test_boxplot_hand_example():
    s = boxplot_summary([1.0, 2.0, 3.0, 4.0], "unit")
    assert s.q1 == 1.75
    assert s.median == 2.5
    assert s.q3 == 3.25
    assert s.lower_fence == -0.5
    assert s.upper_fence == 5.5
    assert s.outliers == ()
    assert s.n == 4


def test_boxplot_constant_data():
    s = boxplot_summary([2.0] * 6, "const")
    assert s.q1 == s.median == s.q3 == 2.0
    assert s.lower_fence == s.upper_fence == 2.0
    assert s.outliers == ()


def test_boxplot_single_outlier():
    values = [1.0, 2.0, 3.0, 4.0]
    iqr = 3.25 - 1.75
    extreme = 3.25 + 10 * iqr
    s = boxplot_summary(values + [extreme], "outlier")
    assert len(s.outliers) == 1 and s.outliers[0] == extreme


def test_boxplot_outliers_sorted_ascending():
    values = list(range(20)) + [500.0, 300.0, 400.0]
    s = boxplot_summary(values, "many")
    assert list(s.outliers) == sorted(s.outliers)


def test_boxplot_upper_fence_matches_stability_bound():
    flips = [0.1, 0.4, 0.2, 0.9, 0.05, 0.3, 0.7]
    s = boxplot_summary(flips, "flip")
    assert s.upper_fence == stability_bound(flips).beta


def test_boxplot_empty_rejected():
    with pytest.raises(ValidationError):
        boxplot_summary([], "x")


def test_render_visual_table_has_beta_column(synthetic_dataset, frozen_store):
    report = probe_visual(synthetic_dataset, frozen_store, ProbeConfig())
    csv = render_table(report, "csv")
    lines = csv.strip().splitlines()
    assert lines[0].startswith("# columns: condition, beta, statistic,")
    assert lines[1] == "condition,beta,statistic,p_value,p_value_raw,decision"
    assert len(lines) == 2 + 7  # comment + header + one row per shift
    assert lines[2].startswith("shift:128,")


def test_render_textual_table(synthetic_dataset, textual_store):
    report = probe_textual(synthetic_dataset, textual_store, ProbeConfig())
    csv = render_table(report, "csv")
    lines = csv.strip().splitlines()
    assert lines[1] == "condition,statistic,p_value,p_value_raw,decision"
    assert len(lines) == 2 + 4


def test_render_markdown_and_csv_share_numeric_fields(synthetic_dataset, frozen_store):
    report = probe_visual(synthetic_dataset, frozen_store, ProbeConfig())
    csv_rows = render_table(report, "csv").strip().splitlines()[2:]
    md_rows = render_table(report, "markdown").strip().splitlines()[2:]
    for csv_row, md_row in zip(csv_rows, md_rows):
        csv_cells = csv_row.split(",")
        md_cells = [c.strip() for c in md_row.strip("|").split("|")]
        # markdown omits only the raw-p column
        assert md_cells[:4] == csv_cells[:4]
        assert md_cells[4] == csv_cells[5]


def test_render_p_value_display_clamp(synthetic_dataset, frozen_store):
    report = probe_visual(synthetic_dataset, frozen_store, ProbeConfig())
    csv = render_table(report, "csv")
    reject_row = next(
        line for line in csv.splitlines() if line.startswith("shift:128,")
    )
    cells = reject_row.split(",")
    assert cells[3] == "0"  # display-clamped
    assert float(cells[4]) < 1e-4  # raw value preserved
    fail_row = next(
        line for line in csv.splitlines() if line.startswith("shift:512,")
    )
    assert fail_row.split(",")[3] == "1.0000"


def test_render_statistics_formatting(synthetic_dataset, frozen_store):
    report = probe_visual(synthetic_dataset, frozen_store, ProbeConfig())
    csv = render_table(report, "csv")
    for line in csv.strip().splitlines()[2:]:
        stat = line.split(",")[2]
        assert stat == "0" or stat.isdigit() or stat.endswith(".5")


def test_render_deterministic(synthetic_dataset, frozen_store):
    report = probe_visual(synthetic_dataset, frozen_store, ProbeConfig())
    assert render_table(report, "csv") == render_table(report, "csv")
    assert render_table(report, "markdown") == render_table(report, "markdown")


def test_render_unknown_format():
    with pytest.raises(ValidationError):
        render_table(None, "html")


def test_format_raw_p_round_trips():
    for p in (0.125, 3.9e-310, 1.0, 0.9999999999999999):
        assert float(format_raw_p(p)) == p
