import pytest

import svg_plot


def test_line_plot_draws_series_and_dashed_references():
    text = svg_plot.line_plot({"6q noisy runs": [70.0, 75.0, 72.5]},
                              references={"6q noiseless": 80.0, "6q majority": 77.5},
                              title="Noise", x_label="run", y_label="accuracy")
    assert text.startswith("<svg")
    assert text.count("<polyline") == 1
    assert text.count('stroke-dasharray="6 4"') == 2
    for label in ("6q noisy runs", "6q noiseless", "6q majority"):
        assert label in text


def test_line_plot_errors():
    with pytest.raises(ValueError, match="Nothing to plot"):
        svg_plot.line_plot({})
    with pytest.raises(ValueError, match="Empty y range"):
        svg_plot.line_plot({"a": [1.0]}, y_range=(5.0, 5.0))


def test_log_plot_skips_non_positive_values(tmp_path):
    path = svg_plot.write_log_plot(tmp_path / "plots" / "spectrum.svg", {"4q": [3.0, 1.0, 0.0, -1e-9]},
                                   title="Spectrum")
    text = path.read_text()
    assert "1e0" in text
    with pytest.raises(ValueError, match="log axis"):
        svg_plot.log_line_plot({"4q": [0.0, -1.0]})
