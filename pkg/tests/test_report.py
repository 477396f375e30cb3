from aeroadapt.report import prediction_chart_svg, write_prediction_charts


def test_chart_deterministic():
    actual = [10.0, 20.0, 15.0]
    predicted = [12.0, 18.0, 14.0]
    a = prediction_chart_svg(actual, predicted, "pm25")
    b = prediction_chart_svg(actual, predicted, "pm25")
    assert a == b


def test_chart_has_both_series_and_legend():
    svg = prediction_chart_svg([0.0, 1.0], [1.0, 0.0], "pm10")
    assert svg.count("<polyline") == 2
    assert "#1f77b4" in svg and "#d62728" in svg
    assert ">actual<" in svg and ">predicted<" in svg


def test_chart_axis_labels_show_range():
    svg = prediction_chart_svg([5.0, 50.0], [10.0, 40.0], "no2")
    assert ">50.0<" in svg
    assert ">5.0<" in svg


def test_constant_series_does_not_divide_by_zero():
    svg = prediction_chart_svg([7.0, 7.0], [7.0, 7.0], "flat")
    assert "nan" not in svg.lower()


def test_write_one_file_per_target(tmp_path):
    per_target = {"pm25": ([1.0, 2.0], [1.5, 1.5]),
                  "no2": ([3.0, 4.0], [3.0, 4.0])}
    written = write_prediction_charts(tmp_path, per_target, horizon=4)
    assert sorted(p.name for p in written) == \
        ["predictions_no2_h4.svg", "predictions_pm25_h4.svg"]
    for path in written:
        assert path.read_text().startswith("<svg")
