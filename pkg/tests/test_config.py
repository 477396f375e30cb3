import pytest

from aeroadapt.config import (get_bool, get_float, get_int, get_int_list,
                              get_str, load_config, parse_config_text)


def test_basic_parse():
    cfg = parse_config_text("a = 1\nb=hello\n\n# comment\nc = 2.5\n")
    assert cfg == {"a": "1", "b": "hello", "c": "2.5"}


def test_missing_equals_reports_line():
    with pytest.raises(ValueError, match="line 2"):
        parse_config_text("a = 1\nbroken line\n")


def test_load_none_gives_empty():
    assert load_config(None) == {}


def test_load_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("max_epochs = 3\n")
    assert load_config(path) == {"max_epochs": "3"}


def test_typed_getters():
    cfg = {"n": "7", "rate": "0.25", "flag": "true", "name": "x"}
    assert get_int(cfg, "n", 0) == 7
    assert get_int(cfg, "missing", 9) == 9
    assert get_float(cfg, "rate", 0.0) == 0.25
    assert get_bool(cfg, "flag", False) is True
    assert get_bool(cfg, "missing", True) is True
    assert get_str(cfg, "name") == "x"


def test_bool_rejects_garbage():
    with pytest.raises(ValueError, match="boolean"):
        get_bool({"flag": "maybe"}, "flag", False)


def test_int_list_formats():
    assert get_int_list({"h": "64, 32"}, "h", []) == [64, 32]
    assert get_int_list({"h": "8 4 2"}, "h", []) == [8, 4, 2]
    assert get_int_list({}, "h", [64]) == [64]
