import pytest
from hypothesis import given, settings, strategies as st

from largevar.config import RunConfig, format_config, load_config, parse_config
from largevar.errors import ConfigError

names = st.from_regex(r"[A-Za-z][A-Za-z0-9_]{0,8}", fullmatch=True)
levels = st.lists(st.floats(0, 1e3, allow_nan=False), min_size=1, max_size=4).map(tuple)


@st.composite
def configs(draw):
    mode = draw(st.sampled_from(["universal", "no_grouping", "segmentized"]))
    segs = ()
    if mode == "segmentized":
        segs = tuple(tuple(s) for s in draw(st.lists(st.lists(names, min_size=1, max_size=3), min_size=1, max_size=3)))
    return RunConfig(
        input=draw(names) + ".csv",
        variables=tuple(draw(st.lists(names, max_size=4))),
        transforms=tuple(draw(st.lists(st.sampled_from(["level", "diff", "log", "log-diff2"]), min_size=1, max_size=3))),
        standardize=draw(st.booleans()),
        mode=mode, segments=segs,
        P=tuple(draw(st.lists(st.integers(1, 30), min_size=1, max_size=4))),
        lam=draw(levels), gamma=draw(levels), eta=draw(levels), alpha=draw(levels),
        decay=draw(st.sampled_from(["power", "log", "exp"])),
        tolerance=draw(st.floats(1e-14, 1e-2)),
        horizons=tuple(draw(st.lists(st.integers(1, 24), min_size=1, max_size=4))),
        a_exponent=draw(st.floats(-2, 2)),
        seed=draw(st.integers(0, 2 ** 64 - 1)),
        threads=draw(st.integers(1, 8)),
        out=draw(names),
    )


@settings(max_examples=100, deadline=None)
@given(configs())
def test_round_trip(cfg):
    assert parse_config(format_config(cfg)) == cfg


def test_defaults_round_trip():
    assert parse_config(format_config(RunConfig())) == RunConfig()
    assert parse_config("") == RunConfig()


def test_parse_lists_segments_and_comments():
    cfg = parse_config("""# comment
input = data.csv
mode = segmentized
segments = a, b; c
P = 1, 4, 7
lam = 0.1, 1e-2
standardize = no
""")
    assert cfg.segments == (("a", "b"), ("c",))
    assert cfg.P == (1, 4, 7) and cfg.lam == (0.1, 0.01) and cfg.standardize is False


def test_unknown_key_names_file_and_line():
    with pytest.raises(ConfigError, match=r"run\.cfg:2: unknown key 'lamda'"):
        parse_config("mode = universal\nlamda = 0.1\n", "run.cfg")


def test_bad_value_names_file_and_line():
    with pytest.raises(ConfigError, match=r"run\.cfg:3: bad value for P"):
        parse_config("# x\nmode = universal\nP = two\n", "run.cfg")


def test_malformed_line_reports_its_line():
    with pytest.raises(ConfigError, match=r"\[line 2\]"):
        parse_config("mode = universal\njust words\n", "run.cfg")


@pytest.mark.parametrize("text", [
    "mode = grouped", "P = 0", "lam = -1", "horizons = 0", "a_scale = -0.01", "b_scale = 0",
    "objective = median", "trials = 0", "seed = -1", "mode = segmentized", "tolerance = 0",
    "magnitude_low = 0.6", "window_len = 1",
])
def test_validation_errors(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_overrides_ignore_none():
    cfg = RunConfig().with_overrides(out="x", seed=None, threads=3)
    assert cfg.out == "x" and cfg.seed == 0 and cfg.threads == 3
    with pytest.raises(ConfigError):
        RunConfig().with_overrides(threads=0)


def test_load_config_and_input_resolution(tmp_path):
    f = tmp_path / "c.cfg"
    f.write_text("input = d.csv\n")
    cfg = load_config(str(f))
    assert cfg.resolve_input(str(tmp_path)) == str(tmp_path / "d.csv")
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(str(tmp_path / "missing.cfg"))
    with pytest.raises(ConfigError):
        RunConfig().resolve_input()
