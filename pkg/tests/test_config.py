import json

import pytest

from qhf.config import PRESETS, ConfigError, config_from_manifest, load_config, parse_config_text, preset

GOOD = """\
[model]
epsilon0 = 0.0
delta = 1.0           ; tunnelling
initial_state = 0 0 0.5

[bath.1]
alpha = 0.1
omega_c = 5
temperature = 1

[numerics]
chain_length = 6
local_dim = 4
t_max = 0.5

[output]
directory = somewhere
formats = csv
"""


def error_line(text):
    with pytest.raises(ConfigError) as err:
        parse_config_text(text, "run.ini")
    return err.value.line, str(err.value)


def test_parse_good_config():
    cfg = parse_config_text(GOOD, "run.ini")
    assert cfg.delta == 1.0 and cfg.initial_state == (0.0, 0.0, 0.5)
    assert cfg.baths[0].temperature == 1.0
    assert cfg.numerics.chain_length == 6 and cfg.numerics.local_dim == 4
    assert cfg.output.formats == ["csv"] and cfg.output.directory == "somewhere"
    assert cfg.bath_specs()[0].beta == 1.0


def test_resolved_records_defaults():
    r = parse_config_text(GOOD).resolved()
    assert r["numerics"]["dt"] == pytest.approx(0.002)
    assert r["numerics"]["max_bond"] == 64
    assert r["baths"][0]["domain_max"] == pytest.approx(50.0)


def test_manifest_round_trip():
    cfg = parse_config_text(GOOD)
    again = config_from_manifest(json.loads(json.dumps({"config": cfg.resolved()})))
    assert again.resolved() == cfg.resolved()


def test_missing_bath_is_reported_with_line():
    line, msg = error_line("[model]\nepsilon0 = 1\n\n[numerics]\nt_max = 1\n")
    assert line == 5 and "at least one bath" in msg and msg.startswith("run.ini:5:")


@pytest.mark.parametrize(
    "edit, line, fragment",
    [
        (("alpha = 0.1", "alpha = -0.1"), 7, "alpha"),
        (("omega_c = 5", "omega_c = five"), 8, "not a number"),
        (("local_dim = 4", "local_dim = 4\nbond = 3"), 14, "unknown key"),
        (("[output]", "[plots]"), 16, "unknown section"),
        (("initial_state = 0 0 0.5", "initial_state = 1 1 0"), 4, "Bloch"),
        (("formats = csv", "formats = csv png"), 18, "png"),
        (("t_max = 0.5", "t_max = 0"), 14, "t_max"),
    ],
)
def test_errors_point_at_the_line(edit, line, fragment):
    got, msg = error_line(GOOD.replace(*edit))
    assert got == line, msg
    assert fragment in msg


def test_bath_numbering():
    text = GOOD.replace("[bath.1]", "[bath.2]")
    _, msg = error_line(text)
    assert "numbered" in msg


def test_spectral_file(tmp_path):
    (tmp_path / "J.txt").write_text("0 0\n1 0.5\n2 0.3\n10 0\n")
    text = GOOD.replace("alpha = 0.1\nomega_c = 5", "spectral_file = J.txt")
    path = tmp_path / "run.ini"
    path.write_text(text)
    cfg = load_config(path)
    assert cfg.bath_specs()[0].spectral.kind == "tabulated"
    path.write_text(text.replace("J.txt", "missing.txt"))
    with pytest.raises(ConfigError):
        load_config(path)


def test_presets():
    assert set(PRESETS) == {"fig3", "fig4"}
    fig3, fig4 = preset("fig3"), preset("fig4")
    assert (fig3.epsilon0, fig3.delta, fig3.initial_state) == (1.0, 0.0, "plus_x")
    assert fig3.baths[0].omega_c == 5.0
    assert [b.temperature for b in fig4.baths] == [1.0, 0.0] and fig4.initial_state == "up_z"
    with pytest.raises(ConfigError):
        preset("fig9")
