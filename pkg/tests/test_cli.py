import json

import numpy as np
import pytest

from qhf.chain import ChainCoefficients
from qhf.cli import main
from qhf.mps import CompressionWarning

TINY = """\
[model]
epsilon0 = 0
delta = 1
initial_state = plus_x

[bath.1]
alpha = 0.1
omega_c = 5
temperature = {temperature}
domain_max = 30

[numerics]
chain_length = 6
local_dim = 4
max_bond = {max_bond}
dt = 0.02
t_max = 0.3
sample_stride = 5
n_max = 2

[output]
directory = {out}
checkpoint = {checkpoint}
"""


def write_config(tmp_path, name="run.ini", temperature=0, max_bond=8, checkpoint="false"):
    out = tmp_path / (name + ".out")
    path = tmp_path / name
    path.write_text(TINY.format(temperature=temperature, max_bond=max_bond, out=out, checkpoint=checkpoint))
    return path, out


def test_chain_laguerre_table(tmp_path):
    code = main(["chain", "--alpha", "0.5", "--omega-c", "1", "--length", "20", "--domain-max", "200",
                 "--out", str(tmp_path)])
    assert code == 0
    assert not (tmp_path / "chain_A.txt").exists()
    chain = ChainCoefficients.load(tmp_path / "chain_O.txt")
    n = np.arange(20)
    assert np.max(np.abs(chain.site_freqs - (2 * n + 2))) < 1e-8
    assert np.max(np.abs(chain.hoppings - np.sqrt((n[:-1] + 1) * (n[:-1] + 2)))) < 1e-8


def test_chain_finite_temperature_writes_two_files(tmp_path):
    assert main(["chain", "--temperature", "1", "--length", "5", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "chain_O.txt").exists() and (tmp_path / "chain_A.txt").exists()


def test_run_writes_artifacts_and_manifest_reproduces(tmp_path):
    path, out = write_config(tmp_path)
    assert main(["run", str(path)]) == 0
    for name in ("results.csv", "manifest.json", "mean.svg", "variance.svg", "fano.svg"):
        assert (out / name).exists(), name
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["ok"] and manifest["config"]["numerics"]["chain_length"] == 6
    assert set(manifest["versions"]) >= {"qhf", "numpy", "scipy"}
    again = tmp_path / "again"
    assert main(["run", str(out / "manifest.json"), "--out", str(again)]) == 0
    assert (again / "results.csv").read_bytes() == (out / "results.csv").read_bytes()


def test_svg_is_deterministic(tmp_path):
    path, out = write_config(tmp_path)
    main(["run", str(path)])
    first = (out / "mean.svg").read_bytes()
    main(["run", str(path)])
    assert (out / "mean.svg").read_bytes() == first


def test_resume_from_checkpoint(tmp_path):
    path, out = write_config(tmp_path, temperature=1, checkpoint="true")
    assert main(["run", str(path)]) == 0
    assert (out / "checkpoint_b0.npz").exists()
    ref = (out / "results.csv").read_bytes()
    assert main(["run", str(path), "--resume"]) == 0
    assert (out / "results.csv").read_bytes() == ref


def test_config_errors_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[model]\nepsilon0 = 1\n")
    assert main(["run", str(bad)]) == 2
    assert "bad.ini:2:" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "missing.ini")]) == 2


def test_strict_mode_escalates_compression_warnings(tmp_path):
    path, out = write_config(tmp_path, max_bond=2)
    # an entangling model with fourth moments outgrows the moment bond cap
    path.write_text(path.read_text().replace("epsilon0 = 0", "epsilon0 = 1").replace("n_max = 2", "n_max = 4")
                    .replace("alpha = 0.1", "alpha = 1.0"))
    with pytest.warns(CompressionWarning):
        assert main(["run", str(path)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["convergence"]["compression_warnings"]
    with pytest.warns(CompressionWarning):
        assert main(["run", str(path), "--strict"]) == 4


def test_sweep(tmp_path, monkeypatch):
    monkeypatch.setenv("QHF_THREADS", "2")
    a, out_a = write_config(tmp_path, "a.ini")
    b, out_b = write_config(tmp_path, "b.ini", temperature=1)
    assert main(["run", "--sweep", str(a), str(b)]) == 0
    assert (out_a / "results.csv").exists() and (out_b / "results.csv").exists()


def test_verify_chain_json(capsys):
    assert main(["verify", "--scope", "chain", "--json"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["passed"] and all(c["criterion"] == "6" for c in report["checks"])
