import json

import numpy as np
import pytest

from sensenoise.cli import build_parser, main
from sensenoise.fileio import read_fmap, read_map, read_pgm
from sensenoise.phantom import load_sensitivity

COMMON = [
    "--config", "--out", "--seed", "--formats", "--log-scale", "--workers",
    "--dims", "--coils", "--r", "--profile", "--smap",
    "--sigma2", "--rho", "--cov-csv", "--cov-csv-imag", "--cov-domain",
]
GOLDEN = {
    "gen-maps": [],
    "simulate": ["--phantom", "--value", "--noiseless", "--allow-singular"],
    "analyze": [],
    "exp1": ["--n", "--n-vars"],
    "exp-map": ["--n-iter", "--full"],
    "ca-demo": ["--n-iter", "--value"],
    "denoise-ca": ["--second-moment", "--variance"],
}


def test_flags_are_frozen():
    _, subs = build_parser()
    assert set(subs) == set(GOLDEN)
    for name, sub in subs.items():
        flags = {opt for a in sub._actions for opt in a.option_strings if opt.startswith("--")}
        assert flags == set(COMMON + GOLDEN[name] + ["--help"]), name


def test_help_lists_commands(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--help"])
    assert info.value.code == 0
    out = capsys.readouterr().out
    for name in GOLDEN:
        assert name in out


def test_analyze_orthogonal_scalar_covariance_is_flat(tmp_path):
    assert main(["analyze", "--profile", "orthogonal-phase", "--formats", "fmap,csv,pgm", "--out", str(tmp_path)]) == 0
    var = read_fmap(tmp_path / "variance.fmap")
    assert var.shape == (64, 64)
    assert var.max() - var.min() < 1e-10
    np.testing.assert_array_equal(read_map(tmp_path / "variance.csv"), var)
    read_pgm(tmp_path / "gfactor.pgm")
    summary = json.loads((tmp_path / "analyze.json").read_text())
    assert summary["singular_pixels"] == 0


def test_exp1_report(tmp_path, capsys):
    assert main(["exp1", "--rho", "0", "--n", "100000", "--seed", "7", "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "exp1.json").read_text())
    assert round(rep["theoretical"]["sigma1"], 4) == 1.0
    assert "theory 1.0000" in capsys.readouterr().out


def test_simulate_rejects_nondividing_r(tmp_path, capsys):
    assert main(["simulate", "--r", "3", "--out", str(tmp_path)]) == 2
    assert "must divide M_y" in capsys.readouterr().err


def test_simulate_noiseless_is_exact(tmp_path):
    assert main(["simulate", "--noiseless", "--phantom", "shepp-logan", "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "simulate.json").read_text())
    assert rep["relative_error"] < 1e-8
    assert read_fmap(tmp_path / "recon_magnitude.fmap").shape == (64, 64)


def test_singular_map_exits_1_with_coordinates(tmp_path, capsys):
    from sensenoise.phantom import SensitivityMap, save_sensitivity

    maps = np.ones((2, 8, 8), complex)
    save_sensitivity(tmp_path / "flat.smap", SensitivityMap(maps))
    assert main(["simulate", "--smap", str(tmp_path / "flat.smap"), "--out", str(tmp_path)]) == 1
    err = capsys.readouterr().err
    assert "singular" in err and "(0, 0)" in err
    assert main(["simulate", "--smap", str(tmp_path / "flat.smap"), "--allow-singular", "--out", str(tmp_path)]) == 0


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("n = 2000\nrho = 0.2\nseed = 11\nlog-scale = true\n")
    assert main(["exp1", "--config", str(cfg), "--seed", "12", "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "exp1.json").read_text())
    assert rep["config"]["n"] == 2000 and rep["config"]["rho"] == 0.2 and rep["config"]["seed"] == 12


def test_config_errors(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("bogus = 1\n")
    assert main(["exp1", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert main(["exp1", "--config", str(tmp_path / "missing.cfg"), "--out", str(tmp_path)]) == 2
    assert main(["analyze", "--cov-csv", str(tmp_path / "missing.csv"), "--out", str(tmp_path)]) == 2
    assert main(["analyze", "--rho", "1.5", "--out", str(tmp_path)]) == 2


def test_gen_maps_round_trip_and_reuse(tmp_path):
    assert main(["gen-maps", "--coils", "4", "--dims", "32x16", "--out", str(tmp_path)]) == 0
    sens = load_sensitivity(tmp_path / "maps.smap")
    assert sens.n_coils == 4 and sens.dims == (32, 16) and sens.normalized
    np.testing.assert_allclose(read_fmap(tmp_path / "coil0_magnitude.fmap"), np.abs(sens.maps[0]))
    out = tmp_path / "a"
    np.savetxt(tmp_path / "cov.csv", 3 * np.eye(4) + 0.5, delimiter=",")
    assert main(["analyze", "--smap", str(tmp_path / "maps.smap"), "--cov-csv", str(tmp_path / "cov.csv"),
                 "--out", str(out)]) == 0
    assert read_fmap(out / "variance.fmap").shape == (16, 32)


def test_kspace_covariance_domain(tmp_path):
    a, b = tmp_path / "x", tmp_path / "k"
    assert main(["analyze", "--sigma2", "1", "--out", str(a)]) == 0
    assert main(["analyze", "--sigma2", "4096", "--cov-domain", "kspace", "--out", str(b)]) == 0
    np.testing.assert_allclose(read_fmap(b / "variance.fmap"), read_fmap(a / "variance.fmap"), rtol=1e-12)


def test_denoise_ca_command(tmp_path):
    from sensenoise.fileio import write_fmap

    write_fmap(tmp_path / "m2.fmap", np.full((4, 4), 10.0))
    write_fmap(tmp_path / "var.fmap", np.full((4, 4), 3.0))
    assert main(["denoise-ca", "--second-moment", str(tmp_path / "m2.fmap"),
                 "--variance", str(tmp_path / "var.fmap"), "--out", str(tmp_path)]) == 0
    np.testing.assert_allclose(read_fmap(tmp_path / "ca_denoised.fmap"), 2.0)
    assert main(["denoise-ca", "--second-moment", str(tmp_path / "nope.fmap"),
                 "--variance", str(tmp_path / "var.fmap"), "--out", str(tmp_path)]) == 2


@pytest.mark.parametrize("command", [
    ["exp-map", "--n-iter", "200", "--dims", "16x16", "--coils", "4", "--rho", "0.1"],
    ["ca-demo", "--n-iter", "50", "--dims", "16x16", "--coils", "4"],
])
def test_reports_byte_identical_across_worker_counts(tmp_path, command):
    outs = []
    for workers in ("1", "4"):
        out = tmp_path / workers
        assert main(command + ["--seed", "3", "--workers", workers, "--formats", "fmap,pgm,csv", "--out", str(out)]) == 0
        outs.append(out)
    files = sorted(p.name for p in outs[0].iterdir())
    assert files == sorted(p.name for p in outs[1].iterdir())
    for name in files:
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes(), name
