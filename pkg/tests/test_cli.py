import json
from pathlib import Path

import numpy as np
import pytest

from empirical_oracle import oracle_scene
from shoalmap.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, main
from shoalmap.scene import read_raster, write_raster, write_scene
from shoalmap.soundings import write_soundings

BANDS = "412,443,490,510,560,620,665,709"


def _cfg(tmp_path, extra=""):
    p = tmp_path / "run.cfg"
    p.write_text("radius = 0\nn_types = 1\nY = 1.2\n" + extra)
    return str(p)


def _synth(tmp_path, name, *more):
    out = str(tmp_path / f"{name}.bin")
    assert main(["synth", out, "--bands", BANDS, *more]) == EXIT_OK
    return out


def test_help_exits_zero(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["invert", "--help"])
    assert exc.value.code == 0
    assert "usage" in capsys.readouterr().out


def test_usage_errors(capsys):
    assert main([]) == EXIT_USAGE
    assert main(["invert"]) == EXIT_USAGE
    assert main(["invert", "x.bin", "--out", "y.bin", "--bogus"]) == EXIT_USAGE
    assert "usage" in capsys.readouterr().err


def test_missing_input_is_data_error(tmp_path):
    assert main(["invert", str(tmp_path / "nope.bin"), "--out", str(tmp_path / "o.bin")]) == EXIT_DATA


def test_bad_config_is_usage_error(tmp_path):
    scene = _synth(tmp_path, "s", "--width", "2", "--height", "2", "--depth", "5")
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = blue\n")
    assert main(["invert", scene, "--out", str(tmp_path / "o.bin"), "--config", str(cfg)]) == EXIT_USAGE


def test_synth_invert_round_trip(tmp_path):
    scene = _synth(tmp_path, "ramp", "--width", "6", "--height", "2", "--depth", "2,14")
    assert Path(scene.replace(".bin", "_truth.bin")).exists()
    out = str(tmp_path / "inv.bin")
    assert main(["invert", scene, "--out", out, "--config", _cfg(tmp_path)]) == EXIT_OK
    data, bands, _ = read_raster(out)
    H = data[list(bands.names).index("H")]
    truth, tb, _ = read_raster(scene.replace(".bin", "_truth.bin"))
    np.testing.assert_allclose(H, truth[0], atol=0.05)
    rep = json.loads(Path(out).with_suffix(".report.json").read_text())
    assert rep["diagnostics"]["pixels"] == 12


def test_deterministic_sequential_no_lut(tmp_path):
    scene = _synth(tmp_path, "d", "--width", "3", "--height", "3", "--depth", "3,9",
                   "--noise", "1e-5", "--seed", "3")
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}.bin"
        assert main(["invert", scene, "--out", str(out), "--config", _cfg(tmp_path),
                     "--sequential", "--no-lut", "--seed", "7"]) == EXIT_OK
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_unmix_and_exhaustive(tmp_path):
    scene = _synth(tmp_path, "u", "--width", "2", "--height", "2", "--depth", "3")
    inv = str(tmp_path / "inv.bin")
    cfg = _cfg(tmp_path)
    assert main(["invert", scene, "--out", inv, "--config", cfg]) == EXIT_OK
    out = str(tmp_path / "bottom.bin")
    assert main(["unmix", inv, scene, "--out", out, "--config", cfg]) == EXIT_OK
    data, bands, _ = read_raster(out)
    np.testing.assert_allclose(data[0], 0.4, rtol=0.05)
    ex = str(tmp_path / "ex.bin")
    assert main(["unmix", inv, scene, "--out", ex, "--config", cfg, "--exhaustive"]) == EXIT_OK
    legend = json.loads(Path(ex).with_suffix(".legend.json").read_text())
    assert ["sand"] in legend.values()


def test_fit_empirical_and_report(tmp_path, capsys):
    sc, stats, snd, H = oracle_scene()
    scene = tmp_path / "emp.bin"
    write_scene(scene, sc)
    # an explicit deep mask: one extra column at r_inf
    from shoalmap.forward import subsurface_to_surface
    from empirical_oracle import R_INF
    data = np.concatenate([sc.data, np.tile(subsurface_to_surface(R_INF, 0.0)[:, None, None],
                                            (1, sc.height, 1)).astype(np.float32)], axis=2)
    sc2 = type(sc)(data, sc.bands, sc.metadata)
    write_scene(scene, sc2)
    mask = np.zeros(sc2.shape)
    mask[:, -1] = 1
    write_raster(tmp_path / "mask.bin", mask)
    write_soundings(tmp_path / "s.csv", snd)
    out = tmp_path / "emp_depth.bin"
    assert main(["fit-empirical", str(scene), "--soundings", str(tmp_path / "s.csv"),
                 "--deep-mask", str(tmp_path / "mask.bin"), "--out", str(out)]) == EXIT_OK
    Hp = read_raster(out)[0][0][:, :-1]
    assert np.sqrt(np.mean(((Hp - H) / H) ** 2)) < 1e-3
    assert main(["report", str(out), "--soundings", str(tmp_path / "s.csv"),
                 "--json", str(tmp_path / "r.json")]) == EXIT_OK
    assert "MAE" in capsys.readouterr().out
    assert json.loads((tmp_path / "r.json").read_text())["mae_m"] < 0.05


def test_depth_error_command(tmp_path):
    scene = _synth(tmp_path, "e", "--width", "2", "--height", "1", "--depth", "4")
    out = tmp_path / "sigma.bin"
    assert main(["depth-error", scene, "--noise", "0", "--trials", "2", "--out", str(out),
                 "--config", _cfg(tmp_path)]) == EXIT_OK
    np.testing.assert_array_equal(read_raster(out)[0], 0.0)
    assert main(["depth-error", scene, "--noise", "1,2", "--out", str(out),
                 "--config", _cfg(tmp_path)]) == EXIT_USAGE


def test_pipeline_fifteen_combinations(tmp_path):
    scenes = [_synth(tmp_path, f"p{i}", "--width", "2", "--height", "2", "--depth", "4,6",
                     "--sun-elevation", str(50 + 3 * i), "--scene-id", f"p{i}") for i in range(4)]
    man = tmp_path / "manifest.json"
    man.write_text(json.dumps({"scenes": [Path(s).name for s in scenes], "output": "out",
                               "config": "run.cfg", "unmix": True}))
    _cfg(tmp_path)
    assert main(["pipeline", str(man), "--sequential"]) == EXIT_OK
    out = tmp_path / "out"
    combos = sorted((out / "combinations").glob("*.bin"))
    assert len(combos) == 15
    assert (out / "depth_median.bin").exists() and (out / "bottom.bin").exists()
    rep = json.loads((out / "report.json").read_text())
    assert len(rep["stages"]["combinations"]) == 15
    H = read_raster(out / "depth_median.bin")[0][0]
    np.testing.assert_allclose(H, [[4.0, 6.0], [4.0, 6.0]], atol=0.1)
