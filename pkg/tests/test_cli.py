"""Command-line interface: exit codes, file outputs, and reproducibility."""

import re
import subprocess
import sys

import numpy as np
import pytest
from PIL import Image

from haat.cli import run
from haat.imaging import ImageBuffer, save_image
from haat.weights import load_weights


def write_png(path, seed, h, w):
    rng = np.random.default_rng(seed)
    samples = rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8)
    save_image(ImageBuffer.from_array(samples), str(path))
    return path


@pytest.fixture(scope="module")
def toy_weights(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "toy.haatw"
    assert run(["init-weights", "--seed", "0", "--out", str(path)]) == 0
    return path


# --- init-weights ----------------------------------------------------------


def test_init_weights_writes_file(tmp_path, capsys):
    out = tmp_path / "w.haatw"
    assert run(["init-weights", "--out", str(out)]) == 0
    assert out.exists() and out.stat().st_size > 0
    err = capsys.readouterr().err
    assert re.search(r"wrote \d+ tensors \(\d+ parameters\) to ", err)


def test_init_weights_seed_reproducible(tmp_path):
    a, b, c = (tmp_path / name for name in ("a.haatw", "b.haatw", "c.haatw"))
    assert run(["init-weights", "--seed", "3", "--out", str(a)]) == 0
    assert run(["init-weights", "--seed", "3", "--out", str(b)]) == 0
    assert run(["init-weights", "--seed", "4", "--out", str(c)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert a.read_bytes() != c.read_bytes()


def test_init_weights_custom_config_file(tmp_path):
    cfg_file = tmp_path / "small.cfg"
    cfg_file.write_text("channels = 8\nstl_growth = 4  # narrow stages\nscale = 3\n")
    out = tmp_path / "small.haatw"
    assert run(["init-weights", "--config", str(cfg_file), "--out", str(out)]) == 0
    _, cfg = load_weights(str(out))
    assert cfg.channels == 8 and cfg.stl_growth == 4 and cfg.scale == 3


def test_init_weights_missing_config_file(tmp_path, capsys):
    rc = run(["init-weights", "--config", str(tmp_path / "nope.cfg"),
              "--out", str(tmp_path / "w.haatw")])
    assert rc == 2
    assert capsys.readouterr().err.startswith("error:")


def test_init_weights_unknown_config_key(tmp_path, capsys):
    cfg_file = tmp_path / "bad.cfg"
    cfg_file.write_text("window_sides = 4\n")
    rc = run(["init-weights", "--config", str(cfg_file), "--out", str(tmp_path / "w")])
    assert rc == 2
    assert "unknown config key" in capsys.readouterr().err


def test_init_weights_invalid_config_value(tmp_path, capsys):
    cfg_file = tmp_path / "bad.cfg"
    cfg_file.write_text("channels = 6\n")  # must be a multiple of 4
    rc = run(["init-weights", "--config", str(cfg_file), "--out", str(tmp_path / "w")])
    assert rc == 2
    assert "channels" in capsys.readouterr().err


def test_negative_seed_is_a_usage_error(tmp_path):
    with pytest.raises(SystemExit) as info:
        run(["init-weights", "--seed", "-1", "--out", str(tmp_path / "w")])
    assert info.value.code == 2


# --- upscale ---------------------------------------------------------------


def test_upscale_scales_and_is_deterministic(tmp_path, toy_weights, capsys):
    src = write_png(tmp_path / "in.png", seed=1, h=9, w=12)
    out1, out2 = tmp_path / "out1.png", tmp_path / "out2.png"
    for out in (out1, out2):
        assert run(["upscale", "--weights", str(toy_weights),
                    "--in", str(src), "--out", str(out)]) == 0
    assert Image.open(out1).size == (24, 18)
    assert out1.read_bytes() == out2.read_bytes()
    assert "wrote 24x18 image to" in capsys.readouterr().err


def test_upscale_missing_input_image(tmp_path, toy_weights, capsys):
    rc = run(["upscale", "--weights", str(toy_weights),
              "--in", str(tmp_path / "nope.png"), "--out", str(tmp_path / "o.png")])
    assert rc == 1
    assert capsys.readouterr().err.startswith("error:")


def test_upscale_corrupt_weight_file(tmp_path, capsys):
    bad = tmp_path / "bad.haatw"
    bad.write_bytes(b"not a weight file at all")
    src = write_png(tmp_path / "in.png", seed=2, h=8, w=8)
    rc = run(["upscale", "--weights", str(bad),
              "--in", str(src), "--out", str(tmp_path / "o.png")])
    assert rc == 1
    assert capsys.readouterr().err.startswith("error:")


# --- benchmark -------------------------------------------------------------


def test_benchmark_table_and_csv(tmp_path, toy_weights, capsys):
    hr_dir = tmp_path / "hr"
    hr_dir.mkdir()
    write_png(hr_dir / "alpha.png", seed=10, h=16, w=20)
    write_png(hr_dir / "beta.png", seed=11, h=13, w=17)  # odd size, forces modcrop
    csv_path = tmp_path / "scores.csv"
    rc = run(["benchmark", "--weights", str(toy_weights),
              "--hr-dir", str(hr_dir), "--csv", str(csv_path)])
    assert rc == 0
    table = capsys.readouterr().out
    assert "alpha.png" in table and "beta.png" in table and "AGGREGATE" in table
    lines = csv_path.read_text().splitlines()
    assert lines[0] == "name,psnr_db,ssim"
    assert len(lines) == 4  # header, two images, aggregate
    assert lines[-1].startswith("AGGREGATE,")


def test_benchmark_scale_flag_must_match_weights(tmp_path, toy_weights, capsys):
    hr_dir = tmp_path / "hr"
    hr_dir.mkdir()
    write_png(hr_dir / "a.png", seed=12, h=16, w=16)
    rc = run(["benchmark", "--weights", str(toy_weights),
              "--hr-dir", str(hr_dir), "--scale", "3"])
    assert rc == 1
    err = capsys.readouterr().err
    assert "scale 2" in err and "3" in err


def test_benchmark_empty_folder(tmp_path, toy_weights, capsys):
    hr_dir = tmp_path / "empty"
    hr_dir.mkdir()
    rc = run(["benchmark", "--weights", str(toy_weights), "--hr-dir", str(hr_dir)])
    assert rc == 1
    assert capsys.readouterr().err.startswith("error:")


def test_benchmark_missing_folder(tmp_path, toy_weights):
    rc = run(["benchmark", "--weights", str(toy_weights),
              "--hr-dir", str(tmp_path / "nowhere")])
    assert rc == 1


# --- gradcheck -------------------------------------------------------------


def test_gradcheck_primitives_all_pass(capsys):
    assert run(["gradcheck", "--level", "primitives"]) == 0
    lines = [ln for ln in capsys.readouterr().out.splitlines() if ln.strip()]
    assert lines
    assert all(" PASS " in ln for ln in lines)


def test_gradcheck_rejects_unknown_level():
    with pytest.raises(SystemExit) as info:
        run(["gradcheck", "--level", "everything"])
    assert info.value.code == 2


# --- train-toy -------------------------------------------------------------


def test_train_toy_zero_steps_keeps_seed_weights(tmp_path, capsys):
    trained = tmp_path / "trained.haatw"
    fresh = tmp_path / "fresh.haatw"
    assert run(["train-toy", "--steps", "0", "--seed", "5",
                "--out-weights", str(trained)]) == 0
    assert "steps=0 (weights left at their seed initialization)" in capsys.readouterr().out
    assert run(["init-weights", "--seed", "5", "--out", str(fresh)]) == 0
    assert trained.read_bytes() == fresh.read_bytes()


def test_train_toy_reports_and_writes_curve(tmp_path, capsys):
    curve_path = tmp_path / "curve.csv"
    assert run(["train-toy", "--steps", "3", "--curve-csv", str(curve_path)]) == 0
    out = capsys.readouterr().out
    assert re.search(r"steps=3 initial=\d+\.\d{6} final=\d+\.\d{6} ratio=\d+\.\d{4}", out)
    lines = curve_path.read_text().splitlines()
    assert lines[0] == "step,loss"
    assert len(lines) == 4
    assert all(re.fullmatch(r"\d+,\d+\.\d{8}", ln) for ln in lines[1:])


def test_train_toy_accepts_hr_image(tmp_path):
    src = write_png(tmp_path / "patch.png", seed=20, h=7, w=10)  # modcrops to 6x10
    assert run(["train-toy", "--steps", "2", "--hr", str(src)]) == 0


def test_train_toy_missing_hr_image(tmp_path, capsys):
    rc = run(["train-toy", "--steps", "1", "--hr", str(tmp_path / "nope.png")])
    assert rc == 1
    assert capsys.readouterr().err.startswith("error:")


# --- parser plumbing -------------------------------------------------------


def test_no_subcommand_is_a_usage_error():
    with pytest.raises(SystemExit) as info:
        run([])
    assert info.value.code == 2


def test_module_entry_point_help():
    proc = subprocess.run([sys.executable, "-m", "haat", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    for name in ("init-weights", "upscale", "benchmark", "gradcheck", "train-toy"):
        assert name in proc.stdout
