import csv

import numpy as np
import pytest

from acnn_kspace.cli import main
from acnn_kspace.config import ConfigError, read_config, write_config
from acnn_kspace.data import read_volume
from acnn_kspace.network.checkpoint import load_checkpoint, save_checkpoint
from acnn_kspace.sampling import read_mask

TRAIN = ["--widths", "4,8", "--bottleneck", "8", "--hidden", "4", "--epochs", "1", "--batch-size", "4"]


def run(*args):
    return main([str(a) for a in args])


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("data")
    assert run("--seed", 3, "--out", out, "gen-data", "--slices", 4, "--coils", 2, "--size", 16, "--count", 4) == 0
    return out


@pytest.fixture(scope="module")
def trained(tmp_path_factory, data_dir):
    out = tmp_path_factory.mktemp("train")
    assert run("--seed", 1, "--out", out, "train", "--data", data_dir, *TRAIN) == 0
    return out


def volumes(data_dir):
    return sorted(data_dir.glob("*.kspv"))


# ---------------------------------------------------------------- config files


def test_config_round_trip(tmp_path):
    path = tmp_path / "c.txt"
    write_config(path, {"lr_start": 1e-4, "widths": (4, 8), "mask": None}, header="x")
    assert read_config(path) == {"lr_start": "0.0001", "widths": "4,8", "mask": ""}


@pytest.mark.parametrize(
    "text, match",
    [("novalue\n", "key=value"), ("= 3\n", "empty key"), ("a = 1\na = 2\n", "duplicate")],
)
def test_config_errors(tmp_path, text, match):
    path = tmp_path / "c.txt"
    path.write_text(text)
    with pytest.raises(ConfigError, match=match):
        read_config(path)


def test_config_comments_and_dashes(tmp_path):
    path = tmp_path / "c.txt"
    path.write_text("# run\nlr-start = 1e-3  # fast\n\nepochs=2\n")
    assert read_config(path) == {"lr_start": "1e-3", "epochs": "2"}


# ---------------------------------------------------------------- verbs


def test_gen_data(data_dir):
    assert len(volumes(data_dir)) == 4
    vol = read_volume(volumes(data_dir)[0])
    assert vol.data.shape == (4, 2, 16, 16)
    assert (data_dir / "split.txt").exists()
    resolved = read_config(data_dir / "gen-data.config.txt")
    assert resolved["seed"] == "3" and resolved["size"] == "16" and resolved["command"] == "gen-data"


def test_gen_data_deterministic(tmp_path, data_dir):
    assert run("--seed", 3, "--out", tmp_path, "gen-data", "--slices", 4, "--coils", 2, "--size", 16, "--count", 4) == 0
    for a, b in zip(volumes(data_dir), sorted(tmp_path.glob("*.kspv"))):
        assert a.read_bytes() == b.read_bytes()


def test_make_mask(tmp_path):
    assert run("--out", tmp_path, "make-mask", "--size", 256, "--acceleration", 4) == 0
    mask = read_mask(tmp_path / "mask.msk")
    assert len(mask.lines) == 64 and mask.bits[:, 128].all()
    assert run("--out", tmp_path, "make-mask", "--kind", "radial", "--size", 32, "--spokes", 10) == 0
    traj = np.loadtxt(tmp_path / "trajectory.csv", delimiter=",", skiprows=1)
    assert traj.shape == (10 * 32, 2)


def test_train_outputs(trained):
    ckpt = load_checkpoint(trained / "model.ackp")
    assert ckpt.config.encoder_widths == (4, 8) and ckpt.seed == 1 and ckpt.epoch == 1
    rows = list(csv.DictReader(open(trained / "loss_curve.csv")))
    assert len(rows) == 1 and set(rows[0]) == {"epoch", "train", "validation"}
    assert (trained / "mask.msk").exists()
    assert read_config(trained / "train.config.txt")["widths"] == "4,8"


def test_train_deterministic(tmp_path, data_dir, trained):
    assert run("--seed", 1, "--out", tmp_path, "train", "--data", data_dir, *TRAIN) == 0
    assert (tmp_path / "loss_curve.csv").read_text() == (trained / "loss_curve.csv").read_text()


def test_config_file_and_flag_override(tmp_path, data_dir):
    cfg = tmp_path / "run.txt"
    cfg.write_text("seed = 5\nwidths = 4,8\nbottleneck = 8\nhidden = 4\nepochs = 3\nbatch-size = 4\n")
    out = tmp_path / "o"
    assert run("--config", cfg, "--out", out, "train", "--data", data_dir, "--epochs", 1) == 0
    resolved = read_config(out / "train.config.txt")
    assert resolved["epochs"] == "1" and resolved["seed"] == "5" and resolved["bottleneck"] == "8"
    assert load_checkpoint(out / "model.ackp").seed == 5


def test_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "run.txt"
    cfg.write_text("colour = red\n")
    assert run("--config", cfg, "make-mask") == 1
    err = capsys.readouterr().err.strip()
    assert err.startswith("error: bad config") and "\n" not in err


def test_reconstruct_zeroed_checkpoint_is_zero_filled(tmp_path, data_dir, trained):
    ckpt = load_checkpoint(trained / "model.ackp")
    model = ckpt.build()
    model.output.weight.data[...] = 0
    save_checkpoint(tmp_path / "zero.ackp", model)
    vol = volumes(data_dir)[0]
    args = ["--out", tmp_path, "reconstruct", "--checkpoint", tmp_path / "zero.ackp", "--volume", vol]
    assert run(*args, "--mask", trained / "mask.msk") == 0
    rec = read_volume(tmp_path / "recon.kspv").data
    zf = read_volume(tmp_path / "zero_filled.kspv").data
    assert rec.shape == (4, 1, 16, 16)
    np.testing.assert_allclose(rec, zf, atol=1e-5 * np.abs(zf).max())


def test_reconstruct_then_evaluate(tmp_path, data_dir, trained):
    vol = volumes(data_dir)[0]
    assert run("--out", tmp_path, "reconstruct", "--checkpoint", trained / "model.ackp", "--volume", vol,
               "--mask", trained / "mask.msk") == 0
    assert run("--out", tmp_path, "evaluate", "--truth", vol, "--method", f"zf={tmp_path / 'zero_filled.kspv'}",
               "--method", f"acnn={tmp_path / 'recon.kspv'}") == 0
    text = (tmp_path / "metrics.csv").read_text()
    assert "zf" in text and "acnn" in text


def test_reconstruct_coil_mismatch(tmp_path, trained, capsys):
    assert run("--out", tmp_path, "gen-data", "--slices", 4, "--coils", 3, "--size", 16, "--count", 1) == 0
    vol = sorted(tmp_path.glob("*.kspv"))[0]
    code = run("--out", tmp_path, "reconstruct", "--checkpoint", trained / "model.ackp", "--volume", vol,
               "--sampling", "none")
    assert code == 1
    assert capsys.readouterr().err.startswith("error: shape mismatch")


def test_viz_outputs(tmp_path, data_dir, trained):
    vol = volumes(data_dir)[0]
    ck = trained / "model.ackp"
    assert run("--out", tmp_path, "viz", "--what", "attention", "--checkpoint", ck, "--volume", vol,
               "--mask", trained / "mask.msk") == 0
    pngs = sorted(tmp_path.glob("attention_*.png"))
    assert len(pngs) == 4  # two encoder and two decoder blocks in the tiny model
    assert run("--out", tmp_path, "viz", "--what", "response", "--checkpoint", ck, "--volume", vol,
               "--mask", trained / "mask.msk") == 0
    rows = list(csv.DictReader(open(tmp_path / "response.csv")))
    assert len(rows) == 12 and max(float(r["response"]) for r in rows) == pytest.approx(1.0)
    assert run("--out", tmp_path, "viz", "--what", "loss", "--loss-curve", trained / "loss_curve.csv") == 0
    assert (tmp_path / "loss_curve.png").exists()
    assert run("--out", tmp_path, "viz", "--what", "difference", "--recon", vol, "--truth", vol) == 0
    assert len(list(tmp_path.glob("difference_*.png"))) == 4


def test_ablate(tmp_path, data_dir):
    assert run("--out", tmp_path, "ablate", "--data", data_dir, "--axis", "slices", "--values", "0,1", *TRAIN) == 0
    rows = list(csv.DictReader(open(tmp_path / "ablation.csv")))
    assert [r["setting"] for r in rows] == ["slices=0", "slices=1"]
    # two more slices x 2 coils x (re, im) input channels into a 4-wide 3x3 conv: 8 * 4 * 9 = 288
    assert int(rows[1]["params"]) - int(rows[0]["params"]) == 288
    assert float(rows[0]["delta_ssim"]) == 0.0
    assert (tmp_path / "metrics.csv").exists() and (tmp_path / "ablate.config.txt").exists()


# ---------------------------------------------------------------- errors


def test_usage_error_exit_code(capsys):
    assert run("nonsense-verb") == 2
    assert capsys.readouterr().err.startswith("error: usage:")


def test_missing_file(tmp_path, capsys):
    code = run("--out", tmp_path, "train", "--data", tmp_path / "absent", *TRAIN)
    assert code == 1
    err = capsys.readouterr().err.strip()
    assert err.startswith("error: ") and "\n" not in err


def test_bad_volume_file(tmp_path, trained, capsys):
    bad = tmp_path / "bad.kspv"
    bad.write_bytes(b"garbage")
    assert run("--out", tmp_path, "reconstruct", "--checkpoint", trained / "model.ackp", "--volume", bad) == 1
    assert capsys.readouterr().err.startswith("error: bad volume file")


def test_bad_checkpoint(tmp_path, data_dir, capsys):
    bad = tmp_path / "bad.ackp"
    bad.write_bytes(b"ACKP")
    assert run("--out", tmp_path, "reconstruct", "--checkpoint", bad, "--volume", volumes(data_dir)[0]) == 1
    assert capsys.readouterr().err.startswith("error: bad checkpoint")
