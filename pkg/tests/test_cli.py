import json

import numpy as np
from click.testing import CliRunner

from lagmix.cli import main


def test_gen_detect_round_trip(tmp_path):
    runner = CliRunner()
    img_path = tmp_path / "scene.pgm"
    res = runner.invoke(main, ["gen", "r1", "--out", str(img_path)])
    assert res.exit_code == 0, res.output
    truth = json.loads((tmp_path / "scene.truth.json").read_text())
    assert truth["schema"] == "lagmix-truth/1"
    assert len(truth["components"]) == 1

    out_path = tmp_path / "det.json"
    overlay_path = tmp_path / "ov.png"
    res = runner.invoke(
        main,
        ["detect", str(img_path), "--out", str(out_path), "--overlay", str(overlay_path)],
    )
    assert res.exit_code == 0, res.output
    det = json.loads(out_path.read_text())
    assert det["schema"] == "lagmix-detect/1"
    assert det["m"] == 1
    assert det["converged"] is True
    comp = det["components"][0]
    want = truth["components"][0]
    assert abs(comp["rho"] - want["rho"]) <= 0.1
    assert abs(comp["width"] - want["width"]) <= 0.5
    assert overlay_path.exists()


def test_detect_manual_init_em_bs(tmp_path):
    runner = CliRunner()
    img_path = tmp_path / "scene.pgm"
    assert runner.invoke(main, ["gen", "r1", "--out", str(img_path)]).exit_code == 0
    out_path = tmp_path / "det.json"
    res = runner.invoke(
        main,
        [
            "detect", str(img_path), "--algo", "em-bs", "--init", "manual",
            "--angles", "90", "--rho", "250", "--out", str(out_path),
        ],
    )
    assert res.exit_code == 0, res.output
    det = json.loads(out_path.read_text())
    assert det["algorithm"] == "em-bs"
    assert det["nu"] == 2.0
    assert abs(det["components"][0]["rho"] - 299.0) <= 0.5


def test_detect_is_deterministic(tmp_path):
    runner = CliRunner()
    img_path = tmp_path / "scene.pgm"
    assert runner.invoke(main, ["gen", "r3", "--sigma-n", "50", "--kappa", "3",
                                "--seed", "5", "--out", str(img_path)]).exit_code == 0
    outs = []
    for name in ("a.json", "b.json"):
        p = tmp_path / name
        res = runner.invoke(
            main,
            ["detect", str(img_path), "--init", "random", "--m", "3",
             "--seed", "9", "--out", str(p)],
        )
        assert res.exit_code == 0, res.output
        det = json.loads(p.read_text())
        det.pop("runtime_s")
        det.pop("image")
        outs.append(det)
    assert outs[0] == outs[1]


def test_missing_image_exits_2(tmp_path):
    res = CliRunner().invoke(main, ["detect", str(tmp_path / "nope.pgm")])
    assert res.exit_code == 2


def test_empty_image_exits_2(tmp_path):
    img_path = tmp_path / "zero.npy"
    np.save(img_path, np.zeros((32, 32)))
    res = CliRunner().invoke(main, ["detect", str(img_path)])
    assert res.exit_code == 2


def test_manual_without_angles_exits_3(tmp_path):
    runner = CliRunner()
    img_path = tmp_path / "scene.pgm"
    assert runner.invoke(main, ["gen", "r1", "--out", str(img_path)]).exit_code == 0
    res = runner.invoke(main, ["detect", str(img_path), "--init", "manual"])
    assert res.exit_code == 3
    res = runner.invoke(main, ["detect", str(img_path), "--init", "random"])
    assert res.exit_code == 3
    res = runner.invoke(
        main, ["detect", str(img_path), "--init", "manual", "--angles", "90,45", "--rho", "5"]
    )
    assert res.exit_code == 3


def test_flat_image_exits_4(tmp_path):
    """A structureless constant image fails ridge detection."""
    img_path = tmp_path / "flat.npy"
    np.save(img_path, np.full((32, 32), 7.0))
    res = CliRunner().invoke(main, ["detect", str(img_path)])
    assert res.exit_code == 4


def test_gen_unclamped_requires_npy(tmp_path):
    res = CliRunner().invoke(
        main,
        ["gen", "r1", "--sigma-n", "50", "--no-clamp", "--out", str(tmp_path / "x.pgm")],
    )
    assert res.exit_code == 3


def test_bench_unknown_suite_rejected():
    res = CliRunner().invoke(main, ["bench", "r9"])
    assert res.exit_code == 2  # click usage error for a bad choice
