import csv
import json
import shutil

import numpy as np
import pytest

from gea.cli import main
from gea.io import load_image, save_image
from gea.serialize import read_json
from gea.synthetic import degraded_pair, misaligned_pair, textured_image


def write_pair(root, pid, low, gt, ext=".png"):
    (root / "low").mkdir(parents=True, exist_ok=True)
    (root / "high").mkdir(parents=True, exist_ok=True)
    if ext == ".npy":
        np.save(root / "low" / f"{pid}.npy", low)
        np.save(root / "high" / f"{pid}.npy", gt)
    else:
        save_image(root / "low" / f"{pid}{ext}", low)
        save_image(root / "high" / f"{pid}{ext}", gt)


def parse_output(text):
    out = {}
    for line in text.splitlines():
        if ": " in line:
            k, v = line.split(": ", 1)
            out[k] = v
    return out


@pytest.fixture
def pair_png(tmp_path):
    low, gt, _ = degraded_pair((40, 48), seed=3, noise=0.01)
    save_image(tmp_path / "low.png", low)
    save_image(tmp_path / "gt.png", gt)
    return tmp_path / "low.png", tmp_path / "gt.png"


# --- fit ----------------------------------------------------------------------

def test_fit_identity_pair(tmp_path, capsys):
    img = textured_image((24, 24), seed=1)
    save_image(tmp_path / "a.png", img)
    assert main(["fit", str(tmp_path / "a.png"), str(tmp_path / "a.png"),
                 "-o", str(tmp_path / "m.json")]) == 0
    m = json.loads((tmp_path / "m.json").read_text())
    assert m["family"] == "affine12"
    assert np.allclose(np.reshape(m["a"], (3, 3)), np.eye(3), atol=1e-9)
    assert np.allclose(m["b"], 0, atol=1e-9)
    out = parse_output(capsys.readouterr().out)
    assert float(out["fit_residual"]) < 1e-20
    assert out["diagonal_dominant"] == "true"


def test_fit_gain_bias_exact_and_scalar_worse(tmp_path, capsys):
    low = textured_image((24, 24), seed=2)
    np.save(tmp_path / "low.npy", low)
    np.save(tmp_path / "gt.npy", 2 * low + 0.05)
    args = [str(tmp_path / "low.npy"), str(tmp_path / "gt.npy")]
    assert main(["fit", *args, "-o", str(tmp_path / "m.json")]) == 0
    r_affine = float(parse_output(capsys.readouterr().out)["fit_residual"])
    m = json.loads((tmp_path / "m.json").read_text())
    assert np.allclose(np.reshape(m["a"], (3, 3)), 2 * np.eye(3), atol=1e-9)
    assert np.allclose(m["b"], 0.05, atol=1e-9)
    assert main(["fit", *args, "--family", "scalar", "-o", str(tmp_path / "s.json")]) == 0
    r_scalar = float(parse_output(capsys.readouterr().out)["fit_residual"])
    assert r_scalar > r_affine


def test_fit_errors(tmp_path):
    save_image(tmp_path / "a.png", np.zeros((8, 8, 3)))
    save_image(tmp_path / "b.png", np.zeros((8, 9, 3)))
    save_image(tmp_path / "c.png", textured_image((8, 8), seed=0))
    assert main(["fit", str(tmp_path / "a.png"), str(tmp_path / "b.png"),
                 "-o", str(tmp_path / "m.json")]) == 2
    assert main(["fit", str(tmp_path / "a.png"), str(tmp_path / "c.png"),
                 "-o", str(tmp_path / "m.json")]) == 3
    assert main(["fit", str(tmp_path / "missing.png"), str(tmp_path / "c.png"),
                 "-o", str(tmp_path / "m.json")]) == 2
    with pytest.raises(SystemExit) as err:
        main(["fit", "only-one-arg"])
    assert err.value.code == 1
    with pytest.raises(SystemExit) as err:
        main(["fit", "a", "b", "-o", "m.json", "--family", "homography"])
    assert err.value.code == 1


@pytest.mark.parametrize("cmd", ["fit", "apply", "analyze", "register", "benchmark"])
def test_help(cmd, capsys):
    with pytest.raises(SystemExit) as err:
        main([cmd, "--help"])
    assert err.value.code == 0
    assert "usage" in capsys.readouterr().out


# --- apply --------------------------------------------------------------------

def _write_matrix(path, a, b):
    path.write_text(json.dumps({"family": "affine12", "a": np.ravel(a).tolist(), "b": list(b)}))


def test_apply_identity_round_trip(tmp_path, pair_png):
    low, _ = pair_png
    _write_matrix(tmp_path / "id.json", np.eye(3), [0, 0, 0])
    assert main(["apply", str(low), str(tmp_path / "id.json"), "-o", str(tmp_path / "o.png")]) == 0
    assert np.array_equal(load_image(tmp_path / "o.png"), load_image(low))


def test_apply_gain(tmp_path):
    save_image(tmp_path / "g.png", np.full((4, 4, 3), 64 / 255))
    _write_matrix(tmp_path / "m.json", 2 * np.eye(3), [0, 0, 0])
    assert main(["apply", str(tmp_path / "g.png"), str(tmp_path / "m.json"),
                 "-o", str(tmp_path / "o.png")]) == 0
    assert np.allclose(load_image(tmp_path / "o.png"), 128 / 255)


def test_apply_warns_about_clipping(tmp_path, caplog, capsys):
    img = np.zeros((4, 5, 3))
    img[0, :2] = 0.6
    img[1, 0, 1] = 0.9
    save_image(tmp_path / "g.png", img)
    _write_matrix(tmp_path / "m.json", 2 * np.eye(3), [0, 0, 0])
    expect = int(np.count_nonzero(np.any(2 * load_image(tmp_path / "g.png") > 1, axis=-1)))
    assert main(["apply", str(tmp_path / "g.png"), str(tmp_path / "m.json"),
                 "-o", str(tmp_path / "o.png")]) == 0
    assert f"{expect} pixels out of range" in caplog.text
    assert parse_output(capsys.readouterr().out)["out_of_range_pixels"] == str(expect)
    assert load_image(tmp_path / "o.png").max() == 1.0
    assert main(["apply", str(tmp_path / "g.png"), str(tmp_path / "m.json"),
                 "-o", str(tmp_path / "o.npy")]) == 0
    assert np.load(tmp_path / "o.npy").max() > 1.0


def test_apply_bad_matrix(tmp_path, pair_png):
    (tmp_path / "bad.json").write_text('{"family": "affine12", "a": [1, 2]}')
    assert main(["apply", str(pair_png[0]), str(tmp_path / "bad.json"),
                 "-o", str(tmp_path / "o.png")]) == 2
    (tmp_path / "bad2.json").write_text("{not json")
    assert main(["apply", str(pair_png[0]), str(tmp_path / "bad2.json"),
                 "-o", str(tmp_path / "o.png")]) == 2


# --- analyze --------------------------------------------------------------------

def test_analyze_identical_pair(tmp_path, pair_png):
    low, _ = pair_png
    assert main(["analyze", str(low), str(low), "-o", str(tmp_path / "r.json")]) == 0
    r = read_json(tmp_path / "r.json")
    for key in ("energy_pre", "energy_post"):
        assert r[key]["e_lum"] == r[key]["e_chr"] == r[key]["e_tex"] == 0
    assert r["luminance_error_ratio"] == 1.0
    assert r["score_post"]["psnr_db"] == float("inf")


def test_analyze_gain4(tmp_path):
    gt = textured_image((48, 48), seed=11)
    np.save(tmp_path / "low.npy", gt / 4)
    np.save(tmp_path / "gt.npy", gt)
    assert main(["analyze", str(tmp_path / "low.npy"), str(tmp_path / "gt.npy"),
                 "-o", str(tmp_path / "r.json")]) == 0
    r = read_json(tmp_path / "r.json")
    assert r["energy_post"]["f_lum"] < r["energy_pre"]["f_lum"]
    assert r["luminance_error_ratio"] > 100
    assert set(r) >= {"matrix", "histogram_pre", "histogram_post", "score_pre", "score_post"}
    assert sum(r["histogram_pre"]["counts"]) == 48 * 48
    assert r["config"]["color_convention"].startswith("BT.601")


def test_analyze_noise_dominated_by_texture(tmp_path):
    rng = np.random.default_rng(0)
    low, gt, _ = degraded_pair((64, 64), seed=12)
    np.save(tmp_path / "low.npy", low)
    np.save(tmp_path / "gt.npy", gt + rng.normal(0, 0.02, gt.shape))
    assert main(["analyze", str(tmp_path / "low.npy"), str(tmp_path / "gt.npy"),
                 "-o", str(tmp_path / "r.json")]) == 0
    post = read_json(tmp_path / "r.json")["energy_post"]
    assert post["f_tex"] > max(post["f_lum"], post["f_chr"])
    assert post["f_tex"] > 0.5


def test_analyze_degenerate(tmp_path, caplog):
    np.save(tmp_path / "flat.npy", np.full((16, 16, 3), 0.2))
    np.save(tmp_path / "gt.npy", textured_image((16, 16), seed=0))
    assert main(["analyze", str(tmp_path / "flat.npy"), str(tmp_path / "gt.npy"),
                 "-o", str(tmp_path / "r.json")]) == 3
    assert "--family" in caplog.text


# --- register -------------------------------------------------------------------

def test_register_aligned(tmp_path, capsys):
    img = textured_image((100, 100), seed=4)
    np.save(tmp_path / "a.npy", img)
    assert main(["register", str(tmp_path / "a.npy"), str(tmp_path / "a.npy"),
                 str(tmp_path / "out")]) == 0
    out = parse_output(capsys.readouterr().out)
    assert out["crop"] == "4 4 92 92"
    side = read_json(tmp_path / "out" / "warp.json")
    assert side["crop"] == {"row0": 4, "col0": 4, "rows": 92, "cols": 92}
    assert np.allclose(np.reshape(side["warp"]["p"], (2, 3)), np.eye(2, 3), atol=1e-6)
    assert side["converged"] is True
    assert load_image(tmp_path / "out" / "low.png").shape == (92, 92, 3)


def test_register_shift(tmp_path):
    p = np.array([[1.0, 0.0, 3.0], [0.0, 1.0, 0.0]])
    low, gt = misaligned_pair((96, 96), p, seed=7, channels=3)
    np.save(tmp_path / "low.npy", low * 0.3)
    np.save(tmp_path / "gt.npy", gt)
    assert main(["register", str(tmp_path / "low.npy"), str(tmp_path / "gt.npy"),
                 str(tmp_path / "out"), "--margin", "2"]) == 0
    side = read_json(tmp_path / "out" / "warp.json")
    assert np.max(np.abs(np.reshape(side["warp"]["p"], (2, 3))[:, 2] - p[:, 2])) <= 0.1


def test_register_not_converged_still_writes(tmp_path):
    p = np.array([[1.0, 0.0, 3.0], [0.0, 1.0, 0.0]])
    low, gt = misaligned_pair((64, 64), p, seed=7)
    np.save(tmp_path / "low.npy", low)
    np.save(tmp_path / "gt.npy", gt)
    code = main(["register", str(tmp_path / "low.npy"), str(tmp_path / "gt.npy"),
                 str(tmp_path / "out"), "--max-iters", "1", "--eps", "1e-300"])
    assert code == 3
    assert read_json(tmp_path / "out" / "warp.json")["converged"] is False


# --- benchmark ------------------------------------------------------------------

def make_dataset(root, n=5, ext=".png", shift=None):
    for k in range(n):
        if shift is None:
            low, gt, _ = degraded_pair((40, 40), seed=100 + k, noise=0.005)
        else:
            gt = textured_image((64, 64), seed=200 + k)
            low_full, gt = misaligned_pair((64, 64), shift, seed=200 + k, channels=3)
            low = 0.25 * low_full + 0.02
        write_pair(root, f"p{k:02d}", low, np.clip(gt, 0, 1), ext)


def test_benchmark_family_nesting(tmp_path):
    make_dataset(tmp_path / "ds", 5)
    rep = tmp_path / "r.json"
    assert main(["benchmark", str(tmp_path / "ds"), "-o", str(rep), "--threads", "1",
                 "--families", "affine12,linear9,diagbias,scalar"]) == 0
    report = read_json(rep)
    assert report["counts"] == {"discovered": 5, "rows": 5, "skipped": 0}
    assert [r["id"] for r in report["rows"]] == [f"p{k:02d}" for k in range(5)]
    for row in report["rows"]:
        fams = row["families"]
        r12 = fams["affine12"]["fit_residual"]
        assert all(r12 <= fams[f]["fit_residual"] for f in ("linear9", "diagbias", "scalar"))
        assert fams["affine12"]["score"]["psnr_db"] >= row["score_pre"]["psnr_db"]
    with open(tmp_path / "r.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 5 and "families.affine12.fit_residual" in rows[0]


def test_benchmark_skips_and_counts(tmp_path, caplog):
    ds = tmp_path / "ds"
    make_dataset(ds, 3)
    save_image(ds / "low" / "orphan.png", np.zeros((8, 8, 3)))
    (ds / "low" / "broken.png").write_bytes(b"garbage")
    save_image(ds / "high" / "broken.png", np.zeros((8, 8, 3)))
    save_image(ds / "low" / "p00.jpg", np.zeros((8, 8, 3)))
    rep = tmp_path / "r.json"
    assert main(["benchmark", str(ds), "-o", str(rep), "--threads", "2"]) == 0
    report = read_json(rep)
    c = report["counts"]
    assert c["rows"] == 3 and c["skipped"] == 3
    assert c["rows"] + c["skipped"] == c["discovered"]
    assert {s["id"] for s in report["skipped"]} == {"orphan", "broken", "p00"}
    assert "skipping pair" in caplog.text


def test_benchmark_no_pairs(tmp_path):
    (tmp_path / "empty" / "low").mkdir(parents=True)
    assert main(["benchmark", str(tmp_path / "empty"), "-o", str(tmp_path / "r.json")]) == 2


def test_benchmark_manifest(tmp_path):
    ds = tmp_path / "ds"
    make_dataset(ds, 2)
    shutil.move(str(ds / "low"), str(ds / "dark"))
    (ds / "manifest.csv").write_text(
        "id,low,gt\nfirst,dark/p00.png,high/p00.png\nsecond,dark/p01.png,high/p01.png\n")
    assert main(["benchmark", str(ds), "-o", str(tmp_path / "r.json"), "--threads", "1"]) == 0
    assert [r["id"] for r in read_json(tmp_path / "r.json")["rows"]] == ["first", "second"]


def test_benchmark_aggregates_recomputable(tmp_path):
    from gea.benchmark import compute_aggregates
    from gea.serialize import dumps, loads
    make_dataset(tmp_path / "ds", 4)
    rep = tmp_path / "r.json"
    assert main(["benchmark", str(tmp_path / "ds"), "-o", str(rep), "--threads", "1",
                 "--families", "affine12,scalar"]) == 0
    report = loads(rep.read_text())
    assert dumps(compute_aggregates(report["rows"])) == dumps(report["aggregates"])


def test_benchmark_threads_env(tmp_path, monkeypatch):
    make_dataset(tmp_path / "ds", 2)
    monkeypatch.setenv("GEA_THREADS", "2")
    assert main(["benchmark", str(tmp_path / "ds"), "-o", str(tmp_path / "a.json")]) == 0
    monkeypatch.setenv("GEA_THREADS", "zero")
    assert main(["benchmark", str(tmp_path / "ds"), "-o", str(tmp_path / "b.json")]) == 1


def test_benchmark_register_improves_psnr(tmp_path):
    shift = np.array([[1.0, 0.0, 2.5], [0.0, 1.0, -1.5]])
    make_dataset(tmp_path / "ds", 3, ext=".npy", shift=shift)
    common = [str(tmp_path / "ds"), "--threads", "1"]
    assert main(["benchmark", *common, "-o", str(tmp_path / "plain.json")]) == 0
    assert main(["benchmark", *common, "-o", str(tmp_path / "reg.json"), "--register"]) == 0

    def mean_psnr(path):
        return read_json(path)["aggregates"]["columns"]["families.affine12.score.psnr_db"]["mean"]

    reg = read_json(tmp_path / "reg.json")
    assert all("registration" in r for r in reg["rows"])
    assert mean_psnr(tmp_path / "reg.json") > mean_psnr(tmp_path / "plain.json")
