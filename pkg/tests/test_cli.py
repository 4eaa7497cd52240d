import csv
import json
import re

import numpy as np
import pytest

from mfsgl import cli, data_io, solver
from mfsgl.errors import ConvergenceFailure


def run(argv, capsys=None):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr().out if capsys is not None else ""
    return code, out


def write_config(path, **doc):
    path.write_text(json.dumps(doc))
    return path


@pytest.fixture
def moons(tmp_path):
    out = tmp_path / "moons"
    assert cli.main(["synth", "two-moon", "--variant", "pure", "--n", "100", "--seed", "7",
                     "--out", str(out)]) == 0
    return out / "manifest.json"


@pytest.fixture
def planted_small(tmp_path):
    out = tmp_path / "planted"
    assert cli.main(["synth", "planted", "--n", "45", "--informative", "3", "3",
                     "--noise", "4", "4", "--seed", "2", "--out", str(out)]) == 0
    return out / "manifest.json"


def strip_timings(doc):
    return {k: v for k, v in doc.items() if k != "timings"}


# ---- synth

def test_synth_two_moon(moons, tmp_path, capsys):
    ds = data_io.load_dataset(moons)
    assert ds.n == 200 and ds.V == 2
    assert (moons.parent / "scatter_view0.txt").is_file()
    code, out = run(["synth", "two-moon", "--variant", "noisy", "--out", tmp_path / "nz"], capsys)
    assert code == 0 and out.strip().endswith("manifest.json")
    doc = json.loads((tmp_path / "nz" / "manifest.json").read_text())
    assert len(doc["views"]) == 3
    assert doc["generator"]["noise_view_distribution"] == "isotropic gaussian"


def test_synth_byte_identical(tmp_path):
    for d in ("a", "b"):
        assert cli.main(["synth", "two-moon", "--variant", "noisy", "--seed", "3",
                         "--out", str(tmp_path / d)]) == 0
    for f in ("view0.csv", "view1.csv", "view2.csv", "labels.csv", "manifest.json",
              "scatter_view2.txt"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_synth_bad_flags(tmp_path):
    assert cli.main(["synth", "two-moon", "--n", "1", "--out", str(tmp_path / "x")]) == 2
    with pytest.raises(SystemExit) as err:
        cli.main(["synth", "two-moon", "--variant", "bent", "--out", str(tmp_path)])
    assert err.value.code == 2


def test_synth_io_failure(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert cli.main(["synth", "two-moon", "--out", str(blocker / "sub")]) == 1


# ---- fit

def test_fit_pure_two_moon(moons, tmp_path, capsys):
    cfg = write_config(tmp_path / "cfg.json", dataset=str(moons), solver={"m": "full"},
                       output=str(tmp_path / "run"))
    code, out = run(["fit", cfg], capsys)
    assert code == 0
    report = json.loads((tmp_path / "run" / "report.json").read_text())
    assert report["final"]["component_count"] == 2
    assert set(report["timings"]) >= {"projection", "similarity", "spectral", "weights"}
    for name in ("ranking.csv", "graph.txt", "W_view0.txt", "W_view1.txt", "F.txt"):
        assert (tmp_path / "run" / name).is_file()
    it = report["iterations"][0]
    assert set(it) >= {"objective", "lambda", "mu", "component_count", "alpha"}


def test_fit_rejects_max_outer_zero(moons, tmp_path):
    cfg = write_config(tmp_path / "bad.json", dataset=str(moons), solver={"max_outer": 0},
                       output=str(tmp_path / "o"))
    assert cli.main(["fit", str(cfg)]) == 2


def test_fit_config_errors(moons, tmp_path):
    assert cli.main(["fit", str(tmp_path / "absent.json")]) == 1
    (tmp_path / "broken.json").write_text("{")
    assert cli.main(["fit", str(tmp_path / "broken.json")]) == 2
    cfg = write_config(tmp_path / "u.json", dataset=str(moons), solver={"bogus": 1})
    assert cli.main(["fit", str(cfg), "--out", str(tmp_path / "o")]) == 2
    cfg = write_config(tmp_path / "m.json", dataset=str(tmp_path / "none.json"))
    assert cli.main(["fit", str(cfg), "--out", str(tmp_path / "o")]) == 1
    cfg = write_config(tmp_path / "k.json", dataset=str(moons), solver={"k": 199})
    assert cli.main(["fit", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_fit_deterministic(planted_small, tmp_path):
    cfg = write_config(tmp_path / "cfg.json", dataset=str(planted_small),
                       solver={"c": 3, "k": 6}, select=[3])
    for d in ("r1", "r2"):
        assert cli.main(["fit", str(cfg), "--out", str(tmp_path / d)]) == 0
    assert (tmp_path / "r1" / "ranking.csv").read_bytes() == (tmp_path / "r2" / "ranking.csv").read_bytes()
    a = json.loads((tmp_path / "r1" / "report.json").read_text())
    b = json.loads((tmp_path / "r2" / "report.json").read_text())
    assert strip_timings(a) == strip_timings(b)


def test_fit_nonconvergence_exit_zero(planted_small, tmp_path):
    cfg = write_config(tmp_path / "cfg.json", dataset=str(planted_small),
                       solver={"c": 3, "k": 6, "max_outer": 1})
    assert cli.main(["fit", str(cfg), "--out", str(tmp_path / "r")]) == 0
    report = json.loads((tmp_path / "r" / "report.json").read_text())
    assert report["status"] == "max_outer_reached" and report["converged"] is False


# ---- select

def _fit(planted_small, tmp_path):
    cfg = write_config(tmp_path / "cfg.json", dataset=str(planted_small), solver={"c": 3, "k": 6})
    assert cli.main(["fit", str(cfg), "--out", str(tmp_path / "run")]) == 0
    return tmp_path / "run" / "ranking.csv"


def test_select_through_files(planted_small, tmp_path):
    ranking = _fit(planted_small, tmp_path)
    raw = data_io.load_dataset(planted_small)
    total = sum(raw.dims)
    assert cli.main(["select", "--ranking", str(ranking), "--s", str(total),
                     "--dataset", str(planted_small), "--out", str(tmp_path / "all")]) == 0
    back = data_io.load_dataset(tmp_path / "all" / "manifest.json")
    assert all(np.array_equal(a, b) for a, b in zip(back.views, raw.views))
    with pytest.warns(UserWarning):
        assert cli.main(["select", "--ranking", str(ranking), "--s", "1",
                         "--dataset", str(planted_small), "--out", str(tmp_path / "one")]) == 0
    one = data_io.load_dataset(tmp_path / "one" / "manifest.json")
    top = solver.load_ranking(ranking)[0]
    assert one.dims == [1] and np.array_equal(one.views[0][0], raw.views[top.view][top.feature])
    # the side file lists the chosen features in rank order
    assert cli.main(["select", "--ranking", str(ranking), "--s", "5",
                     "--dataset", str(planted_small), "--out", str(tmp_path / "five")]) == 0
    rows = (tmp_path / "five" / "selected_features.csv").read_text().splitlines()[1:]
    picked = [tuple(map(int, r.split(",")[1:])) for r in rows]
    assert picked == [(e.view, e.feature) for e in solver.load_ranking(ranking)[:5]]


def test_select_out_of_range(planted_small, tmp_path):
    ranking = _fit(planted_small, tmp_path)
    for s in ("0", "1000"):
        assert cli.main(["select", "--ranking", str(ranking), "--s", s,
                         "--dataset", str(planted_small), "--out", str(tmp_path / "x")]) == 2


def test_select_inconsistent_ranking(planted_small, moons, tmp_path):
    ranking = _fit(planted_small, tmp_path)
    assert cli.main(["select", "--ranking", str(ranking), "--s", "1",
                     "--dataset", str(moons), "--out", str(tmp_path / "x")]) == 2


# ---- eval

def _labels_as_data(tmp_path):
    y = np.repeat([0, 1, 2], 10)
    ds = data_io.MultiViewDataset([y[None, :].astype(float)], y)
    return data_io.save_dataset(ds, tmp_path / "lab")


def test_eval_trivial_embedding(tmp_path, capsys):
    m = _labels_as_data(tmp_path)
    code, out = run(["eval", "--dataset", m, "--restarts", "3", "--seed", "4"], capsys)
    assert code == 0
    assert re.fullmatch(r"acc=1\.000000 nmi=1\.000000 seed=4 restarts=3", out.strip())


def test_eval_single_cluster_exit3(tmp_path):
    m = _labels_as_data(tmp_path)
    assert cli.main(["eval", "--dataset", str(m), "--c", "1"]) == 3


def test_eval_missing_labels(tmp_path):
    ds = data_io.MultiViewDataset([np.arange(6.0)[None, :]])
    m = data_io.save_dataset(ds, tmp_path / "nolab")
    assert cli.main(["eval", "--dataset", str(m)]) == 2


def test_eval_deterministic_and_report(moons, tmp_path, capsys):
    _, a = run(["eval", "--dataset", moons, "--seed", "5"], capsys)
    rep = tmp_path / "rep.json"
    _, b = run(["eval", "--dataset", moons, "--seed", "5", "--report", rep], capsys)
    assert a == b
    doc = json.loads(rep.read_text())
    assert len(doc["evaluations"]) == 1 and doc["evaluations"][0]["seed"] == 5


# ---- sweep

def _sweep_config(tmp_path, dataset, grid, **extra):
    return write_config(tmp_path / "sweep.json", dataset=str(dataset), solver={"c": 3},
                        grid=grid, eval={"restarts": 3, "seed": 0}, **extra)


def _rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_sweep_grid_count(planted_small, tmp_path):
    grid = {"k": [5, 10, 15], "gamma": [10.0 ** e for e in range(-2, 5)], "s": [4, 8]}
    cfg = _sweep_config(tmp_path, planted_small, grid, workers=2)
    assert cli.main(["sweep", str(cfg), "--out", str(tmp_path / "sw")]) == 0
    text = (tmp_path / "sw" / "sweep.csv").read_text()
    assert text.splitlines()[0] == "k,gamma,s,acc,nmi,status"
    assert len(_rows(tmp_path / "sw" / "sweep.csv")) == 42
    assert json.loads((tmp_path / "sw" / "sweep_summary.json").read_text())["best"] is not None


def test_sweep_single_cell_equivalence(planted_small, tmp_path, capsys):
    cfg = _sweep_config(tmp_path, planted_small, {"k": [6], "gamma": [1.0], "s": [4]})
    assert cli.main(["sweep", str(cfg), "--out", str(tmp_path / "sw")]) == 0
    row = _rows(tmp_path / "sw" / "sweep.csv")[0]

    fit_cfg = write_config(tmp_path / "fit.json", dataset=str(planted_small),
                           solver={"c": 3, "k": 6, "gamma": 1.0}, select=[4],
                           eval={"restarts": 3, "seed": 0})
    assert cli.main(["fit", str(fit_cfg), "--out", str(tmp_path / "run")]) == 0
    report = json.loads((tmp_path / "run" / "report.json").read_text())
    assert report["evaluation"][0]["acc"] == float(row["acc"])
    assert report["evaluation"][0]["nmi"] == float(row["nmi"])

    assert cli.main(["select", "--ranking", str(tmp_path / "run" / "ranking.csv"), "--s", "4",
                     "--dataset", str(planted_small), "--out", str(tmp_path / "sel")]) == 0
    capsys.readouterr()
    code, out = run(["eval", "--dataset", tmp_path / "sel" / "manifest.json", "--c", "3",
                     "--restarts", "3", "--seed", "0"], capsys)
    vals = dict(kv.split("=") for kv in out.split())
    assert abs(float(vals["acc"]) - float(row["acc"])) < 5e-7
    assert abs(float(vals["nmi"]) - float(row["nmi"])) < 5e-7


def test_sweep_injected_failure(planted_small, tmp_path, monkeypatch):
    real = solver.fit

    def flaky(ds, config, callback=None):
        if config.gamma == 10.0:
            raise ConvergenceFailure("injected")
        return real(ds, config, callback)

    monkeypatch.setattr(solver, "fit", flaky)
    cfg = _sweep_config(tmp_path, planted_small, {"k": [5], "gamma": [1.0, 10.0, 100.0], "s": [4]})
    assert cli.main(["sweep", str(cfg), "--out", str(tmp_path / "sw")]) == 0
    rows = _rows(tmp_path / "sw" / "sweep.csv")
    assert len(rows) == 3
    status = {float(r["gamma"]): r["status"] for r in rows}
    assert status[10.0] == "failed:ConvergenceFailure"
    assert not status[1.0].startswith("failed") and not status[100.0].startswith("failed")


def test_sweep_empty_axis(planted_small, tmp_path):
    cfg = _sweep_config(tmp_path, planted_small, {"k": [], "gamma": [1.0], "s": [4]})
    assert cli.main(["sweep", str(cfg), "--out", str(tmp_path / "sw")]) == 2


# ---- help

FLAGS = {
    "synth two-moon": ["--variant", "--n", "--moon-noise-sd", "--noise-view-dim", "--seed", "--out"],
    "synth planted": ["--n", "--c", "--informative", "--noise", "--separation", "--seed", "--out"],
    "fit": ["config", "--out"],
    "select": ["--ranking", "--s", "--dataset", "--out"],
    "eval": ["--dataset", "--labels", "--c", "--restarts", "--seed", "--report"],
    "sweep": ["config", "--out", "--workers"],
}


@pytest.mark.parametrize("cmd", ["synth", *FLAGS])
def test_help(cmd, capsys):
    with pytest.raises(SystemExit) as err:
        cli.main(cmd.split() + ["--help"])
    assert err.value.code == 0
    out = capsys.readouterr().out
    for flag in FLAGS.get(cmd, []):
        assert flag in out
