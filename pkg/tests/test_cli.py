import csv
import json
import subprocess
import sys
import time

import pytest

from ccrnoma.cli import SweepSpec, UsageError, fmt, main


def read_csv(path):
    lines = path.read_text().splitlines()
    return lines[0], list(csv.DictReader(lines[1:]))


def run(tmp_path, *argv):
    return main([*argv, "--out", str(tmp_path)])


def test_fmt():
    assert fmt(1 / 3) == "0.333333333333"
    assert fmt(7) == "7"
    assert fmt(float("nan")) == "nan"
    assert fmt(1.5e-20) == "1.5e-20"


def test_ra_artifact(tmp_path):
    assert run(tmp_path, "ra") == 0
    head, rows = read_csv(tmp_path / "ra.csv")
    assert head == "# ccrnoma ra v1"
    assert len(rows) == 4
    assert sorted(int(r["user"]) for r in rows) == [0, 1, 2, 3]
    assert len({r["gamma_star"] for r in rows}) == 1
    assert float(rows[0]["beta"]) > float(rows[-1]["beta"])


def test_ra_subset_and_uav(tmp_path):
    assert run(tmp_path, "ra", "--users", "1,2", "--uav", "400", "400", "120") == 0
    _, rows = read_csv(tmp_path / "ra.csv")
    assert {int(r["user"]) for r in rows} == {1, 2}


def test_coverage_artifact(tmp_path):
    assert run(tmp_path, "coverage", "--scenario", "itc_power", "--range", "0.2e6", "1e6", "3",
               "--trials", "2000") == 0
    head, rows = read_csv(tmp_path / "coverage.csv")
    assert head == "# ccrnoma coverage v1"
    assert len(rows) == 6
    for r in rows:
        assert 0 <= float(r["analytic"]) <= 1
        assert abs(float(r["analytic"]) - float(r["monte_carlo"])) <= max(0.03, 4 * float(r["stderr"]))


def test_cluster_artifact_and_oracle(tmp_path):
    assert run(tmp_path, "cluster", "--k", "3", "--n", "3", "--oracle") == 0
    head, rows = read_csv(tmp_path / "clusters.csv")
    assert head.startswith("# ccrnoma clusters v1 metric=")
    assert sorted(int(r["members"]) for r in rows) == [0, 1, 2]


def test_cluster_thirty_is_fast(tmp_path):
    t = time.perf_counter()
    assert run(tmp_path, "cluster", "--k", "30", "--n", "30") == 0
    assert time.perf_counter() - t < 1.0


def test_deploy_artifacts(tmp_path):
    assert run(tmp_path, "deploy", "--scenario", "two_users", "--slice", "--iters", "40") == 0
    head, rows = read_csv(tmp_path / "deploy_trace.csv")
    assert head == "# ccrnoma deploy_trace v1"
    assert len(rows) == 41
    best = json.loads((tmp_path / "deploy.json").read_text())
    assert best["schema"] == "ccrnoma deploy v1"
    assert best["best_c"][1] == 400.0
    assert best["best_fitness"] == max(float(r["fitness"]) for r in rows if r["accepted"] == "1")


def test_deploy_full_box(tmp_path):
    assert run(tmp_path, "deploy", "--iters", "20", "--step", "0.1") == 0
    best = json.loads((tmp_path / "deploy.json").read_text())
    x, y, z = best["best_c"]
    # the full search box is the service region around the hot-spot
    assert -100 <= x <= 900 and -100 <= y <= 900 and 10 <= z <= 1000


def test_uav_d_sweep_peaks_in_hotspot(tmp_path):
    assert run(tmp_path, "sweep", "--variable", "uav_d", "--range", "0", "1000", "101") == 0
    head, rows = read_csv(tmp_path / "sweep_uav_d.csv")
    assert head == "# ccrnoma sweep v1 variable=uav_d mode=deterministic"
    assert len(rows) == 101
    vals = [float(r["min_metric"]) for r in rows]
    best = max(range(len(vals)), key=lambda i: vals[i])
    assert abs(float(rows[best]["value"]) - 400.0) <= 100.0
    # every number carries at most 12 significant digits
    for r in rows:
        mantissa = r["min_metric"].split("e")[0].replace(".", "").replace("-", "").lstrip("0")
        assert len(mantissa) <= 12


@pytest.mark.parametrize("variable, rng", [
    ("uav_h", ("20", "400", "4")),
    ("tx_power_dbm", ("30", "50", "3")),
    ("rbar", ("0.2e6", "1e6", "3")),
    ("cluster_size", ("1", "4", "3")),
    ("n_users", ("4", "12", "3")),
])
def test_other_sweeps(tmp_path, variable, rng):
    assert run(tmp_path, "sweep", "--variable", variable, "--range", *rng) == 0
    _, rows = read_csv(tmp_path / f"sweep_{variable}.csv")
    assert [int(r["index"]) for r in rows] == list(range(int(rng[2])))


def test_monte_carlo_sweep_and_workers(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    args = ["sweep", "--scenario", "itc_power", "--variable", "rbar", "--range", "0.5e6", "1.5e6", "3",
            "--mode", "monte_carlo", "--trials", "500"]
    assert main([*args, "--out", str(a)]) == 0
    assert main([*args, "--out", str(b), "--workers", "2"]) == 0
    assert (a / "sweep_rbar.csv").read_bytes() == (b / "sweep_rbar.csv").read_bytes()


def test_byte_identical_reruns(tmp_path):
    for sub in ("a", "b"):
        out = tmp_path / sub
        assert main(["ra", "--out", str(out)]) == 0
        assert main(["deploy", "--iters", "15", "--slice", "--out", str(out)]) == 0
        assert main(["coverage", "--scenario", "itc_power", "--trials", "500", "--out", str(out)]) == 0
    for name in ("ra.csv", "deploy_trace.csv", "deploy.json", "coverage.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_usage_errors(tmp_path, capsys):
    assert run(tmp_path, "ra", "--scenario", "no_such_scenario") == 2
    assert run(tmp_path, "ra", "--channel", "9") == 2
    assert run(tmp_path, "ra", "--users", "0,0") == 2
    assert run(tmp_path, "sweep", "--variable", "uav_d", "--range", "0", "1", "1") == 2
    assert "at least 2 steps" in capsys.readouterr().err
    with pytest.raises(SystemExit) as exc:
        run(tmp_path, "sweep", "--variable", "wind", "--range", "0", "1", "3")
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        run(tmp_path, "ra", "--bogus")
    assert exc.value.code == 2


def test_sweep_spec_validation():
    with pytest.raises(UsageError):
        SweepSpec("uav_d", 0, 1, 1)
    with pytest.raises(UsageError):
        SweepSpec("speed", 0, 1, 5)
    assert SweepSpec("n_users", 4, 9, 3).values().tolist() == [4.0, 6.0, 9.0]


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "ccrnoma", "ra", "--bogus"], capture_output=True, text=True)
    assert proc.returncode == 2
    proc = subprocess.run([sys.executable, "-m", "ccrnoma", "validate", "--quick", "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stdout + proc.stderr
    assert proc.stdout.count("PASS") == 4
    head, rows = read_csv(tmp_path / "validate.csv")
    assert head == "# ccrnoma validate v1"
    assert [r["status"] for r in rows] == ["pass"] * 4
