import pytest
import yaml

from gmfs.cli import main
from gmfs.graphon import Graphon

SMALL_ERGODICITY = {
    "experiment": "ergodicity", "base_seed": 42, "replicas": 3,
    "particles": 150, "step": 0.025,
    "t_grid": [0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0],
    "model": {
        "dimension": 1,
        "drift": {"kind": "linear", "slope_f": 2.0, "self_b": 0.5,
                  "other_b": 0.3},
        "sigma": 1.0,
        "graphon": {"kind": "constant", "p": 1.0},
        "initial": {"kind": "point_mass", "value": 3.0},
        "edges": "deterministic",
    },
}


def write_cfg(tmp_path, rec, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(rec))
    return str(path)


def test_experiment_subcommand_pass(tmp_path, capsys):
    cfg = write_cfg(tmp_path, SMALL_ERGODICITY)
    code = main(["ergodicity", "--config", cfg, "--out", str(tmp_path / "out")])
    out = capsys.readouterr().out
    assert code == 0
    assert "decay_rate" in out and "PASS" in out
    results = (tmp_path / "out" / "results.csv").read_text()
    assert results.startswith("sweep_var,value,metric,estimate,se,replicas")
    fit = (tmp_path / "out" / "fit.csv").read_text()
    assert fit.startswith("term,estimate,ci_lo,ci_hi,pass")
    assert (tmp_path / "out" / "meta.json").exists()


def test_experiment_seed_override_changes_output(tmp_path):
    cfg = write_cfg(tmp_path, SMALL_ERGODICITY)
    main(["ergodicity", "--config", cfg, "--out", str(tmp_path / "a")])
    main(["ergodicity", "--config", cfg, "--out", str(tmp_path / "b"),
          "--seed", "43"])
    a = (tmp_path / "a" / "results.csv").read_text()
    b = (tmp_path / "b" / "results.csv").read_text()
    assert a != b


def test_experiment_rerun_byte_identical(tmp_path):
    cfg = write_cfg(tmp_path, SMALL_ERGODICITY)
    main(["ergodicity", "--config", cfg, "--out", str(tmp_path / "a")])
    main(["ergodicity", "--config", cfg, "--out", str(tmp_path / "b")])
    for name in ("results.csv", "fit.csv"):
        assert ((tmp_path / "a" / name).read_bytes()
                == (tmp_path / "b" / name).read_bytes())


def test_inconclusive_exit_code(tmp_path):
    rec = dict(SMALL_ERGODICITY)
    rec["model"] = dict(rec["model"])
    rec["model"]["initial"] = {"kind": "gaussian", "mean": 0.0,
                               "std": 0.577350269}
    cfg = write_cfg(tmp_path, rec)
    assert main(["ergodicity", "--config", cfg]) == 3


def test_wrong_experiment_name_rejected(tmp_path):
    cfg = write_cfg(tmp_path, SMALL_ERGODICITY)
    with pytest.raises(SystemExit):
        main(["euler_sweep", "--config", cfg])


def test_simulate_writes_trajectory(tmp_path):
    rec = {
        "base_seed": 7, "particles": 20, "step": 0.01, "horizon": 0.5,
        "snapshot_times": [0.25, 0.5],
        "model": SMALL_ERGODICITY["model"],
    }
    cfg = write_cfg(tmp_path, rec)
    out = tmp_path / "traj.csv"
    assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
    lines = out.read_text().strip().split("\n")
    assert lines[0] == "n,d,h,seed,graphon"
    header = lines[1].split(",")
    assert header[0] == "20" and header[1] == "1"
    assert lines[2] == "t,i,x1"
    assert len(lines) == 3 + 2 * 20
    # deterministic rerun
    out2 = tmp_path / "traj2.csv"
    main(["simulate", "--config", cfg, "--out", str(out2)])
    assert out.read_bytes() == out2.read_bytes()


def test_oracle_prints_field(tmp_path, capsys):
    cfg = write_cfg(tmp_path, {"model": SMALL_ERGODICITY["model"],
                               "oracle_grid": 8})
    assert main(["oracle", "--config", cfg]) == 0
    out = capsys.readouterr().out
    assert out.startswith("label,mean,second_moment,variance")
    assert "mixture_second_moment=0.333333333" in out.replace(" ", " ")


def test_graphon_cutnorm_cli(tmp_path, capsys):
    g = Graphon.from_step([0.0, 0.5, 1.0], [[0.9, 0.1], [0.1, 0.5]])
    path = tmp_path / "kernel.txt"
    g.save(path)
    assert main(["graphon", "cutnorm", str(path)]) == 0
    out = capsys.readouterr().out
    assert out.startswith("cut_norm=")
    assert "row_blocks=" in out and "col_blocks=" in out
    value = float(out.split("\n")[0].split("=")[1])
    assert value == pytest.approx(0.9 * 0.25 + 2 * 0.1 * 0.25 + 0.5 * 0.25,
                                  abs=1e-12)
