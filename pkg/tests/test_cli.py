import csv
import io
import json
import subprocess
import sys

import pytest

from csym.cli import main
from csym.config import CSV_COLUMNS, _pairs, load_config, model_from_options
from csym.errors import ModelError
from csym.linalg import ExactMatrix


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def write_matrix(tmp_path, name, rows, modulus=0):
    path = tmp_path / name
    ExactMatrix(rows, modulus).dump(path)
    return str(path)


class TestConfig:
    def test_load(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("# comment\nmodel = symmetric\n\nn=6\nc-file = x.json\n")
        assert load_config(path) == {"model": "symmetric", "n": "6", "c_file": "x.json"}
        path.write_text("model symmetric\n")
        with pytest.raises(ValueError):
            load_config(path)

    def test_pairs(self):
        assert _pairs("0-1, 2-3") == ((0, 1), (2, 3))

    def test_models(self, tmp_path):
        c = write_matrix(tmp_path, "c.json", [[0, 1], [3, 0]], 4)
        assert model_from_options({"model": "c_symmetric", "c_file": c}).n == 2
        m = model_from_options({"model": "corner-perturbed", "n": "4", "positions": "0-1,2-3", "units": "1,3", "modulus": "4"})
        assert m.kind == "corner_perturbed"
        assert model_from_options({"model": "iid", "n": "3", "m": "5", "modulus": "2"}).cols == 5
        with pytest.raises(ModelError):
            model_from_options({"model": "symmetric"})
        with pytest.raises(ModelError):
            model_from_options({"n": "3"})
        with pytest.raises(ModelError):
            model_from_options({"model": "c_symmetric", "c_file": c, "modulus": "8"})
        with pytest.raises(ModelError):
            model_from_options({"model": "c_symmetric", "c_file": c, "n": "3"})


class TestLinalgCommands:
    def test_snf_integer(self, capsys, tmp_path):
        m = write_matrix(tmp_path, "m.json", [[2, 4], [6, 8]])
        code, out, _ = run(capsys, "snf", "--matrix", m)
        assert code == 0
        assert json.loads(out) == {"d": [2, 4], "rank": 2, "free_rank": 0, "cokernel": "2,4"}

    def test_snf_modular(self, capsys, tmp_path):
        m = write_matrix(tmp_path, "m.json", [[2, 0], [0, 0]], 4)
        code, out, _ = run(capsys, "snf", "--matrix", m)
        got = json.loads(out)
        assert code == 0 and got["d"] == [2, 4] and got["rank"] == 1 and got["cokernel"] == "2,4"

    def test_cokernel(self, capsys, tmp_path):
        m = write_matrix(tmp_path, "m.json", [[2, 0], [0, 0]])
        code, out, _ = run(capsys, "cokernel", "--matrix", m)
        got = json.loads(out)
        assert code == 0 and got["cokernel"] == "2;free=1" and got["order"] is None

    def test_out_file(self, capsys, tmp_path):
        m = write_matrix(tmp_path, "m.json", [[3]])
        dest = tmp_path / "res.json"
        code, out, _ = run(capsys, "cokernel", "--matrix", m, "--out", str(dest))
        assert code == 0 and out == ""
        assert json.loads(dest.read_text())["order"] == 3


class TestUsageErrors:
    def test_missing_command(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 1

    def test_bad_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["limits", "--dist", "poisson", "--p", "2", "--group", "2"])
        assert exc.value.code == 1

    def test_missing_file(self, capsys, tmp_path):
        code, _, err = run(capsys, "snf", "--matrix", str(tmp_path / "nope.json"))
        assert code == 1 and "csym: error" in err

    def test_csv_needs_table(self, capsys, tmp_path):
        m = write_matrix(tmp_path, "m.json", [[3]])
        code, _, err = run(capsys, "cokernel", "--matrix", m, "--format", "csv")
        assert code == 1 and "csv" in err

    def test_bad_trials(self, capsys):
        code, _, _ = run(capsys, "moment", "--model", "symmetric", "--n", "4", "--modulus", "2", "--group", "2",
                         "--trials", "0")
        assert code == 1

    def test_model_error(self, capsys):
        code, _, err = run(capsys, "moment", "--model", "symmetric", "--group", "2")
        assert code == 1 and "n is required" in err


class TestMoment:
    def test_symmetric_target(self, capsys):
        code, out, _ = run(capsys, "moment", "--model", "symmetric", "--n", "20", "--modulus", "4", "--group", "2",
                           "--trials", "3000", "--seed", "1")
        got = json.loads(out)
        assert code == 0 and got["target"] == 1.0 and got["passed"]

    def test_failed_check_exits_2(self, capsys):
        code, _, err = run(capsys, "moment", "--model", "symmetric", "--n", "20", "--modulus", "4", "--group", "2,2",
                           "--trials", "2000", "--seed", "3", "--target", "50")
        assert code == 2 and "seed 3" in err

    def test_config_file(self, capsys, tmp_path):
        cfg = tmp_path / "m.cfg"
        cfg.write_text("model=iid\nn=12\nmodulus=2\ngroup=2\ntrials=2000\nseed=4\n")
        code, out, _ = run(capsys, "moment", "--config", str(cfg))
        got = json.loads(out)
        assert code == 0 and got["trials"] == 2000 and got["target"] == 1.0
        # flags override the file
        code, out, _ = run(capsys, "moment", "--config", str(cfg), "--trials", "100")
        assert json.loads(out)["trials"] == 100

    def test_deterministic(self, capsys):
        argv = ["moment", "--model", "symmetric", "--n", "8", "--modulus", "2", "--group", "2", "--trials", "200",
                "--seed", "7"]
        assert run(capsys, *argv)[1] == run(capsys, *argv)[1]


class TestIsotropy:
    def test_exact_and_report(self, capsys, tmp_path):
        c = write_matrix(tmp_path, "c.json", [[0, 1], [1, 0]], 2)
        code, out, _ = run(capsys, "isotropy", "--c-file", c, "--group", "2,2", "--exact")
        got = json.loads(out)
        assert code == 0 and got["exact"] == "5/8" and got["limit_h1"] == 0.5
        assert got["report"]["isotropic"] is False and got["report"]["failing_triple"] == [1, 1, 2]

    def test_witness_file(self, capsys, tmp_path):
        c = write_matrix(tmp_path, "c.json", [[0, 1], [1, 0]], 2)
        f = write_matrix(tmp_path, "f.json", [[1, 0]], 2)
        w = tmp_path / "w.json"
        code, out, _ = run(capsys, "isotropy", "--c-file", c, "--group", "2", "--map-file", f, "--witness", str(w))
        assert code == 0 and json.loads(out)["report"]["isotropic"]
        assert ExactMatrix.load(w) == ExactMatrix([[0, 0], [1, 0]], 2)

    def test_monte_carlo(self, capsys, tmp_path):
        c = write_matrix(tmp_path, "c.json", [[0, 1], [1, 0]], 2)
        code, out, _ = run(capsys, "isotropy", "--c-file", c, "--group", "2,2", "--trials", "20000", "--seed", "2")
        got = json.loads(out)
        assert code == 0 and abs(got["probability"] - 0.625) <= 4 * got["stderr"]

    def test_modulus_mismatch(self, capsys, tmp_path):
        c = write_matrix(tmp_path, "c.json", [[0, 1], [1, 0]], 2)
        code, _, _ = run(capsys, "isotropy", "--c-file", c, "--group", "2", "--modulus", "4")
        assert code == 1


class TestDistributionAndLimits:
    def test_csv_table(self, capsys):
        code, out, _ = run(capsys, "distribution", "--model", "symmetric", "--n", "10", "--modulus", "2",
                           "--trials", "500", "--format", "csv")
        assert code == 0
        rows = list(csv.DictReader(io.StringIO(out)))
        assert tuple(rows[0]) == CSV_COLUMNS
        assert sum(int(r["count"]) for r in rows) == 500
        assert rows[0]["ref_prob"] == ""

    def test_reference_check(self, capsys):
        code, out, _ = run(capsys, "distribution", "--model", "iid", "--n", "20", "--modulus", "2", "--trials",
                           "3000", "--reference", "cl", "--p", "2", "--check", "2", "--seed", "5")
        got = json.loads(out)
        assert code == 0 and got["passed"] and len(got["checks"]) == 2

    def test_limits(self, capsys):
        code, out, _ = run(capsys, "limits", "--dist", "cl", "--p", "2", "--group", "1")
        got = json.loads(out)
        assert code == 0 and abs(got["value"] - 0.288788) < 1e-6 and got["tail_bound"] < 1e-9
        code, out, _ = run(capsys, "limits", "--dist", "sandpile", "--p", "2", "--group", "2")
        assert code == 0 and abs(json.loads(out)["value"] - 0.209711) < 1e-6

    def test_limits_pairing_bound(self, capsys):
        code, _, err = run(capsys, "limits", "--dist", "sandpile", "--p", "2", "--group", "2,2,2,2,2,2,2",
                           "--max-order", "64")
        assert code == 1 and "csym: error" in err

    def test_limits_rejects_non_p_group(self, capsys):
        code, _, _ = run(capsys, "limits", "--dist", "cl", "--p", "2", "--group", "3")
        assert code == 1


class TestVerify:
    def test_generation(self, capsys):
        code, out, _ = run(capsys, "verify", "generation", "--a", "2", "--ell", "1", "--k", "5", "--trials", "20000")
        got = json.loads(out)
        assert code == 0 and got["bound"] == 2**-4

    def test_alternating_form_exact(self, capsys):
        code, out, _ = run(capsys, "verify", "alternating-form", "--a", "2", "--n", "8", "--m", "2")
        got = json.loads(out)
        assert code == 0 and got["exact"] == "257/512" and got["passed"]

    def test_alternating_form_nonzero_target(self, capsys, tmp_path):
        # u^T C v = 1 needs v != 0 and then happens half the time: (1 - 2^-4) / 2
        s = write_matrix(tmp_path, "s.json", [[0, 1], [1, 0]], 2)
        code, out, _ = run(capsys, "verify", "alternating-form", "--a", "2", "--n", "4", "--m", "2", "--s-file", s)
        got = json.loads(out)
        assert code == 0 and got["exact"] == "15/32" and got["bound"] == 0.5

    def test_moment_sum_oracle(self, capsys):
        code, out, _ = run(capsys, "verify", "moment-sum-oracle", "--model", "symmetric", "--n", "2", "--modulus",
                           "2", "--group", "2")
        got = json.loads(out)
        assert code == 0 and got["lhs"] == got["rhs"]

    def test_directional_small(self, capsys):
        code, out, _ = run(capsys, "verify", "directional", "--n", "8", "--trials", "200", "--seed", "1")
        got = json.loads(out)
        assert len(got["scenarios"]) == 3
        assert (code == 0) == got["passed"]

    def test_unknown_mode(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["verify", "everything"])
        assert exc.value.code == 1


def test_module_entry_point(tmp_path):
    m = tmp_path / "m.json"
    ExactMatrix([[2, 0], [0, 3]]).dump(m)
    res = subprocess.run([sys.executable, "-m", "csym", "cokernel", "--matrix", str(m)], capture_output=True, text=True)
    assert res.returncode == 0 and json.loads(res.stdout)["cokernel"] == "6"
