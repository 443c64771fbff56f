import filecmp
import os

import numpy as np
import pytest

from qbbt import experiments
from qbbt.cli import main
from qbbt.experiments import CaseSpec, output_error, run_case, write_case_outputs
from qbbt.reactor import ReactorConfig

FAST = dict(r_list=[4, 6], t_f=3.0, t_train=1.5)
FAST_CLI = ["--n", "20", "--r-list", "4,6", "--dt", "1e-3",
            "--t-f", "3", "--t-train", "1.5"]


@pytest.fixture(scope="module")
def fast_case1(tmp_path_factory):
    cfg = ReactorConfig(n=20)
    spec = CaseSpec.standard(1, **FAST)
    result = run_case(spec, cfg, dt=1e-3)
    out = tmp_path_factory.mktemp("case1")
    write_case_outputs(result, out, make_plots=True)
    return result, out


class TestOutputError:
    def test_identical_series(self):
        y = np.linspace(0.0, 1.0, 3000)
        assert output_error(y, y) == 0.0

    def test_constant_offset(self):
        y = np.zeros(3000)
        assert output_error(y, y + 1e-3) == pytest.approx(3.0)

    def test_grid_mismatch_rejected(self):
        with pytest.raises(ValueError, match="grids differ"):
            output_error(np.zeros(10), np.zeros(11))
        with pytest.raises(ValueError, match="time grids"):
            output_error(np.zeros(5), np.zeros(5), np.arange(5),
                         np.arange(5) + 1.0)


class TestCaseSpec:
    def test_standard_cases(self):
        assert CaseSpec.standard(1).u_train == "cos"
        assert CaseSpec.standard(2).noise_level == pytest.approx(0.1)
        assert CaseSpec.standard(3).u_test == "osc-decay"
        assert CaseSpec.standard(4).x0_train == "zero-one"

    def test_unknown_case_rejected(self):
        with pytest.raises(ValueError, match="case id"):
            CaseSpec.standard(5)

    def test_descending_r_list_rejected(self):
        with pytest.raises(ValueError, match="ascending"):
            CaseSpec.standard(1, r_list=[8, 4])

    def test_input_descriptors(self):
        u = experiments.u_from_descriptor("const:0.25")
        assert u(3.7) == pytest.approx(0.25)
        u = experiments.u_from_descriptor("osc-decay")
        assert u(0.0) == pytest.approx(0.5)
        with pytest.raises(ValueError, match="descriptor"):
            experiments.u_from_descriptor("ramp")


class TestRunCase:
    def test_row_layout(self, fast_case1):
        result, _ = fast_case1
        assert [(m, r) for m, r, _, _ in result.rows] == [
            ("qb-bt", 4), ("qb-bt", 6), ("pod-deim", 4), ("pod-deim", 6)]
        assert all(status == "ok" for _, _, _, status in result.rows)

    def test_errors_positive_and_finite(self, fast_case1):
        result, _ = fast_case1
        for _, _, err, _ in result.rows:
            assert 0.0 < err < np.inf

    def test_output_files_written(self, fast_case1):
        _, out = fast_case1
        names = {p for p in os.listdir(out)}
        assert {"errors.csv", "diag.csv", "manifest.txt",
                "outputs_1_4.csv", "outputs_1_6.csv"} <= names
        assert any(p.endswith(".png") for p in names)

    def test_errors_csv_row_count(self, fast_case1):
        _, out = fast_case1
        lines = open(os.path.join(out, "errors.csv")).read().splitlines()
        assert lines[0] == "method,r,error"
        assert len(lines) == 1 + 4

    def test_manifest_records_parameters(self, fast_case1):
        result, out = fast_case1
        manifest = dict(
            line.split("=", 1)
            for line in open(os.path.join(out, "manifest.txt"))
            .read().splitlines())
        assert manifest["case"] == "1"
        assert manifest["u_test"] == "cos"
        assert manifest["x0"] == "steady(u=0)"
        assert float(manifest["alpha"]) == pytest.approx(result.spec.alpha)

    def test_outputs_csv_alignment(self, fast_case1):
        result, out = fast_case1
        data = np.genfromtxt(os.path.join(out, "outputs_1_4.csv"),
                             delimiter=",", names=True)
        assert data["t"] == pytest.approx(result.times)
        assert data["y_fom"] == pytest.approx(result.y_fom)
        assert data["y_qbbt"] == pytest.approx(result.y_qbbt[4])


class TestCli:
    def test_run_row_count_and_exit(self, tmp_path):
        out = tmp_path / "run"
        rc = main(["run", "--case", "1", "--out", str(out)] + FAST_CLI
                  + ["--no-plots"])
        assert rc == 0
        lines = (out / "errors.csv").read_text().splitlines()
        assert len(lines) == 1 + 4

    def test_determinism_byte_identical(self, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        for out in (out1, out2):
            rc = main(["run", "--case", "2", "--seed", "7", "--out", str(out)]
                      + FAST_CLI + ["--no-plots"])
            assert rc == 0
        for name in os.listdir(out1):
            if name.endswith(".csv") or name.endswith(".txt"):
                assert filecmp.cmp(out1 / name, out2 / name, shallow=False), name

    def test_seed_changes_noisy_case(self, tmp_path):
        outs = []
        for seed in ("1", "2"):
            out = tmp_path / f"s{seed}"
            main(["run", "--case", "2", "--seed", seed, "--out", str(out)]
                 + FAST_CLI + ["--no-plots"])
            outs.append((out / "errors.csv").read_text())
        assert outs[0] != outs[1]

    def test_config_file_flag(self, tmp_path):
        cfg_path = tmp_path / "reactor.cfg"
        ReactorConfig(n=20, b_profile=0.01).to_file(cfg_path)
        out = tmp_path / "cfg_run"
        rc = main(["run", "--case", "1", "--config", str(cfg_path),
                   "--out", str(out)] + FAST_CLI + ["--no-plots"])
        assert rc == 0
        manifest = (out / "manifest.txt").read_text()
        assert "n=20" in manifest

    def test_usage_error_exit_code(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["run", "--case", "9", "--out", "/tmp/x"])
        assert exc.value.code == 2

    def test_lift_check_subcommand(self, capsys):
        rc = main(["lift-check", "--n", "6"])
        captured = capsys.readouterr()
        assert rc == 0
        assert captured.out.count("[PASS]") == 3

    def test_alpha_sweep_writes_table(self, tmp_path, capsys):
        out = tmp_path / "sweep"
        rc = main(["alpha-sweep", "--n", "10", "--candidates", "5,20",
                   "--no-probe", "--out", str(out), "--no-plots"])
        assert rc == 0
        lines = (out / "alpha_sweep.csv").read_text().splitlines()
        assert len(lines) == 3

    def test_fom_self_consistency(self, fast_case1):
        result, _ = fast_case1
        assert output_error(result.y_fom, result.y_fom) == 0.0
