import json
import math

import pytest

from qtheta import cli
from qtheta.config import (ConfigError, RunConfig, default_threads, parse_grid, parse_params,
                           parse_tolerances, parse_value, read_param_file)
from qtheta.reports import CheckReport


class TestParsing:
    @pytest.mark.parametrize("text,value", [("pi/2", math.pi / 2), ("3*pi/4", 3 * math.pi / 4),
                                            ("-1.5e-3", -1.5e-3), ("2**3", 8.0), ("+1", 1.0)])
    def test_values(self, text, value):
        assert parse_value(text) == value

    @pytest.mark.parametrize("text", ["__import__('os')", "e", "sin(1)", "1/0", "1e400", "", "[1]"])
    def test_rejected_values(self, text):
        with pytest.raises(ConfigError):
            parse_value(text)

    def test_params(self):
        assert parse_params("phi=pi/2, N=4") == {"phi": math.pi / 2, "N": 4}
        assert isinstance(parse_params("M=16")["M"], int)

    @pytest.mark.parametrize("text", ["zeta=1", "phi", "N=2.5", "phi=1=2"])
    def test_bad_params(self, text):
        with pytest.raises(ConfigError):
            parse_params(text)

    def test_param_file(self, tmp_path):
        f = tmp_path / "run.cfg"
        f.write_text("# resonant torus\nphi = pi/3\n\nN=6  # period\n")
        assert read_param_file(str(f)) == {"phi": math.pi / 3, "N": 6}

    def test_missing_param_file(self, tmp_path):
        with pytest.raises(ConfigError):
            read_param_file(str(tmp_path / "absent.cfg"))

    def test_tolerances(self):
        assert parse_tolerances("relations=1e-10") == {"relations": 1e-10}
        with pytest.raises(ConfigError):
            parse_tolerances("relations=-1")

    def test_grid(self):
        g = parse_grid("64,80,-1,1")
        assert (g.n_u, g.n_v, g.u_min, g.u_max) == (64, 80, -1.0, 1.0)

    @pytest.mark.parametrize("text", ["64,64,0", "32,64,0,1", "64,64,1,0", "6.5,64,0,1"])
    def test_bad_grid(self, text):
        with pytest.raises(ConfigError):
            parse_grid(text)

    def test_threads_env(self, monkeypatch):
        monkeypatch.delenv("QTHETA_THREADS", raising=False)
        assert default_threads() == 1
        monkeypatch.setenv("QTHETA_THREADS", "3")
        assert default_threads() == 3
        monkeypatch.setenv("QTHETA_THREADS", "zero")
        with pytest.raises(ConfigError):
            default_threads()


class TestRunConfig:
    def test_defaults_merged(self):
        cfg = RunConfig("su11-v2")
        assert cfg.params["hbar"] == 0.5 and cfg.params["M"] == 64

    @pytest.mark.parametrize("kwargs", [dict(example="su11-v3"), dict(example="su11-v1", params={"phi": 1.0}),
                                        dict(example="sklyanin", params={"hbar": 0.5}),
                                        dict(example="su11-v1", params={"M": 4}),
                                        dict(example="sklyanin", params={"N": 1}),
                                        dict(example="su11-v1", params={"tau": 0.0}),
                                        dict(example="su11-v1", threads=0),
                                        dict(example="su11-v1", format="xml")])
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigError):
            RunConfig(**kwargs)


def _run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


class TestCli:
    def test_verify_report(self, capsys):
        code, out, _ = _run(["verify", "--example", "sklyanin", "--params", "phi=pi/2,N=4,alpha=0.3"], capsys)
        assert code == 0
        reports = [CheckReport.from_record(x) for x in out.splitlines()]
        names = {r.check_name for r in reports}
        assert {"relations", "quantization", "difference_system", "partition_of_unity"} <= names
        assert all(r.passed for r in reports)

    def test_verify_csv_to_file(self, tmp_path, capsys):
        path = tmp_path / "v.csv"
        code, out, _ = _run(["verify", "--example", "su11-v1", "--M", "16", "--format", "csv",
                             "--out", str(path)], capsys)
        assert code == 0 and out == ""
        lines = path.read_text().splitlines()
        assert lines[0] == "check_name,residual,tolerance,pass"
        assert all(x.endswith(",true") for x in lines[1:])

    def test_failing_check_exits_1(self, capsys):
        code, out, _ = _run(["verify", "--example", "sklyanin", "--params", "N=4", "--tol", "relations=1e-300"],
                            capsys)
        assert code == 1
        failed = [json.loads(x) for x in out.splitlines() if not json.loads(x)["pass"]]
        assert [r["check_name"] for r in failed] == ["relations"]

    @pytest.mark.parametrize("argv", [
        ["verify", "--example", "sklyanin", "--params", "bogus=1"],
        ["verify", "--example", "sklyanin", "--params", "phi=pi/2,N=5"],
        ["verify", "--example", "su11-v1", "--tol", "relations=-1"],
        ["verify", "--example", "su11-v1", "--grid", "8,8,0,1"],
        ["verify", "--example", "su11-v1", "--params", "a0=0.1,a=1"],
        ["verify", "--example", "su11-v1", "--config", "/nonexistent/run.cfg"],
        ["grid", "--example", "su11-v1", "--out", "/nonexistent/dir/out.csv"],
        ["acceptance", "--only", "13"],
        ["acceptance", "--only", "one"],
    ])
    def test_usage_errors_exit_2(self, argv, capsys):
        code, _, err = _run(argv, capsys)
        assert code == 2 and err.startswith("qtheta: error:")

    def test_argparse_errors_exit_2(self, capsys):
        with pytest.raises(SystemExit) as exc:
            cli.main(["verify"])
        assert exc.value.code == 2
        capsys.readouterr()

    def test_computation_error_exits_3(self, monkeypatch, capsys):
        import qtheta.suites

        def boom(cfg, example=None):
            raise FloatingPointError("overflow in kernel")

        monkeypatch.setattr(qtheta.suites, "run_suite", boom)
        code, _, err = _run(["verify", "--example", "su11-v1"], capsys)
        assert code == 3 and "computation error" in err

    @pytest.mark.parametrize("what,ncols", [("kernel", 6), ("kahler", 5), ("measure", 5)])
    def test_grid_output(self, what, ncols, capsys):
        code, out, _ = _run(["grid", "--example", "sklyanin", "--params", "N=4", "--what", what], capsys)
        assert code == 0
        lines = out.splitlines()
        assert len(lines) == 1 + 64 * 64
        assert all(len(x.split(",")) == ncols for x in lines)
        assert "nan" not in out and "-0," not in out

    def test_grid_deterministic_across_threads(self, tmp_path, capsys):
        paths = []
        for threads in ("1", "4"):
            p = tmp_path / f"g{threads}.csv"
            assert cli.main(["grid", "--example", "su11-v2", "--grid", "64,64,-1,1", "--what", "measure",
                             "--threads", threads, "--out", str(p)]) == 0
            paths.append(p)
        assert paths[0].read_bytes() == paths[1].read_bytes()

    def test_acceptance_subset(self, tmp_path, capsys):
        p = tmp_path / "acc.txt"
        code, _, _ = _run(["acceptance", "--only", "1,2", "--out", str(p)], capsys)
        lines = p.read_text().splitlines()
        assert code == 0 and len(lines) == 2
        assert lines[0].split()[:3] == ["PASS", "criterion", "1"]
