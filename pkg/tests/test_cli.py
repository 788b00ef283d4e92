import math
import os

import pytest

from config import build_config, parse_coeffs, parse_model, read_kv, write_kv
from empirics import dkw_radius
from Logger.Logger import Logger
from models import AdditiveNoise, MultiplicativeNoise, PredictableScaleRademacher, ScaledRademacher
from op.csv_io import read_rows, write_rows
from op.distributions import DiscreteDist, NormalNoise, UniformNoise
from op.errors import ConfigError
from op.utils import parse_int_list
from run import EXIT_AUGMENTATION, EXIT_CONFIG, EXIT_OK, main

SWITCHING = "predictable(neg=0.5, pos=1.5, start=1)"


def simulate_args(out, workers=1, *extra):
    return ["simulate", "--n-grid", "8,16,32", "--reps", "200", "--seed", "7",
            "--out", str(out), "--workers", str(workers)] + list(extra)


def read_bytes(path):
    with open(path, "rb") as f:
        return f.read()


class TestSimulate:

    def test_rows(self, tmp_path):
        assert main(simulate_args(tmp_path)) == EXIT_OK
        rows = read_rows(os.path.join(tmp_path, "simulate.csv"))
        assert [r["n"] for r in rows] == [8, 16, 32]
        for r in rows:
            assert 0.0 <= r["ks"] <= 1.0
            assert r["dkw_radius"] == dkw_radius(200, 0.01)
            assert r["u_n"] == 1.0
            assert r["v_n"] == pytest.approx(math.sqrt(r["n"]))
        assert os.path.exists(os.path.join(tmp_path, "log.txt"))

    def test_reproducible_across_runs_and_workers(self, tmp_path):
        assert main(simulate_args(tmp_path / "a", 1)) == EXIT_OK
        assert main(simulate_args(tmp_path / "b", 1)) == EXIT_OK
        assert main(simulate_args(tmp_path / "c", 2)) == EXIT_OK
        first = read_bytes(tmp_path / "a" / "simulate.csv")
        assert first == read_bytes(tmp_path / "b" / "simulate.csv")
        assert first == read_bytes(tmp_path / "c" / "simulate.csv")

    def test_seed_changes_output(self, tmp_path):
        main(simulate_args(tmp_path / "a"))
        main(["simulate", "--n-grid", "8,16,32", "--reps", "200", "--seed", "8",
              "--out", str(tmp_path / "b"), "--workers", "1"])
        assert read_bytes(tmp_path / "a" / "simulate.csv") != read_bytes(tmp_path / "b" / "simulate.csv")

    def test_plot(self, tmp_path):
        pytest.importorskip("matplotlib")
        assert main(simulate_args(tmp_path, 1, "--plot")) == EXIT_OK
        svg = read_bytes(tmp_path / "rate.svg")
        assert b"<svg" in svg


class TestRateFit:

    def test_synthetic_power_law(self, tmp_path):
        rows = [dict(n=n, reps=1000, ks=3.0 * n ** -0.5, dkw_radius=0.05, u_n=1.0, v_n=math.sqrt(n),
                     bound_ratio=0.5) for n in (16, 64, 256, 1024)]
        source = write_rows(str(tmp_path / "sim.csv"), "simulate", rows)
        assert main(["rate-fit", "--input", source, "--out", str(tmp_path)]) == EXIT_OK
        fits = {r["form"]: r for r in read_rows(os.path.join(tmp_path, "rate_fit.csv"))}
        assert fits["power"]["b"] == pytest.approx(-0.5, abs=1e-12)
        assert fits["power"]["C"] == pytest.approx(3.0, rel=1e-12)
        assert fits["power"]["r2"] == pytest.approx(1.0, abs=1e-12)
        assert fits["power"]["points"] == 4
        assert fits["power_log"]["log_base"] == "e"

    def test_too_few_points(self, tmp_path, capsys):
        rows = [dict(n=n, reps=1000, ks=0.1, dkw_radius=0.05, u_n=1.0, v_n=1.0, bound_ratio=0.5)
                for n in (16, 32)]
        source = write_rows(str(tmp_path / "sim.csv"), "simulate", rows)
        assert main(["rate-fit", "--input", source, "--out", str(tmp_path)]) == EXIT_CONFIG
        assert "input" in capsys.readouterr().err

    def test_input_required(self, tmp_path, capsys):
        assert main(["rate-fit", "--out", str(tmp_path)]) == EXIT_CONFIG
        assert "input" in capsys.readouterr().err


class TestAugmentDemo:

    def test_linf_mode_normalises_every_path(self, tmp_path):
        args = ["augment-demo", "--model", SWITCHING, "--n-grid", "64", "--reps", "200",
                "--mode", "Linf", "--out", str(tmp_path)]
        assert main(args) == EXIT_OK
        rows = read_rows(os.path.join(tmp_path, "augment_demo.csv"))
        assert len(rows) == 200
        assert all(r["n_hat"] == 120 for r in rows)
        assert all(abs(r["V2_after_residual"]) <= 1e-12 for r in rows)

        (plan,) = read_rows(os.path.join(tmp_path, "augment_plan.csv"))
        assert plan["mode"] == "Linf" and plan["total_length"] == 121
        assert plan["d"] == pytest.approx(63.0)
        tails = read_rows(os.path.join(tmp_path, "augment_tails.csv"))
        assert sorted({t["path_id"] for t in tails}) == [0, 1, 2, 3, 4]
        assert len(tails) == 5 * 57
        assert all(abs(t["value"]) <= 1.5 for t in tails)
        hist = read_rows(os.path.join(tmp_path, "augment_residuals.csv"))
        assert sum(b["count"] for b in hist) == 200

    def test_l1_mode_reports_failures(self, tmp_path, capsys):
        args = ["augment-demo", "--model", SWITCHING, "--n-grid", "8", "--reps", "200",
                "--mode", "L1", "--out", str(tmp_path)]
        assert main(args) == EXIT_AUGMENTATION
        rows = read_rows(os.path.join(tmp_path, "augment_demo.csv"))
        assert 0 < len(rows) < 200
        assert f"augmentation failed on {200 - len(rows)} of 200 paths" in capsys.readouterr().err
        with open(os.path.join(tmp_path, "log.txt")) as f:
            log = f.read()
        assert "negative residual variance" in log
        assert "tail steps but the plan allows" in log

    def test_independent_of_worker_count(self, tmp_path):
        outputs = []
        for workers in (1, 2):
            out = tmp_path / str(workers)
            args = ["augment-demo", "--model", SWITCHING, "--n-grid", "8,16", "--reps", "600",
                    "--mode", "L1", "--out", str(out), "--workers", str(workers)]
            assert main(args) == EXIT_AUGMENTATION
            outputs.append([read_bytes(out / name) for name in
                            ("augment_demo.csv", "augment_tails.csv", "augment_residuals.csv")])
        assert outputs[0] == outputs[1]


class TestLinearProcess:

    def test_two_tap(self, tmp_path):
        args = ["linear-process", "--coeffs", "0:1,1:1", "--model", "scaled(c=1)", "--p", "inf",
                "--n-grid", "16,32,64", "--reps", "200", "--out", str(tmp_path), "--workers", "1"]
        assert main(args) == EXIT_OK
        rows = read_rows(os.path.join(tmp_path, "linear_process.csv"))
        assert [r["n"] for r in rows] == [16, 32, 64]
        assert all(r["g_norm"] == 1.0 and r["p"] == math.inf for r in rows)

    def test_finite_moment_logs_condition(self, tmp_path):
        args = ["linear-process", "--coeffs", "0:1,1:1", "--p", "3", "--n-grid", "16,32",
                "--reps", "100", "--out", str(tmp_path), "--workers", "1"]
        assert main(args) == EXIT_OK
        with open(tmp_path / "log.txt") as f:
            log = f.read()
        assert "[verdict]:CONVERGES" in log

    def test_coeffs_file(self, tmp_path):
        path = tmp_path / "coeffs.csv"
        path.write_text("index,value\n0,1\n1,1/2\n")
        args = ["linear-process", "--coeffs-file", str(path), "--n-grid", "16,32",
                "--reps", "100", "--out", str(tmp_path / "out"), "--workers", "1"]
        assert main(args) == EXIT_OK

    def test_vanishing_martingale_part(self, tmp_path, capsys):
        args = ["linear-process", "--coeffs", "0:1,1:-1", "--n-grid", "16", "--reps", "100",
                "--out", str(tmp_path), "--workers", "1"]
        assert main(args) == EXIT_CONFIG
        assert "invalid configuration: coeffs: A = " in capsys.readouterr().err

    def test_innovations_must_be_normalised(self, tmp_path, capsys):
        args = ["linear-process", "--coeffs", "0:1,1:1", "--model", SWITCHING, "--n-grid", "16",
                "--reps", "100", "--out", str(tmp_path), "--workers", "1"]
        assert main(args) == EXIT_CONFIG
        assert "invalid configuration: model: innovations must be stationary" in capsys.readouterr().err


class TestLemmaCheck:

    def test_no_violations(self, tmp_path):
        args = ["lemma-check", "--joints", "100", "--seed", "3", "--out", str(tmp_path), "--workers", "1"]
        assert main(args) == EXIT_OK
        rows = read_rows(os.path.join(tmp_path, "lemma_check.csv"))
        assert len(rows) == 100 * 9
        assert all(r["violations"] == 0 for r in rows)
        assert {r["r"] for r in rows} == {1.0, 2.0, math.inf}


class TestConfigErrors:

    @pytest.mark.parametrize("extra,field", [
        (["--n-grid", "32,16"], "n_grid"),
        (["--n-grid", "16", "--reps", "10"], "reps"),
        (["--model", "bogus(c=1)"], "model"),
        (["--model", "scaled(c=-1)"], "model"),
        (["--delta-conf", "1.5"], "delta_conf"),
    ])
    def test_exit_two_names_field(self, tmp_path, capsys, extra, field):
        args = ["simulate", "--out", str(tmp_path), "--workers", "1", "--reps", "100", "--n-grid", "8,16,32"]
        assert main(args + extra) == EXIT_CONFIG
        assert field in capsys.readouterr().err

    def test_missing_config_file(self, tmp_path, capsys):
        assert main(["simulate", "--config", str(tmp_path / "nope.txt")]) == EXIT_CONFIG
        assert "config" in capsys.readouterr().err

    def test_unknown_key(self):
        with pytest.raises(ConfigError) as info:
            build_config("simulate", {"colour": "red"})
        assert info.value.field == "colour"


class TestConfigFiles:

    def test_flags_override_file(self, tmp_path):
        path = tmp_path / "exp.txt"
        path.write_text("# sweep\nreps=500\nseed=3\nn-grid=2^4..2^6\n")
        cfg = build_config("simulate", read_kv(path), {"seed": 9})
        assert cfg.reps == 500
        assert cfg.seed == 9
        assert cfg.n_grid == [16, 32, 64]

    def test_echo_round_trip(self, tmp_path):
        args = ["lemma-check", "--joints", "2", "--r-values", "1,inf", "--out", str(tmp_path), "--workers", "1"]
        assert main(args) == EXIT_OK
        metadata = tmp_path / "run_metadata.txt"
        cfg = build_config("lemma-check", read_kv(metadata))
        again = write_kv(str(tmp_path / "again.txt"), cfg.echo())
        assert read_bytes(again) == read_bytes(metadata)
        assert cfg.r_values == [1.0, math.inf]

    def test_int_list_forms(self):
        assert parse_int_list("2^4..2^6") == [16, 32, 64]
        assert parse_int_list("3..5") == [3, 4, 5]
        assert parse_int_list("16, 32") == [16, 32]


class TestDescriptors:

    @pytest.mark.parametrize("model", [
        ScaledRademacher(1.0),
        PredictableScaleRademacher(0.5, 1.5, 1.0),
        AdditiveNoise(base=ScaledRademacher(1.0), noise=UniformNoise(0.5)),
        AdditiveNoise(base=ScaledRademacher(2.0), noise=NormalNoise(0.3), M=3.0),
        MultiplicativeNoise(base=PredictableScaleRademacher(1.0, 2.0),
                            noise=DiscreteDist.from_atoms([(-3.0, 1 / 18), (0.0, 8 / 9), (3.0, 1 / 18)]), M=2.0),
    ])
    def test_round_trip(self, model):
        assert parse_model(model.descriptor()).descriptor() == model.descriptor()

    def test_noise_shorthands(self):
        model = parse_model("multiplicative(base=scaled(c=1), noise=rademacher(scale=2), M=2)")
        assert model.noise.descriptor() == "discrete(values=[-2.0, 2.0], probs=[0.5, 0.5])"

    def test_coefficients(self):
        assert parse_coeffs("0:1,1:1/2").as_dict() == {0: 1, 1: 0.5}
        assert parse_coeffs("geometric(rho=0.5)").descriptor() == "geometric(rho=0.5)"
        with pytest.raises(ConfigError):
            parse_coeffs("harmonic(s=2)")


class TestCsv:

    def test_round_trip_preserves_floats(self, tmp_path):
        rows = [dict(n=4, reps=100, ks=0.1, dkw_radius=1 / 3, u_n=1e-300, v_n=math.pi,
                     bound_ratio=math.nan)]
        path = write_rows(str(tmp_path / "s.csv"), "simulate", rows)
        (back,) = read_rows(path)
        assert back["ks"] == 0.1 and back["dkw_radius"] == 1 / 3
        assert back["u_n"] == 1e-300 and back["v_n"] == math.pi
        assert math.isnan(back["bound_ratio"])

    def test_lemma_rows_keep_real_exponent(self, tmp_path):
        rows = [dict(joint_id=0, k=2.5, r=math.inf, beta=0.1, delta_x=0.2, delta_xy=0.25,
                     bound=0.6, slack=0.35, violations=0)]
        (back,) = read_rows(write_rows(str(tmp_path / "l.csv"), "lemma-check", rows))
        assert back["k"] == 2.5 and back["r"] == math.inf


class TestLogger:

    def test_line_format(self, tmp_path):
        logger = Logger(str(tmp_path / "logs" / "log.txt"), continue_=False, echo=False)
        line = logger.update(3, ks=0.1)
        assert line == "[0000003]\t[ks]:0.1\t\n"
        logger.warn(4, "slow")
        with open(tmp_path / "logs" / "log.txt") as f:
            assert f.read().splitlines()[1] == "[0000004]\t[warning]:slow\t"
