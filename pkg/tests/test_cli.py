import subprocess
import sys

from risofdm.cli import main
from risofdm.channel import import_channel_csv
from risofdm.neural import load_params


def run_cli(*args):
    return main(list(args))


def scenario_cfg(tmp_path, **overrides):
    lines = ["carrier_hz = 3.5e9", "bandwidth_hz = 5e6", "n_subcarriers = 32",
             "n_rows = 3", "n_cols = 3", "rng_seed = 7"]
    lines += [f"{k} = {v}" for k, v in overrides.items()]
    path = tmp_path / "scenario.cfg"
    path.write_text("\n".join(lines) + "\n")
    return path


class TestSimulate:
    def test_writes_rate_report(self, tmp_path, capsys):
        cfg = scenario_cfg(tmp_path)
        out = tmp_path / "report.csv"
        code = run_cli("simulate", "--config", str(cfg), "--method", "tv_stm",
                       "--seed", "3", "--out", str(out))
        assert code == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "rate_bps,coherent_bps,xi,b_bits,efficiency_pct,residual_doppler_hz"
        fields = lines[1].split(",")
        assert float(fields[0]) <= float(fields[1])

    def test_quantized_simulation(self, tmp_path):
        cfg = scenario_cfg(tmp_path)
        out = tmp_path / "report.csv"
        assert run_cli("simulate", "--config", str(cfg), "--bits", "4",
                       "--out", str(out)) == 0
        fields = out.read_text().strip().splitlines()[1].split(",")
        assert fields[3] == "4"

    def test_channel_and_config_dumps(self, tmp_path):
        cfg = scenario_cfg(tmp_path)
        chan_csv = tmp_path / "chan.csv"
        cfg_csv = tmp_path / "cfg.csv"
        assert run_cli("simulate", "--config", str(cfg), "--out", str(tmp_path / "r.csv"),
                       "--dump-channel", str(chan_csv),
                       "--dump-config", str(cfg_csv)) == 0
        chan = import_channel_csv(chan_csv)
        assert chan.n_reflectors == 9
        lines = cfg_csv.read_text().strip().splitlines()
        assert lines[0] == "block,reflector,theta_radians"
        assert len(lines) == 1 + 9

    def test_ao_method(self, tmp_path):
        cfg = scenario_cfg(tmp_path)
        out = tmp_path / "report.csv"
        assert run_cli("simulate", "--config", str(cfg), "--method", "ao",
                       "--out", str(out)) == 0

    def test_nn_without_params_fails_cleanly(self, tmp_path, capsys):
        cfg = scenario_cfg(tmp_path)
        code = run_cli("simulate", "--config", str(cfg), "--method", "nn",
                       "--out", str(tmp_path / "r.csv"))
        assert code == 1
        assert "error:" in capsys.readouterr().err


class TestTrainNn:
    def test_trains_and_saves(self, tmp_path):
        cfg = scenario_cfg(tmp_path)
        train_cfg = tmp_path / "train.cfg"
        train_cfg.write_text("epochs = 3\nbatch_size = 4\n")
        out = tmp_path / "params.txt"
        assert run_cli("train-nn", "--config", str(cfg), "--train-config",
                       str(train_cfg), "--realizations", "6", "--seed", "2",
                       "--out", str(out)) == 0
        params = load_params(out)
        assert params.w0.shape == (32, 9)
        # the saved parameters drive simulate --method nn
        assert run_cli("simulate", "--config", str(cfg), "--method", "nn",
                       "--nn-params", str(out), "--out", str(tmp_path / "r.csv")) == 0


class TestSweep:
    def test_oracle_experiment(self, tmp_path):
        out = tmp_path / "oracle.csv"
        assert run_cli("sweep", "--experiment", "oracle_suite", "--trials", "3",
                       "--seed", "4", "--out", str(out)) == 0
        assert out.exists()

    def test_config_file_with_overrides(self, tmp_path):
        exp = tmp_path / "exp.cfg"
        exp.write_text("kind = oracle_suite\ntrials = 2\n")
        out = tmp_path / "o.csv"
        assert run_cli("sweep", "--config", str(exp), "--out", str(out),
                       "--seed", "1") == 0
        assert out.exists()

    def test_missing_experiment_fails_cleanly(self, capsys):
        assert run_cli("sweep") == 1
        assert "error:" in capsys.readouterr().err


class TestOracleVerb:
    def test_runs(self, tmp_path, capsys):
        out = tmp_path / "oracle.csv"
        assert run_cli("oracle", "--instances", "3", "--seed", "8",
                       "--out", str(out)) == 0
        assert "oracle suite" in capsys.readouterr().out


class TestProcessLevel:
    def test_exit_codes_and_error_line(self, tmp_path):
        proc = subprocess.run(
            [sys.executable, "-m", "risofdm.cli", "simulate", "--config",
             str(tmp_path / "missing.cfg")],
            capture_output=True, text=True)
        assert proc.returncode == 1
        assert proc.stderr.startswith("error:")

    def test_byte_identical_reruns(self, tmp_path):
        outs = []
        for name in ("x.csv", "y.csv"):
            out = tmp_path / name
            proc = subprocess.run(
                [sys.executable, "-m", "risofdm.cli", "sweep", "--experiment",
                 "oracle_suite", "--trials", "3", "--seed", "11", "--out", str(out)],
                capture_output=True, text=True)
            assert proc.returncode == 0, proc.stderr
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]
