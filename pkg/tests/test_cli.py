"""Command-line interface: exit codes, report structure, and reproducible
simulation output."""

import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from pairlogit.cli import InferenceReport, z_critical

from conftest import make_paired


def write_csv(path, data):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        p = data.covariates.shape[1]
        w.writerow(["pair_id", "treatment", "response"] + [f"x{j}" for j in range(p)])
        for i in range(data.pair_id.size):
            w.writerow(
                [data.pair_id[i], data.treatment[i], data.response[i]]
                + [repr(float(v)) for v in data.covariates[i]]
            )


def run_cli(*args):
    proc = subprocess.run(
        [sys.executable, "-m", "pairlogit.cli", *args],
        capture_output=True, text=True,
    )
    return proc.returncode, proc.stdout, proc.stderr


def stderr_error(stderr):
    return json.loads(stderr.strip().splitlines()[-1])


@pytest.fixture(scope="module")
def mixed_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "pairs.csv"
    write_csv(path, make_paired(n_pairs=60, seed=1))
    return str(path)


class TestFitExitCodes:
    def test_bclr_fit_ok(self, mixed_csv):
        code, out, err = run_cli(
            "fit", mixed_csv, "--method", "bclr", "--prior", "g",
            "--warmup", "300", "--draws", "200", "--seed", "3",
        )
        assert code == 0, err
        rep = json.loads(out)
        assert rep["method"] == "bclr:lr:g"
        assert rep["n_discordant"] > 0
        assert rep["diagnostics"]["rhat"]
        assert isinstance(rep["reject"], bool)
        lo, hi = rep["intervals"][0]
        assert lo < rep["estimate"] < hi

    def test_baseline_fit_ok(self, mixed_csv):
        code, out, _ = run_cli("fit", mixed_csv, "--method", "clr")
        assert code == 0
        rep = json.loads(out)
        assert 0.0 <= rep["wald_p"] <= 1.0
        assert rep["diagnostics"] is None

    def test_malformed_header_exit_2(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("id,treat,resp,x0\n1,1,0,0.5\n1,0,1,0.2\n")
        code, _, err = run_cli("fit", str(bad))
        assert code == 2
        assert stderr_error(err)["error"] == "MalformedInput"

    def test_ragged_row_reports_line_number(self, tmp_path):
        bad = tmp_path / "ragged.csv"
        bad.write_text(
            "pair_id,treatment,response,x0\n1,1,0,0.5\n1,0,1\n"
        )
        code, _, err = run_cli("fit", str(bad))
        assert code == 2
        assert "line 3" in stderr_error(err)["message"]

    def test_insufficient_concordant_exit_3(self, tmp_path):
        # every pair discordant: nothing to premodel on
        data = make_paired(n_pairs=40, seed=2)
        disc = data.response[0::2] != data.response[1::2]
        keep = np.repeat(disc, 2)
        sub = type(data)(
            pair_id=data.pair_id[keep], treatment=data.treatment[keep],
            response=data.response[keep], covariates=data.covariates[keep],
        )
        path = tmp_path / "disc.csv"
        write_csv(path, sub)
        code, _, err = run_cli("fit", str(path), "--method", "bclr")
        assert code == 3
        payload = stderr_error(err)
        assert payload["error"] == "InsufficientConcordant"
        assert "--method clr" in payload["message"]

    def test_no_discordant_exit_4(self, tmp_path):
        data = make_paired(n_pairs=40, seed=3)
        conc = data.response[0::2] == data.response[1::2]
        keep = np.repeat(conc, 2)
        sub = type(data)(
            pair_id=data.pair_id[keep], treatment=data.treatment[keep],
            response=data.response[keep], covariates=data.covariates[keep],
        )
        path = tmp_path / "conc.csv"
        write_csv(path, sub)
        code, _, err = run_cli("fit", str(path), "--method", "bclr")
        assert code == 4
        assert stderr_error(err)["error"] == "NoDiscordantPairs"

    def test_degenerate_pmp_exit_5(self, tmp_path):
        # identical covariate differences leave no residual direction for
        # the information factor, so every transition diverges
        rows = []
        for i in range(30):
            pid = i
            if i < 10:
                rows.append((pid, 1, 1, 0.5 + 0.01 * i))
                rows.append((pid, 0, 1, 0.5 + 0.01 * i))
            else:
                rows.append((pid, 1, 1, 1.0))
                rows.append((pid, 0, 0, 0.0))
        path = tmp_path / "degen.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["pair_id", "treatment", "response", "x0"])
            w.writerows(rows)
        code, _, err = run_cli(
            "fit", str(path), "--method", "bclr", "--prior", "pmp",
            "--warmup", "100", "--draws", "100",
        )
        assert code == 5
        assert stderr_error(err)["error"] == "SamplerFailure"

    def test_baseline_ignores_prior_with_warning(self, mixed_csv):
        code, out, err = run_cli(
            "fit", mixed_csv, "--method", "lr", "--prior", "pmp"
        )
        assert code == 0
        assert "ignored" in err.lower()
        json.loads(out)

    def test_output_file(self, mixed_csv, tmp_path):
        dest = tmp_path / "report.json"
        code, out, _ = run_cli(
            "fit", mixed_csv, "--method", "gee", "--output", str(dest)
        )
        assert code == 0
        rep = json.loads(dest.read_text())
        assert rep["method"] == "gee"


class TestReportRoundTrip:
    def test_round_trip(self, mixed_csv):
        _, out, _ = run_cli(
            "fit", mixed_csv, "--method", "bclr", "--warmup", "200",
            "--draws", "150",
        )
        rep = InferenceReport.from_dict(json.loads(out))
        again = InferenceReport.from_dict(json.loads(json.dumps(rep.to_dict())))
        assert again == rep


class TestSimulateCommand:
    BASE = [
        "simulate", "--n-total", "40", "--p", "1",
        "--covariates-observed", "1", "--n-sim", "6",
        "--methods", "clr,lr", "--seed", "9",
    ]

    def test_csv_shape_and_config_echo(self):
        code, out, _ = run_cli(*self.BASE)
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0].startswith("# config ")
        echoed = json.loads(lines[0][len("# config "):])
        assert echoed["n_total"] == 40
        assert "threads" not in echoed
        reader = csv.DictReader(lines[1:])
        rows = list(reader)
        assert [r["method"] for r in rows] == ["clr", "lr"]
        for r in rows:
            float(r["power_or_size"]); float(r["mse"]); float(r["coverage"])
            int(r["n_failed"])

    def test_thread_count_does_not_change_bytes(self):
        _, a, _ = run_cli(*self.BASE, "--threads", "1")
        _, b, _ = run_cli(*self.BASE, "--threads", "8")
        assert a == b

    def test_json_format(self):
        code, out, _ = run_cli(*self.BASE, "--format", "json")
        assert code == 0
        payload = json.loads(out)
        assert set(payload["methods"]) == {"clr", "lr"}
        assert payload["n_sim"] == 6

    def test_empty_study_exit_2(self):
        code, _, err = run_cli(
            "simulate", "--n-total", "40", "--n-sim", "0", "--p", "1"
        )
        assert code == 2
        assert stderr_error(err)["error"] == "MalformedInput"

    def test_bad_method_exit_2(self):
        code, _, err = run_cli(
            "simulate", "--n-total", "40", "--methods", "nope", "--n-sim", "2"
        )
        assert code == 2


class TestZCritical:
    def test_matches_known_quantiles(self):
        assert z_critical(0.05) == pytest.approx(1.959964, abs=1e-5)
        assert z_critical(0.01) == pytest.approx(2.575829, abs=1e-5)
        assert z_critical(0.32) == pytest.approx(0.994458, abs=1e-5)
