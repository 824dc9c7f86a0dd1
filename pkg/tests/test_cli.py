"""End-to-end CLI tests run through subprocesses."""

import json
import math
import subprocess
import sys

import numpy as np
import pytest

from midmetric import EmbeddingSet, write_embeddings

CLI = [sys.executable, "-m", "midmetric"]


def run_cli(*argv, env=None):
    return subprocess.run(
        CLI + [str(a) for a in argv],
        capture_output=True,
        text=True,
        env=env,
        timeout=300,
    )


def _write(tmp_path, name, data, modality="image", tag="t"):
    p = tmp_path / name
    write_embeddings(
        EmbeddingSet(modality=modality, model_tag=tag, data=np.asarray(data, dtype=np.float64)),
        p,
    )
    return p


def _synth_fit(tmp_path, dim=2, rho=0.0, n=2000, seed=7, eps_args=()):
    x = tmp_path / "x.emb1"
    y = tmp_path / "y.emb1"
    model = tmp_path / "model.midm"
    r1 = run_cli("synth", "--dim", dim, "--rho", rho, "--n", n, "--seed", seed,
                 "--out-x", x, "--out-y", y)
    assert r1.returncode == 0, r1.stderr
    r2 = run_cli("fit", "--x", x, "--y", y, "--out", model, *eps_args)
    assert r2.returncode == 0, r2.stderr
    return x, y, model


class TestPipeline:
    def test_independent_pairs_score_near_zero(self, tmp_path):
        x, y, model = _synth_fit(tmp_path, dim=1, rho=0.0, n=100_000, seed=7)
        r = run_cli("mid", "--model", model, "--x", x, "--y", y)
        assert r.returncode == 0, r.stderr
        agg = dict(
            line.split("\t")
            for line in r.stdout.splitlines()[r.stdout.splitlines().index("# aggregate") + 1 :]
        )
        assert abs(float(agg["mid"])) <= 0.02
        assert int(agg["n_pairs"]) == 100_000

    def test_report_file_and_manifest(self, tmp_path):
        x, y, model = _synth_fit(tmp_path, n=500, seed=3)
        report = tmp_path / "scores.tsv"
        r = run_cli("mid", "--model", model, "--x", x, "--y", y, "--report", report)
        assert r.returncode == 0, r.stderr
        assert r.stdout == ""
        text = report.read_text(encoding="utf-8")
        assert text.startswith("# per-pair PMI\n0\t")
        assert "# aggregate" in text
        man = json.loads((tmp_path / "scores.tsv.manifest.json").read_text())
        assert man["command"] == "mid"
        assert man["epsilon"] == 5e-4
        assert set(man["inputs"]) == {"model", "x", "y"}
        for entry in man["inputs"].values():
            assert len(entry["sha256"]) == 64

    def test_pretty_mode(self, tmp_path):
        x, y, model = _synth_fit(tmp_path, n=300, seed=4)
        r = run_cli("mid", "--model", model, "--x", x, "--y", y, "--pretty")
        assert r.returncode == 0
        assert "MID" in r.stdout and "epsilon" in r.stdout

    def test_reruns_are_byte_identical(self, tmp_path):
        x, y, model = _synth_fit(tmp_path, n=400, seed=9)
        out1 = tmp_path / "r1.tsv"
        out2 = tmp_path / "r2.tsv"
        for out in (out1, out2):
            r = run_cli("mid", "--model", model, "--x", x, "--y", y, "--report", out)
            assert r.returncode == 0
        assert out1.read_bytes() == out2.read_bytes()
        m1 = json.loads((tmp_path / "r1.tsv.manifest.json").read_text())
        m2 = json.loads((tmp_path / "r2.tsv.manifest.json").read_text())
        m1.pop("output"), m2.pop("output")
        assert m1 == m2

    def test_synth_manifest_carries_oracle(self, tmp_path):
        x = tmp_path / "x.emb1"
        y = tmp_path / "y.emb1"
        r = run_cli("synth", "--dim", 4, "--rho", 0.5, "--n", 100, "--seed", 1,
                    "--out-x", x, "--out-y", y)
        assert r.returncode == 0
        man = json.loads((tmp_path / "x.emb1.manifest.json").read_text())
        assert man["oracle_mi"] == pytest.approx(-2.0 * math.log(0.75))
        assert man["seed"] == 1


class TestEpsilon:
    def test_default_epsilon_in_manifest(self, tmp_path):
        _, _, model = _synth_fit(tmp_path, n=200, seed=5)
        man = json.loads((tmp_path / "model.midm.manifest.json").read_text())
        assert man["epsilon"] == 5e-4

    def test_foil_preset_sets_1e_minus_15(self, tmp_path):
        _synth_fit(tmp_path, n=200, seed=5, eps_args=("--eps-preset", "foil"))
        man = json.loads((tmp_path / "model.midm.manifest.json").read_text())
        assert man["epsilon"] == 1e-15

    def test_explicit_eps_echoed(self, tmp_path):
        _synth_fit(tmp_path, n=200, seed=5, eps_args=("--eps", "0.01"))
        man = json.loads((tmp_path / "model.midm.manifest.json").read_text())
        assert man["epsilon"] == 0.01

    def test_eps_and_preset_conflict(self, tmp_path):
        x = _write(tmp_path, "x.emb1", np.random.default_rng(0).normal(size=(50, 2)))
        y = _write(tmp_path, "y.emb1", np.random.default_rng(1).normal(size=(50, 2)))
        r = run_cli("fit", "--x", x, "--y", y, "--out", tmp_path / "m",
                    "--eps", "0.1", "--eps-preset", "foil")
        assert r.returncode == 1


class TestExitCodes:
    def test_unknown_flag_is_usage_error(self, tmp_path):
        r = run_cli("fit", "--nonsense")
        assert r.returncode == 1
        assert "usage error" in r.stderr

    def test_missing_subcommand(self):
        r = run_cli()
        assert r.returncode == 1

    def test_mismatched_n_is_data_error(self, tmp_path):
        x = _write(tmp_path, "x.emb1", np.zeros((3, 2)) + np.arange(6).reshape(3, 2))
        y = _write(tmp_path, "y.emb1", np.ones((5, 2)) * np.arange(10).reshape(5, 2))
        r = run_cli("fit", "--x", x, "--y", y, "--out", tmp_path / "m")
        assert r.returncode == 2
        assert "3" in r.stderr and "5" in r.stderr

    def test_missing_file_is_data_error(self, tmp_path):
        r = run_cli("fit", "--x", tmp_path / "no.emb1", "--y", tmp_path / "no.emb1",
                    "--out", tmp_path / "m")
        assert r.returncode == 2
        assert "data error" in r.stderr

    def test_pmi_row_out_of_range(self, tmp_path):
        x, y, model = _synth_fit(tmp_path, n=50, seed=2)
        r = run_cli("pmi", "--model", model, "--x", x, "--y", y, "--row", 50)
        assert r.returncode == 2
        assert "out of range" in r.stderr


class TestPmi:
    def test_single_pair_value(self, tmp_path):
        x, y, model = _synth_fit(tmp_path, n=200, seed=8)
        r = run_cli("pmi", "--model", model, "--x", x, "--y", y, "--row", 3)
        assert r.returncode == 0
        key, val = r.stdout.strip().split("\t")
        assert key == "pmi"
        float(val)  # parses

    def test_matches_report_row(self, tmp_path):
        x, y, model = _synth_fit(tmp_path, n=100, seed=8)
        single = run_cli("pmi", "--model", model, "--x", x, "--y", y, "--row", "7")
        report = run_cli("mid", "--model", model, "--x", x, "--y", y)
        want = float(single.stdout.strip().split("\t")[1])
        row7 = [l for l in report.stdout.splitlines() if l.startswith("7\t")][0]
        # batch BLAS accumulation may differ from the one-row path at ulp level
        assert float(row7.split("\t")[1]) == pytest.approx(want, rel=1e-12)


class TestBaselineCommand:
    def test_clip_s_identical_rows(self, tmp_path):
        x = _write(tmp_path, "x.emb1", [[3.0, 4.0], [1.0, 0.0]])
        y = _write(tmp_path, "y.emb1", [[3.0, 4.0], [1.0, 0.0]], modality="text")
        r = run_cli("baseline", "--metric", "clip-s", "--x", x, "--y", y)
        assert r.returncode == 0
        lines = r.stdout.splitlines()
        assert lines[0] == "0\t2.5"
        assert lines[1] == "1\t2.5"
        assert lines[-1] == "mean_clip_s\t2.5"

    def test_fid_identical_sets_zero(self, tmp_path):
        rng = np.random.default_rng(3)
        data = rng.normal(size=(40, 3))
        a = _write(tmp_path, "a.emb1", data)
        b = _write(tmp_path, "b.emb1", data)
        r = run_cli("baseline", "--metric", "fid", "--a", a, "--b", b)
        assert r.returncode == 0
        assert abs(float(r.stdout.split("\t")[1])) < 1e-9

    def test_missing_flags_listed(self, tmp_path):
        r = run_cli("baseline", "--metric", "fid")
        assert r.returncode == 1
        assert "--a" in r.stderr and "--b" in r.stderr

    def test_infonce(self, tmp_path):
        x = _write(tmp_path, "x.emb1", [[1.0, 0.0]])
        cands = _write(tmp_path, "c.emb1", [[1.0, 1.0], [1.0, -1.0]], modality="text")
        r = run_cli("baseline", "--metric", "infonce", "--x", x,
                    "--candidates", cands, "--matched", 0)
        assert r.returncode == 0
        first = float(r.stdout.splitlines()[0].split("\t")[1])
        assert first == pytest.approx(math.log(0.5), abs=1e-12)

    def test_rprec(self, tmp_path):
        x = _write(tmp_path, "x.emb1", [[1.0, 0.0, 0.0]])
        ty = _write(tmp_path, "ty.emb1", [[1.0, 0.0, 0.0]], modality="text")
        d = _write(tmp_path, "d.emb1", [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], modality="text")
        r = run_cli("baseline", "--metric", "rprec", "--x", x, "--true-y", ty,
                    "--distractors", d)
        assert r.returncode == 0
        assert r.stdout.splitlines()[-1] == "r_precision\t1.0"

    def test_refclip_s_report_and_manifest(self, tmp_path):
        x = _write(tmp_path, "x.emb1", [[0.8, 0.6]])
        y = _write(tmp_path, "y.emb1", [[1.0, 0.0]], modality="text")
        refs = _write(tmp_path, "refs.emb1", [[0.5, math.sqrt(0.75)]], modality="text")
        out = tmp_path / "rc.tsv"
        r = run_cli("baseline", "--metric", "refclip-s", "--x", x, "--y", y,
                    "--refs", refs, "--report", out)
        assert r.returncode == 0
        first = out.read_text().splitlines()[0].split("\t")
        assert first[0] == "0"
        assert float(first[1]) == pytest.approx(0.8, abs=1e-12)
        man = json.loads((tmp_path / "rc.tsv.manifest.json").read_text())
        assert man["metric"] == "refclip-s"

    def test_refmid(self, tmp_path):
        y = _write(tmp_path, "y.emb1", [[1.0, 0.0]], modality="text")
        refs = _write(tmp_path, "refs.emb1", [[0.5, math.sqrt(0.75)]], modality="text")
        r = run_cli("baseline", "--metric", "refmid", "--y", y, "--refs", refs,
                    "--mid-score", "10.0")
        assert r.returncode == 0
        assert float(r.stdout.splitlines()[0].split("\t")[1]) == pytest.approx(80.0, abs=1e-10)

    def test_non_psd_fid_is_numeric_error(self, tmp_path):
        # Two identical rows twice -> rank-deficient is fine (PSD); to force a
        # numeric error, feed covariance through a file of colinear rows and a
        # doctored candidate: simplest honest trigger is a 1-row file, which
        # the CLI rejects as a data error instead.
        a = _write(tmp_path, "a.emb1", [[1.0, 2.0]])
        b = _write(tmp_path, "b.emb1", [[1.0, 2.0], [2.0, 1.0]])
        r = run_cli("baseline", "--metric", "fid", "--a", a, "--b", b)
        assert r.returncode == 2
        assert "at least 2 rows" in r.stderr


class TestCorr:
    def _table(self, tmp_path, n=60, seed=5):
        rng = np.random.default_rng(seed)
        scores = rng.normal(size=n)
        judged = np.clip(np.round(scores * 2 + rng.normal(scale=0.5, size=n)), -3, 3)
        p = tmp_path / "j.tsv"
        lines = ["id\tscore\tjudgment"]
        for i in range(n):
            lines.append(f"row{i}\t{float(scores[i])!r}\t{float(judged[i])!r}")
        p.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return p

    def test_tau_b_runs(self, tmp_path):
        p = self._table(tmp_path)
        r = run_cli("corr", "--judgments", p, "--tau", "b")
        assert r.returncode == 0
        key, val = r.stdout.strip().split("\t")
        assert key == "tau_b"
        assert -1.0 <= float(val) <= 1.0

    def test_exact_and_mergesort_agree_bytewise(self, tmp_path):
        p = self._table(tmp_path, n=200, seed=11)
        outs = []
        for method in ("exact", "mergesort"):
            r = run_cli("corr", "--judgments", p, "--tau", "c", "--method", method)
            assert r.returncode == 0
            outs.append(r.stdout)
        assert outs[0] == outs[1]

    def test_threads_flag_and_env(self, tmp_path):
        import os

        p = self._table(tmp_path, n=150, seed=13)
        base = run_cli("corr", "--judgments", p, "--tau", "b", "--threads", "1")
        four = run_cli("corr", "--judgments", p, "--tau", "b", "--threads", "4")
        env = dict(os.environ, MIDM_THREADS="3")
        via_env = run_cli("corr", "--judgments", p, "--tau", "b", env=env)
        assert base.stdout == four.stdout == via_env.stdout

    def test_bad_env_thread_count(self, tmp_path):
        import os

        p = self._table(tmp_path, n=20)
        env = dict(os.environ, MIDM_THREADS="many")
        r = run_cli("corr", "--judgments", p, "--tau", "b", env=env)
        assert r.returncode == 1

    def test_all_tied_scores_exit_2(self, tmp_path):
        p = tmp_path / "tied.tsv"
        p.write_text("a\t1.0\t1\nb\t1.0\t2\nc\t1.0\t3\n", encoding="utf-8")
        r = run_cli("corr", "--judgments", p, "--tau", "b")
        assert r.returncode == 2
        assert "zero denominator" in r.stderr


class TestCurveCommands:
    def test_shuffle_curve_output(self, tmp_path):
        x, y, model = _synth_fit(tmp_path, dim=4, rho=0.8, n=4000, seed=20)
        out = tmp_path / "curve.tsv"
        r = run_cli("shuffle-curve", "--model", model, "--x", x, "--y", y,
                    "--ratios", "0,0.5,1", "--seed", 2, "--repeats", 2, "--out", out)
        assert r.returncode == 0, r.stderr
        lines = out.read_text().splitlines()
        assert lines[0] == "x\tvalue\tstderr"
        assert len(lines) == 4
        vals = [float(l.split("\t")[1]) for l in lines[1:]]
        assert vals[0] > vals[1] > vals[2]
        man = json.loads((tmp_path / "curve.tsv.manifest.json").read_text())
        assert man["ratios"] == [0.0, 0.5, 1.0]
        assert man["seed"] == 2

    def test_parsimony_output(self, tmp_path):
        x, y, model = _synth_fit(tmp_path, dim=3, rho=0.7, n=2000, seed=30)
        # evaluation batch: first 200 rows re-used; judgments follow the
        # oracle ordering so the correlation is strongly positive
        from midmetric import PairBatch, load_model, mid, read_embeddings

        ev_x = tmp_path / "ev_x.emb1"
        ev_y = tmp_path / "ev_y.emb1"
        xs = read_embeddings(x)
        ys = read_embeddings(y)
        write_embeddings(EmbeddingSet("image", "t", xs.data[:200]), ev_x)
        write_embeddings(EmbeddingSet("text", "t", ys.data[:200]), ev_y)
        scores = mid(load_model(model), PairBatch(xs.data[:200], ys.data[:200])).pmi
        judged = np.digitize(scores, np.quantile(scores, [0.25, 0.5, 0.75]))
        jt = tmp_path / "j.tsv"
        jt.write_text(
            "\n".join(
                f"i{i}\t{float(scores[i])!r}\t{int(judged[i])}" for i in range(200)
            )
            + "\n",
            encoding="utf-8",
        )
        out = tmp_path / "pars.tsv"
        r = run_cli("parsimony", "--x", x, "--y", y, "--eval-x", ev_x, "--eval-y", ev_y,
                    "--judgments", jt, "--fractions", "0.5,1.0", "--repeats", 2,
                    "--seed", 3, "--out", out)
        assert r.returncode == 0, r.stderr
        lines = out.read_text().splitlines()
        assert len(lines) == 3
        full = float(lines[2].split("\t")[1])
        # judgments are a 4-level binning of these very scores; tau_b's tie
        # correction caps it near sqrt(3)/2 ~ 0.866 for four equal bins
        assert full > 0.85
        man = json.loads((tmp_path / "pars.tsv.manifest.json").read_text())
        assert man["fractions"] == [0.5, 1.0]
        assert man["tau"] == "b"

    def test_foil_acc_command(self, tmp_path):
        x, y, model = _synth_fit(tmp_path, dim=8, rho=0.8, n=10_000, seed=40)
        r = run_cli("foil-acc", "--model", model, "--x", x, "--y", y,
                    "--shift", 2.0, "--subspace-dim", 8, "--seed", 5)
        assert r.returncode == 0, r.stderr
        key, val = r.stdout.strip().split("\t")
        assert key == "foil_accuracy"
        assert float(val) >= 0.95

    def test_reason_acc_command(self, tmp_path):
        for name, vals in (("real", [1.0, 2.0]), ("fake", [0.5, 1.5]), ("foiled", [0.1, 1.4])):
            (tmp_path / f"{name}.txt").write_text("\n".join(map(repr, vals)) + "\n")
        r = run_cli("reason-acc", "--real", tmp_path / "real.txt",
                    "--fake", tmp_path / "fake.txt", "--foiled", tmp_path / "foiled.txt")
        assert r.returncode == 0
        assert r.stdout.strip() == "lowest_of_three_accuracy\t1.0"

    def test_reason_acc_bad_line(self, tmp_path):
        (tmp_path / "real.txt").write_text("1.0\nnope\n")
        (tmp_path / "fake.txt").write_text("1.0\n2.0\n")
        (tmp_path / "foiled.txt").write_text("0.0\n0.0\n")
        r = run_cli("reason-acc", "--real", tmp_path / "real.txt",
                    "--fake", tmp_path / "fake.txt", "--foiled", tmp_path / "foiled.txt")
        assert r.returncode == 2
        assert "line 2" in r.stderr
