"""Command-line surface. Exit codes: 0 ok, 1 usage, 2 data error, 3 numeric.

Every value a command prints or writes is rendered with repr(), and manifests
carry no timestamps, so identical argv + files + seed produce byte-identical
outputs. Commands that write a file also write `<file>.manifest.json` echoing
the run parameters (epsilon, seed, input digests).
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import baselines, evalstats, gaussmi, harness, store
from .errors import DataError, NumericError, UsageError

_EPS_HELP = "covariance ridge (default 5e-4)"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _fmt(x) -> str:
    return repr(float(x))


def _manifest_path(out_path: str) -> str:
    return out_path + ".manifest.json"


def _input_entry(path: str) -> dict:
    return {"path": path, "sha256": store.file_digest(path)}


def _write_run_manifest(out_path: str, command: str, *, epsilon=None, seed=None,
                        inputs=(), extra=None):
    fields = {
        "command": command,
        "output": out_path,
        "inputs": {name: _input_entry(p) for name, p in inputs},
    }
    if epsilon is not None:
        fields["epsilon"] = float(epsilon)
    if seed is not None:
        fields["seed"] = int(seed)
    if extra:
        fields.update(extra)
    store.write_manifest(_manifest_path(out_path), fields)


def _write_text(path: str, text: str):
    store._atomic_write(path, text.encode("utf-8"))


def _resolve_eps(args) -> float:
    if getattr(args, "eps_preset", None) is not None:
        return gaussmi.EPSILON_PRESETS[args.eps_preset]
    return args.eps


def _add_eps_flags(p):
    group = p.add_mutually_exclusive_group()
    group.add_argument("--eps", type=float, default=gaussmi.DEFAULT_EPSILON,
                       help=_EPS_HELP)
    group.add_argument("--eps-preset", choices=sorted(gaussmi.EPSILON_PRESETS),
                       help="named ridge value (foil = 1e-15)")


def _threads(args) -> int:
    if args.threads is not None:
        val = args.threads
    else:
        raw = os.environ.get("MIDM_THREADS", "1")
        try:
            val = int(raw)
        except ValueError:
            raise UsageError(f"MIDM_THREADS must be an integer, got {raw!r}")
    if val < 1:
        raise UsageError(f"thread count must be >= 1, got {val}")
    return val


def _read_scores_file(path: str) -> np.ndarray:
    vals = []
    try:
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    vals.append(float(line))
                except ValueError:
                    raise DataError(
                        f"{path}: line {lineno}: expected one number per line, "
                        f"got {line!r}"
                    ) from None
    except OSError as exc:
        raise DataError(f"{path}: cannot read: {exc}") from None
    if not vals:
        raise DataError(f"{path}: no scores")
    return np.array(vals, dtype=np.float64)


def _load_batch(x_path: str, y_path: str) -> gaussmi.PairBatch:
    x = store.read_embeddings(x_path)
    y = store.read_embeddings(y_path)
    return gaussmi.PairBatch(x_hat=x.data, y_hat=y.data)


def _report_text(report: gaussmi.ScoreReport, pretty: bool) -> str:
    if pretty:
        lines = [f"pairs scored : {report.n_pairs}"]
        lines.append(f"MID          : {report.mid:.6f}")
        lines.append(f"reference MI : {report.mi:.6f}")
        lines.append(f"mean SMD x   : {report.mean_smd_x:.6f}")
        lines.append(f"mean SMD y   : {report.mean_smd_y:.6f}")
        lines.append(f"mean SMD z   : {report.mean_smd_z:.6f}")
        lines.append(f"epsilon      : {report.epsilon:g}")
        return "\n".join(lines) + "\n"
    lines = ["# per-pair PMI"]
    for i, v in enumerate(report.pmi):
        lines.append(f"{i}\t{_fmt(v)}")
    lines.append("# aggregate")
    lines.append(f"mid\t{_fmt(report.mid)}")
    lines.append(f"mi\t{_fmt(report.mi)}")
    lines.append(f"mean_smd_x\t{_fmt(report.mean_smd_x)}")
    lines.append(f"mean_smd_y\t{_fmt(report.mean_smd_y)}")
    lines.append(f"mean_smd_z\t{_fmt(report.mean_smd_z)}")
    lines.append(f"n_pairs\t{report.n_pairs}")
    lines.append(f"epsilon\t{_fmt(report.epsilon)}")
    return "\n".join(lines) + "\n"


def _cmd_fit(args) -> int:
    eps = _resolve_eps(args)
    x = store.read_embeddings(args.x)
    y = store.read_embeddings(args.y)
    model = gaussmi.fit_reference(x, y, epsilon=eps)
    store.save_model(model, args.out)
    _write_run_manifest(
        args.out, "fit", epsilon=eps,
        inputs=[("x", args.x), ("y", args.y)],
        extra={"n_ref": model.n_ref, "dim": model.dim, "mi": model.mi},
    )
    return 0


def _cmd_mid(args) -> int:
    model = store.load_model(args.model)
    batch = _load_batch(args.x, args.y)
    report = gaussmi.mid(model, batch)
    text = _report_text(report, args.pretty)
    if args.report:
        _write_text(args.report, text)
        _write_run_manifest(
            args.report, "mid", epsilon=model.epsilon,
            inputs=[("model", args.model), ("x", args.x), ("y", args.y)],
            extra={"mid": report.mid, "n_pairs": report.n_pairs},
        )
    else:
        sys.stdout.write(text)
    return 0


def _cmd_pmi(args) -> int:
    model = store.load_model(args.model)
    x = store.read_embeddings(args.x)
    y = store.read_embeddings(args.y)
    for name, es in (("x", x), ("y", y)):
        if not 0 <= args.row < es.n:
            raise DataError(
                f"--row {args.row} out of range for {name} with {es.n} rows"
            )
    value = gaussmi.pmi(model, x.data[args.row], y.data[args.row])
    sys.stdout.write(f"pmi\t{_fmt(value)}\n")
    return 0


def _per_row_report(values, aggregate_name: str) -> str:
    lines = [f"{i}\t{_fmt(v)}" for i, v in enumerate(values)]
    lines.append("# aggregate")
    lines.append(f"{aggregate_name}\t{_fmt(np.mean(values))}")
    return "\n".join(lines) + "\n"


_BASELINE_NEEDS = {
    "clip-s": ("x", "y"),
    "refclip-s": ("x", "y", "refs"),
    "refmid": ("y", "refs"),
    "infonce": ("x", "candidates"),
    "rprec": ("x", "true_y", "distractors"),
    "fid": ("a", "b"),
}


def _cmd_baseline(args) -> int:
    cfg = baselines.BaselineConfig(
        clip_s_weight=args.clip_weight,
        refmid_alpha=args.alpha,
        infonce_temperature=args.temperature,
        rprecision_candidates=args.rprec_candidates,
    )
    metric = args.metric
    missing = [
        "--" + name.replace("_", "-")
        for name in _BASELINE_NEEDS[metric]
        if getattr(args, name) is None
    ]
    if missing:
        raise UsageError(f"metric {metric} requires {', '.join(missing)}")
    if metric == "clip-s":
        batch = _load_batch(args.x, args.y)
        vals = [
            baselines.clip_s(batch.x_hat[i], batch.y_hat[i], cfg)
            for i in range(len(batch))
        ]
        text = _per_row_report(vals, "mean_clip_s")
    elif metric == "refclip-s":
        batch = _load_batch(args.x, args.y)
        refs = baselines.ReferenceSetR(store.read_embeddings(args.refs).data)
        vals = [
            baselines.ref_clip_s(batch.x_hat[i], batch.y_hat[i], refs, cfg)
            for i in range(len(batch))
        ]
        text = _per_row_report(vals, "mean_refclip_s")
    elif metric == "refmid":
        if args.mid_score is None:
            raise UsageError("refmid requires --mid-score")
        y = store.read_embeddings(args.y)
        refs = baselines.ReferenceSetR(store.read_embeddings(args.refs).data)
        vals = [
            baselines.ref_mid(args.mid_score, y.data[i], refs, cfg)
            for i in range(y.n)
        ]
        text = _per_row_report(vals, "mean_refmid")
    elif metric == "infonce":
        x = store.read_embeddings(args.x)
        cand = store.read_embeddings(args.candidates)
        vals = [
            baselines.info_nce_score(x.data[i], args.matched, cand.data, cfg)
            for i in range(x.n)
        ]
        text = _per_row_report(vals, "mean_infonce")
    elif metric == "rprec":
        x = store.read_embeddings(args.x)
        true_y = store.read_embeddings(args.true_y)
        distractors = store.read_embeddings(args.distractors)
        if x.n != true_y.n:
            raise DataError(
                f"x has {x.n} rows but true-y has {true_y.n}; rows must align"
            )
        vals = [
            baselines.r_precision(x.data[i], true_y.data[i], distractors.data)
            for i in range(x.n)
        ]
        text = _per_row_report(vals, "r_precision")
    elif metric == "fid":
        a = store.read_embeddings(args.a).data
        b = store.read_embeddings(args.b).data
        for name, m in (("--a", a), ("--b", b)):
            if m.shape[0] < 2:
                raise DataError(f"{name} needs at least 2 rows to fit moments")
        from .matstat import covariance, mean

        mu_a, mu_b = mean(a), mean(b)
        val = baselines.fid(mu_a, covariance(a, mu_a), mu_b, covariance(b, mu_b))
        text = f"fid\t{_fmt(val)}\n"
    else:  # unreachable: argparse restricts choices
        raise UsageError(f"unknown metric {metric}")

    if args.report:
        _write_text(args.report, text)
        _write_run_manifest(
            args.report, f"baseline {metric}",
            inputs=[
                (flag, getattr(args, flag.replace("-", "_")))
                for flag in ("x", "y", "refs", "candidates", "true_y", "distractors",
                             "a", "b")
                if getattr(args, flag.replace("-", "_"), None)
            ],
            extra={"metric": metric},
        )
    else:
        sys.stdout.write(text)
    return 0


def _cmd_shuffle_curve(args) -> int:
    model = store.load_model(args.model)
    batch = _load_batch(args.x, args.y)
    ratios = _parse_float_list(args.ratios, "--ratios")
    points = harness.shuffle_curve(
        model, batch, ratios, seed=args.seed, repeats=args.repeats
    )
    harness.write_curve(points, args.out)
    _write_run_manifest(
        args.out, "shuffle-curve", epsilon=model.epsilon, seed=args.seed,
        inputs=[("model", args.model), ("x", args.x), ("y", args.y)],
        extra={"ratios": ratios, "repeats": args.repeats},
    )
    return 0


def _cmd_parsimony(args) -> int:
    eps = _resolve_eps(args)
    ref_x = store.read_embeddings(args.x)
    ref_y = store.read_embeddings(args.y)
    batch = _load_batch(args.eval_x, args.eval_y)
    judgments = evalstats.read_judgments(args.judgments, aggregate=args.aggregate)
    if len(judgments) != len(batch):
        raise DataError(
            f"judgment table has {len(judgments)} rows but the evaluation batch "
            f"has {len(batch)}; rows must align"
        )
    fractions = _parse_float_list(args.fractions, "--fractions")

    def scores_fn(subset):
        sub_model = gaussmi.fit_reference(
            ref_x.data[subset], ref_y.data[subset], epsilon=eps
        )
        return gaussmi.mid(sub_model, batch).pmi

    points = harness.parsimony_curve(
        scores_fn, ref_x.n, fractions, judgments,
        repeats=args.repeats, seed=args.seed, tau=args.tau,
    )
    harness.write_curve(points, args.out)
    _write_run_manifest(
        args.out, "parsimony", epsilon=eps, seed=args.seed,
        inputs=[("x", args.x), ("y", args.y), ("eval_x", args.eval_x),
                ("eval_y", args.eval_y), ("judgments", args.judgments)],
        extra={"fractions": fractions, "repeats": args.repeats, "tau": args.tau},
    )
    return 0


def _cmd_foil_acc(args) -> int:
    model = store.load_model(args.model)
    batch = _load_batch(args.x, args.y)
    gt, foil = harness.foil_fixture(
        model, batch, shift_sigma=args.shift, subspace_dim=args.subspace_dim,
        seed=args.seed, mode=args.mode,
    )
    acc = evalstats.foil_accuracy(
        gt, foil, tie_rule=args.tie_rule,
        seed=None if args.tie_rule == "half" else args.seed + 1,
    )
    sys.stdout.write(f"foil_accuracy\t{_fmt(acc)}\n")
    return 0


def _cmd_reason_acc(args) -> int:
    real = _read_scores_file(args.real)
    fake = _read_scores_file(args.fake)
    foiled = _read_scores_file(args.foiled)
    acc = evalstats.lowest_of_three_accuracy(real, fake, foiled)
    sys.stdout.write(f"lowest_of_three_accuracy\t{_fmt(acc)}\n")
    return 0


def _cmd_corr(args) -> int:
    table = evalstats.read_judgments(args.judgments, aggregate=args.aggregate)
    threads = _threads(args)
    if args.tau == "b":
        val = evalstats.kendall_tau_b(
            table.scores, table.judgments, method=args.method, threads=threads
        )
    else:
        val = evalstats.kendall_tau_c(
            table.scores, table.judgments, method=args.method, threads=threads
        )
    sys.stdout.write(f"tau_{args.tau}\t{_fmt(val)}\n")
    return 0


def _cmd_synth(args) -> int:
    spec = harness.SyntheticSpec(dim=args.dim, rho=args.rho, n=args.n, seed=args.seed)
    x, y = harness.gen_synthetic(spec)
    store.write_embeddings(x, args.out_x)
    store.write_embeddings(y, args.out_y)
    common = {
        "dim": spec.dim, "rho": spec.rho, "n": spec.n,
        "oracle_mi": spec.oracle_mi,
    }
    _write_run_manifest(args.out_x, "synth", seed=spec.seed, extra=common)
    _write_run_manifest(args.out_y, "synth", seed=spec.seed, extra=common)
    return 0


def _parse_float_list(raw: str, flag: str) -> list:
    try:
        return [float(tok) for tok in raw.split(",") if tok != ""]
    except ValueError:
        raise UsageError(f"{flag} expects comma-separated numbers, got {raw!r}")


def build_parser() -> _Parser:
    parser = _Parser(prog="midm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="COMMAND",
                                parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("fit", help="fit reference moments")
    p.add_argument("--x", required=True, help="reference x embeddings")
    p.add_argument("--y", required=True, help="reference y embeddings")
    _add_eps_flags(p)
    p.add_argument("--out", required=True, help="model file to write")
    p.set_defaults(fn=_cmd_fit)

    p = sub.add_parser("mid", help="score an evaluation batch")
    p.add_argument("--model", required=True)
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--report", help="write the report here instead of stdout")
    p.add_argument("--pretty", action="store_true", help="human-readable output")
    p.set_defaults(fn=_cmd_mid)

    p = sub.add_parser("pmi", help="score a single pair")
    p.add_argument("--model", required=True)
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--row", type=int, default=0, help="row to take from both files")
    p.set_defaults(fn=_cmd_pmi)

    p = sub.add_parser("baseline", help="run a comparison metric")
    p.add_argument("--metric", required=True,
                   choices=["clip-s", "refclip-s", "refmid", "infonce", "rprec", "fid"])
    p.add_argument("--x")
    p.add_argument("--y")
    p.add_argument("--refs")
    p.add_argument("--candidates")
    p.add_argument("--matched", type=int, default=0)
    p.add_argument("--true-y", dest="true_y")
    p.add_argument("--distractors")
    p.add_argument("--a")
    p.add_argument("--b")
    p.add_argument("--mid-score", dest="mid_score", type=float)
    p.add_argument("--clip-weight", dest="clip_weight", type=float, default=2.5)
    p.add_argument("--alpha", type=float, default=3e2)
    p.add_argument("--temperature", type=float, default=100.0)
    p.add_argument("--rprec-candidates", dest="rprec_candidates", type=int,
                   default=100, help=argparse.SUPPRESS)
    p.add_argument("--report")
    p.set_defaults(fn=_cmd_baseline)

    p = sub.add_parser("shuffle-curve", help="misalignment curve")
    p.add_argument("--model", required=True)
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--ratios", default="0,0.25,0.5,0.75,1")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_shuffle_curve)

    p = sub.add_parser("parsimony", help="reference-fraction curve")
    p.add_argument("--x", required=True, help="reference x embeddings")
    p.add_argument("--y", required=True, help="reference y embeddings")
    p.add_argument("--eval-x", dest="eval_x", required=True)
    p.add_argument("--eval-y", dest="eval_y", required=True)
    p.add_argument("--judgments", required=True)
    p.add_argument("--fractions", default="0.1,0.3,0.5,1.0")
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--tau", choices=["b", "c"], default="b")
    p.add_argument("--aggregate", choices=["flatten", "median"], default="flatten")
    _add_eps_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_parsimony)

    p = sub.add_parser("foil-acc", help="foil detection accuracy")
    p.add_argument("--model", required=True)
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--shift", type=float, required=True)
    p.add_argument("--subspace-dim", dest="subspace_dim", type=int, required=True)
    p.add_argument("--mode", choices=["correlated", "orthogonal"],
                   default="correlated")
    p.add_argument("--tie-rule", dest="tie_rule", choices=["half", "random"],
                   default="half")
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(fn=_cmd_foil_acc)

    p = sub.add_parser("reason-acc", help="strict lowest-of-three accuracy")
    p.add_argument("--real", required=True, help="scores, one per line")
    p.add_argument("--fake", required=True)
    p.add_argument("--foiled", required=True)
    p.set_defaults(fn=_cmd_reason_acc)

    p = sub.add_parser("corr", help="rank correlation on a judgment table")
    p.add_argument("--judgments", required=True, help="id<TAB>score<TAB>judgment")
    p.add_argument("--tau", choices=["b", "c"], required=True)
    p.add_argument("--method", choices=["auto", "exact", "mergesort"], default="auto")
    p.add_argument("--aggregate", choices=["flatten", "median"], default="flatten")
    p.add_argument("--threads", type=int, default=None,
                   help="pair-counting threads (default: MIDM_THREADS or 1)")
    p.set_defaults(fn=_cmd_corr)

    p = sub.add_parser("synth", help="generate oracle pairs")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out-x", dest="out_x", required=True)
    p.add_argument("--out-y", dest="out_y", required=True)
    p.set_defaults(fn=_cmd_synth)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3


def entrypoint():
    sys.exit(main())
