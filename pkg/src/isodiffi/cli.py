"""Command-line front end: ``isodiffi <subcommand> ...``.

Exit status is 0 on success, 2 on invalid arguments and 1 on runtime errors.
Artifacts are byte-identical for identical arguments; timestamps and timings
go to a provenance sidecar only.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import platform
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from ._backend import BACKEND
from ._parallel import resolve_threads
from .dataio import (
    GLASS_FEATURES,
    load_csv,
    load_glass,
    load_model,
    report_rows,
    save_csv,
    save_model,
    save_report,
    save_table,
    write_json,
)
from .diffi import InlierExplanationWarning, global_diffi, local_diffi, rank_features
from .errors import InvalidArgumentError
from .forest import DataMatrix, fit
from .metrics import metric_record, ordered_emd, t_top_k
from .selection import evaluate_topk, f1_score, full_feature_f1, select_features
from .synth import FAMILIES, NOISE_MODES, SynthSpec, generate, generate_test_outliers

TEST_SEED_OFFSET = 1000


class UsageError(Exception):
    """Bad command-line input detected after parsing."""


# --- helpers -------------------------------------------------------------


def parse_k_values(text: str) -> list[int]:
    """``"1..5"`` or ``"1,3,5"`` (ranges and lists may be mixed)."""
    out: list[int] = []
    try:
        for part in text.split(","):
            part = part.strip()
            if ".." in part:
                lo, hi = part.split("..", 1)
                out.extend(range(int(lo), int(hi) + 1))
            elif part:
                out.append(int(part))
    except ValueError:
        raise UsageError(f"cannot parse k values {text!r}") from None
    if not out:
        raise UsageError("no k values given")
    return out


def parse_vector(text: str) -> np.ndarray:
    path = Path(text)
    if path.is_file():
        text = path.read_text()
    try:
        return np.array([float(v) for v in text.replace("\n", ",").split(",") if v.strip()])
    except ValueError:
        raise UsageError(f"cannot parse vector {text!r}") from None


def _threshold_kwargs(args) -> dict:
    if args.threshold is not None:
        return {"threshold": args.threshold}
    return {"contamination": args.contamination}


def _provenance(args, extra: dict | None = None) -> dict:
    config = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    doc = {
        "command": args.command,
        "config": config,
        "versions": {
            "isodiffi": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
            "backend": BACKEND,
        },
        "threads": resolve_threads(args.threads),
        "created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }
    if extra:
        doc.update(extra)
    return doc


def _sidecar(out: Path) -> Path:
    return out / "provenance.json" if out.is_dir() else out.with_name(out.name + ".provenance.json")


def _emit(args, header, rows, extra=None) -> None:
    """Write a table to ``--out`` (plus provenance) or to stdout."""
    fmt = args.format
    if args.out:
        out = Path(args.out)
        save_table(out, header, rows, fmt)
        write_json(_sidecar(out), _provenance(args, extra))
        return
    if fmt == "json":
        recs = [dict(zip(header, r)) for r in rows]
        sys.stdout.write(json.dumps(recs, indent=2, sort_keys=True, default=_default) + "\n")
    else:
        sys.stdout.write(",".join(header) + "\n")
        for r in rows:
            sys.stdout.write(",".join(_cell(v) for v in r) + "\n")


def _default(v):
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(type(v))


def _cell(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (list, tuple)):
        return " ".join(map(str, v))
    return str(v)


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _suffix(args) -> str:
    return "json" if args.format == "json" else "csv"


def _load_data(args, labels: bool = True):
    if labels:
        return load_csv(args.data, label_column=args.label_column, delimiter=args.delimiter)
    skip = [args.label_column] if args.label_column else []
    return load_csv(args.data, delimiter=args.delimiter, ignore_columns=skip)


# --- subcommands ---------------------------------------------------------


def cmd_fit(args) -> None:
    ds = _load_data(args)
    model = fit(ds.data, args.psi, args.trees, args.seed, n_jobs=args.threads, **_threshold_kwargs(args))
    out = Path(args.out)
    save_model(model, out)
    write_json(_sidecar(out), _provenance(args, {"score_threshold": model.score_threshold}))


def cmd_score(args) -> None:
    model = load_model(args.model)
    ds = _load_data(args, labels=False)
    scores = model.score_samples(ds.data)
    labels = (scores >= model.score_threshold).astype(int)
    _emit(args, ("row", "score", "label"), [(i, float(s), int(lab)) for i, (s, lab) in enumerate(zip(scores, labels))])


def cmd_gfi(args) -> None:
    model = load_model(args.model)
    ds = _load_data(args, labels=False)
    report = global_diffi(model, ds.data, n_jobs=args.threads)
    if args.out:
        out = Path(args.out)
        save_report(report, out, args.format)
        write_json(_sidecar(out), _provenance(args))
    else:
        rows = report_rows(report)
        header = list(rows[0])
        _emit(args, header, [[r[h] for h in header] for r in rows])


def cmd_lfi(args) -> None:
    model = load_model(args.model)
    ds = _load_data(args, labels=False)
    idx = range(ds.data.n) if args.rows == "all" else parse_k_values(args.rows)
    names = model.feature_names
    header = ("row", "score", "status", "ranking") + tuple(f"lfi_{n}" for n in names)
    rows = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", InlierExplanationWarning)
        for i in idx:
            if not 0 <= i < ds.data.n:
                raise UsageError(f"row {i} out of range")
            x = ds.data.values[i]
            rep = local_diffi(model, x)
            rows.append((i, float(model.score_samples(x)[0]), rep.status,
                         [names[j] for j in rep.ranking], *map(float, rep.scores)))
    _emit(args, header, rows)


def cmd_fselect(args) -> None:
    ds = _load_data(args)
    k_values = parse_k_values(args.k)
    kw = _threshold_kwargs(args)
    ranking, agg = select_features(ds.data, args.runs, args.psi, args.trees, args.seed, n_jobs=args.threads, **kw)
    out = _outdir(args)
    ext = _suffix(args)
    names = ds.data.feature_names
    save_table(out / f"ranking.{ext}", ("rank", "feature", "index", "score"),
               [(r + 1, names[j], j, float(agg.scores[j])) for r, j in enumerate(ranking)], args.format)
    save_table(out / f"run_ranks.{ext}", ("run", "seed") + names,
               [(i, s, *map(int, row)) for i, (s, row) in enumerate(zip(agg.seeds, agg.per_run_ranks))], args.format)
    if ds.labels is not None:
        rows = evaluate_topk(ds.data, ranking, k_values, args.repeats, ds.labels,
                             psi=args.psi, n_trees=args.trees, seed=args.seed, n_jobs=args.threads, **kw)
        rows.append(full_feature_f1(ds.data, ds.labels, args.repeats, psi=args.psi, n_trees=args.trees,
                                    seed=args.seed, n_jobs=args.threads, **kw))
        save_table(out / f"f1_vs_k.{ext}", ("k", "features", "median_f1"),
                   [(r.k, [names[j] for j in r.features], r.median_f1) for r in rows], args.format)
    write_json(out / "provenance.json", _provenance(args))


def cmd_synth(args) -> None:
    spec = SynthSpec(args.n, args.anomalies, args.p_noise, args.seed)
    data, labels = generate(spec)
    out = Path(args.out)
    save_csv(out, data, labels)
    extra = {"name": spec.name}
    if args.test_outliers:
        test, fam = generate_test_outliers(args.per_family, args.seed + TEST_SEED_OFFSET, args.p_noise, args.noise)
        fam_code = {f: i for i, f in enumerate(FAMILIES)}
        save_csv(Path(args.test_outliers), test, np.array([fam_code[f] for f in fam]), label_name="family")
        extra["families"] = list(FAMILIES)
    write_json(_sidecar(out), _provenance(args, extra))


def _read_rankings(path: Path) -> list[list[int]]:
    rankings = []
    for line in path.read_text().splitlines():
        cells = [c.strip() for c in line.split(",") if c.strip()]
        if not cells:
            continue
        try:
            rankings.append([int(c) for c in cells])
        except ValueError:
            raise UsageError(f"rankings must be rows of 0-based feature indices: {line!r}") from None
    return rankings


def cmd_eval_ttk(args) -> None:
    rankings = _read_rankings(Path(args.rankings))
    counts = t_top_k(rankings, args.K)
    if args.format == "csv":
        _emit(args, ("feature", "count"), [(j, int(c)) for j, c in enumerate(counts)])
    else:
        _emit_record(args, metric_record("t_top_k", counts, K=args.K, n_rankings=len(rankings)))


def cmd_eval_emd(args) -> None:
    truth, est = parse_vector(args.truth), parse_vector(args.estimated)
    value = ordered_emd(truth, est)
    if args.format == "csv":
        _emit(args, ("metric", "p", "value"), [("emd", truth.size, value)])
    else:
        _emit_record(args, metric_record("emd", value, p=int(truth.size)))


def _emit_record(args, rec: dict) -> None:
    if args.out:
        out = Path(args.out)
        write_json(out, rec)
        write_json(_sidecar(out), _provenance(args))
    else:
        sys.stdout.write(json.dumps(rec, indent=2, sort_keys=True) + "\n")


def _family_hit(family: str, ranking: list[int]) -> bool:
    if family == "x-axis":
        return ranking[0] == 0
    if family == "y-axis":
        return ranking[0] == 1
    return set(ranking[:2]) == {0, 1}


def synthetic_experiment(seed: int, *, n: int = 1000, psi: int = 256, n_trees: int = 100,
                         per_family: int = 100, noise: str = "zero", n_jobs=None) -> dict:
    """Train on the synthetic set, explain crafted outliers, tally top features.

    Returns training F1, per-family accuracy rows and the mean wall-clock
    seconds per local explanation.
    """
    data, labels = generate(SynthSpec(n, 0.10, 4, seed))
    model = fit(data, psi, n_trees, seed, n_jobs=n_jobs)
    train_f1 = f1_score(labels, model.predict_labels(data))
    test, fam = generate_test_outliers(per_family, seed + TEST_SEED_OFFSET, 4, noise)
    predicted = model.predict_labels(test).astype(bool)
    hits = np.zeros(test.n, dtype=bool)
    elapsed = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", InlierExplanationWarning)
        for i in range(test.n):
            t0 = time.perf_counter()
            rep = local_diffi(model, test.values[i])
            elapsed += time.perf_counter() - t0
            hits[i] = _family_hit(fam[i], rank_features(rep))
    rows = []
    for f in FAMILIES:
        sel = (fam == f) & predicted
        n_pred = int(sel.sum())
        rows.append({
            "family": f,
            "noise": noise,
            "n_test": int((fam == f).sum()),
            "n_predicted": n_pred,
            "n_correct": int(hits[sel].sum()),
            "accuracy": float(hits[sel].mean()) if n_pred else 0.0,
        })
    return {"train_f1": train_f1, "families": rows, "lfi_seconds_per_sample": elapsed / test.n, "model": model}


def cmd_repro_synthetic(args) -> None:
    out = _outdir(args)
    results = [synthetic_experiment(args.seed, psi=args.psi, n_trees=args.trees, noise=m, n_jobs=args.threads)
               for m in NOISE_MODES]
    header = ("family", "noise", "n_test", "n_predicted", "n_correct", "accuracy")
    rows = [[r[h] for h in header] for res in results for r in res["families"]]
    save_table(out / f"accuracy.{_suffix(args)}", header, rows, args.format)
    save_table(out / f"training.{_suffix(args)}", ("metric", "value"),
               [("train_f1", results[0]["train_f1"]), ("score_threshold", results[0]["model"].score_threshold)],
               args.format)
    latency = {m: res["lfi_seconds_per_sample"] for m, res in zip(NOISE_MODES, results)}
    write_json(out / "provenance.json", _provenance(args, {"lfi_seconds_per_sample": latency}))
    for r in rows:
        sys.stdout.write(f"{r[0]:9s} noise={r[1]:8s} {r[4]}/{r[3]} correct ({r[5]:.3f})\n")
    sys.stdout.write(f"train F1 {results[0]['train_f1']:.3f}; "
                     f"mean LFI latency {latency['zero'] * 1e3:.3f} ms/sample\n")


def glass_experiment(path, seed: int = 0, *, psi: int = 64, n_trees: int = 100, n_jobs=None) -> dict:
    """Fit on every class but 7, then detect and explain the class-7 rows.

    The contamination is the non-window share of the training rows.
    """
    ds = load_glass(path)
    train = ds.classes != 7
    X_train = DataMatrix(ds.data.values[train], ds.data.feature_names)
    contamination = float(ds.labels[train].mean())
    model = fit(X_train, min(psi, X_train.n), n_trees, seed, contamination=contamination, n_jobs=n_jobs)
    test = ds.data.values[~train]
    flagged = model.predict_labels(test).astype(bool)
    target = {GLASS_FEATURES.index("Ba"), GLASS_FEATURES.index("Al")}
    tops = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", InlierExplanationWarning)
        for x in test[flagged]:
            tops.append(rank_features(local_diffi(model, x))[:2])
    ba_al = sum(set(t) == target for t in tops)
    return {
        "n_train": int(train.sum()),
        "n_test": int(test.shape[0]),
        "n_flagged": int(flagged.sum()),
        "n_ba_al_top2": int(ba_al),
        "ba_al_fraction": ba_al / len(tops) if tops else 0.0,
        "top2": [[GLASS_FEATURES[j] for j in t] for t in tops],
        "contamination": contamination,
    }


def cmd_repro_glass(args) -> None:
    out = _outdir(args)
    res = glass_experiment(args.data, args.seed, psi=args.psi, n_trees=args.trees, n_jobs=args.threads)
    keys = ("n_train", "n_test", "n_flagged", "n_ba_al_top2", "ba_al_fraction", "contamination")
    save_table(out / f"summary.{_suffix(args)}", ("metric", "value"), [(k, res[k]) for k in keys], args.format)
    save_table(out / f"top2.{_suffix(args)}", ("sample", "top2"),
               [(i, t) for i, t in enumerate(res["top2"])], args.format)
    write_json(out / "provenance.json", _provenance(args))
    sys.stdout.write(f"flagged {res['n_flagged']}/{res['n_test']}; "
                     f"Ba+Al top-2 in {res['n_ba_al_top2']}/{res['n_flagged']}\n")


# --- parser --------------------------------------------------------------


def _add_common(p, *, out_required=False):
    p.add_argument("--threads", type=int, default=None, help="worker threads (default: ISODIFFI_THREADS or 1)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", required=out_required)


def _add_data(p, *, labels=True):
    p.add_argument("--data", required=True, help="input CSV")
    p.add_argument("--delimiter", default=",")
    if labels:
        p.add_argument("--label-column", default=None, help="label column (excluded from the features)")


def _add_forest(p, psi=256):
    p.add_argument("--psi", type=int, default=psi)
    p.add_argument("--trees", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--threshold", type=float, default=None, help="fixed score threshold")
    g.add_argument("--contamination", type=float, default=None, help="expected outlier fraction (default 0.1)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="isodiffi", description="Isolation forests with DIFFI importances.")
    ap.add_argument("--version", action="version", version=f"isodiffi {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="train a forest and save it as JSON")
    _add_data(p); _add_forest(p); _add_common(p, out_required=True)  # noqa: E702
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("score", help="anomaly scores and labels")
    p.add_argument("--model", required=True)
    _add_data(p); _add_common(p)  # noqa: E702
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("gfi", help="global DIFFI on the training data")
    p.add_argument("--model", required=True)
    _add_data(p); _add_common(p)  # noqa: E702
    p.set_defaults(func=cmd_gfi)

    p = sub.add_parser("lfi", help="local DIFFI of selected rows")
    p.add_argument("--model", required=True)
    p.add_argument("--rows", default="all", help="'all', or indices such as 0..9,12")
    _add_data(p); _add_common(p)  # noqa: E702
    p.set_defaults(func=cmd_lfi)

    p = sub.add_parser("fselect", help="unsupervised feature selection")
    _add_data(p); _add_forest(p); _add_common(p, out_required=True)  # noqa: E702
    p.add_argument("--runs", type=int, default=5)
    p.add_argument("--k", default="1..5", help="k values for the F1 curve, e.g. 1..5")
    p.add_argument("--repeats", type=int, default=30)
    p.set_defaults(func=cmd_fselect)

    p = sub.add_parser("synth", help="generate the synthetic benchmark")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--anomalies", type=float, default=0.10)
    p.add_argument("--p-noise", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--test-outliers", default=None, help="also write crafted test outliers here")
    p.add_argument("--per-family", type=int, default=100)
    p.add_argument("--noise", choices=NOISE_MODES, default="zero")
    _add_common(p, out_required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("eval-ttk", help="count top-K appearances over rankings")
    p.add_argument("--rankings", required=True, help="CSV, one ranking of 0-based indices per line")
    p.add_argument("-K", "--K", type=int, required=True)
    _add_common(p)
    p.set_defaults(func=cmd_eval_ttk)

    p = sub.add_parser("eval-emd", help="ordered EMD between two importance vectors")
    p.add_argument("--truth", required=True, help="comma-separated values or a file")
    p.add_argument("--estimated", required=True, help="comma-separated values or a file")
    _add_common(p)
    p.set_defaults(func=cmd_eval_emd)

    p = sub.add_parser("repro-synthetic", help="end-to-end synthetic local-importance experiment")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--psi", type=int, default=256)
    p.add_argument("--trees", type=int, default=100)
    _add_common(p, out_required=True)
    p.set_defaults(func=cmd_repro_synthetic)

    p = sub.add_parser("repro-glass", help="Glass window/non-window experiment")
    p.add_argument("--data", required=True, help="UCI glass.data or an equivalent CSV")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--psi", type=int, default=64)
    p.add_argument("--trees", type=int, default=100)
    _add_common(p, out_required=True)
    p.set_defaults(func=cmd_repro_glass)
    return ap


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.threads is not None and args.threads < 0:
            raise UsageError("--threads must be >= 0")
        args.func(args)
    except (UsageError, InvalidArgumentError) as exc:
        print(f"isodiffi {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failures: report, do not trace
        print(f"isodiffi {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
