"""Command-line pipelines.

Subcommands::

    dauc generate two-smiles|idm-clusters  --out DIR --seed S ...
    dauc train       --data DIR --out DIR --model linear|mlp ...
    dauc categorize  --latents DIR --out FILE [--q ...] [--kernel ...] ...
    dauc inverse     --latents DIR --out DIR [--grid 0,0.3,0.6,0.9] ...
    dauc evaluate    --report FILE --test-latents FILE --out FILE [--gold ...]
    dauc pr-curve    --report FILE --score ood|bnd|idm --out FILE ...

Every command is deterministic given its flags; seeds and the effective
parameters are echoed into every output file. Exit codes: 0 on success, 2 for
input or validation errors, 3 for internal invariant violations.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import classifier, evaluate, inverse, synth
from .categorize import (
    Category,
    build_index,
    categorize,
    load_report,
    save_report,
    score,
    set_thresholds,
)
from .data import (
    DataError,
    InternalError,
    LabeledFeatures,
    LatentDataset,
    NormalizationStats,
    load_features_csv,
    load_latent_csv,
    load_meta,
    save_features_csv,
    save_latent_csv,
)
from .kde import KERNELS, KernelKind

LATENT_FILES = {name: f"{name}_latents.csv" for name in ("train", "val", "test")}


def _write_json(path, payload) -> None:
    Path(path).write_text(
        json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


# ---------------------------------------------------------------------------
# generate
# ---------------------------------------------------------------------------


def _cfg_echo(cfg) -> dict:
    return {k: (list(v) if isinstance(v, tuple) else v) for k, v in vars(cfg).items()}


def cmd_generate(args) -> None:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.dataset == "two-smiles":
        fractions = tuple(float(f) for f in args.splits.split(","))
        cfg = synth.TwoSmilesConfig(
            n_moons=args.n_moons,
            moon_noise=args.moon_noise,
            cluster_n=args.cluster_n,
            cluster_std=args.cluster_std,
            ood_n=args.ood_n,
            ood_std=args.ood_std,
            split_fractions=fractions,
            seed=args.seed,
        )
        bundle = synth.make_two_smiles(cfg)
    else:
        cfg = synth.IdmClustersConfig(
            n_main=args.n_main,
            main_std=args.main_std,
            n_confusion=args.n_confusion,
            confusion_std=args.confusion_std,
            seed=args.seed,
        )
        bundle = synth.make_idm_clusters(cfg)
    extra = {"generator": args.dataset, "seed": args.seed, "config": _cfg_echo(cfg)}
    for name in ("train", "val", "test"):
        feats = bundle.split(name)
        save_features_csv(feats, out / f"{name}.csv", split=name, meta_extra=extra)
        synth.save_groups_csv(feats.ids, bundle.groups[name], out / f"{name}_gold.csv")
    print(f"wrote {args.dataset} splits to {out}")


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------


def cmd_train(args) -> None:
    data = Path(args.data)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    splits = {name: load_features_csv(data / f"{name}.csv") for name in ("train", "val", "test")}
    train_feats = splits["train"]
    if np.any(train_feats.y < 0):
        raise DataError("training split must not contain OOD-labeled rows")

    input_stats = NormalizationStats.fit(train_feats.x)
    tcfg = classifier.TrainConfig(
        learning_rate=args.lr,
        epochs=args.epochs,
        batch_size=args.batch_size,
        seed=args.seed,
        l2=args.l2,
    )
    z_train = LabeledFeatures(
        ids=train_feats.ids,
        x=input_stats.transform(train_feats.x),
        y=train_feats.y,
        num_classes=train_feats.num_classes,
    )
    if args.model == "linear":
        model = classifier.train_linear(z_train, tcfg, temperature=args.temperature)
    else:
        model = classifier.train_mlp(
            z_train, args.latent_dim, tcfg, temperature=args.temperature
        )

    raw_latents = {}
    preds = {}
    for name, feats in splits.items():
        pred = classifier.predict(model, input_stats.transform(feats.x))
        preds[name] = pred
        raw_latents[name] = pred.latents
    # Densities downstream expect z-scored latents; stats come from the
    # training split only.
    latent_stats = NormalizationStats.fit(raw_latents["train"])

    classifier.save_checkpoint(
        model,
        out / "checkpoint.json",
        input_stats,
        latent_stats,
        tcfg,
        extra={"seed": args.seed, "data_dir": str(data)},
    )
    for name, feats in splits.items():
        pred = preds[name]
        ds = LatentDataset(
            ids=feats.ids,
            latents=latent_stats.transform(raw_latents[name]),
            y_true=feats.y,
            y_pred=pred.y_pred,
            num_classes=feats.num_classes,
            u=classifier.entropy_uncertainty(pred.probs),
        )
        save_latent_csv(
            ds,
            out / LATENT_FILES[name],
            split=name,
            meta_extra={"u_source": "entropy", "model": args.model, "seed": args.seed},
        )
    acc = float(np.mean(preds["val"].y_pred == splits["val"].y))
    print(f"trained {args.model} model; validation accuracy {acc:.4f}")


# ---------------------------------------------------------------------------
# categorize
# ---------------------------------------------------------------------------


def _load_latent_splits(latents_dir):
    d = Path(latents_dir)
    out = {}
    for name, fname in LATENT_FILES.items():
        out[name] = load_latent_csv(d / fname)
    dims = {ds.dim for ds in out.values()}
    classes = {ds.num_classes for ds in out.values()}
    if len(dims) != 1 or len(classes) != 1:
        raise DataError(
            f"inconsistent latent files: dims {sorted(dims)}, classes {sorted(classes)}"
        )
    return out


def _resolve_quantiles(args, val) -> tuple[float, float, str]:
    val_accuracy = float(np.mean(val.y_pred == val.y_true))
    if args.q is not None:
        q_bnd = q_idm = args.q
        source = "explicit"
    else:
        q_bnd = q_idm = val_accuracy
        source = "validation accuracy"
    if args.q_bnd is not None:
        q_bnd, source = args.q_bnd, "explicit"
    if args.q_idm is not None:
        q_idm, source = args.q_idm, "explicit"
    return q_bnd, q_idm, source


def _run_categorize(args, splits):
    kernel = KernelKind(args.kernel, args.bandwidth)
    train, val, test = splits["train"], splits["val"], splits["test"]
    q_bnd, q_idm, q_source = _resolve_quantiles(args, val)
    index = build_index(train, val, kernel, leave_one_out=args.loo)
    table = score(index, test)
    if args.threshold_basis == "val":
        val_table = score(index, val)
        table = set_thresholds(
            table, q_bnd, q_idm, bnd_basis=val_table.t_bnd, idm_basis=val_table.t_idm
        )
    else:
        table = set_thresholds(table, q_bnd, q_idm)
    flagged = None
    u_threshold = None
    test_meta = load_meta(Path(args.latents) / LATENT_FILES["test"])
    u_source = test_meta.get("u_source", "external") if test.u is not None else "absent"
    if args.u_threshold is not None:
        if test.u is None:
            raise DataError("--u-threshold given but the test latents carry no u column")
        u_threshold = args.u_threshold
        flagged = test.u >= u_threshold
    params = {
        "kernel": {"name": kernel.name, "bandwidth": kernel.bandwidth, "scale": kernel.scale},
        "q_source": q_source,
        "threshold_basis": args.threshold_basis,
        "leave_one_out": args.loo,
        "u_source": u_source,
        "u_threshold": u_threshold,
        "n_train": train.n,
        "n_val": val.n,
        "corpus_sizes": index.corpus_sizes.tolist(),
    }
    return categorize(table, flagged=flagged, params=params)


def cmd_categorize(args) -> None:
    splits = _load_latent_splits(args.latents)
    report = _run_categorize(args, splits)
    save_report(report, args.out)
    counts = report.counts()
    printable = ", ".join(f"{k}={v}" for k, v in counts.items() if v)
    print(f"categorized {report.n} examples: {printable}")


# ---------------------------------------------------------------------------
# inverse
# ---------------------------------------------------------------------------


def cmd_inverse(args) -> None:
    splits = _load_latent_splits(args.latents)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report = _run_categorize(args, splits)
    target = _category_by_value(args.target)
    qs = [float(tok) for tok in args.grid.split(",")]
    tcfg = classifier.TrainConfig(
        learning_rate=args.lr, epochs=args.epochs, seed=args.seed, l2=args.l2
    )
    reports = inverse.inverse_grid(
        splits["train"],
        splits["val"],
        splits["test"],
        qs,
        bandwidth=args.filter_bandwidth,
        target=target,
        tcfg=tcfg,
        report=report,
    )
    inverse.save_inverse_reports(reports, out / "inverse.json")
    inverse.save_accuracy_plot_data(reports, out / "accuracy_vs_q.csv")
    for r in reports:
        if r["status"] == "ok":
            print(
                f"q={r['q']}: kept {r['n_train_filtered']}/{r['n_train_full']} rows, "
                f"target acc {r['acc_full_on_target']:.4f} -> {r['acc_filtered_on_target']:.4f}"
            )
        else:
            print(f"q={r['q']}: {r['status']}")


def _category_by_value(value: str) -> Category:
    for c in Category:
        if c.value == value:
            return c
    raise DataError(f"unknown category {value!r}; expected one of "
                    f"{[c.value for c in Category]}")


# ---------------------------------------------------------------------------
# evaluate / pr-curve
# ---------------------------------------------------------------------------


def _gold_masks_from_args(args, ids) -> dict:
    if not args.gold_map:
        return {}
    if not args.gold:
        raise DataError("--gold-map requires --gold")
    groups = synth.load_groups_csv(args.gold)
    masks = {}
    for spec_str in args.gold_map:
        if "=" not in spec_str:
            raise DataError(f"bad --gold-map entry {spec_str!r}; expected CAT=group1,group2")
        cat, raw = spec_str.split("=", 1)
        wanted = set(raw.split(","))
        masks[cat] = np.asarray([groups.get(i) in wanted for i in ids], dtype=bool)
    return masks


def cmd_evaluate(args) -> None:
    report = load_report(args.report)
    test = load_latent_csv(args.test_latents)
    masks = _gold_masks_from_args(args, report.ids)
    summary = evaluate.category_report(report, test, gold_masks=masks)
    evaluate.save_category_report(summary, args.out)
    print(evaluate.format_category_table(summary))


def cmd_pr_curve(args) -> None:
    report = load_report(args.report)
    scores = {"ood": report.t_ood, "bnd": report.t_bnd, "idm": report.t_idm}[args.score]
    if args.positive_ood:
        test = load_latent_csv(args.test_latents)
        if test.ids != report.ids:
            raise DataError("report and test latents do not align")
        gold = test.y_true == -1
    elif args.gold and args.positive_groups:
        groups = synth.load_groups_csv(args.gold)
        wanted = set(args.positive_groups.split(","))
        gold = np.asarray([groups.get(i) in wanted for i in report.ids], dtype=bool)
    else:
        raise DataError("need --positive-ood (with --test-latents) or --gold with --positive-groups")
    curve = evaluate.pr_curve(scores, gold, args.n_points)
    evaluate.save_pr_curve_csv(curve, args.out)
    print(f"wrote {len(curve.points)}-point PR curve to {args.out}")


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _add_categorize_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--q", type=float, default=None,
                   help="quantile for both thresholds (default: validation accuracy)")
    p.add_argument("--q-bnd", type=float, default=None, help="boundary-score quantile")
    p.add_argument("--q-idm", type=float, default=None, help="IDM-score quantile")
    p.add_argument("--kernel", choices=KERNELS, default="gaussian")
    p.add_argument("--bandwidth", type=float, default=1.0)
    p.add_argument("--threshold-basis", choices=("test", "val"), default="test",
                   help="score distribution the Bnd/IDM quantiles are taken over")
    p.add_argument("--u-threshold", type=float, default=None,
                   help="flag rows with u >= this; unflagged rows pass through as Trusted")
    p.add_argument("--loo", action="store_true",
                   help="leave-one-out variant of the OOD threshold")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dauc",
        description="Categorize a classifier's uncertain predictions by latent density.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("generate", help="write synthetic feature CSV splits")
    p_gen.add_argument("dataset", choices=("two-smiles", "idm-clusters"))
    p_gen.add_argument("--out", required=True)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--n-moons", type=int, default=6000)
    p_gen.add_argument("--moon-noise", type=float, default=0.1)
    p_gen.add_argument("--cluster-n", type=int, default=150)
    p_gen.add_argument("--cluster-std", type=float, default=0.1)
    p_gen.add_argument("--ood-n", type=int, default=750,
                       help="OOD points per center (test only)")
    p_gen.add_argument("--ood-std", type=float, default=0.1)
    p_gen.add_argument("--splits", default="0.275,0.275,0.45",
                       help="moon fractions for train,val,test")
    p_gen.add_argument("--n-main", type=int, default=400)
    p_gen.add_argument("--main-std", type=float, default=0.3)
    p_gen.add_argument("--n-confusion", type=int, default=200)
    p_gen.add_argument("--confusion-std", type=float, default=0.5)
    p_gen.set_defaults(func=cmd_generate)

    p_train = sub.add_parser("train", help="train a model and export latent CSVs")
    p_train.add_argument("--data", required=True, help="directory with train/val/test.csv")
    p_train.add_argument("--out", required=True)
    p_train.add_argument("--model", choices=("linear", "mlp"), default="linear")
    p_train.add_argument("--latent-dim", type=int, default=8,
                         help="hidden width (mlp only)")
    p_train.add_argument("--lr", type=float, default=0.5)
    p_train.add_argument("--epochs", type=int, default=2000)
    p_train.add_argument("--batch-size", type=int, default=None)
    p_train.add_argument("--l2", type=float, default=0.0)
    p_train.add_argument("--temperature", type=float, default=1.0)
    p_train.add_argument("--seed", type=int, default=0)
    p_train.set_defaults(func=cmd_train)

    p_cat = sub.add_parser("categorize", help="build the density index and categorize")
    p_cat.add_argument("--latents", required=True,
                       help="directory with train/val/test_latents.csv")
    p_cat.add_argument("--out", required=True, help="report JSON path")
    _add_categorize_flags(p_cat)
    p_cat.set_defaults(func=cmd_categorize)

    p_inv = sub.add_parser("inverse", help="retrain on density-filtered training data")
    p_inv.add_argument("--latents", required=True)
    p_inv.add_argument("--out", required=True, help="output directory")
    p_inv.add_argument("--grid", default="0.0,0.3,0.6,0.9",
                       help="comma-separated discard proportions")
    p_inv.add_argument("--filter-bandwidth", type=float, default=0.01)
    p_inv.add_argument("--target", default="B&I",
                       help="category whose examples define the filter")
    p_inv.add_argument("--lr", type=float, default=0.5)
    p_inv.add_argument("--epochs", type=int, default=2000)
    p_inv.add_argument("--l2", type=float, default=0.0)
    p_inv.add_argument("--seed", type=int, default=0)
    _add_categorize_flags(p_inv)
    p_inv.set_defaults(func=cmd_inverse)

    p_eval = sub.add_parser("evaluate", help="per-category metrics against gold labels")
    p_eval.add_argument("--report", required=True)
    p_eval.add_argument("--test-latents", required=True)
    p_eval.add_argument("--out", required=True)
    p_eval.add_argument("--gold", default=None, help="id,group CSV with gold tags")
    p_eval.add_argument("--gold-map", action="append", default=[],
                        help="CATEGORY=group1,group2 (repeatable)")
    p_eval.set_defaults(func=cmd_evaluate)

    p_pr = sub.add_parser("pr-curve", help="precision-recall sweep over the flagging quantile")
    p_pr.add_argument("--report", required=True)
    p_pr.add_argument("--score", choices=("ood", "bnd", "idm"), required=True)
    p_pr.add_argument("--out", required=True)
    p_pr.add_argument("--n-points", type=int, default=19)
    p_pr.add_argument("--positive-ood", action="store_true",
                      help="gold positives are rows with y_true == -1")
    p_pr.add_argument("--test-latents", default=None)
    p_pr.add_argument("--gold", default=None)
    p_pr.add_argument("--positive-groups", default=None,
                      help="comma-separated gold groups counted positive")
    p_pr.set_defaults(func=cmd_pr_curve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
        return 0
    except (DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except InternalError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # invariant violations surface as exit code 3
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
