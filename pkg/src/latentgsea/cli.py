"""Command-line interface: reproducible, manifest-stamped pipeline stages.

Every stage is re-runnable from the persisted intermediates of the previous
one, and every output directory gets a manifest (config snapshot, seed,
thread count, library versions, input content hashes) sufficient to
reproduce the run.  Errors are written to stderr as one JSON object tagged
with the failing stage; exit code 2 marks input/validation problems, 1 any
other stage failure.

A JSON config file (``--config``) may supply any long-option value by its
dest name; explicit command-line flags win over file values.
"""

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, activity as activity_mod, autoencoder as ae_mod
from . import baselines as base_mod, correlation as corr_mod, data as data_mod
from . import gsea as gsea_mod, pipeline as pipe_mod, ranking as rank_mod
from ._kernels import BACKEND as KERNEL_BACKEND


def _hash_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_json(obj, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _manifest(stage, settings, inputs, out_dir):
    man = {
        "stage": stage,
        "settings": settings,
        "inputs": {name: {"path": str(p), "sha256": _hash_file(p)} for name, p in inputs.items()},
        "versions": {
            "latentgsea": __version__,
            "numpy": np.__version__,
            "python": sys.version.split()[0],
            "kernel_backend": KERNEL_BACKEND,
        },
    }
    _write_json(man, Path(out_dir) / "manifest.json")
    return man


def _require_inputs(paths):
    for name, p in paths.items():
        if p is None:
            raise SystemExit(_fail("validate", "MissingArgument", f"--{name} is required", 2))
        if not Path(p).exists():
            raise SystemExit(_fail("validate", "FileNotFoundError", f"{name} path not found: {p}", 2))


def _fail(stage, error, message, code):
    json.dump({"stage": stage, "error": error, "message": message}, sys.stderr)
    sys.stderr.write("\n")
    return code


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _parse_int_list(text):
    return [int(x) for x in str(text).replace(" ", "").split(",") if x]


def _load_expression(args):
    m = data_mod.load_expression_matrix(args.expression, args.orientation)
    if not args.skip_log_transform:
        m = data_mod.log_transform(m)
    else:
        m = data_mod.ExpressionMatrix(m.gene_ids, m.sample_ids, m.values, transformed=True)
    return m


def _ae_config(args, n_samples):
    batch = args.batch_size if args.batch_size else min(128, n_samples)
    return ae_mod.AutoencoderConfig(
        latent_dim=args.latent_dim,
        hidden_dims=tuple(_parse_int_list(args.hidden)),
        activation=args.activation,
        l1=args.l1,
        l2=args.l2,
        learning_rate=args.learning_rate,
        batch_size=batch,
        epochs=args.epochs,
        seed=args.seed,
        penalize_biases=args.penalize_biases,
        holdout_fraction=args.holdout_fraction,
    )


def _gsea_params(args):
    return gsea_mod.GseaParams(
        weight_exponent=args.weight_exponent,
        n_permutations=args.permutations,
        seed=args.seed,
        min_size=args.min_size,
        max_size=args.max_size,
    )


def _add_common(p):
    p.add_argument("--config", help="JSON file of option defaults (flags win)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)


def _add_expression_opts(p):
    p.add_argument("--expression", help="expression matrix TSV/CSV")
    p.add_argument(
        "--orientation", choices=["genes-in-rows", "samples-in-rows"],
        default="genes-in-rows",
    )
    p.add_argument(
        "--skip-log-transform", action="store_true",
        help="input is already in log/variance-stable space",
    )


def _add_ae_opts(p):
    p.add_argument("--latent-dim", type=int, default=64)
    p.add_argument("--hidden", default="512,128", help="comma-separated encoder widths")
    p.add_argument("--activation", choices=["relu", "tanh"], default="relu")
    p.add_argument("--l1", type=float, default=0.0)
    p.add_argument("--l2", type=float, default=0.0)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=0, help="0 = min(128, N)")
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--holdout-fraction", type=float, default=0.0)
    p.add_argument("--penalize-biases", action="store_true")
    p.add_argument("--no-standardize", action="store_true",
                   help="skip per-gene z-scoring before training")


def _add_gsea_opts(p):
    p.add_argument("--gene-sets", help="GMT file")
    p.add_argument("--permutations", type=int, default=1000)
    p.add_argument("--weight-exponent", type=float, default=1.0)
    p.add_argument("--min-size", type=int, default=15)
    p.add_argument("--max-size", type=int, default=500)


# ---------------------------------------------------------------- commands


def cmd_train(args):
    _require_inputs({"expression": args.expression})
    out = _out_dir(args)
    m = _load_expression(args)
    if args.no_standardize:
        m_std, scaler = m, None
    else:
        m_std, scaler = data_mod.standardize_genes(m)
    cfg = _ae_config(args, m_std.n_samples)
    model = ae_mod.train_autoencoder(m_std, cfg)
    ae_mod.save_model(model, out / "model.npz")
    if scaler is not None:
        data_mod.write_scaler(scaler, out / "scaler.tsv")
        if scaler.removed:
            data_mod.write_report(scaler.removed, out / "removed_genes.tsv")
    _write_json(
        {
            "log_transform": not args.skip_log_transform,
            "standardize": not args.no_standardize,
            "orientation": args.orientation,
        },
        out / "preprocess.json",
    )
    with open(out / "training_log.tsv", "w", encoding="utf-8") as fh:
        keys = list(model.training_log[0].keys())
        fh.write("\t".join(keys) + "\n")
        for row in model.training_log:
            fh.write("\t".join(repr(row[k]) if isinstance(row[k], float) else str(row[k]) for k in keys) + "\n")
    settings = {"autoencoder": cfg.to_dict(), "threads": args.threads,
                "standardize": not args.no_standardize,
                "log_transform": not args.skip_log_transform,
                "final_losses": model.training_log[-1]}
    _manifest("train", settings, {"expression": args.expression}, out)
    return 0


def cmd_rank(args):
    _require_inputs({"expression": args.expression, "model-dir": args.model_dir})
    out = _out_dir(args)
    model_dir = Path(args.model_dir)
    model = ae_mod.load_model(model_dir / "model.npz")
    with open(model_dir / "preprocess.json", encoding="utf-8") as fh:
        prep = json.load(fh)
    args.orientation = prep["orientation"]
    args.skip_log_transform = not prep["log_transform"]
    m_log = _load_expression(args)
    if prep["standardize"]:
        scaler = data_mod.load_scaler(model_dir / "scaler.tsv")
        keep = [g for g in m_log.gene_ids if g in set(scaler.gene_ids)]
        if tuple(keep) != tuple(m_log.gene_ids):
            pos = {g: i for i, g in enumerate(m_log.gene_ids)}
            idx = [pos[g] for g in scaler.gene_ids]
            m_log = data_mod.ExpressionMatrix(
                scaler.gene_ids, m_log.sample_ids, m_log.values[idx], transformed=True
            )
        m_std = scaler.apply(m_log)
    else:
        m_std = m_log
    latent = ae_mod.encode(model, m_std)
    ae_mod.write_latent(latent, out / "latent.tsv")
    corr = corr_mod.gene_dimension_correlation(m_log, latent)
    corr_mod.write_correlation_map(corr, out / "correlation_map.tsv")
    if corr.excluded_genes:
        data_mod.write_report(corr.excluded_genes, out / "excluded_genes.tsv")
    ranked_dir = out / "ranked"
    ranked_dir.mkdir(exist_ok=True)
    for k in range(corr.n_dims):
        lst = corr_mod.ranked_gene_list(corr, k)
        corr_mod.write_ranked_list(lst, ranked_dir / f"dim_{k}.rnk")
    settings = {"threads": args.threads, "n_dims": corr.n_dims,
                "dead_dimensions": list(corr.dead_dimensions)}
    _manifest("rank", settings, {"expression": args.expression,
                                 "model": model_dir / "model.npz"}, out)
    return 0


def _load_ranked_lists(ranked_dir):
    files = sorted(Path(ranked_dir).glob("dim_*.rnk"), key=lambda p: int(p.stem.split("_")[1]))
    if not files:
        raise ValueError(f"no dim_*.rnk files in {ranked_dir}")
    return [corr_mod.load_ranked_list(p, dimension=int(p.stem.split("_")[1])) for p in files]


def cmd_gsea(args):
    _require_inputs({"ranked-dir": args.ranked_dir, "gene-sets": args.gene_sets})
    out = _out_dir(args)
    lists = _load_ranked_lists(args.ranked_dir)
    collection = data_mod.parse_gmt(args.gene_sets)
    params = _gsea_params(args)
    universe = set(lists[0].gene_ids)
    if args.assume_filtered:
        for sid, _, members in collection.sets:
            stray = members - universe
            if stray:
                raise ValueError(
                    f"universe mismatch: set {sid!r} references gene "
                    f"{sorted(stray)[0]!r} absent from the ranked lists"
                )
        filtered, report = collection, []
    else:
        filtered, report = data_mod.filter_gene_sets(
            collection, universe, params.min_size, params.max_size
        )
    if not filtered.sets:
        print("warning: no gene sets survive filtering; tables will be empty", file=sys.stderr)
    tables = pipe_mod.gsea_over_dimensions(lists, filtered, params, threads=args.threads)
    enr_dir = out / "enrichment"
    enr_dir.mkdir(exist_ok=True)
    for t in tables:
        gsea_mod.write_enrichment_table(t, enr_dir / f"dim_{t.dimension}.tsv")
    gsea_mod.write_params(params, out / "gsea_params.json")
    if report:
        data_mod.write_report(report, out / "filter_report.tsv")
    _manifest("gsea", {"gsea": params.to_dict(), "threads": args.threads,
                       "assume_filtered": args.assume_filtered},
              {"gene_sets": args.gene_sets}, out)
    return 0


def _load_enrichment_dir(enrichment_dir):
    files = sorted(Path(enrichment_dir).glob("dim_*.tsv"),
                   key=lambda p: int(p.stem.split("_")[1]))
    if not files:
        raise ValueError(f"no dim_*.tsv enrichment tables in {enrichment_dir}")
    tables = [gsea_mod.load_enrichment_table(p, dimension=int(p.stem.split("_")[1]))
              for p in files]
    return rank_mod.ModelEnrichment(tuple(tables), provenance=str(enrichment_dir))


def cmd_activity(args):
    _require_inputs({"latent": args.latent, "enrichment-dir": args.enrichment_dir})
    out = _out_dir(args)
    latent = ae_mod.load_latent(args.latent)
    me = _load_enrichment_dir(args.enrichment_dir)
    w = activity_mod.nes_weight_matrix(me)
    a = activity_mod.activity_scores(latent, w, standardize=not args.no_standardize)
    activity_mod.write_weight_matrix(w, out / "weights.tsv")
    activity_mod.write_activity_matrix(a, out / "activity.tsv")
    _manifest("activity", {"standardize": not args.no_standardize,
                           "n_filled": w.n_filled, "threads": args.threads},
              {"latent": args.latent}, out)
    return 0


def cmd_cluster(args):
    _require_inputs({"activity": args.activity, "labels": args.labels})
    out = _out_dir(args)
    a = activity_mod.load_activity_matrix(args.activity, standardized=True)
    labels = data_mod.load_labels(args.labels)
    unknown = set(labels) - set(a.sample_ids)
    if unknown:
        raise ValueError(f"label file names unknown samples: {sorted(unknown)[:3]}")
    ev = activity_mod.evaluate_clustering(
        a, labels, k=args.k, seed=args.seed, n_restarts=args.restarts,
        bootstrap_repeats=args.bootstrap_repeats,
    )
    _write_json(
        {"k": ev.k, "ari": ev.ari, "inertia": ev.inertia, "seed": ev.seed,
         "n_restarts": ev.n_restarts, "n_excluded": ev.n_excluded,
         "ari_bootstrap_sd": ev.ari_bootstrap_sd},
        out / "cluster.json",
    )
    kept = [s for s in a.sample_ids if s in labels]
    data_mod.write_report(zip(kept, ev.labels), out / "cluster_labels.tsv",
                          header=("sample_id", "cluster"))
    _manifest("cluster", {"k": ev.k, "restarts": args.restarts, "threads": args.threads},
              {"activity": args.activity, "labels": args.labels}, out)
    return 0


def cmd_diff(args):
    _require_inputs({"activity": args.activity, "labels": args.labels})
    out = _out_dir(args)
    a = activity_mod.load_activity_matrix(args.activity, standardized=True)
    labels = data_mod.load_labels(args.labels)
    missing = [s for s in a.sample_ids if s not in labels]
    if missing:
        raise ValueError(f"samples missing group labels: {missing[:3]}")
    rows = activity_mod.differential_pathway_table(a, labels, args.group1, args.group2)
    activity_mod.write_differential_table(rows, out / "differential.tsv")
    _manifest("diff", {"group1": args.group1, "group2": args.group2,
                       "threads": args.threads},
              {"activity": args.activity, "labels": args.labels}, out)
    return 0


def cmd_saturate(args):
    _require_inputs({"expression": args.expression, "gene-sets": args.gene_sets})
    out = _out_dir(args)
    m = _load_expression(args)
    collection = data_mod.parse_gmt(args.gene_sets)
    dims = _parse_int_list(args.dims)
    cfg = _ae_config(args, max(1, m.n_samples - int(args.holdout_fraction * m.n_samples)))
    params = _gsea_params(args)
    rows, _ = pipe_mod.saturation_curve(
        m, dims, collection, cfg, params, gate=args.gate, threads=args.threads
    )
    rank_mod.write_saturation(rows, out / "saturation.tsv")
    _manifest("saturate", {"dims": dims, "gate": args.gate,
                           "autoencoder": cfg.to_dict(), "gsea": params.to_dict(),
                           "threads": args.threads},
              {"expression": args.expression, "gene_sets": args.gene_sets}, out)
    return 0


def cmd_bench(args):
    _require_inputs({"enrichment-dir": args.enrichment_dir, "targets": args.targets})
    out = _out_dir(args)
    me = _load_enrichment_dir(args.enrichment_dir)
    targets = rank_mod.load_targets(args.targets)
    result = rank_mod.benchmark_targets(
        me, targets, penalty=args.penalty, alpha=args.alpha,
        coverage_n=args.coverage_n, method=args.method_name,
    )
    rank_mod.write_benchmark(result, out / "bench.tsv", out / "bench.json")
    _manifest("bench", {"penalty": args.penalty, "alpha": args.alpha,
                        "coverage_n": args.coverage_n, "threads": args.threads},
              {"targets": args.targets}, out)
    return 0


def cmd_baseline(args):
    _require_inputs({"expression": args.expression})
    out = _out_dir(args)
    m = _load_expression(args)
    ranked_dir = out / "ranked"
    ranked_dir.mkdir(parents=True, exist_ok=True)
    inputs = {"expression": args.expression}
    if args.method in ("pca_weights", "pca_corr"):
        model = base_mod.pca_fit(m, args.latent_dim, seed=args.seed)
        for k in range(args.latent_dim):
            if args.method == "pca_weights":
                lst = base_mod.pca_weights_ranking(model, k, signed=args.signed_loadings)
            else:
                lst = base_mod.pca_corr_ranking(m, model, k)
            corr_mod.write_ranked_list(lst, ranked_dir / f"dim_{k}.rnk")
    elif args.method == "ttest":
        if not args.labels:
            raise ValueError("--labels is required for the ttest baseline")
        _require_inputs({"labels": args.labels})
        labels = data_mod.load_labels(args.labels)
        lst, excluded = base_mod.standard_de_ttest(m, labels, args.group1, args.group2)
        corr_mod.write_ranked_list(lst, ranked_dir / "dim_0.rnk")
        if excluded:
            data_mod.write_report(excluded, out / "excluded_genes.tsv")
        inputs["labels"] = args.labels
    else:
        raise ValueError(f"unknown baseline method: {args.method}")
    _manifest("baseline", {"method": args.method, "latent_dim": args.latent_dim,
                           "threads": args.threads}, inputs, out)
    return 0


def cmd_pipeline(args):
    _require_inputs({"expression": args.expression, "gene-sets": args.gene_sets})
    out = _out_dir(args)
    ns = argparse.Namespace(**vars(args))

    ns.out = str(out / "train")
    cmd_train(ns)
    ns.model_dir = str(out / "train")
    ns.out = str(out / "rank")
    cmd_rank(ns)
    ns.ranked_dir = str(out / "rank" / "ranked")
    ns.assume_filtered = False
    ns.out = str(out / "gsea")
    cmd_gsea(ns)
    ns.latent = str(out / "rank" / "latent.tsv")
    ns.enrichment_dir = str(out / "gsea" / "enrichment")
    ns.out = str(out / "activity")
    cmd_activity(ns)
    if args.labels:
        ns.activity = str(out / "activity" / "activity.tsv")
        ns.out = str(out / "cluster")
        ns.k = args.k
        ns.restarts = args.restarts
        ns.bootstrap_repeats = args.bootstrap_repeats
        cmd_cluster(ns)
    if args.targets:
        ns.out = str(out / "bench")
        ns.penalty = args.penalty
        ns.alpha = args.alpha
        ns.coverage_n = args.coverage_n
        ns.method_name = "latent-correlation"
        cmd_bench(ns)
    _manifest("pipeline", {"threads": args.threads, "seed": args.seed},
              {"expression": args.expression, "gene_sets": args.gene_sets}, out)
    return 0


# ---------------------------------------------------------------- parsing


def build_parser():
    parser = argparse.ArgumentParser(
        prog="latentgsea",
        description="Unsupervised pathway enrichment from autoencoder latent spaces",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train the autoencoder")
    _add_common(p)
    _add_expression_opts(p)
    _add_ae_opts(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("rank", help="latent correlations and pre-ranked lists")
    _add_common(p)
    p.add_argument("--model-dir", help="output directory of the train stage")
    p.add_argument("--expression")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("gsea", help="pre-ranked GSEA per dimension")
    _add_common(p)
    p.add_argument("--ranked-dir", help="directory of dim_*.rnk lists")
    _add_gsea_opts(p)
    p.add_argument("--assume-filtered", action="store_true",
                   help="error if any set references a gene absent from the lists")
    p.set_defaults(func=cmd_gsea)

    p = sub.add_parser("activity", help="pathway activity matrix")
    _add_common(p)
    p.add_argument("--latent", help="latent.tsv from the rank stage")
    p.add_argument("--enrichment-dir", help="enrichment tables directory")
    p.add_argument("--no-standardize", action="store_true")
    p.set_defaults(func=cmd_activity)

    p = sub.add_parser("cluster", help="k-means + adjusted Rand index")
    _add_common(p)
    p.add_argument("--activity")
    p.add_argument("--labels", help="two-column TSV (sample_id, label)")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--restarts", type=int, default=20)
    p.add_argument("--bootstrap-repeats", type=int, default=20)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("diff", help="differential pathway table")
    _add_common(p)
    p.add_argument("--activity")
    p.add_argument("--labels")
    p.add_argument("--group1", required=True)
    p.add_argument("--group2", required=True)
    p.set_defaults(func=cmd_diff)

    p = sub.add_parser("saturate", help="significant-pathway counts across D")
    _add_common(p)
    _add_expression_opts(p)
    _add_ae_opts(p)
    _add_gsea_opts(p)
    p.add_argument("--dims", required=True, help="comma-separated increasing D values")
    p.add_argument("--gate", choices=["nominal", "q"], default="nominal")
    p.set_defaults(func=cmd_saturate)

    p = sub.add_parser("bench", help="target-pathway rank benchmark")
    _add_common(p)
    p.add_argument("--enrichment-dir")
    p.add_argument("--targets", help="one set id per line, # comments")
    p.add_argument("--penalty", type=int, default=100)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--coverage-n", type=int, default=10)
    p.add_argument("--method-name", default="latent-correlation")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("baseline", help="PCA / t-test ranked lists")
    _add_common(p)
    _add_expression_opts(p)
    p.add_argument("--method", choices=["pca_weights", "pca_corr", "ttest"],
                   required=True)
    p.add_argument("--latent-dim", type=int, default=64)
    p.add_argument("--signed-loadings", action="store_true")
    p.add_argument("--labels")
    p.add_argument("--group1", default=None)
    p.add_argument("--group2", default=None)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("pipeline", help="run all stages end to end")
    _add_common(p)
    _add_expression_opts(p)
    _add_ae_opts(p)
    _add_gsea_opts(p)
    p.add_argument("--labels", default=None)
    p.add_argument("--targets", default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--restarts", type=int, default=20)
    p.add_argument("--bootstrap-repeats", type=int, default=20)
    p.add_argument("--penalty", type=int, default=100)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--coverage-n", type=int, default=10)
    p.set_defaults(func=cmd_pipeline)

    return parser


def _apply_config_file(args, argv):
    """Fill in values from --config for options not given on the command line."""
    if not getattr(args, "config", None):
        return args
    with open(args.config, encoding="utf-8") as fh:
        cfg = json.load(fh)
    given = set()
    for tok in argv:
        if tok.startswith("--"):
            given.add(tok[2:].split("=", 1)[0].replace("-", "_"))
    for key, value in cfg.items():
        dest = key.replace("-", "_")
        if dest in given or not hasattr(args, dest):
            continue
        setattr(args, dest, value)
    return args


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args = _apply_config_file(args, argv)
        return args.func(args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    except FileNotFoundError as exc:
        return _fail(args.command, "FileNotFoundError", str(exc), 2)
    except (ValueError, KeyError, TypeError) as exc:
        return _fail(args.command, type(exc).__name__, str(exc), 1)
    except Exception as exc:  # stage failures keep a machine-readable trail
        return _fail(args.command, type(exc).__name__, str(exc), 1)


if __name__ == "__main__":
    raise SystemExit(main())
