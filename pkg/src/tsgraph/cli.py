"""Command-line entry point: ``tsgraph {learn,simulate,evaluate,predict,spectra,rerun}``.

Every command writes ``run_meta.json`` next to its outputs. It records the
fully resolved arguments, so ``tsgraph rerun run_meta.json --out DIR``
reproduces the outputs exactly.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .errors import ConfigError, InputError, TsGraphError
from .graphs import DecomposableGraph, GraphPriorConfig
from .likelihood import HiwPrior, check_rank_guard, predictive_log_likelihood
from .pipeline import (
    Smoothing,
    build_statistics,
    default_g,
    ingest_csv,
    log_return_transform,
    predictive_statistics,
    write_csv,
)
from .search import SearchConfig, fincs_restarts, make_rng
from .simulate import SimConfig, VarModel, generate_panel, recovery_metrics, sample_var_model

log = logging.getLogger("tsgraph")

__all__ = ["main", "cmd_learn", "cmd_simulate", "cmd_evaluate", "cmd_predict", "cmd_spectra"]


def _dump(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _write_meta(out: Path, command: str, args: dict, extra: dict | None = None) -> None:
    meta = {"command": command, "version": __version__, "args": args}
    if extra:
        meta.update(extra)
    _dump(out / "run_meta.json", meta)


def _outdir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_graph(path: str) -> DecomposableGraph:
    try:
        obj = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"{path}: cannot read graph JSON ({exc})", module="cli") from exc
    if "graph" in obj:
        obj = obj["graph"]
    return DecomposableGraph.from_json(obj)


def _preprocess(args: dict):
    panel = ingest_csv(args["data"])
    if args["log_returns"]:
        panel = log_return_transform(panel)
    keep_dc = not args["center"]
    if keep_dc and not args["keep_dc_unsafe"]:
        raise ConfigError(
            "--no-center keeps frequency 0, whose statistic is degenerate; add --keep-dc-unsafe to proceed",
            module="cli",
        )
    return panel, keep_dc


def cmd_learn(args: dict) -> dict:
    """Ingest, build statistics, run the search, write the artifacts."""
    out = _outdir(args.pop("out"))
    panel, keep_dc = _preprocess(args)
    smoothing = Smoothing.parse(args["smoothing"]) if args["smoothing"] else Smoothing.default_for(panel.N)
    smoothing = smoothing.resolve(panel.T)
    args["smoothing"] = str(smoothing)
    stats = build_statistics(panel, smoothing, keep_dc=keep_dc)
    check_rank_guard(stats, panel.p)
    if args["g"] is None:
        args["g"] = default_g(stats)
    config = SearchConfig(
        iterations=args["iterations"],
        global_move_period=args["global_period"],
        resample_period=args["resample_period"],
        edge_prob_smoothing=args["edge_smoothing"],
        seed=args["seed"],
        prior=GraphPriorConfig(args["prior_a"], args["prior_b"]),
        scoring=HiwPrior.fractional(args["g"], args["jitter"]),
        accept_rule=args["accept_rule"],
    )
    log.info("searching %d iterations over p=%d, %d entries", config.iterations, panel.p, stats.num_entries)
    result = fincs_restarts(stats, config, args["restarts"])
    labels = list(panel.columns) if panel.columns else [str(i) for i in range(panel.p)]
    _dump(out / "graph.json", {**result.map_graph.to_json(), "labels": labels})
    (out / "graph.dot").write_text(result.map_graph.graph.to_dot(labels))
    with open(out / "edge_probs.csv", "w") as fh:
        fh.write(",".join(labels) + "\n")
        fh.write(result.edge_probabilities_csv())
    (out / "trace.ndjson").write_text(result.trace_ndjson())
    _write_meta(
        out,
        "learn",
        args,
        {
            "search": result.header,
            "statistics": {
                "T": stats.T,
                "N": stats.N,
                "p": stats.p,
                "entries": stats.num_entries,
                "kind": stats.kind,
                "excluded_frequencies": list(stats.excluded_frequencies),
                "drop_dc": not keep_dc,
                "min_dof": float(stats.dof.min()),
            },
        },
    )
    return result.map_graph.to_json()


def cmd_simulate(args: dict) -> dict:
    out = _outdir(args.pop("out"))
    cfg = SimConfig(
        p=args["p"],
        T=args["T"],
        N=args["N"],
        rho=args["rho"],
        diag_value=args["diag"],
        offdiag_value=args["offdiag"],
        seed=args["seed"],
        require_decomposable=not args["allow_nondecomposable"],
        burn_in=args["burn_in"],
        max_attempts=args["max_attempts"],
    )
    rng = make_rng(cfg.seed)
    model = sample_var_model(cfg, rng)
    panel = generate_panel(model, cfg.T, cfg.N, rng, burn_in=cfg.burn_in)
    columns = [f"x{i}" for i in range(cfg.p)]
    files = []
    for n in range(cfg.N):
        name = f"replicate_{n:04d}.csv"
        write_csv(out / name, panel.data[n], columns)
        files.append(name)
    _dump(out / "model.json", {**model.to_json(seed=cfg.seed), "burn_in": cfg.burn_in, "x0": "zeros"})
    _write_meta(out, "simulate", args, {"files": files})
    return model.to_json(seed=cfg.seed)


def cmd_evaluate(args: dict) -> dict:
    out = _outdir(args.pop("out"))
    est = _load_graph(args["graph"])
    try:
        model = VarModel.from_json(json.loads(Path(args["model"]).read_text()))
    except (OSError, KeyError, json.JSONDecodeError) as exc:
        raise InputError(f"{args['model']}: cannot read model JSON ({exc})", module="cli") from exc
    if model.p != est.num_nodes:
        raise InputError(f"graph has p={est.num_nodes} but model has p={model.p}", module="cli")
    metrics = recovery_metrics(est.edges, model.true_graph_edges, model.p)
    _dump(out / "metrics.json", metrics)
    _write_meta(out, "evaluate", args)
    return metrics


def cmd_predict(args: dict) -> dict:
    out = _outdir(args.pop("out"))
    train = ingest_csv(args["train"])
    test = ingest_csv(args["test"])
    tr, te = predictive_statistics(train, test, args["daniell"])
    args["daniell"] = tr.meta["daniell_m"]
    graph = _load_graph(args["graph"])
    p = graph.num_nodes
    scores = {
        "given": predictive_log_likelihood(tr, te, graph, args["jitter"]),
        "empty": predictive_log_likelihood(tr, te, DecomposableGraph.empty(p), args["jitter"]),
        "complete": predictive_log_likelihood(tr, te, DecomposableGraph.complete(p), args["jitter"]),
    }
    _dump(out / "predictive.json", scores)
    _write_meta(out, "predict", args)
    return scores


def _parse_pairs(text: str, p: int) -> list[tuple[int, int]]:
    text = text.strip().lower()
    if text in {"", "none"}:
        return []
    if text == "auto":
        return [(i, i) for i in range(p)]
    if text == "all":
        return [(i, j) for i in range(p) for j in range(i, p)]
    sel = []
    for tok in text.split(","):
        try:
            i, j = (int(v) for v in tok.split("-"))
        except ValueError:
            raise ConfigError(f"bad pair {tok!r}; use i-j", module="cli") from None
        if not (0 <= i < p and 0 <= j < p):
            raise ConfigError(f"pair {tok!r} outside [0, {p})", module="cli")
        sel.append((i, j))
    return sel


def cmd_spectra(args: dict) -> dict:
    """Tidy CSV of per-entry spectral estimates (statistic divided by its count)."""
    out = _outdir(args.pop("out"))
    panel, keep_dc = _preprocess(args)
    smoothing = Smoothing.parse(args["smoothing"]).resolve(panel.T)
    args["smoothing"] = str(smoothing)
    stats = build_statistics(panel, smoothing, keep_dc=keep_dc, fold=False)
    sel = _parse_pairs(args["pairs"], panel.p)
    rows = 0
    with open(out / "spectra.csv", "w") as fh:
        fh.write("freq,i,j,re,im\n")
        for (lo, hi), s, d in zip(stats.freq_ranges, stats.stats, stats.dof):
            freq = 0.5 * (lo + hi) / stats.T
            for i, j in sel:
                z = complex(s[i, j] / d) if d > 0 else 0j
                fh.write(f"{float(freq)!r},{i},{j},{z.real!r},{z.imag!r}\n")
                rows += 1
    _write_meta(out, "spectra", args)
    return {"rows": rows}


COMMANDS = {
    "learn": cmd_learn,
    "simulate": cmd_simulate,
    "evaluate": cmd_evaluate,
    "predict": cmd_predict,
    "spectra": cmd_spectra,
}


def _add_preprocess(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", nargs="+", required=True, help="one CSV per replicate (rows=time, columns=series)")
    p.add_argument("--log-returns", action="store_true", help="convert prices to 100*log returns first")
    p.add_argument("--no-center", dest="center", action="store_false", help="skip mean-centering (needs --keep-dc-unsafe)")
    p.add_argument("--keep-dc-unsafe", action="store_true", help="keep frequency 0 when not centering")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tsgraph", description="Graph learning for stationary multivariate time series.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("learn", help="learn a graph from CSV data")
    _add_preprocess(p)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--iterations", type=int, default=10_000)
    p.add_argument("--g", type=float, default=None, help="fractional prior parameter (default 4/n)")
    p.add_argument("--smoothing", default=None, help="none | daniell[:m] | bartlett[:M] | piecewise[:M]")
    p.add_argument("--prior-a", type=float, default=1.0)
    p.add_argument("--prior-b", type=float, default=1.0)
    p.add_argument("--restarts", type=int, default=1)
    p.add_argument("--global-period", type=int, default=50)
    p.add_argument("--resample-period", type=int, default=100)
    p.add_argument("--edge-smoothing", type=float, default=1.0)
    p.add_argument("--accept-rule", choices=["metropolis", "always"], default="metropolis")
    p.add_argument("--jitter", type=float, default=1e-8)

    p = sub.add_parser("simulate", help="simulate VAR(1) panels with a known graph")
    p.add_argument("--out", required=True)
    p.add_argument("--p", type=int, default=20)
    p.add_argument("--T", type=int, default=500)
    p.add_argument("--N", type=int, default=1)
    p.add_argument("--rho", type=float, default=0.2)
    p.add_argument("--diag", type=float, default=0.5)
    p.add_argument("--offdiag", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--burn-in", type=int, default=500)
    p.add_argument("--max-attempts", type=int, default=10_000)
    p.add_argument("--allow-nondecomposable", action="store_true")

    p = sub.add_parser("evaluate", help="compare a learned graph with a simulated model")
    p.add_argument("--graph", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("predict", help="held-out predictive scores for a graph, the empty and the complete graph")
    p.add_argument("--train", nargs="+", required=True)
    p.add_argument("--test", nargs="+", required=True)
    p.add_argument("--graph", required=True)
    p.add_argument("--daniell", type=int, default=None, help="Daniell half-width for the training prior")
    p.add_argument("--jitter", type=float, default=1e-8)
    p.add_argument("--out", required=True)

    p = sub.add_parser("spectra", help="write smoothed spectra as tidy CSV")
    _add_preprocess(p)
    p.add_argument("--smoothing", default="daniell")
    p.add_argument("--pairs", default="auto", help="auto (diagonal) | all | none | i-j,k-l,...")
    p.add_argument("--out", required=True)

    p = sub.add_parser("rerun", help="repeat a run from its run_meta.json")
    p.add_argument("meta")
    p.add_argument("--out", required=True)
    return parser


def run(argv: list[str] | None = None) -> dict:
    """Parse ``argv`` and execute; raises :class:`TsGraphError` on failure."""
    ns = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING, format="%(name)s: %(message)s")
    args = vars(ns)
    command = args.pop("command")
    args.pop("verbose")
    if command == "rerun":
        try:
            meta = json.loads(Path(args["meta"]).read_text())
            command, saved = meta["command"], dict(meta["args"])
        except (OSError, KeyError, json.JSONDecodeError) as exc:
            raise InputError(f"{args['meta']}: not a run_meta.json ({exc})", module="cli") from exc
        saved["out"] = args["out"]
        args = saved
    return COMMANDS[command](args)


def main(argv: list[str] | None = None) -> int:
    try:
        run(argv)
    except TsGraphError as exc:
        print(f"tsgraph: error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
