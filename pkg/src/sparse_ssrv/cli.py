"""Command-line interface: ``sparse-ssrv {analyze,simulate,benchmark,diagnose,probe-consistency}``.

Exit codes: 0 success, 1 validation or usage error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import __version__
from .baselines import CLR, GAUSSIAN_CLR, INFORMED, ScalePrior, run_baseline
from .core import AnalysisConfig, ValidationError
from .inference import compositional_lfc_draws, consistency_probe, run_sparse_ssrv
from .io import (file_digest, loads_for, read_count_table, read_loads, read_metadata,
                 read_scenarios, write_benchmark, write_consistency, write_dataset,
                 write_diagnostics, write_json, write_report)
from .kde import make_spec, parzen_mode
from .sim import SPARSE_SSRV, GeneratorSpec, generate, run_benchmark, sign_sweep, sparsity_sweep

log = logging.getLogger("sparse_ssrv")

METHODS = (SPARSE_SSRV, CLR, GAUSSIAN_CLR, INFORMED)
EXIT_OK, EXIT_VALIDATION, EXIT_IO = 0, 1, 2


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    """Reports usage problems as exit code 1 instead of argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _float_list(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ladder(text: str):
    rungs = []
    for part in text.split(","):
        try:
            depth, D = part.split(":")
            rungs.append((float(depth), int(D)))
        except ValueError:
            raise argparse.ArgumentTypeError(f"ladder rungs look like 1e3:100, got {part!r}")
    return rungs


def _add_analysis_flags(p, draws_default=128):
    g = p.add_argument_group("analysis")
    g.add_argument("--alpha", type=float, default=0.5, help="Dirichlet pseudo-count")
    g.add_argument("--draws", type=int, default=draws_default, help="posterior draws S")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--fdr", type=float, default=0.05, help="target FDR")
    g.add_argument("--grid-size", type=int, default=512, help="KDE grid size")
    g.add_argument("--tail-method", choices=("normal", "empirical"), default="normal")
    g.add_argument("--threads", type=int, default=None,
                   help="worker threads (0 = all cores; default from SPARSE_SSRV_THREADS)")


def _add_input_flags(p):
    p.add_argument("counts", nargs="?", help="count table, features as rows")
    p.add_argument("metadata", nargs="?", help="sample metadata (sample_id, condition[, load])")
    p.add_argument("--transpose", action="store_true", help="count table has samples as rows")
    p.add_argument("--case", default=None, help="condition value coded as case (1)")
    p.add_argument("--min-mean-count", type=float, default=0.0)
    p.add_argument("--min-prevalence", type=float, default=0.0)


def _add_generator_flags(p):
    g = p.add_argument_group("generator")
    d = GeneratorSpec()
    g.add_argument("--D", type=int, default=d.D, help="number of features")
    g.add_argument("--N", type=int, default=d.N, help="number of samples")
    g.add_argument("--depth", type=float, default=d.depth, help="reads per sample")
    g.add_argument("--prop-relevant", type=float, default=d.prop_relevant)
    g.add_argument("--pos-frac", type=float, default=d.pos_frac)
    g.add_argument("--base-log-sd", type=float, default=d.base_log_sd)
    g.add_argument("--load-sd", type=float, default=d.load_sd)
    g.add_argument("--poisson-depth", action="store_true")
    g.add_argument("--data-seed", type=int, default=d.seed, help="generator seed")


def build_parser() -> Parser:
    parser = Parser(prog="sparse-ssrv", description="Differential abundance with Sparse SSRV.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("analyze", help="count table + metadata -> report")
    _add_input_flags(p)
    _add_analysis_flags(p)
    p.add_argument("--method", choices=METHODS, default=SPARSE_SSRV)
    p.add_argument("--gamma2", type=float, default=None,
                   help="scale-noise variance (gaussian-clr default 0.25, informed 0.5)")
    p.add_argument("--loads", default=None, help="two-column (sample_id, load) file")
    p.add_argument("--log-base", choices=("e", "2"), default="e",
                   help="log base of reported LFCs (display only)")
    p.add_argument("--manifest", default=None,
                   help="rerun from a previous manifest.json (other flags ignored)")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("diagnose", help="density diagnostic of compositional LFCs only")
    _add_input_flags(p)
    _add_analysis_flags(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("simulate", help="write a synthetic dataset with known truth")
    _add_generator_flags(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("benchmark", help="replicate FDR/TPR benchmark")
    _add_generator_flags(p)
    _add_analysis_flags(p)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--scenarios", help="JSON list of generator settings")
    src.add_argument("--sweep", choices=("sparsity", "sign"))
    p.add_argument("--levels", type=_float_list, default=None,
                   help="comma-separated sweep levels, e.g. 0.05,0.2,0.65")
    p.add_argument("--methods", default=None,
                   help=f"comma-separated subset of {','.join(METHODS)}")
    p.add_argument("--replicates", type=int, default=20)
    p.add_argument("--out", required=True)

    p = sub.add_parser("probe-consistency", help="posterior error along a depth/D ladder")
    _add_generator_flags(p)
    _add_analysis_flags(p, draws_default=64)
    p.add_argument("--ladder", type=_ladder, default=[(1e3, 100), (1e4, 400), (1e5, 1600)],
                   help="comma-separated depth:D rungs")
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--method", choices=METHODS, default=SPARSE_SSRV)
    p.add_argument("--gamma2", type=float, default=None)
    p.add_argument("--out", required=True)
    return parser


def _config(args) -> AnalysisConfig:
    return AnalysisConfig(
        alpha_prior=args.alpha, num_draws=args.draws, seed=args.seed, target_fdr=args.fdr,
        kde_grid_size=args.grid_size, tail_method=args.tail_method,
        filter_min_mean_count=getattr(args, "min_mean_count", 0.0),
        filter_min_prevalence=getattr(args, "min_prevalence", 0.0),
    )


def _generator(args) -> GeneratorSpec:
    return GeneratorSpec(D=args.D, N=args.N, depth=int(args.depth),
                         prop_relevant=args.prop_relevant, pos_frac=args.pos_frac,
                         base_log_sd=args.base_log_sd, load_sd=args.load_sd,
                         poisson_depth=args.poisson_depth, seed=args.data_seed)


def _manifest(command: str, started: str, **fields) -> dict:
    return {"command": command, "version": __version__, "started": started, **fields}


def _finish(manifest: dict, out: Path, warnings=()) -> None:
    manifest["warnings"] = list(manifest.get("warnings", [])) + list(warnings)
    manifest["finished"] = _now()
    write_json(manifest, out / "manifest.json")


def _load_inputs(args):
    if not args.counts or not args.metadata:
        raise UsageError("analyze/diagnose need COUNTS and METADATA paths")
    table = read_count_table(args.counts, transpose=args.transpose)
    meta = read_metadata(args.metadata, case=args.case).aligned_to(table)
    return table, meta


def _inputs_record(args) -> dict:
    rec = {"counts": str(Path(args.counts).resolve()), "metadata": str(Path(args.metadata).resolve()),
           "counts_sha256": file_digest(args.counts),
           "metadata_sha256": file_digest(args.metadata)}
    if getattr(args, "loads", None):
        rec["loads"] = str(Path(args.loads).resolve())
        rec["loads_sha256"] = file_digest(args.loads)
    return rec


def _apply_manifest(args) -> None:
    with open(args.manifest) as fh:
        man = json.load(fh)
    if man.get("command") != "analyze":
        raise ValidationError(f"{args.manifest} is not an analyze manifest")
    inputs, opts, cfg = man["inputs"], man["options"], man["config"]
    args.counts, args.metadata = inputs["counts"], inputs["metadata"]
    args.loads = inputs.get("loads")
    for key in ("counts", "metadata", "loads"):
        if key in inputs and inputs.get(f"{key}_sha256") != file_digest(inputs[key]):
            log.warning("%s changed since the manifest was written", inputs[key])
    args.method, args.gamma2 = opts["method"], opts["gamma2"]
    args.case, args.transpose, args.log_base = opts["case"], opts["transpose"], opts["log_base"]
    args.config_override = AnalysisConfig.from_dict(cfg)


def cmd_analyze(args) -> int:
    started = _now()
    if args.manifest:
        _apply_manifest(args)
    table, meta = _load_inputs(args)
    config = getattr(args, "config_override", None) or _config(args)
    if args.method == SPARSE_SSRV:
        report = run_sparse_ssrv(table, meta.labels, config, args.threads)
    else:
        if args.method == CLR:
            prior = ScalePrior.clr()
        elif args.method == GAUSSIAN_CLR:
            prior = ScalePrior.gaussian_clr(0.25 if args.gamma2 is None else args.gamma2)
        else:
            if args.loads:
                loads = loads_for(table, read_loads(args.loads))
            elif meta.loads is not None:
                loads = meta.loads
            else:
                raise ValidationError("--method informed needs --loads or a load column")
            prior = ScalePrior.informed(loads, 0.5 if args.gamma2 is None else args.gamma2)
        report = run_baseline(table, meta.labels, config, prior, args.threads)
    out = Path(args.out)
    manifest = _manifest(
        "analyze", started, inputs=_inputs_record(args), config=config.to_dict(),
        seed=config.seed,
        options={"method": args.method, "gamma2": args.gamma2, "case": args.case,
                 "transpose": args.transpose, "log_base": args.log_base},
        conditions={"case": meta.case_value, "control": meta.control_value})
    manifest["finished"] = _now()
    write_report(report, out, manifest, args.log_base)
    print(f"{report.n_significant} of {len(report.feature_ids)} features significant "
          f"(scale model: {report.scale_model_kind}); results in {out / 'results.tsv'}")
    return EXIT_OK


def cmd_diagnose(args) -> int:
    started = _now()
    table, meta = _load_inputs(args)
    config = _config(args)
    _, draws, warnings = compositional_lfc_draws(table, meta.labels, config, args.threads)
    modes = np.array([parzen_mode(d, make_spec(d, config.kde_grid_size)) for d in draws])
    out = Path(args.out)
    write_diagnostics(out, draws, modes, grid_size=config.kde_grid_size)
    manifest = _manifest("diagnose", started, inputs=_inputs_record(args),
                         config=config.to_dict(), seed=config.seed)
    _finish(manifest, out, warnings)
    print(f"density diagnostic written to {out}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    started = _now()
    spec = _generator(args)
    data = generate(spec)
    out = Path(args.out)
    paths = write_dataset(data, out)
    _finish(_manifest("simulate", started, generator=asdict(spec), seed=spec.seed,
                      outputs=paths), out, data.warnings)
    print(f"wrote {spec.D} x {spec.N} dataset ({int(data.relevant.sum())} relevant) to {out}")
    return EXIT_OK


def cmd_benchmark(args) -> int:
    started = _now()
    config = _config(args)
    methods = args.methods.split(",") if args.methods else None
    for m in methods or ():
        if m not in METHODS:
            raise ValidationError(f"unknown method {m!r}")
    base = _generator(args)
    sweep_field = None
    if args.scenarios:
        scenarios = read_scenarios(args.scenarios)
        result = run_benchmark(scenarios, methods or [SPARSE_SSRV], args.replicates, config,
                               args.threads)
    else:
        if not args.levels:
            raise UsageError("--sweep needs --levels")
        if args.sweep == "sparsity":
            sweep_field = "prop_relevant"
            result = sparsity_sweep(base, args.levels, methods or [SPARSE_SSRV],
                                    args.replicates, config, args.threads)
        else:
            sweep_field = "pos_frac"
            result = sign_sweep(base, args.levels, methods or [SPARSE_SSRV, CLR],
                                args.replicates, config, args.threads)
    out = Path(args.out)
    paths = write_benchmark(result, out, sweep_field)
    manifest = _manifest("benchmark", started, config=config.to_dict(), seed=config.seed,
                         scenarios=[asdict(s) for s in result.scenarios],
                         methods=result.methods, replicates=args.replicates,
                         scenario_file=args.scenarios, sweep=args.sweep, outputs=paths)
    _finish(manifest, out)
    for r in result.summary_rows():
        print(f"scenario {r['scenario']} {r['method']}: fdr={r['fdr']:.3f} tpr={r['tpr']:.3f}")
    return EXIT_OK


def cmd_probe(args) -> int:
    started = _now()
    config = _config(args)
    spec = _generator(args)
    rows = consistency_probe(spec, args.ladder, args.seeds, args.method, config, args.threads,
                             args.gamma2)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_consistency(rows, out / "consistency.tsv")
    _finish(_manifest("probe-consistency", started, generator=asdict(spec),
                      config=config.to_dict(), seed=config.seed, method=args.method,
                      ladder=[list(r) for r in args.ladder], seeds=args.seeds), out)
    for r in rows:
        print(f"depth={r['depth']:g} D={r['D']}: rmse={r['rmse']:.4f} sd={r['posterior_sd']:.4f}")
    return EXIT_OK


COMMANDS = {"analyze": cmd_analyze, "diagnose": cmd_diagnose, "simulate": cmd_simulate,
            "benchmark": cmd_benchmark, "probe-consistency": cmd_probe}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_VALIDATION
    except SystemExit as e:
        # --help and --version
        return int(e.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ValidationError, ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
