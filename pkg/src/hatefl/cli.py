"""``hatefl`` command-line entry point.

Exit codes: 0 success, 1 validation failure, 2 configuration error,
3 runtime or data error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import re
import sys
from collections.abc import Sequence
from pathlib import Path

from hatefl import __version__
from hatefl.config import ExperimentConfig, RunManifest, load_config
from hatefl.data import (
    build_splits,
    corpus_stats,
    load_corpus,
    read_id_list,
    read_splits,
    select,
    validate_corpus,
    verify_splits,
    write_splits,
)
from hatefl.errors import ClientError, ConfigError, HateFLError
from hatefl.evaluation.agreement import agreement_reports
from hatefl.evaluation.api_baseline import evaluate_api_baseline
from hatefl.evaluation.deltas import SERVER, build_series, delta_table
from hatefl.evaluation.toxicity import ToxicityClient
from hatefl.federation import run_federation, run_single_target_baseline
from hatefl.runreport import RunReport
from hatefl.seeding import derive_seed

log = logging.getLogger("hatefl")

EXIT_OK, EXIT_INVALID, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3


def _seed_list(text: str) -> list[int]:
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _require_config(args: argparse.Namespace) -> ExperimentConfig:
    if args.config is None:
        raise ConfigError(f"{args.command} requires --config")
    return load_config(args.config, seed_override=args.seed_override, output_override=args.out)


def _safe_name(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", text)


# --- validate-data --------------------------------------------------------------------


def cmd_validate_data(args: argparse.Namespace) -> int:
    failed = 0
    for path in args.paths:
        try:
            diagnostics = [str(d) for d in validate_corpus(path)]
        except OSError as exc:
            diagnostics = [f"cannot read file: {exc.strerror or exc}"]
        status = "PASS" if not diagnostics else "FAIL"
        failed += bool(diagnostics)
        print(f"{path}: {status} ({len(diagnostics)} errors)")
        for d in diagnostics:
            print(f"  {d}")
    return EXIT_INVALID if failed else EXIT_OK


# --- build-splits ---------------------------------------------------------------------


def cmd_build_splits(args: argparse.Namespace) -> int:
    cfg = _require_config(args)
    written = []
    for i, client in enumerate(cfg.clients):
        if client.test_ids is None:
            raise ConfigError(f"clients[{i}].test_ids: required to build splits")
        try:
            corpus = load_corpus(client.corpus)
            test_ids = read_id_list(client.test_ids)
            splits = build_splits(corpus, test_ids, client.split_policy,
                                  derive_seed(cfg.split_seed, client.client_id, "splits"))
            client.splits.parent.mkdir(parents=True, exist_ok=True)
            write_splits(client.splits, splits)
            verify_splits(corpus, read_splits(client.splits), client.split_policy)
        except HateFLError as exc:
            raise ClientError(client.client_id, exc) from exc
        log.info("%s: train=%d dev=%d test=%d -> %s", client.client_id, len(splits.train), len(splits.dev),
                 len(splits.test), client.splits)
        written.append(client.splits)
    RunManifest(cfg.output_dir).record(cfg, "build-splits", written)
    return EXIT_OK


# --- run ------------------------------------------------------------------------------


def _report_name(rep: RunReport) -> str:
    if rep.mode == "api":
        return f"api_t{rep.threshold:g}.json"
    if rep.mode == "fl":
        return f"fl_{_safe_name(rep.strategy)}_shots{rep.shots}.json"
    return f"{rep.mode}_shots{rep.shots}.json"


def _write_combined_csv(path: Path, reports: Sequence[RunReport]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["mode", "strategy", "setting", "shots", "target", "seed", "f1"])
        for rep in reports:
            targets = sorted(rep.per_client.items())
            if rep.server is not None:
                targets.append((SERVER, rep.server))
            for target, scores in targets:
                for seed, f1 in zip(rep.seeds, scores.per_seed_f1):
                    w.writerow([rep.mode, rep.strategy, rep.setting, "" if rep.shots is None else rep.shots,
                                target, seed, repr(float(f1))])


def _api_reports(cfg: ExperimentConfig, out: Path) -> tuple[list[RunReport], list[Path]]:
    if cfg.toxicity is None:
        raise ConfigError("toxicity: required for --mode api")
    tests = {}
    for c in cfg.clients:
        if not c.splits.is_file():
            raise ConfigError(f"splits for client {c.client_id} not found at {c.splits}; run build-splits first")
        tests[c.client_id] = select(load_corpus(c.corpus), read_splits(c.splits).test)
    with ToxicityClient(cfg.toxicity) as client:
        reports, table = evaluate_api_baseline(tests, client, config_digest=cfg.digest, rounds=cfg.rounds)
    table_path = out / "threshold_table.csv"
    table.to_csv(table_path)
    return reports, [table_path]


def cmd_run(args: argparse.Namespace) -> int:
    cfg = _require_config(args)
    out = cfg.output_dir / "reports"
    out.mkdir(parents=True, exist_ok=True)
    modes = ["fl", "baseline"] + (["api"] if cfg.api_baseline else []) if args.mode == "all" else [args.mode]

    written: list[Path] = []
    for mode in modes:
        reports: list[RunReport] = []
        if mode == "api":
            reports, extra = _api_reports(cfg, out)
            written += extra
        else:
            for c in cfg.clients:
                if not c.splits.is_file():
                    raise ConfigError(f"splits for client {c.client_id} not found at {c.splits}; run build-splits first")
            for shots in cfg.shots:
                fed = cfg.federation(shots)
                log.info("%s shots=%d seeds=%s", mode, shots, cfg.seeds)
                rep = run_federation(fed) if mode == "fl" else run_single_target_baseline(fed)
                reports.append(rep)
        for rep in reports:
            path = out / _report_name(rep)
            rep.save(path)
            written.append(path)
        combined = out / f"{mode}_runs.csv"
        _write_combined_csv(combined, reports)
        written.append(combined)
    RunManifest(cfg.output_dir).record(cfg, f"run:{args.mode}", written)
    for p in written:
        log.info("wrote %s", p)
    return EXIT_OK


# --- report ---------------------------------------------------------------------------


def _collect_reports(paths: Sequence[Path]) -> list[RunReport]:
    files: list[Path] = []
    for p in paths:
        if p.is_dir():
            files += sorted(f for f in p.glob("*.json") if f.name != "manifest.json")
        elif p.is_file():
            files.append(p)
        else:
            raise ConfigError(f"report path not found: {p}")
    reports = []
    for f in files:
        try:
            reports.append(RunReport.load(f))
        except (KeyError, TypeError, ValueError) as exc:
            raise HateFLError(f"{f}: not a run report ({exc})") from exc
    if not reports:
        raise ConfigError("no run reports found")
    return reports


_MODE_ORDER = {"fl": 0, "baseline": 1, "api": 2}


def cmd_report(args: argparse.Namespace) -> int:
    reports = sorted(_collect_reports(args.reports), key=lambda r: (_MODE_ORDER.get(r.mode, 3), r.setting))
    settings = sorted({r.setting for r in reports})
    fl_settings = [s for s in settings if s.startswith("fl:")]
    fl_setting = args.fl_setting or ("fl:standard" if "fl:standard" in fl_settings else (fl_settings or [None])[0])
    if fl_setting is None or fl_setting not in settings:
        raise HateFLError(f"no FL reports to compare (settings found: {settings})")
    fl = [r for r in reports if r.setting == fl_setting]
    baselines = {s: [r for r in reports if r.setting == s] for s in settings if not s.startswith("fl:")}

    if args.out is not None:
        out = args.out
    elif args.config is not None:
        out = load_config(args.config).output_dir / "report"
    else:
        out = Path("report")
    out.mkdir(parents=True, exist_ok=True)

    written = []
    table = delta_table(fl, baselines)
    table.to_csv(out / "deltas.csv")
    written.append(out / "deltas.csv")
    all_series = build_series(reports)
    for target, series in all_series.items():
        path = out / f"series_{_safe_name(target)}.csv"
        series.to_csv(path)
        written.append(path)
    if not args.no_figures:
        from hatefl.plotting import save_overview_figure, save_series_figure

        for target, series in all_series.items():
            written.append(save_series_figure(series, out / f"series_{_safe_name(target)}.png"))
        written.append(save_overview_figure(all_series, out / "overview.png"))
    RunManifest(out).record(None, "report", written)
    for p in written:
        log.info("wrote %s", p)
    return EXIT_OK


# --- agreement / stats ----------------------------------------------------------------


def cmd_agreement(args: argparse.Namespace) -> int:
    rows = agreement_reports(load_corpus(args.file_a), load_corpus(args.file_b))
    print("scheme,kappa,alpha,n_units")
    for r in rows:
        print(f"{r.scheme},{r.kappa:.4f},{r.alpha:.4f},{r.n_units}")
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        payload = [{"scheme": r.scheme, "kappa": r.kappa, "alpha": r.alpha, "n_units": r.n_units} for r in rows]
        (args.out / "agreement.json").write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_stats(args: argparse.Namespace) -> int:
    from hatefl.data import CorpusStats

    lines = [["file"] + [name for name, _, _ in CorpusStats.COLUMNS]]
    failed = False
    for path in args.paths:
        try:
            lines.append([str(path)] + corpus_stats(load_corpus(path)).formatted())
        except (HateFLError, OSError) as exc:
            failed = True
            lines.append([str(path), f"ERROR: {exc}"])
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerows(lines)
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        with open(args.out / "stats.csv", "w", encoding="utf-8", newline="") as fh:
            csv.writer(fh, lineterminator="\n").writerows(lines)
    return EXIT_RUNTIME if failed else EXIT_OK


def cmd_mock_api(args: argparse.Namespace) -> int:
    from hatefl.evaluation.mock_api import MockToxicityServer, load_fixture

    server = MockToxicityServer(load_fixture(args.fixture), profile=args.profile, port=args.port,
                                default_score=args.default_score)
    print(f"serving {server.url}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return EXIT_OK


# --- parser ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="experiment config (YAML)")
    common.add_argument("--seed-override", type=_seed_list, metavar="S[,S...]", help="replace the configured seeds")
    common.add_argument("--out", type=Path, metavar="DIR", help="output directory")
    common.add_argument("--quiet", action="store_true", help="only print warnings and results")

    parser = argparse.ArgumentParser(prog="hatefl", description="Few-shot federated hate-speech experiments.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate-data", parents=[common], help="check corpus files")
    p.add_argument("paths", nargs="+", type=Path)
    p.set_defaults(func=cmd_validate_data)

    p = sub.add_parser("build-splits", parents=[common], help="write leakage-checked train/dev/test splits")
    p.set_defaults(func=cmd_build_splits)

    p = sub.add_parser("run", parents=[common], help="run FL, single-target or API experiments")
    p.add_argument("--mode", choices=["fl", "baseline", "api", "all"], default="fl")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", parents=[common], help="delta tables, F1 series and figures")
    p.add_argument("reports", nargs="+", type=Path, help="report files or directories")
    p.add_argument("--fl-setting", help="FL setting to compare against the others, e.g. fl:standard")
    p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("agreement", parents=[common], help="kappa and alpha between two annotation files")
    p.add_argument("file_a", type=Path)
    p.add_argument("file_b", type=Path)
    p.set_defaults(func=cmd_agreement)

    p = sub.add_parser("stats", parents=[common], help="corpus statistics table")
    p.add_argument("paths", nargs="+", type=Path)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("mock-api", parents=[common], help="serve toxicity scores from a fixture")
    p.add_argument("fixture", type=Path)
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--profile", choices=["simple", "perspective"], default="simple")
    p.add_argument("--default-score", type=float)
    p.set_defaults(func=cmd_mock_api)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s",
                        stream=sys.stderr, force=True)
    logging.getLogger("httpx").setLevel(logging.WARNING)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (HateFLError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
