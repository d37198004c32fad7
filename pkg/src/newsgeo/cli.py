"""Command-line entry point: ``newsgeo {index,geocode,evaluate,ablate}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from newsgeo.corpus import Article, CorpusError, GoldMention, load_normalized
from newsgeo.gazetteer import GazetteerParseError, load_admin1_names, load_gazetteer
from newsgeo.index import SnapshotError, build_index, load_index, save_index
from newsgeo.llm import ProviderRequest, complete_geocode, format_geocode_answer
from newsgeo.metrics import GeoPoint, MetricsReport, population_bucket_accuracy
from newsgeo.pipeline import (
    VARIANTS,
    PipelineConfig,
    config_for_variant,
    gazetteer_top_match,
    load_config,
    make_provider,
    prepare_mention,
    run_pipeline,
)

log = logging.getLogger("newsgeo")


@dataclass
class ReportTable:
    rows: list[tuple[str, MetricsReport]] = field(default_factory=list)

    def add(self, name: str, report: MetricsReport) -> None:
        self.rows.append((name, report))

    def render(self) -> str:
        header = ["Model", *MetricsReport.COLUMNS]
        body = [[name, *rep.table_cells()] for name, rep in self.rows]
        widths = [max(len(r[i]) for r in [header, *body]) for i in range(len(header))]

        def line(cells: Sequence[str]) -> str:
            first = cells[0].ljust(widths[0])
            rest = [c.rjust(w) for c, w in zip(cells[1:], widths[1:])]
            return "  ".join([first, *rest]).rstrip()

        out = [line(header), line(["-" * w for w in widths])]
        out.extend(line(r) for r in body)
        return "\n".join(out) + "\n"


class CliError(Exception):
    pass


def _resolve_config(args: argparse.Namespace) -> PipelineConfig:
    try:
        if getattr(args, "config", None):
            cfg = load_config(args.config)
            if getattr(args, "variant", None):
                base = cfg.to_dict()
                keep = {k: base[k] for k in ("provider", "max_in_flight", "per_request_timeout")}
                cfg = config_for_variant(args.variant, **keep)
            return cfg
        return config_for_variant(getattr(args, "variant", None) or "raccoon")
    except (OSError, ValueError, TypeError) as exc:
        raise CliError(f"bad config: {exc}") from exc


def _load_index(path: str):
    try:
        return load_index(path)
    except (OSError, SnapshotError) as exc:
        raise CliError(f"cannot load index {path}: {exc}") from exc


def cmd_index(args: argparse.Namespace) -> int:
    for p in (args.gazetteer, args.alternates, args.admin1_codes):
        if p and not Path(p).is_file():
            raise CliError(f"no such file: {p}")
    admin1 = load_admin1_names(args.admin1_codes) if args.admin1_codes else None
    try:
        gaz = load_gazetteer(
            args.gazetteer, args.alternates, strict=args.strict, admin1_names=admin1
        )
    except GazetteerParseError as exc:
        raise CliError(f"parse error: {exc}") from exc
    if gaz.count == 0:
        raise CliError("no valid gazetteer rows")
    index = build_index(gaz)
    save_index(index, args.out)
    s = gaz.stats
    print(f"indexed {gaz.count} entries")
    print(
        f"dropped main={s.main_dropped} alternates={s.alternate_dropped} "
        f"orphans={s.orphan_alternates} other_language={s.other_language}"
    )
    return 0


def cmd_geocode(args: argparse.Namespace) -> int:
    index = _load_index(args.index)
    cfg = _resolve_config(args)
    try:
        body = Path(args.article).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot read article: {exc}") from exc
    article = Article("cli", body)
    start = body.find(args.mention)
    if start < 0:
        start = 0
        log.warning("mention not found in article text")
    # offsets only matter for the corpus; geocoding uses the surface text
    mention = GoldMention(
        "cli:0000", "cli", args.mention, start, start + len(args.mention), GeoPoint(0.0, 0.0)
    )
    provider = make_provider(cfg, index) if cfg.use_provider else None
    trace = prepare_mention(article, mention, index, provider, cfg)
    if cfg.use_provider:
        prompt = trace.bundle.render()
        if args.verbose:
            print(prompt)
        pred = complete_geocode(
            provider, ProviderRequest(prompt=prompt, timeout=cfg.per_request_timeout)
        )
    else:
        pred = gazetteer_top_match(trace)
    if pred.point is not None:
        print(f"status={pred.status} {format_geocode_answer(pred)}")
    else:
        print(f"status={pred.status} raw={json.dumps(pred.raw_response)}")
    return 0


def _parse_edges(text: str) -> list[float]:
    try:
        edges = [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise CliError(f"bad --buckets: {exc}") from exc
    if edges and edges[-1] != float("inf"):
        edges.append(float("inf"))
    return edges


def _load_corpus(path: str):
    try:
        corpus = load_normalized(path)
    except (OSError, CorpusError, ValueError) as exc:
        raise CliError(f"cannot load corpus {path}: {exc}") from exc
    if not corpus.mentions:
        raise CliError("corpus has no mentions")
    return corpus


def cmd_evaluate(args: argparse.Namespace) -> int:
    corpus = _load_corpus(args.corpus)
    index = _load_index(args.index)
    cfg = _resolve_config(args)
    result = run_pipeline(corpus, index, cfg)
    table = ReportTable()
    table.add(cfg.variant, result.report)
    out = Path(args.report)
    payload = result.to_dict()
    if args.buckets:
        buckets = population_bucket_accuracy(result.records, _parse_edges(args.buckets))
        payload["population_buckets"] = [
            {"low": b.low, "high": b.high if b.high != float("inf") else None,
             "count": b.count, "accuracy_at_161": b.accuracy_at_161}
            for b in buckets
        ]
    out.write_text(json.dumps(payload, indent=1, sort_keys=True, ensure_ascii=False) + "\n",
                   encoding="utf-8")
    out.with_suffix(".txt").write_text(table.render(), encoding="utf-8")
    sys.stdout.write(table.render())
    if args.buckets:
        for b in buckets:
            acc = "-" if b.accuracy_at_161 is None else f"{b.accuracy_at_161:.3f}"
            print(f"population {b.label()}: A@161 {acc} (n={b.count})")
    return 0


def cmd_ablate(args: argparse.Namespace) -> int:
    names = [v.strip() for v in args.variants.split(",") if v.strip()] if args.variants else list(VARIANTS)
    bad = [v for v in names if v not in VARIANTS]
    if bad:
        raise CliError(f"unknown variant(s) {', '.join(bad)}; valid: {', '.join(VARIANTS)}")
    corpus = _load_corpus(args.corpus)
    index = _load_index(args.index)
    table = ReportTable()
    runs = {}
    for name in names:
        args.variant = name
        cfg = _resolve_config(args)
        result = run_pipeline(corpus, index, cfg)
        table.add(name, result.report)
        runs[name] = result.to_dict()
    text = table.render()
    if args.report:
        out = Path(args.report)
        out.write_text(text, encoding="utf-8")
        out.with_suffix(".json").write_text(
            json.dumps(runs, indent=1, sort_keys=True, ensure_ascii=False) + "\n",
            encoding="utf-8",
        )
    sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="newsgeo", description=__doc__)
    parser.add_argument("-q", "--quiet", action="store_true", help="only print errors")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("index", help="build an index snapshot from GeoNames dumps")
    p.add_argument("--gazetteer", required=True, help="main dump (allCountries.txt layout)")
    p.add_argument("--alternates", help="alternate-names dump")
    p.add_argument("--admin1-codes", help="admin1CodesASCII.txt for state names")
    p.add_argument("--out", required=True)
    p.add_argument("--strict", action="store_true", help="abort on the first bad row")
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("geocode", help="geocode a single mention")
    p.add_argument("--index", required=True)
    p.add_argument("--article", required=True, help="article text file")
    p.add_argument("--mention", required=True)
    p.add_argument("--config")
    p.add_argument("--variant", choices=VARIANTS)
    p.add_argument("--verbose", action="store_true", help="print the prompt")
    p.set_defaults(func=cmd_geocode)

    p = sub.add_parser("evaluate", help="run one variant over a normalized corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--index", required=True)
    p.add_argument("--variant")
    p.add_argument("--config")
    p.add_argument("--report", required=True, help="RunResult JSON output path")
    p.add_argument("--buckets", help="comma-separated population bucket edges")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablate", help="run several variants and tabulate")
    p.add_argument("--corpus", required=True)
    p.add_argument("--index", required=True)
    p.add_argument("--variants", help=f"comma-separated subset of: {','.join(VARIANTS)}")
    p.add_argument("--config")
    p.add_argument("--report", help="table output path")
    p.set_defaults(func=cmd_ablate)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.ERROR if args.quiet else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if getattr(args, "variant", None) and args.variant not in VARIANTS:
        print(f"error: unknown variant {args.variant!r}; valid: {', '.join(VARIANTS)}",
              file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
