"""Command-line entry point: ``narrate <command> ...``.

Every failure exits nonzero after printing one line to stderr of the form
``error: <kind>: <message>``.
"""

from __future__ import annotations

import argparse
import json
import logging
import re
import sys
from pathlib import Path

from .dataset import load_dataset, validate
from .harness import (
    ConfigError,
    ExperimentConfig,
    Workspace,
    dumps_report,
    fit_fold,
    render_text,
    run_experiment,
    sweep,
    with_env_seed,
    write_report,
    write_sweep,
)
from .seeding import derive_seed
from .splits import Fold
from .synth import CorpusConfig, generate_corpus, write_corpus
from .tokenizer import Tokenizer


class CommandError(RuntimeError):
    pass


def _read_json(path: str) -> dict:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"no such file: {p}")
    try:
        return json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: invalid JSON ({exc.msg} at line {exc.lineno})") from None


def _experiment_config(path: str | None) -> ExperimentConfig:
    if path is None:
        return with_env_seed(ExperimentConfig(synth=CorpusConfig()))
    if not Path(path).is_file():
        raise FileNotFoundError(f"no such file: {path}")
    return ExperimentConfig.load(path)


def cmd_synth(args: argparse.Namespace) -> int:
    cfg = CorpusConfig.from_json(_read_json(args.config)) if args.config else CorpusConfig()
    if args.seed is not None:
        cfg = CorpusConfig.from_json({**cfg.to_json(), "seed": args.seed})
    d, gt = generate_corpus(cfg)
    path = write_corpus(d, gt, args.out, cfg)
    print(f"wrote {len(d.sessions)} sessions, {len(d.segments())} segments to {path.parent}")
    return 0


def cmd_validate(args: argparse.Namespace) -> int:
    rep = validate(load_dataset(args.path))
    print(json.dumps(rep.to_json(), indent=2))
    if not rep.ok:
        raise CommandError(f"{len(rep.violations)} violations; first: {rep.violations[0]}")
    return 0


def _fit_all(cfg: ExperimentConfig):
    ws = Workspace()
    data = ws.data(cfg)
    d = data.dataset
    fold = Fold(0, "XS", "", tuple(sorted(data.index)), (), d.positions, d.positions)
    return fit_fold(ws, data, cfg, fold, derive_seed(cfg.seed, "fit"))


def cmd_fit(args: argparse.Namespace) -> int:
    cfg = _experiment_config(args.config)
    fitted = _fit_all(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    fitted.tokenizer.save(out / "tokenizer.json")
    (out / "idf.json").write_text(json.dumps(fitted.idf.to_json()) + "\n", encoding="utf-8")
    fitted.amap.save(out / "alignment.json")
    print(f"fitted on {len(fitted.train_ids)} segments; wrote {out}")
    return 0


def cmd_tokenize(args: argparse.Namespace) -> int:
    tok = Tokenizer.load(args.tokenizer) if Path(args.tokenizer).is_file() else None
    if tok is None:
        raise FileNotFoundError(f"no such file: {args.tokenizer}")
    d = load_dataset(args.data)
    lines = []
    for sess in d.sessions:
        for seg in sess.segments:
            for pos in sorted(seg.positions):
                seq, _ = tok.tokenize(sess.streams[pos], (seg.start_s, seg.end_s), seg.segment_id)
                lines.append(json.dumps({
                    "segment_id": seg.segment_id,
                    "position_id": pos,
                    "tokens": list(seq.tokens),
                    "chunk_starts_s": [round(t, 6) for t in seq.chunk_starts_s],
                }))
    text = "".join(ln + "\n" for ln in lines)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = _experiment_config(args.config)
    report = run_experiment(cfg)
    out = args.out or cfg.out_dir or "report"
    write_report(report, out)
    sys.stdout.write(render_text(report))
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _experiment_config(args.config)
    reports, trend = sweep(cfg, args.axis, args.values.split(","))
    path = write_sweep(reports, trend, args.out or cfg.out_dir or "sweep")
    print(json.dumps({m: {k: v[k] for k in ("argmin", "argmax")} for m, v in trend["metrics"].items()}))
    print(f"wrote {path}")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    p = Path(args.path)
    if p.is_dir():
        p = p / "report.json"
    report = _read_json(str(p))
    if args.json:
        sys.stdout.write(dumps_report(report))
    else:
        sys.stdout.write(render_text(report))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="narrate", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--config", help="corpus config JSON (defaults if omitted)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("validate", help="check a dataset directory")
    p.add_argument("path")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("fit", help="fit tokenizer and alignment on a whole dataset")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("tokenize", help="tokenize every segment with a fitted tokenizer")
    p.add_argument("--data", required=True)
    p.add_argument("--tokenizer", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_tokenize)

    p = sub.add_parser("eval", help="run a cross-validated experiment")
    p.add_argument("--config")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="run an experiment for each value of one axis")
    p.add_argument("--config")
    p.add_argument("--axis", required=True, choices=("K", "window_s", "views", "augment", "lam"))
    p.add_argument("--values", required=True, help="comma-separated, e.g. 8,16,32,64")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="print a saved report as a table")
    p.add_argument("path", help="report.json or the directory holding it")
    p.add_argument("--json", action="store_true", help="print normalized JSON instead")
    p.set_defaults(func=cmd_report)
    return ap


def _kind(exc: BaseException) -> str:
    name = type(exc).__name__
    if name.endswith("Error") and name != "Error":
        name = name[: -len("Error")]
    return re.sub(r"(?<!^)(?=[A-Z])", "_", name).lower()


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except Exception as exc:  # surface as one machine-parsable line
        msg = " ".join(str(exc).split()) or type(exc).__name__
        print(f"error: {_kind(exc)}: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
