"""Command line: run a program, compile annotations away, check a corpus.

    chrvis run PROGRAM --query "min(20), min(8), min(1)" --semantics vis --out out/
    chrvis transform PROGRAM --out compiled.chr
    chrvis check CORPUS_DIR --out report.jsonl

Exit status: 0 success, 1 error (or a failed check), 2 fuel exhausted.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from . import frames as fr
from .equivalence import check_corpus, load_corpus, write_report
from .graphics import GraphicsError
from .refined import DEFAULT_FUEL, EngineError, FuelExhausted, run_query
from .syntax import ParseError, parse_program, parse_query, pretty_print
from .terms import TermError
from .transform import TransformError, transform
from .vis import run_vis

log = logging.getLogger("chrvis")

EXIT_OK, EXIT_ERROR, EXIT_FUEL = 0, 1, 2


@dataclass
class RunConfig:
    program: Path
    query: str
    semantics: str = "vis"
    seed: int = 0
    fuel: int = DEFAULT_FUEL
    out: Path = Path("out")
    frames: bool = True
    svg: bool = True
    trace: bool = True


def _write_outputs(cfg: RunConfig, trace) -> None:
    cfg.out.mkdir(parents=True, exist_ok=True)
    if cfg.trace:
        with open(cfg.out / "trace.txt", "w") as fh:
            for label, _ in trace:
                fh.write(f"{label}\n")
    if cfg.semantics != "vis" or not (cfg.frames or cfg.svg):
        return
    frames = fr.frames_from_trace(trace)
    if cfg.frames:
        with open(cfg.out / "frames.jsonl", "w") as fh:
            for f in frames:
                fh.write(f.to_json_line() + "\n")
                fh.flush()
    if cfg.svg:
        for f in frames:
            (cfg.out / f"frame_{f.seq}.svg").write_text(fr.render_svg(f.store_snapshot))
    log.info("%d transitions, %d frames written to %s", len(trace), len(frames), cfg.out)


def cmd_run(cfg: RunConfig) -> int:
    if cfg.semantics not in ("vis", "refined"):
        log.error("unknown semantics %r", cfg.semantics)
        return EXIT_ERROR
    if cfg.semantics == "refined" and cfg.frames:
        log.warning("frames need --semantics vis; none written")
    p = parse_program(cfg.program.read_text())
    query = parse_query(cfg.query)
    status = EXIT_OK
    try:
        if cfg.semantics == "vis":
            state, trace = run_vis(p, query, cfg.fuel, cfg.seed)
        else:
            state, trace = run_query(p.without_annotations(), query, cfg.fuel)
    except FuelExhausted as e:
        log.error("fuel exhausted after %d transitions", len(e.trace))
        state, trace, status = e.state, e.trace, EXIT_FUEL
    _write_outputs(cfg, trace)
    if state.builtins.failed:
        print("failed")
    else:
        print(", ".join(repr(t) for t in state.constraints()) or "true")
    return status


def cmd_transform(src: Path, out: Path | None, simplify_compound: bool = False) -> int:
    t = transform(parse_program(src.read_text()), simplify_compound)
    text = pretty_print(t.program)
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text)
        log.info("wrote %s (%d generated rules)", out, len(t.provenance))
    return EXIT_OK


def cmd_check(corpus: Path, report: Path, fuel: int = DEFAULT_FUEL, seed: int = 0) -> int:
    if not corpus.is_dir():
        raise OSError(f"not a directory: {corpus}")
    if not load_corpus(corpus):
        log.warning("corpus %s is empty", corpus)
    reports = check_corpus(corpus, fuel, seed)
    write_report(reports, report)
    failed = [r for r in reports if not r.verdict]
    for r in failed:
        print(f"FAIL {r.program} [{r.check}] {r.query}: {r.clause}: {r.witness}")
    print(f"{len(reports) - len(failed)}/{len(reports)} checks passed")
    return EXIT_ERROR if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="chrvis", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a query and write trace/frames")
    run.add_argument("program", type=Path)
    run.add_argument("--query", required=True)
    run.add_argument("--semantics", choices=("vis", "refined"), default="vis")
    run.add_argument("--seed", type=int, default=None,
                     help="seed for random parameters (default: $CHRVIS_SEED or 0)")
    run.add_argument("--fuel", type=int, default=DEFAULT_FUEL)
    run.add_argument("--out", type=Path, default=Path("out"))
    run.add_argument("--frames", action="store_true", help="write frames.jsonl")
    run.add_argument("--svg", action="store_true", help="write frame_<seq>.svg")
    run.add_argument("--trace", action="store_true", help="write trace.txt")

    tr = sub.add_parser("transform", help="compile annotations into plain rules")
    tr.add_argument("program", type=Path)
    tr.add_argument("--out", type=Path, default=None)
    tr.add_argument("--simplify-compound", action="store_true",
                    help="compound annotations remove their heads")

    ck = sub.add_parser("check", help="differential check over a corpus directory")
    ck.add_argument("corpus", type=Path)
    ck.add_argument("--out", type=Path, default=Path("check_report.jsonl"))
    ck.add_argument("--fuel", type=int, default=DEFAULT_FUEL)
    ck.add_argument("--seed", type=int, default=0)
    return ap


def _seed(arg: int | None) -> int:
    if arg is not None:
        return arg
    env = os.environ.get("CHRVIS_SEED")
    return int(env) if env else 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            emit_all = not (args.frames or args.svg or args.trace)
            vis = args.semantics == "vis"
            cfg = RunConfig(args.program, args.query, args.semantics, _seed(args.seed), args.fuel,
                            args.out, frames=args.frames or (emit_all and vis),
                            svg=args.svg or (emit_all and vis), trace=args.trace or emit_all)
            return cmd_run(cfg)
        if args.command == "transform":
            return cmd_transform(args.program, args.out, args.simplify_compound)
        return cmd_check(args.corpus, args.out, args.fuel, args.seed)
    except ParseError as e:
        print(f"{getattr(args, 'program', '')}:{e}", file=sys.stderr)
    except (OSError, ValueError, TransformError, EngineError, TermError, GraphicsError) as e:
        print(f"chrvis: {e}", file=sys.stderr)
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
