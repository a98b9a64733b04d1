"""``nfaslim`` command line: generate | prune | verify | cost | export | report.

Exit status is 0 when the run produced no errors or violations, 1 when it
did, and 2 for usage errors. Defaults for any long option can come from a
JSON file named by ``--config`` or the ``NFASLIM_CONFIG`` environment
variable, keyed by subcommand: ``{"prune": {"theta": 0.35, "jobs": 1}}``.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

from .core import ScoredNfa
from .execution import TrialConfig, check_equivalence
from .formats import FanoutViolation, FormatError, export_config_vectors
from .generator import PROFILES, ScoreDistribution, generate_corpus, profile_config
from .features import normalize_mask
from .forest import RfConfig
from .hwcost import (COST_PROFILES, cost_profile, fanout_sweep, provisioned_fanout,
                     sweep_to_csv)
from .pipeline import CSV_SUFFIX, load_automaton, run_pipeline, summary_csv
from .pruning import PruneConfig

CONFIG_ENV = "NFASLIM_CONFIG"
log = logging.getLogger("nfaslim")


class SystemExit2(Exception):
    """A usage problem detected after argument parsing."""


@dataclass
class RunConfig:
    """Resolved settings for one invocation."""

    subcommand: str
    options: dict = field(default_factory=dict)
    config_path: str | None = None

    @property
    def verbosity(self) -> int:
        return self.options.get("verbose", 0)


def parse_size(text: str) -> int:
    t = text.strip().lower()
    mult = 1
    if t.endswith("k"):
        t, mult = t[:-1], 1024
    try:
        n = int(t) * mult
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad size {text!r}") from None
    if n < 1:
        raise argparse.ArgumentTypeError(f"size must be positive: {text!r}")
    return n


def _sizes(text: str) -> list[int]:
    return [parse_size(s) for s in text.split(",") if s.strip()]


def _int_list(text: str) -> list[int]:
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad integer list {text!r}") from None


def _alphabet(text: str):
    return int(text) if text.isdigit() else text


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nfaslim", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="count", default=0)
    p.add_argument("--config", help=f"JSON defaults file (else ${CONFIG_ENV})")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic corpus")
    g.add_argument("--profile", default="paper2025", choices=sorted(PROFILES))
    g.add_argument("--sizes", type=_sizes, required=True, help="e.g. 1k,2k,4k")
    g.add_argument("--count", type=int, default=10, help="files per size")
    g.add_argument("--out", required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--scores", type=ScoreDistribution.parse, default=None,
                   help="uniform01 | exponential:LAM | bimodal:P,LO,HI")

    r = sub.add_parser("prune", help="classify, prune and clean a folder of automata")
    r.add_argument("--in", dest="input", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--theta", type=float)
    r.add_argument("--mask", default="score", help="comma-separated feature names")
    r.add_argument("--trees", type=int, default=RfConfig.n_trees)
    r.add_argument("--max-depth", type=int, default=RfConfig.max_depth)
    r.add_argument("--min-leaf", type=int, default=RfConfig.min_leaf)
    r.add_argument("--sample-fraction", type=float, default=RfConfig.sample_fraction)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--train-fraction", type=float, default=0.7)
    r.add_argument("--cv-folds", type=int, default=5)
    r.add_argument("--train-max-samples", type=int, default=50000,
                   help="cap on rows the forest is trained on (0 = no cap)")
    r.add_argument("--cv-max-samples", type=int, default=20000,
                   help="cap on rows used for cross-validation (0 = no cap)")
    r.add_argument("--no-merge", action="store_true")
    r.add_argument("--no-reachability", action="store_true")
    r.add_argument("--oracle-only", action="store_true",
                   help="use the exact threshold rule instead of training a forest")
    r.add_argument("--shared-model", action="store_true",
                   help="train one forest on the union of all files")
    r.add_argument("--jobs", type=int, default=None)
    r.add_argument("--no-timing", action="store_true",
                   help="omit wall-clock fields so reports are reproducible byte for byte")

    v = sub.add_parser("verify", help="check a pruned automaton against its original")
    v.add_argument("--original", required=True, help="automaton file or directory")
    v.add_argument("--pruned", required=True, help="automaton file or directory")
    v.add_argument("--theta", type=float)
    v.add_argument("--alphabet", type=_alphabet, default=4,
                   help="symbol count (drawn from the automata) or literal symbols")
    v.add_argument("--max-len", type=int, default=4)
    mode = v.add_mutually_exclusive_group()
    mode.add_argument("--exhaustive", action="store_true", default=True)
    mode.add_argument("--samples", type=int, default=None)
    v.add_argument("--delta", type=float, default=0.0)
    v.add_argument("--all-offsets", action="store_true")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--report", help="write the JSON report here instead of stdout")

    c = sub.add_parser("cost", help="modelled resources and latency")
    c.add_argument("--in", dest="input", required=True)
    c.add_argument("--profile", default="paper2025-hw", choices=sorted(COST_PROFILES))
    c.add_argument("--fanout", type=int, default=None,
                   help="provisioned fanout (default: next power of two over the widest state)")
    c.add_argument("--fanout-sweep", type=_int_list, default=None)
    c.add_argument("--input-len", type=int, default=1)
    c.add_argument("--out", help="CSV destination (default stdout)")

    e = sub.add_parser("export", help="write config vectors")
    e.add_argument("--in", dest="input", required=True)
    e.add_argument("--max-fanout", type=int, required=True)
    e.add_argument("--out", help="binary destination (default <input>.cfg)")

    s = sub.add_parser("report", help="rebuild the corpus summary from per-file reports")
    s.add_argument("--in", dest="input", required=True, help="prune output directory")
    s.add_argument("--out", help="CSV destination (default stdout)")
    return p


def _load_defaults(parser: argparse.ArgumentParser, argv) -> str | None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    path = known.config or os.environ.get(CONFIG_ENV)
    if not path:
        return None
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        parser.error(f"cannot read config {path}: {exc}")
    cmd = next((a for a in rest if not a.startswith("-")), None)
    section = doc.get(cmd, {}) if cmd else {}
    if not isinstance(section, dict):
        parser.error(f"config section {cmd!r} must be an object")
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    if cmd in subparsers.choices:
        sp = subparsers.choices[cmd]
        dests = {a.dest for a in sp._actions}
        unknown = set(section) - dests
        if unknown:
            parser.error(f"unknown config keys for {cmd}: {sorted(unknown)}")
        sp.set_defaults(**section)
        # a value supplied by the config satisfies a required option
        for a in sp._actions:
            if a.dest in section:
                a.required = False
    return path


def _load(path: Path) -> ScoredNfa:
    name = path.name
    if name.endswith(CSV_SUFFIX):
        return load_automaton(path, name[:-len(CSV_SUFFIX)])
    return load_automaton(path, path.stem)


def _write(text_or_bytes, dest: str | None) -> None:
    if dest is None:
        sys.stdout.write(text_or_bytes)
    elif isinstance(text_or_bytes, bytes):
        Path(dest).write_bytes(text_or_bytes)
    else:
        Path(dest).write_text(text_or_bytes, encoding="utf-8", newline="\n")


# -- subcommands -----------------------------------------------------------------

def cmd_generate(args) -> int:
    if args.count < 1:
        raise SystemExit2("--count must be >= 1")

    def make(size, seed):
        cfg = profile_config(args.profile, size, seed=seed)
        if args.scores is not None:
            cfg = replace(cfg, score_distribution=args.scores)
        return cfg

    manifest = generate_corpus(make, args.sizes, args.count, args.out, base_seed=args.seed)
    failed = [m for m in manifest if "error" in m]
    for m in failed:
        log.error("%s: %s", m["path"], m["error"])
    log.info("wrote %d files to %s", len(manifest) - len(failed), args.out)
    return 1 if failed else 0


def cmd_prune(args) -> int:
    if args.theta is None:
        raise SystemExit2("--theta is required")
    rf = RfConfig(n_trees=args.trees, max_depth=args.max_depth, min_leaf=args.min_leaf,
                  sample_fraction=args.sample_fraction, seed=args.seed)
    rf.check()
    cfg = PruneConfig(theta=args.theta, mask=normalize_mask(args.mask), rf=rf,
                      enable_merge=not args.no_merge,
                      enable_reachability=not args.no_reachability,
                      train_fraction=args.train_fraction, cv_folds=args.cv_folds,
                      train_max_samples=args.train_max_samples or None,
                      cv_max_samples=args.cv_max_samples or None,
                      oracle_only=args.oracle_only, shared_model=args.shared_model,
                      record_timing=not args.no_timing)
    if not Path(args.input).is_dir():
        raise SystemExit2(f"--in {args.input} is not a directory")
    result = run_pipeline(args.input, args.out, cfg, jobs=args.jobs)
    for e in result.errors:
        log.error("%s: %s", e["file"], e["error"])
    log.info("pruned %d files (%d errors)", len(result), len(result.errors))
    return 1 if result.errors else 0


def _pairs(original: Path, pruned: Path) -> list[tuple[str, Path, Path]]:
    if original.is_dir() != pruned.is_dir():
        raise SystemExit2("--original and --pruned must both be files or both directories")
    if not original.is_dir():
        return [(original.name, original, pruned)]
    pairs = []
    for path in sorted(original.glob("*.anml")):
        if path.name.endswith(".pruned.anml"):
            continue
        pairs.append((path.name, path, pruned / f"{path.stem}.pruned.anml"))
    return pairs


def cmd_verify(args) -> int:
    if args.theta is None:
        raise SystemExit2("--theta is required")
    trial = TrialConfig(alphabet=args.alphabet, max_len=args.max_len,
                        exhaustive=args.samples is None, samples=args.samples or 0,
                        seed=args.seed, all_offsets=args.all_offsets)
    results, failed = [], False
    for name, a, b in _pairs(Path(args.original), Path(args.pruned)):
        try:
            rep = check_equivalence(_load(a), _load(b), args.theta, trial, delta=args.delta)
            results.append({"file": name, **rep.to_dict()})
            failed |= not rep.ok
        except (OSError, FormatError, ValueError) as exc:
            results.append({"file": name, "error": str(exc)})
            failed = True
    doc = {"theta": args.theta, "trial": {"alphabet": args.alphabet, "max_len": args.max_len,
                                          "exhaustive": trial.exhaustive,
                                          "samples": trial.samples, "seed": args.seed,
                                          "all_offsets": args.all_offsets},
           "results": results}
    _write(json.dumps(doc, indent=2, sort_keys=True) + "\n", args.report)
    return 1 if failed else 0


def cmd_cost(args) -> int:
    nfa = _load(Path(args.input))
    p = cost_profile(args.profile)
    fanouts = args.fanout_sweep or [args.fanout or provisioned_fanout(nfa)]
    rows = fanout_sweep(nfa, fanouts, p, args.input_len)
    for r in rows:
        if r.error:
            log.error("fanout %d: %s", r.fanout, r.error)
    _write(sweep_to_csv(rows), args.out)
    return 1 if any(r.error for r in rows) else 0


def cmd_export(args) -> int:
    src = Path(args.input)
    nfa = _load(src)
    data = export_config_vectors(nfa, args.max_fanout)
    dest = args.out or str(src.with_suffix(".cfg"))
    _write(data, dest)
    log.info("wrote %d bytes to %s", len(data), dest)
    return 0


def cmd_report(args) -> int:
    rows, errors = [], []
    for path in sorted(Path(args.input).glob("*.report.json")):
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
            est, rep = doc["estimate"], doc["report"]
            rows.append({"file": rep["file"], "size": rep["nodes_before"],
                         "transitions_before": rep["transitions_before"],
                         "estimated_kept": est["estimated_kept_transitions"],
                         "actual_kept": rep["classifier_kept"],
                         "transitions_after": rep["transitions_after"],
                         "estimated_ratio": est["estimated_ratio"],
                         "prune_ratio": rep["prune_ratio"],
                         "avg_transitions_before": rep["avg_transitions_before"],
                         "avg_transitions_after": rep["avg_transitions_after"],
                         "nodes_after": rep["nodes_after"],
                         "model_accuracy": rep["model_accuracy"],
                         "wall_time_ms": rep["wall_time_ms"]})
        except (OSError, ValueError, KeyError) as exc:
            errors.append(path.name)
            log.error("%s: %s", path.name, exc)
    _write(summary_csv(rows), args.out)
    return 1 if errors else 0


COMMANDS = {"generate": cmd_generate, "prune": cmd_prune, "verify": cmd_verify,
            "cost": cmd_cost, "export": cmd_export, "report": cmd_report}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    config_path = _load_defaults(parser, argv)
    args = parser.parse_args(argv)
    run = RunConfig(args.command, vars(args), config_path)
    logging.basicConfig(level=logging.WARNING - 10 * min(run.verbosity, 2),
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except SystemExit2 as exc:
        parser.error(str(exc))
    except (OSError, FormatError, FanoutViolation, ValueError) as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
