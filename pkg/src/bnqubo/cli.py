"""Command-line driver: ``bnqubo <command> [--config FILE] [flags]``.

Every flag can also be set in a ``key = value`` config file; flags win.
Outputs go to the ``output`` directory.  Only ``run.log`` carries
timestamps, so reruns with the same config and seed give byte-identical
artifacts.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .anneal import SampleSet, default_schedules, run_campaign, solve_exhaustive
from .dag import Dag, arc_nodes, format_arcs, parse_arcs
from .data import (
    discretize_hartemink,
    forward_sample,
    load_csv,
    random_cpts,
    read_dataset,
    tabulate_counts,
    write_dataset,
)
from .decode import campaign_report, metrics, raf_reference, to_dot
from .oracle import exact_learn, relative_gap
from .qubo import PenaltyConfig, assemble, read_qubo, write_legend, write_qubo
from .score import PriorScheme, network_score, parent_sets, read_score_table, score_table, write_score_table

log = logging.getLogger("bnqubo")

# bundled demo: 5000 rows from the 8-node signalling network
DEMO_ROWS = 5000
DEMO_CONCENTRATION = 0.5
DEMO_DATA_SEED = 0


class UsageError(Exception):
    """Bad flag, config key or path (exit code 2)."""


class QualityError(Exception):
    """``require_optimal`` was set and the optimum was not certified (exit code 1)."""


def _bool(text: str) -> bool:
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass(frozen=True)
class Option:
    type: type
    default: object
    help: str
    commands: frozenset


_ALL = frozenset({"discretize", "score", "build", "solve", "pipeline", "eval"})


def _opt(type_, default, help_, *commands):
    return Option(type_, default, help_, frozenset(commands) if commands else _ALL)


OPTIONS: dict[str, Option] = {
    "input": _opt(str, None, "input CSV", "discretize", "score", "pipeline"),
    "output": _opt(str, ".", "output directory"),
    "levels": _opt(int, 3, "discretization levels", "discretize", "pipeline"),
    "initial_bins": _opt(int, 12, "quantile bins before merging", "discretize", "pipeline"),
    "passthrough": _opt(_bool, False, "input is already discrete", "discretize", "pipeline"),
    "m_max": _opt(int, 3, "largest parent set scored", "score", "build", "pipeline", "eval"),
    "prior": _opt(str, "K2", "K2 or BDeu", "score", "pipeline"),
    "ess": _opt(float, 1.0, "BDeu equivalent sample size", "score", "pipeline"),
    "counts": _opt(_bool, False, "also write every count table as counts.tsv", "score"),
    "caps": _opt(str, None, "per-node parent caps, comma-separated (overrides m_max)", "build", "pipeline"),
    "scores": _opt(str, None, "score-table TSV", "build", "solve", "eval"),
    "penalties": _opt(str, "auto", "auto, uniform, or four numbers max,trans,consist,reduction", "build", "pipeline"),
    "qubo": _opt(str, None, "QUBO file", "solve"),
    "schedules": _opt(int, 30, "number of annealing schedules", "solve", "pipeline"),
    "min_sweeps": _opt(int, 1000, "sweeps of the shortest schedule", "solve", "pipeline"),
    "max_sweeps": _opt(int, 10000, "sweeps of the longest schedule", "solve", "pipeline"),
    "reads": _opt(int, 300, "reads per schedule", "solve", "pipeline"),
    "gauges": _opt(int, 4, "gauges per schedule (first is the identity)", "solve", "pipeline"),
    "seed": _opt(int, None, "run seed (required for solving)", "solve", "pipeline"),
    "exhaustive": _opt(_bool, False, "enumerate every assignment instead of annealing", "solve", "pipeline"),
    "require_optimal": _opt(_bool, False, "exit 1 unless the oracle optimum is reached", "solve", "pipeline"),
    "reference": _opt(str, None, "reference arc list for metrics", "solve", "pipeline", "eval"),
    "dag": _opt(str, None, "arc list to evaluate", "eval"),
    "demo": _opt(_bool, False, "use the bundled synthetic demo data", "pipeline"),
    "threads": _opt(int, 1, "worker threads"),
    "backend": _opt(str, None, "kernel backend: compiled or python", "solve", "pipeline"),
}

_PATH_KEYS = ("input", "scores", "qubo", "reference", "dag")


# ------------------------------------------------------------------ config


def read_config(path: Path) -> dict[str, str]:
    if not path.is_file():
        raise UsageError(f"config file not found: {path}")
    out = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in OPTIONS:
            raise UsageError(f"{path}:{lineno}: unknown config key '{key}'")
        out[key] = value
    return out


def resolve(command: str, flags: dict, config: dict[str, str]) -> dict:
    """Merge defaults, config values and flags, then check types and paths."""
    cfg = {}
    for key, opt in OPTIONS.items():
        if command not in opt.commands:
            continue
        value = flags.get(key)
        if value is None and key in config:
            try:
                value = opt.type(config[key])
            except ValueError:
                raise UsageError(f"config key '{key}': bad value {config[key]!r}") from None
        cfg[key] = opt.default if value is None else value
    for key in _PATH_KEYS:
        if cfg.get(key) is not None and not Path(cfg[key]).exists():
            raise UsageError(f"{key}: path does not exist: {cfg[key]}")
    for key in ("levels", "initial_bins", "m_max", "schedules", "min_sweeps", "max_sweeps", "reads", "gauges", "threads"):
        if key in cfg and cfg[key] < 1:
            raise UsageError(f"{key} must be positive, got {cfg[key]}")
    return cfg


def _require(cfg: dict, *keys: str) -> None:
    for key in keys:
        if cfg.get(key) is None:
            raise UsageError(f"missing required setting '{key}'")


def _prior(cfg) -> PriorScheme:
    kind = cfg["prior"]
    if kind not in ("K2", "BDeu"):
        raise UsageError(f"prior: expected K2 or BDeu, got {kind!r}")
    return PriorScheme(kind, cfg["ess"])


def _penalties(text: str):
    if text in ("auto", "uniform"):
        return text
    parts = text.split(",")
    try:
        values = [float(p) for p in parts]
    except ValueError:
        values = []
    if len(values) != 4 or min(values) <= 0:
        raise UsageError(f"penalties: expected auto, uniform or four positive numbers, got {text!r}")
    return PenaltyConfig(*values)


# ---------------------------------------------------------------- commands


def _write(path: Path, text: str) -> Path:
    path.write_text(text)
    log.info("wrote %s", path)
    return path


def _sidecar(path: Path) -> Path:
    return path.with_suffix(".card")


def _read_input_dataset(path: Path, passthrough: bool, cfg):
    text = path.read_text()
    try:
        if passthrough:
            card = _sidecar(path)
            return read_dataset(text, card.read_text() if card.is_file() else None)
        return discretize_hartemink(load_csv(text), cfg["levels"], cfg["initial_bins"])
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None


def cmd_discretize(cfg, out: Path) -> Path:
    _require(cfg, "input")
    ds = _read_input_dataset(Path(cfg["input"]), cfg["passthrough"], cfg)
    csv_text, card = write_dataset(ds)
    target = _write(out / "dataset.csv", csv_text)
    _write(_sidecar(target), card)
    log.info("dataset: %d rows, %d variables, cardinalities %s", ds.n_rows, ds.n, ds.cardinalities)
    return target


def cmd_score(cfg, out: Path) -> Path:
    _require(cfg, "input")
    path = Path(cfg["input"])
    card = _sidecar(path)
    try:
        ds = read_dataset(path.read_text(), card.read_text() if card.is_file() else None)
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None
    table = score_table(ds, cfg["m_max"], _prior(cfg), threads=cfg["threads"])
    log.info("scored %d parent sets", len(table))
    if cfg.get("counts"):
        _write(out / "counts.tsv", _counts_text(ds, cfg["m_max"]))
    return _write(out / "scores.tsv", write_score_table(table))


def _counts_text(ds, m_max: int) -> str:
    lines = ["child\tparents\tj\tk\tcount"]
    for i in range(ds.n):
        for ps in parent_sets(ds.n, i, m_max):
            parents = ",".join(ds.names[p] for p in ps)
            n_ijk = tabulate_counts(ds, i, ps).n_ijk
            for j, k in zip(*np.nonzero(n_ijk)):
                lines.append(f"{ds.names[i]}\t{parents}\t{j}\t{k}\t{n_ijk[j, k]}")
    return "\n".join(lines) + "\n"


def _load_table(path: Path):
    try:
        return read_score_table(path.read_text())
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None


def cmd_build(cfg, out: Path) -> Path:
    _require(cfg, "scores")
    table = _load_table(Path(cfg["scores"]))
    m = _caps(cfg, table)
    try:
        q = assemble(table, m, _penalties(cfg["penalties"]))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    log.info("QUBO: %d variables, %d terms", q.size, q.n_terms())
    _write(out / "legend.tsv", write_legend(q.registry))
    return _write(out / "qubo.txt", write_qubo(q))


def _caps(cfg, table):
    if not cfg.get("caps"):
        return min(cfg["m_max"], table.m_max)
    try:
        caps = tuple(int(v) for v in cfg["caps"].split(","))
    except ValueError:
        caps = ()
    if len(caps) != table.n or min(caps) < 1:
        raise UsageError(f"caps: expected {table.n} positive integers, got {cfg['caps']!r}")
    return caps


def _pack(x) -> str:
    return np.packbits(np.asarray(x, dtype=np.uint8), bitorder="little").tobytes().hex()


def _results_text(sets: list[SampleSet]) -> str:
    lines = ["# schedule\tgauge\tenergy\toccurrences\tassignment (hex, variable k is bit k%8 of byte k//8)"]
    for s, ss in enumerate(sets):
        for x, e, occ, tag in ss.records():
            lines.append(f"{s}\t{tag}\t{e:.12g}\t{occ}\t{_pack(x)}")
    return "\n".join(lines) + "\n"


def _summary_text(sets, schedules, report) -> str:
    lines = ["schedule\tsweeps\tbeta_hot\tbeta_cold\treads\tdistinct\tbest_energy\treads_at_best\tacyclic"]
    for s, ss in enumerate(sets):
        row = report.rows[s]
        if schedules is None:
            sched = ("", "", "")
        else:
            sc = schedules[s]
            sched = (str(sc.sweeps), f"{sc.beta_hot:.6g}", f"{sc.beta_cold:.6g}")
        lines.append(
            "\t".join(
                [str(s), *sched, str(ss.num_reads), str(len(ss)), f"{row.energy:.12g}", str(row.reads_at_best),
                 "0" if row.diagnostics.has_cycle else "1"]
            )
        )
    return "\n".join(lines) + "\n"


def _load_reference(path, names) -> Dag:
    try:
        return parse_arcs(Path(path).read_text(), names)
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None


def cmd_solve(cfg, out: Path) -> dict:
    _require(cfg, "qubo")
    if not cfg["exhaustive"]:
        _require(cfg, "seed")
    if cfg["require_optimal"] and cfg.get("scores") is None:
        raise UsageError("require_optimal needs a score table ('scores')")
    path = Path(cfg["qubo"])
    try:
        q = read_qubo(path.read_text())
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None
    reg = q.registry
    table = _load_table(Path(cfg["scores"])) if cfg.get("scores") else None
    if table is not None and table.names != reg.names:
        raise UsageError("score table and QUBO have different node names")
    reference = _load_reference(cfg["reference"], reg.names) if cfg.get("reference") else None

    if cfg["exhaustive"]:
        log.info("exhaustive enumeration of %d variables", q.size)
        sets = [solve_exhaustive(q, 16, backend=cfg["backend"])]
        schedules = None
    else:
        schedules = default_schedules(q, cfg["schedules"], cfg["min_sweeps"], cfg["max_sweeps"])
        log.info(
            "annealing: %d schedules x %d reads, %d gauges, seed %d",
            len(schedules), cfg["reads"], cfg["gauges"], cfg["seed"],
        )
        try:
            sets = run_campaign(
                q, schedules, cfg["reads"], cfg["gauges"], cfg["seed"],
                backend=cfg["backend"], threads=cfg["threads"],
            )
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    report = campaign_report(sets, q, reference, schedules, table)

    # best annealed graph: the valid per-schedule decode with the lowest score,
    # or the lowest energy when no score table is available
    valid = [r for r in report.rows if not r.diagnostics.has_cycle and not r.diagnostics.cap_violations]
    best = None
    if valid:
        best = min(valid, key=lambda r: (r.score, r.energy, r.schedule) if table is not None else (r.energy, r.schedule))
    report.extra["valid decodes"] = f"{len(valid)}/{len(report.rows)}"
    status = {"certified": False, "gap": None, "best": best}
    if table is not None:
        opt_dag, optimum = exact_learn(table, max(reg.m))
        report.extra["oracle optimum"] = f"{optimum:.12g}"
        if best is not None:
            gap = relative_gap(table, best.score, optimum)
            status["gap"] = gap
            report.extra["best annealed score"] = f"{best.score:.12g}"
            report.extra["score gap"] = f"{100 * gap:.3f}%"
            status["certified"] = best.score == optimum
            if cfg["exhaustive"]:
                report.extra["status"] = "certified optimal" if status["certified"] else "NOT optimal"
            else:
                report.extra["status"] = "oracle optimum reached" if status["certified"] else "above oracle optimum"
        else:
            report.extra["status"] = "no valid decode"
        _write(out / "oracle.dot", to_dot(opt_dag, "oracle"))
    if best is not None:
        report.extra["best schedule"] = str(best.schedule)
        if reference is not None:
            m = best.metrics
            report.extra["best tp/fp/fn"] = f"{m.true_positives}/{m.false_positives}/{m.false_negatives}"
        _write(out / "best.dot", to_dot(best.candidate.graph, "best"))
        _write(out / "best.arcs", format_arcs(best.candidate.graph))

    _write(out / "results.txt", _results_text(sets))
    _write(out / "summary.tsv", _summary_text(sets, schedules, report))
    _write(out / "report.tsv", report.to_tsv())
    _write(out / "report.txt", report.to_text())
    sys.stdout.write(report.to_text())
    status["report"] = report
    if cfg["require_optimal"] and not status["certified"]:
        raise QualityError("best decode does not reach the oracle optimum")
    return status


def demo_dataset():
    ref = raf_reference()
    cpts = random_cpts(ref, [3] * ref.n, DEMO_CONCENTRATION, DEMO_DATA_SEED)
    return forward_sample(ref, cpts, DEMO_ROWS, DEMO_DATA_SEED), ref


def cmd_pipeline(cfg, out: Path) -> dict:
    if not cfg["exhaustive"]:
        _require(cfg, "seed")
    if cfg["demo"]:
        ds, ref = demo_dataset()
        csv_text, card = write_dataset(ds)
        data_path = _write(out / "dataset.csv", csv_text)
        _write(_sidecar(data_path), card)
        ref_path = _write(out / "reference.arcs", format_arcs(ref))
        if cfg.get("reference") is None:
            cfg = {**cfg, "reference": str(ref_path)}
    else:
        _require(cfg, "input")
        data_path = cmd_discretize(cfg, out)
    scores = cmd_score({**cfg, "input": str(data_path)}, out)
    qubo = cmd_build({**cfg, "scores": str(scores)}, out)
    return cmd_solve({**cfg, "scores": str(scores), "qubo": str(qubo)}, out)


def cmd_eval(cfg, out: Path) -> str:
    _require(cfg, "dag")
    names = None
    table = None
    if cfg.get("scores"):
        table = _load_table(Path(cfg["scores"]))
        names = table.names
    elif cfg.get("reference"):
        names = _arc_names(Path(cfg["reference"]), Path(cfg["dag"]))
    else:
        names = _arc_names(Path(cfg["dag"]))
    dag = _load_reference(cfg["dag"], names)
    lines = [f"arcs\t{len(dag.arcs)}", f"acyclic\t{int(not dag.has_cycle())}"]
    lines.append(f"max in-degree\t{max(dag.indegrees(), default=0)}")
    if table is not None:
        if dag.has_cycle() or max(dag.indegrees(), default=0) > table.m_max:
            lines.append("score\tundefined")
        else:
            score = network_score(table, dag)
            _, optimum = exact_learn(table, min(cfg["m_max"], table.m_max))
            lines.append(f"score\t{score:.12g}")
            lines.append(f"oracle optimum\t{optimum:.12g}")
            lines.append(f"score gap\t{100 * relative_gap(table, score, optimum):.3f}%")
    if cfg.get("reference"):
        m = metrics(dag, _load_reference(cfg["reference"], names))
        lines += [f"true positives\t{m.true_positives}", f"false positives\t{m.false_positives}",
                  f"false negatives\t{m.false_negatives}"]
    text = "\n".join(lines) + "\n"
    _write(out / "eval.tsv", text)
    sys.stdout.write(text)
    return text


def _arc_names(*paths: Path) -> tuple[str, ...]:
    seen: dict[str, None] = {}
    for p in paths:
        for name in arc_nodes(p.read_text()):
            seen.setdefault(name, None)
    return tuple(sorted(seen))


COMMANDS = {
    "discretize": cmd_discretize,
    "score": cmd_score,
    "build": cmd_build,
    "solve": cmd_solve,
    "pipeline": cmd_pipeline,
    "eval": cmd_eval,
}


# ------------------------------------------------------------------- entry


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bnqubo", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="key = value settings file")
        for key, opt in OPTIONS.items():
            if name not in opt.commands:
                continue
            flag = "--" + key.replace("_", "-")
            if opt.type is _bool:
                p.add_argument(flag, dest=key, action="store_const", const=True, default=None, help=opt.help)
            else:
                p.add_argument(flag, dest=key, type=opt.type, default=None, help=opt.help)
    return parser


def _setup_logging(out: Path) -> logging.Handler:
    handler = logging.FileHandler(out / "run.log")
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(message)s"))
    log.addHandler(handler)
    log.setLevel(logging.INFO)
    return handler


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    flags = vars(args)
    handler = None
    try:
        config = read_config(Path(args.config)) if args.config else {}
        cfg = resolve(args.command, flags, config)
        out = Path(cfg["output"])
        out.mkdir(parents=True, exist_ok=True)
        handler = _setup_logging(out)
        log.info("bnqubo %s %s", args.command, " ".join(f"{k}={v}" for k, v in sorted(cfg.items())))
        COMMANDS[args.command](cfg, out)
    except UsageError as exc:
        print(f"bnqubo: error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"bnqubo: error: file not found: {exc.filename}", file=sys.stderr)
        return 2
    except QualityError as exc:
        log.error("%s", exc)
        print(f"bnqubo: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        log.error("%s", exc)
        print(f"bnqubo: error: {exc}", file=sys.stderr)
        return 2
    finally:
        if handler is not None:
            log.removeHandler(handler)
            handler.close()
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
