"""Command line driver: validate, abstract, plan, sync, strategy, simulate
and the whole pipeline at once."""
from __future__ import annotations

import argparse
import json
import sys
import time
from importlib import resources
from pathlib import Path

from . import SCHEMA_VERSIONS, __version__
from .abstraction import build_robot_ts, team_for
from .buchi import translate
from .env import EnvError, adjacency, load_partition
from .ltl import LTLSyntaxError, parse, to_string
from .planner import TeamRun, Unsatisfiable, search_run
from .sim import Deadlock, HorizonExhausted, RandomTiming, ScheduleTiming, simulate, verify_trace
from .strategy import compile_strategies, export_strategies
from .syncreduce import SyncPlan, build_sync_automaton, find_optimal_sync, find_sync_moments, labels_from_partition

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_UNSAT = 4
EXIT_DEADLOCK = 5
EXIT_HORIZON = 6
EXIT_VERIFY = 7

EXAMPLES = {
    "case-study": ("case_study_env.json", "case_study.ltl", "case_study_run.json"),
    "two-robot": ("two_robot_env.json", "two_robot.ltl", None),
}


class CliError(Exception):
    def __init__(self, code: int, kind: str, message: str, **extra):
        super().__init__(message)
        self.code, self.kind, self.extra = code, kind, extra


def data_path(name: str) -> Path:
    return Path(str(resources.files("mrsync") / "data" / name))


def _dump(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


class Session:
    """Lazily computed pipeline stages shared by the subcommands."""

    def __init__(self, args):
        self.args = args
        self.out_dir = Path(args.out_dir) if args.out_dir else None
        self.artifacts: dict = {}
        ex = EXAMPLES.get(args.example) if args.example else None
        self.env_src = args.env or (data_path(ex[0]) if ex else None)
        if args.formula is not None and args.formula_file is not None:
            raise CliError(EXIT_USAGE, "usage", "give either --formula or --formula-file")
        if args.formula is not None:
            self.formula_src = args.formula
        elif args.formula_file is not None:
            self.formula_src = Path(args.formula_file).read_text(encoding="utf-8")
        elif ex:
            self.formula_src = data_path(ex[1]).read_text(encoding="utf-8")
        else:
            self.formula_src = None
        self.run_src = args.run or (data_path(ex[2]) if ex and ex[2] and getattr(args, "use_example_run", False) else None)
        self._p = self._phi = self._run = self._plan = None

    # inputs ---------------------------------------------------------------

    @property
    def partition(self):
        if self._p is None:
            if self.env_src is None:
                raise CliError(EXIT_USAGE, "usage", "an environment is required (--env or --example)")
            try:
                self._p = load_partition(Path(self.env_src))
            except EnvError as e:
                raise CliError(EXIT_VALIDATION, "validation", str(e), where=_jsonable(e.ident)) from None
            except OSError as e:
                raise CliError(EXIT_VALIDATION, "validation", f"cannot read environment: {e}") from None
        return self._p

    @property
    def phi(self):
        if self._phi is None:
            if self.formula_src is None:
                raise CliError(EXIT_USAGE, "usage", "a formula is required (--formula, --formula-file or --example)")
            try:
                phi = parse(self.formula_src)
            except LTLSyntaxError as e:
                raise CliError(EXIT_VALIDATION, "validation", str(e), position=e.position) from None
            unknown = sorted(phi.props() - self.partition.props)
            if unknown:
                raise CliError(EXIT_VALIDATION, "validation", "formula uses unknown propositions",
                               propositions=unknown)
            self._phi = phi
        return self._phi

    @property
    def labels(self):
        return labels_from_partition(self.partition)

    @property
    def run(self) -> TeamRun:
        if self._run is None:
            if self.run_src is not None:
                try:
                    r = TeamRun.from_json(Path(self.run_src))
                except (OSError, ValueError, KeyError, TypeError) as e:
                    raise CliError(EXIT_VALIDATION, "validation", f"bad run document: {e}") from None
                self._check_run(r)
                self._run = r
            else:
                self._run = self.search()
        return self._run

    def _check_run(self, r: TeamRun):
        p = self.partition
        cells = set(p.cell_ids)
        for t in r.tuples():
            for c in t:
                if c not in cells:
                    raise CliError(EXIT_VALIDATION, "validation", "run references unknown cell", cell=c)
        if p.robots and r.n != len(p.robots):
            raise CliError(EXIT_VALIDATION, "validation", "run and environment disagree on the team size")
        try:
            r.check(team_for(p, list(r.at(1))))
        except ValueError as e:
            raise CliError(EXIT_VALIDATION, "validation", f"run is not a path of the team: {e}") from None

    def search(self) -> TeamRun:
        p = self.partition
        if not p.robots:
            raise CliError(EXIT_VALIDATION, "validation", "environment places no robots")
        phi = self.phi
        t0 = time.perf_counter()
        try:
            r = search_run(team_for(p), translate(phi))
        except Unsatisfiable as e:
            raise CliError(EXIT_UNSAT, "unsatisfiable", str(e)) from None
        self.artifacts["planning_seconds"] = round(time.perf_counter() - t0, 3)
        return r

    @property
    def plan(self) -> SyncPlan:
        if self._plan is None:
            a = self.args
            if getattr(a, "plan_file", None):
                try:
                    self._plan = SyncPlan.from_json(Path(a.plan_file))
                except (OSError, ValueError, KeyError, TypeError) as e:
                    raise CliError(EXIT_VALIDATION, "validation", f"bad sync plan document: {e}") from None
                if any(s > self.run.l for s in self._plan.moments):
                    raise CliError(EXIT_VALIDATION, "validation", "sync plan refers beyond the run")
            else:
                phi, r = self.phi, self.run
                if a.optimal:
                    try:
                        res = find_optimal_sync(phi, r, self.labels, paper_faithful=a.paper_faithful)
                    except ValueError as e:
                        raise CliError(EXIT_USAGE, "usage", str(e)) from None
                else:
                    res = find_sync_moments(phi, r, self.labels, paper_faithful=a.paper_faithful,
                                            strict_pseudocode=a.strict_pseudocode)
                self.artifacts["feasibility_calls"] = res.calls
                self.artifacts["sync_seconds"] = round(res.seconds, 3)
                self._plan = res.plan
        return self._plan

    # outputs ---------------------------------------------------------------

    def write(self, name: str, text: str):
        if self.out_dir is None:
            return
        self.out_dir.mkdir(parents=True, exist_ok=True)
        (self.out_dir / name).write_text(text, encoding="utf-8")
        self.artifacts.setdefault("files", []).append(name)


def _jsonable(x):
    if isinstance(x, (str, int, float, type(None))):
        return x
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return str(x)


# subcommands -------------------------------------------------------------------

def cmd_validate(s: Session) -> dict:
    p = s.partition
    adj = adjacency(p)
    out = {
        "cells": len(p.cell_ids),
        "adjacent_pairs": sum(len(v) for v in adj.values()) // 2,
        "regions": {k: sorted(v) for k, v in sorted(p.regions.items())},
        "robots": p.initial_cells() if p.robots else [],
    }
    if s.formula_src is not None:
        out["formula"] = to_string(s.phi)
    return out


def cmd_abstract(s: Session) -> dict:
    p = s.partition
    adj = adjacency(p)
    starts = p.initial_cells() if p.robots else [p.cell_ids[0]]
    systems = [build_robot_ts(p, adj, c) for c in starts]
    doc = {
        "cells": p.cell_ids,
        "adjacency": {c: sorted(adj[c]) for c in p.cell_ids},
        "observations": {c: p.region_of(c) for c in p.cell_ids},
        "initial": starts,
        "team_states": len(p.cell_ids) ** len(systems),
    }
    s.write("abstraction.json", _dump(doc))
    if s.args.emit_dot:
        s.write("robot_ts.dot", systems[0].to_dot("T"))
    return {"cells": len(p.cell_ids), "robots": len(systems), "team_states": doc["team_states"]}


def cmd_plan(s: Session) -> dict:
    r = s.run
    s.write("run.json", _dump(r.to_json()))
    if s.args.emit_dot and s.formula_src is not None:
        s.write("buchi.dot", translate(s.phi).to_dot("B"))
    return {"run": r.to_json(), "cost": r.cost(), "k": r.k, "l": r.l}


def cmd_sync(s: Session) -> dict:
    r, plan = s.run, s.plan
    s.write("run.json", _dump(r.to_json()))
    s.write("sync_plan.json", _dump(plan.to_json()))
    if s.args.emit_dot:
        s.write("sync_automaton.dot", build_sync_automaton(r, plan, s.labels).to_dot())
    return {"plan": plan.to_json(), "run": r.to_json()}


def cmd_strategy(s: Session) -> dict:
    out = cmd_sync(s)
    docs = export_strategies(s.run, s.plan)
    s.write("strategies.json", _dump(docs))
    out["strategies"] = docs
    return out


def cmd_simulate(s: Session) -> dict:
    out = cmd_sync(s)
    a = s.args
    s.write("strategies.json", _dump(export_strategies(s.run, s.plan)))
    if a.schedule:
        try:
            timing = ScheduleTiming.from_json(json.loads(Path(a.schedule).read_text(encoding="utf-8")))
        except (OSError, ValueError, KeyError, TypeError, AttributeError) as e:
            raise CliError(EXIT_VALIDATION, "validation", f"bad schedule document: {e}") from None
    else:
        timing = RandomTiming(a.seed)
    try:
        trace = simulate(compile_strategies(s.run, s.plan), s.labels, timing, horizon=a.horizon)
    except Deadlock as e:
        raise CliError(EXIT_DEADLOCK, "deadlock", str(e),
                       waiting={str(k): list(v) for k, v in e.waiting.items()}) from None
    except HorizonExhausted as e:
        raise CliError(EXIT_HORIZON, "horizon", str(e)) from None
    s.write("trace.jsonl", trace.to_jsonl())
    summary = trace.summary(s.phi)
    s.write("summary.json", _dump(summary))
    out["summary"] = summary
    if not summary["verdict"]:
        raise CliError(EXIT_VERIFY, "verification", "simulated trace violates the formula", summary=summary)
    return out


def cmd_pipeline(s: Session) -> dict:
    cmd_validate(s)
    if s.args.emit_dot:
        cmd_abstract(s)
    return cmd_simulate(s)


COMMANDS = {
    "validate": cmd_validate,
    "abstract": cmd_abstract,
    "plan": cmd_plan,
    "sync": cmd_sync,
    "strategy": cmd_strategy,
    "simulate": cmd_simulate,
    "pipeline": cmd_pipeline,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(EXIT_USAGE, "usage", message)


def _seed(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError("seed must be an integer") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return v


def _positive(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError("expected a positive integer") from None
    if v < 1:
        raise argparse.ArgumentTypeError("expected a positive integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--env", help="environment JSON")
    common.add_argument("--example", choices=sorted(EXAMPLES), help="use a bundled fixture")
    common.add_argument("--formula", help="LTL formula text")
    common.add_argument("--formula-file", help="file holding the LTL formula")
    common.add_argument("--run", help="team run JSON to use instead of planning")
    common.add_argument("--example-run", dest="use_example_run", action="store_true",
                        help="with --example case-study, use the bundled run instead of planning")
    common.add_argument("--plan-file", help="sync plan JSON to use instead of reducing")
    common.add_argument("--schedule", help="pinned traversal durations for simulation")
    common.add_argument("--seed", type=_seed, default=0)
    common.add_argument("--horizon", type=_positive, default=20, help="suffix iterations to simulate")
    common.add_argument("--paper-faithful", action="store_true")
    common.add_argument("--optimal", action="store_true", help="exhaustive minimum-cost sync plan")
    common.add_argument("--strict-pseudocode", action="store_true")
    common.add_argument("--emit-dot", action="store_true")
    common.add_argument("--out-dir", help="directory for artifacts")
    parser = _Parser(prog="mrsync", description=__doc__)
    parser.add_argument("--version", action="store_true", help="print tool and schema versions")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.version:
            sys.stdout.write(_dump({"version": __version__, "schemas": SCHEMA_VERSIONS}))
            return EXIT_OK
        if not args.command:
            raise CliError(EXIT_USAGE, "usage", "a subcommand is required")
        s = Session(args)
        out = COMMANDS[args.command](s)
        out.update({k: v for k, v in s.artifacts.items() if k != "files"})
        if "files" in s.artifacts:
            out["files"] = sorted(set(s.artifacts["files"]))
        sys.stdout.write(_dump(out))
        return EXIT_OK
    except CliError as e:
        err = {"error": e.kind, "message": str(e), "exit_code": e.code}
        err.update(e.extra)
        sys.stderr.write(json.dumps(err, sort_keys=True) + "\n")
        return e.code
    except Exception as e:  # noqa: BLE001
        sys.stderr.write(json.dumps({"error": "internal", "message": f"{type(e).__name__}: {e}",
                                     "exit_code": EXIT_ERROR}, sort_keys=True) + "\n")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
