"""Command line interface.

    localcond infer --method lc --model grid.json --cutset 4,6,8 --out result.json
    localcond gen-grid --rows 3 --cols 3 --out grid.json
    localcond compare a.json b.json --tol 1e-10
    localcond explain --model grid.json --cutset 4,6,8 --out tree.json
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass

import numpy as np

from .conditioning import run_conditioning
from .cutset import MERGE_POLICIES, CutsetError, LoopCutset, build_associated_tree, find_loop_cutset
from .graph import GraphError, build_grid, find_cycles_basis, is_acyclic, is_connected
from .local import RelevantSetError, compute_relevant_sets, run_local_conditioning
from .model import (
    Model,
    ModelError,
    brute_force_marginals,
    ising_model,
    load_model,
    model_to_json,
    random_ising,
)
from .runtime import central_wire_dump, run_distributed, setup_actors
from .treebp import run_bp

log = logging.getLogger("localcond")

METHODS = ("brute", "bp", "conditioning", "lc")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    method: str
    model_path: str
    out_path: str
    cutset: tuple[int, ...] | None = None
    merge_policy: str = "canonical"
    seed: int | None = None
    dump_messages: str | None = None
    runtime: str = "central"

    def validate(self) -> None:
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; choose from {', '.join(METHODS)}")
        if self.merge_policy not in MERGE_POLICIES:
            raise ConfigError(f"unknown merge policy {self.merge_policy!r}")
        if self.runtime not in ("central", "sync", "async"):
            raise ConfigError(f"unknown runtime {self.runtime!r}")
        if self.runtime != "central" and self.method != "lc":
            raise ConfigError("distributed runtimes are only available for method lc")
        if self.dump_messages and self.method not in ("conditioning", "lc"):
            raise ConfigError("--dump-messages needs method conditioning or lc")


def parse_cutset(text: str | None) -> tuple[int, ...] | None:
    if text is None:
        return None
    text = text.strip()
    if not text:
        return ()
    try:
        return tuple(int(x) for x in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"bad cutset {text!r}; expected comma-separated node ids") from exc


def _marginals_json(marginals) -> dict:
    return {str(n): [float(p) for p in marginals[n]] for n in sorted(marginals)}


def _tree_for(model: Model, cfg: RunConfig):
    g = model.graph
    cutset = LoopCutset.of(cfg.cutset) if cfg.cutset is not None else find_loop_cutset(g)
    return build_associated_tree(g, cutset, cfg.merge_policy, cfg.seed)


def _dump(path, t, messages, radix):
    wire = []
    for (a, b), m in sorted(messages.items()):
        u, v = t.original_edge(a, b)
        rows, cols = m.values.shape
        wire.append({"from": u, "to": v, "from_vertex": t.label(a), "to_vertex": t.label(b),
                     "ordering": list(m.ordering.nodes), "rows": rows, "cols": cols,
                     "values": [float(x) for x in m.values.ravel()], "log_scale": float(m.log_scale)})
    with open(path, "w") as fh:
        json.dump({"radix": radix, "messages": wire}, fh, indent=1)


def cli_run(cfg: RunConfig) -> dict:
    """Run one inference job and write its results JSON; returns the results."""
    cfg.validate()
    model = load_model(cfg.model_path)
    g, pots = model.graph, model.potentials
    if not is_connected(g):
        raise GraphError("inference requires a connected graph")
    report: dict = {}
    if cfg.method == "brute":
        marginals = brute_force_marginals(g, pots)
    elif cfg.method == "bp":
        if not is_acyclic(g):
            raise GraphError(f"method bp requires an acyclic graph; found cycle {find_cycles_basis(g)[0]}")
        marginals = run_bp(g, pots).marginals
    else:
        t = _tree_for(model, cfg)
        report["cutset"] = list(t.cutset.nodes)
        report["merge_policy"] = t.policy
        if cfg.method == "conditioning":
            res = run_conditioning(g, pots, t)
            report["columns"] = pots.alphabet_size ** len(t.cutset)
            marginals = res.marginals
            if cfg.dump_messages:
                _dump(cfg.dump_messages, t, res.messages, pots.alphabet_size)
        else:
            res = run_local_conditioning(g, pots, t)
            report.update(res.report)
            marginals = res.marginals
            if cfg.runtime != "central":
                dist = run_distributed(setup_actors(g, pots, t, res.relevant), cfg.runtime, cfg.seed)
                central = central_wire_dump(res, t)
                report["runtime"] = cfg.runtime
                report["rounds"] = dist.rounds
                report["wire_identical"] = all(central[(w.sender, w.receiver)] == w for w in dist.wire)
                marginals = dist.marginals
            if cfg.dump_messages:
                _dump(cfg.dump_messages, t, res.messages, pots.alphabet_size)
    result = {"method": cfg.method, "marginals": _marginals_json(marginals), "report": report}
    with open(cfg.out_path, "w") as fh:
        json.dump(result, fh, indent=1)
    return result


def compare(run_a: dict, run_b: dict, tol: float) -> dict:
    """Max absolute marginal difference per node between two results files."""
    ma, mb = run_a["marginals"], run_b["marginals"]
    if set(ma) != set(mb):
        raise ConfigError(f"node sets differ: {sorted(set(ma) ^ set(mb), key=int)}")
    per_node = {n: float(np.max(np.abs(np.subtract(ma[n], mb[n])))) for n in sorted(ma, key=int)}
    worst = max(per_node.values(), default=0.0)
    return {"max_diff": worst, "per_node": per_node, "tol": tol, "pass": worst <= tol}


def explain(model: Model, cutset, policy: str = "canonical", seed: int | None = None) -> dict:
    g = model.graph
    cut = LoopCutset.of(cutset) if cutset is not None else find_loop_cutset(g)
    t = build_associated_tree(g, cut, policy, seed)
    rs = compute_relevant_sets(t)
    out = t.to_json()
    out["relevant_edges"] = {
        f"{t.label(a)}-{t.label(b)}": sorted(rs.edge_set(a, b)) for a, b in t.tree.sorted_edges()
    }
    out["relevant_nodes"] = {t.label(v): sorted(rs.node[v]) for v in t.tree.sorted_nodes()}
    out["upstream"] = {f"{t.label(a)}->{t.label(b)}": sorted(s) for (a, b), s in sorted(rs.upstream.items())}
    return out


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="localcond", description=__doc__.split("\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    inf = sub.add_parser("infer", help="compute all node marginals")
    inf.add_argument("--method", required=True, choices=METHODS)
    inf.add_argument("--model", required=True)
    inf.add_argument("--cutset", help="comma-separated loop cutset; found greedily if omitted")
    inf.add_argument("--merge-policy", default="canonical", choices=sorted(MERGE_POLICIES))
    inf.add_argument("--seed", type=int)
    inf.add_argument("--runtime", default="central", choices=["central", "sync", "async"],
                     help="run lc centrally or on the simulated distributed runtime")
    inf.add_argument("--dump-messages")
    inf.add_argument("--out", required=True)

    gen = sub.add_parser("gen-grid", help="write an Ising grid model")
    gen.add_argument("--rows", type=int, required=True)
    gen.add_argument("--cols", type=int, required=True)
    gen.add_argument("--ising-seed", type=int,
                     help="random parameters; without it alpha_i = 0.1*i and theta = 0.2")
    gen.add_argument("--out", required=True)

    cmp_ = sub.add_parser("compare", help="compare two results files")
    cmp_.add_argument("a")
    cmp_.add_argument("b")
    cmp_.add_argument("--tol", type=float, default=1e-10)

    ex = sub.add_parser("explain", help="dump associated tree, leaf/non-leaf neighbors and relevant sets")
    ex.add_argument("--model", required=True)
    ex.add_argument("--cutset")
    ex.add_argument("--merge-policy", default="canonical", choices=sorted(MERGE_POLICIES))
    ex.add_argument("--seed", type=int)
    ex.add_argument("--out", required=True)
    return p


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "infer":
            cfg = RunConfig(args.method, args.model, args.out, parse_cutset(args.cutset),
                            args.merge_policy, args.seed, args.dump_messages, args.runtime)
            cli_run(cfg)
        elif args.command == "gen-grid":
            if args.rows < 1 or args.cols < 1:
                raise ConfigError("--rows and --cols must be positive")
            g = build_grid(args.rows, args.cols)
            if args.ising_seed is None:
                model = ising_model(g, {n: 0.1 * n for n in g.nodes}, {e: 0.2 for e in g.edges})
            else:
                model = random_ising(g, np.random.default_rng(args.ising_seed))
            with open(args.out, "w") as fh:
                json.dump(model_to_json(model), fh, indent=1)
        elif args.command == "compare":
            with open(args.a) as fa, open(args.b) as fb:
                report = compare(json.load(fa), json.load(fb), args.tol)
            print(json.dumps(report, indent=1))
            return 0 if report["pass"] else 1
        elif args.command == "explain":
            out = explain(load_model(args.model), parse_cutset(args.cutset), args.merge_policy, args.seed)
            with open(args.out, "w") as fh:
                json.dump(out, fh, indent=1)
    except (ConfigError, ModelError, GraphError, CutsetError, RelevantSetError, OSError) as exc:
        print(f"localcond: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
