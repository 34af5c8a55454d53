"""Command line front end.

Every subcommand reads a JSON config, writes its artifacts plus a run
manifest into the output directory, and returns a conventional exit
code: 0 on success, 1 for config errors (the message names the offending
field), 2 when a numeric estimate failed to converge (artifacts are still
written), 3 for internal faults.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
import traceback
from pathlib import Path

from .cache import DiskCache, load_word_entries, save_word_entries
from .convexity import convergence_experiment
from .fock import BasisSizeError
from .graphs import (
    GraphSpecError,
    WeightedPointedGraph,
    affine_d,
    build_graph,
    d_infty,
    directed_double,
    dynkin_a,
    dynkin_a_infty,
    loop_bouquet,
    simplicity_check,
)
from .lipnorms import (
    SelfAdjointChart,
    commutator_norm,
    haagerup_sweep,
    minkowski_oracle,
    tail_decompose,
)
from .loops import (
    AlgebraElement,
    GnsWorkspace,
    element_from_json,
    element_to_json,
    enumerate_loops,
    l2_norm,
    random_homogeneous,
)
from .reports import svg_line_plot, write_csv, write_json, write_manifest
from .temperley import (
    TLElement,
    NcPairing,
    commutator_band_identity,
    enumerate_pairings,
    laplace_number_residual,
    star_product,
    theta_sum,
    tl_trace,
)


class ConfigError(ValueError):
    pass


class NumericNonConvergence(RuntimeError):
    pass


def _load_config(path: str | None) -> tuple[dict, str]:
    if path is None:
        raise ConfigError("missing required --config PATH")
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config: no such file {path!r}")
    text = p.read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"config: invalid JSON ({e})") from None
    if not isinstance(doc, dict):
        raise ConfigError("config: top level must be an object")
    return doc, text


def _field(cfg: dict, name: str, kind, default=None, required: bool = False):
    if name not in cfg:
        if required:
            raise ConfigError(f"config field {name!r} is required")
        return default
    val = cfg[name]
    if kind is float and isinstance(val, int):
        val = float(val)
    if kind is not None and not isinstance(val, kind):
        raise ConfigError(f"config field {name!r}: expected {kind.__name__}, "
                          f"got {type(val).__name__}")
    return val


_FAMILIES = {
    "dynkin_a": (dynkin_a, ("n",)),
    "dynkin_a_infty": (dynkin_a_infty, ("cutoff", "q")),
    "affine_d": (affine_d, ("n",)),
    "d_infty": (d_infty, ("cutoff",)),
    "loop_bouquet": (loop_bouquet, ("n_loops",)),
}


def graph_from_config(doc, where: str = "graph") -> WeightedPointedGraph:
    if not isinstance(doc, dict):
        raise ConfigError(f"config field {where!r}: expected an object")
    if "family" in doc:
        fam = doc["family"]
        if fam not in _FAMILIES:
            raise ConfigError(f"{where}.family: unknown family {fam!r} "
                              f"(choose from {sorted(_FAMILIES)})")
        ctor, params = _FAMILIES[fam]
        kwargs = {}
        for p in params:
            if p in doc:
                kwargs[p] = doc[p]
        try:
            return ctor(**kwargs)
        except TypeError as e:
            raise ConfigError(f"{where}: bad parameters for {fam}: {e}") from None
        except GraphSpecError as e:
            raise ConfigError(f"{where}: {e}") from None
    try:
        return build_graph(doc)
    except GraphSpecError as e:
        raise ConfigError(f"{where}: {e}") from None


def _element_from_config(cfg: dict, ws: GnsWorkspace, seed: int) -> AlgebraElement:
    """Either an explicit loop->coefficient map or a random recipe."""
    spec = cfg.get("element")
    if spec is None:
        raise ConfigError("config field 'element' is required "
                          "(a loop->[re,im] map or {\"random\": {...}})")
    if isinstance(spec, dict) and "random" in spec:
        rnd = spec["random"]
        degrees = rnd.get("degrees")
        if not isinstance(degrees, list) or not degrees:
            raise ConfigError("element.random.degrees: need a nonempty list")
        a = AlgebraElement(ws.double, {})
        for k in degrees:
            try:
                a = a + random_homogeneous(ws, int(k), int(rnd.get("seed", seed)))
            except ValueError as e:
                raise ConfigError(f"element.random.degrees: {e}") from None
        if rnd.get("selfadjoint"):
            a = a + a.star()
        return a.scaled(1.0 / l2_norm(a))
    if isinstance(spec, dict):
        try:
            return element_from_json(ws.double, spec)
        except (ValueError, IndexError) as e:
            raise ConfigError(f"element: {e}") from None
    raise ConfigError("element: expected an object")


# -- subcommand handlers -----------------------------------------------------------

def cmd_graph_validate(cfg, args, out: Path) -> tuple[int, dict]:
    g = graph_from_config(cfg.get("graph"), "graph")
    rep = simplicity_check(g)
    doc = {
        "name": g.name,
        "hash": g.graph_hash(),
        "canonical": json.loads(g.canonical_json()),
        "simplicity": [{"vertex": r.vertex, "weight": r.weight,
                        "neighbor_sum": r.neighbor_sum, "holds": r.holds}
                       for r in rep.rows],
        "simple": rep.holds,
    }
    write_json(out / "graph_report.json", doc)
    status = "ok" if rep.holds else "ok (weight inequality fails at some vertex)"
    print(f"graph {g.name or g.basepoint}: {g.n_vertices} vertices, "
          f"{len(g.edges)} edges, {status}")
    return 0, {"graph_report": "graph_report.json"}


def cmd_loops_enumerate(cfg, args, out: Path) -> tuple[int, dict]:
    g = graph_from_config(cfg.get("graph"), "graph")
    cutoff = _field(cfg, "cutoff", int, required=True)
    dd = directed_double(g)
    basis = enumerate_loops(dd, cutoff)
    rows = [(i, len(p) - 1, "|".join(str(e) for e in p[1:]))
            for i, p in enumerate(basis.elements)]
    write_csv(out / "loops.csv", ["index", "length", "edges"], rows)
    counts = {str(d): basis.degree_count(d) for d in range(cutoff + 1)}
    write_json(out / "loop_counts.json", counts)
    print(f"{len(basis)} loops up to length {cutoff}")
    return 0, {"loops": "loops.csv", "counts": "loop_counts.json"}


def cmd_wick_build(cfg, args, out: Path, cache: DiskCache) -> tuple[int, dict]:
    g = graph_from_config(cfg.get("graph"), "graph")
    cutoff = _field(cfg, "cutoff", int, required=True)
    max_degree = _field(cfg, "max_degree", int, default=min(4, cutoff))
    dd = directed_double(g)
    ws = GnsWorkspace(dd, cutoff)
    loaded = load_word_entries(cache, ws, g.graph_hash(), max_degree)
    summary = {}
    for loop in ws.basis.elements:
        if len(loop) - 1 > max_degree:
            continue
        r, _, _ = ws.word_entries(loop)
        summary[",".join(str(e) for e in loop[1:])] = int(r.size)
    if not loaded:
        save_word_entries(cache, ws, g.graph_hash(), max_degree)
    # no cache marker in the artifact: warm and cold runs must match bytewise
    write_json(out / "wick_summary.json",
               {"graph": g.graph_hash(), "cutoff": cutoff, "max_degree": max_degree,
                "nnz_per_word": summary})
    print(f"{len(summary)} words realized at cutoff {cutoff}"
          + (" (from cache)" if loaded else ""))
    return 0, {"wick_summary": "wick_summary.json"}


def cmd_lip_compute(cfg, args, out: Path) -> tuple[int, dict]:
    g = graph_from_config(cfg.get("graph"), "graph")
    cutoff = _field(cfg, "cutoff", int, required=True)
    rel_tol = _field(cfg, "rel_tol", float, default=1e-6)
    ws = GnsWorkspace(directed_double(g), cutoff)
    a = _element_from_config(cfg, ws, args.seed)
    est = commutator_norm(a, cutoff, rel_tol=rel_tol, workspace=ws)
    per_degree = {}
    adjusted = 0.0
    all_converged = est.converged
    for k in a.degrees():
        if k == 0:
            continue
        ek = commutator_norm(a.homogeneous_component(k), cutoff,
                             rel_tol=rel_tol, workspace=ws)
        per_degree[str(k)] = {"value": ek.value, "converged": ek.converged,
                              "trace": [[c, v] for c, v in ek.trace]}
        adjusted += ek.value
        all_converged = all_converged and ek.converged
    doc = {
        "element": element_to_json(a),
        "cutoff": cutoff,
        "rel_tol": rel_tol,
        "commutator": {"value": est.value, "converged": est.converged,
                       "trace": [[c, v] for c, v in est.trace]},
        "adjusted": {"value": adjusted, "per_degree": per_degree},
    }
    if cfg.get("oracle"):
        mk = minkowski_oracle(a, ws, samples=int(cfg.get("oracle_samples", 32)),
                              seed=args.seed)
        doc["oracle"] = {"value": mk.value, "feasible": mk.feasible,
                         "points": mk.n_points}
    write_json(out / "lip_estimate.json", doc)
    print(f"commutator seminorm {est.value:.12g} "
          f"({'converged' if est.converged else 'NOT converged'}), "
          f"adjusted {adjusted:.12g}")
    if not all_converged:
        raise NumericNonConvergence("seminorm sweep did not converge; "
                                    "see lip_estimate.json")
    return 0, {"lip_estimate": "lip_estimate.json"}


def cmd_haagerup_sweep(cfg, args, out: Path) -> tuple[int, dict]:
    g = graph_from_config(cfg.get("graph"), "graph")
    degrees = _field(cfg, "degrees", list, default=[1, 2, 3, 4])
    count = _field(cfg, "count", int, default=8)
    m_max = _field(cfg, "m_max", int, default=8)
    n_max = _field(cfg, "n_max", int, default=8)
    kmax = max(int(k) for k in degrees)
    ws = GnsWorkspace(directed_double(g), n_max + kmax)
    present = {len(p) - 1 for p in ws.basis.elements}
    rows = []
    all_ok = True
    jobs = []
    for k in degrees:
        if int(k) not in present:
            continue
        for i in range(count):
            jobs.append((int(k), i))

    def run(job):
        k, i = job
        x = random_homogeneous(ws, k, args.seed, index=i)
        return [(i, k, r.m, r.n, r.block_norm, r.l2, r.margin, r.in_band, r.ok)
                for r in haagerup_sweep(x, m_max, n_max, workspace=ws)]

    if args.threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=args.threads) as ex:
            chunks = list(ex.map(run, jobs))
    else:
        chunks = [run(j) for j in jobs]
    for chunk in chunks:
        rows.extend(chunk)
        all_ok = all_ok and all(r[-1] for r in chunk)
    write_csv(out / "haagerup.csv",
              ["element", "degree", "m", "n", "block_norm", "l2_norm",
               "margin", "in_band", "ok"], rows)
    write_json(out / "haagerup_summary.json",
               {"elements": len(jobs), "blocks": len(rows), "all_ok": all_ok})
    print(f"{len(rows)} blocks over {len(jobs)} elements: "
          + ("all bounds hold" if all_ok else "VIOLATIONS found"))
    return 0, {"haagerup": "haagerup.csv", "summary": "haagerup_summary.json"}


def cmd_tail_sweep(cfg, args, out: Path) -> tuple[int, dict]:
    g = graph_from_config(cfg.get("graph"), "graph")
    cutoff = _field(cfg, "cutoff", int, required=True)
    bands = _field(cfg, "bands", list, default=[1, 2, 3])
    degree_cuts = _field(cfg, "degree_cuts", list, default=[1, 2, 3])
    ws = GnsWorkspace(directed_double(g), cutoff)
    a = _element_from_config(cfg, ws, args.seed)
    rows = []
    for M in bands:
        for Kc in degree_cuts:
            td = tail_decompose(a, int(M), int(Kc), ws)
            rows.append((int(M), int(Kc), td.norms["far_op"], td.norms["near_op"],
                         td.norms["low_l2"], td.norms["high_l2"], td.norms["high_op"]))
    write_csv(out / "tails.csv",
              ["band_min", "degree_cut", "far_op", "near_op", "low_l2",
               "high_l2", "high_op"], rows)
    print(f"{len(rows)} tail splits written")
    return 0, {"tails": "tails.csv"}


def _family_from_config(cfg) -> tuple[list[tuple[str, WeightedPointedGraph]], WeightedPointedGraph]:
    fam = cfg.get("family")
    if not isinstance(fam, dict):
        raise ConfigError("config field 'family' is required and must be an object")
    kind = fam.get("kind")
    if kind == "dynkin_a":
        indices = fam.get("indices")
        if not isinstance(indices, list) or not indices:
            raise ConfigError("family.indices: need a nonempty list of integers")
        members = [(str(n), dynkin_a(int(n))) for n in indices]
        limit = graph_from_config(cfg.get("limit", {"family": "dynkin_a_infty",
                                                    "cutoff": 8}), "limit")
        return members, limit
    if kind == "a_infty_q":
        exps = fam.get("exponents")
        cutoff = int(fam.get("cutoff", 8))
        if not isinstance(exps, list) or not exps:
            raise ConfigError("family.exponents: need a nonempty list of integers")
        members = [(str(m), dynkin_a_infty(cutoff, q=1.0 + 2.0 ** (-int(m))))
                   for m in exps]
        limit = dynkin_a_infty(cutoff)
        return members, limit
    if kind == "explicit":
        specs = fam.get("members")
        if not isinstance(specs, list) or not specs:
            raise ConfigError("family.members: need a nonempty list")
        members = []
        for i, m in enumerate(specs):
            label = str(m.get("label", i))
            members.append((label, graph_from_config(m.get("graph"), f"members[{i}]")))
        limit = graph_from_config(cfg.get("limit"), "limit")
        return members, limit
    raise ConfigError(f"family.kind: unknown kind {kind!r} "
                      "(dynkin_a | a_infty_q | explicit)")


def cmd_converge_run(cfg, args, out: Path) -> tuple[int, dict]:
    members, limit = _family_from_config(cfg)
    K = _field(cfg, "K", int, required=True)
    depth = _field(cfg, "depth", int, required=True)
    samples = _field(cfg, "samples", int, default=24)
    mix_samples = _field(cfg, "mix_samples", int, default=16)
    weight_tol = _field(cfg, "weight_tol", float, default=0.05)
    try:
        res = convergence_experiment(members, limit, K, depth, samples=samples,
                                     mix_samples=mix_samples, seed=args.seed,
                                     threads=args.threads, weight_tol=weight_tol)
    except ValueError as e:
        raise ConfigError(str(e)) from None
    rows = [(r.label, r.K, r.norm_distortion, r.lip_distortion, r.ball_distance,
             r.distq_upper, r.samples, r.seed) for r in res.rows]
    write_csv(out / "convergence.csv",
              ["n", "K", "norm_distortion", "lip_distortion", "ball_distance",
               "distq_upper", "samples", "seed"], rows)
    xs = list(range(len(res.rows)))
    svg_line_plot(out / "convergence.svg",
                  [("norm distortion", xs, [r.norm_distortion for r in res.rows]),
                   ("lip distortion", xs, [r.lip_distortion for r in res.rows]),
                   ("ball distance", xs, [r.ball_distance for r in res.rows])],
                  title="family convergence", xlabel="family member",
                  ylabel="distortion / distance")
    def strictly_down(vals):
        return all(b < a for a, b in zip(vals, vals[1:]))
    summary = {
        "local_converged": res.local_converged,
        "norm_strictly_decreasing": strictly_down([r.norm_distortion for r in res.rows]),
        "ball_strictly_decreasing": strictly_down([r.ball_distance for r in res.rows]),
        "norm_final_vs_initial": res.rows[-1].norm_distortion / res.rows[0].norm_distortion
        if res.rows[0].norm_distortion else None,
        "ball_final_vs_initial": res.rows[-1].ball_distance / res.rows[0].ball_distance
        if res.rows[0].ball_distance else None,
    }
    write_json(out / "convergence_summary.json", summary)
    print(f"{len(res.rows)} members; norm distortion "
          f"{res.rows[0].norm_distortion:.4g} -> {res.rows[-1].norm_distortion:.4g}, "
          f"ball distance {res.rows[0].ball_distance:.4g} -> {res.rows[-1].ball_distance:.4g}")
    return 0, {"convergence": "convergence.csv", "plot": "convergence.svg",
               "summary": "convergence_summary.json"}


def cmd_tlj_check(cfg, args, out: Path) -> tuple[int, dict]:
    deltas = _field(cfg, "deltas", list, default=[2.0, 2.5])
    m_max = _field(cfg, "laplace_max_degree", int, default=6)
    id_max = _field(cfg, "identity_max_degree", int, default=6)
    tr_max = _field(cfg, "trace_max_degree", int, default=6)
    rows = []
    for dv in deltas:
        dv = float(dv)
        for m in range(0, m_max + 1, 2):
            r = laplace_number_residual(m, dv)
            rows.append(("laplace_vs_degree", dv, m, r, r <= 1e-9))
        cup = TLElement.basis(dv, NcPairing(2, ((1, 2),)))
        r = commutator_band_identity(cup, id_max)
        rows.append(("graded_commutator", dv, id_max, r, r <= 1e-10))
        worst = 0.0
        for m in range(0, tr_max + 1, 2):
            basis = enumerate_pairings(m)
            for p in basis:
                for q in basis:
                    x = TLElement.basis(dv, p)
                    y = TLElement.basis(dv, q)
                    worst = max(worst, abs(tl_trace(star_product(x, y))
                                           - tl_trace(star_product(y, x))))
        rows.append(("trace_symmetry", dv, tr_max, worst, worst <= 1e-10))
    write_csv(out / "tlj_report.csv",
              ["check", "delta", "param", "residual", "ok"], rows)
    all_ok = all(r[-1] for r in rows)
    print(f"{len(rows)} diagram checks: " + ("all pass" if all_ok else "FAILURES"))
    return 0, {"tlj_report": "tlj_report.csv"}


def cmd_theta_sum(cfg, args, out: Path) -> tuple[int, dict]:
    ts = _field(cfg, "t", list, default=[0.1, 0.5, 1.0])
    n_max = _field(cfg, "n_max", int, default=12)
    delta = _field(cfg, "delta", float, default=2.0)
    rows = []
    all_bounded = True
    for t in ts:
        table = theta_sum(float(t), n_max, delta)
        all_bounded = all_bounded and table.all_bounded
        for r in table.rows:
            rows.append((float(t), r.n, r.dim, r.term, r.bound_term,
                         r.partial_sum, r.partial_bound, r.bounded))
    write_csv(out / "theta.csv",
              ["t", "n", "dim", "term", "bound_term", "partial_sum",
               "partial_bound", "bounded"], rows)
    write_json(out / "theta_summary.json",
               {"n_max": n_max, "delta": delta, "all_bounded": all_bounded})
    print(f"{len(rows)} heat-sum rows, bounds "
          + ("hold" if all_bounded else "FAIL"))
    return 0, {"theta": "theta.csv", "summary": "theta_summary.json"}


# -- entry point --------------------------------------------------------------------

_COMMANDS = {
    ("graph", "validate"): (cmd_graph_validate, False),
    ("loops", "enumerate"): (cmd_loops_enumerate, False),
    ("wick", "build"): (cmd_wick_build, True),
    ("lip", "compute"): (cmd_lip_compute, False),
    ("haagerup", "sweep"): (cmd_haagerup_sweep, False),
    ("tail", "sweep"): (cmd_tail_sweep, False),
    ("converge", "run"): (cmd_converge_run, False),
    ("tlj", "check"): (cmd_tlj_check, False),
    ("theta", "sum"): (cmd_theta_sum, False),
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="freeloop",
                                     description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON config file")
    common.add_argument("--out", metavar="DIR", default="out",
                        help="output directory (default: ./out)")
    common.add_argument("--cache", metavar="DIR", default=None,
                        help="cache directory for realized operators")
    common.add_argument("--no-cache", action="store_true",
                        help="disable the disk cache")
    common.add_argument("--seed", type=int, default=None,
                        help="seed override (default: config seed or 0)")
    common.add_argument("--threads", type=int, default=1,
                        help="worker threads for independent chunks")
    groups = parser.add_subparsers(dest="group", required=True)
    seen: dict[str, argparse.ArgumentParser] = {}
    for (group, action), _ in sorted(_COMMANDS.items()):
        if group not in seen:
            gp = groups.add_parser(group)
            seen[group] = gp.add_subparsers(dest="action", required=True)
        seen[group].add_parser(action, parents=[common])
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handler, wants_cache = _COMMANDS[(args.group, args.action)]
    t0 = time.monotonic()
    try:
        cfg, cfg_text = _load_config(args.config)
        if args.seed is None:
            seed = cfg.get("seed", 0)
            if not isinstance(seed, int):
                raise ConfigError("config field 'seed': expected int")
            args.seed = seed
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        cache = DiskCache(None if args.no_cache else args.cache)
        if wants_cache:
            code, outputs = handler(cfg, args, out, cache)
        else:
            code, outputs = handler(cfg, args, out)
        write_manifest(out, f"{args.group} {args.action}", cfg_text,
                       args.seed, args.threads, time.monotonic() - t0, outputs)
        return code
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    except NumericNonConvergence as e:
        out = Path(args.out)
        if out.is_dir() and args.config:
            write_manifest(out, f"{args.group} {args.action}",
                           Path(args.config).read_text(encoding="utf-8"),
                           args.seed or 0, args.threads, time.monotonic() - t0,
                           {"status": "non-convergence"})
        print(f"did not converge: {e}", file=sys.stderr)
        return 2
    except BasisSizeError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    except Exception:
        traceback.print_exc()
        return 3


if __name__ == "__main__":
    sys.exit(main())
