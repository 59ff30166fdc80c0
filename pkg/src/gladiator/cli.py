"""Command-line front end.

Usage: gladiator COMMAND [CONFIG.toml] [key=value ...] [--seed N] [--mode M]
                 [--cap-states N] [--out DIR]

Configs are flat TOML with dotted keys (``chain.variant = "gladiator"``).
Strengths are written as rational strings such as ``"3/2"``. Command-line
``key=value`` pairs override the file; values are read as TOML literals when
they parse and as plain strings otherwise.

Exit codes: 0 success, 1 domain error, 2 size cap exceeded, 3 inconclusive estimate.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np
import tomli
import tomli_w

from . import exact, flows, measures, montecarlo
from .chains import (ConstantBias, Gladiator, JumpHop, LeagueHierarchy, MTree, ParticleSystem,
                     Simple, spec_from_config, spec_to_config)
from .errors import DomainError, SizeLimitError
from .trees import to_fraction

EXIT_OK, EXIT_DOMAIN, EXIT_LIMIT, EXIT_INCONCLUSIVE = 0, 1, 2, 3

COMMON_KEYS = {"seed", "mode", "cap_states"}
CHAIN_KEYS = {"chain.variant", "chain.n", "chain.p", "chain.strengths", "chain.teams",
              "chain.counts", "chain.tree", "chain.node_strengths"}
COMMAND_KEYS = {
    "stationary": CHAIN_KEYS,
    "tmix-exact": CHAIN_KEYS | {"epsilon"},
    "tmix-estimate": CHAIN_KEYS | {"epsilon", "trials", "horizon", "start", "ts"},
    "congestion": CHAIN_KEYS,
    "qbinom": {"m", "r", "q", "b", "c"},
    "bounds": {"kind", "t_bar", "t_max", "times", "probs", "t_x", "n", "t", "phi",
               "pi_min", "epsilon"},
    "sweep": {"sweep.family", "sweep.n", "sweep.p", "sweep.ratio", "epsilon"},
}


class UsageError(DomainError):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad usage, which this CLI reserves for size caps
    def error(self, message):
        raise UsageError(message)


# config handling

def flatten(tree: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in tree.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(flatten(v, key + "."))
        else:
            out[key] = v
    return out


def unflatten(flat: dict) -> dict:
    out: dict = {}
    for key, v in flat.items():
        node = out
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = v
    return out


def parse_config(text: str) -> dict:
    """Flat dotted-key view of a TOML document."""
    try:
        return flatten(tomli.loads(text))
    except tomli.TOMLDecodeError as exc:
        raise DomainError(f"config is not valid TOML: {exc}") from exc


def dump_config(flat: dict) -> str:
    return tomli_w.dumps(unflatten(flat))


def parse_override(item: str):
    if "=" not in item:
        raise UsageError(f"expected key=value, got {item!r}")
    key, raw = item.split("=", 1)
    key = key.strip()
    try:
        value = tomli.loads(f"v = {raw}")["v"]
    except tomli.TOMLDecodeError:
        value = raw
    return key, value


@dataclass
class ExperimentConfig:
    command: str
    values: dict

    def validate(self):
        allowed = COMMAND_KEYS[self.command] | COMMON_KEYS
        unknown = sorted(set(self.values) - allowed)
        if unknown:
            raise DomainError(f"unknown keys for {self.command}: {unknown}")
        return self

    def get(self, key, default=None):
        return self.values.get(key, default)

    def chain(self):
        sub = {k[len("chain."):]: v for k, v in self.values.items() if k.startswith("chain.")}
        if not sub:
            raise DomainError("no chain.* keys given")
        if isinstance(sub.get("node_strengths"), str):
            parts = sub["node_strengths"].split(",")
            tags = ("L", "C", "R") if len(parts) == 3 else ("L", "R")
            sub["node_strengths"] = dict(zip(tags, parts))
        return spec_from_config(sub)


# output helpers

class Output:
    """Collects named CSV/JSON artifacts; writes them to a directory or stdout."""

    def __init__(self, out_dir: str | None, stream=None):
        self.out_dir = Path(out_dir) if out_dir else None
        self.stream = stream or sys.stdout
        self.files: list[tuple[str, str]] = []

    def csv(self, name: str, header, rows):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow(r)
        self.files.append((f"{name}.csv", buf.getvalue()))

    def text(self, name: str, body: str):
        self.files.append((name, body))

    def json(self, name: str, payload: dict):
        self.files.append((f"{name}.json", json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n"))

    def flush(self):
        if self.out_dir is not None:
            self.out_dir.mkdir(parents=True, exist_ok=True)
            for name, body in self.files:
                (self.out_dir / name).write_text(body)
            self.stream.write("".join(f"wrote {self.out_dir / n}\n" for n, _ in self.files))
        else:
            for name, body in self.files:
                self.stream.write(f"# {name}\n{body}")


def _num(x):
    return str(x) if isinstance(x, Fraction) else repr(float(x))


# commands

def cmd_stationary(cfg: ExperimentConfig, opts, out: Output) -> int:
    spec = cfg.chain()
    _check_states(spec, opts)
    dist = measures.stationary_distribution(spec, opts.mode, _length_cap(spec, opts))
    out.text("stationary.csv", dist.to_csv())
    payload = {"space_id": dist.space_id, "states": len(dist), "mode": opts.mode,
               "pi_min": _num(dist.pi_min), "chain": _jsonable(spec_to_config(spec))}
    if opts.mode == "rational":
        payload["normalizing_constant"] = str(measures.normalizing_constant(spec))
    out.json("stationary", payload)
    return EXIT_OK


def _check_states(spec, opts):
    cap = opts.cap_states
    if cap is not None and spec.space.size > cap:
        raise SizeLimitError(f"{spec.space.space_id} state count", spec.space.size, cap)


def _length_cap(spec, opts):
    # an explicit state cap that the space fits under overrides the default length caps
    return None if opts.cap_states is None else spec.space.n


def cmd_tmix_exact(cfg, opts, out) -> int:
    spec = cfg.chain()
    _check_states(spec, opts)
    eps = to_fraction(cfg.get("epsilon", "1/4"))
    kernel = exact.assemble_kernel(spec, opts.mode, opts.cap_states, _length_cap(spec, opts))
    pi = measures.stationary_distribution(spec, opts.mode, _length_cap(spec, opts))
    rep = exact.mixing_time_exact(kernel, pi, eps)
    out.csv("tmix-exact", ["space_id", "epsilon", "t_mix", "worst_start", "method"],
            [[kernel.space_id, str(eps), rep.t_mix, str(rep.worst_start_state), rep.method]])
    out.text("tmix-exact_curve.csv", rep.to_csv())
    out.json("tmix-exact", rep.summary() | {"chain": _jsonable(spec_to_config(spec))})
    return EXIT_OK


def cmd_tmix_estimate(cfg, opts, out) -> int:
    spec = cfg.chain()
    _check_states(spec, opts)
    eps = to_fraction(cfg.get("epsilon", "1/4"))
    sc = montecarlo.SampleConfig(int(cfg.get("trials", 10_000)), int(cfg.get("horizon", 1024)),
                                 opts.seed, str(cfg.get("start", "extremal")))
    rows = []
    if cfg.get("ts") is not None:
        pi = measures.stationary_distribution(spec, "float")
        summary = {"mode": "curve", "trials": sc.trials, "seed": sc.seed}
        for s in montecarlo.start_states(spec, sc.start_policy):
            for p in montecarlo.estimate_tv_curve(spec, s, cfg.get("ts"), sc.trials, sc.seed, pi=pi):
                rows.append([str(s), p.t, repr(p.tv), repr(p.stderr)])
        out.csv("tmix-estimate", ["start", "t", "estimate", "stderr"], rows)
        out.json("tmix-estimate", summary)
        return EXIT_OK
    est = montecarlo.estimate_mixing_time(spec, eps, sc)
    for s, curve in est.curves.items():
        for p in curve:
            rows.append([s, p.t, repr(p.tv), repr(p.stderr)])
    out.csv("tmix-estimate", ["start", "t", "estimate", "stderr"], rows)
    out.json("tmix-estimate", est.summary() | {"trials": sc.trials, "seed": sc.seed})
    return EXIT_INCONCLUSIVE if est.inconclusive else EXIT_OK


def jumphop_congestion(spec: JumpHop):
    """Canonical Phi report (bound n) and comparison A_e report into X_3 (bound 2 n^2)."""
    n = spec.n
    kt = exact.assemble_kernel(spec)
    pi = measures.stationary_distribution(spec)
    canon = flows.canonical_congestion(kt, pi, flows.xt_path_family(spec))
    canon.bound, canon.bound_label = Fraction(n), "max_phi ≤ n"
    k3 = exact.assemble_kernel(ParticleSystem(spec.counts, spec.strengths))
    comp = flows.comparison_congestion(kt, k3, pi, flows.xt_edge_to_x3_path)
    comp.bound, comp.bound_label = Fraction(2 * n * n), "max_A_e ≤ 2n²"
    return canon, comp


def league_q(tree) -> dict:
    """Both readings of the constant q in the league comparison bound."""
    ratios = tree.ratios()
    return {"strong_over_weak": max(1 / r for r in ratios), "weak_over_strong": max(ratios)}


def league_congestion(tree):
    n = tree.n
    km = exact.assemble_kernel(MTree(tree))
    kl = exact.assemble_kernel(LeagueHierarchy(tree))
    pi = measures.stationary_distribution(MTree(tree))
    rep = flows.comparison_congestion(km, kl, pi, lambda e: flows.mtree_edge_to_l3_path(e, tree))
    q = league_q(tree)
    rep.bound, rep.bound_label = q["strong_over_weak"] * n**3, "max_A_e ≤ q·n³"
    rep.extra = {"q_strong_over_weak": str(q["strong_over_weak"]),
                 "q_weak_over_strong": str(q["weak_over_strong"]),
                 "bound_weak_over_strong": str(q["weak_over_strong"] * n**3),
                 "within_weak_over_strong_bound": rep.max_value <= q["weak_over_strong"] * n**3}
    return rep


def cmd_congestion(cfg, opts, out) -> int:
    if opts.mode != "rational":
        raise DomainError("congestion is only computed in rational mode")
    spec = cfg.chain()
    _check_states(spec, opts)
    if isinstance(spec, JumpHop):
        reports = {"canonical": None, "comparison": None}
        reports["canonical"], reports["comparison"] = jumphop_congestion(spec)
    elif isinstance(spec, (MTree, LeagueHierarchy)):
        reports = {"comparison": league_congestion(spec.tree)}
    else:
        raise DomainError("congestion needs a jump_hop, mtree or league chain")
    verdicts = []
    summary = {"chain": _jsonable(spec_to_config(spec)), "reports": {}}
    for name, rep in reports.items():
        out.text(f"congestion_{name}.csv", rep.to_csv())
        summary["reports"][name] = rep.summary()
        verdicts.append(rep.verdict())
    summary["verdicts"] = verdicts
    out.json("congestion", summary)
    return EXIT_OK


def cmd_qbinom(cfg, opts, out) -> int:
    m, r = int(cfg.get("m", 0)), int(cfg.get("r", 0))
    poly = measures.qbinom(m, r)
    out.csv("qbinom", ["t", "coefficient"], list(enumerate(poly.coeffs)))
    payload = {"m": m, "r": r, "degree": poly.degree, "coefficients": list(poly.coeffs),
               "palindromic": poly.is_palindromic(), "polynomial": str(poly)}
    if cfg.get("q") is not None:
        q = to_fraction(cfg.get("q"))
        payload["q"] = str(q)
        payload["value_at_q"] = str(measures.qbinom_eval(m, r, q))
        if 0 < q < Fraction(1, 2):
            payload["bound_chain_holds"] = measures.qbinom_bound_check(m, r, q)
        if cfg.get("b") is not None and cfg.get("c") is not None:
            lhs, rhs, ok = measures.partition_sum_identity_check(int(cfg.get("b")), int(cfg.get("c")), q)
            payload["partition_sum"] = {"lhs": str(lhs), "rhs": str(rhs), "equal": ok}
    out.json("qbinom", payload)
    return EXIT_OK


BOUND_ARGS = {"decomposition": ("t_bar", "t_max"), "product": ("times", "probs"),
              "reduction": ("t_x", "n"), "comparison3": ("t", "n"), "league": ("t", "n"),
              "canonical": ("phi", "pi_min", "epsilon")}


def _bound_value(key, v):
    if key in ("times",):
        return [to_fraction(x) for x in v]
    if key == "probs":
        return [str(x) for x in v]
    return to_fraction(v)


def cmd_bounds(cfg, opts, out) -> int:
    kind = cfg.get("kind")
    if kind not in BOUND_ARGS:
        raise DomainError(f"kind must be one of {sorted(BOUND_ARGS)}")
    args = {k: _bound_value(k, cfg.get(k)) for k in BOUND_ARGS[kind] if cfg.get(k) is not None}
    value = exact.compose_bound(kind, **args)
    out.csv("bounds", ["kind", "value"], [[kind, _num(value)]])
    out.json("bounds", {"kind": kind, "value": _num(value),
                        "args": {k: (str(v) if not isinstance(v, list) else [str(x) for x in v])
                                 for k, v in args.items()}})
    return EXIT_OK


@dataclass
class SweepFit:
    slope: float
    intercept: float
    residuals: list


def sweep_fit(results) -> SweepFit:
    """Least squares of log t against log n."""
    pts = [(float(n), float(t)) for n, t in results]
    if len(pts) < 3:
        raise DomainError("a sweep fit needs at least 3 points")
    if any(n <= 0 or t <= 0 for n, t in pts):
        raise DomainError("sweep points must be positive")
    x = np.log([n for n, _ in pts])
    y = np.log([t for _, t in pts])
    slope, intercept = np.polyfit(x, y, 1)
    resid = (y - (slope * x + intercept)).tolist()
    return SweepFit(float(slope), float(intercept), resid)


def sweep_family(family: str, n: int, p=None, ratio=None):
    if family == "simple":
        return Simple(n)
    if family == "constant_bias":
        return ConstantBias(n, p if p is not None else "3/4")
    if family == "gladiator_geometric":
        r = to_fraction(ratio if ratio is not None else 2)
        return Gladiator(tuple(r**k for k in range(n)))
    raise DomainError("sweep.family must be simple, constant_bias or gladiator_geometric")


def run_sweep(family, ns, epsilon=Fraction(1, 4), p=None, ratio=None, cap_states=None):
    rows = []
    for n in ns:
        spec = sweep_family(family, int(n), p, ratio)
        kernel = exact.assemble_kernel(spec, "float", cap_states)
        pi = measures.stationary_distribution(spec, "float")
        rows.append((int(n), exact.mixing_time_exact(kernel, pi, epsilon).t_mix))
    return rows


def cmd_sweep(cfg, opts, out) -> int:
    family = cfg.get("sweep.family", "simple")
    ns = cfg.get("sweep.n", [3, 4, 5, 6, 7])
    eps = to_fraction(cfg.get("epsilon", "1/4"))
    rows = run_sweep(family, ns, eps, cfg.get("sweep.p"), cfg.get("sweep.ratio"), opts.cap_states)
    fit = sweep_fit(rows)
    out.csv("sweep", ["n", "t_mix"], rows)
    out.json("sweep", {"family": family, "epsilon": str(eps), "points": [list(r) for r in rows],
                       "slope": fit.slope, "intercept": fit.intercept, "residuals": fit.residuals})
    return EXIT_OK


COMMANDS = {
    "stationary": cmd_stationary,
    "tmix-exact": cmd_tmix_exact,
    "tmix-estimate": cmd_tmix_estimate,
    "congestion": cmd_congestion,
    "qbinom": cmd_qbinom,
    "bounds": cmd_bounds,
    "sweep": cmd_sweep,
}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, Fraction):
        return str(obj)
    return obj


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="gladiator", description="Biased adjacent-transposition chains: "
                 "stationary laws, mixing times, congestion and bound checks.")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("params", nargs="*", help="config file path and/or key=value overrides")
    ap.add_argument("--seed", type=int, default=None, help="random seed (default 0)")
    ap.add_argument("--mode", choices=["rational", "float"], default=None)
    ap.add_argument("--cap-states", type=int, default=None, dest="cap_states",
                    help="refuse state spaces larger than this")
    ap.add_argument("--out", default=None, help="directory for CSV/JSON outputs")
    return ap


def load_experiment(command: str, params: list[str]) -> ExperimentConfig:
    values = {}
    for item in params:
        if "=" not in item:
            path = Path(item)
            if not path.is_file():
                raise DomainError(f"config file {item!r} not found")
            values.update(parse_config(path.read_text()))
    for item in params:
        if "=" in item:
            k, v = parse_override(item)
            values[k] = v
    return ExperimentConfig(command, values).validate()


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        opts = build_parser().parse_args(argv)
        cfg = load_experiment(opts.command, opts.params)
        opts.seed = opts.seed if opts.seed is not None else int(cfg.get("seed", 0))
        opts.mode = opts.mode or cfg.get("mode", "rational")
        if opts.mode not in ("rational", "float"):
            raise DomainError("mode must be rational or float")
        if opts.cap_states is None and cfg.get("cap_states") is not None:
            opts.cap_states = int(cfg.get("cap_states"))
        out = Output(opts.out, stdout)
        code = COMMANDS[opts.command](cfg, opts, out)
        out.flush()
        return code
    except SizeLimitError as exc:
        stderr.write(f"error: {exc}\n")
        return EXIT_LIMIT
    except (DomainError, ValueError, KeyError, TypeError) as exc:
        stderr.write(f"error: {exc}\n")
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
