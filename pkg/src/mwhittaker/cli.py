"""Command-line front end.

Every command writes an envelope ``{"config": ..., "result": ...}`` (JSON) or
plot-ready CSV to stdout or ``--output``.  A provenance line goes to
stderr.  Exit codes: 0 success, 2 invalid parameters, 1 runtime failure
(including a failed ``verify``).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .spd import DomainError, NotPositiveDefiniteError, from_upper_triangle, upper_triangle

__all__ = ["RunConfig", "ParamError", "main", "encode_matrix", "decode_matrix"]


class ParamError(ValueError):
    """Invalid command-line parameter; maps to exit code 2."""


@dataclass
class RunConfig:
    command: str
    d: int = 1
    N: int = 2
    n: int = 1
    alpha: object = 1.5
    beta: list = field(default_factory=list)
    seed: int = 0
    samples: int = 1
    tol: float = 1e-10
    output: str | None = None
    format: str = "json"
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def encode_matrix(m):
    """Row-major upper triangle with the dimension: ``{"d": d, "upper": [...]}``."""
    m = np.asarray(m, dtype=float)
    return {"d": int(m.shape[-1]), "upper": [float(v) for v in upper_triangle(m)]}


def decode_matrix(obj):
    return from_upper_triangle(np.asarray(obj["upper"], dtype=float), int(obj["d"]))


# --- argument parsing -----------------------------------------------------

def _floats(text, what):
    try:
        return [float(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise ParamError(f"{what} must be a comma-separated list of numbers, got {text!r}") from None


def _matrix_list(text, d, what):
    """``d = 1``: ``"1,2"``.  ``d > 1``: entries separated by ``;``, each a row-major upper triangle."""
    if d == 1:
        return np.array(_floats(text, what))[:, None, None]
    out = []
    for part in str(text).split(";"):
        vals = _floats(part, what)
        if len(vals) != d * (d + 1) // 2:
            raise ParamError(f"each {what} entry needs {d * (d + 1) // 2} upper-triangle values for d={d}")
        out.append(from_upper_triangle(np.array(vals), d))
    return np.array(out)


def _alpha(text):
    """Constant, comma-separated list ``alpha(1), alpha(2), ...``, or ``@file`` schedule."""
    from .process import AlphaSchedule

    text = str(text)
    if text.startswith("@"):
        try:
            with open(text[1:]) as fh:
                return AlphaSchedule.parse(fh.read())
        except OSError as e:
            raise ParamError(f"cannot read schedule file: {e}") from None
        except ValueError as e:
            raise ParamError(f"bad schedule file: {e}") from None
    vals = _floats(text, "--alpha")
    if len(vals) == 1:
        return AlphaSchedule(vals[0])
    return AlphaSchedule(vals, default=vals[-1])


def _alpha_json(sched):
    return sched.to_dict()


def _require(cond, msg):
    if not cond:
        raise ParamError(msg)


def _default_workers():
    try:
        import psutil

        return psutil.cpu_count(logical=False) or 1
    except ImportError:
        return os.cpu_count() or 1


def _build_parser():
    p = argparse.ArgumentParser(prog="mwhittaker", description="Matrix Whittaker processes: simulation, "
                                "evaluation and numerical verification.")
    p.add_argument("--version", action="version", version=f"mwhittaker {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed (default: $MW_SEED or 0)")
    common.add_argument("--format", choices=["json", "csv"], default="json")
    common.add_argument("--output", "-o", default=None, help="output path (default stdout)")
    common.add_argument("--workers", type=int, default=None, help="worker processes (default: physical cores)")
    sub = p.add_subparsers(dest="command", required=True)

    def proc(name, help_):
        s = sub.add_parser(name, parents=[common], help=help_)
        s.add_argument("--d", type=int, default=1)
        s.add_argument("--N", type=int, default=2)
        s.add_argument("--n", type=int, default=10, help="number of time steps")
        s.add_argument("--alpha", default="1.5", help="constant, list alpha(1),alpha(2),..., or @schedule-file")
        s.add_argument("--beta", default=None, help="comma-separated, one per row (default zeros)")
        s.add_argument("--samples", type=int, default=1)
        return s

    s = proc("simulate-triangular", "run the triangular array dynamic")
    s.add_argument("--init", default="ones", help="'ones' or a bottom row (inner rows by geometric means)")
    proc("simulate-right-edge", "right edge from step initial data")
    proc("simulate-left-edge", "inverse left edge from step initial data")

    s = sub.add_parser("whittaker-eval", parents=[common], help="evaluate psi_lambda(z)")
    s.add_argument("--d", type=int, default=1)
    s.add_argument("--N", type=int, default=None)
    s.add_argument("--lambda", dest="lam", required=True)
    s.add_argument("--z", required=True, help="bottom row; for d>1 entries separated by ';'")
    s.add_argument("--method", choices=["auto", "quadrature", "mc", "fk"], default="auto")
    s.add_argument("--samples", type=int, default=50_000)
    s.add_argument("--tol", type=float, default=1e-10)

    s = sub.add_parser("whittaker-measure", parents=[common], help="log density of the Whittaker measure")
    s.add_argument("--lambda", dest="lam", required=True)
    s.add_argument("--rho", required=True)
    s.add_argument("--z", required=True)
    s.add_argument("--tol", type=float, default=1e-10)

    def graph_args(s):
        s.add_argument("--graph", default="triangular:3", help="triangular:N, chain, or a graph file")
        s.add_argument("--boundary", default="ones", help="'ones' or comma-separated values for triangular:N")
        s.add_argument("--tol", type=float, default=1e-12)

    graph_args(sub.add_parser("minimize-energy", parents=[common], help="minimise the energy on a graph"))
    s = sub.add_parser("laplace", parents=[common], help="Laplace approximation of an energy integral")
    graph_args(s)
    s.add_argument("--k", type=float, default=50.0)
    s.add_argument("--method", choices=["auto", "quadrature", "mc"], default="auto")
    s.add_argument("--samples", type=int, default=200_000)

    s = sub.add_parser("asymptotics-sweep", parents=[common], help="psi(r(k)) against its leading order")
    s.add_argument("--lambda", dest="lam", default="0,0")
    s.add_argument("--k", default="5,10,20,50")

    s = sub.add_parser("schur-check", parents=[common], help="Cauchy-Littlewood and Pieri checks")
    s.add_argument("--x", default="0.3,0.1")
    s.add_argument("--y", default="0.2")
    s.add_argument("--mu", default="", help="partition for the Pieri check")
    s.add_argument("--max-size", type=int, default=40)

    s = sub.add_parser("verify", parents=[common], help="run named numerical experiments")
    s.add_argument("name", help="experiment name or 'all'")
    return p


# --- commands -------------------------------------------------------------

def _proc_config(a):
    _require(a.d >= 1, "--d must be >= 1")
    _require(a.N >= 1, "--N must be >= 1")
    _require(a.n >= 0, "--n must be >= 0")
    _require(a.samples >= 1, "--samples must be >= 1")
    beta = [0.0] * a.N if a.beta is None else _floats(a.beta, "--beta")
    _require(len(beta) == a.N, f"--beta needs N={a.N} entries, got {len(beta)}")
    sched = _alpha(a.alpha)
    for n in range(1, a.n + 1):
        try:
            an = sched(n)
        except DomainError as e:
            raise ParamError(str(e)) from None
        for b in beta:
            _require(an + b > (a.d - 1) / 2,
                     f"alpha(n) + beta_i > (d-1)/2 violated at n={n}: {an} + {b}")
    return beta, sched


def _traj_records(traj):
    """Long-format records ``(sample, step, i, j, upper...)`` for a ``(T+1, B, ...)`` array of rows."""
    rows = []
    for t, arr in enumerate(traj):
        for b, entries in enumerate(arr):
            for (i, j), m in entries:
                rows.append([b, t, i, j] + [float(v) for v in upper_triangle(m)])
    return rows


def cmd_simulate_triangular(a, rng):
    from .process import simulate_triangular
    from .triangle import TriangularArray

    beta, sched = _proc_config(a)
    d, N = a.d, a.N
    if a.init == "ones":
        z = np.broadcast_to(np.eye(d), (N, d, d))
    else:
        z = _matrix_list(a.init, d, "--init")
        _require(z.shape[0] == N, f"--init needs N={N} entries")
    from .process import _initial_log_inner
    from .spd import expm_sym, logm_sym

    lz = logm_sym(np.asarray(z)) if d > 1 else np.log(np.asarray(z))
    rows = []
    if N > 1:
        inner = np.exp(_initial_log_inner(lz[None, :, 0, 0]))[0] if d == 1 else None
        for i in range(1, N):
            if d == 1:
                off = i * (i - 1) // 2
                rows.append(inner[off:off + i][:, None, None])
            else:
                # geometric-mean start: average of the two bottom-row logs below
                rows.append(np.array([expm_sym(lz[j:j + N - i + 1].mean(axis=0)) for j in range(i)]))
    rows.append(np.asarray(z))
    x0 = TriangularArray([np.broadcast_to(r, (a.samples,) + r.shape).copy() for r in rows])
    traj = simulate_triangular(x0, sched, beta, a.n, rng)
    per_t = []
    for arr in traj.arrays:
        per_t.append([[((i, j), arr.entry(i, j)[b]) for i in range(1, N + 1) for j in range(1, i + 1)]
                      for b in range(a.samples)])
    records = _traj_records(per_t)
    return {"columns": ["sample", "step", "i", "j"] + [f"m{k}" for k in range(d * (d + 1) // 2)],
            "records": records, "d": d, "alpha": _alpha_json(sched), "beta": beta}


def _edge(a, rng, left):
    from .process import simulate_left_edge, simulate_right_edge

    beta, sched = _proc_config(a)
    fn = simulate_left_edge if left else simulate_right_edge
    out = fn(a.N, a.d, sched, beta, a.n, rng, a.samples)
    per_t = [[[((i + 1, 1), out[t, b, i]) for i in range(a.N)] for b in range(a.samples)]
             for t in range(a.n + 1)]
    d = a.d
    return {"columns": ["sample", "step", "i", "j"] + [f"m{k}" for k in range(d * (d + 1) // 2)],
            "records": _traj_records(per_t), "d": d, "alpha": _alpha_json(sched), "beta": beta}


def cmd_simulate_right_edge(a, rng):
    return _edge(a, rng, left=False)


def cmd_simulate_left_edge(a, rng):
    return _edge(a, rng, left=True)


def cmd_whittaker_eval(a, rng):
    from .whittaker import WhittakerEvaluator

    lam = np.array(_floats(a.lam, "--lambda"))
    z = _matrix_list(a.z, a.d, "--z")
    N = a.N if a.N is not None else lam.size
    _require(lam.size == N, f"--lambda needs N={N} entries, got {lam.size}")
    _require(z.shape[0] == N, f"--z needs N={N} entries, got {z.shape[0]}")
    ev = WhittakerEvaluator(method=a.method, rtol=a.tol, n_samples=a.samples, rng=rng)
    lv = float(np.real(ev(lam, z)))
    res = {"log_value": lv, "value": float(np.exp(lv)), "method": ev._pick(N, a.d)}
    if ev.last_estimates:
        res["rel_se"] = ev.last_estimates[0].rel_se
    return res


def cmd_whittaker_measure(a, rng):
    from .whittaker import log_whittaker_measure

    lam = np.array(_floats(a.lam, "--lambda"))
    rho = np.array(_floats(a.rho, "--rho"))
    _require(rho.size >= lam.size,
             f"--rho must have at least as many entries as --lambda ({rho.size} < {lam.size})")
    z = np.array(_floats(a.z, "--z"))
    _require(z.size == rho.size, f"--z needs {rho.size} entries")
    lv = float(log_whittaker_measure(lam, rho, z, a.tol))
    return {"log_density": lv, "density": float(np.exp(lv))}


def _graph(a):
    from . import energy as en

    spec = a.graph
    if spec.startswith("triangular:"):
        try:
            N = int(spec.split(":", 1)[1])
        except ValueError:
            raise ParamError(f"bad graph spec {spec!r}; expected triangular:N") from None
        _require(N >= 2, "triangular:N needs N >= 2 so that a free vertex exists")
        if a.boundary == "ones":
            bnd = None
        else:
            bnd = _floats(a.boundary, "--boundary")
            _require(len(bnd) == N, f"--boundary needs N={N} values")
            _require(all(b > 0 for b in bnd), "--boundary values must be positive")
        return en.triangular_graph(N, bnd)
    if spec == "chain":
        return en.chain_graph()
    try:
        with open(spec) as fh:
            return en.parse_graph(fh.read())
    except OSError as e:
        raise ParamError(f"cannot read graph file: {e}") from None


def _vertex_key(v):
    return ",".join(map(str, v)) if isinstance(v, tuple) else str(v)


def cmd_minimize_energy(a, rng):
    from .energy import minimize_Phi

    res = minimize_Phi(_graph(a), tol=a.tol)
    return {"energy": res.energy, "grad_norm": res.grad_norm, "iterations": res.iterations,
            "converged": res.converged, "certified": res.certified,
            "minimiser": {_vertex_key(v): encode_matrix(x) for v, x in zip(res.graph.free, res.x)}}


def cmd_laplace(a, rng):
    from .energy import laplace_integral

    _require(a.k > 0, "--k must be positive")
    r = laplace_integral(_graph(a), a.k, method=a.method, n_samples=a.samples, rng=rng)
    return {"log_lhs": r.log_lhs, "log_rhs": r.log_rhs, "ratio": r.ratio, "rel_se": r.rel_se, "method": r.method}


def cmd_asymptotics_sweep(a, rng):
    from .whittaker import log_asymptotic_rhs, log_psi_at_r

    lam = _floats(a.lam, "--lambda")
    ks = _floats(a.k, "--k")
    _require(all(k > 0 for k in ks), "--k values must be positive")
    rec = []
    for k in ks:
        lp, lr = log_psi_at_r(lam, k), log_asymptotic_rhs(len(lam), k)
        rec.append([k, lp, lr, float(np.exp(lp - lr))])
    return {"columns": ["k", "log_psi", "log_leading_order", "ratio"], "records": rec}


def cmd_schur_check(a, rng):
    from .schur import cauchy_littlewood_check, pieri_check

    x, y = _floats(a.x, "--x"), _floats(a.y, "--y")
    mu = [int(v) for v in _floats(a.mu, "--mu")]
    try:
        c = cauchy_littlewood_check(x, y, a.max_size)
        p = pieri_check(mu, x, a.max_size)
    except ValueError as e:
        raise ParamError(str(e)) from None
    return {"cauchy": {"lhs": c.lhs, "rhs": c.rhs, "tail_bound": c.tail_bound, "ok": c.ok},
            "pieri": {"lhs": p.lhs, "rhs": p.rhs, "tail_bound": p.tail_bound, "ok": p.ok}}


def cmd_verify(a, rng):
    from .verify import REGISTRY, run_all

    names = None if a.name == "all" else [a.name]
    if names and a.name not in REGISTRY:
        raise ParamError(f"unknown experiment {a.name!r}; choose from: all, {', '.join(REGISTRY)}")
    workers = a.workers or min(_default_workers(), len(names or REGISTRY))
    reports = run_all(a.seed, names, workers)
    return [r.to_dict() for r in reports]


COMMANDS = {
    "simulate-triangular": cmd_simulate_triangular,
    "simulate-right-edge": cmd_simulate_right_edge,
    "simulate-left-edge": cmd_simulate_left_edge,
    "whittaker-eval": cmd_whittaker_eval,
    "whittaker-measure": cmd_whittaker_measure,
    "minimize-energy": cmd_minimize_energy,
    "laplace": cmd_laplace,
    "asymptotics-sweep": cmd_asymptotics_sweep,
    "schur-check": cmd_schur_check,
    "verify": cmd_verify,
}


# --- output ---------------------------------------------------------------

def _to_csv(result):
    buf = io.StringIO()
    w = csv.writer(buf)
    if isinstance(result, dict) and "records" in result:
        w.writerow(result["columns"])
        w.writerows(result["records"])
    elif isinstance(result, list):
        keys = ["name", "statistic", "threshold", "p_value", "pass", "seed", "n_samples", "runtime_ms"]
        w.writerow(keys)
        for r in result:
            w.writerow([r[k] for k in keys])
    else:
        w.writerow(["key", "value"])
        for k, v in _flatten(result):
            w.writerow([k, v])
    return buf.getvalue()


def _flatten(obj, prefix=""):
    if isinstance(obj, dict):
        for k, v in obj.items():
            yield from _flatten(v, f"{prefix}{k}.")
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            yield from _flatten(v, f"{prefix}{i}.")
    else:
        yield prefix.rstrip("."), obj


def _config_from_args(a):
    extra = {k: v for k, v in vars(a).items()
             if k not in {"command", "d", "N", "n", "alpha", "beta", "seed", "samples", "tol", "output", "format"}}
    fields = {k: getattr(a, k) for k in ("d", "N", "n", "alpha", "samples", "tol") if getattr(a, k, None) is not None}
    if getattr(a, "beta", None) is not None:
        fields["beta"] = _floats(a.beta, "--beta")
    return RunConfig(command=a.command, seed=a.seed, output=a.output, format=a.format, extra=extra, **fields)


def main(argv=None):
    from ._backend import BACKEND
    from .energy import GraphError
    from .rand import RngStream
    from .verify import _jsonable

    parser = _build_parser()
    try:
        a = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    if a.seed is None:
        env = os.environ.get("MW_SEED")
        try:
            a.seed = int(env) if env not in (None, "") else 0
        except ValueError:
            print(f"error: MW_SEED must be an integer, got {env!r}", file=sys.stderr)
            return 2
    try:
        cfg = _config_from_args(a)
        print(f"# mwhittaker {__version__} backend={BACKEND} seed={a.seed} command={a.command} "
              f"params={json.dumps(_jsonable(cfg.extra), sort_keys=True)}", file=sys.stderr)
        result = _jsonable(COMMANDS[a.command](a, RngStream(a.seed, 0)))
    except (ParamError, DomainError, NotPositiveDefiniteError, GraphError) as e:
        print(f"error: invalid parameters: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # runtime failure
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    text = _to_csv(result) if a.format == "csv" else json.dumps(
        {"config": _jsonable(cfg.to_dict()), "result": result}, indent=2)
    if a.output:
        with open(a.output, "w") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    if a.command == "verify" and not all(r["pass"] for r in result):
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
