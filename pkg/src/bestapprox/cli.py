"""Command-line front end: ``bestapprox <command> ...``.

Every command writes one JSON report (``<command>.json``) into the output
directory, plus a CSV for tabular results.  The output directory defaults to
``$BESTAPPROX_OUT_DIR`` or the current directory.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import __version__
from .circuit import (
    CircuitError,
    bloch_circuit,
    circuit_to_dict,
    evaluate,
    great_circle_circuit,
    load_circuit,
)
from .dea import ExactMode, ShotMode, scan
from .geometry import embed_samples, rank_gate, sample_circuit
from .mmec import MmecSpec, build
from .voronoi import VoronoiError, alpha_small, estimate_alpha, fit_rate
from .volume import (
    alpha_lower_bound_from_volume,
    alpha_opt,
    elliptic_E,
    parse_quadrature,
    spiral_circuit,
    volume,
)

SCHEMA_VERSION = 1
OUT_ENV = "BESTAPPROX_OUT_DIR"
EXIT_INPUT, EXIT_NUMERIC = 2, 3


class InputError(Exception):
    pass


def fmt(v) -> str:
    return f"{v:.12g}" if isinstance(v, (float, np.floating)) else str(v)


# output --------------------------------------------------------------------------

def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def _csv_text(header, rows, comments=()) -> str:
    buf = io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


class Outputs:
    """Collects files and writes them only after the command finished."""

    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.files: dict[Path, str] = {}

    def add(self, name, text):
        self.files[self.out_dir / name] = text

    def commit(self):
        for p, t in self.files.items():
            _atomic_write(p, t)
        return sorted(str(p) for p in self.files)


def _report(command, args, result) -> str:
    cfg = {k: v for k, v in vars(args).items() if k not in ("func",)}
    doc = {"schema_version": SCHEMA_VERSION, "tool_version": __version__, "command": command,
           "config": cfg, "result": result}
    return json.dumps(doc, indent=2, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(type(o).__name__)


# inputs --------------------------------------------------------------------------

def resolve_circuit(spec: str):
    """A circuit file, or ``builtin:bloch``, ``builtin:great-circle``,
    ``builtin:spiral:<n>``, ``builtin:mmec:<Q>``."""
    if spec.startswith("builtin:"):
        parts = spec.split(":")[1:]
        try:
            if parts == ["bloch"]:
                return bloch_circuit()
            if parts == ["great-circle"]:
                return great_circle_circuit()
            if parts[0] == "spiral" and len(parts) == 2:
                return spiral_circuit(int(parts[1]))
            if parts[0] == "mmec" and len(parts) == 2:
                return build(MmecSpec(int(parts[1])))
        except ValueError as exc:
            raise InputError(str(exc)) from None
        raise InputError(f"unknown builtin circuit {spec!r}")
    path = Path(spec)
    if not path.is_file():
        raise InputError(f"circuit file not found: {spec}")
    try:
        return load_circuit(path)
    except (json.JSONDecodeError, KeyError, TypeError, CircuitError) as exc:
        raise InputError(f"cannot parse circuit {spec}: {exc}") from None


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(eval_pow(t)) for t in text.split(",") if t.strip()]
    except ValueError:
        raise InputError(f"bad integer list {text!r}") from None
    if not vals:
        raise InputError("empty list")
    return vals


def eval_pow(token: str) -> int:
    """``"1024"`` or ``"2^10"``."""
    token = token.strip()
    if "^" in token:
        b, e = token.split("^")
        return int(b) ** int(e)
    return int(token)


def _parse_mode(text: str):
    if text == "exact":
        return ExactMode()
    parts = text.split(":")
    if parts[0] == "shots" and len(parts) in (2, 3):
        return ShotMode(int(parts[1]), int(parts[2]) if len(parts) == 3 else 0)
    raise InputError(f"bad mode {text!r}; use exact or shots:S[:seed]")


def _parse_method(text: str):
    if text == "voronoi":
        return "voronoi", 0
    if text.startswith("mc:"):
        return "mc", eval_pow(text[3:])
    raise InputError(f"bad method {text!r}; use voronoi or mc:ntest")


# pipeline ------------------------------------------------------------------------

def alpha_pipeline(circuit, n_samples, seed, embedding="auto", method="voronoi", n_test=100_000):
    """Sample, embed, rank gate, then Voronoi or Monte-Carlo covering radius."""
    t0 = time.perf_counter()
    samples = sample_circuit(circuit, n_samples, seed)
    emb = embed_samples(circuit, samples, embedding)
    gate = rank_gate(emb)
    out = {"N": n_samples, "embedding": emb.embedding, "D": emb.D,
           "basis_rank": gate.basis_rank, "required_D": gate.required_D}
    if not gate.passed:
        out.update(rank_gate="fail", alpha_lower_bound=gate.alpha_lower_bound, alpha=None,
                   method=None)
    else:
        est = estimate_alpha(emb, method, n_test, seed)
        out.update(rank_gate="pass", alpha=est.value, method=est.method,
                   is_upper_bound_estimate=est.is_upper_bound_estimate, degenerate=est.degenerate)
    out["runtime"] = time.perf_counter() - t0
    return out, samples, emb


# commands ------------------------------------------------------------------------

def cmd_analyze_dea(args, out: Outputs):
    circ = resolve_circuit(args.circuit)
    mode = _parse_mode(args.mode)
    if args.theta.startswith("random:"):
        theta, seed = None, int(args.theta.split(":")[1])
    else:
        p = Path(args.theta)
        if not p.is_file():
            raise InputError(f"theta file not found: {args.theta}")
        theta, seed = np.loadtxt(p, delimiter=",", ndmin=1), 0
    rep = scan(circ, theta, args.tol, mode, seed)
    result = rep.as_dict()
    out.add("analyze-dea.json", _report("analyze-dea", args, result))
    lines = [f"{'slot':>5} {'status':<12} {'value':>14}"]
    for s in range(circ.num_params):
        st = "independent" if s in rep.independent_slots else "redundant"
        lines.append(f"{s:>5} {st:<12} {fmt(rep.probe_theta[s]):>14}")
    return "\n".join(lines)


def cmd_build_mmec(args, out: Outputs):
    spec = MmecSpec(args.qubits, "phase_free" if args.phase == "free" else "with_global_phase",
                    "cnot_basis" if args.compile == "cnot" else "native_controls")
    circ = build(spec)
    text = json.dumps(circuit_to_dict(circ), indent=1) + "\n"
    name = args.out or f"mmec-{args.qubits}.json"
    out.add(name, text)
    result = {"num_qubits": circ.num_qubits, "num_params": circ.num_params,
              "num_gates": len(circ.gates), "file": name}
    out.add("build-mmec.json", _report("build-mmec", args, result))
    return f"{circ.num_params} parameters, {len(circ.gates)} gates -> {name}"


def cmd_estimate_alpha(args, out: Outputs):
    circ = resolve_circuit(args.circuit)
    method, n_test = _parse_method(args.method)
    res, _, _ = alpha_pipeline(circ, args.samples, args.seed, args.embedding, method,
                               n_test or 100_000)
    out.add("estimate-alpha.json", _report("estimate-alpha", args, res))
    if res["rank_gate"] == "fail":
        return f"rank gate failed (rank {res['basis_rank']} < {res['required_D']}): alpha >= pi/2"
    return f"alpha = {fmt(res['alpha'])} ({res['method']}, {res['embedding']})"


def _convergence(circ, n_list, seed, embedding, method, n_test):
    rows = []
    for N in n_list:
        res, _, emb = alpha_pipeline(circ, N, seed, embedding, method, n_test)
        if res["rank_gate"] != "pass":
            raise InputError(f"rank gate failed at N={N}; no convergence series")
        rows.append((N, res["alpha"], alpha_opt(N, emb.D)))
    c, rho = fit_rate([(r[0], r[1]) for r in rows]) if len(rows) >= 3 else (None, None)
    return rows, c, rho


def cmd_convergence(args, out: Outputs):
    circ = resolve_circuit(args.circuit)
    method, n_test = _parse_method(args.method)
    rows, c, rho = _convergence(circ, _int_list(args.n_list), args.seed, args.embedding,
                                method, n_test or 100_000)
    out.add("convergence.csv", _csv_text(["N", "alpha", "alpha_opt"], rows,
                                         [f"fit c={fmt(c)} rho={fmt(rho)}"] if c else []))
    out.add("convergence.json", _report("convergence", args, {
        "rows": [dict(N=r[0], alpha=r[1], alpha_opt=r[2]) for r in rows], "c": c, "rho": rho}))
    return f"fit: alpha ~ {fmt(c)} N^{fmt(rho)}" if c else f"{len(rows)} rows"


def cmd_bloch_demo(args, out: Outputs):
    rows, c, rho = _convergence(bloch_circuit(), _int_list(args.n_list), args.seed, "bloch",
                                "voronoi", 0)
    out.add("fig1.csv", _csv_text(["N", "alpha", "alpha_opt", "fit"],
                                  [(N, a, ao, c * N ** rho) for N, a, ao in rows],
                                  [f"fit c={fmt(c)} rho={fmt(rho)}"]))
    out.add("bloch-demo.json", _report("bloch-demo", args, {
        "rows": [dict(N=r[0], alpha=r[1], alpha_opt=r[2]) for r in rows], "c": c, "rho": rho}))
    return f"fit: alpha ~ {fmt(c)} N^{fmt(rho)}"


def cmd_volume(args, out: Outputs):
    circ = resolve_circuit(args.circuit)
    try:
        quad = parse_quadrature(args.quad) if args.quad else None
    except ValueError as exc:
        raise InputError(str(exc)) from None
    rep = volume(circ, quad, args.gauge)
    out.add("volume.json", _report("volume", args, rep.as_dict()))
    return f"vol = {fmt(rep.volume)}, dim M = {rep.dim_M}, alpha >~ {fmt(rep.alpha_lower_bound)}"


def cmd_spiral_demo(args, out: Outputs):
    rows = []
    for n in _int_list(args.n_list):
        circ = spiral_circuit(n)
        vol = 4 * elliptic_E(-4.0 * n * n)
        bound = alpha_lower_bound_from_volume(vol, 1)
        res, _, _ = alpha_pipeline(circ, args.samples, args.seed, "bloch")
        rows.append((n, vol, bound, res["alpha"]))
    out.add("fig2.csv", _csv_text(["n", "vol", "bound", "alpha_voronoi"], rows))
    out.add("spiral-demo.json", _report("spiral-demo", args, {
        "rows": [dict(n=r[0], vol=r[1], bound=r[2], alpha_voronoi=r[3]) for r in rows]}))
    return "\n".join(" ".join(fmt(v) for v in r) for r in rows)


def cmd_export_init_guesses(args, out: Outputs):
    circ = resolve_circuit(args.circuit)
    res, samples, emb = alpha_pipeline(circ, args.samples, args.seed, args.embedding)
    alpha, flag = res.get("alpha"), ""
    if res["rank_gate"] == "fail":
        if emb.D == 3 and len(emb) < 4:
            est = alpha_small(np.unique(np.round(emb.points, 14), axis=0), emb.embedding)
            alpha, flag = est.value, "degenerate"
        else:
            flag = "rank gate failed; only alpha >= pi/2 is known"
    keep = np.arange(len(samples))
    if args.observable:
        diag = np.array([float(v) for v in args.observable.split(",")])
        if diag.size != circ.dim:
            raise InputError(f"observable needs {circ.dim} diagonal entries")
        cost = np.abs(evaluate(circ, samples.thetas)) ** 2 @ diag
        if args.cost_band is None:
            raise InputError("--observable needs --cost-band")
        keep = np.flatnonzero(cost <= cost.min() + args.cost_band)
    P = samples.thetas.shape[1]
    header = ["index"] + [f"theta{i}" for i in range(P)] + [f"x{i}" for i in range(emb.D)]
    rows = [[int(i)] + list(samples.thetas[i]) + list(emb.points[i]) for i in keep]
    note = (f"every state is within alpha={fmt(alpha)} of some guess" if alpha is not None
            else "alpha >= pi/2: samples span a proper subspace")
    comments = [note, f"embedding={emb.embedding} N={len(samples)} seed={args.seed}"]
    if flag:
        comments.append(flag)
    name = args.out or "init-guesses.csv"
    out.add(name, _csv_text(header, rows, comments))
    result = dict(res, alpha=alpha, flag=flag, exported=len(rows), file=name)
    out.add("export-init-guesses.json", _report("export-init-guesses", args, result))
    return f"{len(rows)} guesses -> {name}; {note}"


# parser --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bestapprox", description=__doc__.splitlines()[0])
    p.add_argument("--out-dir", default=os.environ.get(OUT_ENV, "."))
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_)
        sp.set_defaults(func=func)
        return sp

    sp = add("analyze-dea", cmd_analyze_dea, "redundancy scan of a circuit")
    sp.add_argument("--circuit", required=True)
    sp.add_argument("--theta", default="random:0", help="CSV file or random:SEED")
    sp.add_argument("--tol", type=float, default=None)
    sp.add_argument("--mode", default="exact", help="exact or shots:S:SEED")

    sp = add("build-mmec", cmd_build_mmec, "write a minimal maximally expressive circuit")
    sp.add_argument("--qubits", type=int, required=True)
    sp.add_argument("--phase", choices=("global", "free"), default="global")
    sp.add_argument("--compile", choices=("native", "cnot"), default="native")
    sp.add_argument("--out", default=None)

    for name, func, help_ in (
        ("estimate-alpha", cmd_estimate_alpha, "covering radius of a sampled circuit image"),
        ("convergence", cmd_convergence, "alpha(N) series and rate fit"),
        ("export-init-guesses", cmd_export_init_guesses, "sample bank for variational starts"),
    ):
        sp = add(name, func, help_)
        sp.add_argument("--circuit", required=True)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--embedding", choices=("auto", "bloch", "real"), default="auto")
        if name == "convergence":
            sp.add_argument("--n-list", default="64,128,256,512,1024,2048,4096,8192")
        else:
            sp.add_argument("--samples", type=eval_pow, default=1024)
        if name != "export-init-guesses":
            sp.add_argument("--method", default="voronoi", help="voronoi or mc:NTEST")
        else:
            sp.add_argument("--observable", default=None, help="diagonal entries, comma separated")
            sp.add_argument("--cost-band", type=float, default=None)
            sp.add_argument("--out", default=None)

    sp = add("volume", cmd_volume, "image volume by quadrature of sqrt(det g)")
    sp.add_argument("--circuit", required=True)
    sp.add_argument("--quad", default=None, help="trap:K or qmc:N:SEED")
    sp.add_argument("--gauge", choices=("hilbert", "bloch"), default="hilbert")

    sp = add("spiral-demo", cmd_spiral_demo, "volume bound vs Voronoi alpha for spirals")
    sp.add_argument("--n-list", default="1,2,4,8")
    sp.add_argument("--samples", type=eval_pow, default=2 ** 15)
    sp.add_argument("--seed", type=int, default=0)

    sp = add("bloch-demo", cmd_bloch_demo, "alpha(N) for the full Bloch sphere circuit")
    sp.add_argument("--n-list", default="64,128,256,512,1024,2048,4096,8192")
    sp.add_argument("--seed", type=int, default=0)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    out = Outputs(Path(args.out_dir))
    try:
        msg = args.func(args, out)
        written = out.commit()
    except (VoronoiError, np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InputError, CircuitError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    print(msg)
    if args.verbose:
        for w in written:
            print(f"wrote {w}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
