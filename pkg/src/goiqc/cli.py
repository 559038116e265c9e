"""Command-line front end: check, analyze, compile, simulate and verify λQ programs.

Exit status is 0 on success, 1 for problems with the input (syntax, typing,
deadlock, malformed files) and 2 when an internal invariant fails.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .circuit import Circuit, infer_inputs, parse_circuit_with_inputs, serialize, size
from .colorgraph import color_infer, is_acyclic
from .cpm import QCRegister, interp_circuit, mix
from .derivation import infer, label_key
from .errors import GoiqcError, InternalError
from .extcircuit import serialize_ext, size_ext, tau
from .ite_elim import eliminate
from .refeval import closure_mix, eval_full, machine_mix, qmsiam_run, register_closure
from .syntax import BIT, QBIT, parse_program, pretty, pretty_context, pretty_type
from .tokenmachine import MODES, input_env, output_env, run

DEFAULT_TOL = 1e-9


@dataclass
class PipelineReport:
    source: str
    source_sha256: str
    typing: str
    graph: dict = field(default_factory=dict)
    mode: Optional[str] = None
    sizes: dict = field(default_factory=dict)
    verification: dict = field(default_factory=dict)
    timings: Optional[dict] = None

    def to_json(self) -> str:
        d = asdict(self)
        if d["timings"] is None:
            del d["timings"]
        return json.dumps(d, indent=2, sort_keys=True)


class _Timer:
    def __init__(self):
        self.stages: dict = {}

    def __call__(self, name: str):
        timer = self

        class _Stage:
            def __enter__(self):
                self.t = time.perf_counter()

            def __exit__(self, *exc):
                timer.stages[name] = round(time.perf_counter() - self.t, 6)

        return _Stage()


# ---------------------------------------------------------------- helpers


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise GoiqcError(f"cannot read {path}: {exc.strerror}") from exc


def _load(path: str):
    text = _read(path)
    context, term = parse_program(text)
    d = infer(term, context)
    return text, d


def _zero_register(env: dict) -> QCRegister:
    labels = sorted(env, key=label_key)
    qs = [x for x in labels if env[x] == QBIT]
    psi = np.zeros(2 ** len(qs), complex)
    psi[0] = 1.0
    return QCRegister.make([(x, env[x]) for x in labels], psi, {x: 0 for x in labels if env[x] == BIT})


def _emit(args, text: str, obj) -> None:
    if args.format == "json":
        print(json.dumps(obj, indent=2, sort_keys=True) if not isinstance(obj, str) else obj)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


# ---------------------------------------------------------------- commands


def cmd_check(args) -> int:
    _, d = _load(args.file)
    judgment = f"{pretty_context(dict(d.context))} |- {pretty(d.term)} : {pretty_type(d.type)}".strip()
    _emit(args, f"ok: {pretty_type(d.type)}", {"ok": True, "type": pretty_type(d.type),
                                                   "judgment": judgment})
    return 0


def cmd_analyze(args) -> int:
    _, d = _load(args.file)
    cd, g = color_infer(d)
    ok, cycle = is_acyclic(g)
    verdict = "OK" if ok else "DEADLOCK"
    lines = [g.to_dot().rstrip(), f"synchronous: {verdict}"]
    if cycle:
        lines.append("cycle: " + " -> ".join(str(v) for v in cycle + cycle[:1]))
    points = [{"index": p.index, "kind": p.kind, "node": p.node, "atom": p.atom} for p in cd.sync_points]
    _emit(args, "\n".join(lines), {
        "synchronous": verdict, "cycle": cycle, "vertices": sorted(g.vertices),
        "edges": sorted(list(e) for e in g.edges), "syncPoints": points, "dot": g.to_dot()})
    return 0


def cmd_compile(args) -> int:
    _, d = _load(args.file)
    trace: Optional[list] = [] if args.trace else None
    res = run(d, args.mode, trace=trace)
    if trace is not None:
        for row in trace:
            print(json.dumps(row, sort_keys=True), file=sys.stderr)
    if res.deadlocked:
        print(f"error: compilation deadlocks in mode {args.mode}", file=sys.stderr)
        return 1
    env_in = input_env(res.config)
    if args.extended:
        sys.stdout.write(serialize_ext(res.circuit))
        return 0
    c = tau(res.circuit, env_in)
    if args.eliminate_ite:
        c = eliminate(c, env_in)
    if args.format == "json":
        from .circuit import circuit_to_json

        print(json.dumps({"inputs": {k: str(v) for k, v in sorted(env_in.items(), key=lambda kv: label_key(kv[0]))},
                          "outputs": {k: str(v) for k, v in sorted(output_env(res.config).items(),
                                                                   key=lambda kv: label_key(kv[0]))},
                          "circuit": circuit_to_json(c)}, indent=2, sort_keys=True))
    else:
        sys.stdout.write(serialize(c, env_in))
    return 0


def _state_from_json(obj: dict, env: dict) -> QCRegister:
    reg = obj.get("register", obj)
    qubits = list(reg.get("qubits", []))
    bits = {k: int(v) for k, v in reg.get("bits", {}).items()}
    amps = reg.get("amplitudes")
    if amps is None:
        psi = np.zeros(2 ** len(qubits), complex)
        psi[0] = 1.0
    else:
        psi = np.array([complex(*a) if isinstance(a, list) else complex(a) for a in amps])
    if len(psi) != 2 ** len(qubits):
        raise GoiqcError(f"{len(psi)} amplitudes for {len(qubits)} qubits")
    norm = np.linalg.norm(psi)
    if abs(norm - 1) > 1e-9:
        raise GoiqcError(f"state has norm {norm}")
    given = {**{q: QBIT for q in qubits}, **{b: BIT for b in bits}}
    if given != env:
        raise GoiqcError(f"state covers {sorted(given, key=label_key)}, circuit needs "
                         f"{sorted(env, key=label_key)}")
    return QCRegister.make([(q, QBIT) for q in qubits] + [(b, BIT) for b in bits], psi, bits)


def _state_json(state, env: dict) -> dict:
    labels = sorted(env, key=label_key)
    bits = [x for x in labels if env[x] == BIT]
    qubits = [x for x in labels if env[x] == QBIT]
    blocks = []
    for k, block in enumerate(state.blocks):
        values = {b: 1 - ((k >> (len(bits) - 1 - j)) & 1) for j, b in enumerate(bits)}
        p = float(np.trace(block).real)
        blocks.append({"bits": values, "probability": round(p, 12),
                       "density": [[[round(float(z.real), 12), round(float(z.imag), 12)] for z in row]
                                   for row in np.asarray(block)]})
    return {"qubits": qubits, "bits": bits, "object": list(state.obj), "blocks": blocks}


def cmd_simulate(args) -> int:
    c, header = parse_circuit_with_inputs(_read(args.circuit))
    env = header if header is not None else infer_inputs(c)
    if args.state:
        try:
            obj = json.loads(_read(args.state))
        except json.JSONDecodeError as exc:
            raise GoiqcError(f"{args.state}: {exc}") from exc
        reg = _state_from_json(obj, env)
    else:
        reg = _zero_register(env)
    from .circuit import typecheck_circuit

    out_env = typecheck_circuit(c, env)
    state = interp_circuit(c, env)(mix(reg))
    doc = _state_json(state, out_env)
    if args.format == "json":
        print(json.dumps(doc, indent=2, sort_keys=True))
    else:
        lines = [f"wires: {', '.join(f'{x}:{out_env[x]}' for x in sorted(out_env, key=label_key))}"]
        for b in doc["blocks"]:
            if b["probability"] > 0:
                lines.append(f"{b['bits']}  p={b['probability']:.6g}")
        print("\n".join(lines))
    return 0


def verify_file(path: str, mode: str = "sync-first", eliminate_ite: bool = False,
                tol: float = DEFAULT_TOL, timings: bool = False) -> PipelineReport:
    timer = _Timer()
    text = _read(path)
    with timer("typing"):
        context, term = parse_program(text)
        d = infer(term, context)
    report = PipelineReport(path, hashlib.sha256(text.encode()).hexdigest(), pretty_type(d.type), mode=mode)
    with timer("analysis"):
        _, g = color_infer(d)
        ok, cycle = is_acyclic(g)
    report.graph = {"acyclic": ok, "cycle": cycle}
    with timer("compile"):
        res = run(d, mode)
        if res.deadlocked:
            raise GoiqcError(f"compilation deadlocks in mode {mode}")
        env_in = input_env(res.config)
        c: Circuit = tau(res.circuit, env_in)
    report.sizes = {"extended": size_ext(res.circuit), "flattened": size(c)}
    if eliminate_ite:
        with timer("eliminate"):
            c = eliminate(c, env_in)
        report.sizes["eliminated"] = size(c)
    m = _zero_register(env_in)
    with timer("simulate"):
        compiled = interp_circuit(c, env_in)(mix(m))
    with timer("reference"):
        dist = eval_full(register_closure(m, d))
        reference = closure_mix(dist, d)
        machine = machine_mix(qmsiam_run(d, m))
    dt = compiled.trace_distance(reference)
    report.verification = {
        "traceDistance": dt,
        "machineTraceDistance": machine.trace_distance(reference),
        "tol": tol,
        "ok": bool(dt <= tol),
        "distribution": [{"value": str(cl), "weight": round(w, 12)} for cl, w in dist],
    }
    if timings:
        report.timings = timer.stages
    return report


def _verify_one(job):
    path, mode, elim, tol, timings = job
    try:
        return verify_file(path, mode, elim, tol, timings).to_json(), None, 0
    except GoiqcError as exc:
        return None, f"{path}: {exc}", 1
    except Exception as exc:  # noqa: BLE001 - reported as an internal failure
        return None, f"{path}: internal error: {exc!r}", 2


def cmd_verify(args) -> int:
    if args.dir:
        files = sorted(str(p) for p in Path(args.dir).glob("*.lq"))
        if not files:
            raise GoiqcError(f"no .lq files in {args.dir}")
    elif args.file:
        files = [args.file]
    else:
        raise GoiqcError("verify needs a file or --dir")
    jobs = [(f, args.mode, args.eliminate_ite, args.tol, args.timings) for f in files]
    if len(jobs) > 1:
        with ProcessPoolExecutor() as pool:
            results = list(pool.map(_verify_one, jobs))
    else:
        results = [_verify_one(jobs[0])]
    status = 0
    reports = []
    for (doc, err, code), path in zip(results, files):
        if err:
            print(f"error: {err}", file=sys.stderr)
            status = max(status, code)
            continue
        rep = json.loads(doc)
        reports.append(rep)
        if not rep["verification"]["ok"]:
            status = 2
    if args.format == "json":
        print(json.dumps(reports if args.dir else (reports[0] if reports else None), indent=2, sort_keys=True))
    else:
        for rep in reports:
            v = rep["verification"]
            print(f"{rep['source']}: {'OK' if v['ok'] else 'MISMATCH'} "
                  f"type={rep['typing']} trace-distance={v['traceDistance']:.3g} "
                  f"sizes={rep['sizes']} synchronous={'OK' if rep['graph']['acyclic'] else 'DEADLOCK'}")
            for item in v["distribution"]:
                print(f"  {item['weight']:.6g}  {item['value']}")
    return status


# ---------------------------------------------------------------- entry point


class _Parser(argparse.ArgumentParser):
    """Usage mistakes are user errors, so they exit with status 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="goiqc", description=__doc__.splitlines()[0])
    common = _Parser(add_help=False)
    common.add_argument("--format", choices=["text", "json"], default="text")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("check", parents=[common], help="parse and typecheck a .lq program")
    p.add_argument("file")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("analyze", parents=[common], help="dependency graph and deadlock verdict")
    p.add_argument("file")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("compile", parents=[common], help="compile a program to a .qc circuit")
    p.add_argument("file")
    p.add_argument("--mode", choices=MODES, default="sync-first")
    p.add_argument("--eliminate-ite", action="store_true")
    p.add_argument("--extended", action="store_true", help="print the extended circuit before flattening")
    p.add_argument("--trace", action="store_true", help="log every machine step to stderr as JSON")
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("simulate", parents=[common], help="run a .qc circuit on a state")
    p.add_argument("circuit")
    p.add_argument("state", nargs="?")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", parents=[common], help="compare compiled circuits with the reference semantics")
    p.add_argument("file", nargs="?")
    p.add_argument("--dir")
    p.add_argument("--mode", choices=MODES, default="sync-first")
    p.add_argument("--eliminate-ite", action="store_true")
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--timings", action="store_true", help="include wall-clock time per stage")
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except GoiqcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except InternalError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {exc!r}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
