"""Command-line entry point.

Exit status: 0 when every requested check passes, 2 when a check fails
(the report is still written), 1 on input or usage errors.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
from typing import Optional

import numpy as np

from . import __version__
from .errors import SymMarkovError

EXIT_OK, EXIT_USAGE, EXIT_FAIL = 0, 1, 2


class UsageError(Exception):
    pass


# input helpers

class Inputs:
    """Reads input files and records their digests for the manifest."""

    def __init__(self):
        self.digests = {}

    def read(self, path: str, flag: str) -> bytes:
        try:
            with open(path, "rb") as fh:
                data = fh.read()
        except OSError as exc:
            raise UsageError(f"{flag}: cannot read {path!r}: {exc.strerror}") from exc
        self.digests[flag] = {"path": os.path.basename(path), "sha256": hashlib.sha256(data).hexdigest()}
        return data

    def json(self, path: str, flag: str):
        try:
            return json.loads(self.read(path, flag))
        except json.JSONDecodeError as exc:
            raise UsageError(f"{flag}: {path!r} is not valid JSON ({exc.msg})") from exc

    def measure(self, args):
        from .measure import measure_from_dict
        if not args.input:
            raise UsageError("--input is required")
        doc = self.json(args.input, "--input")
        return measure_from_dict(doc, force=args.force)

    def value(self, arg: str, flag: str):
        """A JSON file, or the flag value itself parsed as JSON."""
        if os.path.isfile(arg):
            return self.json(arg, flag)
        try:
            return json.loads(arg)
        except json.JSONDecodeError:
            raise UsageError(f"{flag}: {arg!r} is neither a file nor inline JSON") from None

    def states(self, path: str, flag: str) -> list:
        doc = self.value(path, flag)
        if isinstance(doc, dict):
            if set(doc) - {"schema", "states"}:
                raise UsageError(f"{flag}: unknown fields {sorted(set(doc) - {'schema', 'states'})}")
            doc = doc.get("states")
        if not isinstance(doc, list) or not all(isinstance(v, int) for v in doc):
            raise UsageError(f"{flag}: expected a list of state indices")
        return doc

    def vector(self, path: str, flag: str, key: str):
        doc = self.value(path, flag)
        if isinstance(doc, dict):
            if set(doc) - {"schema", key}:
                raise UsageError(f"{flag}: unknown fields {sorted(set(doc) - {'schema', key})}")
            doc = doc.get(key)
        try:
            return np.asarray(doc, dtype=float)
        except (TypeError, ValueError) as exc:
            raise UsageError(f"{flag}: expected numbers under {key!r}") from exc


def _manifest(args, inputs: Inputs) -> dict:
    config = {k: v for k, v in sorted(vars(args).items()) if k not in ("func",) and v is not None}
    return {"toolkit": "symmarkov", "version": __version__, "command": args.command,
            "config": config, "inputs": inputs.digests}


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False, default=_default) + "\n"


def _default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _emit(args, inputs: Inputs, result: dict, passed: bool) -> int:
    doc = {"manifest": _manifest(args, inputs), "passed": bool(passed), "result": result}
    text = _dump(doc)
    target = getattr(args, "report", None) or (args.out if args.format == "json" else None)
    if target:
        with open(target, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK if passed else EXIT_FAIL


def _write_csv(path: Optional[str], header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    if path:
        with open(path, "w") as fh:
            fh.write(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())


# subcommands

def cmd_validate(args, inputs):
    from .measure import analyze_irreducibility, measure_to_dict
    m = inputs.measure(args)
    irr = analyze_irreducibility(m)
    result = {"states": m.n, "total_mass": m.total_mass(), "irreducible": irr.irreducible,
              "closed_set": list(irr.closed_set) if irr.closed_set is not None else None,
              "digest": m.digest(), "canonical": measure_to_dict(m)}
    return _emit(args, inputs, result, True)


def cmd_check(args, inputs):
    from .operators import markov_system, reversibility_battery
    m = inputs.measure(args)
    rep = reversibility_battery(markov_system(m), n_max=args.depth, tol=args.tol, seed=args.seed)
    return _emit(args, inputs, rep.to_dict(), rep.all_passed)


def cmd_spectrum(args, inputs):
    from .operators import laplacian_spectrum, markov_system, spectrum_P
    sysm = markov_system(inputs.measure(args))
    ev = spectrum_P(sysm)
    lap = laplacian_spectrum(sysm)
    ok = bool(ev[0] >= -1 - 1e-10 and ev[-1] <= 1 + 1e-10 and abs(ev[-1] - 1) <= 1e-10
              and lap[0] >= -1e-10)
    return _emit(args, inputs, {"P": ev, "laplacian": lap}, ok)


def cmd_energy(args, inputs):
    from .energy import EnergyForm, indicator_energy
    m = inputs.measure(args)
    if not args.indicator:
        raise UsageError("--indicator is required")
    A = inputs.states(args.indicator, "--indicator")
    r = indicator_energy(EnergyForm.from_measure(m), m, A, tol=args.tol)
    return _emit(args, inputs, {"set": sorted(set(A)), **r._asdict()}, True)


def cmd_harmonic(args, inputs):
    from .energy import harmonic_solve
    from .operators import markov_system
    sysm = markov_system(inputs.measure(args))
    if not args.boundary:
        raise UsageError("--boundary is required")
    doc = inputs.value(args.boundary, "--boundary")
    if not isinstance(doc, dict) or set(doc) - {"schema", "states", "values"}:
        raise UsageError('--boundary: expected {"states": [...], "values": [...]}')
    h = harmonic_solve(sysm, doc.get("states", []), doc.get("values", []))
    interior = np.setdiff1d(np.arange(sysm.n), doc["states"])
    res = float(np.max(np.abs(sysm.P @ h - h)[interior])) if interior.size else 0.0
    ok = res <= args.tol * (1 + float(np.max(np.abs(h))))
    if args.format == "csv":
        _write_csv(args.out, ["state", "value"], [(i, repr(float(v))) for i, v in enumerate(h)])
        sys.stderr.write(_dump({"harmonic_residual": res, "passed": ok}))
        return EXIT_OK if ok else EXIT_FAIL
    return _emit(args, inputs, {"values": h, "harmonic_residual": res}, ok)


def cmd_equiv(args, inputs):
    from .equiv import EquivalenceData, laplacian_prime_identity, markov_prime_via_formula
    from .operators import markov_system
    sysm = markov_system(inputs.measure(args))
    if bool(args.q) == bool(args.r):
        raise UsageError("give exactly one of --q or --r")
    eq = (EquivalenceData(q=inputs.vector(args.q, "--q", "q")) if args.q
          else EquivalenceData(r=inputs.vector(args.r, "--r", "r")))
    f = np.random.default_rng(args.seed).standard_normal(sysm.n)
    rep = markov_prime_via_formula(sysm, eq, f)
    result = {"markov_prime": rep.residuals}
    ok = rep.passed(args.tol)
    if eq.is_product:
        lp = laplacian_prime_identity(sysm, eq, f)
        result["laplacian_prime_residual"] = lp.full_residual
        ok &= lp.passed(args.tol)
    return _emit(args, inputs, result, ok)


def cmd_simulate(args, inputs):
    from .operators import markov_system
    from .pathspace import sample_paths
    sysm = markov_system(inputs.measure(args))
    start = inputs.states(args.start, "--start") if args.start else [0]
    ens = sample_paths(sysm, start, args.horizon, args.paths, seed=args.seed)
    rows = ((p, k, int(s)) for p in range(ens.count) for k, s in enumerate(ens.paths[p]))
    if args.format == "csv":
        _write_csv(args.out, ["path_id", "step", "state"], rows)
        return EXIT_OK
    return _emit(args, inputs, {"digest": ens.digest(), "paths": ens.paths}, True)


def cmd_green(args, inputs):
    from .green import green_series, green_solve, kill
    from .operators import markov_system
    sysm = markov_system(inputs.measure(args))
    if not args.domain or not args.target:
        raise UsageError("--domain and --target are required")
    ks = kill(sysm, inputs.states(args.domain, "--domain"))
    A = inputs.states(args.target, "--target")
    if args.method == "solve":
        g = green_solve(ks, A)
        result = {"domain": ks.domain, "values": g.values, "residual": g.residual}
    else:
        s = green_series(ks, A, tol=args.tol)
        result = {"domain": ks.domain, "values": s.green.values, "terms": s.terms, "tail": s.tail}
    result["spectral_radius"] = ks.spectral_radius
    return _emit(args, inputs, result, True)


def cmd_discretize(args, inputs):
    from .discretize import certificates, discretize_ladder
    from .kernel import load_kernel
    from .measure import dumps_measure, loads_measure
    if not args.kernel:
        raise UsageError("--kernel is required")
    if os.path.isfile(args.kernel):
        inputs.read(args.kernel, "--kernel")
    spec = load_kernel(args.kernel)
    out = args.out or "discretized"
    os.makedirs(out, exist_ok=True)
    nets = discretize_ladder(spec, args.levels)
    roundtrip = True
    for net in nets:
        text = dumps_measure(net.measure)
        roundtrip &= loads_measure(text).digest() == net.measure.digest()
        with open(os.path.join(out, f"level_{net.level:02d}.json"), "w") as fh:
            fh.write(text)
    cert = certificates(spec, args.levels, nets=nets)
    cert["roundtrip"] = {"passed": bool(roundtrip)}
    ok = cert["passed"] and roundtrip
    doc = {"manifest": _manifest(args, inputs), "passed": bool(ok), "result": cert}
    with open(os.path.join(out, "certificates.json"), "w") as fh:
        fh.write(_dump(doc))
    return EXIT_OK if ok else EXIT_FAIL


def cmd_report(args, inputs):
    from .battery import dumps_report, run_battery
    rep = run_battery(seed=args.seed)
    doc = {"manifest": _manifest(args, inputs), **rep}
    text = dumps_report(doc)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK if rep["passed"] else EXIT_FAIL


COMMANDS = {
    "validate": (cmd_validate, "load a network and check the measure invariants"),
    "check": (cmd_check, "run the reversibility battery"),
    "spectrum": (cmd_spectrum, "eigenvalues of P and of the Laplacian"),
    "energy": (cmd_energy, "energy of an indicator function"),
    "harmonic": (cmd_harmonic, "solve a Dirichlet problem"),
    "equiv": (cmd_equiv, "check the transforms to an equivalent measure"),
    "simulate": (cmd_simulate, "sample paths of the chain"),
    "green": (cmd_green, "Green function of a killed window"),
    "discretize": (cmd_discretize, "dyadic discretization of a kernel"),
    "report": (cmd_report, "full property battery as one deterministic report"),
}


def _positive(kind):
    def parse(text):
        try:
            v = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid value {text!r}")
        if v <= 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text!r}")
        return v
    return parse


def _nonnegative_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer {text!r}")
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be nonnegative, got {text!r}")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="symmarkov", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"symmarkov {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (fn, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=fn)
        p.add_argument("--input", help="network JSON")
        p.add_argument("--force", action="store_true", help="skip measure validation")
        p.add_argument("--out", help="output file (directory for discretize)")
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--tol", type=_positive(float), default=1e-12)
        p.add_argument("--seed", type=_nonnegative_int, default=0)
        p.add_argument("--report", help="report file (defaults to --out or stdout)")
        if name == "check":
            p.add_argument("--depth", type=_nonnegative_int, default=6)
        if name == "energy":
            p.add_argument("--indicator", help="JSON list of states, inline or a file")
        if name == "harmonic":
            p.add_argument("--boundary", help='JSON {"states": [...], "values": [...]}')
        if name == "equiv":
            p.add_argument("--q", help="JSON product factor q")
            p.add_argument("--r", help="JSON pair factor r")
        if name == "simulate":
            p.add_argument("--start", help="JSON list of start states, inline or a file")
            p.add_argument("--horizon", type=_nonnegative_int, default=10)
            p.add_argument("--paths", type=_positive(int), default=1000)
        if name == "green":
            p.add_argument("--domain", help="JSON list of window states, inline or a file")
            p.add_argument("--target", help="JSON list of target states, inline or a file")
            p.add_argument("--method", choices=("solve", "series"), default="solve")
        if name == "discretize":
            p.add_argument("--kernel", help="expression, or path to a JSON/TOML kernel spec")
            p.add_argument("--levels", type=_positive(int), default=3)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    inputs = Inputs()
    try:
        return args.func(args, inputs)
    except UsageError as exc:
        sys.stderr.write(f"symmarkov {args.command}: {exc}\n")
        return EXIT_USAGE
    except (SymMarkovError, ValueError, IndexError) as exc:
        sys.stderr.write(f"symmarkov {args.command}: {type(exc).__name__}: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
