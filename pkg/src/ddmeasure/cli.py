"""Command-line front end.

Exit codes: 0 success, 1 bad input (parse or usage error), 2 a scheme that
cannot cover some term, 3 an internal invariant failure.
"""

from __future__ import annotations

import argparse
import math
import sys
from importlib import resources
from pathlib import Path

from ddmeasure import baselines, estimator
from ddmeasure.ddcore import (
    DDInvariantError,
    deserialize,
    export_dot,
    metrics,
    serialize,
    zeta_many,
)
from ddmeasure.ddcore.io import DDFormatError
from ddmeasure.optimize import OptimizeConfig
from ddmeasure.pauli import (
    HamiltonianFormatError,
    PauliError,
    PauliString,
    load_hamiltonian,
    parse_hamiltonian,
)
from ddmeasure.schemes import SCHEMES, DDScheme, make_scheme, monte_carlo
from ddmeasure.simulator import ground_state, make_rng

EXIT_OK, EXIT_INPUT, EXIT_INCOMPATIBLE, EXIT_INTERNAL = 0, 1, 2, 3
BUNDLED = ("h2_bk", "h2_jw")

# option name -> (type, default); shared by flags and config files
OPTIONS = {
    "scheme": (str, "dd"),
    "passes": (int, 10),
    "delta": (float, 0.5),
    "floor": (float, 1e-6),
    "shots": (int, 10000),
    "seed": (int, 0),
    "epsilon": (float, 0.1),
    "delta_conf": (float, 0.01),
    "output": (str, "text"),
    "threads": (int, 1),
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def load_input(name: str):
    """Path to a Hamiltonian file, or the name of a bundled fixture."""
    path = Path(name)
    if path.exists():
        return load_hamiltonian(path)
    stem = name[:-4] if name.endswith(".txt") else name
    if stem in BUNDLED:
        text = resources.files("ddmeasure").joinpath("data", f"{stem}.txt").read_text()
        return parse_hamiltonian(text)
    raise UsageError(f"no such Hamiltonian file: {name}")


def read_config(path: str) -> dict[str, str]:
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or key not in OPTIONS:
            raise UsageError(f"{path}:{lineno}: expected one of {', '.join(OPTIONS)} as key=value")
        values[key] = value.strip()
    return values


def resolve(args: argparse.Namespace) -> argparse.Namespace:
    """Fill unset flags from the config file, then from built-in defaults."""
    config = read_config(args.config) if args.config else {}
    for key, (kind, default) in OPTIONS.items():
        if getattr(args, key, None) is not None:
            continue
        try:
            value = kind(config[key]) if key in config else default
        except ValueError:
            raise UsageError(f"config value for {key} is not a valid {kind.__name__}") from None
        setattr(args, key, value)
    if args.scheme not in SCHEMES:
        raise UsageError(f"unknown scheme {args.scheme!r}")
    if args.output not in ("text", "kv"):
        raise UsageError("output must be text or kv")
    if args.threads < 1:
        raise UsageError("threads must be at least 1")
    if args.shots < 0:
        raise UsageError("shots must be non-negative")
    try:
        args.opt = OptimizeConfig(args.passes, args.delta, args.floor)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return args


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x) if math.isfinite(x) else str(x)
    return str(x)


def emit(args, rows: list[tuple[str, object]], text: str | None = None) -> None:
    """Print ``key=value`` lines, or the text rendering."""
    if args.output == "kv":
        for key, value in rows:
            print(f"{key}={_fmt(value)}")
    elif text is not None:
        print(text, end="" if text.endswith("\n") else "\n")
    else:
        width = max(len(k) for k, _ in rows)
        for key, value in rows:
            shown = f"{value:.6f}" if isinstance(value, float) and math.isfinite(value) else value
            print(f"{key:<{width}}  {shown}")


def _load_dd(args, h):
    try:
        dd = deserialize(Path(args.dd).read_text())
    except DDInvariantError as exc:
        raise UsageError(f"{args.dd}: {exc}") from None
    if dd.n != h.n:
        raise UsageError(f"diagram has {dd.n} qubits, Hamiltonian has {h.n}")
    return dd


def scheme_for(args, h):
    """The requested scheme, or the diagram loaded with ``--dd``."""
    if args.dd:
        return DDScheme(f"file:{args.dd}", h, _load_dd(args, h))
    return make_scheme(args.scheme, h, args.opt)


def _diagram(scheme):
    if not isinstance(scheme, DDScheme):
        raise UsageError(f"scheme {scheme.name} has no decision diagram; use dd-ldf")
    return scheme.dd


def _zeta_rows(h, scheme):
    terms = h.non_identity_terms()
    return [(f"zeta.{p}", float(z)) for (_, p), z in zip(terms, scheme.zetas)]


def cmd_build(args) -> int:
    h = load_input(args.hamiltonian)
    scheme = scheme_for(args, h)
    dd = _diagram(scheme)
    m = metrics(dd)
    if args.dd_out:
        Path(args.dd_out).write_text(serialize(dd))
    if args.dot:
        Path(args.dot).write_text(export_dot(dd))
    emit(args, [("scheme", scheme.name), ("vertices", m.vertex_count),
                ("edges", m.edge_count), ("paths", m.path_count)], text=str(m))
    return EXIT_OK


def cmd_variance(args) -> int:
    h = load_input(args.hamiltonian)
    scheme = scheme_for(args, h)
    e0, psi = ground_state(h)
    var = scheme.variance(psi)
    rows = [("scheme", scheme.name), ("energy", e0), ("variance", var),
            ("cost_diag", scheme.cost())]
    emit(args, rows + _zeta_rows(h, scheme) if args.output == "kv" else rows)
    return EXIT_OK


def cmd_estimate(args) -> int:
    h = load_input(args.hamiltonian)
    scheme = scheme_for(args, h)
    e0, psi = ground_state(h)
    res = monte_carlo(scheme, psi, args.shots, make_rng(args.seed))
    rows = [("scheme", scheme.name), ("shots", res.shots), ("seed", args.seed),
            ("exact_energy", e0), ("mean_estimate", res.mean), ("stderr", res.stderr),
            ("table_estimate", res.table_energy), ("uncovered_terms", res.uncovered)]
    rows += [(f"hits.{p}", int(c)) for (_, p), c in zip(h.non_identity_terms(), res.hits)]
    emit(args, rows)
    return EXIT_OK


def cmd_bounds(args) -> int:
    h = load_input(args.hamiltonian)
    terms = [p for _, p in h.non_identity_terms()]
    if args.dd:
        dd = _load_dd(args, h)
        name, z = f"file:{args.dd}", zeta_many(dd, terms)
    else:
        scheme = make_scheme(args.scheme, h, args.opt)
        name, z = scheme.name, scheme.zetas
    zero = [str(p) for p, zp in zip(terms, z) if zp <= 0]
    rows = [("scheme", name), ("epsilon", args.epsilon), ("delta_conf", args.delta_conf)]
    if zero:
        rows += [("max_inv_zeta", math.inf), ("shots_bound", math.inf),
                 ("zero_zeta", " ".join(zero))]
    else:
        rows += [("max_inv_zeta", float(1.0 / z.min())),
                 ("shots_bound", estimator.shots_bound_from_zetas(z, args.epsilon, args.delta_conf))]
    if args.bases:
        bases = [PauliString.from_str(ln) for ln in Path(args.bases).read_text().split()]
        rows.append(("bases", len(bases)))
        rows.append(("inconfidence", estimator.inconfidence_bound(terms, bases, args.epsilon)))
    emit(args, rows + [(f"zeta.{p}", float(zp)) for p, zp in zip(terms, z)])
    if zero:
        print(f"error: terms with zero coverage probability: {' '.join(zero)}", file=sys.stderr)
        return EXIT_INCOMPATIBLE
    return EXIT_OK


def cmd_groups(args) -> int:
    h = load_input(args.hamiltonian)
    grouping = baselines.ldf_grouping(h)
    rows = [("groups", len(grouping))]
    for k, g in enumerate(grouping.groups):
        rows.append((f"group.{k}.basis", str(g.basis)))
        rows.append((f"group.{k}.members", ",".join(str(h.terms[i][1]) for i in g.members)))
    emit(args, rows, text=grouping.report(h))
    return EXIT_OK


def cmd_export_dot(args) -> int:
    h = load_input(args.hamiltonian)
    dot = export_dot(_diagram(scheme_for(args, h)))
    if args.dot:
        Path(args.dot).write_text(dot)
    else:
        sys.stdout.write(dot)
    return EXIT_OK


def cmd_zeta(args) -> int:
    h = load_input(args.hamiltonian)
    dd = _diagram(scheme_for(args, h))
    paulis = [PauliString.from_str(p) for p in args.pauli] or [p for _, p in h.non_identity_terms()]
    z = zeta_many(dd, paulis)
    emit(args, [(f"zeta.{p}", float(v)) for p, v in zip(paulis, z)])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("hamiltonian", help="Hamiltonian file, or a bundled name (h2_bk, h2_jw)")
    common.add_argument("--config", help="key=value file; explicit flags take precedence")
    common.add_argument("--scheme", choices=SCHEMES, default=None)
    common.add_argument("--dd", help="use this serialized diagram instead of building one")
    common.add_argument("--passes", type=int, default=None, help="optimization passes (10)")
    common.add_argument("--delta", type=float, default=None, help="optimizer step size (0.5)")
    common.add_argument("--floor", type=float, default=None, help="minimum edge weight (1e-6)")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--output", choices=("text", "kv"), default=None)
    common.add_argument("--threads", type=int, default=None,
                        help="worker cap; all work is single-threaded, so 1 is always exact")

    parser = _Parser(prog="ddmeasure", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("build", parents=[common], help="build a diagram and print its metrics")
    p.add_argument("--dd-out", help="write the serialized diagram here")
    p.add_argument("--dot", help="write Graphviz source here")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("variance", parents=[common], help="exact variance on the ground state")
    p.set_defaults(func=cmd_variance)

    p = sub.add_parser("estimate", parents=[common], help="simulate shots on the ground state")
    p.add_argument("--shots", type=int, default=None)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("bounds", parents=[common], help="confidence and shot-count bounds")
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--delta-conf", dest="delta_conf", type=float, default=None)
    p.add_argument("--bases", help="file of measurement bases, whitespace separated")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("groups", parents=[common], help="LDF grouping report")
    p.set_defaults(func=cmd_groups)

    p = sub.add_parser("export-dot", parents=[common], help="print Graphviz source")
    p.add_argument("--dot", help="write to this file instead of stdout")
    p.set_defaults(func=cmd_export_dot)

    p = sub.add_parser("zeta", parents=[common], help="coverage probabilities")
    p.add_argument("--pauli", nargs="+", default=[], help="patterns (default: every term)")
    p.set_defaults(func=cmd_zeta)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        resolve(args)
        return args.func(args)
    except (UsageError, HamiltonianFormatError, PauliError, DDFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except estimator.IncompatibleDiagram as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INCOMPATIBLE
    except (DDInvariantError, AssertionError, ArithmeticError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
