"""Plain-text serialization and Graphviz export of decision diagrams.

Text format::

    ddmeasure-dd 1
    n <qubits> vertices <count> root <id> terminal <id>
    v <id> <layer>
    ...
    e <src> <dst> <label> <weight> <virtual 0|1>
    ...

Weights are written with 17 significant digits so a round trip is exact.
"""

from __future__ import annotations

from ddmeasure.ddcore.diagram import DDInvariantError, DecisionDiagram, Edge

MAGIC = "ddmeasure-dd 1"


class DDFormatError(ValueError):
    """Malformed serialized diagram."""


def serialize(dd: DecisionDiagram) -> str:
    lines = [MAGIC,
             f"n {dd.n} vertices {dd.vertex_count} root {dd.root} terminal {dd.terminal}"]
    lines += [f"v {v} {dd.layer[v]}" for v in dd.vertices]
    for v, label, e in dd.edges():
        lines.append(f"e {v} {e.target} {label} {e.weight:.17g} {int(e.virtual)}")
    return "\n".join(lines) + "\n"


def deserialize(text: str) -> DecisionDiagram:
    """Parse and validate; invariant violations raise :class:`DDInvariantError`."""
    rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if not rows or " ".join(rows[0]) != MAGIC:
        raise DDFormatError("missing ddmeasure-dd header")
    try:
        head = rows[1]
        if head[0::2] != ["n", "vertices", "root", "terminal"]:
            raise DDFormatError(f"bad header line {' '.join(head)!r}")
        n, count, root, terminal = (int(t) for t in head[1::2])
        layer: dict[int, int] = {}
        out: dict[int, dict[str, Edge]] = {}
        for row in rows[2:]:
            if row[0] == "v" and len(row) == 3:
                vid, lay = int(row[1]), int(row[2])
                if vid in layer:
                    raise DDFormatError(f"duplicate vertex {vid}")
                layer[vid] = lay
                out[vid] = {}
            elif row[0] == "e" and len(row) == 6:
                src, dst, label = int(row[1]), int(row[2]), row[3]
                if src not in out:
                    raise DDFormatError(f"edge from undeclared vertex {src}")
                if label in out[src]:
                    raise DDFormatError(f"vertex {src} has two {label} edges")
                if row[5] not in ("0", "1"):
                    raise DDFormatError(f"bad virtual flag {row[5]!r}")
                out[src][label] = Edge(dst, float(row[4]), row[5] == "1")
            else:
                raise DDFormatError(f"unrecognized record {' '.join(row)!r}")
    except (IndexError, ValueError) as exc:
        if isinstance(exc, DDFormatError):
            raise
        raise DDFormatError(f"malformed diagram: {exc}") from None
    if len(layer) != count:
        raise DDFormatError(f"header declares {count} vertices, found {len(layer)}")
    if root not in layer or terminal not in layer:
        raise DDFormatError("root or terminal not declared")
    dd = DecisionDiagram(n, root, terminal, layer, out)
    dd.validate()
    return dd


def _fmt_weight(w: float) -> str:
    return "" if w == 1.0 else f"{w:.3g}·"


def export_dot(dd: DecisionDiagram, name: str = "dd") -> str:
    """Graphviz source; edges read ``weight·Label``, virtual ones dashed."""
    lines = [f"digraph {name} {{", "  rankdir=TB;", '  node [shape=circle, label=""];']
    for v in dd.vertices:
        shape = ' [shape=box, label="1"]' if v == dd.terminal else ""
        lines.append(f"  v{v}{shape};")
    for v, label, e in dd.edges():
        attrs = [f'label="{_fmt_weight(e.weight)}{label}"']
        if e.virtual:
            attrs.append("style=dashed")
        lines.append(f"  v{v} -> v{e.target} [{', '.join(attrs)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


__all__ = ["DDFormatError", "DDInvariantError", "deserialize", "export_dot", "serialize"]
