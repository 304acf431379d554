"""Stable on-disk formats: JSON for models and patterns, DOT, trajectory CSV.

All JSON is written with sorted keys so identical inputs give identical
bytes.  CSV holds a header row of variable tokens with an optional leading
``trajectory`` column; floats use shortest round-trip representation.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .model import (Dbcm, Edge, LinearEquation, PatternGraph, Role,
                    TimeSeriesDataset, VariableId)

FORMAT_VERSION = 1


# ---------------------------------------------------------------------------
# Models


def model_to_dict(model: Dbcm) -> dict:
    out: dict = {
        "format_version": FORMAT_VERSION,
        "kind": "dbcm",
        "nodes": [
            {"id": v.token(), "role": r.value} for v, r in model.roles
        ],
        "edges": [
            [a.token(), b.token()] for a, b in sorted(model.edges)
        ],
    }
    if model.equations:
        out["equations"] = {
            v.token(): {
                "coefficients": {p.token(): c for p, c in eq.coefficients},
                "noise_sd": eq.noise_sd,
                "intercept": eq.intercept,
            }
            for v, eq in model.equations
        }
    return out


def model_from_dict(d: Mapping) -> Dbcm:
    if d.get("kind") != "dbcm":
        raise ValueError(f"not a model document: kind={d.get('kind')!r}")
    roles = {
        VariableId.parse(n["id"]): Role(n["role"]) for n in d["nodes"]
    }
    edges = {
        (VariableId.parse(a), VariableId.parse(b)) for a, b in d["edges"]
    }
    equations = None
    if "equations" in d:
        equations = {
            VariableId.parse(tok): LinearEquation.build(
                {VariableId.parse(p): float(c)
                 for p, c in eq["coefficients"].items()},
                float(eq["noise_sd"]),
                float(eq.get("intercept", 0.0)),
            )
            for tok, eq in d["equations"].items()
        }
    return Dbcm.build(roles, edges, equations)


# ---------------------------------------------------------------------------
# Patterns


def pattern_to_dict(g: PatternGraph, emc: Mapping | None = None) -> dict:
    out: dict = {
        "format_version": FORMAT_VERSION,
        "kind": "pattern",
        "nodes": [
            {"id": v.token(), "role": r.value} for v, r in g.roles
        ],
        "edges": [
            {"a": e.a.token(), "b": e.b.token(), "directed": e.directed}
            for e in sorted(g.edges, key=lambda e: (e.a, e.b, e.directed))
        ],
        "chain_links": [
            {"from": src.token(), "to": dst.token()}
            for src, dst in sorted(g.chain_links)
        ],
        "warnings": list(g.warnings),
    }
    if emc is not None:
        out["emc"] = dict(emc)
    return out


def pattern_from_dict(d: Mapping) -> PatternGraph:
    if d.get("kind") != "pattern":
        raise ValueError(f"not a pattern document: kind={d.get('kind')!r}")
    roles = {VariableId.parse(n["id"]): Role(n["role"]) for n in d["nodes"]}
    edges = {
        Edge.between(VariableId.parse(e["a"]), VariableId.parse(e["b"]),
                     bool(e["directed"]))
        for e in d["edges"]
    }
    links = {
        (VariableId.parse(l["from"]), VariableId.parse(l["to"]))
        for l in d.get("chain_links", ())
    }
    return PatternGraph.build(roles, edges, links, tuple(d.get("warnings", ())))


def write_json(doc: Mapping, path: str | Path) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def read_json(path: str | Path) -> dict:
    return json.loads(Path(path).read_text())


# ---------------------------------------------------------------------------
# DOT export


def pattern_to_dot(g: PatternGraph) -> str:
    """Graphviz rendering; cross-temporal links are dashed."""
    lines = ["digraph pattern {", "  rankdir=LR;"]
    for v, role in g.roles:
        shape = {"prime": "doublecircle", "integral": "circle"}.get(
            role.value, "ellipse")
        lines.append(
            f'  "{v.token()}" [shape={shape}, label="{v.token()}\\n({role.value})"];'
        )
    for e in sorted(g.edges, key=lambda e: (e.a, e.b, e.directed)):
        if e.directed:
            lines.append(f'  "{e.a.token()}" -> "{e.b.token()}";')
        else:
            lines.append(
                f'  "{e.a.token()}" -> "{e.b.token()}" [dir=none];'
            )
    for src, dst in sorted(g.chain_links):
        lines.append(
            f'  "{src.token()}" -> "{dst.token()}" [style=dashed];'
        )
    lines.append("}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Trajectory CSV


def dataset_to_csv(data: TimeSeriesDataset, path: str | Path,
                   include_trajectory: bool | None = None) -> None:
    """Header of variable tokens, one row per time step.

    The leading ``trajectory`` column appears when the dataset holds more
    than one run (or on request).
    """
    if include_trajectory is None:
        include_trajectory = len(data.trajectories) > 1
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = [v.token() for v in data.variables]
    if include_trajectory:
        header = ["trajectory"] + header
    writer.writerow(header)
    for traj_id, arr in data.trajectories:
        for row in arr:
            cells = [repr(float(x)) for x in row]
            if include_trajectory:
                cells = [traj_id] + cells
            writer.writerow(cells)
    Path(path).write_text(buf.getvalue())


def dataset_from_csv(paths: Sequence[str | Path] | str | Path,
                     sampling_interval: float = 1.0) -> TimeSeriesDataset:
    """Read one or more CSV files into a single multi-trajectory dataset.

    All files must share the same header.  Files without a trajectory column
    contribute one trajectory each, named after the file.
    """
    if isinstance(paths, (str, Path)):
        paths = [paths]
    variables: tuple[VariableId, ...] | None = None
    trajectories: list[tuple[str, np.ndarray]] = []
    for path in paths:
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"no such data file: {path}")
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise ValueError(f"empty data file: {path}") from None
            has_traj = header and header[0] == "trajectory"
            var_tokens = header[1:] if has_traj else header
            file_vars = tuple(VariableId.parse(t) for t in var_tokens)
            if variables is None:
                variables = file_vars
            elif file_vars != variables:
                raise ValueError(
                    f"header of {path} does not match the first file: "
                    f"{var_tokens} vs {[v.token() for v in variables]}"
                )
            groups: dict[str, list[list[float]]] = {}
            order: list[str] = []
            for row in reader:
                if not row:
                    continue
                tid = row[0] if has_traj else path.stem
                vals = [float(x) for x in (row[1:] if has_traj else row)]
                if len(vals) != len(variables):
                    raise ValueError(f"ragged row in {path}: {row}")
                if tid not in groups:
                    groups[tid] = []
                    order.append(tid)
                groups[tid].append(vals)
            for tid in order:
                if has_traj:
                    name = tid if len(paths) == 1 else f"{path.stem}:{tid}"
                else:
                    name = path.stem if len(paths) == 1 else f"{len(trajectories)}:{path.stem}"
                trajectories.append((name, np.asarray(groups[tid])))
    if variables is None:
        raise ValueError("no data files given")
    return TimeSeriesDataset(variables, tuple(trajectories), sampling_interval)
