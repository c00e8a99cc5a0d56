"""Deterministic writers for reports (JSON), clouds (CSV, PLY) and plot columns."""

from __future__ import annotations

import json
import math

import numpy as np

SCHEMA = "dualform.report/1"


def fmt(x) -> str:
    """17-significant-digit float text; exact on round trip."""
    return format(float(x), ".17g")


def _json_scalar(v):
    if isinstance(v, bool) or v is None:
        return "null" if v is None else ("true" if v else "false")
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return fmt(v) if math.isfinite(v) else "null"
    if isinstance(v, str):
        return json.dumps(v)
    raise TypeError(f"cannot serialize {type(v).__name__}")


def dumps(obj, indent=2, _level=0) -> str:
    """JSON with sorted keys and fixed float formatting."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{_json_scalar(str(k))}: {dumps(obj[k], indent, _level + 1)}"
                 for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        if all(not isinstance(x, (dict, list, tuple, np.ndarray)) for x in seq):
            return "[" + ", ".join(_json_scalar(x) for x in seq) + "]"
        items = [pad + dumps(x, indent, _level + 1) for x in seq]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    return _json_scalar(obj)


def measured(value, tol):
    """A numeric field together with the tolerance it is judged against."""
    return {"value": value, "tol": tol}


def cloud_csv(cloud, patch) -> str:
    m, dim = patch.param_dim, patch.metric.ambient_dim
    k = max(patch.codim, 1)
    header = ([f"u_{name}" for name in patch.params] + [f"s{j}" for j in range(k)]
              + [f"p{i}" for i in range(dim)] + [f"q{i}" for i in range(dim)] + ["rank", "generic"])
    lines = [",".join(header)]
    for pr in cloud.pairs:
        nums = list(pr.u) + list(pr.s) + list(pr.p) + list(pr.q)
        lines.append(",".join(fmt(x) for x in nums) + f",{pr.rank_q},{int(pr.generic)}")
    return "\n".join(lines) + "\n"


def ply(points) -> str:
    """ASCII PLY point cloud; coordinates beyond the third become extra properties."""
    points = np.atleast_2d(points)
    dim = points.shape[1] if points.size else 3
    names = ["x", "y", "z"] + [f"w{i}" for i in range(3, dim)]
    names = names[:dim]
    head = ["ply", "format ascii 1.0", f"element vertex {len(points) if points.size else 0}"]
    head += [f"property double {n}" for n in names]
    head.append("end_header")
    body = [" ".join(fmt(x) for x in row) for row in points] if points.size else []
    return "\n".join(head + body) + "\n"


def columns(rows, labels=None) -> str:
    """Whitespace-separated columns, optionally with a trailing label column."""
    out = []
    for i, row in enumerate(rows):
        line = " ".join(fmt(x) for x in row)
        if labels is not None:
            line += f" {labels[i]}"
        out.append(line)
    return "\n".join(out) + ("\n" if out else "")
