"""Instance, replay, estimate and report files.

Instance files are JSON objects::

    {"format_version": 1, "n": 3, "target": [0.5, 0.25, 0.25],
     "sets": [{"members": [0, 1], "prob": 0.5}, {"members": [1, 2], "prob": 0.5}],
     "phi": 2.0}

State indices are 0-based. ``target`` may hold any positive weights; it is
normalized on load. Replay files hold one comparison per line, either
``i,j,winner`` for pairs or ``m1;m2;...;mk,winner`` for larger sets. Blank
lines and lines starting with ``#`` are skipped.
"""

import json
from pathlib import Path

import numpy as np

from .model import ComparisonDistribution, InstanceError, LssSample, TargetDistribution

__all__ = [
    "FORMAT_VERSION",
    "instance_to_dict",
    "instance_from_dict",
    "load_instance",
    "save_instance",
    "parse_replay_line",
    "load_replay",
    "format_replay_line",
    "save_replay",
    "dumps",
    "write_json",
    "matrix_to_dict",
    "load_estimate",
]

FORMAT_VERSION = 1


def instance_to_dict(target, comp, phi=None):
    d = {
        "format_version": FORMAT_VERSION,
        "n": comp.n,
        "target": target.probs.tolist(),
        "sets": [{"members": list(s), "prob": float(q)} for s, q in zip(comp.sets(), comp.probs)],
    }
    if phi is not None:
        d["phi"] = float(phi)
    return d


def instance_from_dict(d):
    """Returns ``(target, comp, phi)``; ``phi`` is None when absent."""
    try:
        n = int(d["n"])
        weights = np.asarray(d["target"], dtype=float)
        sets = [tuple(int(x) for x in row["members"]) for row in d["sets"]]
        probs = np.asarray([float(row["prob"]) for row in d["sets"]], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise InstanceError(f"malformed instance: {exc!r}") from exc
    if weights.size != n:
        raise InstanceError(f"target has {weights.size} entries, expected {n}")
    target = TargetDistribution.from_weights(weights)
    if probs.size:
        if np.any(probs <= 0):
            raise InstanceError("set probabilities must be positive")
        total = probs.sum()
        if abs(total - 1.0) > 1e-12:
            raise InstanceError(f"set probabilities sum to {total!r}")
        probs = probs / total
    comp = ComparisonDistribution(n, sets, probs if probs.size else None)
    phi = d.get("phi")
    return target, comp, None if phi is None else float(phi)


def load_instance(path):
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InstanceError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(d, dict):
        raise InstanceError(f"{path}: expected a JSON object")
    return instance_from_dict(d)


def save_instance(path, target, comp, phi=None):
    write_json(path, instance_to_dict(target, comp, phi))


def parse_replay_line(line):
    """``LssSample`` from one replay line, or None for blanks and comments."""
    line = line.strip()
    if not line or line.startswith("#"):
        return None
    fields = [f.strip() for f in line.split(",")]
    try:
        if len(fields) == 3:
            members = (int(fields[0]), int(fields[1]))
        elif len(fields) == 2:
            members = tuple(int(x) for x in fields[0].split(";"))
        else:
            raise ValueError("wrong number of fields")
        winner = int(fields[-1])
    except ValueError as exc:
        raise InstanceError(f"bad replay line {line!r}: {exc}") from exc
    if winner not in members:
        raise InstanceError(f"bad replay line {line!r}: winner not in set")
    return LssSample(members, winner)


def load_replay(path):
    samples = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            try:
                s = parse_replay_line(line)
            except InstanceError as exc:
                raise InstanceError(f"{path}:{lineno}: {exc}") from exc
            if s is not None:
                samples.append(s)
    return samples


def format_replay_line(sample):
    members, w = sample
    if len(members) == 2:
        return f"{members[0]},{members[1]},{w}"
    return f"{';'.join(str(x) for x in members)},{w}"


def save_replay(path, samples):
    with open(path, "w") as fh:
        for s in samples:
            fh.write(format_replay_line(s) + "\n")


def _default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj):
    return json.dumps(obj, indent=2, sort_keys=True, default=_default) + "\n"


def write_json(path, obj):
    Path(path).write_text(dumps(obj))


def matrix_to_dict(M, name="matrix"):
    M = np.asarray(M, dtype=float)
    return {"format_version": FORMAT_VERSION, "name": name, "shape": list(M.shape), "rows": M.tolist()}


def load_estimate(path):
    """Estimate distribution from a learn output file or a bare JSON list."""
    d = json.loads(Path(path).read_text())
    if isinstance(d, dict):
        d = d.get("result", d).get("estimate")
    if d is None:
        raise InstanceError(f"{path}: no estimate found")
    return TargetDistribution.from_weights(d)
