"""Instance files, replay logs, and byte-deterministic reports.

Instances are JSON documents with keys n, m, N, A, B, Q, R, H, x0, xi and an
optional learn block {l, seed, mean, covariance_scale}. Reports are emitted
by a deterministic serializer: insertion-ordered keys and every float
rendered at 17 significant digits, so identical runs produce byte-identical
files. Replay logs are plain text, one transition per line.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import IoError, ParseError, ValidationError
from .model import ProblemInstance, make_instance, validate_instance
from .qlearn import ReplayLog, TransitionSample

FLOAT_FORMAT = ".17g"


@dataclass(frozen=True)
class LearnSettings:
    """Optional learn block of an instance file."""

    l: int | None = None
    seed: int | None = None
    mean: float = 0.0
    covariance_scale: float = 1.0


@dataclass(frozen=True)
class InstanceFile:
    instance: ProblemInstance
    learn: LearnSettings | None


def _require(doc: dict, key: str):
    if key not in doc:
        raise ParseError(f"key '{key}' is missing")
    return doc[key]


def _as_int(doc: dict, key: str) -> int:
    v = _require(doc, key)
    if isinstance(v, bool) or not isinstance(v, int):
        raise ParseError(f"key '{key}': expected an integer, found {type(v).__name__}")
    return v


def _as_matrix(value, key: str, rows: int, cols: int) -> np.ndarray:
    try:
        M = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"key '{key}': not numeric ({exc})") from exc
    if M.shape != (rows, cols):
        raise ParseError(f"key '{key}': expected a {rows}x{cols} matrix, found shape {M.shape}")
    return M


def _as_vector(value, key: str, dim: int) -> np.ndarray:
    try:
        v = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"key '{key}': not numeric ({exc})") from exc
    if v.shape != (dim,):
        raise ParseError(f"key '{key}': expected a length-{dim} array, found shape {v.shape}")
    return v


def load_instance_file(path: str | Path) -> InstanceFile:
    """Parse and validate an instance document.

    Shape checks run before numeric validation; every parse error names the
    offending key and index.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"document root: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise ParseError("document root: expected an object")

    n = _as_int(doc, "n")
    m = _as_int(doc, "m")
    N = _as_int(doc, "N")
    if n < 1 or m < 1 or N < 0:
        raise ParseError(f"dimensions out of range: n={n}, m={m}, N={N}")

    def matrix_list(key: str, rows: int, cols: int) -> list[np.ndarray]:
        raw = _require(doc, key)
        if not isinstance(raw, list):
            raise ParseError(f"key '{key}': expected an array of matrices")
        if len(raw) != N + 1:
            raise ParseError(f"key '{key}': expected length {N + 1}, found {len(raw)}")
        return [_as_matrix(entry, f"{key}[{i}]", rows, cols) for i, entry in enumerate(raw)]

    A = matrix_list("A", n, n)
    B = matrix_list("B", n, m)
    Q = _as_matrix(_require(doc, "Q"), "Q", n, n)
    R = _as_matrix(_require(doc, "R"), "R", m, m)
    H = _as_matrix(_require(doc, "H"), "H", n, n)
    x0 = _as_vector(_require(doc, "x0"), "x0", n)
    xi = _as_vector(_require(doc, "xi"), "xi", n)

    inst = make_instance(A, B, Q, R, H, x0, xi)
    report = validate_instance(inst)
    if not report.ok:
        first = report.failures()[0]
        raise ValidationError(f"instance check '{first.name}' failed: {first.detail}")

    settings = None
    if "learn" in doc:
        block = doc["learn"]
        if not isinstance(block, dict):
            raise ParseError("key 'learn': expected an object")
        unknown = set(block) - {"l", "seed", "mean", "covariance_scale"}
        if unknown:
            raise ParseError(f"key 'learn': unknown entries {sorted(unknown)}")
        settings = LearnSettings(
            l=block.get("l"),
            seed=block.get("seed"),
            mean=float(block.get("mean", 0.0)),
            covariance_scale=float(block.get("covariance_scale", 1.0)))
        if settings.covariance_scale <= 0:
            raise ParseError("key 'learn.covariance_scale': must be positive")
    return InstanceFile(instance=inst, learn=settings)


def load_instance(path: str | Path) -> ProblemInstance:
    """Parsed and validated instance (learn block ignored)."""
    return load_instance_file(path).instance


def _emit(obj, indent: int, out: list[str]) -> None:
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        items = list(obj.items())
        for i, (key, value) in enumerate(items):
            out.append(f'{pad}  "{key}": ')
            _emit(value, indent + 1, out)
            out.append(",\n" if i + 1 < len(items) else "\n")
        out.append(pad + "}")
    elif isinstance(obj, (list, tuple)):
        seq = list(obj)
        if not seq:
            out.append("[]")
            return
        flat = all(isinstance(v, (bool, int, float, np.integer, np.floating)) for v in seq)
        if flat:
            out.append("[" + ", ".join(_scalar(v) for v in seq) + "]")
            return
        out.append("[\n")
        for i, value in enumerate(seq):
            out.append(pad + "  ")
            _emit(value, indent + 1, out)
            out.append(",\n" if i + 1 < len(seq) else "\n")
        out.append(pad + "]")
    elif isinstance(obj, np.ndarray):
        _emit(obj.tolist(), indent, out)
    elif obj is None or isinstance(obj, (bool, int, float, str, np.integer, np.floating)):
        out.append(_scalar(obj))
    else:
        raise IoError(f"cannot serialize {type(obj).__name__}")


def _scalar(v) -> str:
    if v is None:
        return "null"
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        f = float(v)
        if not np.isfinite(f):
            raise IoError("non-finite value in report")
        return format(f, FLOAT_FORMAT)
    if isinstance(v, str):
        return json.dumps(v)
    raise IoError(f"cannot serialize {type(v).__name__}")


def dumps_report(report: dict) -> str:
    """Deterministic JSON text: insertion-ordered keys, floats at 17
    significant digits. Identical inputs give identical bytes."""
    out: list[str] = []
    _emit(report, 0, out)
    out.append("\n")
    return "".join(out)


def write_report(report: dict, path: str | Path) -> None:
    try:
        Path(path).write_text(dumps_report(report))
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def read_report(path: str | Path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"document root: invalid JSON ({exc})") from exc


def instance_hash(inst: ProblemInstance) -> str:
    """SHA-256 of the canonical instance serialization."""
    doc = {
        "n": inst.n, "m": inst.m, "N": inst.N,
        "A": [a.tolist() for a in inst.A],
        "B": [b.tolist() for b in inst.B],
        "Q": inst.Q.tolist(), "R": inst.R.tolist(), "H": inst.H.tolist(),
        "x0": inst.x0.tolist(), "xi": inst.xi.tolist(),
    }
    return hashlib.sha256(dumps_report(doc).encode()).hexdigest()


def write_replay_log(samples, path: str | Path) -> None:
    """One transition per line: k, then x, u, lam, x_next entries as decimal
    floats at full precision."""
    lines = []
    for s in samples:
        fields = [str(int(s.k))]
        for block in (s.x, s.u, s.lam, s.x_next):
            fields.extend(format(float(v), FLOAT_FORMAT) for v in block)
        lines.append(" ".join(fields))
    try:
        Path(path).write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def read_replay_log(path: str | Path, n: int, m: int) -> ReplayLog:
    """Parse a replay log for an n-state, m-input plant."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    width = 1 + 3 * n + m
    samples = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != width:
            raise ParseError(f"line {lineno}: expected {width} fields, found {len(parts)}")
        try:
            k = int(parts[0])
            vals = [float(p) for p in parts[1:]]
        except ValueError as exc:
            raise ParseError(f"line {lineno}: {exc}") from exc
        x = np.array(vals[:n])
        u = np.array(vals[n:n + m])
        lam = np.array(vals[n + m:2 * n + m])
        x_next = np.array(vals[2 * n + m:])
        samples.append(TransitionSample(k=k, x=x, u=u, lam=lam, x_next=x_next))
    return ReplayLog(samples)
