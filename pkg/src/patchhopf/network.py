"""Patch connectivity networks.

A network is the static environment of the patch model: ``n`` patches, a
symmetric connectivity matrix ``D`` with nonnegative off-diagonal dispersal
degrees and zero row sums, and a vector ``m`` of intrinsic growth rates.

Indices are 1-based in edge lists and files, 0-based in arrays.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ._io import write_json
from .errors import NetworkError, NetworkParseError

ROW_SUM_TOL = 1e-12

PAPER9_EDGES = (
    (1, 2, 3.0), (3, 6, 3.0), (7, 8, 3.0),
    (1, 4, 2.0), (4, 5, 2.0), (5, 6, 2.0), (6, 9, 2.0),
    (2, 3, 1.0), (4, 7, 1.0), (8, 9, 1.0),
    (2, 5, 4.0), (5, 8, 5.0),
)
PAPER9_M = (10.0, 8.0, 16.0, 20.0, 24.0, 12.0, 18.0, 6.0, 14.0)


@dataclass(frozen=True, eq=False)
class PatchNetwork:
    """Connectivity matrix ``D`` and growth rates ``m`` of an ``n``-patch model.

    Instances are immutable; arrays are flagged read-only. Use
    :func:`build_from_edges` (or :func:`load`) to get a validated network;
    the raw constructor accepts anything so that :func:`validate` can report
    on malformed input.
    """

    D: np.ndarray
    m: np.ndarray
    n: int = field(init=False)

    def __post_init__(self):
        D = np.array(self.D, dtype=float)
        m = np.array(self.m, dtype=float).reshape(-1)
        D.setflags(write=False)
        m.setflags(write=False)
        object.__setattr__(self, "D", D)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "n", int(m.size))

    @property
    def delta(self) -> float:
        """Total intrinsic growth, the sum of ``m``."""
        return float(np.sum(self.m))

    @property
    def edges(self) -> list[tuple[int, int, float]]:
        """Positive off-diagonal entries as 1-based ``(j, k, weight)`` with j < k."""
        out = []
        for j in range(self.n):
            for k in range(j + 1, self.n):
                w = float(self.D[j, k])
                if w != 0.0:
                    out.append((j + 1, k + 1, w))
        return out

    def with_m(self, m) -> "PatchNetwork":
        return build_from_edges(self.n, self.edges, m)

    def __eq__(self, other):
        if not isinstance(other, PatchNetwork):
            return NotImplemented
        return (
            self.n == other.n
            and np.array_equal(self.m, other.m)
            and self.edges == other.edges
        )

    def __hash__(self):
        return hash((self.n, tuple(self.m), tuple(self.edges)))


@dataclass
class ValidationReport:
    violations: list[tuple[str, str]]

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok

    def summary(self) -> str:
        if self.ok:
            return "ok"
        return "; ".join(f"{rule}: {detail}" for rule, detail in self.violations)


def is_connected(adjacency: np.ndarray) -> bool:
    """Breadth-first reachability over positive off-diagonal entries."""
    n = adjacency.shape[0]
    if n == 0:
        return False
    seen = np.zeros(n, dtype=bool)
    seen[0] = True
    queue = deque([0])
    while queue:
        j = queue.popleft()
        for k in np.nonzero(adjacency[j] > 0)[0]:
            if k != j and not seen[k]:
                seen[k] = True
                queue.append(k)
    return bool(seen.all())


def validate(net: PatchNetwork) -> ValidationReport:
    """Check the structural assumptions on ``D`` and ``m``.

    Rules reported: ``size``, ``shape``, ``symmetry``, ``quasi-positive``,
    ``row-sums``, ``connectivity`` and ``A2``.
    """
    violations = []
    D, m, n = net.D, net.m, net.n
    if n < 2:
        violations.append(("size", f"need at least 2 patches, got n={n}"))
    if D.shape != (n, n):
        violations.append(("shape", f"D has shape {D.shape}, expected ({n}, {n})"))
        return ValidationReport(violations)
    if n == 0:
        return ValidationReport(violations)
    if not (np.all(np.isfinite(D)) and np.all(np.isfinite(m))):
        violations.append(("finite", "D and m must be finite"))
        return ValidationReport(violations)

    asym = np.argwhere(D != D.T)
    if asym.size:
        j, k = asym[0]
        violations.append(
            ("symmetry", f"d_{j + 1}{k + 1}={D[j, k]!r} but d_{k + 1}{j + 1}={D[k, j]!r}")
        )
    off = D - np.diag(np.diag(D))
    neg = np.argwhere(off < 0)
    if neg.size:
        j, k = neg[0]
        violations.append(("quasi-positive", f"d_{j + 1}{k + 1}={D[j, k]!r} < 0"))
    rows = np.abs(D.sum(axis=1))
    if rows.max() > ROW_SUM_TOL:
        j = int(np.argmax(rows))
        violations.append(("row-sums", f"row {j + 1} sums to {D[j].sum()!r}"))
    if n >= 2 and not is_connected(off):
        violations.append(("connectivity", "dispersal graph is disconnected"))
    if not np.any(m > 0):
        violations.append(("A2", "A2: no favorable patch (all m_j <= 0)"))
    return ValidationReport(violations)


def _check(net: PatchNetwork) -> PatchNetwork:
    report = validate(net)
    if not report.ok:
        code = report.violations[0][0]
        raise NetworkError(report.summary(), code=f"invalid-network-{code.lower()}")
    return net


def build_from_edges(
    n: int, edges: Iterable[Sequence[float]], m: Sequence[float]
) -> PatchNetwork:
    """Assemble ``D`` from a 1-based undirected edge list.

    The diagonal is always the negative off-diagonal row sum. Raises
    :class:`NetworkError` on duplicate edges, bad indices, nonpositive weights
    or if the result violates any network invariant.
    """
    n = int(n)
    m = np.asarray(m, dtype=float).reshape(-1)
    if n < 0:
        raise NetworkError(f"n must be nonnegative, got {n}", code="invalid-network-size")
    if m.size != n:
        raise NetworkError(f"m has length {m.size}, expected {n}", code="invalid-network-shape")
    D = np.zeros((n, n))
    seen = set()
    for idx, edge in enumerate(edges):
        if len(edge) != 3:
            raise NetworkError(f"edge {idx}: expected (j, k, weight)", code="invalid-edge")
        j, k, w = edge
        if int(j) != j or int(k) != k:
            raise NetworkError(f"edge {idx}: indices must be integers", code="invalid-edge")
        j, k, w = int(j), int(k), float(w)
        if not (1 <= j <= n and 1 <= k <= n):
            raise NetworkError(f"edge {idx}: index out of range 1..{n}: ({j}, {k})", code="invalid-edge")
        if j == k:
            raise NetworkError(f"edge {idx}: self-loop on patch {j}", code="invalid-edge")
        if not (w > 0 and np.isfinite(w)):
            raise NetworkError(f"edge {idx}: weight must be positive, got {w!r}", code="invalid-edge")
        key = (min(j, k), max(j, k))
        if key in seen:
            raise NetworkError(f"edge {idx}: duplicate edge {key}", code="duplicate-edge")
        seen.add(key)
        D[j - 1, k - 1] = D[k - 1, j - 1] = w
    D[np.diag_indices(n)] = -D.sum(axis=1)
    return _check(PatchNetwork(D, m))


def paper_network_9() -> PatchNetwork:
    """The 9-patch network with growth rates summing to 128."""
    return build_from_edges(9, PAPER9_EDGES, PAPER9_M)


def grid_network(rows: int, cols: int, coupling: float, m: Sequence[float]) -> PatchNetwork:
    """4-neighbour lattice with uniform edge weight, row-major numbering."""
    m = np.asarray(m, dtype=float).reshape(-1)
    if rows < 1 or cols < 1 or rows * cols != m.size:
        raise NetworkError(
            f"grid {rows}x{cols} needs {rows * cols} growth rates, got {m.size}",
            code="dimension-mismatch",
        )
    if not coupling > 0:
        raise NetworkError(f"coupling must be positive, got {coupling!r}", code="invalid-edge")
    edges = []
    for i in range(rows):
        for j in range(cols):
            p = i * cols + j + 1
            if j + 1 < cols:
                edges.append((p, p + 1, coupling))
            if i + 1 < rows:
                edges.append((p, p + cols, coupling))
    return build_from_edges(rows * cols, edges, m)


def random_network(
    n: int,
    rng: np.random.Generator,
    edge_prob: float = 0.5,
    m_low: float = -2.0,
    m_high: float = 10.0,
    weight_high: float = 5.0,
) -> PatchNetwork:
    """Random connected network: a random spanning tree plus extra edges.

    Growth rates are uniform on ``[m_low, m_high]``; one patch is forced
    favorable so that the result always validates.
    """
    order = rng.permutation(n)
    pairs = set()
    for i in range(1, n):
        j = order[i]
        k = order[rng.integers(0, i)]
        pairs.add((min(j, k), max(j, k)))
    for j in range(n):
        for k in range(j + 1, n):
            if rng.random() < edge_prob:
                pairs.add((j, k))
    edges = [(j + 1, k + 1, float(rng.uniform(0.1, weight_high))) for j, k in sorted(pairs)]
    m = rng.uniform(m_low, m_high, size=n)
    if not np.any(m > 0):
        m[rng.integers(0, n)] = float(rng.uniform(0.5, max(m_high, 1.0)))
    return build_from_edges(n, edges, m)


_KEYS = {"n", "m", "edges"}


def to_dict(net: PatchNetwork) -> dict:
    return {
        "n": net.n,
        "m": [float(x) for x in net.m],
        "edges": [[j, k, w] for j, k, w in net.edges],
    }


def from_dict(data) -> PatchNetwork:
    if not isinstance(data, dict):
        raise NetworkParseError("top level: expected a JSON object")
    unknown = set(data) - _KEYS
    if unknown:
        raise NetworkParseError(f"unknown key(s): {', '.join(sorted(unknown))}")
    missing = _KEYS - set(data)
    if missing:
        raise NetworkParseError(f"missing key(s): {', '.join(sorted(missing))}")
    n = data["n"]
    if not isinstance(n, int) or isinstance(n, bool):
        raise NetworkParseError(f"n: expected integer, got {n!r}")
    m = data["m"]
    if not isinstance(m, list) or not all(_is_number(x) for x in m):
        raise NetworkParseError("m: expected a list of numbers")
    edges = data["edges"]
    if not isinstance(edges, list):
        raise NetworkParseError("edges: expected a list")
    seen = set()
    for idx, e in enumerate(edges):
        if not (isinstance(e, list) and len(e) == 3):
            raise NetworkParseError(f"edges[{idx}]: expected [j, k, weight]")
        j, k, w = e
        if not (isinstance(j, int) and isinstance(k, int)) or isinstance(j, bool) or isinstance(k, bool):
            raise NetworkParseError(f"edges[{idx}]: indices must be integers")
        if not _is_number(w):
            raise NetworkParseError(f"edges[{idx}]: weight must be a number")
        if j >= k:
            raise NetworkParseError(f"edges[{idx}]: expected j < k, got ({j}, {k})")
        if (j, k) in seen:
            raise NetworkParseError(f"edges[{idx}]: duplicate edge ({j}, {k})")
        seen.add((j, k))
    if n < 2:
        raise NetworkError(f"n={n}: need at least 2 patches", code="invalid-network-size")
    return build_from_edges(n, edges, m)


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def save(net: PatchNetwork, path) -> None:
    write_json(to_dict(net), path)


def load(path) -> PatchNetwork:
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise NetworkParseError(
            f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from None
    return from_dict(data)


def resolve(spec: str, m_file=None) -> PatchNetwork:
    """Resolve a builtin name or a file path to a network.

    Builtins are ``paper9`` and ``grid:RxC:coupling``; the grid family takes
    its growth rates from ``m_file`` (JSON list or whitespace/comma separated
    numbers).
    """
    if spec == "paper9":
        return paper_network_9()
    if spec.startswith("grid:"):
        try:
            _, dims, coupling = spec.split(":")
            rows, cols = (int(x) for x in dims.lower().split("x"))
            coupling = float(coupling)
        except ValueError:
            raise NetworkParseError(f"bad grid spec {spec!r}, expected grid:RxC:coupling") from None
        if m_file is None:
            raise NetworkParseError("grid networks need growth rates via --m-file")
        return grid_network(rows, cols, coupling, read_vector(m_file))
    return load(spec)


def read_vector(path) -> np.ndarray:
    """Read a numeric vector from a JSON list or a plain text/CSV file."""
    text = Path(path).read_text(encoding="utf-8").strip()
    if text.startswith("["):
        try:
            return np.asarray(json.loads(text), dtype=float).reshape(-1)
        except (json.JSONDecodeError, ValueError, TypeError) as exc:
            raise NetworkParseError(f"{path}: {exc}") from None
    try:
        return np.asarray([float(x) for x in text.replace(",", " ").split()])
    except ValueError as exc:
        raise NetworkParseError(f"{path}: {exc}") from None
