"""Repository dependency graph assembly and call-path script sampling."""

from __future__ import annotations

import random
from dataclasses import dataclass

from .analyzer import CallEdge, ScriptRecord
from .errors import ValidationError

PAD = "<PAD>"

# Script caps studied in the replication presets; any other cap still works.
PRESET_CAPS = (2, 5, 10, 15)

DEFAULT_EXCLUDED_DIRS = ("vendor", "third_party", "site-packages", "node_modules")


def supported_caps() -> list[int]:
    """The preset sampled-script caps."""
    return list(PRESET_CAPS)


@dataclass
class DependencyGraph:
    """Function-level call edges plus the script ownership map."""

    script_paths: list[str]
    edges: list[CallEdge]
    script_of: dict[str, str]  # qualified function name -> owning script

    @classmethod
    def build(cls, records: list[ScriptRecord], edges: list[CallEdge]) -> "DependencyGraph":
        script_of = {
            fn.qualified_name: record.path
            for record in records
            for fn in record.functions
        }
        return cls(
            script_paths=[r.path for r in records],
            edges=list(edges),
            script_of=script_of,
        )

    def script_edges(self, allowed: set[str] | None = None) -> dict[str, list[str]]:
        """Script-level adjacency induced by internal function edges.

        An edge between two functions links their owning scripts; self loops
        are dropped. Neighbor lists are sorted for deterministic walks.
        """
        adjacency: dict[str, set[str]] = {}
        for edge in self.edges:
            if edge.kind != "internal":
                continue
            src = self.script_of.get(edge.caller)
            dst = self.script_of.get(edge.callee)
            if src is None or dst is None or src == dst:
                continue
            if allowed is not None and (src not in allowed or dst not in allowed):
                continue
            adjacency.setdefault(src, set()).add(dst)
        return {src: sorted(dsts) for src, dsts in adjacency.items()}


@dataclass
class ScriptSample:
    """Fixed-length list of script paths, PAD slots only at the tail."""

    paths: list[str]
    n: int

    @property
    def mask(self) -> list[bool]:
        return [p != PAD for p in self.paths]

    def real_paths(self) -> list[str]:
        return [p for p in self.paths if p != PAD]


def _is_excluded(path: str, excluded: tuple[str, ...]) -> bool:
    parts = path.split("/")[:-1]
    return any(part in excluded for part in parts)


def sample_scripts(
    graph: DependencyGraph,
    n: int,
    seed: int = 0,
    excluded_dirs: tuple[str, ...] = DEFAULT_EXCLUDED_DIRS,
) -> ScriptSample:
    """Pick ``n`` scripts by walking call paths, padding when short.

    Paths are traced depth-first along internal call edges at script
    granularity, starting from chain heads (scripts with outgoing but no
    incoming edges). When a path is exhausted and slots remain, a new start
    is drawn uniformly at random among unvisited candidates (seeded). Repos
    with too few chained scripts fall back to the remaining scripts sorted
    by path, then PAD up to ``n``.
    """
    if n < 1:
        raise ValidationError("sample size n must be >= 1")
    eligible = [p for p in graph.script_paths if not _is_excluded(p, excluded_dirs)]
    if not eligible:
        eligible = list(graph.script_paths)  # fully vendored repo: keep everything
    if not eligible:
        raise ValidationError("repository has no scripts to sample")

    allowed = set(eligible)
    adjacency = graph.script_edges(allowed)
    has_out = set(adjacency)
    has_in = {dst for dsts in adjacency.values() for dst in dsts}
    roots = sorted(has_out - has_in)
    candidates = roots if roots else sorted(has_out)

    rng = random.Random(seed)
    chosen: list[str] = []
    visited: set[str] = set()

    def walk(start: str) -> None:
        stack = [start]
        while stack and len(chosen) < n:
            script = stack.pop()
            if script in visited:
                continue
            visited.add(script)
            chosen.append(script)
            for neighbor in reversed(adjacency.get(script, [])):
                if neighbor not in visited:
                    stack.append(neighbor)

    while len(chosen) < n:
        remaining = [c for c in candidates if c not in visited]
        if not remaining:
            break
        walk(remaining[0] if len(remaining) == 1 else rng.choice(remaining))

    if len(chosen) < n:
        for path in sorted(allowed - visited):
            chosen.append(path)
            if len(chosen) == n:
                break

    chosen = chosen[:n]
    chosen.extend([PAD] * (n - len(chosen)))
    return ScriptSample(paths=chosen, n=n)
