"""Static analysis of Python sources: imports, definitions, docstrings and a
reduced static call graph.

Resolution is deliberately bounded: direct calls are resolved through local
imports, module-level definitions and same-class ``self``/``cls`` methods.
There is no flow analysis, duck typing or dynamic dispatch; unresolved calls
keep their raw attribute path.
"""

from __future__ import annotations

import ast
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ValidationError


@dataclass
class FunctionInfo:
    qualified_name: str
    docstring: str | None = None
    calls: list[str] = field(default_factory=list)


@dataclass
class ScriptRecord:
    """Per-file analysis result. ``parse_ok`` False means every collection
    is empty; a broken file never aborts the run."""

    path: str
    imports: list[str] = field(default_factory=list)
    functions: list[FunctionInfo] = field(default_factory=list)
    parse_ok: bool = True

    @property
    def import_roots(self) -> set[str]:
        return {name.split(".")[0] for name in self.imports}


@dataclass(frozen=True)
class CallEdge:
    caller: str
    callee: str
    kind: str  # internal | import | unresolved


def module_name_for_path(path: str) -> str:
    """Repo-relative file path to dotted module name.

    ``pkg/mod.py`` becomes ``pkg.mod``; ``pkg/__init__.py`` becomes ``pkg``;
    a top-level ``__init__.py`` has no package and maps to ``__init__``.
    """
    parts = list(Path(path).with_suffix("").parts)
    if parts[-1] == "__init__" and len(parts) > 1:
        parts = parts[:-1]
    return ".".join(parts)


def _package_parts(module: str, path: str) -> list[str]:
    parts = module.split(".") if module else []
    if Path(path).stem == "__init__":
        return parts
    return parts[:-1]


class _ImportTable:
    """Alias bindings plus the ordered, deduplicated import list."""

    def __init__(self, module: str, path: str):
        self._package = _package_parts(module, path)
        self.names: list[str] = []
        self.aliases: dict[str, str] = {}

    def _record(self, dotted: str) -> None:
        if dotted and dotted not in self.names:
            self.names.append(dotted)

    def add_import(self, node: ast.Import) -> None:
        for alias in node.names:
            self._record(alias.name)
            if alias.asname:
                self.aliases[alias.asname] = alias.name
            else:
                root = alias.name.split(".")[0]
                self.aliases.setdefault(root, root)

    def add_import_from(self, node: ast.ImportFrom) -> None:
        base = self._resolve_base(node)
        for alias in node.names:
            if alias.name == "*":
                # Star imports contribute the module only; bindings stay unknown.
                self._record(base)
                continue
            full = f"{base}.{alias.name}" if base else alias.name
            self._record(full)
            self.aliases[alias.asname or alias.name] = full

    def _resolve_base(self, node: ast.ImportFrom) -> str:
        if node.level == 0:
            return node.module or ""
        # Relative import: climb level-1 packages above the current one.
        up = node.level - 1
        anchor = self._package[: len(self._package) - up] if up <= len(self._package) else []
        parts = list(anchor)
        if node.module:
            parts.extend(node.module.split("."))
        return ".".join(parts)


def _call_chain(func: ast.expr) -> list[str] | None:
    """Dotted name path of a call target, or None when not a plain chain."""
    parts: list[str] = []
    node = func
    while isinstance(node, ast.Attribute):
        parts.append(node.attr)
        node = node.value
    if isinstance(node, ast.Name):
        parts.append(node.id)
        parts.reverse()
        return parts
    return None


def _iter_nodes(root: ast.AST):
    """Iterative pre-order walk; explicit stack so deep trees cannot blow the
    interpreter recursion limit."""
    stack = [root]
    while stack:
        node = stack.pop()
        yield node
        children = list(ast.iter_child_nodes(node))
        children.reverse()
        stack.extend(children)


_DEF_NODES = (ast.FunctionDef, ast.AsyncFunctionDef)
_SCOPE_NODES = _DEF_NODES + (ast.ClassDef,)


def _collect_call_chains(body_nodes: list[ast.AST]) -> list[list[str]]:
    """Call chains in the given statements, not descending into nested defs
    or classes (those own their calls)."""
    chains: list[list[str]] = []
    stack = list(reversed(body_nodes))
    while stack:
        node = stack.pop()
        if isinstance(node, _SCOPE_NODES):
            continue
        if isinstance(node, ast.Call):
            chain = _call_chain(node.func)
            if chain is not None:
                chains.append(chain)
        children = list(ast.iter_child_nodes(node))
        children.reverse()
        stack.extend(children)
    return chains


def analyze_script(source: str, path: str) -> ScriptRecord:
    """Analyze one file. Syntax errors yield ``parse_ok=False`` and empty
    collections; the function itself never raises on bad content."""
    record = ScriptRecord(path=str(path))
    try:
        tree = ast.parse(source)
    except Exception:
        record.parse_ok = False
        return record

    module = module_name_for_path(path)
    imports = _ImportTable(module, path)

    # First pass: imports, definition sites, and per-class method tables.
    # (node, name parts below module, innermost enclosing class parts)
    pending: list[tuple[ast.AST, tuple[str, ...], tuple[str, ...] | None]] = []
    class_methods: dict[tuple[str, ...], set[str]] = {}
    defs: list[tuple[ast.AST, tuple[str, ...], tuple[str, ...] | None]] = []
    module_level_names: set[str] = set()

    for stmt in tree.body:
        if isinstance(stmt, _SCOPE_NODES):
            module_level_names.add(stmt.name)
    for node in _iter_nodes(tree):
        if isinstance(node, (ast.Import, ast.ImportFrom)):
            if isinstance(node, ast.Import):
                imports.add_import(node)
            else:
                imports.add_import_from(node)

    stack: list[tuple[ast.AST, tuple[str, ...], tuple[str, ...] | None]] = [
        (tree, (), None)
    ]
    while stack:
        node, prefix, cls = stack.pop()
        for child in ast.iter_child_nodes(node):
            if isinstance(child, ast.ClassDef):
                cls_parts = prefix + (child.name,)
                class_methods.setdefault(cls_parts, set()).update(
                    c.name for c in child.body if isinstance(c, _DEF_NODES)
                )
                stack.append((child, cls_parts, cls_parts))
            elif isinstance(child, _DEF_NODES):
                defs.append((child, prefix + (child.name,), cls))
                stack.append((child, prefix + (child.name,), cls))
            else:
                stack.append((child, prefix, cls))

    def resolve(chain: list[str], cls: tuple[str, ...] | None) -> str:
        root = chain[0]
        if root in ("self", "cls") and cls is not None and len(chain) > 1:
            if chain[1] in class_methods.get(cls, ()):  # same-class method
                return ".".join((module, *cls, *chain[1:]))
            return ".".join(chain)
        if root in imports.aliases:
            return ".".join([imports.aliases[root], *chain[1:]])
        if root in module_level_names:
            return ".".join((module, *chain))
        return ".".join(chain)

    defs.sort(key=lambda item: (item[0].lineno, item[0].col_offset))
    for node, parts, cls in defs:
        calls: list[str] = []
        chains: list[list[str]] = []
        # Decorators count as calls of the function they wrap.
        for dec in node.decorator_list:
            if isinstance(dec, (ast.Name, ast.Attribute)):
                chain = _call_chain(dec)
                if chain is not None:
                    chains.append(chain)
            else:
                chains.extend(_collect_call_chains([dec]))
        chains.extend(_collect_call_chains(list(node.body)))
        for chain in chains:
            name = resolve(chain, cls)
            if name not in calls:
                calls.append(name)
        record.functions.append(
            FunctionInfo(
                qualified_name=".".join((module, *parts)),
                docstring=ast.get_docstring(node),
                calls=calls,
            )
        )

    record.imports = imports.names
    return record


def discover_sources(root) -> list[Path]:
    """All ``.py`` files under ``root`` sorted by relative path; symlinks are
    not followed."""
    root = Path(root)
    if not root.is_dir():
        raise ValidationError(f"repository root not found: {root}")
    found = []
    for dirpath, dirnames, filenames in os.walk(root, followlinks=False):
        dirnames.sort()
        for name in sorted(filenames):
            full = Path(dirpath) / name
            if name.endswith(".py") and not full.is_symlink():
                found.append(full)
    return sorted(found, key=lambda p: p.relative_to(root).as_posix())


def analyze_repository(root) -> tuple[list[ScriptRecord], list[CallEdge]]:
    """Analyze every script under ``root`` and classify cross-script edges.

    A callee defined anywhere in the repository gives an ``internal`` edge;
    otherwise a callee whose root segment is imported by the calling script
    gives an ``import`` edge; the rest are ``unresolved``.
    """
    root = Path(root)
    records = []
    for file in discover_sources(root):
        source = file.read_bytes().decode("utf-8", errors="replace")
        records.append(analyze_script(source, file.relative_to(root).as_posix()))

    defined = {
        fn.qualified_name for record in records for fn in record.functions
    }
    edges: set[CallEdge] = set()
    for record in records:
        roots = record.import_roots
        for fn in record.functions:
            for callee in fn.calls:
                if callee in defined:
                    kind = "internal"
                elif callee.split(".")[0] in roots:
                    kind = "import"
                else:
                    kind = "unresolved"
                edges.add(CallEdge(caller=fn.qualified_name, callee=callee, kind=kind))
    ordered = sorted(edges, key=lambda e: (e.caller, e.callee))
    return records, ordered


def analysis_to_dict(records: list[ScriptRecord], edges: list[CallEdge]) -> dict:
    return {
        "scripts": [
            {
                "path": r.path,
                "imports": r.imports,
                "functions": [
                    {
                        "qualified_name": f.qualified_name,
                        "docstring": f.docstring,
                        "calls": f.calls,
                    }
                    for f in r.functions
                ],
                "parse_ok": r.parse_ok,
            }
            for r in records
        ],
        "edges": [
            {"caller": e.caller, "callee": e.callee, "kind": e.kind} for e in edges
        ],
    }


def analysis_from_dict(obj: dict) -> tuple[list[ScriptRecord], list[CallEdge]]:
    try:
        records = [
            ScriptRecord(
                path=s["path"],
                imports=list(s["imports"]),
                functions=[
                    FunctionInfo(
                        qualified_name=f["qualified_name"],
                        docstring=f.get("docstring"),
                        calls=list(f["calls"]),
                    )
                    for f in s["functions"]
                ],
                parse_ok=bool(s["parse_ok"]),
            )
            for s in obj["scripts"]
        ]
        edges = [
            CallEdge(caller=e["caller"], callee=e["callee"], kind=e["kind"])
            for e in obj["edges"]
        ]
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed analysis payload: {exc}") from exc
    return records, edges


def write_analysis(records, edges, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(analysis_to_dict(records, edges), fh, indent=2, sort_keys=False)
        fh.write("\n")


def read_analysis(path) -> tuple[list[ScriptRecord], list[CallEdge]]:
    with open(path, encoding="utf-8") as fh:
        return analysis_from_dict(json.load(fh))
