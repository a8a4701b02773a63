"""Token sequences for the three per-script domains: code, docstrings and
the dependency graph. Every sequence starts with [CLS] and is cut at 512
tokens.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from .analyzer import CallEdge, ScriptRecord, module_name_for_path
from .errors import ValidationError

CLS = "[CLS]"
SEP = "[SEP]"
EDGE = "[C]"
PAD_TOKEN = "[PAD]"
MAX_TOKENS = 512

DOMAINS = ("code", "doc", "dep")

_CAMEL_RE = re.compile(r"[A-Z]+(?![a-z])|[A-Z][a-z0-9]*|[a-z0-9]+")
_WORD_RE = re.compile(r"[A-Za-z0-9]+")
_CODE_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*|[0-9]+(?:\.[0-9]+)?|\S")


@dataclass
class TokenSequence:
    domain: str
    tokens: list[str] = field(default_factory=list)
    max_len: int = MAX_TOKENS


def _capped(domain: str, tokens: list[str]) -> TokenSequence:
    return TokenSequence(domain=domain, tokens=tokens[:MAX_TOKENS])


def split_name(name: str) -> list[str]:
    """Split a dotted identifier on '.', '_' and camelCase, lowercased.

    ``os.path.join`` -> [os, path, join]; ``train_model.py`` -> [train,
    model, py]; ``getHTTPData`` -> [get, http, data].
    """
    out: list[str] = []
    for part in re.split(r"[._]", name):
        out.extend(m.lower() for m in _CAMEL_RE.findall(part))
    return out


def word_tokens(text: str) -> list[str]:
    return [w.lower() for w in _WORD_RE.findall(text)]


def _local_name(qualified: str, module: str) -> str:
    if module and qualified.startswith(module + "."):
        return qualified[len(module) + 1 :]
    return qualified


def serialize_dep(record: ScriptRecord, edges: list[CallEdge]) -> TokenSequence:
    """Dependency-domain sequence.

    With edges: [CLS], caller tokens, [C], callee tokens, [SEP] per first
    rank edge (edges whose caller is defined in this script), in (caller,
    callee) order. Without edges the import form is used: [CLS], method name
    tokens, [SEP], import tokens.
    """
    module = module_name_for_path(record.path)
    own = {fn.qualified_name for fn in record.functions}
    mine = sorted(
        (e for e in edges if e.caller in own), key=lambda e: (e.caller, e.callee)
    )
    tokens = [CLS]
    if mine:
        for edge in mine:
            tokens.extend(split_name(_local_name(edge.caller, module)))
            tokens.append(EDGE)
            tokens.extend(split_name(edge.callee))
            tokens.append(SEP)
            if len(tokens) >= MAX_TOKENS:
                break
    else:
        for fn in record.functions:
            tokens.extend(split_name(_local_name(fn.qualified_name, module)))
        tokens.append(SEP)
        for imp in record.imports:
            tokens.extend(split_name(imp))
    return _capped("dep", tokens)


def serialize_doc(record: ScriptRecord) -> TokenSequence:
    """Docstring-domain sequence: [CLS], file plus function name tokens,
    [SEP], concatenated docstring words."""
    module = module_name_for_path(record.path)
    tokens = [CLS]
    tokens.extend(split_name(Path(record.path).name))
    for fn in record.functions:
        tokens.extend(split_name(_local_name(fn.qualified_name, module)))
    tokens.append(SEP)
    for fn in record.functions:
        if fn.docstring:
            tokens.extend(word_tokens(fn.docstring))
    return _capped("doc", tokens)


def serialize_code(source: str) -> TokenSequence:
    """Code-domain sequence: [CLS] plus lexical source tokens."""
    return _capped("code", [CLS] + _CODE_RE.findall(source))


def serialize_script(
    record: ScriptRecord, edges: list[CallEdge], source: str
) -> dict[str, TokenSequence]:
    """All three domain sequences for one script.

    Scripts that failed to parse still get well-formed degenerate sequences
    (their collections are empty), so downstream stages stay total.
    """
    return {
        "code": serialize_code(source),
        "doc": serialize_doc(record),
        "dep": serialize_dep(record, edges),
    }


def write_token_file(entries: list[tuple[str, TokenSequence]], path) -> None:
    """One JSON object per (script, domain): {"path", "domain", "tokens"}."""
    with open(path, "w", encoding="utf-8") as fh:
        for script_path, seq in entries:
            fh.write(
                json.dumps(
                    {"path": script_path, "domain": seq.domain, "tokens": seq.tokens}
                )
                + "\n"
            )


def read_token_file(path) -> list[tuple[str, TokenSequence]]:
    entries = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                domain = obj["domain"]
                if domain not in DOMAINS:
                    raise ValidationError(f"unknown domain {domain!r}")
                entries.append(
                    (obj["path"], TokenSequence(domain=domain, tokens=list(obj["tokens"])))
                )
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ValidationError(f"{path}:{lineno}: bad token line: {exc}") from exc
    return entries
