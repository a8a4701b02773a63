import pytest

from repotopical.analyzer import CallEdge, FunctionInfo, ScriptRecord, analyze_script
from repotopical.serializer import (
    CLS,
    EDGE,
    MAX_TOKENS,
    SEP,
    read_token_file,
    serialize_code,
    serialize_dep,
    serialize_doc,
    split_name,
    write_token_file,
)


class TestSplitName:
    @pytest.mark.parametrize(
        "name,expected",
        [
            ("os.path.join", ["os", "path", "join"]),
            ("train_model.py", ["train", "model", "py"]),
            ("getHTTPData", ["get", "http", "data"]),
            ("quickSort", ["quick", "sort"]),
            ("f", ["f"]),
            ("", []),
        ],
    )
    def test_cases(self, name, expected):
        assert split_name(name) == expected


class TestSerializeDep:
    def test_single_edge(self):
        record = ScriptRecord(path="x.py", functions=[FunctionInfo("x.f")])
        edges = [CallEdge("x.f", "os.path.join", "import")]
        seq = serialize_dep(record, edges)
        assert seq.tokens == [CLS, "f", EDGE, "os", "path", "join", SEP]
        assert seq.domain == "dep"

    def test_import_form_without_functions(self):
        record = ScriptRecord(path="x.py", imports=["os"])
        seq = serialize_dep(record, [])
        assert seq.tokens == [CLS, SEP, "os"]

    def test_import_form_with_functions_but_no_edges(self):
        record = ScriptRecord(
            path="x.py", imports=["json"], functions=[FunctionInfo("x.load_all")]
        )
        seq = serialize_dep(record, [])
        assert seq.tokens == [CLS, "load", "all", SEP, "json"]

    def test_truncated_at_512(self):
        record = ScriptRecord(
            path="x.py", functions=[FunctionInfo(f"x.fn_{i}") for i in range(300)]
        )
        edges = [
            CallEdge(f"x.fn_{i}", f"library.module.call_{i}", "import") for i in range(300)
        ]
        seq = serialize_dep(record, edges)
        assert len(seq.tokens) == MAX_TOKENS
        assert seq.tokens[0] == CLS

    def test_only_own_edges_serialized_in_sorted_order(self):
        record = ScriptRecord(path="x.py", functions=[FunctionInfo("x.b"), FunctionInfo("x.a")])
        edges = [
            CallEdge("x.b", "zlib.compress", "import"),
            CallEdge("x.a", "json.dumps", "import"),
            CallEdge("other.f", "json.loads", "import"),
        ]
        seq = serialize_dep(record, edges)
        assert seq.tokens == [
            CLS, "a", EDGE, "json", "dumps", SEP, "b", EDGE, "zlib", "compress", SEP,
        ]


class TestSerializeDoc:
    def test_file_function_names_then_docstrings(self):
        record = ScriptRecord(
            path="train_model.py",
            functions=[FunctionInfo("train_model.fit", docstring="trains the net")],
        )
        seq = serialize_doc(record)
        assert seq.tokens == [CLS, "train", "model", "py", "fit", SEP, "trains", "the", "net"]

    def test_no_functions_no_docstrings(self):
        record = ScriptRecord(path="train_model.py")
        seq = serialize_doc(record)
        assert seq.tokens == [CLS, "train", "model", "py", SEP]

    def test_long_docstring_truncated(self):
        words = " ".join(f"word{i}" for i in range(1000))
        record = ScriptRecord(path="m.py", functions=[FunctionInfo("m.f", docstring=words)])
        seq = serialize_doc(record)
        assert len(seq.tokens) == MAX_TOKENS


class TestSerializeCode:
    def test_simple_statement(self):
        assert serialize_code("x = 1").tokens == [CLS, "x", "=", "1"]

    def test_empty_source(self):
        assert serialize_code("").tokens == [CLS]

    def test_any_source_capped(self):
        source = "\n".join(f"value_{i} = compute({i})" for i in range(500))
        assert len(serialize_code(source).tokens) <= MAX_TOKENS

    def test_identifiers_keep_underscores(self):
        assert serialize_code("train_model(x)").tokens == [CLS, "train_model", "(", "x", ")"]


class TestInvariants:
    def test_cls_first_everywhere(self):
        source = 'import os\ndef f():\n  "doc"\n  os.getcwd()\n'
        record = analyze_script(source, "m.py")
        edges = [CallEdge("m.f", "os.getcwd", "import")]
        for seq in (serialize_dep(record, edges), serialize_doc(record), serialize_code(source)):
            assert seq.tokens[0] == CLS
            assert len(seq.tokens) <= MAX_TOKENS

    def test_edge_token_only_in_dep_domain(self):
        source = "def f():\n  pass\n"
        record = analyze_script(source, "m.py")
        assert EDGE not in serialize_doc(record).tokens
        assert EDGE not in serialize_code(source).tokens

    def test_deterministic(self):
        source = (
            "import json\nimport os\n\ndef load(path):\n"
            '    """Load a file."""\n    return json.loads(os.read(path))\n'
        )
        record = analyze_script(source, "m.py")
        edges = [
            CallEdge("m.load", "json.loads", "import"),
            CallEdge("m.load", "os.read", "import"),
        ]
        a = (serialize_dep(record, edges).tokens, serialize_doc(record).tokens)
        b = (serialize_dep(record, edges).tokens, serialize_doc(record).tokens)
        assert a == b

    def test_dep_alternating_groups(self):
        record = ScriptRecord(
            path="x.py", functions=[FunctionInfo("x.a"), FunctionInfo("x.b")]
        )
        edges = [
            CallEdge("x.a", "json.dumps", "import"),
            CallEdge("x.b", "os.path.join", "import"),
        ]
        tokens = serialize_dep(record, edges).tokens
        assert tokens[0] == CLS
        groups = []
        current = []
        for tok in tokens[1:]:
            if tok == SEP:
                groups.append(current)
                current = []
            else:
                current.append(tok)
        assert current == []  # sequence ends on a SEP group boundary
        for group in groups:
            assert group.count(EDGE) == 1  # caller [C] callee per group


class TestTokenFileIO:
    def test_round_trip(self, tmp_path):
        source = "def f():\n    pass\n"
        record = analyze_script(source, "m.py")
        rows = [
            ("m.py", serialize_code(source)),
            ("m.py", serialize_doc(record)),
            ("m.py", serialize_dep(record, [])),
        ]
        path = tmp_path / "tokens.jsonl"
        write_token_file(rows, path)
        loaded = read_token_file(path)
        assert [(p, s.domain, s.tokens) for p, s in loaded] == [
            (p, s.domain, s.tokens) for p, s in rows
        ]
