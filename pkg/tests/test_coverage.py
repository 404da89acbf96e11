import gzip
import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from bugsteps.coverage import emit_native_json, parse_gcov_json, parse_native_json
from bugsteps.errors import MalformedCoverage
from bugsteps.model import StatementId


def gcov_doc(files):
    return json.dumps({"format_version": "1", "files": files}).encode()


class TestGcovJson:
    def test_count_filter(self):
        doc = gcov_doc([
            {
                "file": "f.c",
                "lines": [
                    {"line_number": 5, "count": 0, "function_name": "main"},
                    {"line_number": 6, "count": 3, "function_name": "main"},
                    {"line_number": 9, "count": 1, "function_name": "helper"},
                ],
            }
        ])
        assert parse_gcov_json(doc) == {StatementId("f.c", 6), StatementId("f.c", 9)}

    def test_empty_files(self):
        assert parse_gcov_json(gcov_doc([])) == frozenset()

    def test_duplicate_line_records_union(self):
        # oracle: manual set union over records with count > 0
        doc = gcov_doc([
            {
                "file": "f.c",
                "lines": [
                    {"line_number": 4, "count": 0},
                    {"line_number": 4, "count": 2},
                ],
            }
        ])
        parsed = parse_gcov_json(doc)
        assert parsed == {StatementId("f.c", 4)}
        assert len(parsed) == 1

    def test_gzip_compressed(self):
        doc = gcov_doc([{"file": "g.c", "lines": [{"line_number": 2, "count": 7}]}])
        assert parse_gcov_json(gzip.compress(doc)) == {StatementId("g.c", 2)}

    def test_function_metadata_kept(self):
        doc = gcov_doc([
            {"file": "f.c", "lines": [{"line_number": 3, "count": 1,
                                       "function_name": "run"}]}
        ])
        (stmt,) = parse_gcov_json(doc)
        assert stmt.function == "run"

    def test_source_root_normalization(self):
        doc = gcov_doc([
            {"file": "/src/llvm/lib/Foo.cpp", "lines": [{"line_number": 3, "count": 1}]},
            {"file": "/usr/include/stdio.h", "lines": [{"line_number": 9, "count": 5}]},
        ])
        parsed = parse_gcov_json(doc, source_root="/src/llvm")
        assert parsed == {StatementId("lib/Foo.cpp", 3)}

    def test_line_zero_dropped(self):
        doc = gcov_doc([{"file": "f.c", "lines": [{"line_number": 0, "count": 4}]}])
        assert parse_gcov_json(doc) == frozenset()

    def test_malformed_reports_offset(self):
        with pytest.raises(MalformedCoverage) as err:
            parse_gcov_json(b'{"files": [0,')
        assert err.value.offset is not None

    def test_missing_files_array(self):
        with pytest.raises(MalformedCoverage):
            parse_gcov_json(b"{}")


class TestNativeJson:
    def test_emit_parse_roundtrip(self):
        stmts = {
            StatementId("a.c", 1, "f"),
            StatementId("a.c", 9),
            StatementId("sub/b.c", 4, "g"),
        }
        assert parse_native_json(emit_native_json(stmts)) == stmts

    def test_emit_is_canonical(self):
        stmts = {StatementId("a.c", 2), StatementId("a.c", 1)}
        blob = emit_native_json(stmts)
        assert parse_native_json(blob) == stmts
        assert emit_native_json(parse_native_json(blob)) == blob

    def test_empty_statements(self):
        assert parse_native_json(b'{"version": 1, "statements": []}') == frozenset()

    def test_large_fixture_exact_count(self):
        stmts = {StatementId(f"d/f{i % 97}.c", i + 1) for i in range(10000)}
        assert len(stmts) == 10000
        assert len(parse_native_json(emit_native_json(stmts))) == 10000

    def test_bad_version(self):
        with pytest.raises(MalformedCoverage):
            parse_native_json(b'{"version": 2, "statements": []}')

    def test_line_zero_rejected(self):
        with pytest.raises(MalformedCoverage):
            parse_native_json(
                b'{"version": 1, "statements": [{"file": "a.c", "line": 0}]}'
            )

    @given(
        st.frozensets(
            st.builds(
                StatementId,
                file=st.sampled_from(["x.c", "y/z.c"]),
                line=st.integers(min_value=1, max_value=500),
                function=st.one_of(st.none(), st.sampled_from(["f", "g"])),
            ),
            max_size=40,
        )
    )
    def test_roundtrip_property(self, stmts):
        assert parse_native_json(emit_native_json(stmts)) == stmts
