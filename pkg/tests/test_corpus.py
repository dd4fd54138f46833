import http.server
import json
import re
import threading
from datetime import datetime, timezone

import pytest

from labrag import corpus as cp
from tests.conftest import FIXTURES

NOW = datetime(2025, 1, 1, tzinfo=timezone.utc)


def page(name: str) -> cp.RawPage:
    html = (FIXTURES / "html" / name).read_text("utf-8")
    return cp.RawPage(url=f"https://fixtures.local/{name}", html=html, fetched_at=NOW)


def golden():
    recs = []
    for line in (FIXTURES / "golden_docs.jsonl").read_text("utf-8").splitlines():
        if line.strip():
            recs.append(json.loads(line))
    return recs


class TestParsePage:
    def test_two_paragraphs_joined_by_space(self):
        doc = cp.parse_page(page("aldolase.html"))
        assert doc.normal_results == (
            "Normal results range between 1.0 to 7.5 units per liter "
            "(0.02 to 0.13 microkat/L). There is a slight difference "
            "between men and women."
        )
        assert doc.lab_name == "Aldolase blood test"

    def test_no_normal_results_heading(self):
        assert cp.parse_page(page("no_normal_results.html")) is None

    def test_empty_section_raises(self):
        with pytest.raises(cp.EmptySection):
            cp.parse_page(page("empty_section.html"))

    def test_list_items_joined_with_semicolons(self):
        doc = cp.parse_page(page("esr.html"))
        assert "; Males over 50: less than 20 mm/hr;" in doc.normal_results

    def test_tag_soup_tolerated(self):
        doc = cp.parse_page(page("tag_soup.html"))
        assert doc.lab_name == "Potassium blood test"
        assert doc.normal_results.startswith("The normal range is 3.7 to 5.2")

    def test_golden_documents_bit_exact(self):
        for rec in golden():
            if rec["expected"] == "EmptySection":
                with pytest.raises(cp.EmptySection):
                    cp.parse_page(page(rec["file"]))
            elif rec["expected"] is None:
                assert cp.parse_page(page(rec["file"])) is None
            else:
                doc = cp.parse_page(page(rec["file"]))
                assert doc.lab_name == rec["expected"]["lab_name"]
                assert doc.normal_results == rec["expected"]["normal_results"]

    def test_deterministic(self):
        a = cp.parse_page(page("esr.html"))
        b = cp.parse_page(page("esr.html"))
        assert a == b

    def test_extracted_text_clean(self):
        for rec in golden():
            if isinstance(rec["expected"], dict):
                doc = cp.parse_page(page(rec["file"]))
                assert not re.search(r"<[a-zA-Z/]", doc.normal_results)
                assert not re.search(r"\s\s", doc.normal_results)

    def test_untokenizable_input(self):
        raw = cp.RawPage(url="https://x.test/a", html="just plain text, no tags",
                         fetched_at=NOW)
        with pytest.raises(cp.MalformedHtml):
            cp.parse_page(raw)


class TestDocument:
    def test_format_document(self):
        doc = cp.LabDocument(lab_name="Aldolase blood test",
                             normal_results="Normal results range between 1.0 to 7.5.",
                             url="https://x.test/a")
        assert cp.format_document(doc) == (
            "Aldolase blood test: Normal results range between 1.0 to 7.5.")

    def test_trailing_whitespace_trimmed(self):
        doc = cp.LabDocument(lab_name="Aldolase blood test  ",
                             normal_results="x", url="https://x.test/a")
        assert cp.format_document(doc).startswith("Aldolase blood test: ")

    def test_empty_normal_results_rejected(self):
        with pytest.raises(ValueError):
            cp.LabDocument(lab_name="A", normal_results="  ", url="https://x.test/a")

    def test_doc_id_stable(self):
        a = cp.LabDocument(lab_name="Aldolase blood test", normal_results="x",
                           url="https://x.test/a")
        assert a.doc_id == cp.doc_id_for("aldolase BLOOD test")
        assert len(a.doc_id) == 16


class TestCorpusIo:
    def test_round_trip_identity(self, fixture_corpus, tmp_path):
        path = tmp_path / "corpus.jsonl"
        cp.write_corpus(fixture_corpus, path)
        again = cp.read_corpus(path)
        assert again == fixture_corpus
        path2 = tmp_path / "again.jsonl"
        cp.write_corpus(again, path2)
        assert path.read_bytes() == path2.read_bytes()

    def test_122_documents(self, fixture_corpus):
        assert len(fixture_corpus) == 122

    def test_duplicate_doc_id_rejected(self, tmp_path):
        doc = {"doc_id": cp.doc_id_for("a"), "lab_name": "a",
               "normal_results": "x", "url": "https://x.test/a"}
        path = tmp_path / "bad.jsonl"
        path.write_text(json.dumps(doc) + "\n" + json.dumps(doc) + "\n")
        with pytest.raises(cp.SchemaError) as err:
            cp.read_corpus(path)
        assert err.value.line == 2

    def test_unknown_field_rejected(self, tmp_path):
        doc = {"doc_id": cp.doc_id_for("a"), "lab_name": "a",
               "normal_results": "x", "url": "https://x.test/a", "extra": 1}
        path = tmp_path / "bad.jsonl"
        path.write_text(json.dumps(doc) + "\n")
        with pytest.raises(cp.SchemaError):
            cp.read_corpus(path)

    def test_empty_corpus_ok(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        cp.write_corpus(cp.Corpus(documents=(), source_tag="t"), path)
        assert len(cp.read_corpus(path)) == 0

    def test_missing_file(self, tmp_path):
        with pytest.raises(cp.IoError):
            cp.read_corpus(tmp_path / "nope.jsonl")


class _Handler(http.server.BaseHTTPRequestHandler):
    def do_GET(self):
        if self.path == "/missing":
            self.send_error(404)
            return
        body = f"<html><h1>Page {self.path}</h1></html>".encode()
        self.send_response(200)
        self.send_header("Content-Type", "text/html")
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):
        pass


@pytest.fixture()
def local_server():
    server = http.server.HTTPServer(("127.0.0.1", 0), _Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}"
    server.shutdown()


class TestCrawl:
    def test_fetches_pages(self, local_server):
        urls = [f"{local_server}/{p}" for p in ("a", "b", "c")]
        report = cp.crawl(urls, rate_limit=1000)
        assert len(report.pages) == 3
        assert not report.failures

    def test_deduplicates(self, local_server):
        url = f"{local_server}/a"
        report = cp.crawl([url, url], rate_limit=1000)
        assert len(report.pages) == 1

    def test_partial_failure_recorded(self, local_server):
        urls = [f"{local_server}/a", f"{local_server}/missing", f"{local_server}/b"]
        report = cp.crawl(urls, rate_limit=1000)
        assert len(report.pages) == 2
        assert len(report.failures) == 1
        assert report.failures[0][0].endswith("/missing")

    def test_all_failures_fatal(self, local_server):
        with pytest.raises(cp.CrawlFailed):
            cp.crawl([f"{local_server}/missing"], rate_limit=1000)

    def test_rate_limit_validated(self):
        with pytest.raises(ValueError):
            cp.crawl(["https://x.test/a"], rate_limit=0)
