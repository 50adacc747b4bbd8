"""Tests for novas.csvio module."""

import io
import json
import os
import tempfile
import unittest

import numpy as np

from novas.csvio import (
    ingest_csv,
    read_forecast_pairs,
    read_returns_csv,
    read_series,
    write_manifest,
    write_prices_csv,
    write_returns_csv,
)
from novas.errors import DomainError, FormatError
from novas.series import PriceSeries, ReturnSeries


class _TempDirTestCase(unittest.TestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.dir = self._tmp.name

    def tearDown(self):
        self._tmp.cleanup()

    def write(self, name: str, text: str) -> str:
        path = os.path.join(self.dir, name)
        with open(path, "w", encoding="utf-8") as f:
            f.write(text)
        return path


class TestIngestCsv(_TempDirTestCase):
    def test_reads_prices_and_dates(self):
        path = self.write("p.csv", "date,close\n2020-01-01,100\n2020-01-02,101.5\n")
        prices = ingest_csv(path)
        np.testing.assert_array_equal(prices.values, [100.0, 101.5])
        self.assertEqual(prices.labels, ("2020-01-01", "2020-01-02"))

    def test_empty_file(self):
        with self.assertRaises(FormatError) as cm:
            ingest_csv(self.write("empty.csv", ""))
        self.assertEqual(cm.exception.line, 1)

    def test_header_only(self):
        with self.assertRaises(FormatError) as cm:
            ingest_csv(self.write("h.csv", "date,close\n"))
        self.assertEqual(cm.exception.line, 2)

    def test_blank_field_line_number(self):
        path = self.write("b.csv", "date,close\n2020-01-01,100\n2020-01-02,\n2020-01-03,99\n")
        with self.assertRaises(FormatError) as cm:
            ingest_csv(path)
        self.assertEqual(cm.exception.line, 3)

    def test_unparsable_value(self):
        path = self.write("u.csv", "date,close\na,100\nb,abc\n")
        with self.assertRaises(FormatError) as cm:
            ingest_csv(path)
        self.assertEqual(cm.exception.line, 3)

    def test_nonpositive_close(self):
        path = self.write("n.csv", "date,close\na,100\nb,-1\nc,99\n")
        with self.assertRaises(DomainError) as cm:
            ingest_csv(path)
        self.assertEqual(cm.exception.index, 1)
        self.assertIn(":3:", str(cm.exception))

    def test_wrong_header(self):
        with self.assertRaises(FormatError):
            ingest_csv(self.write("w.csv", "day,price\na,1\nb,2\n"))

    def test_missing_file(self):
        with self.assertRaises(FormatError):
            ingest_csv(os.path.join(self.dir, "missing.csv"))


class TestReturnsCsv(_TempDirTestCase):
    def test_round_trip_is_exact(self):
        returns = ReturnSeries(np.random.default_rng(0).standard_normal(50))
        path = os.path.join(self.dir, "sub", "r.csv")
        write_returns_csv(returns, path)
        np.testing.assert_array_equal(read_returns_csv(path).values, returns.values)

    def test_stream_output(self):
        buf = io.StringIO()
        write_returns_csv(ReturnSeries([0.5, -1.0]), buf)
        self.assertEqual(buf.getvalue(), "t,return\n1,0.5\n2,-1\n")

    def test_read_series_detects_layout(self):
        r = self.write("r.csv", "t,return\n1,0.5\n2,0.25\n")
        p = self.write("p.csv", "date,close\nx,1\ny,2\n")
        self.assertIsInstance(read_series(r), ReturnSeries)
        self.assertIsInstance(read_series(p), PriceSeries)

    def test_prices_without_labels(self):
        buf = io.StringIO()
        write_prices_csv(PriceSeries([1.0, 2.0]), buf)
        self.assertEqual(buf.getvalue(), "date,close\n1,1\n2,2\n")


class TestForecastPairs(_TempDirTestCase):
    def test_columns(self):
        path = self.write("cw.csv", "actual,small,large\n1,2,3\n4,5,6\n")
        data = read_forecast_pairs(path)
        np.testing.assert_array_equal(data["large"], [3.0, 6.0])


class TestManifest(_TempDirTestCase):
    def test_sorted_json(self):
        path = os.path.join(self.dir, "out", "manifest.json")
        write_manifest(path, {"seed": 1, "methods": ["ga"]})
        with open(path, encoding="utf-8") as f:
            text = f.read()
        payload = json.loads(text)
        self.assertEqual(payload["settings"], {"methods": ["ga"], "seed": 1})
        self.assertIn("numpy", payload["versions"])
        self.assertLess(text.index('"settings"'), text.index('"versions"'))


if __name__ == "__main__":
    unittest.main()
