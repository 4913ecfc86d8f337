import json
import os
import struct

import pytest

from apvar import cli
from apvar.arith import build_arith_tables
from apvar.forms import delta_coefficients_exact


def run_cli(tmp_path, *argv):
    return cli.main(["--cache-dir", str(tmp_path)] + list(argv))


def run_sub(tmp_path, sub, *argv):
    """Run a subcommand with cache dir and output paths inside tmp_path."""
    out = tmp_path / ("%s.csv" % sub)
    code = cli.main([sub, "--out", str(out), "--cache-dir", str(tmp_path)]
                    + list(argv))
    data = out.read_text() if out.exists() else None
    json_path = tmp_path / ("%s.json" % sub)
    summary = json.loads(json_path.read_text()) if json_path.exists() else None
    return code, data, summary


class TestCache:
    def test_round_trip(self, tmp_path):
        n = 500
        tables = build_arith_tables(n)
        tau = delta_coefficients_exact(n)
        path = tmp_path / "apvar-500.tab"
        cli.write_cache(str(path), tables, tau)
        tables2, hecke2 = cli.read_cache(str(path))
        assert tables2.n_max == n
        assert list(tables2.tau) == list(tables.tau)
        assert list(tables2.mu) == list(tables.mu)
        assert list(tables2.phi) == list(tables.phi)
        assert hecke2.tau_exact == tau

    def test_checksum_detects_corruption(self, tmp_path):
        tables = build_arith_tables(100)
        tau = delta_coefficients_exact(100)
        path = tmp_path / "apvar-100.tab"
        cli.write_cache(str(path), tables, tau)
        blob = bytearray(path.read_bytes())
        blob[40] ^= 0xFF
        path.write_bytes(bytes(blob))
        with pytest.raises(ValueError, match="checksum"):
            cli.read_cache(str(path))

    def test_version_mismatch_rejected(self, tmp_path):
        tables = build_arith_tables(100)
        tau = delta_coefficients_exact(100)
        path = tmp_path / "apvar-100.tab"
        cli.write_cache(str(path), tables, tau)
        blob = bytearray(path.read_bytes())
        blob[8:10] = struct.pack("<H", 99)
        # re-fix the checksum so only the version is wrong
        csum = cli._checksum(bytes(blob[:-8]))
        blob[-8:] = struct.pack("<Q", csum)
        path.write_bytes(bytes(blob))
        with pytest.raises(ValueError, match="version"):
            cli.read_cache(str(path))

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "apvar-1.tab"
        path.write_bytes(b"NOTATABL" + b"\0" * 64)
        with pytest.raises(ValueError, match="magic"):
            cli.read_cache(str(path))

    def test_negative_coefficients_survive(self, tmp_path):
        # tau(2) = -24 exercises the two's-complement path.
        tables = build_arith_tables(10)
        tau = delta_coefficients_exact(10)
        path = tmp_path / "apvar-10.tab"
        cli.write_cache(str(path), tables, tau)
        _, hecke = cli.read_cache(str(path))
        assert hecke.tau_exact[2] == -24


class TestSieveCommand:
    def test_writes_and_round_trips(self, tmp_path):
        code, csv_data, summary = run_sub(tmp_path, "sieve",
                                          "--n-max", "300")
        assert code == 0
        assert (tmp_path / "apvar-300.tab").exists()
        assert summary["results"][0]["round_trip"] is True
        assert csv_data.splitlines()[0] == \
            "n_max,path,bytes,checksum,round_trip"


class TestVoronoiCommand:
    def test_cusp_instance_passes(self, tmp_path):
        code, csv_data, summary = run_sub(
            tmp_path, "voronoi", "--seq", "cusp", "--q", "5", "--h", "2",
            "--x", "2000", "--big-h", "500")
        assert code == 0
        row = csv_data.splitlines()[1].split(",")
        assert float(row[-1]) <= 1e-5  # rel_diff column

    def test_tolerance_failure_exits_1(self, tmp_path, capsys):
        code, _, _ = run_sub(
            tmp_path, "voronoi", "--seq", "divisor", "--q", "4", "--h", "1",
            "--x", "2000", "--big-h", "500", "--tol", "1e-18")
        assert code == 1
        assert "FAIL" in capsys.readouterr().err


class TestVarianceCommand:
    def test_single_point(self, tmp_path):
        code, csv_data, summary = run_sub(
            tmp_path, "variance", "--seq", "cusp", "--x", "4000",
            "--q", "300")
        assert code == 0
        header = csv_data.splitlines()[0].split(",")
        assert header[:6] == ["X", "q", "H", "sequence", "exact",
                              "prediction"]
        assert header[-2:] == ["ratio", "regime"]
        assert any(c.startswith("budget_term_") for c in header)

    def test_determinism(self, tmp_path):
        args = ("variance", "--seq", "cusp", "--x", "4000", "--q", "300")
        _, first, _ = run_sub(tmp_path, *args)
        _, second, _ = run_sub(tmp_path, *args)
        assert first == second


class TestSweepCommand:
    def test_parallel_matches_serial(self, tmp_path):
        base = ("--x", "4000", "--q-min", "150", "--q-max", "1500",
                "--points", "3")
        _, serial, _ = run_sub(tmp_path, "sweep", *base, "--threads", "1")
        code, parallel, summary = run_sub(tmp_path, "sweep", *base,
                                          "--threads", "2")
        assert code == 0
        assert serial == parallel
        assert len(parallel.splitlines()) == 4  # header + 3 rows


class TestUsageErrors:
    def test_unknown_command_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            cli.main(["definitely-not-a-command"])
        assert exc.value.code == 2

    def test_missing_required_flag_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            cli.main(["voronoi", "--seq", "cusp"])
        assert exc.value.code == 2


class TestJsonSummary:
    def test_schema_fields(self, tmp_path):
        _, _, summary = run_sub(tmp_path, "mellin-check")
        assert set(summary) >= {"schema_version", "command", "params",
                                "results", "tolerances", "wall_time"}
        assert summary["command"] == "mellin-check"
        assert summary["schema_version"] == 1
