import json

import pytest

from vdbcode.cli import main
from conftest import EXAMPLE_CONSTRAINT_TEXT, RECIPROCAL_CONSTRAINT_TEXT

P29_TABLE_TEXT = """\
format=vdb-table-v1
L=3
k=3
mode=iid
p=0.29
"""

REFERENCE_PERBIT_TABLE_TEXT = """\
format=vdb-table-v1
L=3
k=2
mode=perbit
p_0=0.4485
p_1=0.4011
p_2=0.2266
"""


@pytest.fixture
def example_constraint_file(tmp_path):
    path = tmp_path / "constraint.txt"
    path.write_text(EXAMPLE_CONSTRAINT_TEXT)
    return path


@pytest.fixture
def reciprocal_file(tmp_path):
    path = tmp_path / "recip.txt"
    path.write_text(RECIPROCAL_CONSTRAINT_TEXT)
    return path


def test_sets_both_methods_agree(tmp_path):
    out = tmp_path / "sets.txt"
    assert main(["sets", "--L", "3", "--k", "2", "--method", "both", "--out", str(out)]) == 0
    body = out.read_text().splitlines()
    assert body[:3] == ["format=vdb-sets-v1", "L=3", "k=2"]
    assert body[3:] == ["1,001", "1,011", "2,010", "2,110", "3,011", "3,101", "4,100", "5,101", "6,110"]


def test_sets_single_bit(tmp_path):
    out = tmp_path / "sets.txt"
    assert main(["sets", "--L", "1", "--k", "1", "--out", str(out)]) == 0
    assert out.read_text().splitlines()[-1] == "1,1"


def test_sets_oracle_equivalence_midsize(tmp_path):
    out = tmp_path / "sets.txt"
    assert main(["sets", "--L", "10", "--k", "3", "--method", "both", "--out", str(out)]) == 0


def test_sets_rejects_bad_parameters(tmp_path):
    assert main(["sets", "--L", "0", "--k", "1", "--out", str(tmp_path / "x")]) == 2


def test_sets_method_disagreement_exits_3(tmp_path, monkeypatch):
    import vdbcode.cli as cli
    from vdbcode.setgen import PlacementSets

    broken = PlacementSets(3, 2, {m: frozenset() for m in range(1, 7)})
    monkeypatch.setattr(cli.setgen, "sets_fast", lambda L, k: broken)
    assert main(["sets", "--L", "3", "--k", "2", "--method", "both", "--out", str(tmp_path / "x")]) == 3


def test_bounds_csv(tmp_path):
    out = tmp_path / "bounds.csv"
    assert main(["bounds", "--L", "8", "--k", "3", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "m,z_exact,z_tight,z_loose"
    assert len(lines) == 225
    for line in lines[1:]:
        _, exact, tight, loose = map(int, line.split(","))
        assert exact <= tight <= loose


def test_encode_iid_reproduces_worked_example(tmp_path, example_constraint_file):
    out = tmp_path / "table.txt"
    assert main(["encode", "--constraint", str(example_constraint_file), "--mode", "iid", "--out", str(out)]) == 0
    body = out.read_text()
    p = float(next(l for l in body.splitlines() if l.startswith("p=")).split("=")[1])
    assert abs(p - 0.2180) <= 1e-3
    assert "# margin m=" in body


def test_encode_vacuous_constraint(tmp_path):
    path = tmp_path / "ones.txt"
    path.write_text("format=vdb-constraint-v1\nL=3\nk=2\n1,1\n")
    out = tmp_path / "table.txt"
    assert main(["encode", "--constraint", str(path), "--mode", "iid", "--out", str(out)]) == 0
    assert "p=1.0" in out.read_text()


def test_encode_perbit_then_verify(tmp_path, example_constraint_file):
    out = tmp_path / "table.txt"
    assert main(["encode", "--constraint", str(example_constraint_file), "--mode", "perbit", "--out", str(out)]) == 0
    assert main(["verify", "--constraint", str(example_constraint_file), "--table", str(out)]) == 0


def test_encode_rejects_bad_constraint_file(tmp_path, capsys):
    path = tmp_path / "bad.txt"
    path.write_text("format=vdb-constraint-v1\nL=3\nk=2\n1,0.1\n2,0.9\n")
    assert main(["encode", "--constraint", str(path), "--mode", "iid", "--out", str(tmp_path / "t")]) == 2
    assert "increases" in capsys.readouterr().err


def test_verify_reference_perbit_point(tmp_path, example_constraint_file):
    table = tmp_path / "reference.txt"
    table.write_text(REFERENCE_PERBIT_TABLE_TEXT)
    assert main(["verify", "--constraint", str(example_constraint_file), "--table", str(table)]) == 0


def test_verify_rejects_half(tmp_path, example_constraint_file):
    table = tmp_path / "half.txt"
    table.write_text("format=vdb-table-v1\nL=3\nk=2\nmode=iid\np=0.5\n")
    assert main(["verify", "--constraint", str(example_constraint_file), "--table", str(table)]) == 1


def test_verify_zero_table(tmp_path, example_constraint_file):
    table = tmp_path / "zero.txt"
    table.write_text("format=vdb-table-v1\nL=3\nk=2\nmode=iid\np=0\n")
    assert main(["verify", "--constraint", str(example_constraint_file), "--table", str(table)]) == 0


def test_simulate_p29_passes(tmp_path, reciprocal_file):
    table = tmp_path / "p29.txt"
    table.write_text(P29_TABLE_TEXT)
    out = tmp_path / "dist.csv"
    code = main([
        "simulate", "--table", str(table), "--constraint", str(reciprocal_file),
        "--trials", "10000", "--seed", "0", "--out", str(out),
    ])
    assert code == 0
    text = out.read_text()
    assert "# provenance=monte_carlo" in text
    assert "# trials=10000" in text
    assert "# generator=pcg64" in text


def test_simulate_zero_trials_usage_error(tmp_path, reciprocal_file):
    table = tmp_path / "p29.txt"
    table.write_text(P29_TABLE_TEXT)
    code = main([
        "simulate", "--table", str(table), "--constraint", str(reciprocal_file),
        "--trials", "0", "--out", str(tmp_path / "d.csv"),
    ])
    assert code == 2


def test_simulate_reported_perbit_point_passes(tmp_path, reciprocal_file):
    # the reported per-bit point, in the bit-order assignment that keeps
    # the simulated tail inside the budget
    table = tmp_path / "perbit.txt"
    table.write_text(
        "format=vdb-table-v1\nL=3\nk=3\nmode=perbit\np_0=0.44\np_1=0.25\np_2=0.31\n"
    )
    out = tmp_path / "dist.csv"
    code = main([
        "simulate", "--table", str(table), "--constraint", str(reciprocal_file),
        "--trials", "10000", "--seed", "0", "--out", str(out),
    ])
    assert code == 0


def test_simulate_cap_weight_mode(tmp_path, reciprocal_file):
    table = tmp_path / "p29.txt"
    table.write_text(P29_TABLE_TEXT)
    out = tmp_path / "dist.csv"
    code = main([
        "simulate", "--table", str(table), "--constraint", str(reciprocal_file),
        "--trials", "5000", "--seed", "0", "--cap-weight", "3", "--out", str(out),
    ])
    assert code == 0


def test_distort_exact_zero_upsets(tmp_path):
    pmf = tmp_path / "pmf.csv"
    pmf.write_text("# L=3\nvalue,mass\n0,0.5\n5,0.5\n")
    upsets = tmp_path / "upsets.txt"
    upsets.write_text("format=vdb-upsets-v1\nL=3\n0,0,0\n1,0,0\n2,0,0\n")
    out = tmp_path / "fm.csv"
    assert main(["distort", "--pmf", str(pmf), "--upsets", str(upsets), "--mode", "exact", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert "m,mass,tail" in lines
    assert "0,1.0,0.0" in lines


def test_distort_single_error_two_point(tmp_path):
    pmf = tmp_path / "pmf.csv"
    pmf.write_text("# L=3\nvalue,mass\n0,1.0\n")
    upsets = tmp_path / "upsets.txt"
    upsets.write_text("format=vdb-upsets-v1\nL=3\n0,0.2,1.0\n")
    out = tmp_path / "fm.csv"
    assert main(["distort", "--pmf", str(pmf), "--upsets", str(upsets), "--mode", "single-error", "--out", str(out)]) == 0
    text = out.read_text()
    assert "m,mass,tail,oracle_mass,abs_divergence" in text
    assert "# agreed=True" in text


def test_distort_single_error_uniform_divergence_report(tmp_path):
    pmf = tmp_path / "pmf.csv"
    pmf.write_text("# L=3\nvalue,mass\n" + "\n".join(f"{v},0.125" for v in range(8)) + "\n")
    upsets = tmp_path / "upsets.txt"
    upsets.write_text("format=vdb-upsets-v1\nL=3\n0,0.3,0.5\n")
    out = tmp_path / "fm.csv"
    assert main(["distort", "--pmf", str(pmf), "--upsets", str(upsets), "--mode", "single-error", "--out", str(out)]) == 0
    assert "# max_abs_divergence=" in out.read_text()


def test_ingest(tmp_path):
    trace = tmp_path / "trace.csv"
    trace.write_text("1,9\n1,8\n2,7\n")
    out = tmp_path / "pmf.csv"
    assert main(["ingest", "--input", str(trace), "--column", "0", "--bits", "3", "--out", str(out)]) == 0
    text = out.read_text()
    assert "# L=3" in text and "# sample_count=3" in text
    assert "2,0.3333333333333333" in text


def test_ingest_range_error_reports_row(tmp_path, capsys):
    trace = tmp_path / "trace.csv"
    trace.write_text("1\n9\n")
    assert main(["ingest", "--input", str(trace), "--column", "0", "--bits", "3", "--out", str(tmp_path / "o")]) == 2
    assert "row 2" in capsys.readouterr().err


def test_manifest_written_and_replay_reproduces(tmp_path, example_constraint_file):
    out = tmp_path / "table.txt"
    assert main(["encode", "--constraint", str(example_constraint_file), "--mode", "iid", "--out", str(out)]) == 0
    manifest_path = tmp_path / "table.txt.manifest.json"
    manifest = json.loads(manifest_path.read_text())
    assert manifest["subcommand"] == "encode"
    assert manifest["tool"] == "vdbcode"
    assert str(example_constraint_file) in manifest["inputs"]
    assert manifest["inputs"][str(example_constraint_file)].startswith("sha256:")
    original = out.read_bytes()
    out.unlink()
    assert main(["replay", "--manifest", str(manifest_path)]) == 0
    assert out.read_bytes() == original


def test_simulate_manifest_replay_bitwise(tmp_path, reciprocal_file):
    table = tmp_path / "p29.txt"
    table.write_text(P29_TABLE_TEXT)
    out = tmp_path / "dist.csv"
    args = [
        "simulate", "--table", str(table), "--constraint", str(reciprocal_file),
        "--trials", "2000", "--seed", "11", "--out", str(out),
    ]
    assert main(args) == 0
    original = out.read_bytes()
    out.unlink()
    assert main(["replay", "--manifest", str(out) + ".manifest.json"]) == 0
    assert out.read_bytes() == original


def test_replay_rejects_drifted_inputs(tmp_path, example_constraint_file, capsys):
    out = tmp_path / "table.txt"
    assert main(["encode", "--constraint", str(example_constraint_file), "--mode", "iid", "--out", str(out)]) == 0
    example_constraint_file.write_text(EXAMPLE_CONSTRAINT_TEXT + "# drift\n")
    assert main(["replay", "--manifest", str(out) + ".manifest.json"]) == 2
    assert "digest" in capsys.readouterr().err


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    text = capsys.readouterr().out
    assert "vdbcode" in text and "vdb-sets-v1" in text


def test_missing_file_is_usage_error(tmp_path, capsys):
    assert main(["verify", "--constraint", str(tmp_path / "nope"), "--table", str(tmp_path / "nope2")]) == 2
