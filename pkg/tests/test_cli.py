"""Command-line behaviour: exit codes, option parsing, file round-trips
and the report/analysis emissions."""

import numpy as np
import pytest

from lc5w import cli
from lc5w.volume_io import read_volume, volume_from_array, write_volume

GOOD_THRESHOLDS = """\
# loose level 1, tight deeper levels
HL 1 0.9
LH 1 0.9
HH 1 0.9
HL 2 0.05
LH 2 0.05
HH 2 0.05
HL 3 0.05
LH 3 0.05   # inline comment
HH 3 0.05
"""


def run(*argv):
    return cli.entry(list(argv))


def write_sample(tmp_path, name="vol.raw", frames=4, size=16, seed=0):
    rng = np.random.default_rng(seed)
    vol = volume_from_array(rng.integers(0, 256, (frames, size, size)),
                            8, False)
    path = tmp_path / name
    write_volume(vol, path, "raw16le")
    return path, vol


def test_help_exits_clean(capsys):
    assert run("--help") == 0
    assert "encode" in capsys.readouterr().out


def test_missing_subcommand_is_usage_error(capsys):
    assert run() == 1
    assert run("transcode") == 1


def test_missing_required_flag_names_it(tmp_path, capsys):
    assert run("encode", "--input", str(tmp_path / "x.raw")) == 1
    assert "--output" in capsys.readouterr().err


def test_encode_decode_roundtrip(tmp_path, capsys):
    src, vol = write_sample(tmp_path)
    blob = tmp_path / "v.bin"
    out = tmp_path / "back.raw"
    assert run("encode", "--input", str(src), "--output", str(blob),
               "--mode", "opt", "--search", "2") == 0
    assert "wrote" in capsys.readouterr().out
    assert run("decode", "--input", str(blob), "--output", str(out)) == 0
    assert read_volume(out, "raw16le") == vol


def test_pgm_stack_roundtrip_via_cli(tmp_path):
    rng = np.random.default_rng(1)
    vol = volume_from_array(rng.integers(0, 4096, (3, 9, 11)), 12, False)
    write_volume(vol, tmp_path / "s", "pgm-stack")
    assert run("encode", "--input", str(tmp_path / "s"), "--format",
               "pgm-stack", "--output", str(tmp_path / "v.bin"),
               "--search", "1") == 0
    assert run("decode", "--input", str(tmp_path / "v.bin"), "--output",
               str(tmp_path / "t"), "--format", "pgm-stack") == 0
    assert read_volume(tmp_path / "t", "pgm-stack") == vol


def test_missing_input_file_is_data_error(tmp_path, capsys):
    assert run("encode", "--input", str(tmp_path / "absent.raw"),
               "--output", str(tmp_path / "v.bin")) == 2
    assert "absent.raw" in capsys.readouterr().err


def test_corrupt_container_is_data_error(tmp_path, capsys):
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"not a container at all")
    assert run("decode", "--input", str(bad), "--output",
               str(tmp_path / "o.raw")) == 2
    assert "error" in capsys.readouterr().err


def test_invalid_codec_flags_are_usage_errors(tmp_path, capsys):
    src, _ = write_sample(tmp_path)
    args = ["--input", str(src), "--output", str(tmp_path / "v.bin")]
    assert run("encode", *args, "--bs", "10") == 1
    assert run("encode", *args, "--mode", "turbo") == 1
    assert run("encode", *args, "--cb-size", "5") == 1


def test_phantom_command_writes_volumes(tmp_path):
    out = tmp_path / "p.raw"
    spec = "blocky-residual:24x16x3:seed=5:bs=8:depth=10"
    assert run("phantom", "--spec", spec, "--output", str(out)) == 0
    vol = read_volume(out, "raw16le")
    assert (vol.width, vol.height, len(vol), vol.bit_depth) == (24, 16, 3, 10)


@pytest.mark.parametrize("spec", [
    "blocky-residual", "blocky-residual:24x16", "unknown-kind:8x8x2",
    "blocky-residual:8x8x2:warp=3", "blocky-residual:8x8x2:seed=x",
])
def test_bad_phantom_specs_are_usage_errors(tmp_path, spec, capsys):
    assert run("phantom", "--spec", spec,
               "--output", str(tmp_path / "p.raw")) == 1
    assert capsys.readouterr().err


def test_report_emits_table_and_keys(tmp_path, capsys):
    assert run("report", "--phantom", "blocky-residual:32x32x4:seed=0",
               "--serial") == 0
    out = capsys.readouterr().out
    assert "mode" in out and "rel LC/OPT:" in out
    kv = dict(ln.split("=", 1) for ln in out.splitlines() if "=" in ln)
    assert int(kv["report.opt.hp_payload"]) <= int(kv["report.lc.hp_payload"])
    assert int(kv["report.opt.hp_payload"]) <= int(kv["report.none.hp_payload"])


def test_report_writes_artifacts(tmp_path):
    out_dir = tmp_path / "artifacts"
    assert run("report", "--phantom", "blocky-residual:32x32x4:seed=0",
               "--out-dir", str(out_dir)) == 0
    names = sorted(p.name for p in out_dir.iterdir())
    assert names == ["decisions.png", "frames.csv", "frames.png",
                     "metrics.csv", "report.csv", "totals.png"]


def test_report_requires_some_input(capsys):
    assert run("report") == 1
    assert "--input or --phantom" in capsys.readouterr().err


def test_report_dominance_check_trips_on_internal_error(monkeypatch, capsys):
    # wire check: a (fabricated) dominance violation must exit 3
    real = cli._report.build_report

    def doctored(vol, cfg, parallel=True):
        rep = real(vol, cfg, parallel=parallel)
        rep.totals["opt"]["hp_payload"] = rep.totals["none"]["hp_payload"] + 1
        return rep

    monkeypatch.setattr(cli._report, "build_report", doctored)
    assert run("report", "--phantom", "blocky-residual:16x16x2:seed=0") == 3
    assert "internal error" in capsys.readouterr().err


def test_analyze_lists_every_candidate(tmp_path, capsys):
    src, _ = write_sample(tmp_path, size=64, frames=4)
    assert run("analyze", "--input", str(src), "--frame", "0") == 0
    out = capsys.readouterr().out
    rows = [ln for ln in out.splitlines() if ln[:2] in ("HL", "LH", "HH")]
    assert len(rows) == 9
    assert run("analyze", "--input", str(src), "--frame", "7") == 1


def test_analyze_respects_block_size(tmp_path, capsys):
    assert run("analyze", "--phantom", "blocky-residual:64x64x2:seed=0:bs=8",
               "--bs", "8", "--frame", "0") == 0
    out = capsys.readouterr().out
    rows = [ln for ln in out.splitlines() if ln[:2] in ("HL", "LH", "HH")]
    assert len(rows) == 6  # an 8-grid only has two exploitable levels


def test_threshold_file_steers_decisions(tmp_path, capsys):
    thr = tmp_path / "thr.txt"
    thr.write_text(GOOD_THRESHOLDS)
    assert run("analyze", "--phantom", "blocky-residual:64x64x2:seed=0",
               "--frame", "0", "--thresholds", str(thr)) == 0
    rows = [ln.split() for ln in capsys.readouterr().out.splitlines()
            if ln[:2] in ("HL", "LH", "HH")]
    by_key = {(r[0], r[1]): r for r in rows}
    assert by_key[("HL", "1")][3] == "0.900"
    assert by_key[("HH", "2")][3] == "0.050"


@pytest.mark.parametrize("text,fragment", [
    ("HL 1 0.5\n", "missing"),
    (GOOD_THRESHOLDS + "HL 1 0.5\n", "duplicate"),
    (GOOD_THRESHOLDS.replace("HL 1 0.9", "XX 1 0.9"), "orientation"),
    (GOOD_THRESHOLDS.replace("HL 1 0.9", "HL one 0.9"), "bad level"),
    (GOOD_THRESHOLDS.replace("HL 1 0.9", "HL 1"), "expected"),
])
def test_threshold_file_validation(tmp_path, capsys, text, fragment):
    thr = tmp_path / "thr.txt"
    thr.write_text(text)
    assert run("analyze", "--phantom", "blocky-residual:16x16x2:seed=0",
               "--frame", "0", "--thresholds", str(thr)) == 1
    assert fragment in capsys.readouterr().err


def test_twelve_bit_volume_survives_the_cli(tmp_path):
    rng = np.random.default_rng(9)
    vol = volume_from_array(rng.integers(0, 4096, (2, 8, 8)), 12, False)
    write_volume(vol, tmp_path / "v12.raw", "raw16le")
    assert run("encode", "--input", str(tmp_path / "v12.raw"),
               "--output", str(tmp_path / "v.bin"), "--search", "1") == 0
    assert run("decode", "--input", str(tmp_path / "v.bin"),
               "--output", str(tmp_path / "w12.raw")) == 0
    back = read_volume(tmp_path / "w12.raw", "raw16le")
    assert back == vol and back.bit_depth == 12
