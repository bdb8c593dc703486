import subprocess
import sys
from pathlib import Path

import pytest

PLOTS_DIR = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(PLOTS_DIR))

import render  # noqa: E402

BER_HEADER = "detector,eb_n0_db,bits,errors,ber,ci_low,ci_high,macs"


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


@pytest.fixture
def ber_csv(tmp_path):
    rows = [BER_HEADER]
    for det in ("mmse", "mblast"):
        for i, db in enumerate((0.0, 2.0, 4.0, 6.0, 8.0)):
            ber = 0.1 / (2**i) * (0.8 if det == "mblast" else 1.0)
            rows.append(f"{det},{db},10000,{int(ber * 10000)},{ber},{ber * 0.9},{ber * 1.1},5000")
    return write(tmp_path / "ber.csv", "\n".join(rows) + "\n")


def test_ber_sweep_renders_curves(ber_csv, tmp_path):
    out = tmp_path / "fig.svg"
    render.render("ber_sweep", ber_csv, out, logy=True, bound=True)
    body = out.read_text()
    assert out.stat().st_size > 0
    # one legend entry per detector plus the bound overlay
    for label in ("mmse", "mblast", "SISO-AWGN bound"):
        assert label in body


def test_png_output(ber_csv, tmp_path):
    out = tmp_path / "fig.png"
    render.render("ber_sweep", ber_csv, out)
    assert out.stat().st_size > 0


def test_empty_csv_rejected(tmp_path):
    path = write(tmp_path / "empty.csv", BER_HEADER + "\n")
    out = tmp_path / "fig.svg"
    with pytest.raises(render.SchemaError):
        render.render("ber_sweep", path, out)
    assert not out.exists()


def test_schema_mismatch_names_columns(tmp_path):
    path = write(tmp_path / "bad.csv", "detector,eb_n0_db,ber\nmmse,0,0.1\n")
    with pytest.raises(render.SchemaError) as err:
        render.render("ber_sweep", path, tmp_path / "fig.svg")
    assert "missing" in str(err.value) and "bits" in str(err.value)


def test_cli_exit_codes(ber_csv, tmp_path):
    ok = subprocess.run(
        [sys.executable, str(PLOTS_DIR / "render.py"), "--kind", "ber_sweep",
         "--in", str(ber_csv), "--out", str(tmp_path / "a.svg"), "--logy"],
        capture_output=True, text=True,
    )
    assert ok.returncode == 0, ok.stderr
    bad = subprocess.run(
        [sys.executable, str(PLOTS_DIR / "render.py"), "--kind", "convergence",
         "--in", str(ber_csv), "--out", str(tmp_path / "b.svg")],
        capture_output=True, text=True,
    )
    assert bad.returncode == 2
    assert "mismatch" in bad.stderr
    assert not (tmp_path / "b.svg").exists()


def test_convergence_and_throughput_kinds(tmp_path):
    conv = write(tmp_path / "conv.csv",
                 "detector,iteration,bits,errors,ber,ci_low,ci_high\n"
                 + "\n".join(f"pic,{t},1000,{50 - t},{(50 - t) / 1000},0.01,0.08"
                             for t in range(1, 6)) + "\n")
    render.render("convergence", conv, tmp_path / "conv.svg", logy=True)
    assert (tmp_path / "conv.svg").stat().st_size > 0

    tput = write(tmp_path / "tput.csv",
                 "cdf_source,percentile,baseline,gain_pct\n"
                 "synthetic.csv,10,mmse,5.0\nsynthetic.csv,50,mmse,12.0\n"
                 "synthetic.csv,90,mmse,25.0\nsynthetic.csv,10,pic,2.0\n"
                 "synthetic.csv,50,pic,0.0\nsynthetic.csv,90,pic,7.5\n")
    render.render("throughput", tput, tmp_path / "tput.svg")
    assert (tmp_path / "tput.svg").stat().st_size > 0


def test_bound_overlay_anchor_value():
    # the reference curve the overlay draws passes through (0 dB, 0.0786)
    assert render.awgn_bpsk_ber(0.0) == pytest.approx(0.0786, abs=5e-5)
    assert render.awgn_bpsk_ber(4.0) == pytest.approx(0.0125, abs=5e-5)
