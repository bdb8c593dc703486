import numpy as np
import pytest

from mblast.montecarlo import CsiSpec, DetectorSpec, ExperimentConfig, run_sinr_study
from mblast.throughput import (
    CdfSupportError,
    SinrCdf,
    interp_transfer,
    load_cdf,
    percentile_sinr,
    relative_gain,
    shannon_rate,
)


def two_point_cdf():
    return SinrCdf(sinr_db=np.array([0.0, 10.0]), cdf=np.array([0.0, 1.0]))


class TestShannonRate:
    def test_values(self):
        assert shannon_rate(0.0) == 0.0
        assert shannon_rate(1.0) == 1.0
        assert shannon_rate(3.0) == 2.0

    def test_strictly_increasing(self):
        xs = np.linspace(0, 100, 50)
        rates = shannon_rate(xs)
        assert np.all(np.diff(rates) > 0)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            shannon_rate(-0.1)


class TestPercentile:
    def test_two_point_interpolation(self):
        assert percentile_sinr(two_point_cdf(), 50) == pytest.approx(5.0)

    def test_degenerate_step(self):
        cdf = SinrCdf(sinr_db=np.array([7.0]), cdf=np.array([1.0]))
        for p in (10, 50, 90):
            assert percentile_sinr(cdf, p) == 7.0

    def test_monotone_in_percentile(self):
        cdf = SinrCdf(sinr_db=np.array([-5.0, 0.0, 5.0, 15.0]),
                      cdf=np.array([0.05, 0.3, 0.6, 0.95]))
        vals = [percentile_sinr(cdf, p) for p in (10, 50, 90)]
        assert vals[0] <= vals[1] <= vals[2]

    def test_outside_support(self):
        cdf = SinrCdf(sinr_db=np.array([0.0, 10.0]), cdf=np.array([0.0, 0.8]))
        with pytest.raises(CdfSupportError):
            percentile_sinr(cdf, 90)

    def test_invariants_enforced(self):
        with pytest.raises(ValueError):
            SinrCdf(sinr_db=np.array([1.0, 1.0]), cdf=np.array([0.1, 0.2]))
        with pytest.raises(ValueError):
            SinrCdf(sinr_db=np.array([1.0, 2.0]), cdf=np.array([0.3, 0.2]))
        with pytest.raises(ValueError):
            SinrCdf(sinr_db=np.array([1.0, 2.0]), cdf=np.array([0.5, 1.2]))


class TestCdfFiles:
    def test_shipped_files_load(self):
        for name in ("cdf_synthetic_urban.csv", "cdf_synthetic_uplink.csv"):
            cdf = load_cdf(f"data/{name}")
            assert percentile_sinr(cdf, 10) < percentile_sinr(cdf, 90)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("snr,cdf\n0,0.5\n")
        with pytest.raises(ValueError):
            load_cdf(path)

    def test_empty_rows(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("sinr_db,cdf\n")
        with pytest.raises(ValueError):
            load_cdf(path)


class TestRelativeGain:
    def test_identical_curves_zero_gain(self):
        transfer = [(0.0, 1.0), (10.0, 10.0)]
        assert relative_gain(transfer, transfer, two_point_cdf(), 50) == pytest.approx(0.0)

    def test_doubled_sinr_closed_form(self):
        # B operates at SINR 1, A at 2: gain = 100 (log2(3)/log2(2) - 1)
        cdf = SinrCdf(sinr_db=np.array([4.0, 6.0]), cdf=np.array([0.0, 1.0]))
        tb = [(4.0, 1.0), (6.0, 1.0)]
        ta = [(4.0, 2.0), (6.0, 2.0)]
        gain = relative_gain(ta, tb, cdf, 50)
        assert gain == pytest.approx(100.0 * (np.log2(3.0) - 1.0), rel=1e-6)

    def test_floor_at_zero(self):
        cdf = two_point_cdf()
        ta = [(0.0, 1.0), (10.0, 1.0)]
        tb = [(0.0, 2.0), (10.0, 2.0)]
        assert relative_gain(ta, tb, cdf, 50) < 0
        assert relative_gain(ta, tb, cdf, 50, floor_at_zero=True) == 0.0

    def test_out_of_range_transfer_flagged(self):
        cdf = two_point_cdf()
        transfer = [(6.0, 4.0), (8.0, 6.0)]  # does not cover 5 dB
        with pytest.raises(CdfSupportError):
            relative_gain(transfer, transfer, cdf, 50)

    def test_interp_in_db_domain(self):
        transfer = [(0.0, 1.0), (10.0, 100.0)]
        assert interp_transfer(transfer, 5.0) == pytest.approx(10.0)


class TestEndToEnd:
    def test_desk_scale_gain_positive_at_cell_center(self):
        # transfer curves from simulation + synthetic shadowing CDF:
        # the iterative detector gains over one-shot MMSE at the 90th pct
        cfg = ExperimentConfig(
            num_users=32, num_rx=96, constellation="bpsk",
            detectors=(DetectorSpec("mmse"), DetectorSpec("mblast", iterations=10)),
            eb_n0_grid_db=(6.0,),
            csi=CsiSpec(perfect=True),
            master_seed=77,
            sinr_realizations=12, sinr_symbol_trials=50,
        )
        cdf = load_cdf("data/cdf_synthetic_urban.csv")
        op = percentile_sinr(cdf, 90)
        grid = [op - 2.0, op, op + 2.0]
        transfer = run_sinr_study(cfg, grid, workers=2)
        curves = {lbl: [(p.snr_db, p.sinr_linear) for p in pts]
                  for lbl, pts in transfer.items()}
        gain = relative_gain(curves["mblast"], curves["mmse"], cdf, 90)
        assert gain > 0.0
