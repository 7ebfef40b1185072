from fdmimo.beamforming import Method
from fdmimo.montecarlo.report import constraint_report, format_report
from fdmimo.sysconfig import SystemConfig

SPS, STT = Method.SPATIAL_SUPPRESSION, Method.SUBTRACTION


def test_default_verdicts():
    rows = constraint_report(SystemConfig(), trials=300, seed=2)
    assert [r.verdict for r in rows] == [STT, SPS, SPS, STT]
    text = format_report(rows)
    assert "Spatial Suppression" in text and "SI Subtraction" in text
    assert rows[2].evidence["r_cross_highest"] >= 1.0 > rows[2].evidence["r_cross_lowest"]


def test_perfect_row_holds_without_estimation_error():
    # the perfect-estimation row is driven by the DL diversity gap alone
    rows = constraint_report(SystemConfig(rho_d_db=60.0), trials=50, seed=1)
    assert rows[0].verdict is STT
    assert rows[0].evidence["sum_rate_stt"] > rows[0].evidence["sum_rate_sps"]


def test_verdicts_follow_the_inputs():
    rows = constraint_report(SystemConfig(), trials=300, seed=2, configs=((64, 40), (64, 27)))
    assert rows[1].verdict is STT
    assert rows[2].verdict is STT
