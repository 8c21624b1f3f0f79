import numpy as np
import pytest

from conegam.exceptions import InvalidInputError
from conegam.gam import component_curve
from conegam.model import (export_surface_grid, fit_model, fitted_table, read_csv,
                           summarize)


@pytest.fixture
def table(rng):
    n = 150
    x1, x2, x3 = rng.uniform(size=(3, n))
    z = rng.normal(size=n)
    g = rng.choice(["lo", "mid", "hi"], size=n, p=[0.5, 0.3, 0.2])
    y = np.exp(x1) + x2 ** 2 + x3 + 0.5 * z + (g == "mid") * 0.4 + rng.normal(scale=0.2, size=n)
    return {"y": y, "x1": x1, "x2": x2, "x3": x3, "z": z, "g": g}


def test_read_csv_and_na_report(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("y,x\n1,2\n3,NA\n", encoding="utf-8")
    tab = read_csv(p)
    assert tab == {"y": ["1", "3"], "x": ["2", "NA"]}
    with pytest.raises(InvalidInputError, match=r"column 'x' at row 2"):
        fit_model("y ~ incr(x)", tab)


def test_read_csv_errors(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("", encoding="utf-8")
    with pytest.raises(InvalidInputError, match="header"):
        read_csv(p)
    p.write_text("y,x\n1,2,3\n", encoding="utf-8")
    with pytest.raises(InvalidInputError, match="fields"):
        read_csv(p)
    with pytest.raises(InvalidInputError, match="not found"):
        read_csv(tmp_path / "missing.csv")


def test_non_numeric_reported():
    with pytest.raises(InvalidInputError, match="non-numeric value 'abc'"):
        fit_model("y ~ incr(x)", {"y": ["1", "2", "3"], "x": ["1", "abc", "3"]})


def test_factor_dummies_and_summary(table):
    mf = fit_model("y ~ s.incr(x1) + s.conv(x2) + z + factor(g)", table)
    assert mf.z_names == ("z", "factor(g)lo", "factor(g)mid")
    s = summarize(mf)
    assert [r["term"] for r in s["coefficients"]["rows"]] == [
        "(Intercept)", "z", "factor(g)lo", "factor(g)mid"]
    assert s["engine"] == "cgam" and s["cic"] is None


def test_fitted_table_shape(table):
    mf = fit_model("y ~ s.incr(x1) + incr(x3)", table)
    header, rows = fitted_table(mf)
    assert header == ["row_id", "y", "eta_hat", "mu_hat", "s.incr(x1)", "incr(x3)"]
    assert len(rows) == 150 and rows[0][0] == 1


def test_wps_plane_grid_reproduced(rng):
    x1, x2 = rng.uniform(size=(2, 100))
    mf = fit_model("y ~ ii(x1, x2, numknots = c(3, 3))", {"y": 1 + x1 + 2 * x2, "x1": x1, "x2": x2})
    rows = export_surface_grid(mf, "x1", "x2", resolution=5)
    assert len(rows) == 25
    for a, b, lev, v in rows:
        assert lev == "" and abs(v - (1 + a + 2 * b)) < 1e-8


def test_third_predictor_pinned(table):
    mf = fit_model("y ~ s.incr(x1) + s.conv(x2) + s.incr(x3)", table)
    rows = export_surface_grid(mf, "x1", "x2", resolution=4, scale="eta")
    x3 = table["x3"]
    pin = x3[x3 <= np.median(x3)].max()
    fit = mf.fit
    a, b, _, v = rows[5]
    expected = (fit.alpha_hat[0] + component_curve(fit, "s.incr(x1)", [a])[0]
                + component_curve(fit, "s.conv(x2)", [b])[0]
                + component_curve(fit, "s.incr(x3)", [pin])[0])
    assert v == pytest.approx(expected, abs=1e-10)


def test_categorical_levels_give_parallel_surfaces(table):
    mf = fit_model("y ~ s.incr(x1) + s.conv(x2) + factor(g)", table, family="gaussian")
    rows = export_surface_grid(mf, "x1", "x2", resolution=4, categ="g")
    assert len(rows) == 3 * 16
    vals = {}
    for a, b, lev, v in rows:
        vals.setdefault(lev, []).append(v)
    diffs = np.array(vals["mid"]) - np.array(vals["hi"])
    assert np.ptp(diffs) < 1e-10


def test_grid_errors(table):
    mf = fit_model("y ~ s.incr(x1) + z", table)
    with pytest.raises(InvalidInputError, match="two nonparametric"):
        export_surface_grid(mf, "x1", "z")
    mf = fit_model("y ~ s.incr(x1) + s.incr(x2) + factor(g)", table)
    with pytest.raises(InvalidInputError, match="not a nonparametric"):
        export_surface_grid(mf, "x1", "z")
    with pytest.raises(InvalidInputError, match="resolution"):
        export_surface_grid(mf, "x1", "x2", resolution=1)
    with pytest.raises(InvalidInputError, match="factor"):
        export_surface_grid(mf, "x1", "x2", categ="x2")


def test_mean_scale_for_poisson(rng):
    n = 120
    x1, x2 = rng.uniform(size=(2, n))
    y = rng.poisson(np.exp(0.5 + x1 + x2)).astype(float)
    mf = fit_model("y ~ s.incr(x1) + s.incr(x2)", {"y": y, "x1": x1, "x2": x2}, family="p")
    eta = export_surface_grid(mf, "x1", "x2", 3, "eta")
    mu = export_surface_grid(mf, "x1", "x2", 3, "mean")
    np.testing.assert_allclose([r[3] for r in mu], np.exp([r[3] for r in eta]))


def test_wps_rejects_non_gaussian(rng):
    x1, x2 = rng.uniform(size=(2, 30))
    with pytest.raises(InvalidInputError, match="gaussian"):
        fit_model("y ~ dd(x1, x2)", {"y": np.ones(30), "x1": x1, "x2": x2}, family="p")
