import math

import numpy as np
import pytest

import minsoc


def test_default_curve():
    c = minsoc.OcvCurve.default()
    assert c.a1 == pytest.approx(0.23, rel=1e-9)
    assert c.a2 == pytest.approx(61.66, rel=1e-9)
    assert c.inverse(c.eval(0.37)) == pytest.approx(0.37, abs=1e-9)


def test_constants():
    cfg = minsoc.PackConfig([minsoc.CellParams(tau_d=12.0, r_d=5e-4, r_int=5e-4, q_ah=6.0)])
    k = minsoc.compute_constants(cfg, minsoc.EstimatorParams())
    assert k.a == pytest.approx(1 / 12)
    assert k.c1 == pytest.approx(8.696, rel=1e-3)
    assert k.c3 == pytest.approx(17.391, rel=1e-3)
    assert k.c4 == pytest.approx(104.35, rel=1e-3)
    assert k.steady_thm1(1, 0.0) == pytest.approx(0.02174, rel=1e-3)


def test_simulate_and_verify(tmp_path):
    cfg, x0 = minsoc.generate_pack(n_cells=30, seed=2)
    prof = minsoc.pulse_train(t_end=120.0, seed=2)
    params = minsoc.EstimatorParams(tau_d=minsoc.select_tau_d(cfg, "mean"))
    tr = minsoc.simulate(cfg, params, x0, prof, sigma0=20, t_end=120.0)
    assert len(tr) >= 12001
    soc = tr.soc
    assert soc.shape == (len(tr), 30)
    err = np.abs(tr.soc_hat - soc.min(axis=1))
    assert err[tr.t > 60].max() < 0.05
    assert all(r["pass"] for r in minsoc.verify(cfg, tr))

    minsoc.write_run(tmp_path, cfg, x0, prof, tr)
    cfg2, x02, tr2 = minsoc.read_run(tmp_path)
    assert len(cfg2) == 30
    np.testing.assert_array_equal(tr2.soc_hat, tr.soc_hat)


def test_errors():
    with pytest.raises(ValueError):
        minsoc.EstimatorParams(mu=0.0)
    with pytest.raises(ValueError):
        minsoc.OcvCurve([(0.0, 3.0), (1.0, 2.0)])
    cfg = minsoc.PackConfig([minsoc.CellParams(tau_d=12.0, r_d=5e-4, r_int=5e-4, q_ah=6.0)] * 2)
    x0 = minsoc.PlantState([0.0, 0.0], [0.4, 0.5])
    with pytest.raises(RuntimeError):
        # soc_hat above every cell: infeasible start
        minsoc.simulate(cfg, minsoc.EstimatorParams(), x0, minsoc.CurrentProfile.constant(0.0),
                        soc_hat0=0.9, t_end=1.0)


def test_oracle_bank():
    cfg, x0 = minsoc.generate_pack(n_cells=4, seed=1)
    t, m = minsoc.observer_bank_min(cfg, minsoc.CurrentProfile.constant(5.0), x0, 5.0)
    assert len(t) == len(m) == 501
    assert math.isclose(m[0], min(x0.soc), abs_tol=1e-15)
