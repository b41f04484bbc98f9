import math

import pytest

import fdelab


def reference():
    return fdelab.ModelParams.with_defaults(3, 0.1, 1.5, 2.0)


def test_derived_constants():
    d = fdelab.derive_constants(reference())
    # a0 = 2(n-1)(n-2-nm)/(1-m) and rate (1+gamma)/(1-m), computed independently
    assert d["a0"] == pytest.approx(2 * 2 * (1 - 0.3) / 0.9, rel=1e-14)
    assert d["exponent_rate"] == pytest.approx(2.5 / 0.9, rel=1e-14)
    assert fdelab.theta_violations(reference()) == []


def test_bad_theta_is_reported():
    p = reference()
    p.theta2_plus = 0.0
    assert len(fdelab.theta_violations(p)) == 1


def test_phi0_solves_its_transport_equation():
    p = reference()
    outer = fdelab.OuterProfiles(p)
    a0 = fdelab.derive_constants(p)["a0"]
    for offset in (1e-6, 0.5, 10.0, 1e4):
        value, d1, _ = outer.phi(0, offset)
        eta = p.A + offset
        assert abs(p.gamma * eta * d1 + value - a0) <= 1e-12 * a0


def test_profile_and_matching():
    p = reference()
    inner = fdelab.SelfSimilarProfile.shoot(p)
    assert inner.v0(1e-9) == pytest.approx(1.0, rel=1e-12)
    assert inner.slope(inner.s_max) == pytest.approx(inner.slope_limit, rel=5e-3)
    match = fdelab.Matching(fdelab.OuterProfiles(p), inner, 10.0)
    assert match.solve(fdelab.Sign.plus, 0.0, 16.0) > match.solve(fdelab.Sign.minus, 0.0, 16.0)
    mid = fdelab.initial_w_bar(match, 0.01, 16.0, -10.0, 40.0, 51, fdelab.BoundaryChoice.mean)
    lo = fdelab.initial_w_bar(match, 0.01, 16.0, -10.0, 40.0, 51, fdelab.BoundaryChoice.lower)
    up = fdelab.initial_w_bar(match, 0.01, 16.0, -10.0, 40.0, 51, fdelab.BoundaryChoice.upper)
    assert all(a <= b <= c for a, b, c in zip(lo, mid, up))


def test_manufactured_convergence_is_second_order():
    r = fdelab.manufactured_convergence(reference())
    assert 3.5 <= r["ratio"] <= 4.5


def test_config_errors_raise():
    with pytest.raises(fdelab.FdelabError, match="line 1"):
        fdelab.canonical_config("nonsense = 1\n")
    assert fdelab.canonical_config("gamma = 0.5\n") == fdelab.canonical_config(fdelab.canonical_config("gamma = 0.5\n"))


def test_dry_run_and_verify(tmp_path):
    plan = fdelab.run("simulate", out_dir=tmp_path / "dry", dry_run=True)
    assert plan["pass"] and plan["plan"]
    assert not (tmp_path / "dry").exists()

    result = fdelab.run("verify", out_dir=tmp_path)
    assert result["pass"]
    summary = result["summary"]
    assert list(summary) == ["params", "derived", "thresholds", "checks", "artifacts"]
    assert all(c["pass"] for c in summary["checks"])
    assert math.isclose(summary["derived"]["exponent_rate"], 2.5 / 0.9, rel_tol=1e-14)
