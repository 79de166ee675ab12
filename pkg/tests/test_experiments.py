"""Scenario-family trends and the PSA versus CSA comparison on the shipped configs."""

import dataclasses

import numpy as np
import pytest

from conftest import ROOT
from psasec.config import load_config
from psasec.harness import evaluate_trial, run_sweep

CONFIGS = ROOT / "configs"
INFEASIBLE_EVE = ("with a 6-antenna eavesdropper almost every power-minimization draw is infeasible; "
                  "see the decision log")


def sweep_means(name, **changes):
    cfg = dataclasses.replace(load_config(CONFIGS / name), **changes)
    return {(r.array_kind, r.sweep_value): r.mean_metric for r in run_sweep(cfg)}


def paired_differences(name):
    """Per-trial advantage of the PSA over the CSA, averaged over the sweep.

    Secrecy rates count PSA - CSA, powers CSA - PSA, so positive always favours
    the PSA. Sweep points where either design is infeasible are skipped.
    """
    cfg = load_config(CONFIGS / name)
    sign = -1.0 if cfg.mode == "power_min" else 1.0
    diffs = np.full((cfg.trials, len(cfg.sweep_values)), np.nan)
    for j, (_, point) in enumerate(cfg.points()):
        for t in range(cfg.trials):
            out = evaluate_trial(point, t)
            if out["psa"] is not None and out["csa"] is not None:
                diffs[t, j] = sign * (out["psa"] - out["csa"])
    counts = np.isfinite(diffs).sum(axis=1)
    kept = counts > 0
    return np.nansum(diffs, axis=1)[kept] / counts[kept], cfg.trials


def bootstrap_lower(values, level=0.95, resamples=10000, seed=0):
    """One-sided lower confidence bound for the mean, resampling whole trials."""
    if len(values) == 0:
        return float("nan")
    rng = np.random.default_rng(seed)
    means = rng.choice(values, (resamples, len(values))).mean(axis=1)
    return float(np.quantile(means, 1.0 - level))


def test_bootstrap_lower_bound_oracle():
    # for a large normal sample the bound approaches mean - 1.645 sigma / sqrt(n)
    x = np.random.default_rng(1).normal(2.0, 1.0, 400)
    expected = x.mean() - 1.6449 * x.std() / np.sqrt(x.size)
    assert bootstrap_lower(x) == pytest.approx(expected, abs=0.01)
    assert np.isnan(bootstrap_lower(np.array([])))


@pytest.mark.parametrize("name", [
    pytest.param("fig4_dp0.toml", marks=pytest.mark.xfail(strict=True, reason=INFEASIBLE_EVE)),
    pytest.param("fig5_dp0.toml", marks=pytest.mark.xfail(strict=True, reason=INFEASIBLE_EVE)),
    pytest.param("fig7_dp0.toml", marks=pytest.mark.xfail(
        strict=True, reason="near the desired DOA the per-element jammer null also removes the desired "
                            "signal, so the PSA trails the CSA there; see the decision log")),
    "fig8.toml",
    "fig11_dp0.toml",
    "fig11_dp20.toml",
    "fig11_dp60.toml",
])
def test_psa_not_worse_than_csa(name):
    per_trial, trials = paired_differences(name)
    assert trials >= 50
    assert len(per_trial) >= 10, f"only {len(per_trial)} trials with both designs feasible"
    assert bootstrap_lower(per_trial) >= 0.0


@pytest.mark.xfail(strict=True, reason=INFEASIBLE_EVE)
def test_fig4_power_increases_with_target():
    for dp in (0, 20, 40):
        means = sweep_means(f"fig4_dp{dp}.toml")
        curve = [means[("psa", r)] for r in (0.5, 1.0, 1.5, 2.0, 2.5, 3.0)]
        assert np.all(np.diff(curve) > 0), (dp, curve)


@pytest.mark.xfail(strict=True, reason=INFEASIBLE_EVE)
def test_fig5_csa_needs_two_db_more():
    means = sweep_means("fig5_dp0.toml")
    r_values = (0.5, 1.0, 1.5, 2.0, 2.5, 3.0)
    psa = np.array([means[("psa", r)] for r in r_values])
    csa = np.array([means[("csa", r)] for r in r_values])
    both = np.isfinite(psa) & np.isfinite(csa)
    assert both.sum() == len(r_values)
    assert np.mean(csa[both] - psa[both]) >= 2.0


def test_fig7_zero_rate_when_signals_coincide():
    means = sweep_means("fig7_dp0.toml", sweep_values=(40.0,), array="psa")
    assert means[("psa", 40.0)] <= 0.05


def test_fig8_grating_lobe():
    means = sweep_means("fig8.toml", sweep_values=(40.0, 140.0))
    csa40, csa140 = means[("csa", 40.0)], means[("csa", 140.0)]
    assert abs(csa140 - csa40) <= 0.10 * csa40
    assert means[("psa", 140.0)] >= 5 * means[("psa", 40.0)]
    assert means[("psa", 140.0)] > 0


def test_shipped_configs_load():
    names = sorted(p.name for p in CONFIGS.glob("*.toml"))
    assert len(names) == 23
    for name in names:
        cfg = load_config(CONFIGS / name)
        assert cfg.sweep_axis is not None
        assert cfg.trials == (1 if name.startswith("fig9") else 20 if name.startswith("fig12") else 50)
