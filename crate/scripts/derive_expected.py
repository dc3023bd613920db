#!/usr/bin/env python3
"""Independent reference values for the bundled example manifests.

Every number tagged DERIVED in crates/core/bundled/*/expected.json comes
from here. The computations use closed forms, dense numerical grids or
brute-force enumeration over ranked states; none of them call the engine.

    python3 scripts/derive_expected.py          # print values
    python3 scripts/derive_expected.py --check  # compare with manifests
"""

import json
import math
import pathlib
import sys

import numpy as np
from scipy import integrate, stats

RANKED = ["very low", "low", "medium", "high", "very high"]
MID = np.array([(i + 0.5) / 5 for i in range(5)])
EDGES = np.linspace(0.0, 1.0, 6)


def tnormal(mean, var, lo, hi):
    sd = math.sqrt(var)
    return stats.truncnorm((lo - mean) / sd, (hi - mean) / sd, loc=mean, scale=sd)


def ranked_pmf(mean, var):
    """TNormal(mean, var, 0, 1) mass on each of the five ranked intervals."""
    d = tnormal(mean, var, 0.0, 1.0)
    return np.diff(d.cdf(EDGES))


def state(label):
    return MID[RANKED.index(label)]


def latent_posterior(factors, indicators, var=0.001, ind_var=0.01):
    """Ranked latent with observed factors and indicators.

    factors: list of (label, inverted); indicators: list of (label, inverted).
    The latent node's parent value is its state midpoint.
    """
    vals = [1 - state(s) if inv else state(s) for s, inv in factors]
    prior = ranked_pmf(sum(vals) / len(vals), var)
    like = np.ones(5)
    for s, inv in indicators:
        k = RANKED.index(s)
        for i in range(5):
            m = 1 - MID[i] if inv else MID[i]
            like[i] *= ranked_pmf(m, ind_var)[k]
    post = prior * like
    post /= post.sum()
    return post


def beta_var(a, b):
    return a * b / ((a + b) ** 2 * (a + b + 1))


def pfd_limited(prev_k, prev_n, mult, cur_k=None, cur_n=None, var=1e-4):
    """Dense-grid posterior of p for the limited-data pfd model."""
    q = np.linspace(1e-6, 0.6, 6001)
    wq = stats.beta(prev_k + 1, prev_n - prev_k + 1).pdf(q)
    p = np.linspace(0.0, 1.0, 20001)
    sd = math.sqrt(var)
    dens = np.zeros_like(p)
    for qi, w in zip(q, wq):
        if w < 1e-300:
            continue
        d = stats.norm(mult * qi, sd)
        z = d.cdf(1.0) - d.cdf(0.0)
        dens += w * d.pdf(p) / z
    if cur_n is not None:
        dens *= stats.binom.pmf(cur_k, cur_n, p)
    dens /= np.trapezoid(dens, p)
    mean = np.trapezoid(p * dens, p)
    var_p = np.trapezoid((p - mean) ** 2 * dens, p)
    return mean, var_p


def uncertain_accuracy(observed, demands, factor=0.8, vf=1e-4):
    # tne ~ Binomial(demands, p), p ~ U(0,1): uniform over 0..demands.
    tne = np.arange(demands + 1)
    like = np.zeros(demands + 1)
    for t in tne:
        mean = max(0.0, factor * t)
        v = vf * t
        if v == 0:
            like[t] = 1.0 if mean == observed else 0.0
            continue
        d = stats.norm(mean, math.sqrt(v))
        like[t] = d.cdf(observed + 0.5) - d.cdf(observed - 0.5)
    post = like / like.sum()
    return float((tne * post).sum())


def rework(quality, effort, means=(0.01, 0.15, 0.4, 0.6, 0.8), var=0.001):
    eff = ranked_pmf((state(quality) + state(effort)) / 2, var)
    fix = [tnormal(m, var, 0.0, 1.0).mean() for m in means]
    return float(np.dot(eff, fix))


def aircraft(times=(6000, 5000, 4000), t=6.0, k=10, n=1_000_000):
    m, s = len(times), sum(times)
    cap = 100 / (s / m)
    # rate posterior Gamma(m+1, s) truncated to [0, cap]
    g = stats.gamma(m + 1, scale=1 / s)
    z = g.cdf(cap)
    laplace, _ = integrate.quad(lambda r: math.exp(-t * r) * g.pdf(r), 0, cap, points=[(m + 1) / s])
    engine = 1 - laplace / z
    brake = (k + 1) / (n + 2)
    return 1 - (1 - 0.5 * engine) * (1 - 0.5 * brake), engine, brake


def requirement(mean, var, r):
    return float(tnormal(mean, var, 0.0, 1.0).cdf(r))


def derived():
    out = {}
    out["fig4b_hammer_pfd"] = {"p.mean": 11 / 1002, "p.variance": beta_var(11, 991)}
    m, v = pfd_limited(200, 2000, 1.25)
    out["fig5b_pfd_limited_data"] = {"p.mean": m, "p.variance": v}
    m, v = pfd_limited(200, 2000, 1.25, 0, 500)
    out["fig5c_pfd_limited_data_current"] = {"p.mean": m, "p.variance": v}
    out["fig6b_uncertain_accuracy"] = {"true_events.mean": uncertain_accuracy(100, 1000)}
    out["fig7b_ttf"] = {"time_to_next_failure.mean": 400 / 4, "rate.mean": 5 / 400}
    out["fig8b_ttf_summary"] = {"time_to_next_failure.mean": float(tnormal(100, 250, 0, 1e5).mean())}
    out["fig9b_failure_within_time"] = {"failure.True": 1 - math.exp(-0.1)}
    out["fig10b_rework"] = {"fixing_probability.mean": rework("very low", "very low")}
    out["fig11a_requirement"] = {"compliant.True": requirement(0.03, 4e-4, 0.01)}
    post = latent_posterior([("high", True)], [("high", True)])
    out["fig12b_manufacturing_quality"] = {"latent_quality.mean": float(np.dot(post, MID))}
    post = latent_posterior([("very high", False)], [("high", False)])
    out["fig12c_organisation_quality"] = {"latent_quality.mean": float(np.dot(post, MID))}
    p = 21 / 202
    out["fig13_hammer_reliability"] = {"hazard_p.mean": p, "reliability_attribute.mean|very low": 1.5 * p}
    out["fig14b_hazard_occurrence"] = {"adjusted_probability.mean": 0.15 * 1.2}
    out["fig15b_injury_event"] = {"p_injury.mean": 0.18 * 0.08}
    out["fig16b_product_injury"] = {"injury_count.mean": 100000 * 0.015}
    out["fig17b_risk_control"] = {"residual.mean": 0.5 * 0.08}
    out["fig18b_risk_score"] = {"risk_level.very high": float(ranked_pmf(min(1.0, 100 * (0.04 + 0.5 * 0.1)), 0.001)[4])}
    out["fig19b_risk_tolerability"] = {
        "tolerability.low+very low": float(ranked_pmf((0.5 + (1 - 0.9)) / 2, 0.001)[:2].sum())
    }
    out["fig20b_risk_perception"] = {"perceived_risk.high": float(ranked_pmf(0.7, 0.001)[3])}
    post = latent_posterior([("high", False), ("high", False)], [("high", False)])
    out["fig20c_risk_perception_media"] = {"perceived_risk.mean": float(np.dot(post, MID))}
    out["fig22b_aircraft"] = {"mission_failure.True": aircraft()[0]}
    return out


def check(values):
    root = pathlib.Path(__file__).resolve().parent.parent / "crates" / "core" / "bundled"
    bad = 0
    for ex, vals in values.items():
        manifest = json.loads((root / ex / "expected.json").read_text())
        targets = {e["key"]: e.get("target") for e in manifest if e["provenance"] == "DERIVED"}
        for k, v in vals.items():
            if k in targets and targets[k] is not None and not math.isclose(targets[k], v, rel_tol=1e-6, abs_tol=1e-12):
                print(f"{ex} {k}: manifest {targets[k]} vs {v}")
                bad += 1
    print("ok" if bad == 0 else f"{bad} mismatches")
    return bad


if __name__ == "__main__":
    vals = derived()
    if "--check" in sys.argv:
        sys.exit(1 if check(vals) else 0)
    print(json.dumps(vals, indent=2))
