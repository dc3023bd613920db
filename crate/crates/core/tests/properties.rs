//! Property tests for distributions, the engine and idiom composition.

use std::collections::{BTreeSet, HashMap};

use proptest::prelude::*;
use psi_core::expr::{evaluate_deterministic, parse_expression, DistKind, Distribution};
use psi_core::graph::{build_model, ModelSpec, Observation};
use psi_core::idioms::{
    compose, compose_fragments, instantiate, HazardOccurrenceParams, IdiomParams, InjuryEventParams,
    MultiplierFactor, PfdParams, PortBinding, RiskControlParams, RiskScoreParams,
};
use psi_core::inference::{infer, DiscretizationConfig, PosteriorSet};
use psi_core::oracle::likelihood_weighted_posterior;

fn run(spec: ModelSpec) -> PosteriorSet {
    let model = build_model(spec).expect("model builds");
    infer(&model, &Default::default(), &DiscretizationConfig::default()).expect("inference runs")
}

fn pfd(k: u32, n: u32) -> ModelSpec {
    let params = IdiomParams::Pfd(PfdParams { observed: Some(k as f64), demands: Some(n as f64), ..Default::default() });
    instantiate("", &params).unwrap().into_model("pfd")
}

fn single(params: IdiomParams) -> ModelSpec {
    instantiate("", &params).unwrap().into_model("prop")
}

fn cuts(lo: f64, hi: f64, raw: &[f64]) -> Vec<f64> {
    let mut c: Vec<f64> = raw.iter().map(|u| lo + u * (hi - lo)).collect();
    c.push(lo);
    c.push(hi);
    c.sort_by(f64::total_cmp);
    c.dedup();
    c
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tnormal_partition_masses_sum_to_one(
        mean in -2.0..3.0f64,
        var in 0.001..4.0f64,
        raw in prop::collection::vec(0.0..1.0f64, 1..12),
    ) {
        let d = Distribution::from_params(DistKind::TNormal, &[mean, var, 0.0, 1.0]).unwrap();
        let c = cuts(0.0, 1.0, &raw);
        let total: f64 = c.windows(2).map(|w| d.mass(w[0], w[1])).sum();
        prop_assert!((total - 1.0).abs() < 1e-9, "total {total}");
    }

    #[test]
    fn binomial_partition_masses_sum_to_one(
        n in 1u32..5000,
        p in 0.0..1.0f64,
        raw in prop::collection::vec(0.0..1.0f64, 1..10),
    ) {
        let d = Distribution::from_params(DistKind::Binomial, &[n as f64, p]).unwrap();
        let mut starts: Vec<u32> = raw.iter().map(|u| (u * n as f64).round() as u32).collect();
        starts.push(0);
        starts.sort_unstable();
        starts.dedup();
        let mut total = 0.0;
        for (i, &s) in starts.iter().enumerate() {
            let end = starts.get(i + 1).map_or(n, |&e| e - 1);
            total += d.mass(s as f64, end as f64);
        }
        prop_assert!((total - 1.0).abs() < 1e-9, "total {total}");
    }

    #[test]
    fn exponential_partition_masses_sum_to_one(
        rate in 0.01..10.0f64,
        raw in prop::collection::vec(0.0..1.0f64, 1..10),
    ) {
        let d = Distribution::from_params(DistKind::Exponential, &[rate]).unwrap();
        let mut c = cuts(0.0, 50.0 / rate, &raw);
        *c.last_mut().unwrap() = f64::INFINITY;
        let total: f64 = c.windows(2).map(|w| d.mass(w[0], w[1])).sum();
        prop_assert!((total - 1.0).abs() < 1e-9, "total {total}");
    }

    #[test]
    fn wmean_ignores_weight_scale(
        w1 in 0.1..5.0f64,
        w2 in 0.1..5.0f64,
        x in -10.0..10.0f64,
        y in -10.0..10.0f64,
        c in 0.01..100.0f64,
    ) {
        let vars = HashMap::from([("x".to_string(), x), ("y".to_string(), y)]);
        let base = evaluate_deterministic(&parse_expression(&format!("wmean({w1}, x, {w2}, y)")).unwrap(), &vars).unwrap();
        let scaled =
            evaluate_deterministic(&parse_expression(&format!("wmean({}, x, {}, y)", c * w1, c * w2)).unwrap(), &vars)
                .unwrap();
        prop_assert!((base - scaled).abs() <= 1e-9 * (1.0 + base.abs()));
        prop_assert!(base >= x.min(y) - 1e-12 && base <= x.max(y) + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn posterior_is_a_distribution(k in 0u32..50, extra in 1u32..2000) {
        let ps = run(pfd(k, k + extra));
        for (id, p) in &ps.nodes {
            let total = p.total_mass();
            prop_assert!((total - 1.0).abs() < 1e-6, "{id} mass {total}");
            prop_assert!(p.variance >= 0.0, "{id} variance {}", p.variance);
            let q = p.percentiles.as_array();
            prop_assert!(q.windows(2).all(|w| w[0] <= w[1]), "{id} percentiles {q:?}");
        }
    }

    #[test]
    fn pfd_mean_increases_with_failures(k in 0u32..40, n in 100u32..2000) {
        let lo = run(pfd(k, n)).mean("p").unwrap();
        let hi = run(pfd(k + 1, n)).mean("p").unwrap();
        prop_assert!(hi > lo, "{lo} !< {hi}");
    }

    #[test]
    fn inference_is_deterministic(k in 0u32..30, extra in 1u32..500) {
        prop_assert_eq!(run(pfd(k, k + extra)), run(pfd(k, k + extra)));
    }

    #[test]
    fn residual_never_exceeds_event(event in 0.0..1.0f64, control in prop::option::of(0.0..1.0f64)) {
        let ps = run(single(IdiomParams::RiskControl(RiskControlParams { control, event: Some(event) })));
        let residual = ps.mean("residual").unwrap();
        prop_assert!(residual <= event + 1e-9, "{residual} > {event}");
        prop_assert!(residual >= 0.0);
    }

    #[test]
    fn injury_never_exceeds_hazard(h in 0.0..1.0f64, given in prop::option::of(0.0..1.0f64)) {
        let params = InjuryEventParams { p_hazard: Some(h), p_injury_given_hazard: given };
        let ps = run(single(IdiomParams::InjuryEvent(params)));
        let injury = ps.mean("p_injury").unwrap();
        prop_assert!(injury <= h + 1e-9, "{injury} > {h}");
    }

    #[test]
    fn neutral_multipliers_leave_hazard_unchanged(base in 0.0..1.0f64, state in 0usize..3) {
        let factor = MultiplierFactor {
            name: "conditions".into(),
            states: vec!["a".into(), "b".into(), "c".into()],
            multipliers: vec![1.0; 3],
            state: Some(["a", "b", "c"][state].into()),
        };
        let params = HazardOccurrenceParams { base: Some(base), factors: vec![factor] };
        let ps = run(single(IdiomParams::HazardOccurrence(params)));
        let adjusted = ps.mean("adjusted_probability").unwrap();
        prop_assert!((adjusted - base).abs() < 1e-9, "{adjusted} vs {base}");
    }

    #[test]
    fn saturated_risk_scores_agree(major in 0.01..1.0f64, minor in 0.0..1.0f64) {
        let top = |major: f64, minor: f64| {
            let params = RiskScoreParams { major: Some(major), minor: Some(minor), ..Default::default() };
            run(single(IdiomParams::RiskScore(params))).get("risk_level").unwrap().state_probability("very high").unwrap()
        };
        // Any score of at least 1 is clipped to the top of the scale.
        prop_assert!((top(major, minor) - top(1.0, 1.0)).abs() < 1e-9);
    }

    #[test]
    fn composition_is_associative(base in 0.01..0.5f64, given in 0.01..0.9f64, control in 0.0..1.0f64) {
        let h = instantiate("h", &IdiomParams::HazardOccurrence(HazardOccurrenceParams { base: Some(base), factors: vec![] })).unwrap();
        let i = instantiate("i", &IdiomParams::InjuryEvent(InjuryEventParams { p_hazard: None, p_injury_given_hazard: Some(given) })).unwrap();
        let c = instantiate("c", &IdiomParams::RiskControl(RiskControlParams { control: Some(control), event: None })).unwrap();

        let flat = compose(
            "flat",
            &[h.clone(), i.clone(), c.clone()],
            &[PortBinding::merge("h.adjusted_probability", "i.p_hazard"), PortBinding::merge("i.p_injury", "c.event")],
        )
        .unwrap();
        let left = compose_fragments("hi", &[h.clone(), i.clone()], &[PortBinding::merge("h.adjusted_probability", "i.p_hazard")]).unwrap();
        let left = compose("left", &[left, c.clone()], &[PortBinding::merge("hi.i.p_injury", "c.event")]).unwrap();
        let right = compose_fragments("ic", &[i, c], &[PortBinding::merge("i.p_injury", "c.event")]).unwrap();
        let right = compose("right", &[h, right], &[PortBinding::merge("h.adjusted_probability", "ic.i.p_hazard")]).unwrap();

        let ids = |m: &ModelSpec| m.nodes.iter().map(|n| n.id.clone()).collect::<BTreeSet<_>>();
        prop_assert_eq!(ids(&flat), ids(&left));
        prop_assert_eq!(ids(&flat), ids(&right));
        let (f, l, r) = (run(flat), run(left), run(right));
        for id in f.nodes.keys() {
            let (a, b, c) = (f.mean(id).unwrap(), l.mean(id).unwrap(), r.mean(id).unwrap());
            prop_assert!((a - b).abs() < 1e-9 && (a - c).abs() < 1e-9, "{id}: {a} {b} {c}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn oracle_seeds_agree(k in 0u32..20, n in 50u32..500, seed in 0u64..1000) {
        let model = build_model(pfd(k, n)).unwrap();
        let a = likelihood_weighted_posterior(&model, &Default::default(), 100_000, seed).unwrap();
        let b = likelihood_weighted_posterior(&model, &Default::default(), 100_000, seed + 1).unwrap();
        let (x, y) = (a.get("p").unwrap(), b.get("p").unwrap());
        let se = x.std_error.hypot(y.std_error);
        prop_assert!((x.mean - y.mean).abs() <= 5.0 * se + 1e-12, "{} vs {} (se {se})", x.mean, y.mean);
    }
}

#[test]
fn observed_value_is_a_point_posterior() {
    let mut spec = pfd(3, 100);
    spec.observations.insert("p".into(), Observation::Value(0.25));
    let ps = run(spec.clone());
    assert!(ps.get("p").unwrap().is_point_mass());
    assert_eq!(ps.mean("p"), Some(0.25));
}
