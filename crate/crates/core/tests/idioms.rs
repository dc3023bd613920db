use psi_core::graph::{build_model, CpdSpec, NodeKind};
use psi_core::idioms::{
    catalog, compose, instantiate, IdiomError, IdiomKind, IdiomParams, InjuryEventParams, PfdParams, PortBinding,
    ReworkParams, RiskControlParams, TtfParams, RANKED_SCALE,
};
use psi_core::inference::{infer, DiscretizationConfig};

fn fragment(instance: &str, params: IdiomParams) -> psi_core::idioms::IdiomFragment {
    instantiate(instance, &params).unwrap()
}

#[test]
fn every_catalog_example_runs() {
    let entries = catalog();
    assert_eq!(entries.len(), IdiomKind::ALL.len());
    for info in entries {
        let frag = instantiate("x", &info.example).unwrap();
        assert!(!info.outputs.is_empty(), "{} has no outputs", info.kind);
        for node in frag.outputs.values().chain(frag.inputs.values()) {
            assert!(frag.node(node).is_some(), "{}: port node {node} missing", info.kind);
        }
        let model = build_model(frag.into_model(info.kind.name())).unwrap_or_else(|e| panic!("{}: {e}", info.kind));
        let ps = infer(&model, &Default::default(), &DiscretizationConfig::default())
            .unwrap_or_else(|e| panic!("{}: {e}", info.kind));
        assert!(ps.nodes.values().all(|p| p.mean.is_finite()), "{}", info.kind);
    }
}

#[test]
fn instance_names_prefix_node_ids() {
    let frag = fragment("brakes", IdiomParams::Pfd(PfdParams::default()));
    assert_eq!(frag.port("p"), Some("brakes_p"));
    assert!(frag.nodes.iter().all(|n| n.id.starts_with("brakes_") && n.group.as_deref() == Some("brakes")));
    let bare = fragment("", IdiomParams::Pfd(PfdParams::default()));
    assert_eq!(bare.port("p"), Some("p"));
}

#[test]
fn parameters_are_checked() {
    let err = instantiate("", &IdiomParams::Pfd(PfdParams { observed: Some(-1.0), ..Default::default() })).unwrap_err();
    assert!(matches!(err, IdiomError::BadParameter { kind: IdiomKind::Pfd, .. }), "{err}");
    let err = instantiate("", &IdiomParams::RiskControl(RiskControlParams { control: Some(1.5), event: None })).unwrap_err();
    assert!(matches!(err, IdiomError::BadParameter { .. }), "{err}");
    let bad_state = ReworkParams { process_quality: Some("excellent".into()), ..Default::default() };
    // Unknown state labels surface when the observations are checked.
    let spec = instantiate("", &IdiomParams::Rework(bad_state)).unwrap().into_model("rework");
    let model = build_model(spec).unwrap();
    let err = infer(&model, &Default::default(), &DiscretizationConfig::default()).unwrap_err();
    assert!(err.to_string().contains("excellent"), "{err}");
}

#[test]
fn ttf_posterior_rate_matches_gamma() {
    let frag = fragment("", IdiomParams::Ttf(TtfParams { failure_times: vec![100.0, 150.0, 50.0], ..Default::default() }));
    let ps = infer(&build_model(frag.into_model("ttf")).unwrap(), &Default::default(), &DiscretizationConfig::default()).unwrap();
    // Flat prior, three exponential observations: rate ~ Gamma(4, 300).
    let rate = ps.mean("rate").unwrap();
    assert!((rate - 4.0 / 300.0).abs() / (4.0 / 300.0) < 0.01, "{rate}");
}

#[test]
fn merge_keeps_the_upstream_node() {
    let a = fragment("a", IdiomParams::InjuryEvent(InjuryEventParams { p_hazard: Some(0.2), p_injury_given_hazard: Some(0.5) }));
    let c = fragment("c", IdiomParams::RiskControl(RiskControlParams { control: Some(0.25), event: None }));
    let spec = compose("chain", &[a, c], &[PortBinding::merge("a.p_injury", "c.event")]).unwrap();
    assert!(spec.nodes.iter().all(|n| n.id != "c_event"));
    let residual = spec.nodes.iter().find(|n| n.id == "c_residual").unwrap();
    assert!(residual.parents.contains(&"a_p_injury".to_string()));
    let ps = infer(&build_model(spec).unwrap(), &Default::default(), &DiscretizationConfig::default()).unwrap();
    assert!((ps.mean("c_residual").unwrap() - 0.75 * 0.1).abs() < 1e-9);
}

#[test]
fn link_adds_a_parent_with_a_new_table() {
    let a = fragment("a", IdiomParams::RiskControl(RiskControlParams { control: Some(0.5), event: Some(0.4) }));
    let b = fragment("b", IdiomParams::RiskControl(RiskControlParams { control: Some(0.0), event: None }));
    let cpd = CpdSpec::Expression("Arithmetic(a_residual / 2)".into());
    let spec = compose("link", &[a, b], &[PortBinding::link("a.residual_probability", "b.event", Some(cpd))]).unwrap();
    let event = spec.nodes.iter().find(|n| n.id == "b_event").unwrap();
    assert_eq!(event.parents, vec!["a_residual".to_string()]);
    assert_eq!(event.kind, NodeKind::ContinuousInterval);
    let ps = infer(&build_model(spec).unwrap(), &Default::default(), &DiscretizationConfig::default()).unwrap();
    assert!((ps.mean("b_residual").unwrap() - 0.1).abs() < 1e-9);
}

#[test]
fn composition_errors() {
    let a = fragment("a", IdiomParams::RiskControl(RiskControlParams::default()));
    let b = fragment("b", IdiomParams::RiskControl(RiskControlParams::default()));
    let r = |from: &str, to: &str| compose("m", &[a.clone(), b.clone()], &[PortBinding::merge(from, to)]).unwrap_err();

    assert!(matches!(r("a.residual_probability", "z.event"), IdiomError::UnknownInstance(i) if i == "z"));
    assert!(matches!(r("a.nope", "b.event"), IdiomError::UnknownPort { .. }));
    assert!(matches!(r("residual", "b.event"), IdiomError::BadPortRef(_)));
    assert!(matches!(
        compose("m", &[a.clone(), a.clone()], &[]).unwrap_err(),
        IdiomError::DuplicateInstance(_) | IdiomError::DuplicateNode(_)
    ));

    let cycle = compose(
        "m",
        &[a.clone(), b.clone()],
        &[PortBinding::merge("a.residual_probability", "b.event"), PortBinding::merge("b.residual_probability", "a.event")],
    )
    .unwrap_err();
    assert!(matches!(cycle, IdiomError::Cycle(_)), "{cycle}");

    let rework = fragment("w", IdiomParams::Rework(ReworkParams::default()));
    let kinds = compose("m", &[a, rework], &[PortBinding::merge("a.residual_probability", "w.effort")]).unwrap_err();
    assert!(matches!(kinds, IdiomError::PortKindMismatch { .. }), "{kinds}");
}

#[test]
fn ranked_scale_has_five_states() {
    assert_eq!(RANKED_SCALE.len(), 5);
    assert_eq!(RANKED_SCALE[0], "very low");
    assert_eq!(RANKED_SCALE[4], "very high");
}
