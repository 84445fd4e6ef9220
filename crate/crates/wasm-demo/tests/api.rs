use shepp_olkin_wasm::api;

#[test]
fn pmf_summary_of_two_fair_coins() {
    let s = api::pmf_summary("0.5, 0.5").unwrap();
    assert_eq!(s.pmf, vec![0.25, 0.5, 0.25]);
    assert!((s.entropy - 1.5 * 2f64.ln()).abs() < 1e-15);
    assert!(s.hessian_max_eigenvalue.unwrap() < 0.0);
    assert!(api::pmf_summary("0,1").unwrap().hessian_max_eigenvalue.is_none());
    assert!(api::pmf_summary("0.5,2").is_err());
    assert!(api::pmf_summary("a").is_err());
}

#[test]
fn shannon_profile_is_concave() {
    let prof = api::entropy_profile("0.3,0.6,0.2", "1,-0.5,0.25", "shannon", 1.0, 101).unwrap();
    assert_eq!(prof.t.len(), 101);
    assert!(prof.max_second_derivative < 0.0);
    assert!(prof.t[0] <= 0.0 && *prof.t.last().unwrap() >= 0.0);
}

#[test]
fn tsallis_profile_turns_convex_at_high_order() {
    let prof = api::entropy_profile("0.5,0.5", "1,1", "tsallis", 4.0, 201).unwrap();
    assert!(prof.max_second_derivative > 0.0);
    let prof = api::entropy_profile("0.5,0.5", "1,1", "tsallis", 3.0, 201).unwrap();
    assert!(prof.max_second_derivative < 0.0);
    assert!(api::entropy_profile("0.5", "1", "tsallis", 1.0, 10).is_err());
    assert!(api::entropy_profile("0.5", "1", "other", 2.0, 10).is_err());
}

#[test]
fn tsallis_curve_and_critical_order() {
    let c = api::tsallis_q_curve(0.5, 5.0, 91).unwrap();
    assert!((c.critical_q - 3.65986).abs() < 1e-5);
    assert!(c.q.iter().all(|q| (q - 1.0).abs() > 1e-9));
    let at3 = c.q.iter().position(|&q| (q - 3.0).abs() < 1e-12).unwrap();
    assert!((c.second_derivative[at3] + 0.375).abs() < 1e-12);
    assert!(api::tsallis_q_curve(2.0, 1.0, 10).is_err());
}
