//! End-to-end acceptance criteria. A single test runs all nine and prints one
//! `PASS`/`FAIL` line per criterion before asserting.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use shepp_olkin::calculus::{
    entropy_second_derivative_analytic, path_entropy, pmf_second_time_derivative, pmf_time_derivative,
    AffinePath,
};
use shepp_olkin::explorer::{
    estimate_critical_q, generate_instances, reevaluate_certificate, run_scan, PathFamily, ScanConfig,
    ScanInstance, ScanReport,
};
use shepp_olkin::fd;
use shepp_olkin::inequalities::{check_functional_lemma, check_monotone_worst_case, LemmaInputs, LemmaOptions, XLogX};
use shepp_olkin::pmf::{brute_force_pmf, compute_pmf, ParamVector};
use shepp_olkin::qentropy::{
    binomial2_tsallis_closed_form, find_critical_q, power_sum, power_sum_derivatives, CriticalProbe,
    EntropyKind, ProbeMethod,
};
use shepp_olkin::Error;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn shannon_scan() -> ScanReport {
    let mut c = ScanConfig::new(20_240_601);
    c.n_range = (1, 12);
    c.instance_count = 10_000;
    c.interior_margin = 1e-3;
    run_scan(&c).expect("scan runs")
}

fn random_params(rng: &mut ChaCha20Rng, n: usize, eps: f64) -> Vec<f64> {
    (0..n).map(|_| eps + (1.0 - 2.0 * eps) * rng.random::<f64>()).collect()
}

fn theorem_reproduction(report: &ScanReport, elapsed: f64) -> Outcome {
    let bound = 1e-9;
    let worst = |key: &str| report.worst_margin(key).unwrap_or(f64::INFINITY);
    let (uk, h2, eig) = (worst("uk_nonnegative"), worst("entropy_concavity"), worst("hessian_nsd"));
    ensure(report.instances >= 10_000, || format!("only {} instances", report.instances))?;
    ensure(uk >= -bound, || format!("min u_k = {uk:e}"))?;
    ensure(h2 >= -bound, || format!("max H'' = {:e}", -h2))?;
    ensure(eig >= -bound, || format!("max Hessian eigenvalue = {:e}", -eig))?;
    ensure(elapsed < 60.0, || format!("took {elapsed:.1} s"))?;
    Ok(format!(
        "{} instances, min u_k = {uk:.3e}, max H'' = {:.3e}, max eigenvalue = {:.3e}, {elapsed:.1} s",
        report.instances, -h2, -eig
    ))
}

fn inequality_ladder(report: &ScanReport) -> Outcome {
    let keys = [
        "log_concavity",
        "two_fold_log_concavity",
        "two_fold_forms",
        "c1",
        "c1bar",
        "c1_product_identity",
        "condition4",
        "corollary_fgh",
        "corollary_identity",
        "cij_nonpositive",
        "uk_transform",
        "uk_abc",
        "uk_alpha_beta_gamma",
        "uk_identity",
        "quadratic_decomposition_n2",
    ];
    for key in keys {
        let s = report.checks.get(key).ok_or_else(|| format!("{key} missing"))?;
        ensure(s.evaluated > 0, || format!("{key} never evaluated"))?;
        ensure(s.failures == 0 && s.errors == 0, || format!("{key}: {s:?}"))?;
    }
    ensure(report.violation_count == 0, || format!("{} violations", report.violation_count))?;
    Ok(format!("{} checkers hold on {} instances", keys.len(), report.instances))
}

fn rel_close(a: f64, b: f64, scale: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * scale.max(a.abs()).max(1e-12)
}

fn derivative_oracles() -> Outcome {
    let mut cfg = ScanConfig::new(7);
    cfg.instance_count = 1000;
    cfg.n_range = (1, 10);
    cfg.interior_margin = 0.01;
    let mut rng = ChaCha20Rng::seed_from_u64(99);
    let rel = 1e-5;
    let mut worst = 0.0f64;
    let mut track = |a: f64, b: f64, scale: f64| -> bool {
        let denom = scale.max(a.abs()).max(1e-12);
        worst = worst.max((a - b).abs() / denom);
        rel_close(a, b, scale, rel)
    };
    for ScanInstance { id, p, slopes, .. } in generate_instances(&cfg).map_err(|e| e.to_string())? {
        let path = AffinePath::maximal(ParamVector::new(p).unwrap(), slopes, 0.0).map_err(|e| e.to_string())?;
        let fail = |what: &str| format!("instance {id}: {what}");
        let pmf_at = |t: f64| compute_pmf(&path.at(t).unwrap()).into_vec();

        let df = pmf_time_derivative(&path, 0.0).unwrap();
        let df_fd = fd::central_first_vec(pmf_at, 0.0, fd::FIRST_STEP);
        let norm = df.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for (a, b) in df.iter().zip(&df_fd) {
            ensure(track(*a, *b, norm), || fail("df/dt"))?;
        }

        let d2f = pmf_second_time_derivative(&path, 0.0).unwrap();
        let d2f_fd = fd::central_second_vec(pmf_at, 0.0, fd::SECOND_STEP);
        let norm = d2f.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(norm);
        for (a, b) in d2f.iter().zip(&d2f_fd) {
            ensure(track(*a, *b, norm), || fail("d2f/dt2"))?;
        }

        let h2 = entropy_second_derivative_analytic(&path, 0.0).unwrap();
        let h2_fd = fd::five_point_second(|t| path_entropy(&path, t).unwrap(), 0.0, fd::SECOND_STEP);
        ensure(track(h2, h2_fd, 1e-3), || fail(&format!("H'' {h2} vs {h2_fd}")))?;

        let q = loop {
            let q: f64 = rng.random_range(0.5..4.0);
            if (q - 1.0).abs() > 0.05 {
                break q;
            }
        };
        let ps = power_sum_derivatives(&path, 0.0, q).unwrap();
        let t_at = |t: f64| power_sum(&compute_pmf(&path.at(t).unwrap()), q);
        let t1 = fd::five_point_first(t_at, 0.0, fd::FIRST_STEP);
        ensure(track(ps.first, t1, ps.value), || fail(&format!("T' at q = {q}")))?;
        let t2 = fd::five_point_second(t_at, 0.0, fd::SECOND_STEP);
        ensure(track(ps.second, t2, ps.second_scale), || fail(&format!("T'' at q = {q}")))?;
    }
    Ok(format!("1000 paths, worst relative deviation {worst:.2e}"))
}

fn critical_constants() -> Outcome {
    let target = 3.65986;
    let analytic = find_critical_q(&CriticalProbe::ThresholdPolynomial, (3.0, 4.0)).map_err(|e| e.to_string())?;
    ensure((analytic.root - target).abs() <= 1e-5, || format!("analytic root {}", analytic.root))?;
    let exact = find_critical_q(&CriticalProbe::Binomial2Tsallis { method: ProbeMethod::Analytic }, (3.5, 3.8))
        .map_err(|e| e.to_string())?;
    ensure((exact.root - target).abs() <= 1e-5, || format!("analytic probe root {}", exact.root))?;
    let numeric =
        find_critical_q(&CriticalProbe::Binomial2Tsallis { method: ProbeMethod::FiniteDifference }, (3.5, 3.8))
            .map_err(|e| e.to_string())?;
    ensure((numeric.root - target).abs() <= 1e-4, || format!("numeric probe root {}", numeric.root))?;
    let probe = CriticalProbe::Binomial2Tsallis { method: ProbeMethod::Analytic };
    for q in [1.5, 3.0, 4.0] {
        let (a, c) = (probe.eval(q).unwrap(), binomial2_tsallis_closed_form(q));
        ensure(rel_close(a, c, 0.0, 1e-6), || format!("q = {q}: {a} vs closed form {c}"))?;
    }
    Ok(format!(
        "threshold root {:.7}, analytic probe {:.7}, numeric probe {:.7}, closed form matches at q = 1.5, 3, 4",
        analytic.root, exact.root, numeric.root
    ))
}

fn counterexamples() -> Outcome {
    let mut renyi = ScanConfig::new(0);
    renyi.family = PathFamily::Bernoulli;
    renyi.interior_margin = 1e-6;
    renyi.instance_count = 61;
    renyi.inequality_set = vec!["renyi".into()];
    renyi.q_grid = Some(vec![2.5]);
    let r = run_scan(&renyi).map_err(|e| e.to_string())?;
    let small: Vec<_> = r.certificates.iter().filter(|c| c.p[0] <= 1e-3).collect();
    ensure(!small.is_empty(), || "no Rényi certificate with p <= 1e-3".into())?;

    let mut tsallis = ScanConfig::new(0);
    tsallis.family = PathFamily::Binomial2;
    tsallis.instance_count = 101;
    tsallis.inequality_set = vec!["tsallis".into()];
    tsallis.q_grid = Some(vec![4.0]);
    let t = run_scan(&tsallis).map_err(|e| e.to_string())?;
    ensure(!t.certificates.is_empty(), || "no Tsallis certificate at q = 4".into())?;

    for cert in r.certificates.iter().chain(&t.certificates) {
        let again = reevaluate_certificate(cert).map_err(|e| e.to_string())?;
        ensure(again == cert.margin && cert.reevaluated_margin == cert.margin, || {
            format!("certificate {cert:?} re-evaluates to {again}")
        })?;
        ensure(cert.margin < -cert.tolerance, || format!("certificate {cert:?} is within tolerance"))?;
    }

    let renyi_q = estimate_critical_q(&renyi, PathFamily::Bernoulli, EntropyKind::Renyi, (1.5, 3.0))
        .map_err(|e| e.to_string())?;
    ensure((renyi_q.result.root - 2.0).abs() < 0.05, || format!("Rényi scan root {}", renyi_q.result.root))?;
    let tsallis_q = estimate_critical_q(&tsallis, PathFamily::Binomial2, EntropyKind::Tsallis, (3.0, 4.0))
        .map_err(|e| e.to_string())?;
    ensure((tsallis_q.result.root - 3.65986).abs() < 1e-4, || {
        format!("Tsallis scan root {}", tsallis_q.result.root)
    })?;
    Ok(format!(
        "{} Rényi certificates with p <= 1e-3, {} Tsallis certificates, all reproduce; \
         scan critical q: Rényi {:.5}, Tsallis {:.6}",
        small.len(),
        t.certificates.len(),
        renyi_q.result.root,
        tsallis_q.result.root
    ))
}

/// Rounding of `sqrt` can push `B²` a few ulps past `AC`; this keeps boundary tuples admissible.
const ON_BOUNDARY: f64 = 1.0 - 1e-15;

fn admissible(rng: &mut ChaCha20Rng) -> LemmaInputs {
    let a: f64 = rng.random_range(1e-6..1.0);
    let c = rng.random_range(1e-6..1.0);
    let sign = |rng: &mut ChaCha20Rng| if rng.random::<bool>() { 1.0 } else { -1.0 };
    // a quarter of the tuples sit on the boundary B² = AC or β² = αγ
    let u = if rng.random_range(0..4) == 0 { ON_BOUNDARY } else { rng.random::<f64>() };
    let b = sign(rng) * u * (a * c).sqrt();
    let alpha: f64 = rng.random_range(0.0..5.0);
    let gamma = rng.random_range(0.0..5.0);
    let v = if rng.random_range(0..4) == 0 { ON_BOUNDARY } else { rng.random::<f64>() };
    let beta = sign(rng) * v * (alpha * gamma).sqrt();
    LemmaInputs { a, b, c, alpha, beta, gamma }
}

fn functional_lemma() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(6);
    let opts = LemmaOptions::default();
    let (mut worst_margin, mut worst_xi) = (f64::INFINITY, f64::INFINITY);
    for _ in 0..10_000 {
        let inputs = admissible(&mut rng);
        let r = check_functional_lemma(&XLogX, &inputs, &opts).map_err(|e| format!("{inputs:?}: {e}"))?;
        let m = r.margin.worst_or_inf();
        worst_margin = worst_margin.min(m);
        worst_xi = worst_xi.min(r.xi_second_min);
        ensure(m >= -1e-12, || format!("{inputs:?}: margin {m:e}"))?;
        ensure(r.xi_second_min >= -1e-12, || format!("{inputs:?}: xi'' min {:e}", r.xi_second_min))?;
    }
    let bad = [
        LemmaInputs { a: 1.2, b: 0.0, c: 0.5, alpha: 1.0, beta: 0.0, gamma: 1.0 },
        LemmaInputs { a: 0.0, b: 0.0, c: 0.5, alpha: 1.0, beta: 0.0, gamma: 1.0 },
        LemmaInputs { a: 0.5, b: 0.6, c: 0.5, alpha: 1.0, beta: 0.0, gamma: 1.0 },
        LemmaInputs { a: 0.5, b: 0.0, c: 0.5, alpha: -1.0, beta: 0.0, gamma: 1.0 },
        LemmaInputs { a: 0.5, b: 0.1, c: 0.5, alpha: 1.0, beta: 2.0, gamma: 1.0 },
        LemmaInputs { a: 0.5, b: f64::NAN, c: 0.5, alpha: 1.0, beta: 0.0, gamma: 1.0 },
    ];
    for inputs in bad {
        let r = check_functional_lemma(&XLogX, &inputs, &opts);
        ensure(matches!(r, Err(Error::LemmaHypothesis(_))), || format!("{inputs:?} accepted: {r:?}"))?;
    }
    Ok(format!(
        "10000 tuples, min margin {worst_margin:.3e}, min xi'' {worst_xi:.3e}; {} invalid tuples rejected",
        bad.len()
    ))
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(16);
    let mut worst_brute = 0.0f64;
    let mut worst_perm = 0.0f64;
    for case in 0..1000 {
        let n = rng.random_range(1..=16);
        let p = random_params(&mut rng, n, 0.0);
        let params = ParamVector::new(p.clone()).unwrap();
        let fast = compute_pmf(&params);
        let brute = brute_force_pmf(&params).map_err(|e| e.to_string())?;
        for (a, b) in fast.as_slice().iter().zip(brute.as_slice()) {
            worst_brute = worst_brute.max((a - b).abs());
        }
        ensure(worst_brute <= 1e-12, || format!("case {case}: brute-force deviation {worst_brute:e}"))?;

        let mut shuffled = p;
        for i in (1..n).rev() {
            shuffled.swap(i, rng.random_range(0..=i));
        }
        let perm = compute_pmf(&ParamVector::new(shuffled).unwrap());
        for (a, b) in fast.as_slice().iter().zip(perm.as_slice()) {
            worst_perm = worst_perm.max((a - b).abs());
        }
        ensure(worst_perm <= 1e-14, || format!("case {case}: permutation deviation {worst_perm:e}"))?;
    }
    Ok(format!("1000 cases, brute force within {worst_brute:.2e}, permutations within {worst_perm:.2e}"))
}

fn monotone_worst_case() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(8);
    let mut worst = f64::INFINITY;
    for case in 0..1000 {
        let n = rng.random_range(2..=8);
        let p = ParamVector::new(random_params(&mut rng, n, 1e-3)).unwrap();
        let abs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let r = check_monotone_worst_case(&p, &abs).map_err(|e| e.to_string())?;
        worst = worst.min(r.worst_or_inf());
        ensure(r.holds, || format!("case {case}: {r:?}"))?;
    }
    Ok(format!("1000 instances with n <= 8, worst margin {worst:.3e}"))
}

fn determinism() -> Outcome {
    let mut c = ScanConfig::new(42);
    c.n_range = (1, 8);
    c.instance_count = 300;
    c.inequality_set = vec!["shannon".into(), "renyi".into(), "tsallis".into()];
    c.q_grid = Some(vec![0.5, 2.5, 4.0]);
    let a = run_scan(&c).map_err(|e| e.to_string())?.to_json();
    let b = run_scan(&c.clone()).map_err(|e| e.to_string())?.to_json();
    ensure(a == b, || "scan JSON differs between runs".into())?;
    Ok(format!("two runs produce the same {} bytes", a.len()))
}

fn run(id: usize, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into()))
    });
    match outcome {
        Ok(detail) => {
            println!("acceptance {id} {name}: PASS ({detail})");
            true
        }
        Err(detail) => {
            println!("acceptance {id} {name}: FAIL ({detail})");
            false
        }
    }
}

#[test]
fn acceptance_criteria() {
    let start = Instant::now();
    let report = shannon_scan();
    let elapsed = start.elapsed().as_secs_f64();
    let results = [
        run(1, "theorem reproduction", || theorem_reproduction(&report, elapsed)),
        run(2, "inequality ladder", || inequality_ladder(&report)),
        run(3, "derivative oracles", derivative_oracles),
        run(4, "critical constants", critical_constants),
        run(5, "counterexample existence", counterexamples),
        run(6, "functional lemma", functional_lemma),
        run(7, "oracle equivalence", oracle_equivalence),
        run(8, "worst-case sign property", monotone_worst_case),
        run(9, "determinism", determinism),
    ];
    let failed: Vec<usize> = results.iter().enumerate().filter(|(_, ok)| !**ok).map(|(i, _)| i + 1).collect();
    assert!(failed.is_empty(), "failed acceptance criteria: {failed:?}");
}
