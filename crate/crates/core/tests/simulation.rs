use kshrink::config::RunConfig;
use kshrink::{
    chisq_identity_check, estimator_names, simulate_risk, table1_preset, table1_preset_with,
    table1_spec, EstimatorConfig, ModelSpec, ShrinkSpec, SimPlan, Table1Options,
};
use nalgebra::DVector;

fn plan(spec: ModelSpec, estimators: Vec<EstimatorConfig>, reps: u64) -> SimPlan {
    SimPlan {
        spec,
        estimators,
        replications: reps,
        seed: 17,
        common_random_numbers: true,
    }
}

// Always shrinks all the way: δ = ν̂.
fn pooled_only() -> EstimatorConfig {
    EstimatorConfig::Class1 { phi: ShrinkSpec::Clipped { a0: 1e300 } }
}

#[test]
fn baseline_risk_matches_trace() {
    let r = simulate_risk(&plan(table1_spec(2.0, &[1.0, 0.0, -1.0, 2.0, 0.5]), vec![EstimatorConfig::Js], 40_000)).unwrap();
    assert!((r.trace_v1q - 5.0).abs() < 1e-12);
    assert!((r.baseline_risk - 5.0).abs() < 4.0 * r.baseline_std_error);
}

#[test]
fn pooled_mean_risk_matches_closed_form() {
    // Equal means: risk of ν̂ is tr(AQ) = 50 / (10 · H₅).
    let h5 = 1.0 + 0.5 + 1.0 / 3.0 + 0.25 + 0.2;
    let want = 50.0 / (10.0 * h5);
    let r = simulate_risk(&plan(table1_spec(3.0, &[0.7; 5]), vec![pooled_only()], 40_000)).unwrap();
    let e = &r.estimators[0];
    assert!((e.risk_estimate - want).abs() < 4.0 * e.std_error, "{} vs {want}", e.risk_estimate);

    // Unequal means add the squared bias ‖Σ w_i μ_i − μ₁‖²_Q / σ².
    let c = [2.0, 0.0, 0.0, 0.0, 0.0];
    let sigma2 = 3.0;
    let w: Vec<f64> = (1..=5).map(|i| 1.0 / (i as f64 * h5)).collect();
    let bias = w[0] * c[0] - c[0];
    let want = want + 10.0 * 5.0 * bias * bias / sigma2;
    let r = simulate_risk(&plan(table1_spec(sigma2, &c), vec![pooled_only()], 40_000)).unwrap();
    let e = &r.estimators[0];
    assert!((e.risk_estimate - want).abs() < 4.0 * e.std_error, "{} vs {want}", e.risk_estimate);
}

#[test]
fn lincomb_without_shrinkage_has_zero_prial() {
    let est = EstimatorConfig::Lincomb {
        d: vec![0.5, 0.5, 0.0, 0.0, 0.0],
        phi: ShrinkSpec::Zero,
    };
    let r = simulate_risk(&plan(table1_spec(2.0, &[0.0; 5]), vec![est], 20_000)).unwrap();
    let e = &r.estimators[0];
    assert_eq!(e.prial, 0.0);
    // tr((V₁ + V₂)Q)/4 = 5 · 10 · 0.3 / 4.
    assert!((e.risk_estimate - 3.75).abs() < 4.0 * e.std_error);
}

#[test]
fn common_random_numbers_toggle() {
    let lincomb = EstimatorConfig::Lincomb { d: vec![0.5, 0.5, 0.0, 0.0, 0.0], phi: ShrinkSpec::Zero };
    let mut p = plan(
        table1_spec(2.0, &[0.0; 5]),
        vec![EstimatorConfig::eb(0.1), EstimatorConfig::eb(0.1), lincomb],
        20_000,
    );
    let crn = simulate_risk(&p).unwrap();
    assert_eq!(crn.estimators[0].risk_estimate, crn.estimators[1].risk_estimate);
    p.common_random_numbers = false;
    let ind = simulate_risk(&p).unwrap();
    assert_ne!(ind.estimators[0].risk_estimate, ind.estimators[1].risk_estimate);
    assert_eq!(ind.estimators[0].baseline_risk, ind.estimators[1].baseline_risk);
    // Each estimator is compared with the unshrunk estimate of its own target.
    let e = &ind.estimators[2];
    // The baseline loss is 0.75·χ²₅, with standard deviation 3.75·√(2/5).
    assert!((e.baseline_risk - 3.75).abs() < 4.0 * 3.75 * (0.4f64 / 20_000.0).sqrt());
    assert!((e.risk_estimate - 3.75).abs() < 4.0 * e.std_error);
    assert_eq!(ind, simulate_risk(&p).unwrap());
}

#[test]
fn equal_mean_rows_share_pt_eb_hb_prial() {
    let opts = Table1Options {
        replications: 3_000,
        ..Table1Options::default()
    };
    let reports: Vec<_> = table1_preset_with(&opts)
        .iter()
        .take(4)
        .map(|(_, p)| simulate_risk(p).unwrap())
        .collect();
    // PT, EB and HB; JS shrinks toward the origin and is not translation invariant.
    for est in [0, 2, 3] {
        for r in &reports[1..] {
            assert!((r.estimators[est].prial - reports[0].estimators[est].prial).abs() < 1e-9);
        }
    }
}

#[test]
fn invalid_plans_report_every_field() {
    let mut spec = table1_spec(2.0, &[0.0; 5]);
    spec.sigma2 = -1.0;
    let p = SimPlan {
        spec,
        estimators: vec![EstimatorConfig::eb(-1.0), EstimatorConfig::Js],
        replications: 0,
        seed: 0,
        common_random_numbers: true,
    };
    let msg = simulate_risk(&p).unwrap_err().to_string();
    assert!(msg.contains("replications"), "{msg}");
    assert!(msg.contains("sigma2"), "{msg}");
}

#[test]
fn duplicate_names_are_suffixed() {
    let names = estimator_names(&[EstimatorConfig::Js, EstimatorConfig::eb(0.1), EstimatorConfig::Js]);
    assert_eq!(names, vec!["JS", "EB", "JS#2"]);
}

#[test]
fn preset_round_trips_through_toml() {
    let plans = table1_preset();
    let cfg = RunConfig::from_plans(&plans, None).unwrap();
    let text = cfg.to_toml_string().unwrap();
    let back = RunConfig::from_toml_str(&text).unwrap().to_plans().unwrap();
    assert_eq!(back.len(), plans.len());
    for ((a_name, a), (b_name, b)) in plans.iter().zip(&back) {
        assert_eq!(a_name, b_name);
        assert_eq!(a, b);
    }
}

#[test]
fn chisq_second_moment() {
    // g(s) = s: E[S²] = σ⁴ n (n + 2).
    let r = chisq_identity_check(|s| s, |_| 1.0, 10, 1.5, 50_000, 3).unwrap();
    let exact = 1.5f64.powi(2) * 10.0 * 12.0;
    assert!((r.rhs - exact).abs() < 0.05 * exact);
    assert!(r.agrees_within(4.0));
    assert!(chisq_identity_check(|s| s, |_| 1.0, 10, 1.5, 1, 3).is_err());
}

#[test]
fn sample_draw_has_model_moments() {
    let model = table1_spec(2.0, &[1.0, 0.0, 0.0, 0.0, 0.0]).validate().unwrap();
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(5);
    let n = 20_000;
    let mut mean = DVector::zeros(5);
    let mut s_mean = 0.0;
    for _ in 0..n {
        let x = model.sample_draw(&mut rng);
        mean += &x.x[0];
        s_mean += x.s;
    }
    mean /= n as f64;
    s_mean /= n as f64;
    // X₁ ~ N(1, 0.2 I), S/2 ~ χ²_20.
    assert!((mean.add_scalar(-1.0)).amax() < 4.0 * (0.2f64 / n as f64).sqrt());
    assert!((s_mean - 40.0).abs() < 4.0 * (2.0 * 4.0 * 20.0 / n as f64).sqrt());
}
