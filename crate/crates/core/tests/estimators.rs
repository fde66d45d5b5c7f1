#![allow(clippy::excessive_precision)]

mod common;

use kshrink::{
    bayes_oracle_normal, bayes_oracle_uniform, class1_estimate, eb_estimate, hb_estimate,
    heb_estimate, js_estimate, lincomb_estimate, phi_hb, pt_estimate, pt_threshold, stat_f,
    table1_spec, Estimator, EstimatorConfig, Model, ModelSpec, PhiHb, Sample, ShrinkFunction,
    ShrinkSpec,
};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::normal_vec;

fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, intervals: usize) -> f64 {
    let n = intervals + intervals % 2;
    let h = (hi - lo) / n as f64;
    let mut sum = f(lo) + f(hi);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(lo + h * i as f64);
    }
    sum * h / 3.0
}

// Brute-force double integral over x ∈ [0, F], v ∈ [LS, LS + span].
fn phi_hb_oracle(f: f64, s: f64, q: f64, a: f64, m: f64, l: f64) -> f64 {
    let v_lo = l * s;
    let span = 400.0;
    let inner = |x: f64| {
        simpson(
            |v: f64| (m * v.ln() - v * (x + 1.0) / 2.0 - m * (2.0 * m).ln()).exp(),
            v_lo,
            v_lo + span,
            4000,
        )
    };
    // x = u⁴ smooths the x^{q+a-1} endpoint behaviour.
    let outer = |power: f64| {
        simpson(
            |u| if u == 0.0 { 0.0 } else { 4.0 * u.powf(4.0 * power + 3.0) * inner(u.powi(4)) },
            0.0,
            f.powf(0.25),
            2000,
        )
    };
    outer(q + a) / outer(q + a - 1.0)
}

fn table_model() -> Model {
    table1_spec(2.0, &[0.0; 5]).validate().unwrap()
}

fn table_sample(seed: u64) -> Sample {
    let model = table_model();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    model.sample_draw(&mut rng)
}

#[test]
fn hb_with_lower_limit_matches_double_integral() {
    // p = k = 5, n = 20: q = 10, m = 19.
    for &(f, s, l) in &[(1.0, 1.0, 2.0), (3.0, 2.0, 5.0), (0.5, 10.0, 1.0)] {
        let got = phi_hb(f, s, 5, 5, 20, -7.72, 1.0, l).unwrap();
        let oracle = phi_hb_oracle(f, s, 10.0, -7.72, 19.0, l);
        assert!((got - oracle).abs() <= 1e-6 * oracle, "F={f} S={s} L={l}: {got} vs {oracle}");
    }
}

#[test]
fn hb_with_lower_limit_matches_high_precision_values() {
    // 30-digit evaluations of the same double integrals, frozen.
    let cases = [
        (1.0, 1.0, 2.0, 0.136288379995233232),
        (3.0, 2.0, 5.0, 0.136360842989366087),
        (0.5, 10.0, 1.0, 0.132669447726589131),
    ];
    for (f, s, l, want) in cases {
        let got = phi_hb(f, s, 5, 5, 20, -7.72, 1.0, l).unwrap();
        assert!((got - want).abs() <= 1e-10 * want, "F={f} S={s} L={l}: {got} vs {want}");
    }
}

#[test]
fn hb_lower_limit_makes_phi_depend_on_s() {
    let phi = PhiHb::new(5, 5, 20, -7.72, 1.0, 1.0).unwrap();
    let small = phi.value(2.0, 0.5).unwrap();
    let large = phi.value(2.0, 20.0).unwrap();
    assert!(large < small);
    let free = PhiHb::new(5, 5, 20, -7.72, 1.0, 0.0).unwrap();
    assert_eq!(free.value(2.0, 0.5).unwrap(), free.value(2.0, 20.0).unwrap());
}

#[test]
fn hb_closed_form_agrees_with_quadrature_route() {
    let phi = PhiHb::new(5, 5, 20, -7.72, 1.0, 0.0).unwrap();
    for f in [1e-3, 0.1, 1.0, 7.0, 50.0, 400.0] {
        let a = phi.value(f, 1.0).unwrap();
        let b = phi.value_by_quadrature(f, 1.0).unwrap();
        assert!((a - b).abs() <= 1e-10 * a, "F={f}: {a} vs {b}");
    }
}

#[test]
fn hb_rejects_out_of_domain_constants() {
    assert!(PhiHb::new(5, 5, 20, -10.0, 1.0, 0.0).is_err());
    assert!(PhiHb::new(5, 5, 20, 9.5, 1.0, 0.0).is_err());
    assert!(PhiHb::new(5, 5, 20, 0.0, 1.0, -1.0).is_err());
}

#[test]
fn hb_estimate_lies_on_segment_toward_pooled_mean() {
    let model = table_model();
    for seed in 0..50 {
        let x = table_sample(seed);
        let hb = hb_estimate(&x, &model, -7.72, 1.0, 0.0).unwrap();
        let nu = kshrink::pooled_mean(model.v(), &x.x).unwrap();
        let dir = &x.x[0] - &nu;
        let t = (&x.x[0] - &hb).dot(&dir) / dir.norm_squared();
        assert!((0.0..=1.0).contains(&t));
        let rebuilt = &x.x[0] - &dir * t;
        assert!((rebuilt - &hb).amax() < 1e-10);
    }
}

#[test]
fn eb_returns_pooled_mean_when_f_below_a0() {
    let model = table_model();
    let x = table_sample(3);
    let f = stat_f(&x, model.v()).unwrap();
    let eb = eb_estimate(&x, &model, 2.0 * f).unwrap();
    let nu = kshrink::pooled_mean(model.v(), &x.x).unwrap();
    assert_eq!(eb, nu);
    let far = eb_estimate(&x, &model, 1e-3 * f).unwrap();
    let expected = &x.x[0] - (&x.x[0] - &nu) * 1e-3;
    assert!((far - expected).amax() < 1e-12);
}

#[test]
fn zero_shrink_returns_x1() {
    let model = table_model();
    let x = table_sample(4);
    let zero = |_: f64, _: f64| 0.0;
    assert_eq!(class1_estimate(&x, &model, &zero).unwrap(), x.x[0]);
    let est = Estimator::new(&EstimatorConfig::Class1 { phi: ShrinkSpec::Zero }, &model).unwrap();
    assert_eq!(est.estimate(&model, &x).unwrap(), x.x[0]);
}

#[test]
fn pt_switches_at_threshold() {
    let model = table_model();
    let c = pt_threshold(5, 5, 20, 0.05).unwrap();
    // (20/20)·F_{20,20,0.05}.
    assert!((c - 2.124155).abs() < 1e-5);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..200 {
        let x = model.sample_draw(&mut rng);
        let f = stat_f(&x, model.v()).unwrap();
        let got = pt_estimate(&x, &model, 0.05).unwrap();
        if f > c {
            assert_eq!(got, x.x[0]);
        } else {
            assert_eq!(got, kshrink::pooled_mean(model.v(), &x.x).unwrap());
        }
    }
}

#[test]
fn js_shrinks_toward_origin() {
    let model = ModelSpec::scalar(4, 10, 1.0, &[1.0, 1.0], 1.0, &[0.0, 0.0]).validate().unwrap();
    let x1 = DVector::from_vec(vec![1.0, 2.0, 0.0, -2.0]);
    let s = Sample::new(vec![x1.clone(), DVector::zeros(4)], 3.0).unwrap();
    let got = js_estimate(&s, &model).unwrap();
    let expected = &x1 * (1.0 - (2.0 / 12.0) * 3.0 / 9.0);
    assert!((got - expected).amax() < 1e-14);
    let zero = Sample::new(vec![DVector::zeros(4), DVector::zeros(4)], 3.0).unwrap();
    assert_eq!(js_estimate(&zero, &model).unwrap(), DVector::zeros(4));
    let p1 = ModelSpec::scalar(1, 10, 1.0, &[1.0, 1.0], 1.0, &[0.0, 0.0]).validate().unwrap();
    let s1 = Sample::new(vec![DVector::from_element(1, 1.0); 2], 1.0).unwrap();
    assert!(js_estimate(&s1, &p1).is_err());
}

#[test]
fn heb_is_eb_minus_second_shrink() {
    let model = table_model();
    let x = table_sample(8);
    let nu = kshrink::pooled_mean(model.v(), &x.x).unwrap();
    let g = kshrink::stat_g(&x, model.v()).unwrap();
    let b0 = 3.0 / 44.0;
    let heb = heb_estimate(&x, &model, b0, b0).unwrap();
    let eb = eb_estimate(&x, &model, b0).unwrap();
    let expected = eb - &nu * (b0 / g).min(1.0);
    assert!((heb - expected).amax() < 1e-12);
}

#[test]
fn lincomb_with_first_unit_weight_is_class1() {
    let model = table_model();
    let x = table_sample(9);
    let phi = |f: f64, _: f64| f.min(0.1);
    let a = lincomb_estimate(&x, &model, &[1.0, 0.0, 0.0, 0.0, 0.0], &phi).unwrap();
    let b = class1_estimate(&x, &model, &phi).unwrap();
    assert!((a - b).amax() < 1e-14);
    assert!(lincomb_estimate(&x, &model, &[1.0, 0.0], &phi).is_err());
}

#[test]
fn bayes_oracles_limits() {
    let model = table_model();
    let x = table_sample(10);
    let nu = kshrink::pooled_mean(model.v(), &x.x).unwrap();
    assert_eq!(bayes_oracle_uniform(&x, &model, f64::INFINITY, 1.0).unwrap(), x.x[0]);
    let half = bayes_oracle_uniform(&x, &model, 1.0, 1.0).unwrap();
    assert!((&half - (&x.x[0] + &nu) * 0.5).amax() < 1e-12);
    let both = bayes_oracle_normal(&x, &model, 1.0, 2.0, 1.0).unwrap();
    assert!((both - (half - &nu * 0.25)).amax() < 1e-12);
    assert!(bayes_oracle_uniform(&x, &model, -1.0, 1.0).is_err());
}

#[test]
fn shrink_function_closures_and_specs() {
    let clip = |f: f64, _: f64| f.min(0.3);
    assert_eq!(ShrinkFunction::factor(&clip, 0.6, 1.0).unwrap(), 0.5);
    assert_eq!(ShrinkFunction::factor(&clip, 0.0, 1.0).unwrap(), 1.0);
    let model = table_model();
    let bound = ShrinkSpec::Clipped { a0: 0.3 }.bind(&model).unwrap();
    assert_eq!(bound.factor(0.6, 1.0).unwrap(), 0.5);
}

#[test]
fn estimates_are_invariant_to_data_translation_for_random_samples() {
    let model = table_model();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let t = normal_vec(&mut rng, 5) * 3.0;
    for _ in 0..20 {
        let x = model.sample_draw(&mut rng);
        let moved = x.translated(&t);
        let a = eb_estimate(&x, &model, 0.2).unwrap();
        let b = eb_estimate(&moved, &model, 0.2).unwrap() - &t;
        assert!((a - b).amax() < 1e-10);
    }
}
