use kshrink::numerics::{
    adaptive_quad, f_cdf, f_quantile, f_sf, ln_gamma, reg_inc_beta, reg_inc_gamma_p,
    reg_inc_gamma_q,
};

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

fn trapezoid(f: impl Fn(f64) -> f64, lo: f64, hi: f64, panels: usize) -> f64 {
    let h = (hi - lo) / panels as f64;
    let (mut sum, mut comp) = (0.5 * (f(lo) + f(hi)), 0.0);
    for i in 1..panels {
        let y = f(lo + h * i as f64) - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    sum * h
}

fn beta_density(a: f64, b: f64, t: f64) -> f64 {
    let ln_b = ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b);
    let left = if t == 0.0 { if a == 1.0 { 0.0 } else { f64::NEG_INFINITY } } else { (a - 1.0) * t.ln() };
    (left + (b - 1.0) * (1.0 - t).ln() - ln_b).exp()
}

#[test]
fn quadrature_matches_trapezoid_oracle() {
    let f = |x: f64| x.powf(2.28) * (1.0 + x).powf(-20.0);
    let oracle = trapezoid(f, 0.0, 10.0, 10_000_000);
    let got = adaptive_quad(f, 0.0, 10.0, 1e-12).unwrap().value;
    assert!((got - oracle).abs() <= 1e-9, "{got} vs {oracle}");
    assert!(got > 0.0);
}

#[test]
fn quadrature_simple_cases() {
    assert!((adaptive_quad(|x| x, 0.0, 1.0, 1e-10).unwrap().value - 0.5).abs() < 1e-15);
    let v = adaptive_quad(f64::exp, -1.0, 2.0, 1e-12).unwrap().value;
    assert!((v - (2f64.exp() - (-1f64).exp())).abs() < 1e-12);
    assert!(adaptive_quad(|x| x, 1.0, 0.0, 1e-10).is_err());
}

#[test]
fn inc_beta_matches_simpson_of_density() {
    for &(a, b, x) in &[(2.5, 3.0, 0.3), (10.0, 1.5, 0.8), (1.0, 1.0, 0.42), (7.3, 12.1, 0.35)] {
        let oracle = simpson(|t| beta_density(a, b, t), 0.0, x, 200_000);
        let got = reg_inc_beta(a, b, x).unwrap();
        assert!((got - oracle).abs() < 1e-9, "I({a},{b},{x}) = {got} vs {oracle}");
    }
}

#[test]
fn inc_gamma_matches_simpson_of_density() {
    for &(a, x) in &[(2.0, 1.5), (5.5, 3.0), (20.0, 25.0)] {
        let dens = |t: f64| if t == 0.0 { 0.0 } else { ((a - 1.0) * t.ln() - t - ln_gamma(a)).exp() };
        let oracle = simpson(dens, 0.0, x, 200_000);
        let p = reg_inc_gamma_p(a, x).unwrap();
        assert!((p - oracle).abs() < 1e-9, "P({a},{x}) = {p} vs {oracle}");
        assert!((p + reg_inc_gamma_q(a, x).unwrap() - 1.0).abs() < 1e-14);
    }
}

#[test]
fn f_quantile_matches_bisection_on_integrated_density() {
    // Independent F CDF: integrate the beta density of t = rx/(1+rx), r = d1/d2.
    let cdf = |d1: f64, d2: f64, q: f64| {
        let r = d1 / d2;
        let top = r * q / (1.0 + r * q);
        simpson(|t| beta_density(d1 / 2.0, d2 / 2.0, t), 0.0, top, 100_000)
    };
    for &(d1, d2, alpha) in &[(20u32, 20u32, 0.05), (4, 10, 0.05), (3, 30, 0.01)] {
        let (mut lo, mut hi) = (0.0, 50.0);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if cdf(d1 as f64, d2 as f64, mid) < 1.0 - alpha {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let got = f_quantile(d1, d2, alpha).unwrap();
        assert!((got - lo).abs() < 1e-6 * lo, "F({d1},{d2},{alpha}) = {got} vs {lo}");
        assert!((f_sf(d1, d2, got).unwrap() - alpha).abs() < 1e-10);
        assert!((f_cdf(d1, d2, got).unwrap() - (1.0 - alpha)).abs() < 1e-10);
    }
}
