//! Globally adaptive 21-point Gauss–Kronrod quadrature.
//!
//! [`integrate_components`] integrates several integrands that share one
//! panel partition; the partition is refined until every component meets
//! the relative tolerance. Ratios of integrals evaluated this way see the
//! same discretization in numerator and denominator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_REL_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_DEPTH: u32 = 60;
const MAX_PANELS: usize = 5000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureResult {
    pub value: f64,
    pub abs_error_estimate: f64,
    pub evaluations: usize,
}

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_994_693_586,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[derive(Clone, Copy)]
struct Panel<const N: usize> {
    lo: f64,
    hi: f64,
    depth: u32,
    value: [f64; N],
    error: [f64; N],
}

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut scaled = err.abs();
    if res_asc != 0.0 && scaled != 0.0 {
        let scale = (200.0 * scaled / res_asc).powf(1.5);
        scaled = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        scaled = scaled.max(50.0 * f64::EPSILON * res_abs);
    }
    scaled
}

fn gk21<const N: usize, F>(f: &F, lo: f64, hi: f64, depth: u32) -> Result<Panel<N>>
where
    F: Fn(f64) -> [f64; N],
{
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let mut fv1 = [[0.0; N]; 10];
    let mut fv2 = [[0.0; N]; 10];
    let fc = f(center);
    let mut kron = [0.0; N];
    let mut gauss = [0.0; N];
    let mut res_abs = [0.0; N];
    for c in 0..N {
        kron[c] = fc[c] * WGK[10];
        res_abs[c] = kron[c].abs();
    }
    for j in 0..10 {
        let x = half * XGK[j];
        let f1 = f(center - x);
        let f2 = f(center + x);
        fv1[j] = f1;
        fv2[j] = f2;
        for c in 0..N {
            let sum = f1[c] + f2[c];
            kron[c] += WGK[j] * sum;
            res_abs[c] += WGK[j] * (f1[c].abs() + f2[c].abs());
            // Gauss nodes sit at the odd Kronrod abscissae.
            if j % 2 == 1 {
                gauss[c] += WG[j / 2] * sum;
            }
        }
    }
    let mut value = [0.0; N];
    let mut error = [0.0; N];
    for c in 0..N {
        let mean = kron[c] * 0.5;
        let mut res_asc = WGK[10] * (fc[c] - mean).abs();
        for j in 0..10 {
            res_asc += WGK[j] * ((fv1[j][c] - mean).abs() + (fv2[j][c] - mean).abs());
        }
        value[c] = kron[c] * half;
        if !value[c].is_finite() {
            return Err(Error::Domain(format!(
                "integrand is not finite on [{lo}, {hi}]"
            )));
        }
        error[c] = rescale_error(
            (kron[c] - gauss[c]) * half,
            res_abs[c] * half.abs(),
            res_asc * half.abs(),
        );
    }
    Ok(Panel {
        lo,
        hi,
        depth,
        value,
        error,
    })
}

/// Integrates the `N` components of `f` over `[lo, hi]` on a shared adaptive
/// partition, stopping when each component's error estimate is within
/// `rel_tol` of its magnitude.
pub fn integrate_components<const N: usize, F>(
    f: F,
    lo: f64,
    hi: f64,
    rel_tol: f64,
    max_depth: u32,
) -> Result<[QuadratureResult; N]>
where
    F: Fn(f64) -> [f64; N],
{
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Domain(format!(
            "quadrature needs finite lo < hi (got [{lo}, {hi}])"
        )));
    }
    if !(rel_tol > 0.0) {
        return Err(Error::Domain(format!("rel_tol must be positive (got {rel_tol})")));
    }
    let mut panels = vec![gk21(&f, lo, hi, 0)?];
    let mut evaluations = 21;
    loop {
        let mut total = [0.0; N];
        let mut err = [0.0; N];
        for p in &panels {
            for c in 0..N {
                total[c] += p.value[c];
                err[c] += p.error[c];
            }
        }
        let converged = (0..N).all(|c| err[c] <= rel_tol * total[c].abs());
        let results = std::array::from_fn(|c| QuadratureResult {
            value: total[c],
            abs_error_estimate: err[c],
            evaluations,
        });
        if converged {
            return Ok(results);
        }
        let score = |p: &Panel<N>| {
            (0..N)
                .map(|c| p.error[c] / total[c].abs().max(f64::MIN_POSITIVE))
                .fold(0.0, f64::max)
        };
        let worst = panels
            .iter()
            .enumerate()
            .filter(|(_, p)| p.depth < max_depth)
            .max_by(|(_, a), (_, b)| score(a).total_cmp(&score(b)))
            .map(|(i, _)| i);
        let Some(worst) = worst else {
            return Err(Error::QuadratureNonConvergence { best: results[0] });
        };
        if panels.len() >= MAX_PANELS {
            return Err(Error::QuadratureNonConvergence { best: results[0] });
        }
        let p = panels.swap_remove(worst);
        let mid = 0.5 * (p.lo + p.hi);
        panels.push(gk21(&f, p.lo, mid, p.depth + 1)?);
        panels.push(gk21(&f, mid, p.hi, p.depth + 1)?);
        evaluations += 42;
    }
}

/// `∫_lo^hi f(x) dx` to relative tolerance `rel_tol`.
pub fn adaptive_quad<F>(f: F, lo: f64, hi: f64, rel_tol: f64) -> Result<QuadratureResult>
where
    F: Fn(f64) -> f64,
{
    let [r] = integrate_components(|x| [f(x)], lo, hi, rel_tol, DEFAULT_MAX_DEPTH)?;
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn linear() {
        let r = adaptive_quad(|x| x, 0.0, 1.0, DEFAULT_REL_TOL).unwrap();
        assert_relative_eq!(r.value, 0.5, epsilon = 1e-15);
        assert!(r.abs_error_estimate <= DEFAULT_REL_TOL * 0.5);
    }

    #[test]
    fn polynomial_exact() {
        let r = adaptive_quad(|x| x.powi(9) - 3.0 * x * x, -1.0, 2.0, 1e-12).unwrap();
        let expect = (2f64.powi(10) - 1.0) / 10.0 - (8.0 + 1.0);
        assert_relative_eq!(r.value, expect, max_relative = 1e-13);
    }

    #[test]
    fn endpoint_singularity() {
        // ∫₀¹ x^{-1/2} = 2
        let r = adaptive_quad(|x| 1.0 / x.sqrt(), 0.0, 1.0, 1e-8).unwrap();
        assert_relative_eq!(r.value, 2.0, max_relative = 1e-8);
    }

    #[test]
    fn shared_panels() {
        let [a, b] =
            integrate_components(|x| [x.exp(), x.cos()], 0.0, 3.0, 1e-12, DEFAULT_MAX_DEPTH)
                .unwrap();
        assert_relative_eq!(a.value, 3f64.exp() - 1.0, max_relative = 1e-12);
        assert_relative_eq!(b.value, 3f64.sin(), max_relative = 1e-12);
        assert_eq!(a.evaluations, b.evaluations);
    }

    #[test]
    fn bad_interval() {
        assert!(adaptive_quad(|x| x, 1.0, 0.0, 1e-8).is_err());
        assert!(adaptive_quad(|x| x, 0.0, f64::INFINITY, 1e-8).is_err());
    }

    #[test]
    fn non_finite_integrand() {
        assert!(matches!(
            adaptive_quad(|_| f64::NAN, 0.0, 1.0, 1e-8),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn nonconvergence_carries_estimate() {
        // discontinuous oscillation cannot meet 1e-15 within depth 3
        let res = integrate_components(|x| [(1.0 / (x + 1e-3)).sin()], 0.0, 1.0, 1e-15, 3);
        match res {
            Err(Error::QuadratureNonConvergence { best }) => {
                assert!(best.value.is_finite());
                assert!(best.abs_error_estimate > 0.0);
            }
            other => panic!("expected nonconvergence, got {other:?}"),
        }
    }
}
