//! Degenerate subsolution `w(x', x3) = g(x') (1 + x3^2 / |log g(x')|)` with
//! `g = x1^2 |log x1|^4 + |x2| / |log x2|`, and its anisotropic rescaling to the box.

use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{MalabError, Result};

pub const ALPHA: f64 = 4.0;
pub const BETA: f64 = 1.0;

/// `(g, grad g, diag of D^2 g)` for `0 < |y1|, |y2| < 1`; zero coordinates use the
/// continuous limits for `g` and its gradient.
fn g_parts(y1: f64, y2: f64) -> (f64, [f64; 2], [f64; 2]) {
    let (mut a, mut a1, mut a2) = (0.0, 0.0, 0.0);
    if y1 != 0.0 {
        let l1 = -y1.abs().ln();
        a = y1 * y1 * l1.powf(ALPHA);
        a1 = y1 * (2.0 * l1.powf(ALPHA) - ALPHA * l1.powf(ALPHA - 1.0));
        a2 = 2.0 * l1.powf(ALPHA) - 3.0 * ALPHA * l1.powf(ALPHA - 1.0) + ALPHA * (ALPHA - 1.0) * l1.powf(ALPHA - 2.0);
    }
    let (mut b, mut b1, mut b2) = (0.0, 0.0, f64::INFINITY);
    if y2 != 0.0 {
        let l2 = -y2.abs().ln();
        b = y2.abs() * l2.powf(-BETA);
        b1 = y2.signum() * (l2.powf(-BETA) + BETA * l2.powf(-BETA - 1.0));
        b2 = (BETA * l2.powf(-BETA - 1.0) + BETA * (BETA + 1.0) * l2.powf(-BETA - 2.0)) / y2.abs();
    }
    (a + b, [a1, b1], [a2, b2])
}

fn check_raw(y: [f64; 3]) -> Result<()> {
    if !(y[0].abs() < 1.0 && y[1].abs() < 1.0 && y[2].abs() <= 1.0) {
        return Err(MalabError::OutOfRange(format!("w evaluated at {y:?}, outside |y1|, |y2| < 1, |y3| <= 1")));
    }
    let (g, _, _) = g_parts(y[0], y[1]);
    if g >= 1.0 {
        return Err(MalabError::OutOfRange(format!("g = {g} >= 1 at {y:?}")));
    }
    Ok(())
}

pub fn g_eval(y1: f64, y2: f64) -> Result<f64> {
    check_raw([y1, y2, 0.0])?;
    Ok(g_parts(y1, y2).0)
}

/// Unscaled `w`; zero on `{y1 = y2 = 0}`.
pub fn w_raw(y: [f64; 3]) -> Result<f64> {
    check_raw(y)?;
    let g = g_parts(y[0], y[1]).0;
    if g == 0.0 {
        return Ok(0.0);
    }
    Ok(g * (1.0 + y[2] * y[2] / (-g.ln())))
}

pub fn w_raw_gradient(y: [f64; 3]) -> Result<[f64; 3]> {
    check_raw(y)?;
    let (g, dg, _) = g_parts(y[0], y[1]);
    if g == 0.0 {
        return Ok([0.0; 3]);
    }
    let l = -g.ln();
    let p1 = 1.0 / l + 1.0 / (l * l);
    let z = y[2];
    Ok([(1.0 + z * z * p1) * dg[0], (1.0 + z * z * p1) * dg[1], 2.0 * z * g / l])
}

/// Analytic Hessian; on `{y1 = 0}` or `{y2 = 0}` it is flagged as degenerate.
pub fn w_raw_hessian(y: [f64; 3]) -> Result<Matrix3<f64>> {
    check_raw(y)?;
    if y[0] == 0.0 || y[1] == 0.0 {
        return Err(MalabError::Degenerate(format!("w Hessian requested on a degenerate axis at {y:?}")));
    }
    let (g, dg, ddg) = g_parts(y[0], y[1]);
    let l = -g.ln();
    let p1 = 1.0 / l + 1.0 / (l * l);
    let p2 = (l + 2.0) / (g * l.powi(3));
    let z = y[2];
    let mut h = Matrix3::zeros();
    for i in 0..2 {
        for j in 0..2 {
            let diag = if i == j { ddg[i] } else { 0.0 };
            h[(i, j)] = (1.0 + z * z * p1) * diag + z * z * p2 * dg[i] * dg[j];
        }
        h[(i, 2)] = 2.0 * z * p1 * dg[i];
        h[(2, i)] = h[(i, 2)];
    }
    h[(2, 2)] = 2.0 * g / l;
    Ok(h)
}

/// The two dominant determinant terms
/// `x1^2 |log x1|^{2a} / |x2 (log x2)^{b+1} log g|` and `|log x1|^a / |(log x2)^{1+2b} log g|`.
pub fn leading_terms(y1: f64, y2: f64) -> Result<[f64; 2]> {
    check_raw([y1, y2, 0.0])?;
    let l1 = -y1.abs().ln();
    let l2 = -y2.abs().ln();
    let l = -g_parts(y1, y2).0.ln();
    Ok([
        y1 * y1 * l1.powf(2.0 * ALPHA) / (y2.abs() * l2.powf(BETA + 1.0) * l),
        l1.powf(ALPHA) / (l2.powf(1.0 + 2.0 * BETA) * l),
    ])
}

/// Central differences of `grad` with per-coordinate steps.
pub fn fd_hessian(grad: impl Fn([f64; 3]) -> Result<[f64; 3]>, y: [f64; 3], steps: [f64; 3]) -> Result<Matrix3<f64>> {
    let mut h = Matrix3::zeros();
    for j in 0..3 {
        let mut p = y;
        let mut m = y;
        p[j] += steps[j];
        m[j] -= steps[j];
        let (gp, gm) = (grad(p)?, grad(m)?);
        for i in 0..3 {
            h[(i, j)] = (gp[i] - gm[i]) / (2.0 * steps[j]);
        }
    }
    Ok(0.5 * (h + h.transpose()))
}

/// Difference measured in the natural scale of each entry, `|dH_ij| / sqrt(H_ii H_jj)`.
pub fn scaled_difference(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            let s = (a[(i, i)].abs() * a[(j, j)].abs()).sqrt().max(f64::MIN_POSITIVE);
            worst = worst.max((a[(i, j)] - b[(i, j)]).abs() / s);
        }
    }
    worst
}

/// `w_s(x) = scale * w(a1 x1, a2 x2, a3 x3)`, with `x1` measured from the survivor abscissa.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsolutionW {
    pub scale: f64,
    pub r0: f64,
    pub axis_scales: [f64; 3],
    pub alpha: f64,
    pub beta: f64,
}

pub const DEFAULT_R0: f64 = 0.002;

impl Default for SubsolutionW {
    fn default() -> Self {
        SubsolutionW::with_r0(DEFAULT_R0)
    }
}

impl SubsolutionW {
    /// Maps `|x1| <= 1.5`, `|x2| <= 1`, `|x3| <= 1` into `|y1|, |y2| <= r0`, `|y3| <= 1/2`.
    pub fn with_r0(r0: f64) -> Self {
        SubsolutionW {
            scale: 1.0,
            r0,
            axis_scales: [r0 / 1.5, r0, 0.5],
            alpha: ALPHA,
            beta: BETA,
        }
    }

    pub fn to_raw(&self, x: [f64; 3]) -> [f64; 3] {
        [self.axis_scales[0] * x[0], self.axis_scales[1] * x[1], self.axis_scales[2] * x[2]]
    }

    fn check(&self, y: [f64; 3]) -> Result<()> {
        let lim = self.r0 * (1.0 + 1e-9);
        if y[0].abs() > lim || y[1].abs() > lim {
            return Err(MalabError::OutOfRange(format!("w evaluated at {y:?}, outside |y'| <= r0 = {}", self.r0)));
        }
        Ok(())
    }

    pub fn eval(&self, x: [f64; 3]) -> Result<f64> {
        let y = self.to_raw(x);
        self.check(y)?;
        Ok(self.scale * w_raw(y)?)
    }

    pub fn hessian(&self, x: [f64; 3]) -> Result<Matrix3<f64>> {
        let y = self.to_raw(x);
        self.check(y)?;
        let d = Matrix3::from_diagonal(&self.axis_scales.into());
        Ok(self.scale * d * w_raw_hessian(y)? * d)
    }

    pub fn gradient(&self, x: [f64; 3]) -> Result<[f64; 3]> {
        let y = self.to_raw(x);
        self.check(y)?;
        let g = w_raw_gradient(y)?;
        Ok([0, 1, 2].map(|i| self.scale * self.axis_scales[i] * g[i]))
    }

    /// Finite-difference Hessian from the analytic gradient, relative steps `1e-5`.
    pub fn fd_hessian(&self, x: [f64; 3]) -> Result<Matrix3<f64>> {
        let steps = [1e-5 * x[0].abs(), 1e-5 * x[1].abs(), 1e-5 * x[2].abs().max(1e-2)];
        fd_hessian(|p| self.gradient(p), x, steps)
    }
}

/// Sampling box in the coordinates of `SubsolutionW::eval`:
/// `lo_i < |x_i| < hi_i` for `i = 1, 2` and `|x3| < z_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleRegion {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    pub z_max: f64,
}

impl SampleRegion {
    /// The image of the box `[-1,1]^3` shifted by a survivor in `[-1/2, 1/2]`, minus
    /// axis margins.
    pub fn example_box() -> Self {
        SampleRegion {
            lo: [1e-6, 1e-6],
            hi: [1.5, 1.0],
            z_max: 1.0,
        }
    }
}

/// Radical inverse of `index` in `base`.
pub fn halton(mut index: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while index > 0 {
        f /= base as f64;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

/// Halton points (bases 2, 3, 5, 7, 11): `|x1|`, `|x2|` log-uniform so every decade
/// down to the margins is visited, `x3` uniform, signs from the last two bases.
pub fn halton_points(region: &SampleRegion, count: usize) -> Vec<[f64; 3]> {
    (1..=count as u64)
        .map(|i| {
            let mag = |t: f64, lo: f64, hi: f64| (lo.ln() + t * (hi.ln() - lo.ln())).exp();
            let s1 = if halton(i, 7) < 0.5 { -1.0 } else { 1.0 };
            let s2 = if halton(i, 11) < 0.5 { -1.0 } else { 1.0 };
            [
                s1 * mag(halton(i, 2), region.lo[0], region.hi[0]),
                s2 * mag(halton(i, 3), region.lo[1], region.hi[1]),
                region.z_max * (2.0 * halton(i, 5) - 1.0),
            ]
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsolutionReport {
    pub samples: usize,
    pub region: SampleRegion,
    /// Minimum determinant of the Hessian before and after the computed scaling.
    pub min_det_unscaled: f64,
    pub min_det: f64,
    pub min_det_point: [f64; 3],
    /// Minimum eigenvalue relative to the largest one, over the samples.
    pub min_relative_eig: f64,
    pub min_eig_point: [f64; 3],
    pub scale: f64,
}

/// Sampling regions keep at least this distance from the axes.
pub const AXIS_MARGIN: f64 = 1e-6;

/// Relative eigenvalue floor below which a Hessian counts as indefinite.
pub const PSD_TOL: f64 = -1e-12;

fn relative_min_eig(h: &Matrix3<f64>) -> f64 {
    let e = SymmetricEigen::new(*h).eigenvalues;
    let max = e.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    e.iter().fold(f64::INFINITY, |m, &v| m.min(v)) / max.max(f64::MIN_POSITIVE)
}

/// Samples the Hessian of `w` (with unit scale), rejects any indefinite sample and
/// stores into `w.scale` the constant making the sampled minimum of `det D^2 w_s`
/// equal to `margin >= 1`.
pub fn verify_subsolution(w: &mut SubsolutionW, sample_count: usize, region: &SampleRegion, margin: f64) -> Result<SubsolutionReport> {
    if sample_count == 0 || margin < 1.0 || region.lo.iter().any(|&l| l < AXIS_MARGIN) {
        return Err(MalabError::OutOfRange("empty sample, margin < 1 or region touching the axes".into()));
    }
    let mut unit = w.clone();
    unit.scale = 1.0;
    let mut min_det = f64::INFINITY;
    let mut min_det_point = [f64::NAN; 3];
    let mut min_eig = f64::INFINITY;
    let mut min_eig_point = [f64::NAN; 3];
    for x in halton_points(region, sample_count) {
        let h = unit.hessian(x)?;
        let e = relative_min_eig(&h);
        if e < min_eig {
            min_eig = e;
            min_eig_point = x;
        }
        if e < PSD_TOL {
            return Err(MalabError::Indefinite { point: x, min_eig: e });
        }
        let d = h.determinant();
        if d < min_det {
            min_det = d;
            min_det_point = x;
        }
    }
    if !(min_det > 0.0) {
        return Err(MalabError::Degenerate(format!("sampled det D^2 w = {min_det:e} at {min_det_point:?}")));
    }
    w.scale = (margin / min_det).cbrt();
    Ok(SubsolutionReport {
        samples: sample_count,
        region: *region,
        min_det_unscaled: min_det,
        min_det: w.scale.powi(3) * min_det,
        min_det_point,
        min_relative_eig: min_eig,
        min_eig_point,
        scale: w.scale,
    })
}

/// Scale calibrated on the whole example box (`2*10^4` Halton points, margin 2).
pub fn calibrated_subsolution() -> Result<(SubsolutionW, SubsolutionReport)> {
    let mut w = SubsolutionW::default();
    let rep = verify_subsolution(&mut w, 20_000, &SampleRegion::example_box(), 2.0)?;
    Ok((w, rep))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_on_slices_and_axes() {
        for y in [[1e-3, 2e-4, 0.0], [-5e-4, 1e-6, 0.0]] {
            assert_eq!(w_raw(y).unwrap(), g_eval(y[0], y[1]).unwrap());
        }
        for z in [-0.9, 0.0, 0.5] {
            assert_eq!(w_raw([0.0, 0.0, z]).unwrap(), 0.0);
        }
        // continuity at the axes
        assert!(w_raw([1e-200, 1e-3, 0.3]).unwrap() - w_raw([0.0, 1e-3, 0.3]).unwrap() < 1e-300);
        assert!(w_raw([2.0, 0.0, 0.0]).is_err());
        assert!(w_raw_hessian([0.0, 1e-3, 0.0]).is_err());
    }

    #[test]
    fn hessian_symmetric_and_matches_differences() {
        let w = SubsolutionW::default();
        for x in [[0.3, 0.2, 0.4], [-0.01, 0.5, -0.9], [1.2, -1e-3, 0.1], [1e-3, 1e-4, 0.7]] {
            let h = w.hessian(x).unwrap();
            assert!((h - h.transpose()).norm() <= 1e-14 * h.norm());
            let fd = w.fd_hessian(x).unwrap();
            assert!(scaled_difference(&h, &fd) < 1e-4, "{x:?}: {}", scaled_difference(&h, &fd));
        }
    }

    #[test]
    fn gradient_matches_values() {
        let y = [3e-4, -7e-4, 0.3];
        let g = w_raw_gradient(y).unwrap();
        for i in 0..3 {
            let e = 1e-6 * y[i].abs();
            let mut p = y;
            let mut m = y;
            p[i] += e;
            m[i] -= e;
            let fd = (w_raw(p).unwrap() - w_raw(m).unwrap()) / (2.0 * e);
            assert!((fd - g[i]).abs() < 1e-6 * g[i].abs(), "{i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn slice_determinant_is_block_product() {
        // at y3 = 0 the Hessian is block diagonal: det = det(D^2 g) * 2g/|log g|
        for y in [[1e-3, 1e-5, 0.0], [2e-4, 1e-3, 0.0]] {
            let h = w_raw_hessian(y).unwrap();
            let (g, _, ddg) = g_parts(y[0], y[1]);
            let block = ddg[0] * ddg[1] * 2.0 * g / (-g.ln());
            let fd = fd_hessian(w_raw_gradient, y, [1e-5 * y[0], 1e-5 * y[1], 1e-3]).unwrap();
            assert!((h.determinant() / block - 1.0).abs() < 1e-12);
            assert!((fd.determinant() / block - 1.0).abs() < 0.2);
        }
    }

    #[test]
    fn leading_terms_asymptotics() {
        // with beta = 1 the determinant tends to 4 * (sum of the two terms) as the
        // logarithms grow; the factor 4 comes from D^2(x1^2 L^4) ~ 2L^4 and d33 w = 2g/L
        let pts = halton_points(
            &SampleRegion {
                lo: [1e-150, 1e-300],
                hi: [1e-60, 1e-60],
                z_max: 0.05,
            },
            200,
        );
        for y in pts {
            let t = leading_terms(y[0], y[1]).unwrap();
            let det = w_raw_hessian(y).unwrap().determinant();
            let q = det / (4.0 * (t[0] + t[1]));
            assert!((q - 1.0).abs() < 0.2, "{y:?}: {q}");
        }
    }

    #[test]
    fn first_term_dominates_below_cubic() {
        let pts = halton_points(
            &SampleRegion {
                lo: [1e-4, 1e-12],
                hi: [1e-2, 1e-2],
                z_max: 0.5,
            },
            500,
        );
        let mut seen = 0;
        for y in pts.iter().filter(|y| y[1].abs() < y[0].abs().powi(3)) {
            let t = leading_terms(y[0], y[1]).unwrap();
            assert!(t[0] > t[1], "{y:?}");
            seen += 1;
        }
        assert!(seen > 20);
    }

    #[test]
    fn halton_is_van_der_corput() {
        assert_eq!(halton(1, 2), 0.5);
        assert_eq!(halton(2, 2), 0.25);
        assert_eq!(halton(3, 2), 0.75);
        assert!((halton(1, 3) - 1.0 / 3.0).abs() < 1e-16);
        let r = SampleRegion {
            lo: [1e-6, 1e-6],
            hi: [0.1, 0.1],
            z_max: 0.5,
        };
        for p in halton_points(&r, 1000) {
            assert!(p[0].abs() > 1e-6 && p[0].abs() < 0.1 && p[2].abs() < 0.5);
        }
    }

    #[test]
    fn scaled_determinant_at_least_one() {
        let region = SampleRegion {
            lo: [1e-6, 1e-6],
            hi: [0.1, 0.1],
            z_max: 0.5,
        };
        let mut w = SubsolutionW::default();
        let rep = verify_subsolution(&mut w, 2000, &region, 1.0).unwrap();
        assert!(rep.min_relative_eig >= PSD_TOL && rep.min_det_unscaled > 0.0);
        assert!((rep.min_det - 1.0).abs() < 1e-9);
        for x in halton_points(&region, 2000) {
            assert!(w.hessian(x).unwrap().determinant() >= 1.0 - 1e-9);
        }
    }

    #[test]
    fn large_r0_is_rejected_as_indefinite() {
        let mut w = SubsolutionW::with_r0(0.3);
        let r = SampleRegion {
            lo: [1e-6, 1e-6],
            hi: [1.5, 1.0],
            z_max: 1.0,
        };
        assert!(matches!(verify_subsolution(&mut w, 5000, &r, 1.0), Err(MalabError::Indefinite { .. })));
    }
}
