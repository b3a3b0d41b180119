//! Quantitative estimates measured on computed solutions: level-set integrals of the
//! Laplacian and their decay, Orlicz-type integrals, Jensen margins, ball lower bounds
//! near singular lines and Monge-Ampere mass probes.

use std::io::Write;

use log::debug;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::convex::{add_half_square, default_subgradient, ma_measure, ConvexGridFunction};
use crate::error::{MalabError, Result};
use crate::grid::{GridSpec, NodeKind};
use crate::sections::maximal_height;

pub use crate::singular::{covering_sum, natural_cover_sum};

/// Integration region; cells are weighted by midpoint quadrature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Subdomain {
    Whole,
    Ball { center: Vec<f64>, radius: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

impl Subdomain {
    /// `B_{1/2}` around the origin.
    pub fn half_ball(dim: usize) -> Self {
        Subdomain::Ball { center: vec![0.0; dim], radius: 0.5 }
    }

    fn contains(&self, x: &[f64]) -> bool {
        match self {
            Subdomain::Whole => true,
            Subdomain::Ball { center, radius } => dist2(x, center) <= radius * radius * (1.0 + 1e-12),
            Subdomain::Box { lo, hi } => x.iter().zip(lo.iter().zip(hi)).all(|(t, (a, b))| *t >= *a - 1e-12 && *t <= *b + 1e-12),
        }
    }
}

fn dist2(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Quadrature weights of the interior nodes in `region` (zero elsewhere). Ball membership is
/// decided at the node; boxes clip the cell.
pub fn cell_weights(grid: &GridSpec, region: &Subdomain) -> Vec<f64> {
    let kinds = grid.node_kinds();
    let vol = grid.cell_volume();
    (0..grid.len())
        .map(|i| {
            if kinds[i] != NodeKind::Interior {
                return 0.0;
            }
            let x = grid.point(i);
            match region {
                Subdomain::Box { lo, hi } => grid.cell_weight_in_box(i, lo, hi),
                _ if region.contains(&x[..grid.dim]) => vol,
                _ => 0.0,
            }
        })
        .collect()
}

/// `sum over {delta > t} of delta * weight`. Non-finite entries are skipped.
pub fn level_integral(delta: &[f64], weights: &[f64], t: f64) -> f64 {
    delta.iter().zip(weights).filter(|(d, w)| d.is_finite() && **d > t && **w > 0.0).map(|(d, w)| d * w).sum()
}

fn level_count(delta: &[f64], weights: &[f64], t: f64) -> usize {
    delta.iter().zip(weights).filter(|(d, w)| d.is_finite() && **d > t && **w > 0.0).count()
}

/// `t = 2^j`, `j = 0, 1, ...` while the level set holds at least `min_nodes` nodes.
pub fn dyadic_t_grid(delta: &[f64], weights: &[f64], min_nodes: usize) -> Vec<f64> {
    let mut ts = Vec::new();
    let mut t = 1.0;
    while level_count(delta, weights, t) >= min_nodes && ts.len() < 1100 {
        ts.push(t);
        t *= 2.0;
    }
    ts
}

/// `phi_p(s) = (log(1 + s))^p`.
fn log_power(s: f64, p: f64) -> f64 {
    if p == 0.0 {
        1.0
    } else {
        s.ln_1p().powf(p)
    }
}

/// `sum over {delta > 0} of delta (log(1 + delta))^p * weight`.
pub fn orlicz_integral(delta: &[f64], weights: &[f64], p: f64) -> Result<f64> {
    if !(p >= 0.0) {
        return Err(MalabError::OutOfRange(format!("Orlicz exponent {p} must be nonnegative")));
    }
    Ok(delta
        .iter()
        .zip(weights)
        .filter(|(d, w)| d.is_finite() && **d > 0.0 && **w > 0.0)
        .map(|(d, w)| d * log_power(*d, p) * w)
        .sum())
}

/// Layer-cake form of [`orlicz_integral`]: `int_0^inf level_integral(t) d(log(1+t))^p`,
/// trapezoidal in the Stieltjes measure over `ts` (sorted, starting at 0 and reaching the
/// largest value).
pub fn layer_cake_orlicz(delta: &[f64], weights: &[f64], p: f64, ts: &[f64]) -> Result<f64> {
    if ts.len() < 2 || ts[0] != 0.0 || ts.windows(2).any(|w| w[1] <= w[0]) {
        return Err(MalabError::OutOfRange("t-grid must start at 0 and increase".into()));
    }
    let li: Vec<f64> = ts.par_iter().map(|&t| level_integral(delta, weights, t)).collect();
    let mut total = 0.0;
    for j in 0..ts.len() - 1 {
        let dpsi = ts[j + 1].ln_1p().powf(p) - ts[j].ln_1p().powf(p);
        total += 0.5 * (li[j] + li[j + 1]) * dpsi;
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitModel {
    /// `value ~ C |log t|^(-e)`.
    LogPower,
    /// `value ~ C t^(-e)`.
    Power,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub model: FitModel,
    pub exponent: f64,
    /// Root-mean-square residual of the log-linear fit.
    pub residual: f64,
    pub points: usize,
}

/// Least-squares slope and RMS residual of `y` against `x`.
fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - my - slope * (a - mx)).powi(2)).sum();
    (slope, (rss / n).sqrt())
}

/// Both decay fits of a level-integral series. Nonpositive values (and, for the
/// `|log t|` fit, `t = 1`) are dropped; each fit needs at least 4 points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub log_power: Option<Fit>,
    pub power: Option<Fit>,
    pub dropped: usize,
}

pub fn decay_fit(ts: &[f64], values: &[f64]) -> Result<DecayFit> {
    if ts.len() != values.len() {
        return Err(MalabError::SizeMismatch { expected: ts.len(), found: values.len() });
    }
    let mut kept = Vec::new();
    let mut dropped = 0;
    for (&t, &v) in ts.iter().zip(values) {
        if v > 0.0 && t > 0.0 && v.is_finite() {
            kept.push((t, v));
        } else {
            debug!("decay fit drops t = {t}, value = {v}");
            dropped += 1;
        }
    }
    let fit = |model: FitModel| -> Option<Fit> {
        let pts: Vec<(f64, f64)> = kept
            .iter()
            .filter_map(|&(t, v)| match model {
                FitModel::LogPower => (t.ln().abs() > 0.0).then(|| (t.ln().abs().ln(), v.ln())),
                FitModel::Power => Some((t.ln(), v.ln())),
            })
            .collect();
        if pts.len() < 4 {
            return None;
        }
        let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        let (slope, residual) = linear_fit(&x, &y);
        Some(Fit { model, exponent: -slope, residual, points: x.len() })
    };
    let (log_power, power) = (fit(FitModel::LogPower), fit(FitModel::Power));
    if log_power.is_none() && power.is_none() {
        return Err(MalabError::OutOfRange(format!("decay fit needs at least 4 positive points, got {}", kept.len())));
    }
    Ok(DecayFit { log_power, power, dropped })
}

/// `phi(s) = (1 + s) (log(1 + s))^m`, convex on `s >= 0` for `m >= 1`.
pub fn orlicz_phi(s: f64, m: f64) -> f64 {
    (1.0 + s) * s.ln_1p().powf(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JensenCheck {
    /// `int_{B_r} phi(r^n f)`.
    pub lhs: f64,
    /// `c r^n phi(r^n avg f)` with `c r^n` the discrete ball volume.
    pub rhs: f64,
    pub c: f64,
    pub holds: bool,
}

/// Jensen step for nonnegative `f` sampled with quadrature `weights` on a ball of radius `r`.
pub fn jensen_check(f: &[f64], weights: &[f64], r: f64, dim: usize, m: f64) -> Result<JensenCheck> {
    if !(m >= 1.0) {
        return Err(MalabError::OutOfRange(format!("phi is convex only for M >= 1, got {m}")));
    }
    if f.len() != weights.len() {
        return Err(MalabError::SizeMismatch { expected: weights.len(), found: f.len() });
    }
    if let Some(v) = f.iter().find(|v| !(**v >= 0.0)) {
        return Err(MalabError::OutOfRange(format!("Jensen input must be nonnegative, got {v}")));
    }
    let rn = r.powi(dim as i32);
    let vol: f64 = weights.iter().sum();
    if !(vol > 0.0) {
        return Err(MalabError::Degenerate("empty ball".into()));
    }
    let lhs: f64 = f.iter().zip(weights).map(|(v, w)| w * orlicz_phi(rn * v, m)).sum();
    let mean = f.iter().zip(weights).map(|(v, w)| v * w).sum::<f64>() / vol;
    let rhs = vol * orlicz_phi(rn * mean, m);
    Ok(JensenCheck {
        lhs,
        rhs,
        c: vol / rn,
        holds: lhs >= rhs * (1.0 - 1e-12),
    })
}

/// Line `{point + t direction}`; nodes within one cell of it form the excluded collar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingularLine {
    pub point: [f64; 3],
    pub direction: [f64; 3],
}

impl SingularLine {
    pub fn distance(&self, x: &[f64; 3]) -> f64 {
        let n = self.direction.iter().map(|t| t * t).sum::<f64>().sqrt();
        let d: Vec<f64> = (0..3).map(|a| x[a] - self.point[a]).collect();
        let along: f64 = (0..3).map(|a| d[a] * self.direction[a]).sum::<f64>() / n;
        (d.iter().map(|t| t * t).sum::<f64>() - along * along).max(0.0).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallBound {
    pub r: f64,
    /// `int_{B_r} (1 + Lap u)(log(1 + Lap u))^M`.
    pub integral: f64,
    /// Same with the one-cell collar around the line removed (equals `integral` without a line).
    pub integral_excluded: f64,
    /// `integral / (r^(n-1) |log r|^(M-1))`.
    pub ratio: f64,
    pub ratio_excluded: f64,
    /// `sup over the sphere of u - u(x) - p.(y - x)`.
    pub growth: f64,
    /// `growth / (r / |log r|)`.
    pub growth_ratio: f64,
    pub jensen: JensenCheck,
}

/// Ball integrals and boundary growth at `node` for each radius (no singularity requirement).
pub fn ball_orlicz_ratio(u: &ConvexGridFunction, laplacian: &[f64], node: usize, radii: &[f64], m: f64, line: Option<&SingularLine>) -> Result<Vec<BallBound>> {
    let grid = u.grid();
    if u.kind(node) != NodeKind::Interior {
        return Err(MalabError::NotInterior { node });
    }
    let h = grid.max_spacing();
    let x = grid.point(node);
    let p = default_subgradient(u, node)?;
    let dim = grid.dim;
    let vol = grid.cell_volume();
    radii
        .iter()
        .map(|&r| {
            if !(r >= 3.0 * h - 1e-12 && r < 1.0) {
                return Err(MalabError::OutOfRange(format!("radius {r} not in [3 spacings, 1)")));
            }
            for a in 0..dim {
                let lo = grid.origin[a];
                let hi = lo + grid.spacing[a] * (grid.counts[a] - 1) as f64;
                if x[a] - r < lo - 1e-12 || x[a] + r > hi + 1e-12 {
                    return Err(MalabError::OutOfRange(format!("ball of radius {r} exits the domain")));
                }
            }
            let (mut integral, mut excluded, mut growth) = (0.0, 0.0, f64::NEG_INFINITY);
            let (mut fvals, mut weights) = (Vec::new(), Vec::new());
            for i in 0..grid.len() {
                let y = grid.point(i);
                let d = dist2(&y[..dim], &x[..dim]).sqrt();
                if (d - r).abs() <= 0.5 * h && u.in_domain(i) {
                    let lin: f64 = (0..dim).map(|a| p[a] * (y[a] - x[a])).sum();
                    growth = growth.max(u.value(i) - u.value(node) - lin);
                }
                if d > r * (1.0 + 1e-12) || u.kind(i) != NodeKind::Interior || !laplacian[i].is_finite() {
                    continue;
                }
                let lap = laplacian[i].max(0.0);
                let term = orlicz_phi(lap, m) * vol;
                integral += term;
                if line.is_none_or(|l| l.distance(&y) > h * (1.0 + 1e-9)) {
                    excluded += term;
                }
                fvals.push(lap / r.powi(dim as i32));
                weights.push(vol);
            }
            let bench = r.powi(dim as i32 - 1) * r.ln().abs().powf(m - 1.0);
            Ok(BallBound {
                r,
                integral,
                integral_excluded: excluded,
                ratio: integral / bench,
                ratio_excluded: excluded / bench,
                growth,
                growth_ratio: growth / (r / r.ln().abs()),
                jensen: jensen_check(&fvals, &weights, r, dim, m)?,
            })
        })
        .collect()
}

/// [`ball_orlicz_ratio`] at a node the sections flag as singular.
pub fn singular_ball_lower_bound(u: &ConvexGridFunction, laplacian: &[f64], node: usize, radii: &[f64], m: f64, line: Option<&SingularLine>) -> Result<Vec<BallBound>> {
    let mh = maximal_height(u, node)?;
    if !mh.singular {
        return Err(MalabError::OutOfRange(format!("node {node} is not singular (hbar = {:e})", mh.hbar)));
    }
    ball_orlicz_ratio(u, laplacian, node, radii, m, line)
}

/// `sup over |y - x| = r of f(y) - f(x) - p.(y - x)` for a closed-form `f` in 3-D, sampled
/// at `samples` Fibonacci points of the sphere.
pub fn analytic_boundary_growth(f: impl Fn([f64; 3]) -> Result<f64>, x: [f64; 3], p: [f64; 3], r: f64, samples: usize) -> Result<f64> {
    let f0 = f(x)?;
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let mut best = f64::NEG_INFINITY;
    for k in 0..samples {
        let z = 1.0 - 2.0 * (k as f64 + 0.5) / samples as f64;
        let rho = (1.0 - z * z).sqrt();
        let th = golden * k as f64;
        let d = [rho * th.cos(), rho * th.sin(), z];
        let y = [x[0] + r * d[0], x[1] + r * d[1], x[2] + r * d[2]];
        let lin = r * (p[0] * d[0] + p[1] * d[1] + p[2] * d[2]);
        best = best.max(f(y)? - f0 - lin);
    }
    Ok(best)
}

/// Exponents of the benchmark curves `r^(n-1) |log r|^eta`.
pub const PROBE_ETAS: [f64; 3] = [0.1, 0.5, 1.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbePoint {
    pub r: f64,
    /// Monge-Ampere mass of `u + |x|^2/2` in `B_r(x)`.
    pub mass: f64,
    pub benchmarks: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropProbe {
    pub node: usize,
    pub h: f64,
    pub hbar: f64,
    /// Largest admissible radius `exp(-|log h|^(1/2))`.
    pub r_max: f64,
    pub points: Vec<ProbePoint>,
}

/// Dyadic radii `r <= exp(-|log h|^(1/2))`, at least two spacings and inside the domain.
/// When `h <= hbar(x)` the hypothesis fails and the range is empty.
pub fn prop_probe(u: &ConvexGridFunction, node: usize, h: f64, slope_resolution: usize) -> Result<PropProbe> {
    if !(h > 0.0) {
        return Err(MalabError::NonPositiveHeight(h));
    }
    let grid = u.grid();
    let mh = maximal_height(u, node)?;
    let r_max = (-h.ln().abs().sqrt()).exp();
    let mut probe = PropProbe { node, h, hbar: mh.hbar, r_max, points: Vec::new() };
    if h <= mh.hbar {
        return Ok(probe);
    }
    let x = grid.point(node);
    let mut room = f64::INFINITY;
    for a in 0..grid.dim {
        let lo = grid.origin[a];
        let hi = lo + grid.spacing[a] * (grid.counts[a] - 1) as f64;
        room = room.min(x[a] - lo).min(hi - x[a]);
    }
    let r_min = 2.0 * grid.max_spacing();
    let mut radii = Vec::new();
    let mut r = 2f64.powi(r_max.log2().floor() as i32);
    while r >= r_min - 1e-12 {
        if r <= room + 1e-12 {
            radii.push(r);
        }
        r *= 0.5;
    }
    if radii.is_empty() {
        return Ok(probe);
    }
    let field = ma_measure(&add_half_square(u), slope_resolution)?;
    radii.reverse();
    let n1 = grid.dim as i32 - 1;
    for r in radii {
        let mass = field.mass_in_ball(&x[..grid.dim], r);
        let benchmarks = PROBE_ETAS.map(|eta| r.powi(n1) * r.ln().abs().powf(eta));
        probe.points.push(ProbePoint { r, mass, benchmarks });
    }
    Ok(probe)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Consistent,
    Inconsistent,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub param: f64,
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
}

impl SeriesPoint {
    pub fn exact(param: f64, value: f64) -> Self {
        SeriesPoint { param, value, lo: value, hi: value }
    }
}

/// One measured series with its fits; written as JSON or as a 4-column CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateReport {
    pub name: String,
    /// Grid label used in file names.
    pub grid: String,
    pub inputs: serde_json::Value,
    pub series: Vec<SeriesPoint>,
    pub fitted_exponent: Vec<Fit>,
    pub verdict: Verdict,
}

pub const CSV_HEADER: [&str; 4] = ["param", "value", "lo", "hi"];

impl EstimateReport {
    pub fn new(name: &str, grid: &str, inputs: serde_json::Value, series: Vec<SeriesPoint>) -> Result<Self> {
        let r = EstimateReport {
            name: name.to_string(),
            grid: grid.to_string(),
            inputs,
            series,
            fitted_exponent: Vec::new(),
            verdict: Verdict::Inconclusive,
        };
        r.validate()?;
        Ok(r)
    }

    /// Parameters strictly increasing; fits only with at least 4 points.
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(['/', '.']) {
            return Err(MalabError::OutOfRange(format!("bad report name {:?}", self.name)));
        }
        if self.series.windows(2).any(|w| !(w[1].param > w[0].param)) {
            return Err(MalabError::OutOfRange(format!("series parameters of {} not strictly increasing", self.name)));
        }
        if !self.fitted_exponent.is_empty() && self.series.len() < 4 {
            return Err(MalabError::OutOfRange(format!("{} carries a fit with {} points", self.name, self.series.len())));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: EstimateReport = serde_json::from_str(text)?;
        r.validate()?;
        Ok(r)
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        for p in &self.series {
            w.write_record([p.param, p.value, p.lo, p.hi].map(|v| format!("{v:e}")))?;
        }
        w.flush()?;
        Ok(())
    }

    /// `<name>.<grid>.<date>.csv`.
    pub fn csv_file_name(&self, date: &str) -> String {
        format!("{}.{}.{}.csv", self.name, self.grid, date)
    }
}

/// Level-integral series over the dyadic t-grid with both fits; the verdict asks for a
/// positive exponent in the `regime` model.
pub fn decay_report(name: &str, grid: &str, inputs: serde_json::Value, laplacian: &[f64], weights: &[f64], min_nodes: usize, regime: FitModel) -> Result<EstimateReport> {
    let ts = dyadic_t_grid(laplacian, weights, min_nodes);
    let values: Vec<f64> = ts.iter().map(|&t| level_integral(laplacian, weights, t)).collect();
    let series = ts.iter().zip(&values).map(|(&t, &v)| SeriesPoint::exact(t, v)).collect();
    let mut report = EstimateReport::new(name, grid, inputs, series)?;
    if let Ok(fit) = decay_fit(&ts, &values) {
        report.fitted_exponent = [fit.log_power, fit.power].into_iter().flatten().collect();
    }
    report.verdict = match report.fitted_exponent.iter().find(|f| f.model == regime) {
        None => Verdict::Inconclusive,
        Some(f) if f.exponent > 0.0 => Verdict::Consistent,
        Some(_) => Verdict::Inconsistent,
    };
    Ok(report)
}
