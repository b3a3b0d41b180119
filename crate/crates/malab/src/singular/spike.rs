//! Convex spike function `v(x) = sum_k sum_i k^4 l_k^2 f((x - x_{i,k}) / l_k)`.
//!
//! Every summand is piecewise linear with kinks at its centre (slope jump `2 k^4 l_k`)
//! and at `centre ± l_k` (jump `k^4 l_k`), so the truncated series is stored as a
//! sorted kink list with prefix sums.

use serde::{Deserialize, Serialize};

use super::cantor::{build_cantor, lengths_f64, CantorStructure, MAX_LISTED_DEPTH};
use crate::error::{MalabError, Result};

/// `|x|` on `[-1, 1]`, `2|x| - 1` outside.
pub fn f_eval(x: f64) -> f64 {
    let a = x.abs();
    if a <= 1.0 {
        a
    } else {
        2.0 * a - 1.0
    }
}

/// Which side of `x` a separation probe looks at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Right,
    Left,
}

#[derive(Debug, Clone)]
pub struct SpikeFunction {
    pub cantor: CantorStructure,
    pub depth: usize,
    kinks: Vec<f64>,
    jumps: Vec<f64>,
    pj: Vec<f64>,
    pjk: Vec<f64>,
    /// `v(-1)` and `v'(-1)`; every kink lies to the right of -1.
    v0: f64,
    s0: f64,
}

/// Below this many kinks a separation is summed term by term.
const DIRECT_SUM: usize = 2048;

impl SpikeFunction {
    /// Truncates the series after `depth` levels (1 to 20).
    pub fn new(depth: usize) -> Result<Self> {
        if depth == 0 || depth > MAX_LISTED_DEPTH {
            return Err(MalabError::OutOfRange(format!("spike depth {depth} not in 1..={MAX_LISTED_DEPTH}")));
        }
        let cantor = build_cantor(depth)?;
        let mut pairs: Vec<(f64, f64)> = Vec::new();
        let (mut v0, mut s0) = (0.0, 0.0);
        for lv in &cantor.levels {
            let (k, l) = (lv.k as f64, lv.removed_length);
            let w = k.powi(4) * l;
            for &c in &lv.centers {
                pairs.push((c, 2.0 * w));
                pairs.push((c - l, w));
                pairs.push((c + l, w));
                v0 += w * l * f_eval((-1.0 - c) / l);
                s0 -= 2.0 * w;
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let kinks: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let jumps: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let mut pj = vec![0.0; kinks.len() + 1];
        let mut pjk = vec![0.0; kinks.len() + 1];
        for i in 0..kinks.len() {
            pj[i + 1] = pj[i] + jumps[i];
            pjk[i + 1] = pjk[i] + jumps[i] * kinks[i];
        }
        Ok(SpikeFunction { cantor, depth, kinks, jumps, pj, pjk, v0, s0 })
    }

    fn check_x(x: f64) -> Result<()> {
        if !(x.abs() <= 1.0 + 1e-12) {
            return Err(MalabError::OutOfRange(format!("v evaluated at {x}, outside [-1, 1]")));
        }
        Ok(())
    }

    /// `sum J_i (t - kink_i)` over kinks with index in `[a, b)`.
    fn weighted(&self, a: usize, b: usize, t: f64) -> f64 {
        if b <= a {
            0.0
        } else if b - a <= DIRECT_SUM {
            (a..b).map(|i| self.jumps[i] * (t - self.kinks[i])).sum()
        } else {
            t * (self.pj[b] - self.pj[a]) - (self.pjk[b] - self.pjk[a])
        }
    }

    /// Truncated series value.
    pub fn v_eval(&self, x: f64) -> Result<f64> {
        Self::check_x(x)?;
        let i = self.kinks.partition_point(|&k| k < x);
        Ok(self.v0 + self.s0 * (x + 1.0) + self.weighted(0, i, x))
    }

    /// Summand-by-summand evaluation (reference path, O(2^depth)).
    pub fn v_eval_direct(&self, x: f64) -> Result<f64> {
        Self::check_x(x)?;
        let mut s = 0.0;
        for lv in &self.cantor.levels {
            let (k, l) = (lv.k as f64, lv.removed_length);
            for &c in &lv.centers {
                s += k.powi(4) * l * l * f_eval((x - c) / l);
            }
        }
        Ok(s)
    }

    /// One-sided slopes `[v'_-(x), v'_+(x)]`.
    pub fn v_subgradient(&self, x: f64) -> Result<[f64; 2]> {
        Self::check_x(x)?;
        let lo = self.kinks.partition_point(|&k| k < x);
        let hi = self.kinks.partition_point(|&k| k <= x);
        Ok([self.s0 + self.pj[lo], self.s0 + self.pj[hi]])
    }

    /// Bound on the omitted tail: for `|x| <= 1` each level-`k` summand is at most
    /// `3 k^4 l_k`, so the tail is at most `sum_{k > depth} 2^(k-1) 3 k^4 l_k`.
    pub fn tail_bound(&self) -> f64 {
        tail_bound(self.depth)
    }

    /// Value bracket `[v_depth(x), v_depth(x) + tail]` containing the full series.
    pub fn v_interval(&self, x: f64) -> Result<[f64; 2]> {
        let v = self.v_eval(x)?;
        Ok([v, v + self.tail_bound()])
    }

    /// `v(x ± r) - v(x) ∓ slope r`, with the one-sided slope facing the probe.
    /// Each kink strictly between contributes `jump * distance past it`.
    pub fn separation(&self, x: f64, r: f64, side: Side) -> Result<f64> {
        Self::check_x(x)?;
        match side {
            Side::Right => {
                Self::check_x(x + r)?;
                let a = self.kinks.partition_point(|&k| k <= x);
                let b = self.kinks.partition_point(|&k| k < x + r);
                Ok(self.weighted(a, b, x + r))
            }
            Side::Left => {
                Self::check_x(x - r)?;
                let a = self.kinks.partition_point(|&k| k <= x - r);
                let b = self.kinks.partition_point(|&k| k < x);
                // sum J (kink - (x - r))
                Ok(-self.weighted(a, b, x - r))
            }
        }
    }

    /// Separation normalised by `r^2 |log r|^4`; `r` must lie in `(l_K, l_1]`.
    pub fn separation_ratio(&self, x: f64, r: f64, side: Side) -> Result<f64> {
        let (l, _) = lengths_f64(self.depth);
        if !(r > l[self.depth] && r <= l[1]) {
            return Err(MalabError::OutOfRange(format!("probe distance {r} outside (l_K, l_1]")));
        }
        Ok(self.separation(x, r, side)? / (r * r * r.ln().powi(4)))
    }
}

/// `sum_{k > depth} 2^(k-1) 3 k^4 l_k`, using `2^(k-1) l_k = 600 / (k (k+1) ... (k+5))`;
/// terms are at most `1800 / k^2`, so the remainder past `N` is below `1800 / N`.
pub fn tail_bound(depth: usize) -> f64 {
    const N: usize = 1_000_000;
    let mut s = 0.0;
    for k in (depth + 1..=N).rev() {
        let kf = k as f64;
        let den: f64 = (0..6).map(|j| kf + j as f64).product();
        s += 1800.0 * kf.powi(4) / den;
    }
    s + 1800.0 / N as f64
}

/// Minimum separation ratio over all survivor endpoints at `endpoint_depth` (excluding
/// ±1/2) and all `r = l_k`, `k_lo <= k <= k_hi`, probing into the surviving interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationMinimum {
    pub endpoint_depth: usize,
    pub ratio: f64,
    pub x: f64,
    pub r: f64,
    pub side: Side,
}

pub fn separation_minimum(v: &SpikeFunction, endpoint_depth: usize, k_lo: usize, k_hi: usize) -> Result<SeparationMinimum> {
    if endpoint_depth > v.depth || k_hi > v.depth || k_lo < 2 || k_lo > k_hi {
        return Err(MalabError::OutOfRange("separation probe levels exceed the truncation depth".into()));
    }
    let (l, _) = lengths_f64(v.depth);
    let survivors = build_cantor(endpoint_depth)?.survivors;
    let mut best = SeparationMinimum {
        endpoint_depth,
        ratio: f64::INFINITY,
        x: f64::NAN,
        r: f64::NAN,
        side: Side::Right,
    };
    for iv in &survivors {
        for (x, side) in [(iv[0], Side::Right), (iv[1], Side::Left)] {
            if (x.abs() - 0.5).abs() < 1e-12 {
                continue;
            }
            for &r in &l[k_lo..=k_hi] {
                let q = v.separation_ratio(x, r, side)?;
                if q < best.ratio {
                    best = SeparationMinimum { endpoint_depth, ratio: q, x, r, side };
                }
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f_branches() {
        assert_eq!(f_eval(0.5), 0.5);
        assert_eq!(f_eval(2.0), 3.0);
        assert_eq!(f_eval(-1.0), 1.0);
        assert_eq!(f_eval(-1.0 - 1e-15), f_eval(-1.0 - 1e-15).abs());
        for i in -40..=40 {
            let x = i as f64 / 10.0;
            assert!(f_eval(x) >= x.abs() - 1.0);
        }
    }

    #[test]
    fn kink_form_matches_direct_sum() {
        let v = SpikeFunction::new(8).unwrap();
        for i in 0..=400 {
            let x = -1.0 + i as f64 / 200.0 + 1e-7;
            let x = x.min(1.0);
            let a = v.v_eval(x).unwrap();
            let b = v.v_eval_direct(x).unwrap();
            assert!((a - b).abs() < 1e-11 * (1.0 + b.abs()), "{x}: {a} vs {b}");
        }
    }

    #[test]
    fn slopes_nondecreasing_and_consistent() {
        let v = SpikeFunction::new(10).unwrap();
        let mut last = f64::NEG_INFINITY;
        for i in 0..=2000 {
            let x = -1.0 + i as f64 / 1000.0;
            let [lo, hi] = v.v_subgradient(x).unwrap();
            assert!(lo <= hi && lo >= last - 1e-9);
            last = hi;
        }
        let x = 0.3;
        let e = 1e-7;
        let [lo, hi] = v.v_subgradient(x).unwrap();
        let fd = (v.v_eval(x + e).unwrap() - v.v_eval(x - e).unwrap()) / (2.0 * e);
        assert!((fd - lo).abs() < 1e-5 && (hi - lo).abs() < 1e-12);
    }

    #[test]
    fn slope_jump_at_centres() {
        let v = SpikeFunction::new(6).unwrap();
        for lv in &v.cantor.levels {
            let w = (lv.k as f64).powi(4) * lv.removed_length;
            for &c in &lv.centers {
                let [lo, hi] = v.v_subgradient(c).unwrap();
                assert!(hi - lo >= w, "level {} jump {}", lv.k, hi - lo);
            }
        }
    }

    #[test]
    fn nondecreasing_in_depth_and_bounded() {
        let vs: Vec<SpikeFunction> = (4..=9).map(|d| SpikeFunction::new(d).unwrap()).collect();
        for i in 0..=50 {
            let x = -1.0 + i as f64 / 25.0;
            let vals: Vec<f64> = vs.iter().map(|v| v.v_eval(x).unwrap()).collect();
            for w in vals.windows(2) {
                assert!(w[1] >= w[0] - 1e-12);
            }
            for (v, val) in vs.iter().zip(&vals) {
                // the depth-9 value sits inside every coarser bracket
                let [lo, hi] = v.v_interval(x).unwrap();
                assert!(lo <= *val + 1e-12 && vals[5] <= hi);
            }
        }
        assert!(tail_bound(10) < tail_bound(5));
        assert!(tail_bound(0).is_finite());
    }

    #[test]
    fn separation_is_kink_sum() {
        let v = SpikeFunction::new(7).unwrap();
        for (x, r) in [(0.41, 0.03), (-0.2, 0.15), (0.45, 0.001)] {
            let [_, sr] = v.v_subgradient(x).unwrap();
            let direct = v.v_eval(x + r).unwrap() - v.v_eval(x).unwrap() - sr * r;
            assert!((v.separation(x, r, Side::Right).unwrap() - direct).abs() < 1e-11);
            let [sl, _] = v.v_subgradient(x).unwrap();
            let direct = v.v_eval(x - r).unwrap() - v.v_eval(x).unwrap() + sl * r;
            assert!((v.separation(x, r, Side::Left).unwrap() - direct).abs() < 1e-11);
        }
    }

    #[test]
    fn probe_range_enforced() {
        let v = SpikeFunction::new(6).unwrap();
        assert!(v.separation_ratio(0.0, 0.9, Side::Right).is_err());
        assert!(v.separation_ratio(0.0, 1e-9, Side::Right).is_err());
        assert!(v.v_eval(1.5).is_err());
    }

    #[test]
    fn case_one_growth() {
        // (x, x + r) contains the whole level-k removed interval: growth >= k^4 l_k^2
        let v = SpikeFunction::new(8).unwrap();
        let lv = &v.cantor.levels[3];
        let c = lv.centers[3];
        let l = lv.removed_length;
        let x = c - 0.6 * l;
        let r = 1.2 * l;
        assert!(v.separation(x, r, Side::Right).unwrap() >= 4f64.powi(4) * l * l);
    }

    #[test]
    fn quadratic_control_ratio_vanishes() {
        // v = x^2/2 separates by r^2/2, so r^2/2 / (r^2 |log r|^4) -> 0
        let ratio = |r: f64| 0.5 / r.ln().powi(4);
        assert!(ratio(1e-8) < ratio(1e-4) && ratio(1e-8) < 2e-5);
    }
}
