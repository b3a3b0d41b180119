//! Cantor-type set: at step `k` a central fraction `5/(k+5)` of each of the `2^(k-1)`
//! remaining intervals of `[-1/2, 1/2]` is removed.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{MalabError, Result};

pub const MAX_DEPTH: usize = 60;
/// Centres and survivor intervals are listed explicitly only up to this depth.
pub const MAX_LISTED_DEPTH: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CantorLevel {
    pub k: usize,
    /// Length `l_k` of each interval removed at this step.
    pub removed_length: f64,
    /// Length `L_k` of each surviving interval after this step.
    pub survivor_length: f64,
    /// Centres of the removed intervals (empty beyond the listing depth).
    pub centers: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CantorStructure {
    pub depth: usize,
    pub levels: Vec<CantorLevel>,
    /// Surviving intervals after the last step (empty beyond the listing depth).
    pub survivors: Vec<[f64; 2]>,
}

/// `l_k = 5/(k+5) L_{k-1}` and `L_k = L_{k-1} k / (2(k+5))`, `L_0 = 1`.
pub fn lengths_f64(depth: usize) -> (Vec<f64>, Vec<f64>) {
    let mut l = vec![f64::NAN];
    let mut big_l = vec![1.0];
    for k in 1..=depth {
        let prev = big_l[k - 1];
        l.push(5.0 / (k as f64 + 5.0) * prev);
        big_l.push(prev * k as f64 / (2.0 * (k as f64 + 5.0)));
    }
    (l, big_l)
}

/// Exact lengths; index 0 of `removed` is unused (zero).
#[derive(Debug, Clone, PartialEq)]
pub struct CantorLengths {
    pub removed: Vec<BigRational>,
    pub survivor: Vec<BigRational>,
}

pub fn lengths_exact(depth: usize) -> CantorLengths {
    let int = |n: usize| BigRational::from_integer(BigInt::from(n));
    let mut removed = vec![BigRational::zero()];
    let mut survivor = vec![BigRational::one()];
    for k in 1..=depth {
        let prev = survivor[k - 1].clone();
        removed.push(&prev * int(5) / int(k + 5));
        survivor.push(prev * int(k) / int(2 * (k + 5)));
    }
    CantorLengths { removed, survivor }
}

pub fn to_f64(q: &BigRational) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

/// Builds the structure to depth `K` (1 to 60).
pub fn build_cantor(depth: usize) -> Result<CantorStructure> {
    if depth == 0 || depth > MAX_DEPTH {
        return Err(MalabError::OutOfRange(format!("Cantor depth {depth} not in 1..={MAX_DEPTH}")));
    }
    let (l, big_l) = lengths_f64(depth);
    let mut intervals: Vec<[f64; 2]> = vec![[-0.5, 0.5]];
    let mut levels = Vec::with_capacity(depth);
    for k in 1..=depth {
        let listed = k <= MAX_LISTED_DEPTH;
        let mut centers = Vec::new();
        if listed {
            let mut next = Vec::with_capacity(2 * intervals.len());
            for iv in &intervals {
                let c = 0.5 * (iv[0] + iv[1]);
                centers.push(c);
                next.push([iv[0], c - 0.5 * l[k]]);
                next.push([c + 0.5 * l[k], iv[1]]);
            }
            intervals = if k < depth || depth <= MAX_LISTED_DEPTH { next } else { Vec::new() };
        } else {
            intervals.clear();
        }
        levels.push(CantorLevel {
            k,
            removed_length: l[k],
            survivor_length: big_l[k],
            centers,
        });
    }
    Ok(CantorStructure {
        depth,
        levels,
        survivors: if depth <= MAX_LISTED_DEPTH { intervals } else { Vec::new() },
    })
}

impl CantorStructure {
    /// Checks lengths against the recurrence, disjointness and containment.
    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 || self.depth > MAX_DEPTH || self.levels.len() != self.depth {
            return Err(MalabError::OutOfRange(format!("inconsistent depth {}", self.depth)));
        }
        let (l, big_l) = lengths_f64(self.depth);
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs().max(f64::MIN_POSITIVE);
        for (i, lv) in self.levels.iter().enumerate() {
            let k = i + 1;
            if lv.k != k || !close(lv.removed_length, l[k]) || !close(lv.survivor_length, big_l[k]) {
                return Err(MalabError::Degenerate(format!("level {k} lengths break the recurrence")));
            }
            let expected = if k <= MAX_LISTED_DEPTH { 1usize << (k - 1) } else { 0 };
            if lv.centers.len() != expected {
                return Err(MalabError::Degenerate(format!("level {k} lists {} centres, expected {expected}", lv.centers.len())));
            }
        }
        let expected = if self.depth <= MAX_LISTED_DEPTH { 1usize << self.depth } else { 0 };
        if self.survivors.len() != expected {
            return Err(MalabError::Degenerate(format!("{} survivors, expected {expected}", self.survivors.len())));
        }
        // removed intervals and survivors tile [-1/2, 1/2] when sorted
        let mut pieces: Vec<[f64; 2]> = self.survivors.clone();
        for lv in &self.levels {
            for c in &lv.centers {
                pieces.push([c - 0.5 * lv.removed_length, c + 0.5 * lv.removed_length]);
            }
        }
        if self.depth <= MAX_LISTED_DEPTH {
            pieces.sort_by(|a, b| a[0].total_cmp(&b[0]));
            let tol = 1e-12;
            if (pieces[0][0] + 0.5).abs() > tol || (pieces[pieces.len() - 1][1] - 0.5).abs() > tol {
                return Err(MalabError::Degenerate("pieces do not span [-1/2, 1/2]".into()));
            }
            for w in pieces.windows(2) {
                if (w[0][1] - w[1][0]).abs() > tol || w[0][1] < w[0][0] {
                    return Err(MalabError::Degenerate("removed intervals overlap or leave gaps".into()));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses and validates a serialized structure.
    pub fn from_json(text: &str) -> Result<Self> {
        let c: CantorStructure = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    /// Endpoints of the surviving intervals, sorted.
    pub fn survivor_endpoints(&self) -> Vec<f64> {
        let mut e: Vec<f64> = self.survivors.iter().flat_map(|iv| [iv[0], iv[1]]).collect();
        e.sort_by(|a, b| a.total_cmp(b));
        e
    }

    /// `x` lies in a surviving interval (within `tol`).
    pub fn survives(&self, x: f64, tol: f64) -> bool {
        self.survivors.iter().any(|iv| x >= iv[0] - tol && x <= iv[1] + tol)
    }
}

/// `sum r_i^a |log r_i|^eta`.
pub fn covering_sum(radii: &[f64], a: f64, eta: f64) -> Result<f64> {
    radii
        .iter()
        .map(|&r| {
            if !(r > 0.0 && r < 1.0) {
                Err(MalabError::OutOfRange(format!("radius {r} not in (0, 1)")))
            } else {
                Ok(r.powf(a) * r.ln().abs().powf(eta))
            }
        })
        .sum()
}

/// Covering sum of the natural depth-`k` cover (`2^k` intervals of length `L_k`),
/// with `a = 1`.
pub fn natural_cover_sum(big_l_k: f64, k: usize, eta: f64) -> f64 {
    2f64.powi(k as i32) * big_l_k * big_l_k.ln().abs().powf(eta)
}
