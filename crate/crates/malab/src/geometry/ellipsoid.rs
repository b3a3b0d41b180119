//! Maximum-volume inscribed ellipsoids centred at the hull centroid.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::hull::{affine_basis, convex_hull, Hull, P3};
use crate::error::{MalabError, Result};

pub const JOHN_MAX_ITER: usize = 200;
pub const JOHN_GAP: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ellipsoid {
    pub center: Vec<f64>,
    /// Orthonormal directions, matching `semi_lengths` entry by entry.
    pub axes: Vec<Vec<f64>>,
    /// Sorted descending. Zero entries mark collapsed directions.
    pub semi_lengths: Vec<f64>,
}

impl Ellipsoid {
    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// `sum s_i^2 a_i a_i^T`.
    pub fn shape(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut q = DMatrix::zeros(n, n);
        for (a, s) in self.axes.iter().zip(&self.semi_lengths) {
            let v = DVector::from_column_slice(a);
            q += s * s * &v * v.transpose();
        }
        q
    }

    /// Minkowski gauge about the centre: `<= 1` inside. Infinite off a degenerate slab.
    pub fn gauge(&self, x: &[f64]) -> f64 {
        self.gauge_about(&self.center, x)
    }

    /// Gauge of the same shape translated to `origin`.
    pub fn gauge_about(&self, origin: &[f64], x: &[f64]) -> f64 {
        let mut g2 = 0.0;
        for (a, s) in self.axes.iter().zip(&self.semi_lengths) {
            let t: f64 = a.iter().zip(x.iter().zip(origin)).map(|(ai, (xi, oi))| ai * (xi - oi)).sum();
            if *s > 0.0 {
                g2 += (t / s).powi(2);
            } else if t.abs() > 1e-12 {
                return f64::INFINITY;
            }
        }
        g2.sqrt()
    }

    /// Support value `sqrt(n^T Q n)` of the shape along `n`.
    pub fn support(&self, n: &[f64]) -> f64 {
        let mut s2 = 0.0;
        for (a, s) in self.axes.iter().zip(&self.semi_lengths) {
            let t: f64 = a.iter().zip(n).map(|(x, y)| x * y).sum();
            s2 += (s * t).powi(2);
        }
        s2.sqrt()
    }

    pub fn volume_factor(&self) -> f64 {
        self.semi_lengths.iter().product()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JohnEllipsoid {
    pub ellipsoid: Ellipsoid,
    /// Affine dimension of the input points.
    pub rank: usize,
    pub iterations: usize,
    pub duality_gap: f64,
    /// Smallest `C` with `hull - c` inside `C (E - c)`.
    pub outer_factor: f64,
    /// `outer_factor <= n^{3/2}` (the a-posteriori sandwich check).
    pub sandwich_ok: bool,
}

fn eig_sorted(q: &DMatrix<f64>) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = q.nrows();
    let eig = SymmetricEigen::new(q.clone());
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let axes = idx.iter().map(|&i| eig.eigenvectors.column(i).iter().cloned().collect()).collect();
    let lens = idx.iter().map(|&i| eig.eigenvalues[i].max(0.0).sqrt()).collect();
    (axes, lens)
}

/// Centred maximum-volume ellipsoid in `{a_i . x <= b_i}` by a Frank-Wolfe ascent with
/// away steps on the dual design problem. Returns the shape `Q`, iterations and gap.
fn centered_mvie(normals: &[Vec<f64>], slack: &[f64]) -> (DMatrix<f64>, usize, f64) {
    let n = normals[0].len();
    let m = normals.len();
    let pts: Vec<DVector<f64>> = normals.iter().zip(slack).map(|(a, d)| DVector::from_iterator(n, a.iter().map(|x| x / d))).collect();
    let mut u = vec![1.0 / m as f64; m];
    let nf = n as f64;
    let moment = |u: &[f64]| {
        let mut mm = DMatrix::zeros(n, n);
        for (p, w) in pts.iter().zip(u) {
            if *w > 0.0 {
                mm += *w * p * p.transpose();
            }
        }
        mm
    };
    let mut iters = 0;
    let mut gap;
    loop {
        let minv = moment(&u).try_inverse().unwrap_or_else(|| DMatrix::identity(n, n));
        let kappa: Vec<f64> = pts.iter().map(|p| (p.transpose() * &minv * p)[(0, 0)]).collect();
        let (jp, kp) = kappa.iter().enumerate().fold((0, f64::NEG_INFINITY), |b, (i, &k)| if k > b.1 { (i, k) } else { b });
        let (jm, km) = kappa
            .iter()
            .enumerate()
            .filter(|(i, _)| u[*i] > 0.0)
            .fold((0, f64::INFINITY), |b, (i, &k)| if k < b.1 { (i, k) } else { b });
        gap = kp / nf - 1.0;
        if gap <= JOHN_GAP || iters >= JOHN_MAX_ITER {
            let q = minv / kp;
            return (q, iters, gap.max(0.0));
        }
        iters += 1;
        let eps_plus = kp / nf - 1.0;
        let eps_minus = 1.0 - km / nf;
        if eps_plus >= eps_minus || km <= 1.0 {
            let tau = (kp - nf) / (nf * (kp - 1.0));
            for w in u.iter_mut() {
                *w *= 1.0 - tau;
            }
            u[jp] += tau;
        } else {
            let tau_opt = (nf - km) / (nf * (km - 1.0));
            let tau_max = u[jm] / (1.0 - u[jm]);
            let tau = tau_opt.min(tau_max);
            for w in u.iter_mut() {
                *w *= 1.0 + tau;
            }
            u[jm] -= tau;
            if u[jm] < 1e-15 {
                u[jm] = 0.0;
            }
        }
    }
}

fn full_rank_john(hull: &Hull) -> Result<JohnEllipsoid> {
    let n = hull.dim;
    let c = hull.centroid;
    let mut normals = Vec::new();
    let mut slack = Vec::new();
    for f in &hull.facets {
        let d = f.offset - (0..n).map(|a| f.normal[a] * c[a]).sum::<f64>();
        if !(d > 0.0) {
            return Err(MalabError::Degenerate("hull centroid on a facet".into()));
        }
        normals.push(f.normal[..n].to_vec());
        slack.push(d);
    }
    let (q, iterations, duality_gap) = centered_mvie(&normals, &slack);
    let (axes, semi_lengths) = eig_sorted(&q);
    let ellipsoid = Ellipsoid {
        center: c[..n].to_vec(),
        axes,
        semi_lengths,
    };
    let outer_factor = hull.vertices.iter().map(|v| ellipsoid.gauge(&v[..n])).fold(0.0, f64::max);
    Ok(JohnEllipsoid {
        ellipsoid,
        rank: n,
        iterations,
        duality_gap,
        outer_factor,
        sandwich_ok: outer_factor <= (n as f64).powf(1.5) * (1.0 + 1e-9),
    })
}

/// John ellipsoid of a hull; degenerate hulls get a reduced-dimension ellipsoid.
pub fn john_of_hull(hull: &Hull) -> Result<JohnEllipsoid> {
    let n = hull.dim;
    if hull.vertices.is_empty() {
        return Err(MalabError::Degenerate("empty point set".into()));
    }
    if hull.rank == n {
        return full_rank_john(hull);
    }
    let (rank, o, basis) = affine_basis(&hull.vertices, n);
    let mut center = o[..n].to_vec();
    let mut axes: Vec<Vec<f64>> = Vec::new();
    let mut lens: Vec<f64> = Vec::new();
    let mut iterations = 0;
    let mut duality_gap = 0.0;
    if rank > 0 {
        let local: Vec<P3> = hull
            .vertices
            .iter()
            .map(|v| {
                let mut p = [0.0; 3];
                for (k, b) in basis.iter().enumerate() {
                    p[k] = (0..3).map(|a| (v[a] - o[a]) * b[a]).sum();
                }
                p
            })
            .collect();
        let sub = full_rank_john(&convex_hull(&local, rank))?;
        iterations = sub.iterations;
        duality_gap = sub.duality_gap;
        for a in 0..n {
            center[a] = o[a] + (0..rank).map(|k| sub.ellipsoid.center[k] * basis[k][a]).sum::<f64>();
        }
        for (dir, s) in sub.ellipsoid.axes.iter().zip(&sub.ellipsoid.semi_lengths) {
            axes.push((0..n).map(|a| (0..rank).map(|k| dir[k] * basis[k][a]).sum()).collect());
            lens.push(*s);
        }
    }
    // complete the frame with directions orthogonal to the affine hull
    for e in 0..n {
        if axes.len() == n {
            break;
        }
        let mut v: Vec<f64> = (0..n).map(|a| if a == e { 1.0 } else { 0.0 }).collect();
        for a in &axes {
            let t: f64 = a.iter().zip(&v).map(|(x, y)| x * y).sum();
            for (vi, ai) in v.iter_mut().zip(a) {
                *vi -= t * ai;
            }
        }
        let l = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if l > 1e-6 {
            axes.push(v.iter().map(|x| x / l).collect());
            lens.push(0.0);
        }
    }
    Ok(JohnEllipsoid {
        ellipsoid: Ellipsoid {
            center,
            axes,
            semi_lengths: lens,
        },
        rank,
        iterations,
        duality_gap,
        outer_factor: f64::INFINITY,
        sandwich_ok: false,
    })
}

/// John ellipsoid of the convex hull of `points` (all of one dimension, 1 to 3).
pub fn john_ellipsoid(points: &[Vec<f64>]) -> Result<JohnEllipsoid> {
    let dim = points.first().map(|p| p.len()).ok_or_else(|| MalabError::Degenerate("empty point set".into()))?;
    if dim == 0 || dim > 3 || points.iter().any(|p| p.len() != dim || p.iter().any(|x| !x.is_finite())) {
        return Err(MalabError::Degenerate("points must share a dimension in 1..=3 and be finite".into()));
    }
    let p3: Vec<P3> = points
        .iter()
        .map(|p| {
            let mut q = [0.0; 3];
            q[..dim].copy_from_slice(p);
            q
        })
        .collect();
    john_of_hull(&convex_hull(&p3, dim))
}
