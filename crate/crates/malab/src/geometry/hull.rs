//! Convex hulls in one to three dimensions.

use std::collections::HashMap;

pub type P3 = [f64; 3];

#[derive(Debug, Clone, PartialEq)]
pub struct HalfSpace {
    /// Outward unit normal.
    pub normal: P3,
    /// `normal . x <= offset` inside.
    pub offset: f64,
}

/// Convex hull of a point set in its ambient dimension.
#[derive(Debug, Clone)]
pub struct Hull {
    pub dim: usize,
    /// Affine dimension of the point set.
    pub rank: usize,
    pub vertices: Vec<P3>,
    /// Facet half-spaces; empty unless `rank == dim`.
    pub facets: Vec<HalfSpace>,
    /// Volume in the ambient dimension (0 when degenerate).
    pub volume: f64,
    /// Centre of mass of the hull body (vertex mean when degenerate).
    pub centroid: P3,
}

fn sub(a: &P3, b: &P3) -> P3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: &P3, b: &P3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: &P3, b: &P3) -> P3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn norm(a: &P3) -> f64 {
    dot(a, a).sqrt()
}

fn orient3(a: &P3, b: &P3, c: &P3, d: &P3) -> f64 {
    dot(&cross(&sub(b, a), &sub(c, a)), &sub(d, a))
}

fn scale_of(points: &[P3]) -> f64 {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in points {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    (0..3).map(|a| hi[a] - lo[a]).fold(0.0, f64::max).max(f64::MIN_POSITIVE)
}

/// Orthonormal basis of the affine hull and its rank, from farthest-point probes.
pub fn affine_basis(points: &[P3], dim: usize) -> (usize, P3, Vec<P3>) {
    if points.is_empty() {
        return (0, [0.0; 3], Vec::new());
    }
    let s = scale_of(points);
    let tol = 1e-10 * s;
    let o = points[0];
    let mut basis: Vec<P3> = Vec::new();
    for _ in 0..dim {
        let mut best = 0.0;
        let mut best_v = [0.0; 3];
        for p in points {
            let mut v = sub(p, &o);
            for b in &basis {
                let t = dot(&v, b);
                for a in 0..3 {
                    v[a] -= t * b[a];
                }
            }
            let n = norm(&v);
            if n > best {
                best = n;
                best_v = v;
            }
        }
        if best <= tol {
            break;
        }
        basis.push([best_v[0] / best, best_v[1] / best, best_v[2] / best]);
    }
    (basis.len(), o, basis)
}

/// Lower-left monotone chain; returns counter-clockwise vertices without collinear points.
fn hull2(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut pts: Vec<[f64; 2]> = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let (mut lo, mut hi) = (pts[0], pts[0]);
    for p in &pts {
        for a in 0..2 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let s = (hi[0] - lo[0]).max(hi[1] - lo[1]);
    let tol = 1e-12 * s * s;
    let cr = |o: &[f64; 2], a: &[f64; 2], b: &[f64; 2]| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut lower: Vec<[f64; 2]> = Vec::new();
    for p in &pts {
        while lower.len() >= 2 && cr(&lower[lower.len() - 2], &lower[lower.len() - 1], p) <= tol {
            lower.pop();
        }
        lower.push(*p);
    }
    let mut upper: Vec<[f64; 2]> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2 && cr(&upper[upper.len() - 2], &upper[upper.len() - 1], p) <= tol {
            upper.pop();
        }
        upper.push(*p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn polygon_area_centroid(poly: &[[f64; 2]]) -> (f64, [f64; 2]) {
    let n = poly.len();
    let mut a2 = 0.0;
    let mut cx = 0.0;
    let mut cy = 0.0;
    let o = poly[0];
    for i in 0..n {
        let p = [poly[i][0] - o[0], poly[i][1] - o[1]];
        let q = [poly[(i + 1) % n][0] - o[0], poly[(i + 1) % n][1] - o[1]];
        let c = p[0] * q[1] - q[0] * p[1];
        a2 += c;
        cx += (p[0] + q[0]) * c;
        cy += (p[1] + q[1]) * c;
    }
    if a2.abs() < f64::MIN_POSITIVE {
        return (0.0, o);
    }
    (0.5 * a2, [o[0] + cx / (3.0 * a2), o[1] + cy / (3.0 * a2)])
}

fn mean(points: &[P3]) -> P3 {
    let mut c = [0.0; 3];
    for p in points {
        for a in 0..3 {
            c[a] += p[a];
        }
    }
    let n = points.len().max(1) as f64;
    [c[0] / n, c[1] / n, c[2] / n]
}

/// Hull of points lying in a lower-dimensional affine subspace: vertices only.
fn degenerate_hull(points: &[P3], dim: usize, rank: usize, o: P3, basis: &[P3]) -> Hull {
    let project = |p: &P3| -> Vec<f64> {
        let v = sub(p, &o);
        basis.iter().map(|b| dot(&v, b)).collect()
    };
    let lift = |c: &[f64]| -> P3 {
        let mut p = o;
        for (b, t) in basis.iter().zip(c) {
            for a in 0..3 {
                p[a] += t * b[a];
            }
        }
        p
    };
    let vertices: Vec<P3> = match rank {
        0 => vec![points[0]],
        1 => {
            let ts: Vec<f64> = points.iter().map(|p| project(p)[0]).collect();
            let lo = ts.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = ts.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            vec![lift(&[lo]), lift(&[hi])]
        }
        _ => {
            let flat: Vec<[f64; 2]> = points
                .iter()
                .map(|p| {
                    let c = project(p);
                    [c[0], c[1]]
                })
                .collect();
            hull2(&flat).iter().map(|c| lift(c)).collect()
        }
    };
    let centroid = mean(&vertices);
    Hull {
        dim,
        rank,
        vertices,
        facets: Vec::new(),
        volume: 0.0,
        centroid,
    }
}

fn hull_1d(points: &[P3]) -> Hull {
    let lo = points.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
    let hi = points.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
    Hull {
        dim: 1,
        rank: 1,
        vertices: vec![[lo, 0.0, 0.0], [hi, 0.0, 0.0]],
        facets: vec![
            HalfSpace {
                normal: [-1.0, 0.0, 0.0],
                offset: -lo,
            },
            HalfSpace {
                normal: [1.0, 0.0, 0.0],
                offset: hi,
            },
        ],
        volume: hi - lo,
        centroid: [0.5 * (lo + hi), 0.0, 0.0],
    }
}

fn hull_2d(points: &[P3]) -> Hull {
    let flat: Vec<[f64; 2]> = points.iter().map(|p| [p[0], p[1]]).collect();
    let poly = hull2(&flat);
    let (area, c) = polygon_area_centroid(&poly);
    let n = poly.len();
    let facets = (0..n)
        .map(|i| {
            let a = poly[i];
            let b = poly[(i + 1) % n];
            let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
            let l = (dx * dx + dy * dy).sqrt();
            let nrm = [dy / l, -dx / l, 0.0];
            HalfSpace {
                normal: nrm,
                offset: nrm[0] * a[0] + nrm[1] * a[1],
            }
        })
        .collect();
    Hull {
        dim: 2,
        rank: 2,
        vertices: poly.iter().map(|p| [p[0], p[1], 0.0]).collect(),
        facets,
        volume: area,
        centroid: [c[0], c[1], 0.0],
    }
}

/// Keeps only the points extreme along some axis-parallel line; hull vertices of a
/// lattice point set always survive this filter.
fn lattice_candidates(points: &[P3]) -> Vec<P3> {
    let key = |x: f64| (x * 1e6).round() as i64;
    let mut keep = vec![false; points.len()];
    for axis in 0..3 {
        let (a, b) = ((axis + 1) % 3, (axis + 2) % 3);
        let mut ext: HashMap<(i64, i64), (usize, usize)> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            let k = (key(p[a]), key(p[b]));
            let e = ext.entry(k).or_insert((i, i));
            if p[axis] < points[e.0][axis] {
                e.0 = i;
            }
            if p[axis] > points[e.1][axis] {
                e.1 = i;
            }
        }
        for (lo, hi) in ext.values() {
            keep[*lo] = true;
            keep[*hi] = true;
        }
    }
    points.iter().zip(&keep).filter(|(_, k)| **k).map(|(p, _)| *p).collect()
}

fn hull_3d(points: &[P3], o: P3, basis: &[P3]) -> Hull {
    let pts = lattice_candidates(points);
    let s = scale_of(&pts);
    let eps = 1e-12 * s * s * s;
    // initial tetrahedron from the probe directions
    let far = |dir: &P3| -> usize {
        let mut best = 0;
        let mut bv = f64::NEG_INFINITY;
        for (i, p) in pts.iter().enumerate() {
            let v = dot(&sub(p, &o), dir).abs();
            if v > bv {
                bv = v;
                best = i;
            }
        }
        best
    };
    let i0 = pts
        .iter()
        .position(|p| norm(&sub(p, &o)) == 0.0)
        .unwrap_or_else(|| {
            let mut best = 0;
            let mut bv = f64::INFINITY;
            for (i, p) in pts.iter().enumerate() {
                let v = norm(&sub(p, &o));
                if v < bv {
                    bv = v;
                    best = i;
                }
            }
            best
        });
    let i1 = far(&basis[0]);
    let i2 = {
        let mut best = 0;
        let mut bv = -1.0;
        for (i, p) in pts.iter().enumerate() {
            let v = norm(&cross(&sub(&pts[i1], &pts[i0]), &sub(p, &pts[i0])));
            if v > bv {
                bv = v;
                best = i;
            }
        }
        best
    };
    let i3 = {
        let mut best = 0;
        let mut bv = -1.0;
        for (i, p) in pts.iter().enumerate() {
            let v = orient3(&pts[i0], &pts[i1], &pts[i2], p).abs();
            if v > bv {
                bv = v;
                best = i;
            }
        }
        best
    };
    let mut faces: Vec<[usize; 3]> = Vec::new();
    let mut alive: Vec<bool> = Vec::new();
    let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
    let add_face = |f: [usize; 3], faces: &mut Vec<[usize; 3]>, alive: &mut Vec<bool>, edges: &mut HashMap<(usize, usize), usize>| {
        let id = faces.len();
        faces.push(f);
        alive.push(true);
        edges.insert((f[0], f[1]), id);
        edges.insert((f[1], f[2]), id);
        edges.insert((f[2], f[0]), id);
    };
    let (a, b, c, d) = if orient3(&pts[i0], &pts[i1], &pts[i2], &pts[i3]) < 0.0 {
        (i0, i1, i2, i3)
    } else {
        (i0, i2, i1, i3)
    };
    // with d below plane (a, b, c), every face below is oriented outward
    add_face([a, b, c], &mut faces, &mut alive, &mut edges);
    add_face([a, d, b], &mut faces, &mut alive, &mut edges);
    add_face([b, d, c], &mut faces, &mut alive, &mut edges);
    add_face([c, d, a], &mut faces, &mut alive, &mut edges);

    for (pi, p) in pts.iter().enumerate() {
        if pi == a || pi == b || pi == c || pi == d {
            continue;
        }
        let visible: Vec<usize> = (0..faces.len())
            .filter(|&f| alive[f] && orient3(&pts[faces[f][0]], &pts[faces[f][1]], &pts[faces[f][2]], p) > eps)
            .collect();
        if visible.is_empty() {
            continue;
        }
        let mut horizon = Vec::new();
        for &f in &visible {
            let v = faces[f];
            for (x, y) in [(v[0], v[1]), (v[1], v[2]), (v[2], v[0])] {
                match edges.get(&(y, x)) {
                    Some(other) if visible.contains(other) => {}
                    _ => horizon.push((x, y)),
                }
            }
        }
        for &f in &visible {
            alive[f] = false;
            let v = faces[f];
            for e in [(v[0], v[1]), (v[1], v[2]), (v[2], v[0])] {
                if edges.get(&e) == Some(&f) {
                    edges.remove(&e);
                }
            }
        }
        for (x, y) in horizon {
            add_face([x, y, pi], &mut faces, &mut alive, &mut edges);
        }
    }

    let live: Vec<[usize; 3]> = faces.iter().zip(&alive).filter(|(_, a)| **a).map(|(f, _)| *f).collect();
    let mut vid: Vec<usize> = live.iter().flat_map(|f| f.iter().cloned()).collect();
    vid.sort_unstable();
    vid.dedup();
    let r = mean(&vid.iter().map(|&i| pts[i]).collect::<Vec<_>>());
    let mut vol = 0.0;
    let mut cen = [0.0; 3];
    let mut facets: Vec<HalfSpace> = Vec::new();
    for f in &live {
        let (p0, p1, p2) = (&pts[f[0]], &pts[f[1]], &pts[f[2]]);
        let v6 = orient3(&r, p0, p1, p2);
        vol += v6;
        for a in 0..3 {
            cen[a] += v6 * (r[a] + p0[a] + p1[a] + p2[a]) / 4.0;
        }
        let n = cross(&sub(p1, p0), &sub(p2, p0));
        let l = norm(&n);
        if l == 0.0 {
            continue;
        }
        let nrm = [n[0] / l, n[1] / l, n[2] / l];
        let off = dot(&nrm, p0);
        let dup = facets.iter().any(|h| dot(&h.normal, &nrm) > 1.0 - 1e-12 && (h.offset - off).abs() <= 1e-10 * s);
        if !dup {
            facets.push(HalfSpace { normal: nrm, offset: off });
        }
    }
    // triangulated faces keep coplanar points; a true vertex lies on facets whose
    // normals span space
    let vertices: Vec<P3> = vid
        .iter()
        .map(|&i| pts[i])
        .filter(|p| {
            let on: Vec<&P3> = facets.iter().filter(|h| (dot(&h.normal, p) - h.offset).abs() <= 1e-10 * s).map(|h| &h.normal).collect();
            on.iter().enumerate().any(|(x, n1)| {
                on[x + 1..].iter().any(|n2| {
                    let c = cross(n1, n2);
                    norm(&c) > 1e-9 && on.iter().any(|n3| dot(&c, n3).abs() > 1e-9)
                })
            })
        })
        .collect();
    let centroid = if vol > 0.0 { [cen[0] / vol, cen[1] / vol, cen[2] / vol] } else { r };
    Hull {
        dim: 3,
        rank: 3,
        vertices,
        facets,
        volume: vol / 6.0,
        centroid,
    }
}

/// Convex hull of `points` (coordinates beyond `dim` ignored).
pub fn convex_hull(points: &[P3], dim: usize) -> Hull {
    if points.is_empty() {
        return Hull {
            dim,
            rank: 0,
            vertices: Vec::new(),
            facets: Vec::new(),
            volume: 0.0,
            centroid: [0.0; 3],
        };
    }
    let pts: Vec<P3> = points
        .iter()
        .map(|p| {
            let mut q = [0.0; 3];
            q[..dim].copy_from_slice(&p[..dim]);
            q
        })
        .collect();
    let (rank, o, basis) = affine_basis(&pts, dim);
    if rank < dim {
        return degenerate_hull(&pts, dim, rank, o, &basis);
    }
    match dim {
        1 => hull_1d(&pts),
        2 => hull_2d(&pts),
        _ => hull_3d(&pts, o, &basis),
    }
}

impl Hull {
    /// Largest facet violation `normal . x - offset` (negative inside).
    pub fn excess(&self, x: &P3) -> f64 {
        self.facets.iter().map(|h| dot(&h.normal, x) - h.offset).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains(&self, x: &P3, tol: f64) -> bool {
        self.rank == self.dim && self.excess(x) <= tol
    }

    /// Width along a unit direction.
    pub fn width(&self, dir: &P3) -> f64 {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for v in &self.vertices {
            let t = dot(v, dir);
            lo = lo.min(t);
            hi = hi.max(t);
        }
        hi - lo
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lattice_cube(n: i32) -> Vec<P3> {
        let mut v = Vec::new();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    v.push([i as f64, j as f64, k as f64]);
                }
            }
        }
        v
    }

    #[test]
    fn cube_hull() {
        let h = convex_hull(&lattice_cube(4), 3);
        assert_eq!(h.rank, 3);
        assert_eq!(h.vertices.len(), 8);
        assert!((h.volume - 27.0).abs() < 1e-9);
        assert_eq!(h.facets.len(), 6);
        for a in 0..3 {
            assert!((h.centroid[a] - 1.5).abs() < 1e-12);
        }
        assert!(h.contains(&[1.0, 2.0, 0.5], 1e-12));
        assert!(!h.contains(&[3.5, 1.0, 1.0], 1e-12));
    }

    #[test]
    fn octahedron_hull() {
        let mut pts = Vec::new();
        for i in -3i32..=3 {
            for j in -3i32..=3 {
                for k in -3i32..=3 {
                    if i.abs() + j.abs() + k.abs() <= 3 {
                        pts.push([i as f64, j as f64, k as f64]);
                    }
                }
            }
        }
        let h = convex_hull(&pts, 3);
        assert_eq!(h.vertices.len(), 6);
        assert_eq!(h.facets.len(), 8);
        assert!((h.volume - 36.0).abs() < 1e-9);
    }

    #[test]
    fn square_polygon() {
        let pts: Vec<P3> = (0..25).map(|i| [(i % 5) as f64, (i / 5) as f64, 0.0]).collect();
        let h = convex_hull(&pts, 2);
        assert_eq!(h.vertices.len(), 4);
        assert!((h.volume - 16.0).abs() < 1e-12);
        assert!((h.width(&[1.0, 0.0, 0.0]) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn flat_points_in_3d() {
        let pts: Vec<P3> = (0..16).map(|i| [(i % 4) as f64, (i / 4) as f64, 1.0]).collect();
        let h = convex_hull(&pts, 3);
        assert_eq!(h.rank, 2);
        assert_eq!(h.vertices.len(), 4);
        assert_eq!(h.volume, 0.0);
        let line: Vec<P3> = (0..5).map(|i| [i as f64, 2.0 * i as f64, 0.0]).collect();
        assert_eq!(convex_hull(&line, 3).rank, 1);
        assert_eq!(convex_hull(&[[1.0, 1.0, 1.0]], 3).rank, 0);
    }
}
