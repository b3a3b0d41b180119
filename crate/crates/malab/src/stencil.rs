//! Integer stencil directions and orthogonal frames.

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Primitive integer vectors with max-norm at most `radius`, one per line
/// (first nonzero component positive).
pub fn primitive_directions(dim: usize, radius: i64) -> Vec<[i64; 3]> {
    let mut out = Vec::new();
    let r = radius.max(1);
    let range = |a: usize| if a < dim { -r..=r } else { 0..=0 };
    for i in range(0) {
        for j in range(1) {
            for k in range(2) {
                let v = [i, j, k];
                if v == [0, 0, 0] {
                    continue;
                }
                let first = *v.iter().find(|&&c| c != 0).unwrap();
                if first < 0 {
                    continue;
                }
                if gcd(gcd(i, j), k) != 1 {
                    continue;
                }
                out.push(v);
            }
        }
    }
    // Shorter vectors first, then lexicographic: keeps frame enumeration deterministic.
    out.sort_by_key(|v| (v.iter().map(|c| c * c).sum::<i64>(), *v));
    out
}

/// Axis and diagonal directions used by the discrete convexity check.
pub fn convexity_directions(dim: usize) -> Vec<[i64; 3]> {
    primitive_directions(dim, 1)
}

pub fn dot(a: &[i64; 3], b: &[i64; 3]) -> i64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Sets of `dim` mutually orthogonal directions, as indices into `dirs`.
pub fn orthogonal_frames(dim: usize, dirs: &[[i64; 3]]) -> Vec<Vec<usize>> {
    let mut frames = Vec::new();
    let n = dirs.len();
    match dim {
        1 => {
            for i in 0..n {
                frames.push(vec![i]);
            }
        }
        2 => {
            for i in 0..n {
                for j in i + 1..n {
                    if dot(&dirs[i], &dirs[j]) == 0 {
                        frames.push(vec![i, j]);
                    }
                }
            }
        }
        _ => {
            for i in 0..n {
                for j in i + 1..n {
                    if dot(&dirs[i], &dirs[j]) != 0 {
                        continue;
                    }
                    for k in j + 1..n {
                        if dot(&dirs[i], &dirs[k]) == 0 && dot(&dirs[j], &dirs[k]) == 0 {
                            frames.push(vec![i, j, k]);
                        }
                    }
                }
            }
        }
    }
    frames
}
