//! Small dense helpers for simplices in two and three dimensions.

use crate::scalar::Real;

pub type Point<T> = [T; 3];

pub fn sub<T: Real>(a: &Point<T>, b: &Point<T>) -> Point<T> {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn dot3<T: Real>(a: &Point<T>, b: &Point<T>) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross<T: Real>(a: &Point<T>, b: &Point<T>) -> Point<T> {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn norm3<T: Real>(a: &Point<T>) -> T {
    dot3(a, a).sqrt()
}

/// Signed measure of a simplex given by `dim + 1` vertices (area in 2D, volume in 3D).
pub fn signed_measure<T: Real>(dim: usize, p: &[Point<T>]) -> T {
    match dim {
        2 => {
            let a = sub(&p[1], &p[0]);
            let b = sub(&p[2], &p[0]);
            (a[0] * b[1] - a[1] * b[0]) * T::lit(0.5)
        }
        3 => {
            let a = sub(&p[1], &p[0]);
            let b = sub(&p[2], &p[0]);
            let c = sub(&p[3], &p[0]);
            dot3(&a, &cross(&b, &c)) / T::lit(6.0)
        }
        _ => unreachable!("dimension must be 2 or 3"),
    }
}

/// Gradients of the barycentric coordinates of a simplex.
///
/// Returns `None` for a degenerate simplex.
pub fn barycentric_gradients<T: Real>(dim: usize, p: &[Point<T>]) -> Option<[Point<T>; 4]> {
    let z = T::zero();
    let mut g = [[z; 3]; 4];
    match dim {
        2 => {
            let a = sub(&p[1], &p[0]);
            let b = sub(&p[2], &p[0]);
            let det = a[0] * b[1] - a[1] * b[0];
            if det == z || !det.is_finite() {
                return None;
            }
            // rows of [a b]^{-1}
            g[1] = [b[1] / det, -b[0] / det, z];
            g[2] = [-a[1] / det, a[0] / det, z];
        }
        3 => {
            let a = sub(&p[1], &p[0]);
            let b = sub(&p[2], &p[0]);
            let c = sub(&p[3], &p[0]);
            let det = dot3(&a, &cross(&b, &c));
            if det == z || !det.is_finite() {
                return None;
            }
            let bc = cross(&b, &c);
            let ca = cross(&c, &a);
            let ab = cross(&a, &b);
            for k in 0..3 {
                g[1][k] = bc[k] / det;
                g[2][k] = ca[k] / det;
                g[3][k] = ab[k] / det;
            }
        }
        _ => unreachable!("dimension must be 2 or 3"),
    }
    for k in 0..3 {
        g[0][k] = -(g[1][k] + g[2][k] + g[3][k]);
    }
    Some(g)
}

/// Measure of a facet (edge length in 2D, triangle area in 3D) and its unit normal.
///
/// The normal orientation is arbitrary; callers orient it.
pub fn facet_measure_normal<T: Real>(dim: usize, p: &[Point<T>]) -> (T, Point<T>) {
    let z = T::zero();
    match dim {
        2 => {
            let t = sub(&p[1], &p[0]);
            let len = (t[0] * t[0] + t[1] * t[1]).sqrt();
            (len, [t[1] / len, -t[0] / len, z])
        }
        3 => {
            let n = cross(&sub(&p[1], &p[0]), &sub(&p[2], &p[0]));
            let len = norm3(&n);
            (len * T::lit(0.5), [n[0] / len, n[1] / len, n[2] / len])
        }
        _ => unreachable!("dimension must be 2 or 3"),
    }
}

/// Inverts a small dense row-major `n x n` matrix by Gauss-Jordan elimination
/// with partial pivoting. Returns `None` when singular.
pub fn invert_dense<T: Real>(n: usize, a: &[T]) -> Option<Vec<T>> {
    let mut m = a.to_vec();
    let mut inv = vec![T::zero(); n * n];
    for i in 0..n {
        inv[i * n + i] = T::one();
    }
    for col in 0..n {
        let piv = (col..n).max_by(|&r, &s| {
            m[r * n + col]
                .abs()
                .partial_cmp(&m[s * n + col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if m[piv * n + col] == T::zero() {
            return None;
        }
        if piv != col {
            for k in 0..n {
                m.swap(piv * n + k, col * n + k);
                inv.swap(piv * n + k, col * n + k);
            }
        }
        let d = m[col * n + col];
        for k in 0..n {
            m[col * n + k] /= d;
            inv[col * n + k] /= d;
        }
        for r in 0..n {
            if r != col {
                let f = m[r * n + col];
                if f != T::zero() {
                    for k in 0..n {
                        let mv = m[col * n + k];
                        let iv = inv[col * n + k];
                        m[r * n + k] -= f * mv;
                        inv[r * n + k] -= f * iv;
                    }
                }
            }
        }
    }
    Some(inv)
}
