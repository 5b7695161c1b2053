//! Quadrature rules on simplices in barycentric form.
//!
//! Rules are normalized so that the weights sum to one; an integral over a
//! simplex `S` is `|S| * sum_q w_q f(lambda_q)`. Triangle and tetrahedron rules
//! are collapsed (Duffy) products of Gauss-Legendre rules, so all weights are
//! positive.

use crate::scalar::Real;

#[derive(Debug, Clone)]
pub struct QuadratureRule<T> {
    /// Barycentric coordinates of each point (first `simplex_dim + 1` entries used).
    pub points: Vec<[T; 4]>,
    pub weights: Vec<T>,
}

impl<T: Real> QuadratureRule<T> {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        // Chebyshev initial guess, Newton on P_n
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pnm1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = 0.5 * (1.0 - z);
        w[i] = 1.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// Number of Gauss points exact for polynomials of degree `deg`.
fn points_for(deg: usize) -> usize {
    deg / 2 + 1
}

/// Rule on a simplex of dimension `simplex_dim` (1, 2 or 3) exact for polynomials
/// of total degree `degree`.
pub fn simplex_rule<T: Real>(simplex_dim: usize, degree: usize) -> QuadratureRule<T> {
    let mut points = Vec::new();
    let mut weights = Vec::new();
    let z = T::zero();
    match simplex_dim {
        1 => {
            let (x, w) = gauss_legendre_unit(points_for(degree));
            for (xi, wi) in x.into_iter().zip(w) {
                points.push([T::lit(1.0 - xi), T::lit(xi), z, z]);
                weights.push(T::lit(wi));
            }
        }
        2 => {
            let (xu, wu) = gauss_legendre_unit(points_for(degree + 1));
            let (xv, wv) = gauss_legendre_unit(points_for(degree));
            for (&u, &a) in xu.iter().zip(&wu) {
                for (&v, &b) in xv.iter().zip(&wv) {
                    let x = u;
                    let y = v * (1.0 - u);
                    points.push([T::lit(1.0 - x - y), T::lit(x), T::lit(y), z]);
                    weights.push(T::lit(2.0 * a * b * (1.0 - u)));
                }
            }
        }
        3 => {
            let (xu, wu) = gauss_legendre_unit(points_for(degree + 2));
            let (xv, wv) = gauss_legendre_unit(points_for(degree + 1));
            let (xw, ww) = gauss_legendre_unit(points_for(degree));
            for (&u, &a) in xu.iter().zip(&wu) {
                for (&v, &b) in xv.iter().zip(&wv) {
                    for (&w, &c) in xw.iter().zip(&ww) {
                        let x = u;
                        let y = v * (1.0 - u);
                        let zc = w * (1.0 - u) * (1.0 - v);
                        points.push([T::lit(1.0 - x - y - zc), T::lit(x), T::lit(y), T::lit(zc)]);
                        weights.push(T::lit(6.0 * a * b * c * (1.0 - u) * (1.0 - u) * (1.0 - v)));
                    }
                }
            }
        }
        _ => panic!("simplex dimension must be 1, 2 or 3"),
    }
    QuadratureRule { points, weights }
}

/// Element rule for the mismatch functionals (degree 4).
pub fn element_rule<T: Real>(dim: usize) -> QuadratureRule<T> {
    simplex_rule(dim, 4)
}

/// Facet rule for the smoothed upwind flux (degree 4 on a `dim - 1` simplex).
pub fn facet_rule<T: Real>(dim: usize) -> QuadratureRule<T> {
    simplex_rule(dim - 1, 4)
}
