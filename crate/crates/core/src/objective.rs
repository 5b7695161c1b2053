//! Huber data mismatch, Tukey biweight diagnostic, L2 tracking and the
//! velocity regularizer.

use rayon::prelude::*;

use crate::discretization::assembly::p1_mass_entry;
use crate::discretization::quadrature::element_rule;
use crate::discretization::{DgScalarField, GridMesh};
use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;
use crate::scalar::Real;

/// Default regularization weight.
pub const DEFAULT_GAMMA: f64 = 1e-2;
/// Default Huber threshold as a fraction of the target's 1st to 99th percentile range.
pub const DEFAULT_DELTA_FRACTION: f64 = 0.1;
/// Default Tukey threshold in intensity units.
pub const DEFAULT_TUKEY_C: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveConfig<T> {
    pub delta: T,
    pub gamma: T,
    pub tukey_c: T,
}

impl<T: Real> ObjectiveConfig<T> {
    pub fn new(delta: T, gamma: T, tukey_c: T) -> Result<Self> {
        let cfg = Self {
            delta,
            gamma,
            tukey_c,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("delta", self.delta),
            ("gamma", self.gamma),
            ("tukey_c", self.tukey_c),
        ] {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::invalid(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// `delta = 0.1 (P99 - P1)` of the target coefficients; 0.1 for a flat target.
    pub fn for_target(target: &DgScalarField<T>) -> Self {
        Self {
            delta: default_delta(target.coeffs()),
            gamma: T::lit(DEFAULT_GAMMA),
            tukey_c: T::lit(DEFAULT_TUKEY_C),
        }
    }
}

pub fn default_delta<T: Real>(values: &[T]) -> T {
    let range = percentile(values, 99.0) - percentile(values, 1.0);
    if range > T::zero() {
        T::lit(DEFAULT_DELTA_FRACTION) * range
    } else {
        T::lit(DEFAULT_DELTA_FRACTION)
    }
}

/// Percentile with linear interpolation between order statistics; `pct` in `[0, 100]`.
/// Non-finite entries are ignored; an empty input gives 0.
pub fn percentile<T: Real>(values: &[T], pct: f64) -> T {
    let mut v: Vec<T> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return T::zero();
    }
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let pos = pct.clamp(0.0, 100.0) / 100.0 * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = T::lit(pos - lo as f64);
    v[lo] + (v[hi] - v[lo]) * frac
}

#[inline]
pub fn huber<T: Real>(x: T, delta: T) -> T {
    let a = x.abs();
    if a <= delta {
        T::lit(0.5) * x * x
    } else {
        delta * (a - T::lit(0.5) * delta)
    }
}

#[inline]
pub fn huber_deriv<T: Real>(x: T, delta: T) -> T {
    if x.abs() <= delta {
        x
    } else {
        delta * x.signum()
    }
}

fn check_pair<T: Real>(
    mesh: &GridMesh<T>,
    a: &DgScalarField<T>,
    b: &DgScalarField<T>,
) -> Result<()> {
    a.check_mesh(mesh)?;
    b.check_mesh(mesh)
}

/// `int f_delta(phi_t - phi_e) dx` with the degree-4 element rule.
pub fn mismatch<T: Real>(
    mesh: &GridMesh<T>,
    phi_t: &DgScalarField<T>,
    phi_e: &DgScalarField<T>,
    delta: T,
) -> Result<T> {
    check_pair(mesh, phi_t, phi_e)?;
    let rule = element_rule::<T>(mesh.dim());
    let per_cell: Vec<T> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            let mut s = T::zero();
            for (lam, &w) in rule.points.iter().zip(&rule.weights) {
                let r = phi_t.eval_bary(c, lam) - phi_e.eval_bary(c, lam);
                s += w * huber(r, delta);
            }
            s * mesh.volume(c)
        })
        .collect();
    Ok(per_cell.into_iter().sum())
}

/// Gradient of [`mismatch`] with respect to the coefficients of `phi_t`.
pub fn mismatch_grad<T: Real>(
    mesh: &GridMesh<T>,
    phi_t: &DgScalarField<T>,
    phi_e: &DgScalarField<T>,
    delta: T,
) -> Result<Vec<T>> {
    check_pair(mesh, phi_t, phi_e)?;
    let rule = element_rule::<T>(mesh.dim());
    let k = mesh.nodes_per_cell();
    let mut grad = vec![T::zero(); phi_t.coeffs().len()];
    grad.par_chunks_mut(k).enumerate().for_each(|(c, g)| {
        let vol = mesh.volume(c);
        for (lam, &w) in rule.points.iter().zip(&rule.weights) {
            let r = phi_t.eval_bary(c, lam) - phi_e.eval_bary(c, lam);
            let f = w * vol * huber_deriv(r, delta);
            for i in 0..k {
                g[i] += f * lam[i];
            }
        }
    });
    Ok(grad)
}

#[inline]
pub fn tukey_rho<T: Real>(x: T, c: T) -> T {
    let half_c2 = T::lit(0.5) * c * c;
    if x.abs() <= c {
        let u = T::one() - x * x / (c * c);
        half_c2 * (T::one() - u * u * u)
    } else {
        half_c2
    }
}

/// Mean of Tukey's biweight over the pointwise differences `a - b`.
pub fn tukey_metric<T: Real>(a: &[T], b: &[T], c: T) -> Result<T> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "tukey_metric: lengths {} and {} differ",
            a.len(),
            b.len()
        )));
    }
    if !(c > T::zero()) {
        return Err(Error::invalid("tukey threshold must be positive"));
    }
    if a.is_empty() {
        return Ok(T::zero());
    }
    let s: T = a.iter().zip(b).map(|(&x, &y)| tukey_rho(x - y, c)).sum();
    Ok(s / T::from_usize_lossy(a.len()))
}

/// `||phi_t - phi_e||_{L2}`, integrated exactly cell by cell.
pub fn l2_discrepancy<T: Real>(
    mesh: &GridMesh<T>,
    phi_t: &DgScalarField<T>,
    phi_e: &DgScalarField<T>,
) -> Result<T> {
    check_pair(mesh, phi_t, phi_e)?;
    let d = mesh.dim();
    let k = d + 1;
    let per_cell: Vec<T> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            let a = phi_t.cell_coeffs(c);
            let b = phi_e.cell_coeffs(c);
            let vol = mesh.volume(c);
            let mut s = T::zero();
            for i in 0..k {
                for j in 0..k {
                    s += (a[i] - b[i]) * p1_mass_entry(d, vol, i, j) * (a[j] - b[j]);
                }
            }
            s
        })
        .collect();
    Ok(per_cell.into_iter().sum::<T>().max(T::zero()).sqrt())
}

/// `sum_k v_k^T M v_k` over the components of an interleaved nodal vector.
pub fn regularizer<T: Real>(mass: &CsrMatrix<T>, dim: usize, tilde_v: &[T]) -> Result<T> {
    check_vector(mass, dim, tilde_v)?;
    let mut total = T::zero();
    for r in 0..mass.n() {
        for (col, m) in mass.row(r) {
            for k in 0..dim {
                total += tilde_v[r * dim + k] * m * tilde_v[col * dim + k];
            }
        }
    }
    Ok(total)
}

/// `2 M v` componentwise.
pub fn regularizer_grad<T: Real>(mass: &CsrMatrix<T>, dim: usize, tilde_v: &[T]) -> Result<Vec<T>> {
    check_vector(mass, dim, tilde_v)?;
    let mut g = vec![T::zero(); tilde_v.len()];
    g.par_chunks_mut(dim).enumerate().for_each(|(r, gr)| {
        for (col, m) in mass.row(r) {
            for k in 0..dim {
                gr[k] += T::lit(2.0) * m * tilde_v[col * dim + k];
            }
        }
    });
    Ok(g)
}

fn check_vector<T: Real>(mass: &CsrMatrix<T>, dim: usize, v: &[T]) -> Result<()> {
    if v.len() != mass.n() * dim {
        return Err(Error::invalid(format!(
            "vector length {} does not match {} nodes x {dim} components",
            v.len(),
            mass.n()
        )));
    }
    Ok(())
}

/// `J = mismatch / 2 + gamma R`.
#[inline]
pub fn total_objective<T: Real>(mismatch: T, regularizer: T, gamma: T) -> T {
    T::lit(0.5) * mismatch + gamma * regularizer
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::quadrature::simplex_rule;
    use crate::discretization::{assemble_cg_operators, build_box_mesh};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(mesh: &GridMesh<f64>, rng: &mut ChaCha8Rng, amp: f64) -> DgScalarField<f64> {
        let n = mesh.num_cells() * mesh.nodes_per_cell();
        DgScalarField::from_coeffs(
            mesh.dims(),
            (0..n).map(|_| rng.gen_range(-amp..amp)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn huber_examples() {
        assert_eq!(huber(0.5, 1.0), 0.125);
        assert_eq!(huber(2.0, 1.0), 1.5);
        assert_eq!(huber(-2.0, 1.0), 1.5);
        assert_eq!(huber(1.0, 1.0), 0.5);
        assert_eq!(huber(-1.0, 1.0), 0.5);
        let e = 1e-9;
        assert!((huber_deriv(1.0f64 + e, 1.0) - huber_deriv(1.0 - e, 1.0)).abs() < 1e-8);
        assert_eq!(huber_deriv(-3.0, 0.5), -0.5);
    }

    #[test]
    fn tukey_examples() {
        let a = [0.3, -1.0, 2.0];
        assert_eq!(tukey_metric(&a, &a, 1.0).unwrap(), 0.0);
        let far = [5.0, -7.0, 3.0];
        assert_eq!(tukey_metric(&far, &[0.0; 3], 2.0).unwrap(), 2.0);
        let half = [1.0; 4];
        assert!((tukey_metric::<f64>(&half, &[0.0; 4], 2.0).unwrap() - 1.15625).abs() < 1e-15);
        assert!(tukey_metric(&[1.0], &[1.0, 2.0], 1.0).is_err());
        assert!(tukey_metric(&[1.0], &[1.0], 0.0).is_err());
    }

    #[test]
    fn percentile_and_default_delta() {
        let v: Vec<f64> = (0..=100).map(|i| i as f64).collect();
        assert_eq!(percentile(&v, 1.0), 1.0);
        assert_eq!(percentile(&v, 99.0), 99.0);
        assert_eq!(percentile(&v, 50.5), 50.5);
        assert!((default_delta(&v) - 9.8).abs() < 1e-12);
        assert_eq!(default_delta(&[3.0; 10]), 0.1);
        assert!(ObjectiveConfig::new(0.0, 1.0, 1.0).is_err());
        assert!(ObjectiveConfig::new(1.0, -1.0, 1.0).is_err());
        assert!(ObjectiveConfig::new(1.0, 1.0, 1.0).is_ok());
    }

    #[test]
    fn mismatch_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for ext in [vec![4usize, 5], vec![2, 2, 3]] {
            let mesh = build_box_mesh::<f64>(&ext).unwrap();
            let phi = random_field(&mesh, &mut rng, 1.0);
            assert_eq!(mismatch(&mesh, &phi, &phi, 0.3).unwrap(), 0.0);
            assert!(mismatch_grad(&mesh, &phi, &phi, 0.3)
                .unwrap()
                .iter()
                .all(|&g| g == 0.0));
            let shifted = DgScalarField::from_coeffs(
                mesh.dims(),
                phi.coeffs().iter().map(|x| x + 0.2).collect(),
            )
            .unwrap();
            let m = mismatch(&mesh, &shifted, &phi, 0.3).unwrap();
            assert!((m - 0.5 * 0.04 * mesh.total_volume()).abs() < 1e-12);
            let m = mismatch(&mesh, &shifted, &phi, 0.1).unwrap();
            assert!((m - 0.1 * (0.2 - 0.05) * mesh.total_volume()).abs() < 1e-12);
        }
        let a = build_box_mesh::<f64>(&[2, 2]).unwrap();
        let b = build_box_mesh::<f64>(&[3, 2]).unwrap();
        assert!(mismatch(
            &a,
            &DgScalarField::zeros(&a),
            &DgScalarField::zeros(&b),
            1.0
        )
        .is_err());
    }

    #[test]
    fn mismatch_gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for ext in [vec![3usize, 3], vec![2, 1, 2]] {
            let mesh = build_box_mesh::<f64>(&ext).unwrap();
            let a = random_field(&mesh, &mut rng, 1.0);
            let b = random_field(&mesh, &mut rng, 1.0);
            let delta = 0.4;
            let g = mismatch_grad(&mesh, &a, &b, delta).unwrap();
            let h = 1e-6;
            for i in (0..g.len()).step_by(3) {
                let mut p = a.clone();
                p.coeffs_mut()[i] += h;
                let mut m = a.clone();
                m.coeffs_mut()[i] -= h;
                let fd = (mismatch(&mesh, &p, &b, delta).unwrap()
                    - mismatch(&mesh, &m, &b, delta).unwrap())
                    / (2.0 * h);
                assert!(
                    (fd - g[i]).abs() <= 1e-6 * g[i].abs().max(1e-3),
                    "i={i} fd={fd} g={}",
                    g[i]
                );
            }
        }
    }

    #[test]
    fn l2_discrepancy_against_direct_quadrature() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for ext in [vec![4usize, 3], vec![2, 2, 2]] {
            let mesh = build_box_mesh::<f64>(&ext).unwrap();
            let a = random_field(&mesh, &mut rng, 2.0);
            let b = random_field(&mesh, &mut rng, 2.0);
            assert_eq!(l2_discrepancy(&mesh, &a, &a).unwrap(), 0.0);
            let c = DgScalarField::from_coeffs(
                mesh.dims(),
                a.coeffs().iter().map(|x| x - 0.7).collect(),
            )
            .unwrap();
            let off = l2_discrepancy(&mesh, &a, &c).unwrap();
            assert!((off - 0.7 * mesh.total_volume().sqrt()).abs() < 1e-12);

            let rule = simplex_rule::<f64>(mesh.dim(), 2);
            let mut direct = 0.0;
            for cell in 0..mesh.num_cells() {
                for (lam, w) in rule.points.iter().zip(&rule.weights) {
                    let e = a.eval_bary(cell, lam) - b.eval_bary(cell, lam);
                    direct += mesh.volume(cell) * w * e * e;
                }
            }
            let l2 = l2_discrepancy(&mesh, &a, &b).unwrap();
            assert!((l2 - direct.sqrt()).abs() < 1e-12 * (1.0 + l2));
        }
    }

    #[test]
    fn regularizer_examples_and_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for ext in [vec![4usize, 4], vec![2, 3, 2]] {
            let mesh = build_box_mesh::<f64>(&ext).unwrap();
            let d = mesh.dim();
            let ops = assemble_cg_operators(&mesh).unwrap();
            let n = mesh.num_vertices() * d;
            assert_eq!(regularizer(&ops.mass, d, &vec![0.0; n]).unwrap(), 0.0);
            let c = [0.5, -1.5, 2.0];
            let constant: Vec<f64> = (0..n).map(|i| c[i % d]).collect();
            let norm2: f64 = c[..d].iter().map(|x| x * x).sum();
            let r = regularizer(&ops.mass, d, &constant).unwrap();
            assert!((r - norm2 * mesh.total_volume()).abs() < 1e-10);

            let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let g = regularizer_grad(&ops.mass, d, &v).unwrap();
            let h = 1e-4;
            for i in 0..n {
                let mut p = v.clone();
                p[i] += h;
                let mut m = v.clone();
                m[i] -= h;
                let fd = (regularizer(&ops.mass, d, &p).unwrap()
                    - regularizer(&ops.mass, d, &m).unwrap())
                    / (2.0 * h);
                assert!((fd - g[i]).abs() <= 1e-8 * g[i].abs().max(1.0));
            }
            assert!(regularizer(&ops.mass, d, &v[1..]).is_err());
        }
    }

    #[test]
    fn total_objective_sums_parts() {
        let mesh = build_box_mesh::<f64>(&[3, 3]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = random_field(&mesh, &mut rng, 1.0);
        let b = random_field(&mesh, &mut rng, 1.0);
        let ops = assemble_cg_operators(&mesh).unwrap();
        let v: Vec<f64> = (0..mesh.num_vertices() * 2)
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        let m = mismatch(&mesh, &a, &b, 0.2).unwrap();
        let r = regularizer(&ops.mass, 2, &v).unwrap();
        let j = total_objective(m, r, 0.03);
        assert!((j - (m / 2.0 + 0.03 * r)).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn huber_properties(x in -50.0f64..50.0, delta in 1e-3f64..10.0) {
            let f = huber(x, delta);
            prop_assert_eq!(f, huber(-x, delta));
            prop_assert!(f >= 0.0);
            prop_assert!(f <= 0.5 * x * x + 1e-12);
            prop_assert!(huber_deriv(x, delta).abs() <= delta);
        }

        #[test]
        fn huber_convex(x in -20.0f64..20.0, y in -20.0f64..20.0, t in 0.0f64..1.0, delta in 1e-2f64..5.0) {
            let lhs = huber(t * x + (1.0 - t) * y, delta);
            let rhs = t * huber(x, delta) + (1.0 - t) * huber(y, delta);
            prop_assert!(lhs <= rhs + 1e-12);
        }

        #[test]
        fn mismatch_nonnegative(seed in 0u64..1000, delta in 1e-2f64..2.0) {
            let mesh = build_box_mesh::<f64>(&[3, 2]).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_field(&mesh, &mut rng, 3.0);
            let b = random_field(&mesh, &mut rng, 3.0);
            prop_assert!(mismatch(&mesh, &a, &b, delta).unwrap() >= 0.0);
            prop_assert_eq!(mismatch(&mesh, &a, &a, delta).unwrap(), 0.0);
        }
    }
}
