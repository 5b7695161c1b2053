//! Upwind numerical flux and its sigmoid-smoothed variant.
//!
//! `max_eps(0, x) = sigma_eps(x) * x` with `sigma_eps(x) = 1 / (1 + exp(-x / eps))`.
//! Because `sigma_eps(x) + sigma_eps(-x) = 1`, the smoothed flux stays consistent:
//! `f_eps(p, p, vn) = p * vn`.

use crate::scalar::Real;

/// Bound on `|x / eps|` inside the exponential; beyond it the sigmoid is
/// saturated to 0 or 1 in double precision anyway.
pub const EXPONENT_CLAMP: f64 = 40.0;

/// Default smoothing width, in units of the normal velocity.
pub const DEFAULT_EPSILON: f64 = 1e-2;

pub fn sigmoid<T: Real>(epsilon: T, x: T) -> T {
    let clamp = T::lit(EXPONENT_CLAMP);
    let t = (x / epsilon).max(-clamp).min(clamp);
    T::one() / (T::one() + (-t).exp())
}

/// Smoothed maximum `max_eps(0, x)`. Requires `epsilon > 0`.
pub fn smoothed_max<T: Real>(epsilon: T, x: T) -> T {
    sigmoid(epsilon, x) * x
}

/// `d/dx max_eps(0, x)`; the sigmoid derivative vanishes where the exponent is clamped.
pub fn smoothed_max_derivative<T: Real>(epsilon: T, x: T) -> T {
    let s = sigmoid(epsilon, x);
    let clamp = T::lit(EXPONENT_CLAMP);
    let t = x / epsilon;
    if t.abs() >= clamp {
        s
    } else {
        s + t * s * (T::one() - s)
    }
}

/// `max(0, x)` for `epsilon == 0`, otherwise its smoothed version.
#[inline]
pub fn upwind_weight<T: Real>(epsilon: T, x: T) -> T {
    if epsilon > T::zero() {
        smoothed_max(epsilon, x)
    } else {
        x.max(T::zero())
    }
}

/// Derivative of [`upwind_weight`]; at `epsilon == 0` the one-sided Heaviside value is returned.
#[inline]
pub fn upwind_weight_derivative<T: Real>(epsilon: T, x: T) -> T {
    if epsilon > T::zero() {
        smoothed_max_derivative(epsilon, x)
    } else if x > T::zero() {
        T::one()
    } else {
        T::zero()
    }
}

/// Facet flux `f_eps(phi_E1, phi_E2, v . n_F)` with `n_F` pointing from E1 to E2.
///
/// `epsilon = 0` gives the exact upwind flux
/// `phi_E1 max(0, vn) + phi_E2 min(0, vn)`.
pub fn numerical_flux<T: Real>(phi_e1: T, phi_e2: T, v_dot_n: T, epsilon: T) -> T {
    phi_e1 * upwind_weight(epsilon, v_dot_n) - phi_e2 * upwind_weight(epsilon, -v_dot_n)
}
