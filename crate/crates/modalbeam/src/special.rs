//! Special functions for spherical acoustics.
//!
//! The library works under the `e^{+iωt}` time convention, which pairs an
//! outgoing point source with the spherical Hankel function of the second
//! kind.  Outgoing radial functions are evaluated through their closed
//! polynomial form
//!
//! ```text
//! h_u(x) = -(i^u) e^{-ix} Σ_{v=0}^{u} φ_v(u) / (ix)^{v+1}
//! ```
//!
//! where the integer coefficients `φ_v(u)` are produced by an exact
//! ascending recurrence (see [`PhiTable`]).  The same coefficients later
//! parameterize the rational filter responses of the time-domain
//! beamformer, so they are computed once in integer arithmetic and shared.
//!
//! Angular factors use real orthonormal spherical harmonics `Y_{u,v}` built
//! on associated Legendre functions without the Condon-Shortley phase:
//! products of two harmonics therefore never need conjugation.

use crate::error::{invalid, Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;
use std::sync::OnceLock;

/// Largest radial order for which `φ_v(u)` rows are provided.
///
/// Row entries grow like `(u+v)!/(2^v v!(u-v)!)`; at order 16 the largest
/// entry is ~1.9e17, still exactly representable in both i128 and f64.
pub const MAX_PHI_ORDER: usize = 16;

/// A point on the unit sphere: inclination `theta` from +z in `[0, π]`,
/// azimuth `phi` from +x in `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction {
    pub theta: f64,
    pub phi: f64,
}

impl Direction {
    pub fn new(theta: f64, phi: f64) -> Self {
        Self { theta, phi }
    }

    /// Cartesian unit vector for this direction.
    pub fn unit_vector(&self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [st * cp, st * sp, ct]
    }

    /// Direction of a (non-zero) cartesian vector.
    pub fn from_vector(v: [f64; 3]) -> Self {
        let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        Self {
            theta: (v[2] / r).acos(),
            phi: v[1].atan2(v[0]).rem_euclid(2.0 * PI),
        }
    }
}

/// Triangular table of the polynomial coefficients `φ_v(u)` of the outgoing
/// radial functions, for orders `-1 ..= max_order`.
///
/// The rows are generated in exact integer arithmetic by the ascending
/// recurrence implied by `h_{u+1}(x) = ((2u+1)/x) h_u(x) - h_{u-1}(x)`:
///
/// ```text
/// φ_k(u+1) = (2u+1) φ_{k-1}(u) + φ_k(u-1),   φ_0(u) = 1
/// ```
///
/// seeded with the single-entry rows of `h_{-1}(x) = e^{-ix}/x` and
/// `h_0(x) = i e^{-ix}/x`.
#[derive(Debug, Clone)]
pub struct PhiTable {
    // rows[k] holds order k-1, so rows[0] is the order -1 row {1}.
    rows: Vec<Vec<f64>>,
    max_order: usize,
}

impl PhiTable {
    /// Builds rows for all orders `-1 ..= max_order`.
    pub fn up_to(max_order: usize) -> Result<Self> {
        if max_order > MAX_PHI_ORDER {
            return Err(invalid(format!(
                "phi rows supported up to order {MAX_PHI_ORDER}, requested {max_order}"
            )));
        }
        let mut exact: Vec<Vec<i128>> = vec![vec![1], vec![1]];
        for u in 0..max_order {
            let prev = &exact[u]; // order u-1
            let cur = &exact[u + 1]; // order u
            let mut next = vec![0i128; u + 2];
            for (k, slot) in next.iter_mut().enumerate() {
                let carry = if k >= 1 { (2 * u as i128 + 1) * cur[k - 1] } else { 0 };
                let inherit = prev.get(k).copied().unwrap_or(0);
                *slot = carry + inherit;
            }
            exact.push(next);
        }
        let rows = exact
            .into_iter()
            .map(|row| row.into_iter().map(|c| c as f64).collect())
            .collect();
        Ok(Self { rows, max_order })
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    /// Coefficient row for `order`, lowest `v` first.  `order` must lie in
    /// `-1 ..= max_order`.
    pub fn row(&self, order: i32) -> &[f64] {
        assert!(
            order >= -1 && order <= self.max_order as i32,
            "phi row {order} outside built range -1..={}",
            self.max_order
        );
        &self.rows[(order + 1) as usize]
    }
}

fn shared_phi() -> &'static PhiTable {
    static TABLE: OnceLock<PhiTable> = OnceLock::new();
    TABLE.get_or_init(|| PhiTable::up_to(MAX_PHI_ORDER).expect("static order within cap"))
}

/// The coefficient row `φ_v(u)`, `v = 0..=u`.
pub fn phi_coeffs(order: usize) -> Result<Vec<f64>> {
    if order > MAX_PHI_ORDER {
        return Err(invalid(format!(
            "phi rows supported up to order {MAX_PHI_ORDER}, requested {order}"
        )));
    }
    Ok(shared_phi().row(order as i32).to_vec())
}

/// `-(i^u)` for `u >= -1`.
fn hankel_prefactor(order: i32) -> Complex64 {
    // i^u cycles with period 4; map u = -1 onto i^3 = -i.
    let m = (order + 1).rem_euclid(4);
    let i_pow = match m {
        0 => Complex64::new(0.0, -1.0), // i^-1 = i^3
        1 => Complex64::new(1.0, 0.0),
        2 => Complex64::new(0.0, 1.0),
        3 => Complex64::new(-1.0, 0.0),
        _ => unreachable!(),
    };
    -i_pow
}

/// Outgoing spherical radial function of order `u >= -1` at `x > 0`,
/// evaluated through the closed polynomial form.
///
/// Satisfies `h_{-1}(x) = e^{-ix}/x` and `h_0(x) = i e^{-ix}/x`; the real
/// part equals the spherical Bessel function `j_u` for `u >= 0`.
pub fn sph_hankel(order: i32, x: f64) -> Result<Complex64> {
    if order < -1 {
        return Err(invalid(format!("radial order must be >= -1, got {order}")));
    }
    if order as i64 > MAX_PHI_ORDER as i64 {
        return Err(invalid(format!(
            "radial order supported up to {MAX_PHI_ORDER}, got {order}"
        )));
    }
    if !(x > 0.0) || !x.is_finite() {
        return Err(invalid(format!("hankel argument must be finite and > 0, got {x}")));
    }
    let phi = shared_phi().row(order);
    let w = Complex64::new(0.0, -1.0 / x); // 1/(ix)
    // Horner over Σ_v φ_v w^{v+1} = w (φ_0 + w (φ_1 + ...)).
    let mut s = Complex64::new(0.0, 0.0);
    for &c in phi.iter().rev() {
        s = s * w + c;
    }
    s *= w;
    let phase = Complex64::new(0.0, -x).exp();
    Ok(hankel_prefactor(order) * phase * s)
}

/// Derivative of the outgoing radial function, through the ladder identity
/// `h_u'(x) = h_{u-1}(x) - ((u+1)/x) h_u(x)`.
pub fn sph_hankel_prime(order: u32, x: f64) -> Result<Complex64> {
    let lower = sph_hankel(order as i32 - 1, x)?;
    let same = sph_hankel(order as i32, x)?;
    Ok(lower - same * ((order as f64 + 1.0) / x))
}

/// Spherical Bessel function `j_u(x)` for `x >= 0`.
///
/// Uses upward recurrence where it is stable (`x` comfortably above the
/// order) and Miller's downward recurrence otherwise, normalized against
/// whichever of `j_0`, `j_1` is better conditioned.
pub fn sph_bessel_j(order: u32, x: f64) -> Result<f64> {
    Ok(bessel_pair(order, x)?.1)
}

/// Derivative `j_u'(x)` for `x > 0`, via `j_u' = j_{u-1} - ((u+1)/x) j_u`
/// (and `j_0' = -j_1`).
pub fn sph_bessel_j_prime(order: u32, x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(invalid(format!("bessel derivative needs x > 0, got {x}")));
    }
    if order == 0 {
        return Ok(-sph_bessel_j(1, x)?);
    }
    let (jm1, j) = bessel_pair(order, x)?;
    Ok(jm1 - (order as f64 + 1.0) / x * j)
}

/// Returns `(j_{u-1}, j_u)`; `j_{-1}` is reported as `cos(x)/x`.
fn bessel_pair(order: u32, x: f64) -> Result<(f64, f64)> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(invalid(format!("bessel argument must be finite and >= 0, got {x}")));
    }
    if x == 0.0 {
        // j_0(0) = 1, all higher orders vanish; j_{-1}(0) diverges and is
        // never requested with x = 0 by the derivative path above.
        return Ok(match order {
            0 => (f64::INFINITY, 1.0),
            1 => (1.0, 0.0),
            _ => (0.0, 0.0),
        });
    }
    let j0 = x.sin() / x;
    if order == 0 {
        return Ok((x.cos() / x, j0));
    }
    let j1 = x.sin() / (x * x) - x.cos() / x;
    if order == 1 {
        return Ok((j0, j1));
    }
    if x > order as f64 + 1.0 {
        // Upward recurrence is stable once the argument exceeds the order.
        let (mut a, mut b) = (j0, j1);
        for u in 1..order {
            let next = (2 * u + 1) as f64 / x * b - a;
            a = b;
            b = next;
        }
        return Ok((a, b));
    }
    // Miller's algorithm: run the recurrence downward from well above the
    // requested order, then normalize against a closed-form low order.
    let start = order as usize + (x as usize) + 24;
    let mut jp1 = 0.0f64; // unnormalized j_{u+1}
    let mut ju = 1e-30f64; // unnormalized j_u, starting at u = start
    let mut want = 0.0f64; // unnormalized j_order
    let mut want_m1 = 0.0f64; // unnormalized j_{order-1}
    for u in (1..=start).rev() {
        let jm1 = (2 * u + 1) as f64 / x * ju - jp1;
        jp1 = ju;
        ju = jm1; // now holds j_{u-1}
        let reached = (u - 1) as u32;
        if reached == order {
            want = ju;
        } else if reached + 1 == order {
            want_m1 = ju;
        }
        if ju.abs() > 1e250 {
            // Rescale to avoid overflow on long downward runs.
            let s = 1e-250;
            jp1 *= s;
            ju *= s;
            want *= s;
            want_m1 *= s;
        }
    }
    // Loop ends with ju = unnormalized j_0, jp1 = unnormalized j_1; pick
    // the better-conditioned reference (they never vanish together).
    let scale = if j0.abs() >= j1.abs() { j0 / ju } else { j1 / jp1 };
    Ok((want_m1 * scale, want * scale))
}

/// Legendre polynomial `P_n(x)` by the three-term recurrence.
pub fn legendre_p(order: u32, x: f64) -> f64 {
    match order {
        0 => 1.0,
        1 => x,
        _ => {
            let (mut a, mut b) = (1.0, x);
            for n in 1..order {
                let n = n as f64;
                let next = ((2.0 * n + 1.0) * x * b - n * a) / (n + 1.0);
                a = b;
                b = next;
            }
            b
        }
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
///
/// Newton iteration on `P_n` from the Chebyshev-angle initial guess; exact
/// (to roundoff) for polynomial integrands of degree `<= 2n-1`.
pub fn gauss_legendre(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Err(invalid("quadrature needs at least one node"));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let p = legendre_p(n as u32, x);
            let pm1 = legendre_p(n as u32 - 1, x);
            dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
            let step = p / dp;
            x -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    nodes.reverse();
    weights.reverse();
    Ok((nodes, weights))
}

/// Associated Legendre function `P_u^m(x)` without the Condon-Shortley
/// phase, `0 <= m <= u`, `|x| <= 1`.
fn assoc_legendre(order: u32, m: u32, x: f64) -> f64 {
    debug_assert!(m <= order);
    let somx2 = ((1.0 - x) * (1.0 + x)).max(0.0).sqrt();
    let mut pmm = 1.0;
    for k in 1..=m {
        pmm *= (2 * k - 1) as f64 * somx2;
    }
    if order == m {
        return pmm;
    }
    let mut pm1 = pmm;
    let mut p = x * (2 * m + 1) as f64 * pmm;
    for l in (m + 2)..=order {
        let l = l as f64;
        let mf = m as f64;
        let next = ((2.0 * l - 1.0) * x * p - (l + mf - 1.0) * pm1) / (l - mf);
        pm1 = p;
        p = next;
    }
    p
}

/// Real orthonormal spherical harmonic `Y_{u,v}`, `|v| <= u`.
///
/// `v = 0` gives the zonal harmonic; positive `v` pair with `cos(vφ)`,
/// negative with `sin(|v|φ)`.  Orthonormal over the sphere, so the addition
/// theorem reads `Σ_v Y_{u,v}(Ω) Y_{u,v}(Ω') = ((2u+1)/4π) P_u(cos Θ)`.
pub fn sph_harmonic(order: u32, degree: i32, dir: Direction) -> Result<f64> {
    if degree.unsigned_abs() > order {
        return Err(invalid(format!(
            "harmonic degree {degree} outside -{order}..={order}"
        )));
    }
    let m = degree.unsigned_abs();
    // (2u+1)/(4π) · (u-m)!/(u+m)!, the factorial ratio as a running product.
    let mut ratio = 1.0;
    for k in (order - m + 1)..=(order + m) {
        ratio /= k as f64;
    }
    let norm = ((2.0 * order as f64 + 1.0) / (4.0 * PI) * ratio).sqrt();
    let p = assoc_legendre(order, m, dir.theta.cos());
    let value = match degree.signum() {
        0 => norm * p,
        1 => std::f64::consts::SQRT_2 * norm * p * (m as f64 * dir.phi).cos(),
        _ => std::f64::consts::SQRT_2 * norm * p * (m as f64 * dir.phi).sin(),
    };
    Ok(value)
}

/// Value and angular gradient `(Y, ∂Y/∂θ, ∂Y/∂φ)` of the real orthonormal
/// harmonic.  Needs `sin θ` bounded away from zero (poles excluded).
pub fn sph_harmonic_grad(order: u32, degree: i32, dir: Direction) -> Result<(f64, f64, f64)> {
    if degree.unsigned_abs() > order {
        return Err(invalid(format!(
            "harmonic degree {degree} outside -{order}..={order}"
        )));
    }
    let st = dir.theta.sin();
    if st.abs() < 1e-9 {
        return Err(invalid("harmonic gradient undefined at the poles"));
    }
    let m = degree.unsigned_abs();
    let mut ratio = 1.0;
    for k in (order - m + 1)..=(order + m) {
        ratio /= k as f64;
    }
    let norm = ((2.0 * order as f64 + 1.0) / (4.0 * PI) * ratio).sqrt();
    let x = dir.theta.cos();
    let p = assoc_legendre(order, m, x);
    // (1-x²) dP/dx = (u+m) P_{u-1}^m - u x P_u^m, so
    // dP/dθ = -((u+m) P_{u-1}^m - u x P_u^m) / sin θ.
    let p_lower = if m <= order.saturating_sub(1) && order >= 1 {
        assoc_legendre(order - 1, m, x)
    } else {
        0.0
    };
    let dp_dtheta = -((order + m) as f64 * p_lower - order as f64 * x * p) / st;
    let (trig, dtrig) = match degree.signum() {
        0 => (1.0, 0.0),
        1 => {
            let a = m as f64 * dir.phi;
            (
                std::f64::consts::SQRT_2 * a.cos(),
                -std::f64::consts::SQRT_2 * m as f64 * a.sin(),
            )
        }
        _ => {
            let a = m as f64 * dir.phi;
            (
                std::f64::consts::SQRT_2 * a.sin(),
                std::f64::consts::SQRT_2 * m as f64 * a.cos(),
            )
        }
    };
    Ok((norm * p * trig, norm * dp_dtheta * trig, norm * p * dtrig))
}

/// Convenience guard used by modules that cap their radial order.
pub(crate) fn check_order_supported(order: u32) -> Result<()> {
    if order as usize > MAX_PHI_ORDER {
        return Err(Error::Unsupported(format!(
            "radial order {order} above supported cap {MAX_PHI_ORDER}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const TOL_POLY_VS_RECURRENCE: f64 = 1e-10;
    const TOL_DERIVATIVE: f64 = 1e-5;
    const TOL_ORTHONORMAL: f64 = 1e-10;

    /// Oracle: upward three-term recurrence from the closed forms of the
    /// two lowest orders.  Stable upward because the outgoing function
    /// grows with order.
    fn hankel_by_recurrence(order: i32, x: f64) -> Complex64 {
        let e = Complex64::new(0.0, -x).exp();
        let hm1 = e / x;
        let h0 = Complex64::new(0.0, 1.0) * e / x;
        match order {
            -1 => hm1,
            0 => h0,
            _ => {
                let (mut a, mut b) = (hm1, h0);
                for u in 0..order {
                    let next = (2 * u + 1) as f64 / x * b - a;
                    a = b;
                    b = next;
                }
                b
            }
        }
    }

    /// Oracle: ascending power series j_u(x) = Σ_k (-1)^k x^{u+2k} /
    /// (2^k k! (2u+2k+1)!!), summed to machine convergence.
    fn bessel_by_series(order: u32, x: f64) -> f64 {
        let mut double_fact = 1.0; // (2u+1)!!
        for k in 0..=order {
            double_fact *= (2 * k + 1) as f64;
        }
        let mut term = x.powi(order as i32) / double_fact;
        let mut sum = term;
        for k in 1..200 {
            let kf = k as f64;
            term *= -x * x / (2.0 * kf * (2.0 * (order as f64 + kf) + 1.0));
            sum += term;
            if term.abs() < 1e-17 * sum.abs().max(1e-300) {
                break;
            }
        }
        sum
    }

    fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
            .collect()
    }

    #[test]
    fn phi_rows_match_hand_expansion() {
        let t = PhiTable::up_to(4).unwrap();
        assert_eq!(t.row(-1), &[1.0]);
        assert_eq!(t.row(0), &[1.0]);
        assert_eq!(t.row(1), &[1.0, 1.0]);
        assert_eq!(t.row(2), &[1.0, 3.0, 3.0]);
        assert_eq!(t.row(3), &[1.0, 6.0, 15.0, 15.0]);
        assert_eq!(t.row(4), &[1.0, 10.0, 45.0, 105.0, 105.0]);
    }

    #[test]
    fn phi_leading_coefficient_is_one_through_cap() {
        let t = PhiTable::up_to(MAX_PHI_ORDER).unwrap();
        for u in -1..=(MAX_PHI_ORDER as i32) {
            assert_eq!(t.row(u)[0], 1.0, "leading coefficient at order {u}");
        }
    }

    #[test]
    fn phi_rejects_orders_above_cap() {
        assert!(PhiTable::up_to(MAX_PHI_ORDER + 1).is_err());
        assert!(phi_coeffs(MAX_PHI_ORDER + 1).is_err());
    }

    #[test]
    fn hankel_low_order_closed_forms() {
        // h_0(2) = i e^{-2i}/2 and h_{-1}(2) = e^{-2i}/2, evaluated directly.
        let h0 = sph_hankel(0, 2.0).unwrap();
        assert_relative_eq!(h0.re, 0.4546487134128409, max_relative = 1e-14);
        assert_relative_eq!(h0.im, -0.2080734182735712, max_relative = 1e-14);
        let hm1 = sph_hankel(-1, 2.0).unwrap();
        assert_relative_eq!(hm1.re, (2.0f64).cos() / 2.0, max_relative = 1e-14);
        assert_relative_eq!(hm1.im, -(2.0f64).sin() / 2.0, max_relative = 1e-14);
    }

    #[test]
    fn hankel_polynomial_form_matches_recurrence() {
        for u in 0..=8 {
            for &x in &log_grid(0.1, 100.0, 160) {
                let poly = sph_hankel(u, x).unwrap();
                let rec = hankel_by_recurrence(u, x);
                let err = (poly - rec).norm() / rec.norm();
                assert!(
                    err <= TOL_POLY_VS_RECURRENCE,
                    "order {u}, x={x}: relative error {err:.3e}"
                );
            }
        }
    }

    #[test]
    fn hankel_real_part_is_bessel() {
        for u in 0..=8 {
            for &x in &log_grid(0.2, 60.0, 40) {
                let h = sph_hankel(u as i32, x).unwrap();
                let j = sph_bessel_j(u, x).unwrap();
                let scale = h.norm().max(1.0);
                assert!(
                    (h.re - j).abs() / scale < 1e-10,
                    "order {u}, x={x}: Re h = {}, j = {j}",
                    h.re
                );
            }
        }
    }

    #[test]
    fn hankel_derivative_matches_finite_difference() {
        for u in 1..=6u32 {
            for &x in &log_grid(0.1, 100.0, 60) {
                let d = sph_hankel_prime(u, x).unwrap();
                let step = 1e-6 * x;
                let hi = sph_hankel(u as i32, x + step).unwrap();
                let lo = sph_hankel(u as i32, x - step).unwrap();
                let fd = (hi - lo) / (2.0 * step);
                let err = (d - fd).norm() / d.norm();
                assert!(
                    err <= TOL_DERIVATIVE,
                    "order {u}, x={x}: derivative mismatch {err:.3e}"
                );
            }
        }
    }

    #[test]
    fn hankel_ratio_far_field_asymptotics() {
        // h_2(x_s)/h_2(x_d) approaches (x_d/x_s) e^{-i(x_s-x_d)}; at
        // x_s = 500 the magnitudes agree to well below 1e-4 while the
        // residual phase error is O(1/x).
        let (xs, xd) = (500.0, 2500.0);
        let ratio = sph_hankel(2, xs).unwrap() / sph_hankel(2, xd).unwrap();
        let asym = xd / xs * Complex64::new(0.0, -(xs - xd)).exp();
        assert!((ratio.norm() / asym.norm() - 1.0).abs() <= 1e-4);
        assert!((ratio / asym - Complex64::new(1.0, 0.0)).norm() <= 1e-2);
    }

    #[test]
    fn hankel_rejects_bad_arguments() {
        assert!(sph_hankel(-2, 1.0).is_err());
        assert!(sph_hankel(0, 0.0).is_err());
        assert!(sph_hankel(0, -1.0).is_err());
        assert!(sph_hankel(17, 1.0).is_err());
    }

    #[test]
    fn bessel_matches_series_oracle() {
        // The alternating series itself loses ~e^x of precision, so the
        // oracle is only trustworthy for moderate x; larger arguments are
        // covered by the closed-form cross-check against Re h_u.
        for u in 0..=10u32 {
            for &x in &log_grid(0.05, 12.0, 60) {
                let j = sph_bessel_j(u, x).unwrap();
                let series = bessel_by_series(u, x);
                let err = (j - series).abs() / series.abs().max(1e-280);
                assert!(
                    err < 1e-9,
                    "order {u}, x={x}: j = {j:.15e}, series = {series:.15e}"
                );
            }
        }
    }

    #[test]
    fn bessel_low_order_values() {
        assert_relative_eq!(sph_bessel_j(0, 1.0).unwrap(), 0.8414709848078965, max_relative = 1e-14);
        assert_eq!(sph_bessel_j(0, 0.0).unwrap(), 1.0);
        assert_eq!(sph_bessel_j(3, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn bessel_stable_near_sine_zeros() {
        // Normalization must survive x at multiples of π where j_0 = 0.
        for &x in &[PI, 2.0 * PI, 3.0 * PI] {
            let j = sph_bessel_j(5, x).unwrap();
            let series = bessel_by_series(5, x);
            assert_relative_eq!(j, series, max_relative = 1e-9);
        }
    }

    #[test]
    fn bessel_derivative_ladder() {
        for u in 0..=6u32 {
            for &x in &log_grid(0.1, 40.0, 40) {
                let d = sph_bessel_j_prime(u, x).unwrap();
                let step = 1e-6 * x;
                let fd = (sph_bessel_j(u, x + step).unwrap() - sph_bessel_j(u, x - step).unwrap())
                    / (2.0 * step);
                let scale = d.abs().max(1e-12);
                assert!(
                    ((d - fd) / scale).abs() < 1e-5,
                    "order {u}, x={x}: {d} vs fd {fd}"
                );
            }
        }
    }

    #[test]
    fn harmonic_reference_values() {
        let y00 = sph_harmonic(0, 0, Direction::new(0.7, 1.3)).unwrap();
        assert_relative_eq!(y00, 0.28209479177387814, max_relative = 1e-14);
        let y10 = sph_harmonic(1, 0, Direction::new(0.0, 0.0)).unwrap();
        assert_relative_eq!(y10, (3.0 / (4.0 * PI)).sqrt(), max_relative = 1e-14);
    }

    #[test]
    fn harmonic_matches_closed_form_oracle() {
        // P_4^3(x) = 105 x (1-x²)^{3/2} without the Condon-Shortley phase;
        // Y_{4,3} = √2 · sqrt(9/(4π·5040)) · P_4^3(cos θ) · cos 3φ.
        let (theta, phi) = (1.0f64, 0.7f64);
        let x = theta.cos();
        let p43 = 105.0 * x * (1.0 - x * x).powf(1.5);
        let norm = (9.0 / (4.0 * PI * 5040.0)).sqrt();
        let expected = std::f64::consts::SQRT_2 * norm * p43 * (3.0 * phi).cos();
        let got = sph_harmonic(4, 3, Direction::new(theta, phi)).unwrap();
        assert_relative_eq!(got, expected, max_relative = 1e-13);
    }

    #[test]
    fn harmonic_gradient_matches_finite_difference() {
        let h = 1e-6;
        for u in 0..=6u32 {
            for v in -(u as i32)..=(u as i32) {
                for &(theta, phi) in &[(0.6, 1.1), (1.4, 4.0), (2.5, 0.3)] {
                    let (y, dt, dp) = sph_harmonic_grad(u, v, Direction::new(theta, phi)).unwrap();
                    let y0 = sph_harmonic(u, v, Direction::new(theta, phi)).unwrap();
                    assert_relative_eq!(y, y0, max_relative = 1e-13);
                    let fd_t = (sph_harmonic(u, v, Direction::new(theta + h, phi)).unwrap()
                        - sph_harmonic(u, v, Direction::new(theta - h, phi)).unwrap())
                        / (2.0 * h);
                    let fd_p = (sph_harmonic(u, v, Direction::new(theta, phi + h)).unwrap()
                        - sph_harmonic(u, v, Direction::new(theta, phi - h)).unwrap())
                        / (2.0 * h);
                    assert!(
                        (dt - fd_t).abs() < 1e-5 * (1.0 + dt.abs()),
                        "({u},{v}) dθ: {dt} vs {fd_t}"
                    );
                    assert!(
                        (dp - fd_p).abs() < 1e-5 * (1.0 + dp.abs()),
                        "({u},{v}) dφ: {dp} vs {fd_p}"
                    );
                }
            }
        }
    }

    #[test]
    fn harmonic_rejects_degree_out_of_range() {
        assert!(sph_harmonic(2, 3, Direction::new(0.1, 0.2)).is_err());
        assert!(sph_harmonic(2, -3, Direction::new(0.1, 0.2)).is_err());
    }

    #[test]
    fn harmonics_orthonormal_under_quadrature() {
        // Gauss-Legendre in cos θ × uniform in φ integrates products of
        // order <= n exactly when both resolutions exceed 2n+1.
        let n = 4u32;
        let (nodes, weights) = gauss_legendre(2 * n as usize + 2).unwrap();
        let n_phi = 4 * n as usize + 4;
        let count = ((n + 1) * (n + 1)) as usize;
        let mut gram = vec![vec![0.0; count]; count];
        for (mu, w) in nodes.iter().zip(&weights) {
            let theta = mu.acos();
            for ip in 0..n_phi {
                let phi = 2.0 * PI * ip as f64 / n_phi as f64;
                let wq = w * 2.0 * PI / n_phi as f64;
                let dir = Direction::new(theta, phi);
                let mut ys = Vec::with_capacity(count);
                for u in 0..=n {
                    for v in -(u as i32)..=(u as i32) {
                        ys.push(sph_harmonic(u, v, dir).unwrap());
                    }
                }
                for a in 0..count {
                    for b in a..count {
                        gram[a][b] += wq * ys[a] * ys[b];
                    }
                }
            }
        }
        for a in 0..count {
            for b in a..count {
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!(
                    (gram[a][b] - expect).abs() < TOL_ORTHONORMAL,
                    "gram[{a}][{b}] = {}",
                    gram[a][b]
                );
            }
        }
    }

    #[test]
    fn harmonic_addition_theorem_diagonal() {
        // Σ_v Y_{u,v}(Ω)² = (2u+1)/4π at any Ω.
        let dir = Direction::new(1.1, 2.4);
        for u in 0..=6u32 {
            let mut sum = 0.0;
            for v in -(u as i32)..=(u as i32) {
                let y = sph_harmonic(u, v, dir).unwrap();
                sum += y * y;
            }
            assert_relative_eq!(
                sum,
                (2.0 * u as f64 + 1.0) / (4.0 * PI),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (nodes, weights) = gauss_legendre(8).unwrap();
        // Degree 15 is the guaranteed-exact limit for 8 nodes.
        let integral: f64 = nodes
            .iter()
            .zip(&weights)
            .map(|(x, w)| w * (3.0 * x.powi(15) + x.powi(8) - 2.0 * x.powi(3) + 0.5))
            .sum();
        // ∫(x^8) = 2/9, ∫(0.5) = 1; odd terms vanish.
        assert_relative_eq!(integral, 2.0 / 9.0 + 1.0, max_relative = 1e-13);
    }

    #[test]
    fn direction_vector_round_trip() {
        let d = Direction::new(1.2, 4.5);
        let back = Direction::from_vector(d.unit_vector());
        assert_relative_eq!(back.theta, d.theta, max_relative = 1e-12);
        assert_relative_eq!(back.phi, d.phi, max_relative = 1e-12);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn real_part_tracks_bessel(u in 0u32..=8, x in 0.2f64..50.0) {
                let h = sph_hankel(u as i32, x).unwrap();
                let j = sph_bessel_j(u, x).unwrap();
                prop_assert!((h.re - j).abs() <= 1e-9 * h.norm().max(1.0));
            }

            #[test]
            fn harmonic_bounded_by_closure(u in 0u32..=8, v in -8i32..=8,
                                           theta in 0.0f64..PI, phi in 0.0f64..(2.0 * PI)) {
                prop_assume!(v.unsigned_abs() <= u);
                let y = sph_harmonic(u, v, Direction::new(theta, phi)).unwrap();
                let bound = ((2.0 * u as f64 + 1.0) / (4.0 * PI)).sqrt() * 1.42;
                prop_assert!(y.abs() <= bound);
            }
        }
    }
}
