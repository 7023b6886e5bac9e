//! Containers and index conventions for spherical-harmonic coefficient
//! sets.
//!
//! Every flat coefficient vector in the library is ordered by ascending
//! order `u` and, within an order, ascending degree `v = -u..=u`, so the
//! pair `(u, v)` lives at `u² + u + v`.  Because the harmonics are real and
//! orthonormal, synthesis is a plain dot product: no conjugation, no
//! degree-sign flip, anywhere.

use crate::error::{invalid, Result};
use crate::special::Direction;
use num_complex::Complex64;

/// Flat position of `(order, degree)`: `u² + u + v`.
pub fn flat_index(order: u32, degree: i32) -> usize {
    debug_assert!(degree.unsigned_abs() <= order);
    (order * order) as usize + (order as i32 + degree) as usize
}

/// Inverse of [`flat_index`]: `u = floor(sqrt(i))`, `v = i - u² - u`.
pub fn order_degree(index: usize) -> (u32, i32) {
    let mut u = (index as f64).sqrt() as u32;
    // Guard the float rounding at perfect squares.
    if ((u + 1) * (u + 1)) as usize <= index {
        u += 1;
    } else if (u * u) as usize > index {
        u -= 1;
    }
    let v = index as i32 - (u * u) as i32 - u as i32;
    (u, v)
}

/// Number of coefficients through order `n`: `(n+1)²`.
pub fn coeff_count(max_order: u32) -> usize {
    ((max_order + 1) * (max_order + 1)) as usize
}

/// All `(order, degree)` pairs through `max_order`, in flat order.
pub fn iter_uv(max_order: u32) -> impl Iterator<Item = (u32, i32)> {
    (0..=max_order).flat_map(|u| (-(u as i32)..=u as i32).map(move |v| (u, v)))
}

/// What physical quantity a coefficient set decomposes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoefficientKind {
    /// Surface pressure expansion.
    Pressure,
    /// Radial velocity expansion, scaled to pressure units by `ρc`.
    Velocity,
    /// Nearfield source-strength expansion recovered from the sensor pair.
    Field,
    /// Intermediate data inside a processing chain.
    Internal,
}

/// A position given by range and direction from the array center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalPoint {
    pub r: f64,
    pub dir: Direction,
}

impl SphericalPoint {
    pub fn new(r: f64, theta: f64, phi: f64) -> Self {
        Self {
            r,
            dir: Direction::new(theta, phi),
        }
    }

    pub fn cartesian(&self) -> [f64; 3] {
        let u = self.dir.unit_vector();
        [u[0] * self.r, u[1] * self.r, u[2] * self.r]
    }
}

/// One frequency snapshot of a coefficient set, flat-ordered.
#[derive(Debug, Clone)]
pub struct ModalCoefficients {
    pub order: u32,
    pub kind: CoefficientKind,
    pub values: Vec<Complex64>,
}

impl ModalCoefficients {
    pub fn zeros(order: u32, kind: CoefficientKind) -> Self {
        Self {
            order,
            kind,
            values: vec![Complex64::new(0.0, 0.0); coeff_count(order)],
        }
    }

    pub fn from_values(order: u32, kind: CoefficientKind, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != coeff_count(order) {
            return Err(invalid(format!(
                "coefficient set of order {order} needs {} values, got {}",
                coeff_count(order),
                values.len()
            )));
        }
        Ok(Self { order, kind, values })
    }

    pub fn get(&self, order: u32, degree: i32) -> Complex64 {
        self.values[flat_index(order, degree)]
    }

    pub fn set(&mut self, order: u32, degree: i32, value: Complex64) {
        self.values[flat_index(order, degree)] = value;
    }

    /// Synthesizes the expansion at a direction: `Σ c_{u,v} Y_{u,v}(Ω)`.
    /// Real basis, so the sum is a direct dot product.
    pub fn synthesize(&self, dir: Direction) -> Result<Complex64> {
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, (u, v)) in iter_uv(self.order).enumerate() {
            acc += self.values[i] * crate::special::sph_harmonic(u, v, dir)?;
        }
        Ok(acc)
    }
}

/// Time series of a coefficient set: one real channel per `(u, v)`, all the
/// same length.
#[derive(Debug, Clone)]
pub struct ModalTimeSeries {
    pub order: u32,
    pub kind: CoefficientKind,
    pub len: usize,
    /// channels[flat_index(u, v)][t]
    pub channels: Vec<Vec<f64>>,
}

impl ModalTimeSeries {
    pub fn zeros(order: u32, kind: CoefficientKind, len: usize) -> Self {
        Self {
            order,
            kind,
            len,
            channels: vec![vec![0.0; len]; coeff_count(order)],
        }
    }

    pub fn from_channels(
        order: u32,
        kind: CoefficientKind,
        channels: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if channels.len() != coeff_count(order) {
            return Err(invalid(format!(
                "series of order {order} needs {} channels, got {}",
                coeff_count(order),
                channels.len()
            )));
        }
        let len = channels.first().map_or(0, Vec::len);
        if channels.iter().any(|c| c.len() != len) {
            return Err(invalid("all coefficient channels must share one length"));
        }
        Ok(Self {
            order,
            kind,
            len,
            channels,
        })
    }

    pub fn channel(&self, order: u32, degree: i32) -> &[f64] {
        &self.channels[flat_index(order, degree)]
    }

    pub fn channel_mut(&mut self, order: u32, degree: i32) -> &mut Vec<f64> {
        &mut self.channels[flat_index(order, degree)]
    }

    /// Writes the series as CSV with columns `u,v,t,value`.
    pub fn to_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "u,v,t,value")?;
        for (i, (u, v)) in iter_uv(self.order).enumerate() {
            for (t, x) in self.channels[i].iter().enumerate() {
                writeln!(w, "{u},{v},{t},{x:.17e}")?;
            }
        }
        Ok(())
    }
}

/// Triangular inner product `Σ_{u,v} a_{u,v} b_{u,v}` of two coefficient
/// sets of the same order.  Real-harmonic convention: no conjugation.
pub fn contract(a: &ModalCoefficients, b: &ModalCoefficients) -> Result<Complex64> {
    if a.order != b.order {
        return Err(invalid(format!(
            "cannot contract sets of orders {} and {}",
            a.order, b.order
        )));
    }
    Ok(a.values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| x * y)
        .sum())
}

/// Writes a frequency-resolved family of coefficient sets as CSV with
/// columns `u,v,f_hz,re,im`; `sets` pairs each frequency with its snapshot.
pub fn coefficients_to_csv<W: std::io::Write>(
    mut w: W,
    sets: &[(f64, ModalCoefficients)],
) -> Result<()> {
    writeln!(w, "u,v,f_hz,re,im")?;
    for (f, set) in sets {
        for (i, (u, v)) in iter_uv(set.order).enumerate() {
            let c = set.values[i];
            writeln!(w, "{u},{v},{f:.9e},{:.17e},{:.17e}", c.re, c.im)?;
        }
    }
    Ok(())
}
