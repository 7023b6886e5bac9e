//! Sensor placement on the sphere and discrete spherical-harmonic
//! analysis.
//!
//! Sensors sit on a nearly uniform Fibonacci lattice, so the quadrature
//! weight is the same `4π/Q` for every sensor and the discrete analysis
//! `c_{u,v} = Σ_q γ_q Y_{u,v}(Ω_q) x_q` approximates the surface integral.
//! The approximation quality is captured by the Gram matrix of the sampled
//! harmonics, which must stay close to the identity for every mode the
//! beamformer uses; [`SensorArrayGeometry::gram`] exposes it for checking.

use crate::error::{invalid, Error, Result};
use crate::modal::{coeff_count, iter_uv, CoefficientKind, ModalCoefficients};
use crate::special::{sph_harmonic, sph_harmonic_grad, Direction};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::f64::consts::PI;
use std::io::BufRead;

/// Positions and quadrature weights of the sensors on a ball of the given
/// radius.
#[derive(Debug, Clone)]
pub struct SensorArrayGeometry {
    pub radius: f64,
    pub directions: Vec<Direction>,
    pub weights: Vec<f64>,
}

/// Directions of a nearly uniform `Q`-point sphere sampling.
///
/// `Q = 4` returns the regular tetrahedron (the smallest layout that keeps
/// zeroth and first-order modes separable); larger `Q` uses the Fibonacci
/// lattice `z_q = 1 - (2q+1)/Q`, `φ_q = q π (3 - √5) mod 2π`.
pub fn nearly_uniform_sphere(q: usize) -> Result<Vec<Direction>> {
    if q < 4 {
        return Err(invalid(format!(
            "at least 4 sensors are needed to separate first-order modes, got {q}"
        )));
    }
    if q == 4 {
        let s = 1.0 / 3f64.sqrt();
        return Ok([
            [s, s, s],
            [s, -s, -s],
            [-s, s, -s],
            [-s, -s, s],
        ]
        .into_iter()
        .map(Direction::from_vector)
        .collect());
    }
    let golden_angle = PI * (3.0 - 5f64.sqrt());
    Ok((0..q)
        .map(|i| {
            let z = 1.0 - (2 * i + 1) as f64 / q as f64;
            let phi = (i as f64 * golden_angle).rem_euclid(2.0 * PI);
            Direction::new(z.acos(), phi)
        })
        .collect())
}

/// Deterministically nudges a point set so that the equal-weight sums of
/// all harmonics of orders `1..=degree` vanish, which makes the quadrature
/// exact for products of harmonics through `degree/2`.
///
/// Levenberg-Marquardt on the residual vector `r_{u,v} = (4π/Q) Σ_q
/// Y_{u,v}(Ω_q)` with the analytic angular Jacobian.  Fixed starting point,
/// fixed schedule, no randomness: the result is reproducible.  Convergence
/// to zero is not guaranteed for every `(Q, degree)` pair; the caller
/// checks the Gram matrix it actually needs.
fn relax_harmonic_sums(directions: &mut [Direction], degree: u32) -> Result<()> {
    let q = directions.len();
    let n_modes = coeff_count(degree) - 1; // orders 1..=degree
    let gamma = 4.0 * PI / q as f64;
    let modes: Vec<(u32, i32)> = iter_uv(degree).skip(1).collect();

    let residual = |dirs: &[Direction]| -> Result<DVector<f64>> {
        let mut r = DVector::zeros(n_modes);
        for dir in dirs {
            for (i, &(u, v)) in modes.iter().enumerate() {
                r[i] += sph_harmonic(u, v, *dir)?;
            }
        }
        Ok(r * gamma)
    };

    let mut x: Vec<Direction> = directions.to_vec();
    let mut r = residual(&x)?;
    let mut cost = r.dot(&r);
    let mut lambda = 1e-3;
    for _ in 0..200 {
        if cost < 1e-24 {
            break;
        }
        let mut jac = DMatrix::zeros(n_modes, 2 * q);
        for (k, dir) in x.iter().enumerate() {
            for (i, &(u, v)) in modes.iter().enumerate() {
                let (_, dt, dp) = sph_harmonic_grad(u, v, *dir)?;
                jac[(i, k)] = gamma * dt;
                jac[(i, q + k)] = gamma * dp;
            }
        }
        let a = jac.transpose() * &jac;
        let g = jac.transpose() * &r;
        let mut accepted = false;
        while lambda < 1e9 {
            let mut damped = a.clone();
            for d in 0..2 * q {
                damped[(d, d)] += lambda * a[(d, d)].max(1e-12);
            }
            if let Some(chol) = damped.cholesky() {
                let delta = chol.solve(&(-&g));
                let trial: Vec<Direction> = x
                    .iter()
                    .enumerate()
                    .map(|(k, d)| Direction::new(d.theta + delta[k], d.phi + delta[q + k]))
                    .collect();
                if let Ok(rt) = residual(&trial) {
                    let ct = rt.dot(&rt);
                    if ct < cost {
                        x = trial;
                        r = rt;
                        cost = ct;
                        lambda = (lambda / 3.0).max(1e-12);
                        accepted = true;
                        break;
                    }
                }
            }
            lambda *= 2.0;
        }
        if !accepted {
            break;
        }
    }
    directions.copy_from_slice(&x);
    Ok(())
}

impl SensorArrayGeometry {
    /// Nearly uniform layout with equal weights `4π/Q`.
    pub fn fibonacci(q: usize, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(invalid(format!("array radius must be > 0, got {radius}")));
        }
        let directions = nearly_uniform_sphere(q)?;
        let w = 4.0 * PI / q as f64;
        Ok(Self {
            radius,
            directions,
            weights: vec![w; q],
        })
    }

    /// Nearly uniform layout tuned for analysis through `max_order`.
    ///
    /// The raw spiral integrates order-4 harmonic products only to within
    /// ~0.14, too coarse for a clean modal front end, so the points are
    /// deterministically relaxed until sums of harmonics through degree
    /// `2·max_order` (the degree content of the products) vanish as far as
    /// the layout allows.  At the reference operating point `Q = 36`,
    /// `max_order = 4`, the resulting Gram deviation is ~2e-3.  Needs
    /// `Q ≥ (max_order+1)²`, and meaningfully more than that for the
    /// relaxation to have room (a perfect layout at exactly `(N+1)²`
    /// points generally does not exist).
    pub fn refined_fibonacci(q: usize, radius: f64, max_order: u32) -> Result<Self> {
        if q < coeff_count(max_order) {
            return Err(invalid(format!(
                "need at least {} sensors for order {max_order}, got {q}",
                coeff_count(max_order)
            )));
        }
        let mut geometry = Self::fibonacci(q, radius)?;
        // The tetrahedron already integrates degree <= 2 exactly.
        if max_order >= 1 && !(q == 4 && max_order == 1) {
            relax_harmonic_sums(&mut geometry.directions, 2 * max_order)?;
        }
        Ok(geometry)
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    /// Analysis matrix `A[(u,v)][q] = γ_q Y_{u,v}(Ω_q)`: one row per mode,
    /// flat-ordered.
    pub fn analysis_matrix(&self, order: u32) -> Result<Vec<Vec<f64>>> {
        let mut rows = Vec::with_capacity(coeff_count(order));
        for (u, v) in iter_uv(order) {
            let mut row = Vec::with_capacity(self.len());
            for (dir, w) in self.directions.iter().zip(&self.weights) {
                row.push(w * sph_harmonic(u, v, *dir)?);
            }
            rows.push(row);
        }
        Ok(rows)
    }

    /// Discrete analysis of one complex sample per sensor.
    pub fn analyze(
        &self,
        samples: &[Complex64],
        order: u32,
        kind: CoefficientKind,
    ) -> Result<ModalCoefficients> {
        if samples.len() != self.len() {
            return Err(invalid(format!(
                "expected {} samples, got {}",
                self.len(),
                samples.len()
            )));
        }
        let mat = self.analysis_matrix(order)?;
        let values = mat
            .iter()
            .map(|row| {
                row.iter()
                    .zip(samples)
                    .map(|(a, x)| x * *a)
                    .sum::<Complex64>()
            })
            .collect();
        ModalCoefficients::from_values(order, kind, values)
    }

    /// Discrete analysis of one real sample per sensor; returns the flat
    /// coefficient vector.
    pub fn analyze_real(&self, samples: &[f64], order: u32) -> Result<Vec<f64>> {
        if samples.len() != self.len() {
            return Err(invalid(format!(
                "expected {} samples, got {}",
                self.len(),
                samples.len()
            )));
        }
        let mat = self.analysis_matrix(order)?;
        Ok(mat
            .iter()
            .map(|row| row.iter().zip(samples).map(|(a, x)| a * x).sum())
            .collect())
    }

    /// Gram matrix `G[a][b] = Σ_q γ_q Y_a(Ω_q) Y_b(Ω_q)` of the sampled
    /// harmonics through `order`; identity for a perfect quadrature.
    pub fn gram(&self, order: u32) -> Result<Vec<Vec<f64>>> {
        let count = coeff_count(order);
        let mut ys = vec![vec![0.0; count]; self.len()];
        for (q, dir) in self.directions.iter().enumerate() {
            for (i, (u, v)) in iter_uv(order).enumerate() {
                ys[q][i] = sph_harmonic(u, v, *dir)?;
            }
        }
        let mut g = vec![vec![0.0; count]; count];
        for (q, row) in ys.iter().enumerate() {
            let w = self.weights[q];
            for a in 0..count {
                let wy = w * row[a];
                for b in 0..count {
                    g[a][b] += wy * row[b];
                }
            }
        }
        Ok(g)
    }

    /// Largest deviation of the Gram matrix from the identity through
    /// `order`.
    pub fn gram_deviation(&self, order: u32) -> Result<f64> {
        let g = self.gram(order)?;
        let mut worst = 0.0f64;
        for (a, row) in g.iter().enumerate() {
            for (b, x) in row.iter().enumerate() {
                let expect = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((x - expect).abs());
            }
        }
        Ok(worst)
    }

    /// Writes the layout as CSV: a `# radius_m=` line, then
    /// `q,theta_rad,phi_rad,weight` rows.
    pub fn to_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# radius_m={:.17e}", self.radius)?;
        writeln!(w, "q,theta_rad,phi_rad,weight")?;
        for (q, (dir, wt)) in self.directions.iter().zip(&self.weights).enumerate() {
            writeln!(w, "{q},{:.17e},{:.17e},{wt:.17e}", dir.theta, dir.phi)?;
        }
        Ok(())
    }

    /// Parses the format written by [`Self::to_csv`].
    pub fn from_csv<R: std::io::Read>(r: R) -> Result<Self> {
        let reader = std::io::BufReader::new(r);
        let mut radius = None;
        let mut directions = Vec::new();
        let mut weights = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("# radius_m=") {
                radius = Some(rest.trim().parse::<f64>().map_err(|e| {
                    Error::Parse(format!("line {}: bad radius: {e}", lineno + 1))
                })?);
                continue;
            }
            if line.starts_with('#') || line.starts_with('q') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(Error::Parse(format!(
                    "line {}: expected 4 fields, got {}",
                    lineno + 1,
                    fields.len()
                )));
            }
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))
            };
            directions.push(Direction::new(parse(fields[1])?, parse(fields[2])?));
            weights.push(parse(fields[3])?);
        }
        let radius =
            radius.ok_or_else(|| Error::Parse("missing # radius_m= header".into()))?;
        if directions.is_empty() {
            return Err(Error::Parse("no sensor rows found".into()));
        }
        Ok(Self {
            radius,
            directions,
            weights,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn weights_cover_the_sphere() {
        for q in [4, 9, 36, 100] {
            let g = SensorArrayGeometry::fibonacci(q, 0.08).unwrap();
            let total: f64 = g.weights.iter().sum();
            assert_relative_eq!(total, 4.0 * PI, max_relative = 1e-12);
        }
    }

    #[test]
    fn four_sensors_form_a_regular_tetrahedron() {
        let dirs = nearly_uniform_sphere(4).unwrap();
        for a in 0..4 {
            for b in (a + 1)..4 {
                let va = dirs[a].unit_vector();
                let vb = dirs[b].unit_vector();
                let dot: f64 = va.iter().zip(&vb).map(|(x, y)| x * y).sum();
                assert_relative_eq!(dot, -1.0 / 3.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn rejects_too_few_sensors() {
        assert!(nearly_uniform_sphere(3).is_err());
        assert!(SensorArrayGeometry::fibonacci(0, 0.08).is_err());
        assert!(SensorArrayGeometry::fibonacci(8, 0.0).is_err());
    }

    #[test]
    fn lattice_points_are_distinct() {
        let dirs = nearly_uniform_sphere(36).unwrap();
        for a in 0..dirs.len() {
            for b in (a + 1)..dirs.len() {
                let va = dirs[a].unit_vector();
                let vb = dirs[b].unit_vector();
                let dot: f64 = va.iter().zip(&vb).map(|(x, y)| x * y).sum();
                assert!(dot < 0.999, "sensors {a} and {b} nearly coincide");
            }
        }
    }

    #[test]
    fn gram_near_identity_for_design_point() {
        // 36 sensors resolving order 4: the design point of the reference
        // array must keep every Gram entry within 0.05 of the identity.
        let g = SensorArrayGeometry::refined_fibonacci(36, 0.08, 4).unwrap();
        let dev = g.gram_deviation(4).unwrap();
        assert!(dev <= 0.05, "worst Gram deviation {dev:.4}");
        // Regression floor: the relaxation lands around 2e-3 here.
        assert!(dev <= 0.01, "relaxation regressed, Gram deviation {dev:.2e}");
    }

    #[test]
    fn raw_spiral_quality_is_recorded() {
        // Documented baseline: the unrelaxed spiral misses the 0.05 target
        // at the design point, which is why refined_fibonacci exists.
        let g = SensorArrayGeometry::fibonacci(36, 0.08).unwrap();
        let dev = g.gram_deviation(4).unwrap();
        assert!(dev < 0.2, "raw spiral much worse than expected: {dev:.4}");
    }

    #[test]
    fn analysis_recovers_band_limited_field() {
        // A field that is a single harmonic of order <= N comes back as the
        // matching unit coefficient when the Gram matrix is near identity.
        let g = SensorArrayGeometry::refined_fibonacci(36, 0.08, 4).unwrap();
        let samples: Vec<Complex64> = g
            .directions
            .iter()
            .map(|d| Complex64::new(sph_harmonic(3, 2, *d).unwrap(), 0.0))
            .collect();
        let coeffs = g.analyze(&samples, 4, CoefficientKind::Internal).unwrap();
        for (i, (u, v)) in iter_uv(4).enumerate() {
            let expect = if (u, v) == (3, 2) { 1.0 } else { 0.0 };
            assert!(
                (coeffs.values[i].re - expect).abs() < 0.05 && coeffs.values[i].im.abs() < 1e-15,
                "({u},{v}) -> {}",
                coeffs.values[i]
            );
        }
    }

    #[test]
    fn round_trip_of_random_band_limited_coefficients() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let g = SensorArrayGeometry::refined_fibonacci(36, 0.08, 4).unwrap();
        let truth: Vec<f64> = (0..coeff_count(4)).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let samples: Vec<f64> = g
            .directions
            .iter()
            .map(|d| {
                iter_uv(4)
                    .enumerate()
                    .map(|(i, (u, v))| truth[i] * sph_harmonic(u, v, *d).unwrap())
                    .sum()
            })
            .collect();
        let back = g.analyze_real(&samples, 4).unwrap();
        let worst = truth
            .iter()
            .zip(&back)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(worst <= 0.05, "round-trip error {worst:.4}");
    }

    #[test]
    fn out_of_band_harmonic_aliases_into_low_orders() {
        // 36 points cannot resolve order 5: analyzing a pure order-5 field
        // must show visible leakage, which is the documented truncation
        // limit of the layout.
        let g = SensorArrayGeometry::refined_fibonacci(36, 0.08, 4).unwrap();
        let samples: Vec<f64> = g
            .directions
            .iter()
            .map(|d| sph_harmonic(5, 0, *d).unwrap())
            .collect();
        let coeffs = g.analyze_real(&samples, 5).unwrap();
        let leak = iter_uv(5)
            .enumerate()
            .filter(|(_, (u, v))| (*u, *v) != (5, 0))
            .map(|(i, _)| coeffs[i].abs())
            .fold(0.0f64, f64::max);
        assert!(leak > 0.01, "expected visible aliasing, saw {leak:.2e}");
    }

    #[test]
    fn analyze_checks_sample_count() {
        let g = SensorArrayGeometry::fibonacci(9, 0.08).unwrap();
        assert!(g.analyze(&[Complex64::new(0.0, 0.0); 8], 1, CoefficientKind::Internal).is_err());
        assert!(g.analyze_real(&[0.0; 10], 1).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let g = SensorArrayGeometry::fibonacci(12, 0.08).unwrap();
        let mut buf = Vec::new();
        g.to_csv(&mut buf).unwrap();
        let back = SensorArrayGeometry::from_csv(&buf[..]).unwrap();
        assert_eq!(back.len(), g.len());
        assert_relative_eq!(back.radius, g.radius, max_relative = 1e-15);
        for (a, b) in g.directions.iter().zip(&back.directions) {
            assert_relative_eq!(a.theta, b.theta, max_relative = 1e-15);
            assert_relative_eq!(a.phi, b.phi, max_relative = 1e-15);
        }
    }

    #[test]
    fn csv_rejects_malformed_rows() {
        let bad = "# radius_m=0.08\nq,theta_rad,phi_rad,weight\n0,1.0,2.0\n";
        assert!(SensorArrayGeometry::from_csv(bad.as_bytes()).is_err());
        let no_radius = "q,theta_rad,phi_rad,weight\n0,1.0,2.0,0.5\n";
        assert!(SensorArrayGeometry::from_csv(no_radius.as_bytes()).is_err());
    }
}
