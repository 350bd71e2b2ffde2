//! Small sampling helpers shared by verification, data generation, and the
//! planner: standard normal draws (Box-Muller) and uniform directions.

use nalgebra::DVector;
use rand::Rng;

/// One standard normal sample via the Box-Muller transform.
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // Open interval keeps ln() finite.
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// A vector of independent standard normal samples.
pub fn normal_vector<R: Rng + ?Sized>(rng: &mut R, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| standard_normal(rng))
}

/// A uniformly distributed unit vector in `R^len`.
pub fn unit_vector<R: Rng + ?Sized>(rng: &mut R, len: usize) -> DVector<f64> {
    loop {
        let v = normal_vector(rng, len);
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}
