//! Minimal quaternion arithmetic in `[w, i, j, k]` component order.

use std::ops::{Add, Mul, Neg, Sub};

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Quat(pub [f64; 4]);

impl Quat {
    pub const ONE: Quat = Quat([1.0, 0.0, 0.0, 0.0]);
    pub const I: Quat = Quat([0.0, 1.0, 0.0, 0.0]);
    pub const J: Quat = Quat([0.0, 0.0, 1.0, 0.0]);
    pub const K: Quat = Quat([0.0, 0.0, 0.0, 1.0]);

    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Quat([w, x, y, z])
    }

    pub fn pure(v: [f64; 3]) -> Self {
        Quat([0.0, v[0], v[1], v[2]])
    }

    pub fn w(self) -> f64 {
        self.0[0]
    }

    /// Imaginary part as a 3-vector.
    pub fn vector(self) -> [f64; 3] {
        [self.0[1], self.0[2], self.0[3]]
    }

    pub fn conj(self) -> Self {
        let [w, x, y, z] = self.0;
        Quat([w, -x, -y, -z])
    }

    pub fn dot(self, other: Quat) -> f64 {
        self.0.iter().zip(other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scale(self, s: f64) -> Self {
        Quat(self.0.map(|c| c * s))
    }

    pub fn normalize(self) -> Self {
        self.scale(1.0 / self.norm())
    }

    /// `exp(v)` for a pure quaternion `v`.
    pub fn exp_pure(v: [f64; 3]) -> Self {
        let theta = norm3(v);
        if theta < 1e-300 {
            return Quat::ONE;
        }
        let s = theta.sin() / theta;
        Quat([theta.cos(), s * v[0], s * v[1], s * v[2]])
    }

    /// `exp(i theta)`.
    pub fn exp_i(theta: f64) -> Self {
        Quat([theta.cos(), theta.sin(), 0.0, 0.0])
    }

    /// The rotation `v -> q v q^{-1}` of a 3-vector, for unit `q`.
    pub fn rotate(self, v: [f64; 3]) -> [f64; 3] {
        (self * Quat::pure(v) * self.conj()).vector()
    }

    /// Haar-uniform unit quaternion.
    pub fn random_unit(rng: &mut impl Rng) -> Self {
        loop {
            let q = Quat(std::array::from_fn(|_| rng.gen_range(-1.0..1.0)));
            let n = q.norm();
            if n > 1e-3 && n <= 1.0 {
                return q.scale(1.0 / n);
            }
        }
    }

    /// Great-circle distance between unit quaternions on `S3`.
    pub fn sphere_distance(self, other: Quat) -> f64 {
        2.0 * ((self - other).norm() / 2.0).min(1.0).asin()
    }
}

impl Add for Quat {
    type Output = Quat;
    fn add(self, o: Quat) -> Quat {
        Quat(std::array::from_fn(|k| self.0[k] + o.0[k]))
    }
}

impl Sub for Quat {
    type Output = Quat;
    fn sub(self, o: Quat) -> Quat {
        Quat(std::array::from_fn(|k| self.0[k] - o.0[k]))
    }
}

impl Neg for Quat {
    type Output = Quat;
    fn neg(self) -> Quat {
        self.scale(-1.0)
    }
}

impl Mul for Quat {
    type Output = Quat;
    fn mul(self, o: Quat) -> Quat {
        let [a1, b1, c1, d1] = self.0;
        let [a2, b2, c2, d2] = o.0;
        Quat([
            a1 * a2 - b1 * b2 - c1 * c2 - d1 * d2,
            a1 * b2 + b1 * a2 + c1 * d2 - d1 * c2,
            a1 * c2 - b1 * d2 + c1 * a2 + d1 * b2,
            a1 * d2 + b1 * c2 - c1 * b2 + d1 * a2,
        ])
    }
}

pub fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm3(a: [f64; 3]) -> f64 {
    dot3(a, a).sqrt()
}

pub fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn scale3(a: [f64; 3], s: f64) -> [f64; 3] {
    a.map(|c| c * s)
}

pub fn add3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn sub3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_relations() {
        let (i, j, k) = (Quat::I, Quat::J, Quat::K);
        assert_eq!(i * j, k);
        assert_eq!(j * k, i);
        assert_eq!(k * i, j);
        assert_eq!(i * i, -Quat::ONE);
        assert_eq!(j * i, -k);
    }

    #[test]
    fn rotation_by_exp() {
        // exp(k pi/4) rotates the i-axis by a quarter turn about k
        let q = Quat::exp_pure([0.0, 0.0, std::f64::consts::FRAC_PI_4]);
        let v = q.rotate([1.0, 0.0, 0.0]);
        assert!((v[0]).abs() < 1e-15 && (v[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn distance_is_angle() {
        let q = Quat::exp_i(0.7);
        assert!((Quat::ONE.sphere_distance(q) - 0.7).abs() < 1e-14);
    }
}
