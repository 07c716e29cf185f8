//! Four closed-form Riemannian fibrations: the flat tori `T2 -> S1` and
//! `T3 -> T2`, the Hopf fibration `S3 -> S2` and the lens spaces
//! `L(e,1) -> S2`.
//!
//! Total-space points are stored in four slots: torus coordinates (in turns,
//! padded with zeros) or unit quaternions `[w, i, j, k]`. Base points use three
//! slots: torus coordinates or unit vectors of `R^3`.
//!
//! The Hopf projection is `q -> q i q^{-1}`. Its fibers are the circles
//! `q exp(i theta)`, so the vertical direction at `q` is `q i`. The base sphere
//! carries the metric of the sphere of radius `1/2`, which makes the
//! projection a Riemannian submersion from the unit `S3`. Base tangent vectors
//! are stored as ambient vectors of the unit sphere; their metric norm is half
//! the Euclidean one, and geodesic guards are stated as angles.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::circle_diffeo::{signed_increment, wrap_unit};
use crate::error::{Error, Result};
use crate::quat::{add3, cross, dot3, norm3, scale3, sub3, Quat};

/// Largest base geodesic angle accepted on the sphere models.
pub const INJECTIVITY_GUARD: f64 = 0.9 * PI;

/// Endpoint tolerance of the horizontal transport integrator.
pub const TRANSPORT_TOL: f64 = 1e-9;

const TANGENCY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TotalPoint(pub [f64; 4]);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BasePoint(pub [f64; 3]);

impl TotalPoint {
    pub fn quat(self) -> Quat {
        Quat(self.0)
    }
}

/// A tangent vector of the total space together with its vertical and
/// horizontal parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentTotal {
    pub point: TotalPoint,
    pub vector: [f64; 4],
    pub vert: [f64; 4],
    pub horiz: [f64; 4],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FibrationModel {
    FlatT2,
    FlatT3,
    Hopf,
    /// `L(e,1)` for `e >= 2`, the quotient of `S3` by right multiplication
    /// with `exp(2 pi i / e)`.
    Lens(u32),
}

impl fmt::Display for FibrationModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FibrationModel::FlatT2 => f.write_str("flat-t2"),
            FibrationModel::FlatT3 => f.write_str("flat-t3"),
            FibrationModel::Hopf => f.write_str("hopf"),
            FibrationModel::Lens(e) => write!(f, "lens-{e}"),
        }
    }
}

impl FromStr for FibrationModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "flat-t2" | "t2" => Ok(FibrationModel::FlatT2),
            "flat-t3" | "t3" => Ok(FibrationModel::FlatT3),
            "hopf" | "lens-1" => Ok(FibrationModel::Hopf),
            other => {
                let e = other
                    .strip_prefix("lens-")
                    .and_then(|e| e.parse::<u32>().ok())
                    .ok_or_else(|| Error::InvalidInput(format!("unknown model '{s}'")))?;
                FibrationModel::lens(e)
            }
        }
    }
}

impl Serialize for FibrationModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for FibrationModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

fn norm4(v: [f64; 4]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

fn dot4(a: [f64; 4], b: [f64; 4]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy4(a: f64, x: [f64; 4], y: [f64; 4]) -> [f64; 4] {
    std::array::from_fn(|k| a * x[k] + y[k])
}

impl FibrationModel {
    pub fn lens(e: u32) -> Result<Self> {
        match e {
            0 => Err(Error::InvalidInput("lens order must be positive".into())),
            1 => Ok(FibrationModel::Hopf),
            e => Ok(FibrationModel::Lens(e)),
        }
    }

    pub fn is_flat(self) -> bool {
        matches!(self, FibrationModel::FlatT2 | FibrationModel::FlatT3)
    }

    /// Order of the deck group acting on `S3` (1 for Hopf).
    pub fn order(self) -> u32 {
        match self {
            FibrationModel::Lens(e) => e,
            _ => 1,
        }
    }

    pub fn total_dim(self) -> usize {
        match self {
            FibrationModel::FlatT2 => 2,
            _ => 3,
        }
    }

    pub fn base_dim(self) -> usize {
        match self {
            FibrationModel::FlatT2 => 1,
            _ => 2,
        }
    }

    /// Number of stored coordinates of a total-space point.
    pub fn point_len(self) -> usize {
        match self {
            FibrationModel::FlatT2 => 2,
            FibrationModel::FlatT3 => 3,
            _ => 4,
        }
    }

    /// Number of stored coordinates of a base point.
    pub fn base_len(self) -> usize {
        match self {
            FibrationModel::FlatT2 => 1,
            FibrationModel::FlatT3 => 2,
            _ => 3,
        }
    }

    /// Length of every fiber.
    pub fn fiber_length(self) -> f64 {
        match self {
            FibrationModel::FlatT2 | FibrationModel::FlatT3 => 1.0,
            _ => 2.0 * PI / self.order() as f64,
        }
    }

    /// Index of the vertical coordinate in the flat models.
    fn vertical_slot(self) -> usize {
        self.point_len() - 1
    }

    /// Reduces torus coordinates mod 1, renormalizes quaternions and picks the
    /// deck representative with the largest real part on lens spaces.
    pub fn canonicalize(self, p: TotalPoint) -> TotalPoint {
        if self.is_flat() {
            let n = self.point_len();
            return TotalPoint(std::array::from_fn(|k| if k < n { wrap_unit(p.0[k]) } else { 0.0 }));
        }
        let q = p.quat().normalize();
        let e = self.order();
        if e == 1 {
            return TotalPoint(q.0);
        }
        let best = (0..e)
            .map(|k| q * Quat::exp_i(2.0 * PI * k as f64 / e as f64))
            .max_by(|a, b| a.w().total_cmp(&b.w()))
            .expect("nonempty deck group");
        TotalPoint(best.0)
    }

    /// Parses a total-space point from its stored coordinates.
    pub fn point_from_slice(self, c: &[f64]) -> Result<TotalPoint> {
        if c.len() != self.point_len() {
            return Err(Error::InvalidInput(format!(
                "{self} points have {} coordinates, got {}",
                self.point_len(),
                c.len()
            )));
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite coordinate".into()));
        }
        let mut p = [0.0; 4];
        p[..c.len()].copy_from_slice(c);
        if !self.is_flat() && (norm4(p) - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!("quaternion norm {} is not 1", norm4(p))));
        }
        Ok(self.canonicalize(TotalPoint(p)))
    }

    pub fn point_to_vec(self, p: TotalPoint) -> Vec<f64> {
        p.0[..self.point_len()].to_vec()
    }

    pub fn base_from_slice(self, c: &[f64]) -> Result<BasePoint> {
        if c.len() != self.base_len() {
            return Err(Error::InvalidInput(format!(
                "{self} base points have {} coordinates, got {}",
                self.base_len(),
                c.len()
            )));
        }
        let mut x = [0.0; 3];
        x[..c.len()].copy_from_slice(c);
        if self.is_flat() {
            return Ok(BasePoint(x.map(wrap_unit)));
        }
        let n = norm3(x);
        if (n - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!("base point norm {n} is not 1")));
        }
        Ok(BasePoint(scale3(x, 1.0 / n)))
    }

    pub fn base_to_vec(self, x: BasePoint) -> Vec<f64> {
        x.0[..self.base_len()].to_vec()
    }

    pub fn project(self, p: TotalPoint) -> BasePoint {
        match self {
            FibrationModel::FlatT2 => BasePoint([p.0[0], 0.0, 0.0]),
            FibrationModel::FlatT3 => BasePoint([p.0[0], p.0[1], 0.0]),
            _ => BasePoint(p.quat().rotate([1.0, 0.0, 0.0])),
        }
    }

    /// Unit vector spanning the vertical space at `p`.
    pub fn vertical_unit(self, p: TotalPoint) -> [f64; 4] {
        if self.is_flat() {
            let mut v = [0.0; 4];
            v[self.vertical_slot()] = 1.0;
            v
        } else {
            (p.quat() * Quat::I).0
        }
    }

    /// Orthonormal basis of the tangent space at `p`, vertical vector first.
    pub fn tangent_basis(self, p: TotalPoint) -> Vec<[f64; 4]> {
        match self {
            FibrationModel::FlatT2 => vec![[0.0, 1.0, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0]],
            FibrationModel::FlatT3 => vec![
                [0.0, 0.0, 1.0, 0.0],
                [1.0, 0.0, 0.0, 0.0],
                [0.0, 1.0, 0.0, 0.0],
            ],
            _ => {
                let q = p.quat();
                vec![(q * Quat::I).0, (q * Quat::J).0, (q * Quat::K).0]
            }
        }
    }

    fn check_tangent(self, p: TotalPoint, w: [f64; 4]) -> Result<()> {
        let normal = if self.is_flat() {
            w[self.point_len()..].iter().map(|c| c.abs()).fold(0.0, f64::max)
        } else {
            dot4(w, p.0).abs()
        };
        if !normal.is_finite() || normal > TANGENCY_TOL * (1.0 + norm4(w)) {
            return Err(Error::NotTangent(normal));
        }
        Ok(())
    }

    /// Removes the (tiny) normal component of an ambient vector.
    pub fn tangent_part(self, p: TotalPoint, w: [f64; 4]) -> [f64; 4] {
        if self.is_flat() {
            let n = self.point_len();
            std::array::from_fn(|k| if k < n { w[k] } else { 0.0 })
        } else {
            axpy4(-dot4(w, p.0), p.0, w)
        }
    }

    /// Orthogonal decomposition into vertical and horizontal parts.
    pub fn split_tangent(self, p: TotalPoint, w: [f64; 4]) -> Result<TangentTotal> {
        self.check_tangent(p, w)?;
        let e = self.vertical_unit(p);
        let vert = e.map(|c| c * dot4(w, e));
        let horiz = std::array::from_fn(|k| w[k] - vert[k]);
        Ok(TangentTotal {
            point: p,
            vector: w,
            vert,
            horiz,
        })
    }

    /// Differential of the projection, as an ambient base vector.
    pub fn dproject(self, p: TotalPoint, w: [f64; 4]) -> [f64; 3] {
        match self {
            FibrationModel::FlatT2 => [w[0], 0.0, 0.0],
            FibrationModel::FlatT3 => [w[0], w[1], 0.0],
            _ => {
                let q = p.quat();
                // w = q (c i + a j + b k) maps to q (2b j - 2a k) q^{-1}
                let local = q.conj() * Quat(w);
                let [_, _, a, b] = local.0;
                q.rotate([0.0, 2.0 * b, -2.0 * a])
            }
        }
    }

    /// Inner product of total-space tangent vectors.
    pub fn inner(self, a: [f64; 4], b: [f64; 4]) -> f64 {
        dot4(a, b)
    }

    pub fn norm(self, w: [f64; 4]) -> f64 {
        norm4(w)
    }

    /// Metric norm of a base tangent vector.
    pub fn base_norm(self, v: [f64; 3]) -> f64 {
        if self.is_flat() {
            norm3(v)
        } else {
            0.5 * norm3(v)
        }
    }

    pub fn base_inner(self, a: [f64; 3], b: [f64; 3]) -> f64 {
        if self.is_flat() {
            dot3(a, b)
        } else {
            0.25 * dot3(a, b)
        }
    }

    fn check_base_tangent(self, x: BasePoint, v: [f64; 3]) -> Result<[f64; 3]> {
        let normal = match self {
            FibrationModel::FlatT2 => v[1].abs().max(v[2].abs()),
            FibrationModel::FlatT3 => v[2].abs(),
            _ => dot3(v, x.0).abs(),
        };
        if !normal.is_finite() || normal > TANGENCY_TOL * (1.0 + norm3(v)) {
            return Err(Error::BaseMismatch(normal));
        }
        Ok(match self {
            FibrationModel::FlatT2 => [v[0], 0.0, 0.0],
            FibrationModel::FlatT3 => [v[0], v[1], 0.0],
            _ => sub3(v, scale3(x.0, dot3(v, x.0))),
        })
    }

    /// Angle (sphere models) or metric length (flat models) spanned by a base
    /// geodesic with initial velocity `v`, the quantity bounded by the guards.
    fn geodesic_extent(self, v: [f64; 3]) -> f64 {
        norm3(v)
    }

    /// `exp_B(x, t v)`.
    pub fn base_geodesic(self, x: BasePoint, v: [f64; 3], t: f64) -> Result<BasePoint> {
        let v = self.check_base_tangent(x, v)?;
        if self.is_flat() {
            return Ok(BasePoint(add3(x.0, scale3(v, t))).wrapped(self));
        }
        let angle = self.geodesic_extent(v) * t.abs();
        if angle >= INJECTIVITY_GUARD {
            return Err(Error::BeyondInjectivityRadius {
                length: angle,
                guard: INJECTIVITY_GUARD,
            });
        }
        Ok(sphere_exp(x, scale3(v, t)))
    }

    /// Inverse of the base exponential: the shortest velocity from `x` to `y`.
    pub fn base_log(self, x: BasePoint, y: BasePoint) -> [f64; 3] {
        match self {
            FibrationModel::FlatT2 => [signed_increment(x.0[0], y.0[0]), 0.0, 0.0],
            FibrationModel::FlatT3 => [
                signed_increment(x.0[0], y.0[0]),
                signed_increment(x.0[1], y.0[1]),
                0.0,
            ],
            _ => sphere_log(x, y),
        }
    }

    pub fn base_distance(self, x: BasePoint, y: BasePoint) -> f64 {
        self.base_norm(self.base_log(x, y))
    }

    /// Great-circle angle between sphere base points, or the flat distance.
    pub fn base_angle(self, x: BasePoint, y: BasePoint) -> f64 {
        norm3(self.base_log(x, y))
    }

    /// Unit quaternion `s(x)` with `s(x) i s(x)^{-1} = x`, smooth away from
    /// `x = -i`.
    pub fn section(x: BasePoint) -> Quat {
        let [x1, x2, x3] = x.0;
        if x1 > -0.5 {
            Quat::new(1.0 + x1, 0.0, -x3, x2).normalize()
        } else {
            // rotate -i onto x, after j has carried i to -i
            Quat::new(1.0 - x1, 0.0, x3, -x2).normalize() * Quat::J
        }
    }

    /// Point of the fiber over `x` at fiber parameter `theta` (turns).
    pub fn fiber_point(self, x: BasePoint, theta: f64) -> TotalPoint {
        match self {
            FibrationModel::FlatT2 => TotalPoint([wrap_unit(x.0[0]), wrap_unit(theta), 0.0, 0.0]),
            FibrationModel::FlatT3 => TotalPoint([wrap_unit(x.0[0]), wrap_unit(x.0[1]), wrap_unit(theta), 0.0]),
            _ => {
                let phase = 2.0 * PI * theta / self.order() as f64;
                self.canonicalize(TotalPoint((Self::section(x) * Quat::exp_i(phase)).0))
            }
        }
    }

    /// Fiber parameter of `p` in turns, inverse to [`Self::fiber_point`].
    pub fn fiber_param(self, p: TotalPoint) -> f64 {
        if self.is_flat() {
            return p.0[self.vertical_slot()];
        }
        let z = Self::section(self.project(p)).conj() * p.quat();
        wrap_unit(z.0[1].atan2(z.0[0]) * self.order() as f64 / (2.0 * PI))
    }

    /// Geodesic distance in the total space.
    pub fn distance(self, p: TotalPoint, q: TotalPoint) -> f64 {
        if self.is_flat() {
            let n = self.point_len();
            return (0..n)
                .map(|k| signed_increment(p.0[k], q.0[k]).powi(2))
                .sum::<f64>()
                .sqrt();
        }
        let e = self.order();
        (0..e)
            .map(|k| p.quat().sphere_distance(q.quat() * Quat::exp_i(2.0 * PI * k as f64 / e as f64)))
            .fold(f64::INFINITY, f64::min)
    }

    /// Ambient displacement from `p` to the representative of `q` nearest to
    /// it; for tori the componentwise signed increments.
    pub fn chart_difference(self, p: TotalPoint, q: TotalPoint) -> [f64; 4] {
        if self.is_flat() {
            let n = self.point_len();
            return std::array::from_fn(|k| if k < n { signed_increment(p.0[k], q.0[k]) } else { 0.0 });
        }
        let e = self.order();
        let best = (0..e)
            .map(|k| q.quat() * Quat::exp_i(2.0 * PI * k as f64 / e as f64))
            .min_by(|a, b| (*a - p.quat()).norm().total_cmp(&(*b - p.quat()).norm()))
            .expect("nonempty deck group");
        (best - p.quat()).0
    }

    /// Horizontal vector at `p` projecting to the base vector `v`.
    pub fn horizontal_lift_vec(self, p: TotalPoint, v: [f64; 3]) -> Result<TangentTotal> {
        let x = self.project(p);
        let v = self.check_base_tangent(x, v)?;
        let w = match self {
            FibrationModel::FlatT2 => [v[0], 0.0, 0.0, 0.0],
            FibrationModel::FlatT3 => [v[0], v[1], 0.0, 0.0],
            _ => hopf_lift(p.quat(), v).0,
        };
        Ok(TangentTotal {
            point: p,
            vector: w,
            vert: [0.0; 4],
            horiz: w,
        })
    }

    /// Endpoint of the horizontal lift through `q` of the minimizing base
    /// geodesic from `project(q)` to `target`.
    pub fn horizontal_transport(self, q: TotalPoint, target: BasePoint) -> Result<TotalPoint> {
        match self {
            FibrationModel::FlatT2 => Ok(TotalPoint([wrap_unit(target.0[0]), q.0[1], 0.0, 0.0])),
            FibrationModel::FlatT3 => Ok(TotalPoint([wrap_unit(target.0[0]), wrap_unit(target.0[1]), q.0[2], 0.0])),
            _ => {
                let x0 = self.project(q);
                let v = sphere_log(x0, target);
                let angle = norm3(v);
                if angle >= INJECTIVITY_GUARD {
                    return Err(Error::BeyondInjectivityRadius {
                        length: angle,
                        guard: INJECTIVITY_GUARD,
                    });
                }
                if angle == 0.0 {
                    return Ok(q);
                }
                let end = transport_rk4(q.quat(), x0, v, target)?;
                Ok(self.canonicalize(TotalPoint(end.0)))
            }
        }
    }

    /// Fiber geodesic along the vertical part of `w`, followed by horizontal
    /// transport along the base geodesic with velocity `dpi(w)`.
    pub fn adapted_exp(self, p: TotalPoint, w: [f64; 4]) -> Result<TotalPoint> {
        let split = self.split_tangent(p, w)?;
        let vbar = self.dproject(p, split.horiz);
        if self.is_flat() {
            let n = self.point_len();
            return Ok(self.canonicalize(TotalPoint(std::array::from_fn(|k| if k < n { p.0[k] + w[k] } else { 0.0 }))));
        }
        let t = dot4(w, self.vertical_unit(p));
        let along = TotalPoint((p.quat() * Quat::exp_i(t)).0);
        let x = self.project(p);
        let target = self.base_geodesic(x, vbar, 1.0)?;
        self.horizontal_transport(along, target)
    }

    /// Determinant of the differential of `adapted_exp` at the zero vector,
    /// by central differences in an orthonormal tangent frame.
    pub fn adapted_exp_jacobian_det(self, p: TotalPoint) -> Result<f64> {
        let basis = self.tangent_basis(p);
        let h = 1e-5;
        let d = basis.len();
        let mut jac = vec![vec![0.0; d]; d];
        for (b, eb) in basis.iter().enumerate() {
            let plus = self.adapted_exp(p, eb.map(|c| c * h))?;
            let minus = self.adapted_exp(p, eb.map(|c| -c * h))?;
            let dp = self.chart_difference(p, plus);
            let dm = self.chart_difference(p, minus);
            let col: [f64; 4] = std::array::from_fn(|k| (dp[k] - dm[k]) / (2.0 * h));
            for (a, ea) in basis.iter().enumerate() {
                jac[a][b] = dot4(col, *ea);
            }
        }
        Ok(determinant(jac))
    }

    pub fn random_point(self, rng: &mut impl Rng) -> TotalPoint {
        if self.is_flat() {
            let n = self.point_len();
            TotalPoint(std::array::from_fn(|k| if k < n { rng.gen_range(0.0..1.0) } else { 0.0 }))
        } else {
            self.canonicalize(TotalPoint(Quat::random_unit(rng).0))
        }
    }

    pub fn random_base_point(self, rng: &mut impl Rng) -> BasePoint {
        self.project(self.random_point(rng))
    }

    /// Random tangent vector at `p` with independent components of size up to
    /// `scale` in an orthonormal frame.
    pub fn random_tangent(self, p: TotalPoint, scale: f64, rng: &mut impl Rng) -> [f64; 4] {
        self.tangent_basis(p)
            .iter()
            .fold([0.0; 4], |acc, e| axpy4(rng.gen_range(-scale..scale), *e, acc))
    }

    /// Random base tangent vector at `x` with metric-frame components up to
    /// `scale`.
    pub fn random_base_tangent(self, x: BasePoint, scale: f64, rng: &mut impl Rng) -> [f64; 3] {
        match self {
            FibrationModel::FlatT2 => [rng.gen_range(-scale..scale), 0.0, 0.0],
            FibrationModel::FlatT3 => [rng.gen_range(-scale..scale), rng.gen_range(-scale..scale), 0.0],
            _ => {
                let (e1, e2) = sphere_frame(x);
                // a unit metric vector is an ambient vector of length 2
                let a = 2.0 * rng.gen_range(-scale..scale);
                let b = 2.0 * rng.gen_range(-scale..scale);
                add3(scale3(e1, a), scale3(e2, b))
            }
        }
    }
}

impl BasePoint {
    fn wrapped(self, model: FibrationModel) -> BasePoint {
        match model {
            FibrationModel::FlatT2 => BasePoint([wrap_unit(self.0[0]), 0.0, 0.0]),
            FibrationModel::FlatT3 => BasePoint([wrap_unit(self.0[0]), wrap_unit(self.0[1]), 0.0]),
            _ => self,
        }
    }
}

/// Orthonormal (Euclidean) frame of the tangent plane of the unit sphere at `x`.
pub fn sphere_frame(x: BasePoint) -> ([f64; 3], [f64; 3]) {
    let a = if x.0[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let e1 = cross(x.0, a);
    let e1 = scale3(e1, 1.0 / norm3(e1));
    (e1, cross(x.0, e1))
}

fn sphere_exp(x: BasePoint, v: [f64; 3]) -> BasePoint {
    let a = norm3(v);
    if a < 1e-300 {
        return x;
    }
    let y = add3(scale3(x.0, a.cos()), scale3(v, a.sin() / a));
    BasePoint(scale3(y, 1.0 / norm3(y)))
}

fn sphere_log(x: BasePoint, y: BasePoint) -> [f64; 3] {
    let c = dot3(x.0, y.0).clamp(-1.0, 1.0);
    let perp = sub3(y.0, scale3(x.0, c));
    let s = norm3(perp);
    if s < 1e-300 {
        return [0.0; 3];
    }
    let angle = s.atan2(c);
    scale3(perp, angle / s)
}

// Horizontal vector at q projecting to the ambient base vector v at q i q^{-1}.
fn hopf_lift(q: Quat, v: [f64; 3]) -> Quat {
    let local = (q.conj() * Quat::pure(v) * q).vector();
    let b = local[1] / 2.0;
    let a = -local[2] / 2.0;
    q * Quat::new(0.0, 0.0, a, b)
}

fn transport_rk4(q0: Quat, x0: BasePoint, v: [f64; 3], target: BasePoint) -> Result<Quat> {
    let angle = norm3(v);
    let u = scale3(v, 1.0 / angle);
    // velocity of the base geodesic at time t in [0, 1]
    let vel = |t: f64| {
        let s = angle * t;
        add3(scale3(x0.0, -angle * s.sin()), scale3(u, angle * s.cos()))
    };
    let f = |t: f64, q: Quat| hopf_lift(q, vel(t));
    let integrate = |n: usize| {
        let h = 1.0 / n as f64;
        let mut q = q0;
        for step in 0..n {
            let t = step as f64 * h;
            let k1 = f(t, q);
            let k2 = f(t + 0.5 * h, q + k1.scale(0.5 * h));
            let k3 = f(t + 0.5 * h, q + k2.scale(0.5 * h));
            let k4 = f(t + h, q + k3.scale(h));
            q = (q + (k1 + k2.scale(2.0) + k3.scale(2.0) + k4).scale(h / 6.0)).normalize();
        }
        q
    };
    let mut n = 64;
    let mut previous = integrate(n);
    let mut err = f64::INFINITY;
    while n < 1 << 16 {
        n *= 2;
        let q = integrate(n);
        err = sphere_log(target, BasePoint(q.rotate([1.0, 0.0, 0.0]))).iter().map(|c| c * c).sum::<f64>().sqrt();
        if err < TRANSPORT_TOL && (q - previous).norm() < TRANSPORT_TOL {
            return Ok(q);
        }
        previous = q;
    }
    Err(Error::NonconvergedOde(err))
}

fn determinant(mut m: Vec<Vec<f64>>) -> f64 {
    let n = m.len();
    let mut det = 1.0;
    for c in 0..n {
        let pivot = (c..n)
            .max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs()))
            .expect("nonempty");
        if m[pivot][c] == 0.0 {
            return 0.0;
        }
        if pivot != c {
            m.swap(pivot, c);
            det = -det;
        }
        det *= m[c][c];
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            for k in c..n {
                m[r][k] -= f * m[c][k];
            }
        }
    }
    det
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const MODELS: [FibrationModel; 4] = [
        FibrationModel::FlatT2,
        FibrationModel::FlatT3,
        FibrationModel::Hopf,
        FibrationModel::Lens(2),
    ];

    #[test]
    fn model_ids_round_trip() {
        for m in MODELS.iter().copied().chain([FibrationModel::Lens(5)]) {
            assert_eq!(m.to_string().parse::<FibrationModel>().unwrap(), m);
        }
        assert!("lens-0".parse::<FibrationModel>().is_err());
        assert!("klein".parse::<FibrationModel>().is_err());
    }

    #[test]
    fn projections() {
        let m = FibrationModel::FlatT2;
        assert_eq!(m.project(TotalPoint([0.3, 0.7, 0.0, 0.0])).0[0], 0.3);
        let h = FibrationModel::Hopf;
        assert_eq!(h.project(TotalPoint(Quat::ONE.0)).0, [1.0, 0.0, 0.0]);
        for theta in [0.1, 0.5, 2.0] {
            let x = h.project(TotalPoint(Quat::exp_i(theta).0));
            assert!(norm3(sub3(x.0, [1.0, 0.0, 0.0])) < 1e-15);
        }
    }

    #[test]
    fn flat_split() {
        let m = FibrationModel::FlatT2;
        let p = TotalPoint([0.2, 0.4, 0.0, 0.0]);
        let s = m.split_tangent(p, [0.0, 1.0, 0.0, 0.0]).unwrap();
        assert_eq!((s.vert, s.horiz), ([0.0, 1.0, 0.0, 0.0], [0.0; 4]));
        let s = m.split_tangent(p, [1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!((s.vert, s.horiz), ([0.0; 4], [1.0, 0.0, 0.0, 0.0]));
        assert!(matches!(m.split_tangent(p, [0.0, 0.0, 1.0, 0.0]), Err(Error::NotTangent(_))));
    }

    #[test]
    fn hopf_differential_matches_finite_differences() {
        let h = FibrationModel::Hopf;
        let p = TotalPoint(Quat::ONE.0);
        let w = Quat::J.0;
        let s = h.split_tangent(p, w).unwrap();
        assert!(norm4(s.vert) < 1e-15);
        let dpi = h.dproject(p, w);
        let eps = 1e-6;
        let plus = h.project(TotalPoint((Quat::ONE + Quat::J.scale(eps)).normalize().0));
        let minus = h.project(TotalPoint((Quat::ONE - Quat::J.scale(eps)).normalize().0));
        let fd = scale3(sub3(plus.0, minus.0), 0.5 / eps);
        assert!(norm3(sub3(fd, dpi)) < 1e-6);
        assert!((norm3(dpi) - 2.0).abs() < 1e-12);
        assert!(matches!(h.split_tangent(p, Quat::ONE.0), Err(Error::NotTangent(_))));
    }

    #[test]
    fn vertical_is_killed_by_projection() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for m in MODELS {
            for _ in 0..50 {
                let p = m.random_point(&mut rng);
                let w = m.random_tangent(p, 1.0, &mut rng);
                let s = m.split_tangent(p, w).unwrap();
                assert!(norm3(m.dproject(p, s.vert)) < 1e-12);
                assert!(m.inner(s.vert, s.horiz).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn base_geodesics() {
        let f = FibrationModel::FlatT2;
        let x = BasePoint([0.9, 0.0, 0.0]);
        let y = f.base_geodesic(x, [0.3, 0.0, 0.0], 1.0).unwrap();
        assert!((y.0[0] - 0.2).abs() < 1e-15);
        assert_eq!(f.base_geodesic(x, [0.0; 3], 1.0).unwrap(), x);

        let h = FibrationModel::Hopf;
        let y = h.base_geodesic(BasePoint([1.0, 0.0, 0.0]), [0.0, PI / 2.0, 0.0], 1.0).unwrap();
        assert!(norm3(sub3(y.0, [0.0, 1.0, 0.0])) < 1e-12);
        assert!(matches!(
            h.base_geodesic(BasePoint([1.0, 0.0, 0.0]), [0.0, 3.0, 0.0], 1.0),
            Err(Error::BeyondInjectivityRadius { .. })
        ));
    }

    #[test]
    fn log_inverts_exp() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for m in MODELS {
            for _ in 0..100 {
                let x = m.random_base_point(&mut rng);
                let v = m.random_base_tangent(x, 0.3, &mut rng);
                let y = m.base_geodesic(x, v, 1.0).unwrap();
                assert!(norm3(sub3(m.base_log(x, y), v)) < 1e-10, "{m}");
            }
        }
    }

    #[test]
    fn section_projects_correctly() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..200 {
            let x = FibrationModel::Hopf.random_base_point(&mut rng);
            let s = FibrationModel::section(x);
            assert!(norm3(sub3(s.rotate([1.0, 0.0, 0.0]), x.0)) < 1e-14);
        }
        let s = FibrationModel::section(BasePoint([-1.0, 0.0, 0.0]));
        assert!(norm3(sub3(s.rotate([1.0, 0.0, 0.0]), [-1.0, 0.0, 0.0])) < 1e-15);
    }

    #[test]
    fn fiber_param_inverts_fiber_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for m in MODELS.iter().copied().chain([FibrationModel::Lens(3)]) {
            for _ in 0..100 {
                let x = m.random_base_point(&mut rng);
                let t: f64 = rng.gen_range(0.0..1.0);
                let p = m.fiber_point(x, t);
                assert!(m.base_distance(m.project(p), x) < 1e-12);
                let back = m.fiber_param(p);
                assert!(crate::circle_diffeo::circle_distance(back, t) < 1e-12, "{m}: {back} vs {t}");
            }
        }
    }

    #[test]
    fn lift_is_horizontal_and_projects_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for m in MODELS {
            for _ in 0..100 {
                let p = m.random_point(&mut rng);
                let x = m.project(p);
                let v = m.random_base_tangent(x, 1.0, &mut rng);
                let lift = m.horizontal_lift_vec(p, v).unwrap();
                let s = m.split_tangent(p, lift.vector).unwrap();
                assert!(norm4(s.vert) < 1e-12);
                assert!(norm3(sub3(m.dproject(p, lift.vector), v)) < 1e-12);
                assert!((m.norm(lift.vector) - m.base_norm(v)).abs() < 1e-12);
            }
        }
        let h = FibrationModel::Hopf;
        assert!(matches!(
            h.horizontal_lift_vec(TotalPoint(Quat::ONE.0), [1.0, 0.0, 0.0]),
            Err(Error::BaseMismatch(_))
        ));
    }

    #[test]
    fn transport_matches_rotation_formula() {
        // the horizontal lift of a great circle is left multiplication by a
        // rotation quaternion about the axis of that circle
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = FibrationModel::Hopf;
        for _ in 0..50 {
            let q = h.random_point(&mut rng);
            let x = h.project(q);
            let v = h.random_base_tangent(x, 0.6, &mut rng);
            let target = h.base_geodesic(x, v, 1.0).unwrap();
            let axis = cross(x.0, v);
            let r = Quat::exp_pure(scale3(axis, 0.5));
            let exact = r * q.quat();
            let got = h.horizontal_transport(q, target).unwrap();
            assert!((got.quat() - exact).norm() < 1e-9);
            assert!(h.base_angle(h.project(got), target) < 1e-9);
        }
    }

    #[test]
    fn flat_transport_and_exp() {
        let m = FibrationModel::FlatT2;
        let q = TotalPoint([0.1, 0.6, 0.0, 0.0]);
        assert_eq!(m.horizontal_transport(q, BasePoint([0.8, 0.0, 0.0])).unwrap().0, [0.8, 0.6, 0.0, 0.0]);
        let p = m.adapted_exp(TotalPoint([0.9, 0.7, 0.0, 0.0]), [0.3, 0.5, 0.0, 0.0]).unwrap();
        assert!((p.0[0] - 0.2).abs() < 1e-15 && (p.0[1] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn vertical_exp_stays_in_fiber() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for m in [FibrationModel::Hopf, FibrationModel::Lens(3)] {
            let p = m.random_point(&mut rng);
            let w = m.vertical_unit(p).map(|c| c * 0.8);
            let q = m.adapted_exp(p, w).unwrap();
            assert!(m.base_angle(m.project(q), m.project(p)) < 1e-10);
            assert!((m.distance(p, q) - 0.8).abs() < 1e-12);
        }
    }

    #[test]
    fn jacobian_is_identity_at_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for m in MODELS {
            let p = m.random_point(&mut rng);
            let det = m.adapted_exp_jacobian_det(p).unwrap();
            assert!((det - 1.0).abs() < 1e-6, "{m}: {det}");
        }
    }

    #[test]
    fn lens_deck_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let m = FibrationModel::Lens(4);
        for _ in 0..50 {
            let q = Quat::random_unit(&mut rng);
            let moved = q * Quat::exp_i(2.0 * PI / 4.0);
            let (a, b) = (m.canonicalize(TotalPoint(q.0)), m.canonicalize(TotalPoint(moved.0)));
            assert!((a.quat() - b.quat()).norm() < 1e-12);
            assert!(m.base_angle(m.project(TotalPoint(q.0)), m.project(TotalPoint(moved.0))) < 1e-12);
            assert!(m.distance(TotalPoint(q.0), TotalPoint(moved.0)) < 1e-12);
        }
    }

    #[test]
    fn point_parsing() {
        let h = FibrationModel::Hopf;
        assert!(h.point_from_slice(&[1.0, 0.0, 0.0]).is_err());
        assert!(h.point_from_slice(&[2.0, 0.0, 0.0, 0.0]).is_err());
        let p = FibrationModel::FlatT3.point_from_slice(&[1.25, -0.5, 0.0]).unwrap();
        assert_eq!(p.0, [0.25, 0.5, 0.0, 0.0]);
    }
}
