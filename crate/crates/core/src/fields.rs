//! Sampled vector fields on the total space of a model fibration: vertical
//! and horizontal parts, projectability, the horizontal lift of base fields,
//! horizontal averaging and the L2 splitting into fair and projectable parts.
//!
//! A grid is a product of `nb` base nodes and `nf` fiber nodes. Node
//! `(b, f)` sits at `fiber_point(base_node(b), f / nf)` and is stored at index
//! `b * nf + f`. Quadrature is the uniform (trapezoid) rule in both factors.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BasePoint, FibrationModel, TotalPoint};
use crate::quat::{add3, scale3, sub3};

/// Base nodes used by the field grids and the model fiberings: uniform on the
/// circle, a `g x g` lattice on `T2` (`n = g^2`) and a Fibonacci lattice on
/// `S2`.
pub fn base_nodes(model: FibrationModel, n: usize) -> Result<Vec<BasePoint>> {
    if n == 0 {
        return Err(Error::InvalidInput("base grid must be nonempty".into()));
    }
    match model {
        FibrationModel::FlatT2 => Ok((0..n).map(|b| BasePoint([b as f64 / n as f64, 0.0, 0.0])).collect()),
        FibrationModel::FlatT3 => {
            let g = (n as f64).sqrt().round() as usize;
            if g * g != n {
                return Err(Error::InvalidInput(format!("flat-t3 base grids need a square node count, got {n}")));
            }
            Ok((0..n)
                .map(|b| BasePoint([(b / g) as f64 / g as f64, (b % g) as f64 / g as f64, 0.0]))
                .collect())
        }
        _ => {
            let golden = PI * (3.0 - 5f64.sqrt());
            Ok((0..n)
                .map(|b| {
                    let z = 1.0 - (2 * b + 1) as f64 / n as f64;
                    let r = (1.0 - z * z).sqrt();
                    let phi = golden * b as f64;
                    BasePoint([r * phi.cos(), r * phi.sin(), z])
                })
                .collect())
        }
    }
}

/// A smooth vector field on the total space, evaluated pointwise.
pub trait VectorField: Sync {
    fn eval(&self, model: FibrationModel, p: TotalPoint) -> [f64; 4];
}

impl<F: Fn(TotalPoint) -> [f64; 4] + Sync> VectorField for F {
    fn eval(&self, _model: FibrationModel, p: TotalPoint) -> [f64; 4] {
        self(p)
    }
}

/// Random smooth field: a sum of a few Fourier modes on the flat tori, the
/// tangential part of a random quadratic map of `R^4` on the sphere models.
#[derive(Debug, Clone)]
pub struct RandomField {
    modes: Vec<([i32; 3], [f64; 4], f64)>,
    linear: [[f64; 4]; 4],
    quadratic: [[f64; 4]; 4],
}

impl RandomField {
    /// Components of size at most about `scale`.
    pub fn new(model: FibrationModel, scale: f64, rng: &mut impl Rng) -> Self {
        let dims = model.point_len();
        let modes = if model.is_flat() {
            (0..6)
                .map(|_| {
                    let k: [i32; 3] = std::array::from_fn(|d| if d < dims { rng.gen_range(-2..=2) } else { 0 });
                    let amp: [f64; 4] =
                        std::array::from_fn(|d| if d < dims { rng.gen_range(-1.0..1.0) * scale / 6.0 } else { 0.0 });
                    (k, amp, rng.gen_range(0.0..1.0))
                })
                .collect()
        } else {
            Vec::new()
        };
        let mut matrix = || -> [[f64; 4]; 4] {
            std::array::from_fn(|_| std::array::from_fn(|_| rng.gen_range(-1.0..1.0) * scale / 4.0))
        };
        RandomField {
            modes,
            linear: matrix(),
            quadratic: matrix(),
        }
    }
}

impl VectorField for RandomField {
    fn eval(&self, model: FibrationModel, p: TotalPoint) -> [f64; 4] {
        if model.is_flat() {
            let mut v = [0.0; 4];
            for (k, amp, phase) in &self.modes {
                let arg = 2.0 * PI * (k[0] as f64 * p.0[0] + k[1] as f64 * p.0[1] + k[2] as f64 * p.0[2] + phase);
                let s = arg.sin();
                for d in 0..4 {
                    v[d] += amp[d] * s;
                }
            }
            v
        } else {
            let q = p.0;
            let sq = q.map(|c| c * c);
            let raw: [f64; 4] = std::array::from_fn(|r| {
                (0..4).map(|c| self.linear[r][c] * q[c] + self.quadratic[r][c] * sq[c]).sum()
            });
            model.tangent_part(p, raw)
        }
    }
}

/// A sampled base vector field.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseFieldGrid {
    pub model: FibrationModel,
    pub nodes: Vec<BasePoint>,
    pub vectors: Vec<[f64; 3]>,
}

impl BaseFieldGrid {
    pub fn zero(model: FibrationModel, nb: usize) -> Result<Self> {
        Self::from_fn(model, nb, |_| [0.0; 3])
    }

    pub fn from_fn(model: FibrationModel, nb: usize, f: impl Fn(BasePoint) -> [f64; 3]) -> Result<Self> {
        let nodes = base_nodes(model, nb)?;
        let vectors = nodes.iter().map(|&x| tangent_base(model, x, f(x))).collect();
        Ok(BaseFieldGrid { model, nodes, vectors })
    }

    /// Random smooth base field: a random linear vector field projected onto
    /// the tangent planes, or Fourier modes on flat bases.
    pub fn random(model: FibrationModel, nb: usize, scale: f64, rng: &mut impl Rng) -> Result<Self> {
        let m: [[f64; 3]; 3] = std::array::from_fn(|_| std::array::from_fn(|_| rng.gen_range(-scale..scale)));
        let phase: [f64; 3] = std::array::from_fn(|_| rng.gen_range(0.0..1.0));
        Self::from_fn(model, nb, |x| {
            if model.is_flat() {
                std::array::from_fn(|d| {
                    (0..2)
                        .map(|c| m[d][c] * (2.0 * PI * (x.0[c] + phase[c] * (c + 1) as f64)).sin())
                        .sum()
                })
            } else {
                std::array::from_fn(|d| (0..3).map(|c| m[d][c] * x.0[c]).sum())
            }
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Largest metric norm of the difference of two base fields.
    pub fn sup_distance(&self, other: &BaseFieldGrid) -> Result<f64> {
        if self.len() != other.len() {
            return Err(Error::GridMismatch("base grids differ".into()));
        }
        Ok(self
            .vectors
            .iter()
            .zip(&other.vectors)
            .map(|(a, b)| self.model.base_norm(sub3(*a, *b)))
            .fold(0.0, f64::max))
    }

    pub fn sup_norm(&self) -> f64 {
        self.vectors.iter().map(|v| self.model.base_norm(*v)).fold(0.0, f64::max)
    }
}

fn tangent_base(model: FibrationModel, x: BasePoint, v: [f64; 3]) -> [f64; 3] {
    match model {
        FibrationModel::FlatT2 => [v[0], 0.0, 0.0],
        FibrationModel::FlatT3 => [v[0], v[1], 0.0],
        _ => sub3(v, scale3(x.0, crate::quat::dot3(v, x.0))),
    }
}

/// A tangent vector field sampled on the product grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    pub model: FibrationModel,
    pub nb: usize,
    pub nf: usize,
    pub nodes: Vec<BasePoint>,
    pub points: Vec<TotalPoint>,
    pub vectors: Vec<[f64; 4]>,
}

#[derive(Serialize, Deserialize)]
struct FieldGridJson {
    model: FibrationModel,
    nb: usize,
    nf: usize,
    vectors: Vec<Vec<f64>>,
}

/// Norms and cross terms of the splitting `X = fair + projectable`.
#[derive(Debug, Clone, Serialize)]
pub struct SplitReport {
    pub norm: f64,
    pub fair_norm: f64,
    pub projectable_norm: f64,
    /// `<fair, projectable> / (|fair| |projectable|)`, zero if either vanishes.
    pub normalized_cross: f64,
    pub fair_vertical_sup: f64,
    pub fair_center_sup: f64,
    pub projectable_spread: f64,
    pub idempotence_error: f64,
}

fn sub4(a: [f64; 4], b: [f64; 4]) -> [f64; 4] {
    std::array::from_fn(|k| a[k] - b[k])
}

impl FieldGrid {
    fn skeleton(model: FibrationModel, nb: usize, nf: usize) -> Result<(Vec<BasePoint>, Vec<TotalPoint>)> {
        if nf < 2 {
            return Err(Error::InvalidInput("fiber grid needs at least 2 nodes".into()));
        }
        let nodes = base_nodes(model, nb)?;
        let points = nodes
            .iter()
            .flat_map(|&x| (0..nf).map(move |f| model.fiber_point(x, f as f64 / nf as f64)))
            .collect();
        Ok((nodes, points))
    }

    /// Samples `field` at every node; vectors must be tangent.
    pub fn from_fn(model: FibrationModel, nb: usize, nf: usize, field: impl Fn(TotalPoint) -> [f64; 4] + Sync) -> Result<Self> {
        let (nodes, points) = Self::skeleton(model, nb, nf)?;
        let vectors: Vec<[f64; 4]> = points.par_iter().map(|&p| field(p)).collect();
        Self::from_parts(model, nb, nf, nodes, points, vectors)
    }

    pub fn sample(model: FibrationModel, nb: usize, nf: usize, field: &dyn VectorField) -> Result<Self> {
        Self::from_fn(model, nb, nf, |p| field.eval(model, p))
    }

    pub fn zero(model: FibrationModel, nb: usize, nf: usize) -> Result<Self> {
        Self::from_fn(model, nb, nf, |_| [0.0; 4])
    }

    fn from_parts(
        model: FibrationModel,
        nb: usize,
        nf: usize,
        nodes: Vec<BasePoint>,
        points: Vec<TotalPoint>,
        vectors: Vec<[f64; 4]>,
    ) -> Result<Self> {
        for (p, v) in points.iter().zip(&vectors) {
            model.split_tangent(*p, *v)?;
        }
        Ok(FieldGrid {
            model,
            nb,
            nf,
            nodes,
            points,
            vectors,
        })
    }

    fn with_vectors(&self, vectors: Vec<[f64; 4]>) -> FieldGrid {
        FieldGrid {
            vectors,
            ..self.clone()
        }
    }

    fn check_same_grid(&self, other: &FieldGrid) -> Result<()> {
        if self.model != other.model || self.nb != other.nb || self.nf != other.nf {
            return Err(Error::GridMismatch(format!(
                "{} {}x{} vs {} {}x{}",
                self.model, self.nb, self.nf, other.model, other.nb, other.nf
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn add(&self, other: &FieldGrid) -> Result<FieldGrid> {
        self.check_same_grid(other)?;
        Ok(self.with_vectors(
            self.vectors
                .iter()
                .zip(&other.vectors)
                .map(|(a, b)| std::array::from_fn(|k| a[k] + b[k]))
                .collect(),
        ))
    }

    pub fn sub(&self, other: &FieldGrid) -> Result<FieldGrid> {
        self.check_same_grid(other)?;
        Ok(self.with_vectors(self.vectors.iter().zip(&other.vectors).map(|(a, b)| sub4(*a, *b)).collect()))
    }

    pub fn scale(&self, s: f64) -> FieldGrid {
        self.with_vectors(self.vectors.iter().map(|v| v.map(|c| c * s)).collect())
    }

    pub fn vertical_part(&self) -> FieldGrid {
        self.with_vectors(
            self.points
                .iter()
                .zip(&self.vectors)
                .map(|(p, v)| self.model.split_tangent(*p, *v).expect("tangent by construction").vert)
                .collect(),
        )
    }

    pub fn horizontal_part(&self) -> FieldGrid {
        self.with_vectors(
            self.points
                .iter()
                .zip(&self.vectors)
                .map(|(p, v)| self.model.split_tangent(*p, *v).expect("tangent by construction").horiz)
                .collect(),
        )
    }

    fn projected(&self) -> Vec<[f64; 3]> {
        self.points
            .iter()
            .zip(&self.vectors)
            .map(|(p, v)| self.model.dproject(*p, *v))
            .collect()
    }

    /// Fiberwise mean of `dpi(X)`.
    pub fn horizontal_center(&self) -> BaseFieldGrid {
        let proj = self.projected();
        let vectors = proj
            .chunks(self.nf)
            .map(|fiber| scale3(fiber.iter().fold([0.0; 3], |acc, v| add3(acc, *v)), 1.0 / self.nf as f64))
            .collect();
        BaseFieldGrid {
            model: self.model,
            nodes: self.nodes.clone(),
            vectors,
        }
    }

    /// Largest deviation of `dpi(X)` from its fiberwise mean.
    pub fn projection_spread(&self) -> f64 {
        let center = self.horizontal_center();
        self.projected()
            .chunks(self.nf)
            .zip(&center.vectors)
            .flat_map(|(fiber, c)| fiber.iter().map(move |v| self.model.base_norm(sub3(*v, *c))))
            .fold(0.0, f64::max)
    }

    /// `(true, Y)` when `dpi(X)` is constant along every fiber to within `tol`.
    pub fn is_projectable(&self, tol: f64) -> (bool, Option<BaseFieldGrid>) {
        if self.projection_spread() < tol {
            (true, Some(self.horizontal_center()))
        } else {
            (false, None)
        }
    }

    /// The basic field over `y`, sampled on `nf` fiber nodes.
    pub fn horizontal_lift_field(y: &BaseFieldGrid, nf: usize) -> Result<FieldGrid> {
        let model = y.model;
        let (nodes, points) = Self::skeleton(model, y.len(), nf)?;
        let vectors = points
            .iter()
            .enumerate()
            .map(|(idx, &p)| Ok(model.horizontal_lift_vec(p, y.vectors[idx / nf])?.vector))
            .collect::<Result<Vec<_>>>()?;
        Self::from_parts(model, y.len(), nf, nodes, points, vectors)
    }

    /// The retraction `r'(X) = X_vert + lift(center(X))` onto projectable fields.
    pub fn horizontal_average(&self) -> FieldGrid {
        let lift = Self::horizontal_lift_field(&self.horizontal_center(), self.nf).expect("grid already valid");
        self.vertical_part().add(&lift).expect("same grid")
    }

    /// `X - r'(X)`, the fair part.
    pub fn fair_part(&self) -> FieldGrid {
        self.sub(&self.horizontal_average()).expect("same grid")
    }

    pub fn l2_inner(&self, other: &FieldGrid) -> Result<f64> {
        self.check_same_grid(other)?;
        let total: f64 = self
            .vectors
            .iter()
            .zip(&other.vectors)
            .map(|(a, b)| self.model.inner(*a, *b))
            .sum();
        Ok(total / self.len() as f64)
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_inner(self).expect("same grid").sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.vectors.iter().map(|v| self.model.norm(*v)).fold(0.0, f64::max)
    }

    pub fn sup_distance(&self, other: &FieldGrid) -> Result<f64> {
        Ok(self.sub(other)?.sup_norm())
    }

    /// Diagnostics of the fair/projectable decomposition.
    pub fn split_report(&self) -> SplitReport {
        let proj = self.horizontal_average();
        let fair = self.sub(&proj).expect("same grid");
        let (fn_, pn) = (fair.l2_norm(), proj.l2_norm());
        let cross = fair.l2_inner(&proj).expect("same grid");
        SplitReport {
            norm: self.l2_norm(),
            fair_norm: fn_,
            projectable_norm: pn,
            normalized_cross: if fn_ > 0.0 && pn > 0.0 { cross / (fn_ * pn) } else { 0.0 },
            fair_vertical_sup: fair.vertical_part().sup_norm(),
            fair_center_sup: fair.horizontal_center().sup_norm(),
            projectable_spread: proj.projection_spread(),
            idempotence_error: proj.horizontal_average().sup_distance(&proj).expect("same grid"),
        }
    }

    /// Lie bracket `[X, Y]` on the flat `T2` grid by periodic central
    /// differences.
    pub fn bracket(&self, other: &FieldGrid) -> Result<FieldGrid> {
        self.check_same_grid(other)?;
        if self.model != FibrationModel::FlatT2 {
            return Err(Error::InvalidInput(format!("grid brackets are implemented on flat-t2, got {}", self.model)));
        }
        let (nb, nf) = (self.nb, self.nf);
        let at = |b: isize, f: isize| (b.rem_euclid(nb as isize) as usize) * nf + f.rem_euclid(nf as isize) as usize;
        let derivative = |field: &FieldGrid, idx: usize, dir: [f64; 4]| -> [f64; 4] {
            let (b, f) = ((idx / nf) as isize, (idx % nf) as isize);
            let dx: [f64; 4] = std::array::from_fn(|k| {
                (field.vectors[at(b + 1, f)][k] - field.vectors[at(b - 1, f)][k]) * nb as f64 / 2.0
            });
            let dy: [f64; 4] = std::array::from_fn(|k| {
                (field.vectors[at(b, f + 1)][k] - field.vectors[at(b, f - 1)][k]) * nf as f64 / 2.0
            });
            std::array::from_fn(|k| dir[0] * dx[k] + dir[1] * dy[k])
        };
        let vectors = (0..self.len())
            .map(|idx| sub4(derivative(other, idx, self.vectors[idx]), derivative(self, idx, other.vectors[idx])))
            .collect();
        Ok(self.with_vectors(vectors))
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(FieldGridJson {
            model: self.model,
            nb: self.nb,
            nf: self.nf,
            vectors: self.vectors.iter().map(|v| v[..self.model.point_len()].to_vec()).collect(),
        })
        .expect("plain record")
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let raw: FieldGridJson =
            serde_json::from_value(value.clone()).map_err(|e| Error::InvalidInput(e.to_string()))?;
        if raw.vectors.len() != raw.nb * raw.nf {
            return Err(Error::GridMismatch(format!(
                "expected {} vectors for a {}x{} grid, got {}",
                raw.nb * raw.nf,
                raw.nb,
                raw.nf,
                raw.vectors.len()
            )));
        }
        let dims = raw.model.point_len();
        let vectors = raw
            .vectors
            .iter()
            .map(|v| {
                if v.len() != dims {
                    return Err(Error::InvalidInput(format!("vectors of {} have {dims} components", raw.model)));
                }
                let mut w = [0.0; 4];
                w[..dims].copy_from_slice(v);
                Ok(w)
            })
            .collect::<Result<Vec<_>>>()?;
        let (nodes, points) = Self::skeleton(raw.model, raw.nb, raw.nf)?;
        Self::from_parts(raw.model, raw.nb, raw.nf, nodes, points, vectors)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn lifted_fields_are_projectable() {
        for model in [FibrationModel::FlatT2, FibrationModel::FlatT3, FibrationModel::Hopf, FibrationModel::Lens(2)] {
            let nb = if model == FibrationModel::FlatT3 { 16 } else { 12 };
            let y = BaseFieldGrid::random(model, nb, 0.5, &mut rng(1)).unwrap();
            let x = FieldGrid::horizontal_lift_field(&y, 16).unwrap();
            let (ok, back) = x.is_projectable(1e-9);
            assert!(ok, "{model}");
            assert!(back.unwrap().sup_distance(&y).unwrap() < 1e-9);
            assert!(x.vertical_part().sup_norm() < 1e-12);
        }
    }

    #[test]
    fn vertical_fields_project_to_zero() {
        let model = FibrationModel::Hopf;
        let x = FieldGrid::from_fn(model, 10, 12, |p| {
            let e = model.vertical_unit(p);
            let s = 1.0 + p.0[2];
            e.map(|c| c * s)
        })
        .unwrap();
        let (ok, y) = x.is_projectable(1e-12);
        assert!(ok);
        assert!(y.unwrap().sup_norm() < 1e-12);
        assert!(x.horizontal_center().sup_norm() < 1e-12);
    }

    #[test]
    fn y_dependent_horizontal_field_is_not_projectable() {
        let x = FieldGrid::from_fn(FibrationModel::FlatT2, 16, 16, |p| {
            [0.3 * (2.0 * PI * p.0[1]).cos() + 0.1, 0.0, 0.0, 0.0]
        })
        .unwrap();
        assert!(!x.is_projectable(1e-6).0);
    }

    #[test]
    fn centers_of_flat_fields() {
        let c = FieldGrid::from_fn(FibrationModel::FlatT2, 8, 16, |_| [0.7, 0.0, 0.0, 0.0]).unwrap();
        assert!(c.horizontal_center().vectors.iter().all(|v| (v[0] - 0.7).abs() < 1e-15));
        let s = FieldGrid::from_fn(FibrationModel::FlatT2, 8, 16, |p| [(2.0 * PI * p.0[1]).sin(), 0.0, 0.0, 0.0])
            .unwrap();
        assert!(s.horizontal_center().sup_norm() < 1e-10);
        // purely fair: r' kills it
        assert!(s.horizontal_average().sup_norm() < 1e-10);
    }

    #[test]
    fn averaging_fixes_projectable_fields() {
        let y = BaseFieldGrid::random(FibrationModel::Hopf, 20, 0.4, &mut rng(2)).unwrap();
        let basic = FieldGrid::horizontal_lift_field(&y, 16).unwrap();
        let vert = FieldGrid::from_fn(FibrationModel::Hopf, 20, 16, |p| {
            FibrationModel::Hopf.vertical_unit(p).map(|c| c * p.0[0])
        })
        .unwrap();
        let x = basic.add(&vert).unwrap();
        assert!(x.horizontal_average().sup_distance(&x).unwrap() < 1e-12);
    }

    #[test]
    fn averaging_is_idempotent_and_linear() {
        for model in [FibrationModel::FlatT2, FibrationModel::Hopf, FibrationModel::Lens(3)] {
            let x = FieldGrid::sample(model, 16, 16, &RandomField::new(model, 1.0, &mut rng(3))).unwrap();
            let z = FieldGrid::sample(model, 16, 16, &RandomField::new(model, 1.0, &mut rng(4))).unwrap();
            let r = x.horizontal_average();
            assert!(r.horizontal_average().sup_distance(&r).unwrap() < 1e-12);
            let combo = x.scale(2.0).add(&z.scale(-0.5)).unwrap().horizontal_average();
            let separate = r.scale(2.0).add(&z.horizontal_average().scale(-0.5)).unwrap();
            assert!(combo.sup_distance(&separate).unwrap() < 1e-12);
        }
    }

    #[test]
    fn vertical_and_basic_are_orthogonal() {
        let model = FibrationModel::Hopf;
        let x = FieldGrid::sample(model, 16, 16, &RandomField::new(model, 1.0, &mut rng(5))).unwrap();
        let v = x.vertical_part();
        let h = x.horizontal_part();
        assert!(v.l2_inner(&h).unwrap().abs() < 1e-12);
        assert_eq!(x.l2_inner(&x.scale(0.0)).unwrap(), 0.0);
    }

    #[test]
    fn splitting_is_orthogonal() {
        let model = FibrationModel::FlatT2;
        let x = FieldGrid::sample(model, 64, 64, &RandomField::new(model, 1.0, &mut rng(6))).unwrap();
        let report = x.split_report();
        assert!(report.normalized_cross.abs() < 1e-8);
        assert!(report.fair_vertical_sup < 1e-10);
        assert!(report.fair_center_sup < 1e-10);
    }

    #[test]
    fn bracket_of_projectable_fields_is_projectable() {
        let model = FibrationModel::FlatT2;
        let n = 128;
        let x = FieldGrid::from_fn(model, n, n, |p| {
            [0.2 * (2.0 * PI * p.0[0]).sin(), 0.3 * (2.0 * PI * (p.0[0] + p.0[1])).cos(), 0.0, 0.0]
        })
        .unwrap();
        let y = FieldGrid::from_fn(model, n, n, |p| {
            [0.1 * (2.0 * PI * p.0[0]).cos(), 0.2 * (4.0 * PI * p.0[1]).sin(), 0.0, 0.0]
        })
        .unwrap();
        assert!(x.is_projectable(1e-12).0 && y.is_projectable(1e-12).0);
        let b = x.bracket(&y).unwrap();
        assert!(b.is_projectable(1e-4).0);
        // a non-projectable partner breaks it
        let z = FieldGrid::from_fn(model, n, n, |p| [0.2 * (2.0 * PI * p.0[1]).sin(), 0.0, 0.0, 0.0]).unwrap();
        assert!(!x.bracket(&z).unwrap().is_projectable(1e-4).0);
    }

    #[test]
    fn mismatched_grids() {
        let a = FieldGrid::zero(FibrationModel::FlatT2, 8, 8).unwrap();
        let b = FieldGrid::zero(FibrationModel::FlatT2, 8, 16).unwrap();
        assert!(matches!(a.l2_inner(&b), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn json_round_trip() {
        let model = FibrationModel::Hopf;
        let x = FieldGrid::sample(model, 6, 8, &RandomField::new(model, 1.0, &mut rng(7))).unwrap();
        let back = FieldGrid::from_json(&x.to_json()).unwrap();
        assert!(back.sup_distance(&x).unwrap() < 1e-15);
        let mut raw = x.to_json();
        raw["vectors"][0] = serde_json::json!([1.0, 0.0, 0.0, 0.0]);
        assert!(FieldGrid::from_json(&raw).is_err());
    }

    #[test]
    fn fibonacci_nodes_are_unit() {
        for x in base_nodes(FibrationModel::Hopf, 64).unwrap() {
            assert!((crate::quat::norm3(x.0) - 1.0).abs() < 1e-14);
        }
        assert!(base_nodes(FibrationModel::FlatT3, 10).is_err());
    }
}
