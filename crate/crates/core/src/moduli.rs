//! Fiberings as families of sampled fiber shapes: Karcher centers of their
//! projections, normal graphs over model fibers, the straightening retraction
//! and its iterative refinement, slopes on flat tori and membership in the
//! core of rigid fiberings.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circle_diffeo::{signed_increment, winding_number, Angle};
use crate::error::{Error, Result};
use crate::fields::{base_nodes, FieldGrid, VectorField};
use crate::geometry::{sphere_frame, BasePoint, FibrationModel, TotalPoint};
use crate::quat::{add3, cross, dot3, norm3, scale3, sub3, Quat};

/// Step size at which the center-of-mass iteration stops.
pub const KARCHER_TOL: f64 = 1e-12;
pub const KARCHER_MAX_ITER: usize = 200;
/// Residual at which [`refine`] stops.
pub const REFINE_TOL: f64 = 1e-10;
/// Default resolution of [`brute_center`].
pub const BRUTE_GRID: usize = 400;
/// Default tolerance of [`core_membership`].
pub const CORE_TOL: f64 = 1e-8;

/// Radius of the convex ball that the projection of a shape must fit in.
pub fn convex_guard(model: FibrationModel) -> f64 {
    if model.is_flat() {
        0.25
    } else {
        0.45 * PI
    }
}

/// Largest distance from a sample to the model fiber accepted by
/// [`normal_graph`].
pub fn tube_guard(model: FibrationModel) -> f64 {
    if model.is_flat() {
        0.25
    } else {
        PI / 4.0
    }
}

/// Probability measure on the samples of a fiber shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CenterMeasure {
    /// Normalized arclength of the sampled curve.
    Arclength,
    /// The measure carried over from the model fiber: equal weight per sample.
    #[default]
    FiberInduced,
}

impl std::str::FromStr for CenterMeasure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "arclength" => Ok(CenterMeasure::Arclength),
            "fiber-induced" | "fiber" => Ok(CenterMeasure::FiberInduced),
            other => Err(Error::InvalidInput(format!("unknown measure '{other}'"))),
        }
    }
}

/// Sample weights of a closed sampled curve.
pub fn sample_weights(model: FibrationModel, samples: &[TotalPoint], measure: CenterMeasure) -> Vec<f64> {
    let m = samples.len();
    match measure {
        CenterMeasure::FiberInduced => vec![1.0 / m as f64; m],
        CenterMeasure::Arclength => {
            let seg: Vec<f64> = (0..m).map(|k| model.distance(samples[k], samples[(k + 1) % m])).collect();
            let total: f64 = seg.iter().sum();
            if total == 0.0 {
                return vec![1.0 / m as f64; m];
            }
            (0..m).map(|k| 0.5 * (seg[k] + seg[(k + m - 1) % m]) / total).collect()
        }
    }
}

// Weighted extrinsic mean, used to seed the iteration and the brute-force grid.
fn initial_guess(model: FibrationModel, ys: &[BasePoint], w: &[f64]) -> BasePoint {
    if model.is_flat() {
        let y0 = ys[0];
        let v = ys
            .iter()
            .zip(w)
            .fold([0.0; 3], |acc, (y, wk)| add3(acc, scale3(model.base_log(y0, *y), *wk)));
        return model.base_geodesic(y0, v, 1.0).expect("flat geodesics are total");
    }
    let s = ys.iter().zip(w).fold([0.0; 3], |acc, (y, wk)| add3(acc, scale3(y.0, *wk)));
    let n = norm3(s);
    if n < 1e-12 {
        ys[0]
    } else {
        BasePoint(scale3(s, 1.0 / n))
    }
}

fn ball_radius(model: FibrationModel, x: BasePoint, ys: &[BasePoint]) -> f64 {
    ys.iter().map(|y| model.base_angle(x, *y)).fold(0.0, f64::max)
}

fn check_ball(model: FibrationModel, x: BasePoint, ys: &[BasePoint]) -> Result<f64> {
    let radius = ball_radius(model, x, ys);
    let guard = convex_guard(model);
    if radius >= guard {
        return Err(Error::OutsideConvexBall { radius, guard });
    }
    Ok(radius)
}

/// Riemannian center of mass of weighted base points by the fixed-point
/// iteration `x <- exp_x(sum w_k log_x y_k)`.
pub fn karcher_mean(model: FibrationModel, ys: &[BasePoint], w: &[f64]) -> Result<BasePoint> {
    if ys.is_empty() || ys.len() != w.len() {
        return Err(Error::InvalidInput("karcher mean needs matching nonempty points and weights".into()));
    }
    let mut x = initial_guess(model, ys, w);
    check_ball(model, x, ys)?;
    let mut step = f64::INFINITY;
    for _ in 0..KARCHER_MAX_ITER {
        let v = ys
            .iter()
            .zip(w)
            .fold([0.0; 3], |acc, (y, wk)| add3(acc, scale3(model.base_log(x, *y), *wk)));
        step = model.base_norm(v);
        x = model.base_geodesic(x, v, 1.0)?;
        if step < KARCHER_TOL {
            check_ball(model, x, ys)?;
            return Ok(x);
        }
    }
    Err(Error::Nonconvergence {
        iterations: KARCHER_MAX_ITER,
        last_step: step,
    })
}

/// Center of mass of the projection of a fiber shape.
pub fn karcher_center(model: FibrationModel, samples: &[TotalPoint], measure: CenterMeasure) -> Result<BasePoint> {
    let ys: Vec<BasePoint> = samples.iter().map(|p| model.project(*p)).collect();
    karcher_mean(model, &ys, &sample_weights(model, samples, measure))
}

/// Grid minimizer of `P(x) = 1/2 sum w_k d(x, y_k)^2`.
#[derive(Debug, Clone, Copy)]
pub struct BruteCenter {
    pub point: BasePoint,
    /// Spacing of the search grid, in geodesic angle (sphere) or flat units.
    pub cell: f64,
    guess: BasePoint,
}

impl BruteCenter {
    /// Largest coordinate offset between `x` and the grid minimizer, in
    /// units of the grid spacing, measured in the exponential chart used for
    /// the search.
    pub fn cell_offset(&self, model: FibrationModel, x: BasePoint) -> f64 {
        if self.cell == 0.0 {
            return if model.base_angle(x, self.point) == 0.0 { 0.0 } else { f64::INFINITY };
        }
        let a = model.base_log(self.guess, x);
        let b = model.base_log(self.guess, self.point);
        let d = sub3(a, b);
        let comps = if model.is_flat() {
            [d[0].abs(), d[1].abs()]
        } else {
            let (e1, e2) = sphere_frame(self.guess);
            [dot3(d, e1).abs(), dot3(d, e2).abs()]
        };
        comps[0].max(comps[1]) / self.cell
    }
}

/// Brute-force minimizer of the center-of-mass potential over a
/// `resolution x resolution` grid (a line on the circle base) in exponential
/// coordinates around the extrinsic mean, covering the ball that contains all
/// projected samples.
pub fn brute_center(
    model: FibrationModel,
    samples: &[TotalPoint],
    measure: CenterMeasure,
    resolution: usize,
) -> Result<BruteCenter> {
    if resolution < 2 {
        return Err(Error::InvalidInput("brute-force grid needs at least 2 nodes per axis".into()));
    }
    let ys: Vec<BasePoint> = samples.iter().map(|p| model.project(*p)).collect();
    let w = sample_weights(model, samples, measure);
    let guess = initial_guess(model, &ys, &w);
    let radius = check_ball(model, guess, &ys)?;
    if radius == 0.0 {
        return Ok(BruteCenter {
            point: guess,
            cell: 0.0,
            guess,
        });
    }
    let cell = 2.0 * radius / (resolution - 1) as f64;
    let coord = |i: usize| -radius + cell * i as f64;
    let (e1, e2) = if model.is_flat() {
        ([1.0, 0.0, 0.0], [0.0, 1.0, 0.0])
    } else {
        sphere_frame(guess)
    };
    let rows = if model == FibrationModel::FlatT2 { 1 } else { resolution };
    let node = |i: usize, j: usize| {
        let v = if rows == 1 {
            scale3(e1, coord(i))
        } else {
            add3(scale3(e1, coord(i)), scale3(e2, coord(j)))
        };
        model.base_geodesic(guess, v, 1.0)
    };
    let flat = model.is_flat();
    let potential = |x: BasePoint| -> f64 {
        ys.iter()
            .zip(&w)
            .map(|(y, wk)| {
                // half the great-circle angle on the radius-1/2 base sphere
                let d = if flat {
                    model.base_distance(x, *y)
                } else {
                    0.5 * norm3(cross(x.0, y.0)).atan2(dot3(x.0, y.0))
                };
                wk * d * d
            })
            .sum::<f64>()
            * 0.5
    };
    let best = (0..rows)
        .into_par_iter()
        .map(|j| {
            let mut best = (f64::INFINITY, usize::MAX, usize::MAX);
            for i in 0..resolution {
                let x = node(i, j).expect("grid inside the injectivity guard");
                let p = potential(x);
                if p < best.0 {
                    best = (p, j, i);
                }
            }
            best
        })
        .reduce(
            || (f64::INFINITY, usize::MAX, usize::MAX),
            |a, b| if b.0 < a.0 || (b.0 == a.0 && (b.1, b.2) < (a.1, a.2)) { b } else { a },
        );
    Ok(BruteCenter {
        point: node(best.2, best.1)?,
        cell,
        guess,
    })
}

/// Nearest point of the model fiber over `x` to `p`: its fiber parameter and
/// the distance.
pub fn nearest_on_fiber(model: FibrationModel, p: TotalPoint, x: BasePoint) -> (f64, f64) {
    if model.is_flat() {
        let theta = model.fiber_param(p);
        return (theta, model.base_distance(model.project(p), x));
    }
    // the preimage of x in S3 is the great circle s exp(i phi)
    let z = FibrationModel::section(x).conj() * p.quat();
    let phi = z.0[1].atan2(z.0[0]);
    let r = (z.0[0] * z.0[0] + z.0[1] * z.0[1]).sqrt().min(1.0);
    let theta = crate::circle_diffeo::wrap_unit(phi * model.order() as f64 / (2.0 * PI));
    (theta, r.acos())
}

/// Fiber parameters over `x` matched to each sample by nearest-point
/// projection. The matching must wind once monotonically around the fiber.
pub fn normal_graph(model: FibrationModel, samples: &[TotalPoint], x: BasePoint) -> Result<Vec<f64>> {
    let guard = tube_guard(model);
    let mut params = Vec::with_capacity(samples.len());
    for p in samples {
        let (theta, d) = nearest_on_fiber(model, *p, x);
        if d >= guard {
            return Err(Error::TubeRadiusExceeded { distance: d, guard });
        }
        params.push(theta);
    }
    let m = params.len();
    let steps: Vec<f64> = (0..m).map(|k| signed_increment(params[k], params[(k + 1) % m])).collect();
    let forward = steps.iter().all(|&s| s > 0.0);
    let backward = steps.iter().all(|&s| s < 0.0);
    let total: f64 = steps.iter().sum();
    if !(forward || backward) || (total.abs() - 1.0).abs() > 1e-6 {
        return Err(Error::NonInjectiveProjection);
    }
    Ok(params)
}

/// A family of sampled closed fiber shapes indexed by base labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Fibering {
    pub model: FibrationModel,
    pub labels: Vec<BasePoint>,
    pub fibers: Vec<Vec<TotalPoint>>,
}

#[derive(Serialize, Deserialize)]
struct FiberingJson {
    model: FibrationModel,
    nb: usize,
    fibers: Vec<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<Vec<f64>>>,
}

/// Outcome of [`straighten`].
#[derive(Debug, Clone, Serialize)]
pub struct StraightenReport {
    /// Per fiber, the largest distance from a sample to its matched point.
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    /// Smallest base distance between two straightened labels.
    pub min_label_separation: f64,
}

impl Fibering {
    /// The model fibering sampled over the standard base nodes, with `m`
    /// equally spaced samples per fiber.
    pub fn model_fibering(model: FibrationModel, nb: usize, m: usize) -> Result<Self> {
        if m < 3 {
            return Err(Error::InvalidInput("fibers need at least 3 samples".into()));
        }
        let labels = base_nodes(model, nb)?;
        let fibers = labels
            .iter()
            .map(|&x| (0..m).map(|k| model.fiber_point(x, k as f64 / m as f64)).collect())
            .collect();
        Ok(Fibering { model, labels, fibers })
    }

    pub fn len(&self) -> usize {
        self.fibers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fibers.is_empty()
    }

    /// Applies a map of the total space to every sample and a map of the base
    /// to every label.
    pub fn map(&self, f: impl Fn(TotalPoint) -> TotalPoint + Sync, g: impl Fn(BasePoint) -> BasePoint) -> Fibering {
        Fibering {
            model: self.model,
            labels: self.labels.iter().map(|&x| g(x)).collect(),
            fibers: self
                .fibers
                .par_iter()
                .map(|fiber| fiber.iter().map(|&p| self.model.canonicalize(f(p))).collect())
                .collect(),
        }
    }

    /// Largest sample-wise distance to another fibering with the same layout.
    pub fn sup_distance(&self, other: &Fibering) -> Result<f64> {
        if self.model != other.model
            || self.len() != other.len()
            || self.fibers.iter().zip(&other.fibers).any(|(a, b)| a.len() != b.len())
        {
            return Err(Error::GridMismatch("fiberings have different layouts".into()));
        }
        Ok(self
            .fibers
            .par_iter()
            .zip(&other.fibers)
            .map(|(a, b)| a.iter().zip(b).map(|(p, q)| self.model.distance(*p, *q)).fold(0.0, f64::max))
            .reduce(|| 0.0, f64::max))
    }

    /// Half the smallest base distance between labels: the separation that
    /// perturbed fibers must keep.
    pub fn disjointness_threshold(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                best = best.min(self.model.base_distance(self.labels[i], self.labels[j]));
            }
        }
        0.5 * best
    }

    /// Smallest distance between samples of different fibers.
    pub fn min_pair_distance(&self) -> f64 {
        let n = self.len();
        (0..n)
            .into_par_iter()
            .map(|i| {
                let mut best = f64::INFINITY;
                for j in i + 1..n {
                    for p in &self.fibers[i] {
                        for q in &self.fibers[j] {
                            best = best.min(self.model.distance(*p, *q));
                        }
                    }
                }
                best
            })
            .reduce(|| f64::INFINITY, f64::min)
    }

    fn check_disjoint(&self, threshold: f64) -> Result<()> {
        let min_distance = self.min_pair_distance();
        if min_distance <= threshold {
            return Err(Error::DisjointnessLost {
                min_distance,
                threshold,
                step: 0,
            });
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(FiberingJson {
            model: self.model,
            nb: self.len(),
            fibers: self
                .fibers
                .iter()
                .map(|f| f.iter().map(|p| self.model.point_to_vec(*p)).collect())
                .collect(),
            labels: Some(self.labels.iter().map(|x| self.model.base_to_vec(*x)).collect()),
        })
        .expect("plain record")
    }

    /// Labels default to the projection of each fiber's first sample.
    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let raw: FiberingJson =
            serde_json::from_value(value.clone()).map_err(|e| Error::InvalidInput(e.to_string()))?;
        if raw.fibers.len() != raw.nb {
            return Err(Error::GridMismatch(format!("nb = {} but {} fibers given", raw.nb, raw.fibers.len())));
        }
        let model = raw.model;
        let fibers = raw
            .fibers
            .iter()
            .map(|f| {
                if f.len() < 3 {
                    return Err(Error::InvalidInput("fibers need at least 3 samples".into()));
                }
                f.iter().map(|c| model.point_from_slice(c)).collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let labels = match raw.labels {
            Some(labels) => {
                if labels.len() != fibers.len() {
                    return Err(Error::GridMismatch("one label per fiber expected".into()));
                }
                labels.iter().map(|c| model.base_from_slice(c)).collect::<Result<Vec<_>>>()?
            }
            None => fibers.iter().map(|f| model.project(f[0])).collect(),
        };
        Ok(Fibering { model, labels, fibers })
    }
}

/// Moves every sample along the flow of `eps * field` for unit time (RK4,
/// 16 steps) and re-checks that the fibers stay apart.
pub fn perturb(f: &Fibering, field: &dyn VectorField, eps: f64) -> Result<Fibering> {
    if eps == 0.0 {
        return Ok(f.clone());
    }
    let model = f.model;
    let steps = 16;
    let h = 1.0 / steps as f64;
    let advance = |p: TotalPoint, v: [f64; 4], s: f64| -> TotalPoint {
        let raw = TotalPoint(std::array::from_fn(|k| p.0[k] + s * eps * v[k]));
        if model.is_flat() {
            raw
        } else {
            TotalPoint(raw.quat().normalize().0)
        }
    };
    let flow = |p0: TotalPoint| {
        let mut p = p0;
        for _ in 0..steps {
            let k1 = field.eval(model, p);
            let k2 = field.eval(model, advance(p, k1, 0.5 * h));
            let k3 = field.eval(model, advance(p, k2, 0.5 * h));
            let k4 = field.eval(model, advance(p, k3, h));
            let v: [f64; 4] = std::array::from_fn(|k| (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]) / 6.0);
            p = advance(p, v, h);
        }
        p
    };
    let out = f.map(flow, |x| x);
    out.check_disjoint(f.disjointness_threshold())?;
    Ok(out)
}

/// Pushes every sample by the adapted exponential of `eps` times the field
/// sampled at that sample. The grid nodes must coincide with the samples.
pub fn push_by_exp(f: &Fibering, field: &FieldGrid, eps: f64) -> Result<Fibering> {
    let model = f.model;
    if field.model != model || field.nb != f.len() || f.fibers.iter().any(|fb| fb.len() != field.nf) {
        return Err(Error::GridMismatch("field grid does not match the fibering layout".into()));
    }
    let mismatch = f
        .fibers
        .iter()
        .flatten()
        .zip(&field.points)
        .map(|(p, q)| model.distance(*p, *q))
        .fold(0.0, f64::max);
    if mismatch > 1e-9 {
        return Err(Error::GridMismatch(format!("field nodes are {mismatch:e} away from the samples")));
    }
    let fibers = f
        .fibers
        .par_iter()
        .enumerate()
        .map(|(b, fiber)| {
            fiber
                .iter()
                .enumerate()
                .map(|(k, &p)| {
                    let v = field.vectors[b * field.nf + k].map(|c| c * eps);
                    model.adapted_exp(p, v)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let out = Fibering {
        model,
        labels: f.labels.clone(),
        fibers,
    };
    out.check_disjoint(f.disjointness_threshold())?;
    Ok(out)
}

fn check_collisions(model: FibrationModel, labels: &[BasePoint]) -> Result<f64> {
    let mut best = f64::INFINITY;
    for i in 0..labels.len() {
        for j in i + 1..labels.len() {
            let d = model.base_distance(labels[i], labels[j]);
            if d < 1e-9 {
                return Err(Error::BaseCollision(i, j));
            }
            best = best.min(d);
        }
    }
    Ok(best)
}

/// Replaces every fiber by the model fiber over its center of mass, matched
/// sample by sample through the normal graph.
pub fn straighten(f: &Fibering, measure: CenterMeasure) -> Result<(Fibering, StraightenReport)> {
    let model = f.model;
    let straight = f
        .fibers
        .par_iter()
        .map(|fiber| {
            let c = karcher_center(model, fiber, measure)?;
            let params = normal_graph(model, fiber, c)?;
            let points: Vec<TotalPoint> = params.iter().map(|&t| model.fiber_point(c, t)).collect();
            let residual = fiber.iter().zip(&points).map(|(p, q)| model.distance(*p, *q)).fold(0.0, f64::max);
            Ok((c, points, residual))
        })
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<BasePoint> = straight.iter().map(|s| s.0).collect();
    let min_label_separation = check_collisions(model, &labels)?;
    let residuals: Vec<f64> = straight.iter().map(|s| s.2).collect();
    let report = StraightenReport {
        max_residual: residuals.iter().copied().fold(0.0, f64::max),
        residuals,
        min_label_separation,
    };
    Ok((
        Fibering {
            model,
            labels,
            fibers: straight.into_iter().map(|s| s.1).collect(),
        },
        report,
    ))
}

/// Result of [`refine`].
#[derive(Debug, Clone)]
pub struct Refinement {
    pub fibering: Fibering,
    /// Residual after each pass.
    pub residuals: Vec<f64>,
}

/// Iterative straightening. Each fiber carries a center `c` (initially its
/// label) and matched points on the model fiber over `c`. A pass moves `c`
/// by the averaged base displacement of the samples and carries the normal
/// graph over the old center to the new one by horizontal transport. The pass
/// residual is the larger of the base displacement and the distance between
/// the carried points and the normal graph over the new center.
pub fn refine(f: &Fibering, passes: usize, measure: CenterMeasure) -> Result<Refinement> {
    let model = f.model;
    let weights: Vec<Vec<f64>> = f.fibers.iter().map(|fb| sample_weights(model, fb, measure)).collect();
    let mut centers = f.labels.clone();
    let mut points: Vec<Vec<TotalPoint>> = f
        .fibers
        .par_iter()
        .zip(&centers)
        .map(|(fb, &c)| Ok(normal_graph(model, fb, c)?.iter().map(|&t| model.fiber_point(c, t)).collect()))
        .collect::<Result<Vec<_>>>()?;
    let mut residuals = Vec::new();
    let mut rises = 0;
    for _ in 0..passes {
        let updated = f
            .fibers
            .par_iter()
            .zip(&weights)
            .zip(&centers)
            .map(|((fb, w), &c)| {
                let v = fb
                    .iter()
                    .zip(w)
                    .fold([0.0; 3], |acc, (p, wk)| add3(acc, scale3(model.base_log(c, model.project(*p)), *wk)));
                let shift = model.base_norm(v);
                let c_new = model.base_geodesic(c, v, 1.0)?;
                let graph_old: Vec<TotalPoint> =
                    normal_graph(model, fb, c)?.iter().map(|&t| model.fiber_point(c, t)).collect();
                let carried = graph_old
                    .iter()
                    .map(|&a| model.horizontal_transport(a, c_new))
                    .collect::<Result<Vec<_>>>()?;
                let graph_new: Vec<TotalPoint> =
                    normal_graph(model, fb, c_new)?.iter().map(|&t| model.fiber_point(c_new, t)).collect();
                let mismatch = carried
                    .iter()
                    .zip(&graph_new)
                    .map(|(a, b)| model.distance(*a, *b))
                    .fold(0.0, f64::max);
                Ok((c_new, carried, shift.max(mismatch)))
            })
            .collect::<Result<Vec<_>>>()?;
        let residual = updated.iter().map(|u| u.2).fold(0.0, f64::max);
        centers = updated.iter().map(|u| u.0).collect();
        points = updated.into_iter().map(|u| u.1).collect();
        if let Some(&last) = residuals.last() {
            if residual > last {
                rises += 1;
            } else {
                rises = 0;
            }
        }
        residuals.push(residual);
        if rises >= 2 {
            return Err(Error::DivergingResiduals(residuals));
        }
        if residual < REFINE_TOL {
            break;
        }
    }
    check_collisions(model, &centers)?;
    Ok(Refinement {
        fibering: Fibering {
            model,
            labels: centers,
            fibers: points,
        },
        residuals,
    })
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Homology class of a closed sampled curve in a flat torus, as a primitive
/// integer vector. Unless `oriented`, the sign is normalized so that the first
/// nonzero entry is positive.
pub fn slope(model: FibrationModel, samples: &[TotalPoint], oriented: bool) -> Result<Vec<i64>> {
    if !model.is_flat() {
        return Err(Error::UnsupportedBase(format!("slopes are defined on flat tori, not {model}")));
    }
    if samples.is_empty() {
        return Err(Error::InvalidInput("empty curve".into()));
    }
    let dims = model.point_len();
    let mut w = (0..dims)
        .map(|d| {
            let mut path: Vec<Angle> = samples.iter().map(|p| Angle::new(p.0[d])).collect();
            path.push(path[0]);
            winding_number(&path)
        })
        .collect::<Result<Vec<i64>>>()?;
    if w.iter().copied().fold(0, gcd) != 1 {
        return Err(Error::NonPrimitive(w));
    }
    if !oriented && w.iter().find(|&&c| c != 0).is_some_and(|&c| c < 0) {
        w.iter_mut().for_each(|c| *c = -*c);
    }
    Ok(w)
}

/// Whether a fibering is one of the rigid model fiberings.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Core {
    /// Straight fibers of a common primitive slope on a flat torus.
    Slope { slope: Vec<i64> },
    /// Fibers are the orbits `q exp(theta n)` (`chirality = 1`) or
    /// `exp(theta n) q` (`chirality = -1`) of one circle subgroup of `S3`.
    GreatCircles { direction: [f64; 3], chirality: i8 },
    NotInCore,
}

fn lifted(model: FibrationModel, fiber: &[TotalPoint]) -> Vec<[f64; 3]> {
    let dims = model.point_len();
    let mut out = vec![[fiber[0].0[0], fiber[0].0[1], fiber[0].0[2]]];
    for k in 1..fiber.len() {
        let prev = out[k - 1];
        out.push(std::array::from_fn(|d| {
            if d < dims {
                prev[d] + signed_increment(fiber[k - 1].0[d], fiber[k].0[d])
            } else {
                0.0
            }
        }));
    }
    out
}

fn flat_core(f: &Fibering, tol: f64) -> Core {
    let mut common: Option<Vec<i64>> = None;
    for fiber in &f.fibers {
        let Ok(s) = slope(f.model, fiber, false) else {
            return Core::NotInCore;
        };
        if common.as_ref().is_some_and(|c| *c != s) {
            return Core::NotInCore;
        }
        let dir = [s[0] as f64, s[1] as f64, s.get(2).copied().unwrap_or(0) as f64];
        let unit = scale3(dir, 1.0 / norm3(dir));
        let pts = lifted(f.model, fiber);
        let off = pts
            .iter()
            .map(|p| {
                let d = sub3(*p, pts[0]);
                norm3(sub3(d, scale3(unit, dot3(d, unit))))
            })
            .fold(0.0, f64::max);
        if off > tol {
            return Core::NotInCore;
        }
        common = Some(s);
    }
    match common {
        Some(slope) => Core::Slope { slope },
        None => Core::NotInCore,
    }
}

fn sphere_core(f: &Fibering, tol: f64) -> Core {
    let model = f.model;
    let e = model.order();
    let align = |p: Quat, q: Quat| {
        (0..e)
            .map(|k| q * Quat::exp_i(2.0 * PI * k as f64 / e as f64))
            .min_by(|a, b| (*a - p).norm().total_cmp(&(*b - p).norm()))
            .expect("nonempty deck group")
    };
    let axes = |right: bool| -> Vec<[f64; 3]> {
        let mut out = Vec::new();
        for fiber in &f.fibers {
            let m = fiber.len();
            for k in 0..m {
                let p = fiber[k].quat();
                let q = align(p, fiber[(k + 1) % m].quat());
                let r = if right { p.conj() * q } else { q * p.conj() };
                let v = r.vector();
                let n = norm3(v);
                out.push(if n > 0.0 { scale3(v, 1.0 / n) } else { [0.0; 3] });
            }
        }
        out
    };
    for (right, chirality) in [(true, 1i8), (false, -1i8)] {
        let a = axes(right);
        let mean = a.iter().fold([0.0; 3], |acc, v| add3(acc, *v));
        let n = norm3(mean);
        if n == 0.0 {
            continue;
        }
        let dir = scale3(mean, 1.0 / n);
        if a.iter().all(|v| norm3(sub3(*v, dir)) <= tol) {
            return Core::GreatCircles {
                direction: dir,
                chirality,
            };
        }
    }
    Core::NotInCore
}

/// Recognizes the rigid fiberings: straight lines of one slope on flat tori,
/// cosets of one great-circle subgroup on the sphere models.
pub fn core_membership(f: &Fibering, tol: f64) -> Core {
    if f.is_empty() {
        return Core::NotInCore;
    }
    if f.model.is_flat() {
        flat_core(f, tol)
    } else {
        sphere_core(f, tol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::RandomField;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn single_point_shape() {
        let model = FibrationModel::Hopf;
        let x = BasePoint([0.0, 0.6, 0.8]);
        let fiber: Vec<TotalPoint> = (0..16).map(|k| model.fiber_point(x, k as f64 / 16.0)).collect();
        let c = karcher_center(model, &fiber, CenterMeasure::Arclength).unwrap();
        assert!(model.base_angle(c, x) < 1e-12);
        let b = brute_center(model, &fiber, CenterMeasure::Arclength, 50).unwrap();
        assert!(model.base_angle(b.point, x) < 1e-7);
    }

    #[test]
    fn symmetric_pair_gives_midpoint() {
        let model = FibrationModel::Hopf;
        let ys = [BasePoint([1.0, 0.0, 0.0]), BasePoint([0.0, 1.0, 0.0])];
        let c = karcher_mean(model, &ys, &[0.5, 0.5]).unwrap();
        let mid = [0.5f64.sqrt(), 0.5f64.sqrt(), 0.0];
        assert!(norm3(sub3(c.0, mid)) < 1e-12);
        let flat = FibrationModel::FlatT2;
        let ys = [BasePoint([0.95, 0.0, 0.0]), BasePoint([0.15, 0.0, 0.0])];
        let c = karcher_mean(flat, &ys, &[0.5, 0.5]).unwrap();
        assert!((c.0[0] - 0.05).abs() < 1e-12);
    }

    #[test]
    fn spread_out_shapes_are_rejected() {
        let model = FibrationModel::Hopf;
        let ys = [BasePoint([1.0, 0.0, 0.0]), BasePoint([-1.0, 0.0, 0.0]), BasePoint([0.0, 0.0, 1.0])];
        assert!(matches!(
            karcher_mean(model, &ys, &[1.0 / 3.0; 3]),
            Err(Error::OutsideConvexBall { .. })
        ));
        let flat = FibrationModel::FlatT2;
        let ys = [0.0, 0.3, 0.6].map(|x| BasePoint([x, 0.0, 0.0]));
        assert!(karcher_mean(flat, &ys, &[1.0 / 3.0; 3]).is_err());
    }

    #[test]
    fn nearest_point_matches_golden_section() {
        // golden-section search along the model fiber as an independent oracle
        let mut r = rng(1);
        for model in [FibrationModel::Hopf, FibrationModel::Lens(2)] {
            for _ in 0..20 {
                let x = model.random_base_point(&mut r);
                let p = model.fiber_point(x, r.gen_range(0.0..1.0));
                let p = model.adapted_exp(p, model.random_tangent(p, 0.1, &mut r)).unwrap();
                let (theta, d) = nearest_on_fiber(model, p, x);
                let dist = |t: f64| model.distance(p, model.fiber_point(x, t));
                let coarse = (0..256).map(|i| i as f64 / 256.0).min_by(|a, b| dist(*a).total_cmp(&dist(*b))).unwrap();
                let (mut lo, mut hi) = (coarse - 1.0 / 256.0, coarse + 1.0 / 256.0);
                let g = (5f64.sqrt() - 1.0) / 2.0;
                while hi - lo > 1e-12 {
                    let (a, b) = (hi - g * (hi - lo), lo + g * (hi - lo));
                    if dist(a) < dist(b) {
                        hi = b;
                    } else {
                        lo = a;
                    }
                }
                let t = 0.5 * (lo + hi);
                assert!(crate::circle_diffeo::circle_distance(t, theta) < 1e-6);
                assert!((dist(t) - d).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn flat_normal_graph_is_vertical() {
        let model = FibrationModel::FlatT2;
        let x0 = 0.4;
        let fiber: Vec<TotalPoint> = (0..64)
            .map(|k| {
                let t = k as f64 / 64.0;
                TotalPoint([x0 + 0.02 * (2.0 * PI * t).sin(), t, 0.0, 0.0])
            })
            .collect();
        let params = normal_graph(model, &fiber, BasePoint([x0, 0.0, 0.0])).unwrap();
        for (k, t) in params.iter().enumerate() {
            assert!((t - k as f64 / 64.0).abs() < 1e-15);
        }
    }

    #[test]
    fn normal_graph_guards() {
        let model = FibrationModel::FlatT2;
        let far: Vec<TotalPoint> = (0..8).map(|k| TotalPoint([0.5, k as f64 / 8.0, 0.0, 0.0])).collect();
        assert!(matches!(
            normal_graph(model, &far, BasePoint([0.0, 0.0, 0.0])),
            Err(Error::TubeRadiusExceeded { .. })
        ));
        let folded: Vec<TotalPoint> = [0.0, 0.3, 0.2, 0.6, 0.8]
            .iter()
            .map(|&t| TotalPoint([0.0, t, 0.0, 0.0]))
            .collect();
        assert!(matches!(
            normal_graph(model, &folded, BasePoint([0.0, 0.0, 0.0])),
            Err(Error::NonInjectiveProjection)
        ));
    }

    #[test]
    fn model_fiberings_are_fixed() {
        for (model, nb) in [
            (FibrationModel::FlatT2, 16),
            (FibrationModel::FlatT3, 16),
            (FibrationModel::Hopf, 24),
            (FibrationModel::Lens(2), 24),
            (FibrationModel::Lens(3), 24),
        ] {
            let f = Fibering::model_fibering(model, nb, 32).unwrap();
            let (s, report) = straighten(&f, CenterMeasure::Arclength).unwrap();
            assert!(report.max_residual < 1e-12, "{model}: {}", report.max_residual);
            assert!(s.sup_distance(&f).unwrap() < 1e-12);
            let (s2, _) = straighten(&s, CenterMeasure::Arclength).unwrap();
            assert!(s2.sup_distance(&s).unwrap() < 1e-12);
            let r = refine(&f, 3, CenterMeasure::FiberInduced).unwrap();
            assert!(r.fibering.sup_distance(&f).unwrap() < 1e-12);
        }
    }

    #[test]
    fn fair_pushes_are_undone() {
        for (model, nb) in [(FibrationModel::FlatT2, 16), (FibrationModel::Hopf, 16)] {
            let f = Fibering::model_fibering(model, nb, 32).unwrap();
            let x = FieldGrid::sample(model, nb, 32, &RandomField::new(model, 1.0, &mut rng(2))).unwrap();
            let fair = x.fair_part();
            let pushed = push_by_exp(&f, &fair, 0.02).unwrap();
            assert!(pushed.sup_distance(&f).unwrap() > 1e-3);
            let (s, _) = straighten(&pushed, CenterMeasure::FiberInduced).unwrap();
            assert!(s.sup_distance(&f).unwrap() < 1e-6, "{model}");
            let r = refine(&pushed, 1, CenterMeasure::FiberInduced).unwrap();
            assert!(r.fibering.sup_distance(&s).unwrap() < 1e-9);
        }
    }

    #[test]
    fn refinement_contracts() {
        let model = FibrationModel::Hopf;
        let f = Fibering::model_fibering(model, 16, 32).unwrap();
        let x = FieldGrid::sample(model, 16, 32, &RandomField::new(model, 1.0, &mut rng(3))).unwrap();
        let pushed = push_by_exp(&f, &x, 0.05).unwrap();
        let r = refine(&pushed, 4, CenterMeasure::FiberInduced).unwrap();
        assert!(r.residuals.len() >= 2);
        for w in r.residuals.windows(2) {
            assert!(w[1] < 0.8 * w[0] || w[1] < REFINE_TOL, "{:?}", r.residuals);
        }
    }

    #[test]
    fn perturb_zero_and_vertical() {
        let model = FibrationModel::FlatT2;
        let f = Fibering::model_fibering(model, 8, 16).unwrap();
        let field = |p: TotalPoint| [0.0, 0.3 * (2.0 * PI * p.0[0]).cos(), 0.0, 0.0];
        assert_eq!(perturb(&f, &field, 0.0).unwrap(), f);
        let g = perturb(&f, &field, 0.5).unwrap();
        for (a, b) in f.fibers.iter().flatten().zip(g.fibers.iter().flatten()) {
            assert!((a.0[0] - b.0[0]).abs() < 1e-15);
        }
        let squash = |p: TotalPoint| [(2.0 * PI * p.0[0]).sin(), 0.0, 0.0, 0.0];
        assert!(matches!(perturb(&f, &squash, 0.5), Err(Error::DisjointnessLost { .. })));
    }

    #[test]
    fn slopes() {
        let model = FibrationModel::FlatT2;
        let curve = |f: &dyn Fn(f64) -> (f64, f64)| -> Vec<TotalPoint> {
            (0..200)
                .map(|k| {
                    let (x, y) = f(k as f64 / 200.0);
                    model.canonicalize(TotalPoint([x, y, 0.0, 0.0]))
                })
                .collect()
        };
        assert_eq!(slope(model, &curve(&|t| (0.3, t)), false).unwrap(), vec![0, 1]);
        assert_eq!(slope(model, &curve(&|t| (t, 2.0 * t)), false).unwrap(), vec![1, 2]);
        let wiggly = curve(&|t| (t, 2.0 * t + 0.3 * (2.0 * PI * t).sin()));
        assert_eq!(slope(model, &wiggly, false).unwrap(), vec![1, 2]);
        let back = curve(&|t| (-t, -2.0 * t));
        assert_eq!(slope(model, &back, false).unwrap(), vec![1, 2]);
        assert_eq!(slope(model, &back, true).unwrap(), vec![-1, -2]);
        assert!(matches!(
            slope(model, &curve(&|t| (2.0 * t, 2.0 * t)), false),
            Err(Error::NonPrimitive(_))
        ));
        let t3 = FibrationModel::FlatT3;
        let c: Vec<TotalPoint> = (0..300)
            .map(|k| {
                let t = k as f64 / 300.0;
                t3.canonicalize(TotalPoint([t, 2.0 * t, 3.0 * t, 0.0]))
            })
            .collect();
        assert_eq!(slope(t3, &c, false).unwrap(), vec![1, 2, 3]);
    }

    #[test]
    fn core_of_model_fiberings() {
        let f = Fibering::model_fibering(FibrationModel::FlatT2, 8, 32).unwrap();
        assert_eq!(core_membership(&f, CORE_TOL), Core::Slope { slope: vec![0, 1] });
        let f = Fibering::model_fibering(FibrationModel::FlatT3, 9, 32).unwrap();
        assert_eq!(core_membership(&f, CORE_TOL), Core::Slope { slope: vec![0, 0, 1] });
        for model in [FibrationModel::Hopf, FibrationModel::Lens(2)] {
            let f = Fibering::model_fibering(model, 12, 32).unwrap();
            match core_membership(&f, CORE_TOL) {
                Core::GreatCircles { direction, chirality } => {
                    assert_eq!(chirality, 1);
                    assert!(norm3(sub3(direction, [1.0, 0.0, 0.0])) < 1e-12);
                }
                other => panic!("{model}: {other:?}"),
            }
            let x = FieldGrid::sample(model, 12, 32, &RandomField::new(model, 1.0, &mut rng(4))).unwrap();
            let pushed = push_by_exp(&f, &x, 0.05).unwrap();
            assert_eq!(core_membership(&pushed, CORE_TOL), Core::NotInCore);
        }
    }

    #[test]
    fn json_round_trip() {
        let f = Fibering::model_fibering(FibrationModel::Lens(2), 4, 8).unwrap();
        let back = Fibering::from_json(&f.to_json()).unwrap();
        assert!(back.sup_distance(&f).unwrap() < 1e-15);
        let mut raw = f.to_json();
        raw["nb"] = serde_json::json!(5);
        assert!(Fibering::from_json(&raw).is_err());
    }
}
