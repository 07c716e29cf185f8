//! Curve-shortening flow of closed polygons in the flat torus `R^2 / Z^2`,
//! for single curves and for whole fiberings of `T2`.
//!
//! A curve is stored as lifted points in the plane together with its winding
//! vector `w`: the successor of the last point is the first point shifted by
//! `w`. The discrete curvature vector at a vertex is
//! `2 (u_i - u_{i-1}) / (l_{i-1} + l_i)` with `u` the unit edge directions and
//! `l` the edge lengths; it is exact on regular polygons inscribed in circles.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::circle_diffeo::{signed_increment, wrap_unit};
use crate::error::{Error, Result};
use crate::geometry::{FibrationModel, TotalPoint};
use crate::moduli::{core_membership, slope, Core, Fibering, CORE_TOL};

pub const DEFAULT_CFL: f64 = 0.2;
pub const MAX_CFL: f64 = 0.5;
/// Spacing ratio max/min that forces a resample.
pub const SPACING_RATIO: f64 = 4.0;

type V2 = [f64; 2];

fn sub2(a: V2, b: V2) -> V2 {
    [a[0] - b[0], a[1] - b[1]]
}

fn dot2(a: V2, b: V2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn cross2(a: V2, b: V2) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn norm2(a: V2) -> f64 {
    a[0].hypot(a[1])
}

/// A closed polygon in the flat torus.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveState {
    points: Vec<V2>,
    winding: [i64; 2],
}

impl CurveState {
    /// Lifted points, consecutive in the plane; the first is moved into the
    /// unit square.
    pub fn new(mut points: Vec<V2>, winding: [i64; 2]) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::InvalidInput("curves need at least 3 samples".into()));
        }
        if points.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("non-finite curve sample".into()));
        }
        let shift = [points[0][0].floor(), points[0][1].floor()];
        for p in &mut points {
            *p = sub2(*p, shift);
        }
        Ok(CurveState { points, winding })
    }

    /// Lifts samples given modulo 1. Consecutive samples must be closer than
    /// half a period in each coordinate.
    pub fn from_wrapped(samples: &[V2]) -> Result<Self> {
        let m = samples.len();
        if m < 3 {
            return Err(Error::InvalidInput("curves need at least 3 samples".into()));
        }
        let step = |a: V2, b: V2| -> Result<V2> {
            let d = [signed_increment(a[0], b[0]), signed_increment(a[1], b[1])];
            if d.iter().any(|c| c.abs() >= 0.5 - 1e-12) {
                return Err(Error::UndersampledPath(format!("gap {d:?} between consecutive samples")));
            }
            Ok(d)
        };
        let mut points = vec![[wrap_unit(samples[0][0]), wrap_unit(samples[0][1])]];
        for k in 1..m {
            let d = step(samples[k - 1], samples[k])?;
            let prev = points[k - 1];
            points.push([prev[0] + d[0], prev[1] + d[1]]);
        }
        let d = step(samples[m - 1], samples[0])?;
        let total = [points[m - 1][0] + d[0] - points[0][0], points[m - 1][1] + d[1] - points[0][1]];
        Self::new(points, [total[0].round() as i64, total[1].round() as i64])
    }

    /// Samples `f(k/m)` for a lifted parametrization with `f(1) = f(0) + w`.
    pub fn from_fn(m: usize, winding: [i64; 2], f: impl Fn(f64) -> V2) -> Result<Self> {
        Self::new((0..m).map(|k| f(k as f64 / m as f64)).collect(), winding)
    }

    /// The straight closed geodesic of class `w` through `origin`.
    pub fn line(m: usize, winding: [i64; 2], origin: V2) -> Result<Self> {
        let w = [winding[0] as f64, winding[1] as f64];
        Self::from_fn(m, winding, |s| [origin[0] + s * w[0], origin[1] + s * w[1]])
    }

    /// A regular `m`-gon inscribed in the circle of radius `r` about `center`.
    pub fn circle(m: usize, center: V2, r: f64) -> Result<Self> {
        if !(r > 0.0 && r < 0.5) {
            return Err(Error::InvalidInput(format!("circle radius {r} must lie in (0, 1/2)")));
        }
        let tau = 2.0 * std::f64::consts::PI;
        Self::from_fn(m, [0, 0], |s| [center[0] + r * (tau * s).cos(), center[1] + r * (tau * s).sin()])
    }

    pub fn points(&self) -> &[V2] {
        &self.points
    }

    pub fn winding(&self) -> [i64; 2] {
        self.winding
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn next(&self, k: usize) -> V2 {
        let m = self.points.len();
        if k + 1 < m {
            self.points[k + 1]
        } else {
            [self.points[0][0] + self.winding[0] as f64, self.points[0][1] + self.winding[1] as f64]
        }
    }

    /// Edge vectors `p_{k+1} - p_k`, closing edge last.
    pub fn edges(&self) -> Vec<V2> {
        (0..self.len()).map(|k| sub2(self.next(k), self.points[k])).collect()
    }

    pub fn spacings(&self) -> Vec<f64> {
        self.edges().into_iter().map(norm2).collect()
    }

    pub fn length(&self) -> f64 {
        self.spacings().iter().sum()
    }

    pub fn spacing_ratio(&self) -> f64 {
        let s = self.spacings();
        let (lo, hi) = s.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &x| (lo.min(x), hi.max(x)));
        hi / lo
    }

    /// Samples reduced modulo 1, as points of the flat `T2` model.
    pub fn wrapped(&self) -> Vec<TotalPoint> {
        self.points
            .iter()
            .map(|p| TotalPoint([wrap_unit(p[0]), wrap_unit(p[1]), 0.0, 0.0]))
            .collect()
    }

    /// Discrete curvature vectors at the vertices.
    pub fn curvature_vectors(&self) -> Result<Vec<V2>> {
        let mut k = Kernel::default();
        k.measure(self)?;
        Ok(k.kvec)
    }

    /// Signed curvature, positive where the curve turns left.
    pub fn curvature(&self) -> Result<Vec<f64>> {
        let m = self.len();
        let edges = self.edges();
        let kv = self.curvature_vectors()?;
        Ok((0..m)
            .map(|i| {
                let turn = cross2(edges[(i + m - 1) % m], edges[i]);
                norm2(kv[i]).copysign(turn)
            })
            .collect())
    }

    /// Resamples uniformly in arclength by linear interpolation, keeping the
    /// first sample and the sample count.
    pub fn resample(&self) -> CurveState {
        let m = self.len();
        let s = self.spacings();
        let total: f64 = s.iter().sum();
        let h = total / m as f64;
        let mut out = Vec::with_capacity(m);
        out.push(self.points[0]);
        let (mut seg, mut start) = (0usize, 0.0f64);
        for k in 1..m {
            let target = k as f64 * h;
            while seg + 1 < m && start + s[seg] < target {
                start += s[seg];
                seg += 1;
            }
            let a = self.points[seg];
            let b = self.next(seg);
            let f = if s[seg] > 0.0 { ((target - start) / s[seg]).clamp(0.0, 1.0) } else { 0.0 };
            out.push([a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1])]);
        }
        CurveState {
            points: out,
            winding: self.winding,
        }
    }

    /// Fails with the indices of two non-adjacent edges that meet.
    pub fn check_simple(&self) -> Result<()> {
        let audit = audit_segments(std::slice::from_ref(self));
        match audit.self_hit {
            Some((i, j)) => Err(Error::SelfIntersection(i, j)),
            None => Ok(()),
        }
    }
}

/// Per-curve buffers of the explicit scheme.
#[derive(Debug, Clone, Default)]
struct Kernel {
    unit: Vec<V2>,
    len: Vec<f64>,
    kvec: Vec<V2>,
}

#[derive(Debug, Clone, Copy)]
struct Measure {
    min_len: f64,
    max_len: f64,
    length: f64,
    max_kappa: f64,
}

impl Kernel {
    fn measure(&mut self, c: &CurveState) -> Result<Measure> {
        let m = c.len();
        self.unit.resize(m, [0.0; 2]);
        self.len.resize(m, 0.0);
        self.kvec.resize(m, [0.0; 2]);
        let (mut min_len, mut max_len, mut length) = (f64::INFINITY, 0.0f64, 0.0);
        for k in 0..m {
            let d = sub2(c.next(k), c.points[k]);
            let l = norm2(d);
            if !(l > 1e-14) {
                return Err(Error::DegenerateSpacing);
            }
            self.len[k] = l;
            self.unit[k] = [d[0] / l, d[1] / l];
            min_len = min_len.min(l);
            max_len = max_len.max(l);
            length += l;
        }
        let mut max_k2 = 0.0f64;
        for i in 0..m {
            let j = if i == 0 { m - 1 } else { i - 1 };
            let s = 2.0 / (self.len[j] + self.len[i]);
            let kv = [s * (self.unit[i][0] - self.unit[j][0]), s * (self.unit[i][1] - self.unit[j][1])];
            max_k2 = max_k2.max(dot2(kv, kv));
            self.kvec[i] = kv;
        }
        Ok(Measure {
            min_len,
            max_len,
            length,
            max_kappa: max_k2.sqrt(),
        })
    }

    fn advance(&self, c: &mut CurveState, dt: f64) {
        for (p, k) in c.points.iter_mut().zip(&self.kvec) {
            p[0] += dt * k[0];
            p[1] += dt * k[1];
        }
    }
}

fn cfl_bound(min_len: f64) -> f64 {
    MAX_CFL * min_len * min_len
}

/// One explicit Euler step `p <- p + dt kappa n`.
pub fn csf_step(c: &CurveState, dt: f64) -> Result<CurveState> {
    let mut k = Kernel::default();
    let m = k.measure(c)?;
    let bound = cfl_bound(m.min_len);
    if !(dt >= 0.0 && dt <= bound) {
        return Err(Error::CflViolation { dt, bound });
    }
    let mut out = c.clone();
    k.advance(&mut out, dt);
    Ok(out)
}

/// Time-stepping policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowParams {
    /// `dt = cfl * min(spacing)^2`, with `cfl` in `(0, 1/2]`.
    pub cfl: f64,
    /// Stop once the largest curvature drops below this.
    pub kappa_tol: f64,
    pub t_max: f64,
    /// Steps between uniform-arclength resamples and intersection sweeps.
    pub resample_period: usize,
    /// Steps between trace rows.
    pub record_period: usize,
}

impl Default for FlowParams {
    fn default() -> Self {
        FlowParams {
            cfl: DEFAULT_CFL,
            kappa_tol: 1e-3,
            t_max: 1.0,
            resample_period: 1000,
            record_period: 1000,
        }
    }
}

impl FlowParams {
    fn validate(&self) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl <= MAX_CFL) {
            return Err(Error::CflViolation {
                dt: self.cfl,
                bound: MAX_CFL,
            });
        }
        if !(self.kappa_tol >= 0.0) || !(self.t_max >= 0.0) || self.resample_period == 0 || self.record_period == 0
        {
            return Err(Error::InvalidInput("flow parameters out of range".into()));
        }
        Ok(())
    }
}

/// One row of a flow trace. Lengths are averaged over the curves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub t: f64,
    pub length: f64,
    pub max_kappa: f64,
    /// Smallest distance between different curves, absent for a single curve.
    pub min_pair_dist: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FlowTrace {
    pub rows: Vec<TraceRow>,
    pub steps: usize,
    pub t: f64,
    pub max_kappa: f64,
    pub resamples: usize,
    /// Smallest inter-curve distance seen at any audit.
    pub min_pair_dist: Option<f64>,
    /// Largest single-step vertex displacement.
    pub max_step_displacement: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Stop {
    Curvature,
    Duration(f64),
}

/// Result of the segment audit: closest approach between different curves
/// (a lower bound when it exceeds `cap`) and any self-crossing.
#[derive(Debug, Clone, Copy)]
struct Audit {
    min_between: f64,
    self_hit: Option<(usize, usize)>,
}

fn point_segment(p: V2, a: V2, d: V2) -> f64 {
    let dd = dot2(d, d);
    let t = if dd > 0.0 { (dot2(sub2(p, a), d) / dd).clamp(0.0, 1.0) } else { 0.0 };
    norm2(sub2(p, [a[0] + t * d[0], a[1] + t * d[1]]))
}

// distance between the segments [0, da] and [r, r + db]
fn segment_distance(da: V2, r: V2, db: V2) -> f64 {
    let o = [0.0, 0.0];
    let e = da;
    let q1 = [r[0] + db[0], r[1] + db[1]];
    let d1 = cross2(da, r);
    let d2 = cross2(da, q1);
    let d3 = cross2(db, sub2(o, r));
    let d4 = cross2(db, sub2(e, r));
    if d1 * d2 < 0.0 && d3 * d4 < 0.0 {
        return 0.0;
    }
    point_segment(o, r, db)
        .min(point_segment(e, r, db))
        .min(point_segment(r, o, da))
        .min(point_segment(q1, o, da))
}

// (curve, index, wrapped start, edge)
type Seg = (usize, usize, V2, V2);

fn audit_segments(curves: &[CurveState]) -> Audit {
    let mut segs: Vec<Seg> = Vec::new();
    let mut max_len = 0.0f64;
    for (c, curve) in curves.iter().enumerate() {
        for (k, e) in curve.edges().into_iter().enumerate() {
            let p = curve.points[k];
            max_len = max_len.max(norm2(e));
            segs.push((c, k, [wrap_unit(p[0]), wrap_unit(p[1])], e));
        }
    }
    let sizes: Vec<usize> = curves.iter().map(|c| c.len()).collect();
    let adjacent = |a: &Seg, b: &Seg| {
        if a.0 != b.0 {
            return false;
        }
        let m = sizes[a.0];
        let d = (a.1 + m - b.1) % m;
        d == 0 || d == 1 || d == m - 1
    };
    let mut audit = Audit {
        min_between: f64::INFINITY,
        self_hit: None,
    };
    let visit = |audit: &mut Audit, a: &Seg, b: &Seg| {
        if adjacent(a, b) {
            return;
        }
        let r = [signed_increment(a.2[0], b.2[0]), signed_increment(a.2[1], b.2[1])];
        let d = segment_distance(a.3, r, b.3);
        if a.0 != b.0 {
            audit.min_between = audit.min_between.min(d);
        } else if d == 0.0 && audit.self_hit.is_none() {
            audit.self_hit = Some((a.1.min(b.1), a.1.max(b.1)));
        }
    };
    // coarsen until the closest approach is resolved by the neighborhoods
    let mut g = ((0.5 / max_len.max(1e-12)).floor() as usize).min(512);
    loop {
        if g < 3 {
            for i in 0..segs.len() {
                for j in i + 1..segs.len() {
                    visit(&mut audit, &segs[i], &segs[j]);
                }
            }
            return audit;
        }
        visit_neighbors(&segs, g, |a, b| visit(&mut audit, a, b));
        // segments in non-neighboring cells are at least half a cell apart
        if audit.min_between < 0.5 / g as f64 || audit.self_hit.is_some() {
            return audit;
        }
        g /= 2;
    }
}

fn visit_neighbors(segs: &[Seg], g: usize, mut visit: impl FnMut(&Seg, &Seg)) {
    // bucket by edge midpoint; cells are at least two edge lengths wide
    let cell_of = |s: &Seg| -> (usize, usize) {
        let mid = [wrap_unit(s.2[0] + 0.5 * s.3[0]), wrap_unit(s.2[1] + 0.5 * s.3[1])];
        (((mid[0] * g as f64) as usize).min(g - 1), ((mid[1] * g as f64) as usize).min(g - 1))
    };
    let mut start = vec![0usize; g * g + 1];
    let cells: Vec<usize> = segs
        .iter()
        .map(|s| {
            let (cx, cy) = cell_of(s);
            cx * g + cy
        })
        .collect();
    for &c in &cells {
        start[c + 1] += 1;
    }
    for c in 0..g * g {
        start[c + 1] += start[c];
    }
    let mut fill = start.clone();
    let mut order = vec![0usize; segs.len()];
    for (i, &c) in cells.iter().enumerate() {
        order[fill[c]] = i;
        fill[c] += 1;
    }
    for cx in 0..g {
        for cy in 0..g {
            let here = &order[start[cx * g + cy]..start[cx * g + cy + 1]];
            for dx in [g - 1, 0, 1] {
                for dy in [g - 1, 0, 1] {
                    let n = ((cx + dx) % g) * g + (cy + dy) % g;
                    let there = &order[start[n]..start[n + 1]];
                    for &i in here {
                        for &j in there {
                            if i < j {
                                visit(&segs[i], &segs[j]);
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Shared-time-step integrator over a family of curves.
fn integrate(
    mut curves: Vec<CurveState>,
    params: &FlowParams,
    stop: Stop,
) -> Result<(Vec<CurveState>, FlowTrace)> {
    params.validate()?;
    let multi = curves.len() > 1;
    let mut kernels = vec![Kernel::default(); curves.len()];
    let measure_all = |curves: &Vec<CurveState>, kernels: &mut Vec<Kernel>| -> Result<Vec<Measure>> {
        kernels
            .par_iter_mut()
            .zip(curves.par_iter())
            .map(|(k, c)| k.measure(c))
            .collect()
    };
    let summarize = |ms: &[Measure]| {
        let min_len = ms.iter().map(|m| m.min_len).fold(f64::INFINITY, f64::min);
        let ratio = ms.iter().map(|m| m.max_len / m.min_len).fold(0.0, f64::max);
        let length = ms.iter().map(|m| m.length).sum::<f64>() / ms.len() as f64;
        let max_kappa = ms.iter().map(|m| m.max_kappa).fold(0.0, f64::max);
        (min_len, ratio, length, max_kappa)
    };
    let audit = |curves: &[CurveState], step: usize| -> Result<Option<f64>> {
        let a = audit_segments(curves);
        if let Some((i, j)) = a.self_hit {
            return Err(Error::SelfIntersection(i, j));
        }
        if multi {
            if a.min_between <= 0.0 {
                return Err(Error::DisjointnessLost {
                    min_distance: a.min_between,
                    threshold: 0.0,
                    step,
                });
            }
            Ok(Some(a.min_between))
        } else {
            Ok(None)
        }
    };

    let mut pair = audit(&curves, 0)?;
    let mut trace = FlowTrace {
        rows: Vec::new(),
        steps: 0,
        t: 0.0,
        max_kappa: 0.0,
        resamples: 0,
        min_pair_dist: pair,
        max_step_displacement: 0.0,
    };
    // motion since the last disjointness audit, summed over steps
    let mut drift = 0.0;
    let mut ms = measure_all(&curves, &mut kernels)?;
    loop {
        let (min_len, _, length, max_kappa) = summarize(&ms);
        trace.max_kappa = max_kappa;
        let done = match stop {
            Stop::Curvature => max_kappa < params.kappa_tol,
            Stop::Duration(end) => trace.t >= end,
        };
        if done || trace.steps % params.record_period == 0 {
            trace.rows.push(TraceRow {
                t: trace.t,
                length,
                max_kappa,
                min_pair_dist: pair,
            });
        }
        if done {
            break;
        }
        if stop == Stop::Curvature && trace.t >= params.t_max {
            return Err(Error::TimeBudgetExceeded {
                t_max: params.t_max,
                max_kappa,
            });
        }
        let mut dt = params.cfl * min_len * min_len;
        if let Stop::Duration(end) = stop {
            dt = dt.min(end - trace.t);
        }
        curves
            .par_iter_mut()
            .zip(kernels.par_iter())
            .for_each(|(c, k)| k.advance(c, dt));
        trace.t += dt;
        trace.steps += 1;
        trace.max_step_displacement = trace.max_step_displacement.max(dt * max_kappa);
        drift += 2.0 * dt * max_kappa;

        let periodic = trace.steps % params.resample_period == 0;
        ms = measure_all(&curves, &mut kernels)?;
        if periodic || summarize(&ms).1 > SPACING_RATIO {
            if summarize(&ms).1 > 1.0 + 1e-9 {
                curves = curves.par_iter().map(|c| c.resample()).collect();
                trace.resamples += 1;
                ms = measure_all(&curves, &mut kernels)?;
            }
            drift = f64::INFINITY;
        }
        // audit whenever the curves may have closed a quarter of the last gap
        let gap = pair.unwrap_or(f64::INFINITY);
        if drift == f64::INFINITY || (multi && drift > 0.25 * gap) {
            pair = audit(&curves, trace.steps)?;
            if let (Some(p), Some(best)) = (pair, trace.min_pair_dist) {
                trace.min_pair_dist = Some(best.min(p));
            }
            drift = 0.0;
        }
    }
    Ok((curves, trace))
}

/// Flows a single curve for exactly `duration`.
pub fn evolve(c: &CurveState, params: &FlowParams, duration: f64) -> Result<(CurveState, FlowTrace)> {
    if !(duration >= 0.0) {
        return Err(Error::InvalidInput(format!("negative flow duration {duration}")));
    }
    let (mut out, trace) = integrate(vec![c.clone()], params, Stop::Duration(duration))?;
    Ok((out.remove(0), trace))
}

/// Flows a single curve until its curvature drops below `kappa_tol`.
pub fn flow_until(c: &CurveState, params: &FlowParams) -> Result<(CurveState, FlowTrace)> {
    let (mut out, trace) = integrate(vec![c.clone()], params, Stop::Curvature)?;
    Ok((out.remove(0), trace))
}

/// Flows a family of curves with a shared time step until every curvature
/// drops below `kappa_tol`.
pub fn flow_curves(curves: &[CurveState], params: &FlowParams) -> Result<(Vec<CurveState>, FlowTrace)> {
    if curves.is_empty() {
        return Err(Error::InvalidInput("no curves to flow".into()));
    }
    integrate(curves.to_vec(), params, Stop::Curvature)
}

/// Outcome of [`flow_fibering`].
#[derive(Debug, Clone, Serialize)]
pub struct FiberingFlowReport {
    pub trace: FlowTrace,
    pub initial_slope: Vec<i64>,
    /// Slope of every terminal fiber, recomputed from the wrapped samples.
    pub terminal_slopes: Vec<Vec<i64>>,
    /// Straightness tolerance of the terminal core check: the larger of the
    /// default and the sagitta `kappa_tol L^2 / 8` of an arc of length `L`.
    pub core_tol: f64,
    pub core: Core,
}

/// Lifts every fiber of a flat `T2` fibering.
pub fn curves_of(f: &Fibering) -> Result<Vec<CurveState>> {
    if f.model != FibrationModel::FlatT2 {
        return Err(Error::UnsupportedBase(format!("curve-shortening flow runs on flat-t2, not {}", f.model)));
    }
    f.fibers
        .iter()
        .map(|fiber| CurveState::from_wrapped(&fiber.iter().map(|p| [p.0[0], p.0[1]]).collect::<Vec<_>>()))
        .collect()
}

/// Packs curves as a flat `T2` fibering labeled by the projection of each
/// first sample.
pub fn fibering_of(curves: &[CurveState]) -> Fibering {
    let model = FibrationModel::FlatT2;
    let fibers: Vec<Vec<TotalPoint>> = curves.iter().map(|c| c.wrapped()).collect();
    Fibering {
        model,
        labels: fibers.iter().map(|f| model.project(f[0])).collect(),
        fibers,
    }
}

/// Flows every fiber of a flat `T2` fibering with a shared time grid and
/// checks that the result is a rational linear fibering of the initial slope.
pub fn flow_fibering(f: &Fibering, params: &FlowParams) -> Result<(Fibering, FiberingFlowReport)> {
    let curves = curves_of(f)?;
    let initial = slope(f.model, &f.fibers[0], false)?;
    for fiber in &f.fibers[1..] {
        let s = slope(f.model, fiber, false)?;
        if s != initial {
            return Err(Error::InvalidInput(format!("fibers have slopes {initial:?} and {s:?}")));
        }
    }
    let (out, trace) = flow_curves(&curves, params)?;
    let terminal = fibering_of(&out);
    let terminal_slopes = terminal
        .fibers
        .iter()
        .map(|fb| slope(terminal.model, fb, false))
        .collect::<Result<Vec<_>>>()?;
    let longest = out.iter().map(|c| c.length()).fold(0.0, f64::max);
    let core_tol = CORE_TOL.max(params.kappa_tol * longest * longest / 8.0);
    let core = core_membership(&terminal, core_tol);
    Ok((
        terminal,
        FiberingFlowReport {
            trace,
            initial_slope: initial,
            terminal_slopes,
            core_tol,
            core,
        },
    ))
}

fn check_slope(w: [i64; 2]) -> Result<()> {
    fn gcd(a: i64, b: i64) -> i64 {
        if b == 0 {
            a.abs()
        } else {
            gcd(b, a % b)
        }
    }
    if gcd(w[0], w[1]) != 1 {
        return Err(Error::NonPrimitive(w.to_vec()));
    }
    Ok(())
}

/// `n` parallel closed geodesics of class `w`, equally spaced across the
/// torus, with `m` samples each.
pub fn linear_fibering(w: [i64; 2], n: usize, m: usize) -> Result<Vec<CurveState>> {
    check_slope(w)?;
    if n == 0 {
        return Err(Error::InvalidInput("need at least one fiber".into()));
    }
    let wf = [w[0] as f64, w[1] as f64];
    let len2 = dot2(wf, wf);
    // the lines of class w are spaced 1/|w| apart transversally
    (0..n)
        .map(|j| {
            let s = j as f64 / (n as f64 * len2);
            CurveState::line(m, w, [s * wf[1], -s * wf[0]])
        })
        .collect()
}

/// Smooth displacement `p -> p + amp g(p) nu` of the
/// torus, with `nu` the unit normal of the slope and `g` an average of two
/// unit Fourier modes with random phases.
#[derive(Debug, Clone, Copy)]
pub struct TorusDisplacement {
    amp: f64,
    nu: V2,
    phases: [f64; 2],
}

impl TorusDisplacement {
    pub fn new(w: [i64; 2], amp: f64, rng: &mut impl Rng) -> Result<Self> {
        check_slope(w)?;
        let wf = [w[0] as f64, w[1] as f64];
        let n = norm2(wf);
        let nu = [wf[1] / n, -wf[0] / n];
        // Jacobian determinant is at least 1 - amp pi (|nu_x| + |nu_y|)
        let stretch = amp.abs() * std::f64::consts::PI * (nu[0].abs() + nu[1].abs());
        if !(stretch < 0.9) {
            return Err(Error::InvalidInput(format!(
                "amplitude {amp} folds the torus for slope {w:?}"
            )));
        }
        Ok(TorusDisplacement {
            amp,
            nu,
            phases: [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)],
        })
    }

    pub fn apply(&self, p: V2) -> V2 {
        let tau = 2.0 * std::f64::consts::PI;
        let g = 0.5 * ((tau * (p[0] + self.phases[0])).sin() + (tau * (p[1] + self.phases[1])).sin());
        [p[0] + self.amp * g * self.nu[0], p[1] + self.amp * g * self.nu[1]]
    }
}

/// The linear fibering of class `w` pushed by a random [`TorusDisplacement`].
pub fn perturbed_linear_fibering(
    w: [i64; 2],
    n: usize,
    m: usize,
    amp: f64,
    rng: &mut impl Rng,
) -> Result<Vec<CurveState>> {
    let d = TorusDisplacement::new(w, amp, rng)?;
    linear_fibering(w, n, m)?
        .into_iter()
        .map(|c| CurveState::new(c.points.iter().map(|&p| d.apply(p)).collect(), w))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn straight_lines_have_no_curvature() {
        let c = CurveState::line(512, [1, 2], [0.3, 0.1]).unwrap();
        assert!(c.curvature().unwrap().iter().all(|k| k.abs() < 1e-10));
        let dt = 0.2 * c.spacings()[0].powi(2);
        let next = csf_step(&c, dt).unwrap();
        let moved = c.points().iter().zip(next.points()).map(|(a, b)| norm2(sub2(*a, *b))).fold(0.0, f64::max);
        assert!(moved < 1e-12);
    }

    #[test]
    fn circle_curvature() {
        let r = 0.2;
        let c = CurveState::circle(512, [0.5, 0.5], r).unwrap();
        for k in c.curvature().unwrap() {
            assert!((k * r - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn graph_curvature() {
        // y = x + 0.1 sin(2 pi x) has curvature |y''| / (1 + y'^2)^{3/2}
        let m = 2048;
        let y = |x: f64| x + 0.1 * (2.0 * PI * x).sin();
        let c = CurveState::from_fn(m, [1, 1], |s| [s, y(s)]).unwrap();
        let kappa = c.curvature().unwrap();
        let exact = |x: f64| {
            let d1 = 1.0 + 0.2 * PI * (2.0 * PI * x).cos();
            let d2 = -0.4 * PI * PI * (2.0 * PI * x).sin();
            d2 / (1.0 + d1 * d1).powf(1.5)
        };
        let max_exact = (0..m).map(|k| exact(k as f64 / m as f64).abs()).fold(0.0, f64::max);
        let max_num = kappa.iter().map(|k| k.abs()).fold(0.0, f64::max);
        assert!((max_exact - max_num).abs() < 1e-3, "{max_exact} {max_num}");
        for (k, kn) in kappa.iter().enumerate() {
            assert!((kn - exact(k as f64 / m as f64)).abs() < 1e-2);
        }
    }

    #[test]
    fn cfl_is_enforced() {
        let c = CurveState::circle(64, [0.5, 0.5], 0.2).unwrap();
        let h = c.spacings()[0];
        assert!(matches!(csf_step(&c, 0.6 * h * h), Err(Error::CflViolation { .. })));
        let params = FlowParams {
            cfl: 0.7,
            ..FlowParams::default()
        };
        assert!(matches!(flow_until(&c, &params), Err(Error::CflViolation { .. })));
    }

    #[test]
    fn shrinking_circle() {
        let r0 = 0.25;
        let c = CurveState::circle(256, [0.5, 0.5], r0).unwrap();
        let params = FlowParams::default();
        let radius = |c: &CurveState| {
            let n = c.len() as f64;
            let ctr = c.points().iter().fold([0.0, 0.0], |a, p| [a[0] + p[0] / n, a[1] + p[1] / n]);
            c.points().iter().map(|p| norm2(sub2(*p, ctr))).sum::<f64>() / n
        };
        let mut state = c;
        let mut t = 0.0;
        for frac in [0.25, 0.5, 0.75, 0.96] {
            let target = frac * r0 * r0 / 2.0;
            state = evolve(&state, &params, target - t).unwrap().0;
            t = target;
            let r = radius(&state);
            assert!(((r * r + 2.0 * t) / (r0 * r0) - 1.0).abs() < 1e-2);
            assert!((r / (r0 * r0 - 2.0 * t).sqrt() - 1.0).abs() < 1e-2, "{frac}: {r}");
        }
    }

    #[test]
    fn resampling_is_uniform() {
        let c = CurveState::from_fn(200, [0, 1], |s| [0.3 + 0.05 * (2.0 * PI * s).sin(), s + 0.1 * (2.0 * PI * s).sin()])
            .unwrap();
        assert!(c.spacing_ratio() > 1.5);
        let r = c.resample();
        assert!(r.spacing_ratio() < 1.01);
        assert_eq!(r.points()[0], c.points()[0]);
        assert!(r.length() <= c.length() + 1e-12);
    }

    #[test]
    fn wrapped_round_trip() {
        let c = CurveState::line(64, [1, 2], [0.9, 0.7]).unwrap();
        let wrapped: Vec<V2> = c.wrapped().iter().map(|p| [p.0[0], p.0[1]]).collect();
        let back = CurveState::from_wrapped(&wrapped).unwrap();
        assert_eq!(back.winding(), [1, 2]);
        for (a, b) in back.points().iter().zip(c.points()) {
            assert!(norm2(sub2(*a, *b)) < 1e-12);
        }
    }

    #[test]
    fn crossings_are_found() {
        // a figure eight
        let c = CurveState::from_fn(200, [0, 0], |s| {
            let t = 2.0 * PI * s;
            [0.5 + 0.2 * t.sin(), 0.5 + 0.1 * (2.0 * t).sin()]
        })
        .unwrap();
        assert!(matches!(c.check_simple(), Err(Error::SelfIntersection(..))));
        CurveState::circle(200, [0.1, 0.1], 0.2).unwrap().check_simple().unwrap();
        let lines = linear_fibering([1, 2], 4, 128).unwrap();
        let a = audit_segments(&lines);
        assert!((a.min_between - 1.0 / (4.0 * 5f64.sqrt())).abs() < 1e-12);
        let crossing = [lines[0].clone(), CurveState::line(128, [2, 1], [0.0, 0.5]).unwrap()];
        assert_eq!(audit_segments(&crossing).min_between, 0.0);
    }

    #[test]
    fn geodesic_fibering_is_stationary() {
        let lines = linear_fibering([1, 2], 8, 256).unwrap();
        let (out, trace) = flow_curves(&lines, &FlowParams::default()).unwrap();
        assert_eq!(trace.steps, 0);
        assert_eq!(out, lines);
        let dt = 0.2 * lines[0].spacings()[0].powi(2);
        for c in &lines {
            let next = csf_step(c, dt).unwrap();
            let moved = c.points().iter().zip(next.points()).map(|(a, b)| norm2(sub2(*a, *b))).fold(0.0, f64::max);
            assert!(moved < 1e-12);
        }
    }

    #[test]
    fn perturbed_curve_straightens() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let c = perturbed_linear_fibering([1, 2], 1, 256, 0.1, &mut rng).unwrap().remove(0);
        let params = FlowParams::default();
        let (out, trace) = flow_until(&c, &params).unwrap();
        assert!(trace.max_kappa < 1e-3 && trace.t <= 1.0);
        assert_eq!(out.winding(), [1, 2]);
        let w = FibrationModel::FlatT2;
        assert_eq!(slope(w, &out.wrapped(), true).unwrap(), vec![1, 2]);
        for pair in trace.rows.windows(2) {
            assert!(pair[1].length <= pair[0].length + 1e-12);
        }
    }
}
