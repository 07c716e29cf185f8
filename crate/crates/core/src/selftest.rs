//! The end-to-end invariant suite: eight seeded checks, each with a runtime
//! budget, shared by the acceptance tests and the `selftest` command.

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cech::{classify, coboundary_act, cocycle_check, euler_class, Base, Cochain0, Cocycle1, ModelCover};
use crate::circle_diffeo::{retract, Angle, CircleDiffeo};
use crate::csf::{
    csf_step, evolve, fibering_of, flow_curves, flow_fibering, linear_fibering, perturbed_linear_fibering,
    CurveState, FlowParams,
};
use crate::error::{Error, Result};
use crate::fields::{BaseFieldGrid, FieldGrid, RandomField};
use crate::geometry::{sphere_frame, BasePoint, FibrationModel, TotalPoint};
use crate::moduli::{
    brute_center, core_membership, karcher_center, push_by_exp, refine, straighten, CenterMeasure, Core, Fibering,
    BRUTE_GRID, CORE_TOL,
};
use crate::quat::{add3, norm3, scale3, sub3, Quat};

/// Outcome of one criterion.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    /// Measured quantities, with a `!` on the ones that broke their bound.
    pub details: Vec<String>,
    pub seconds: f64,
    pub budget: f64,
}

impl Report {
    pub fn line(&self) -> String {
        format!(
            "[{}] {}. {} ({:.2} s of {:.0} s): {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.seconds,
            self.budget,
            self.details.join("; ")
        )
    }
}

struct Checks {
    details: Vec<String>,
    ok: bool,
}

impl Checks {
    fn new() -> Self {
        Checks {
            details: Vec::new(),
            ok: true,
        }
    }

    /// Records `value < bound`.
    fn below(&mut self, what: &str, value: f64, bound: f64) {
        self.expect(what, value < bound, format!("{value:.3e} < {bound:.0e}"));
    }

    fn above(&mut self, what: &str, value: f64, bound: f64) {
        self.expect(what, value > bound, format!("{value:.3e} > {bound}"));
    }

    fn expect(&mut self, what: &str, ok: bool, shown: String) {
        self.ok &= ok;
        self.details.push(format!("{}{what} {shown}", if ok { "" } else { "!" }));
    }
}

fn finish(id: usize, name: &'static str, budget: f64, start: Instant, body: Result<Checks>) -> Report {
    let seconds = start.elapsed().as_secs_f64();
    let (mut passed, mut details) = match body {
        Ok(c) => (c.ok, c.details),
        Err(e) => (false, vec![format!("!error {}: {e}", e.code())]),
    };
    if seconds >= budget {
        passed = false;
        details.push(format!("!runtime {seconds:.2} s over budget"));
    }
    Report {
        id,
        name,
        passed,
        details,
        seconds,
        budget,
    }
}

pub const NAMES: [&str; 8] = [
    "heat-flow retraction",
    "cech cocycles",
    "fibration geometry",
    "field splitting",
    "karcher centers",
    "straightening",
    "curve-shortening flow",
    "core orbit",
];

/// Runs criterion `id` (1 to 8).
pub fn run(id: usize, seed: u64) -> Result<Report> {
    let rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(id as u64));
    let (budget, body): (f64, fn(ChaCha8Rng) -> Result<Checks>) = match id {
        1 => (5.0, heat_flow),
        2 => (2.0, cech),
        3 => (10.0, geometry),
        4 => (5.0, splitting),
        5 => (30.0, karcher),
        6 => (60.0, straightening),
        7 => (120.0, curve_shortening),
        8 => (10.0, core_orbit),
        _ => return Err(Error::InvalidInput(format!("no criterion {id}; expected 1 to 8"))),
    };
    let start = Instant::now();
    let result = body(rng);
    Ok(finish(id, NAMES[id - 1], budget, start, result))
}

pub fn run_all(seed: u64) -> Vec<Report> {
    (1..=8).map(|id| run(id, seed).expect("valid id")).collect()
}

fn heat_flow(mut rng: ChaCha8Rng) -> Result<Checks> {
    let mut c = Checks::new();
    let (mut endpoint, mut equivariance, mut min_deriv) = (0.0f64, 0.0f64, f64::INFINITY);
    for _ in 0..50 {
        let amp = rng.gen_range(0.05..0.3);
        let f = CircleDiffeo::random(256, amp, &mut rng)?;
        let rho = rng.gen_range(0.0..1.0);
        let g = f.conjugate_by_rotation(rho)?;
        let mean = f.displacement().mean();
        let h1 = retract(&f, 1.0)?;
        let target = CircleDiffeo::rotation(256, Angle::new(mean))?;
        endpoint = endpoint.max(h1.distance(&target)?);
        for k in 0..=10 {
            let t = k as f64 / 10.0;
            let ht = retract(&f, t)?;
            min_deriv = min_deriv.min(ht.min_derivative());
            let lhs = retract(&g, t)?;
            let rhs = ht.conjugate_by_rotation(rho)?;
            equivariance = equivariance.max(lhs.distance(&rhs)?);
        }
    }
    c.below("endpoint-rotation error", endpoint, 1e-10);
    c.below("equivariance error", equivariance, 1e-8);
    c.above("min derivative", min_deriv, -1.0);
    Ok(c)
}

fn cech(mut rng: ChaCha8Rng) -> Result<Checks> {
    let mut c = Checks::new();
    let mut growth = f64::NEG_INFINITY;
    for base in [Base::S1, Base::S2, Base::T2] {
        let cover = ModelCover::new(base, 16)?;
        for k in 0..34 {
            let tau = if base == Base::S2 && k % 2 == 0 {
                let d = rng.gen_range(-3..=3) as f64;
                Cocycle1::clutching(&cover, |l| d * l)?
            } else {
                Cocycle1::random_trivial(&cover, &mut rng)
            };
            let kappa = Cochain0::random(&cover, &mut rng);
            let before = cocycle_check(&tau, &cover)?;
            let after = cocycle_check(&coboundary_act(&tau, &kappa, &cover)?, &cover)?;
            growth = growth.max(after - before);
        }
    }
    c.expect("residual growth", growth <= 1e-12, format!("{growth:.3e} <= 1e-12"));

    let cover = ModelCover::new(Base::S2, 64)?;
    let mut degree_errors = 0;
    for d in -3i64..=3 {
        let a = rng.gen_range(-0.1..0.1);
        let clean = Cocycle1::clutching(&cover, |l| d as f64 * l)?;
        let bent = Cocycle1::clutching(&cover, |l| d as f64 * l + a * (2.0 * PI * l).sin())?;
        for tau in [clean, bent] {
            if euler_class(&tau, &cover)? != d {
                degree_errors += 1;
            }
            for _ in 0..100 {
                let moved = coboundary_act(&tau, &Cochain0::random(&cover, &mut rng), &cover)?;
                if euler_class(&moved, &cover)? != d {
                    degree_errors += 1;
                }
            }
        }
    }
    c.expect("degree mismatches", degree_errors == 0, format!("{degree_errors} == 0"));

    let rows: Vec<(Base, i64, &str, &str)> = vec![
        (Base::S1, 0, "T2", "Zprim2"),
        (Base::T2, 0, "T3", "Zprim3"),
        (Base::S2, 1, "L(1,1)", "S2 ⊔ S2"),
        (Base::S2, 2, "L(2,1)", "S2 ⊔ S2"),
        (Base::S2, -2, "L(2,1)", "S2 ⊔ S2"),
        (Base::S2, 3, "L(3,1)", "S0"),
        (Base::S2, 5, "L(5,1)", "S0"),
        (Base::S2, 0, "S2xS1", "non-finite-dimensional"),
        (Base::T2, 3, "MT_3", "S0"),
    ];
    let mut table_errors = 0;
    for (base, e, total, core) in rows {
        let r = classify(base, e)?;
        if r.total_space != total || r.core != core {
            table_errors += 1;
        }
    }
    if !matches!(classify(Base::S1, 1), Err(Error::InvalidEuler { .. })) {
        table_errors += 1;
    }
    c.expect("table mismatches", table_errors == 0, format!("{table_errors} == 0"));
    Ok(c)
}

const MODELS: [FibrationModel; 4] = [
    FibrationModel::FlatT2,
    FibrationModel::FlatT3,
    FibrationModel::Hopf,
    FibrationModel::Lens(2),
];

fn geometry(mut rng: ChaCha8Rng) -> Result<Checks> {
    let mut c = Checks::new();
    let mut submersion = 0.0f64;
    for model in MODELS {
        for _ in 0..1000 {
            let p = model.random_point(&mut rng);
            let x = model.project(p);
            let v = model.random_base_tangent(x, 1.0, &mut rng);
            let w = model.horizontal_lift_vec(p, v)?.vector;
            let (a, b) = (model.norm(w), model.base_norm(v));
            submersion = submersion.max((a - b).abs() / b);
        }
    }
    c.below("submersion relative error", submersion, 1e-8);

    let hopf = FibrationModel::Hopf;
    let (mut endpoint, mut isometry) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let q = hopf.random_point(&mut rng);
        let x = hopf.project(q);
        let v = hopf.random_base_tangent(x, 0.6, &mut rng);
        let y = hopf.base_geodesic(x, v, 1.0)?;
        let q2 = hopf.fiber_point(x, hopf.fiber_param(q) + rng.gen_range(0.0..1.0));
        let (a, b) = (hopf.horizontal_transport(q, y)?, hopf.horizontal_transport(q2, y)?);
        endpoint = endpoint.max(hopf.base_distance(hopf.project(a), y));
        isometry = isometry.max((hopf.distance(a, b) - hopf.distance(q, q2)).abs());
    }
    c.below("transport endpoint error", endpoint, 1e-9);
    c.below("fiber distance drift", isometry, 1e-7);

    let mut det = f64::INFINITY;
    for k in 0..100 {
        let model = MODELS[k % 4];
        let p = model.random_point(&mut rng);
        det = det.min(model.adapted_exp_jacobian_det(p)?.abs());
    }
    c.above("min |jacobian det|", det, 0.1);
    Ok(c)
}

fn splitting(mut rng: ChaCha8Rng) -> Result<Checks> {
    let mut c = Checks::new();
    let model = FibrationModel::FlatT2;
    let (mut cross, mut idem, mut round) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..20 {
        let x = FieldGrid::sample(model, 64, 64, &RandomField::new(model, 1.0, &mut rng))?;
        let r = x.split_report();
        cross = cross.max(r.normalized_cross.abs());
        idem = idem.max(r.idempotence_error);
        let y = BaseFieldGrid::random(model, 64, 1.0, &mut rng)?;
        let lift = FieldGrid::horizontal_lift_field(&y, 64)?;
        match lift.is_projectable(1e-8) {
            (true, Some(back)) => round = round.max(back.sup_distance(&y)?),
            _ => round = f64::INFINITY,
        }
    }
    c.below("normalized cross term", cross, 1e-8);
    c.below("averaging idempotence error", idem, 1e-10);
    c.below("lift round trip error", round, 1e-8);
    Ok(c)
}

/// A closed shape wobbling around the model fiber over a random point: its
/// projection stays within `radius` of that point.
pub fn random_shape(model: FibrationModel, m: usize, radius: f64, rng: &mut impl Rng) -> Result<Vec<TotalPoint>> {
    let x = model.random_base_point(rng);
    let (e1, e2) = if model.is_flat() {
        ([1.0, 0.0, 0.0], [0.0, if model == FibrationModel::FlatT3 { 1.0 } else { 0.0 }, 0.0])
    } else {
        sphere_frame(x)
    };
    // five terms of size at most radius / 5 each
    let coeffs: Vec<(f64, f64, f64)> = (0..5)
        .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(0.0..1.0)))
        .collect();
    let wobble = rng.gen_range(0.0..0.05);
    (0..m)
        .map(|k| {
            let t = k as f64 / m as f64;
            let v = coeffs.iter().enumerate().fold([0.0; 3], |acc, (j, (a, b, ph))| {
                let arg = 2.0 * PI * (j as f64 * t + ph);
                let s = radius / 5.0 * arg.cos() / 2f64.sqrt();
                add3(acc, add3(scale3(e1, s * a), scale3(e2, s * b)))
            });
            let y = model.base_geodesic(x, v, 1.0)?;
            Ok(model.fiber_point(y, t + wobble * (2.0 * PI * t).sin()))
        })
        .collect()
}

fn karcher(mut rng: ChaCha8Rng) -> Result<Checks> {
    let mut c = Checks::new();
    let measure = CenterMeasure::Arclength;
    let mut worst_cell = 0.0f64;
    let mut equivariance = 0.0f64;
    for (model, radius) in [
        (FibrationModel::Hopf, 0.3),
        (FibrationModel::FlatT2, 0.2),
        (FibrationModel::FlatT3, 0.2),
    ] {
        for _ in 0..50 {
            let shape = random_shape(model, 32, radius, &mut rng)?;
            let center = karcher_center(model, &shape, measure)?;
            let brute = brute_center(model, &shape, measure, BRUTE_GRID)?;
            worst_cell = worst_cell.max(brute.cell_offset(model, center));
            // isometries: left multiplication on S3, translations on tori
            let (moved, expected) = if model.is_flat() {
                let a: [f64; 3] = std::array::from_fn(|_| rng.gen_range(0.0..1.0));
                let shift = |p: TotalPoint| model.canonicalize(TotalPoint([p.0[0] + a[0], p.0[1] + a[1], p.0[2] + a[2], 0.0]));
                let moved: Vec<TotalPoint> = shape.iter().map(|&p| shift(p)).collect();
                let top = model.project(shift(model.fiber_point(center, 0.0)));
                (moved, top)
            } else {
                let u = Quat::random_unit(&mut rng);
                let moved: Vec<TotalPoint> = shape.iter().map(|&p| TotalPoint((u * p.quat()).0)).collect();
                (moved, BasePoint(u.rotate(center.0)))
            };
            let got = karcher_center(model, &moved, measure)?;
            equivariance = equivariance.max(model.base_distance(got, expected));
        }
    }
    c.expect("worst offset in grid cells", worst_cell <= 1.0, format!("{worst_cell:.3} <= 1"));
    c.below("isometry equivariance", equivariance, 1e-9);
    Ok(c)
}

fn straightening(mut rng: ChaCha8Rng) -> Result<Checks> {
    let mut c = Checks::new();
    let flat = FibrationModel::FlatT2;
    let hopf = FibrationModel::Hopf;
    let flat_model = Fibering::model_fibering(flat, 32, 128)?;
    let hopf_model = Fibering::model_fibering(hopf, 64, 128)?;

    let mut fixed = 0.0f64;
    for f in [&flat_model, &hopf_model] {
        let (s, report) = straighten(f, CenterMeasure::FiberInduced)?;
        fixed = fixed.max(report.max_residual).max(s.sup_distance(f)?);
    }
    c.below("model fixed-point residual", fixed, 1e-12);

    // automorphisms: torus translations, and q -> u q exp(i phi) on S3
    let mut equivariance = 0.0f64;
    let small_flat = Fibering::model_fibering(flat, 16, 64)?;
    let small_hopf = Fibering::model_fibering(hopf, 16, 64)?;
    for k in 0..20 {
        let (model, base) = if k % 2 == 0 { (flat, &small_flat) } else { (hopf, &small_hopf) };
        let x = FieldGrid::sample(model, base.len(), 64, &RandomField::new(model, 1.0, &mut rng))?;
        let f = push_by_exp(base, &x, 0.02)?;
        let (hf, h_base): (Fibering, Box<dyn Fn(&Fibering) -> Fibering>) = if model.is_flat() {
            let (a, b) = (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
            let h = move |g: &Fibering| {
                g.map(
                    |p| TotalPoint([p.0[0] + a, p.0[1] + b, 0.0, 0.0]),
                    |y| BasePoint([(y.0[0] + a).rem_euclid(1.0), 0.0, 0.0]),
                )
            };
            (h(&f), Box::new(h))
        } else {
            let u = Quat::random_unit(&mut rng);
            let phi = rng.gen_range(0.0..2.0 * PI);
            let h = move |g: &Fibering| {
                g.map(|p| TotalPoint((u * p.quat() * Quat::exp_i(phi)).0), |y| BasePoint(u.rotate(y.0)))
            };
            (h(&f), Box::new(h))
        };
        let (s_then_h, _) = straighten(&f, CenterMeasure::FiberInduced)?;
        let (h_then_s, _) = straighten(&hf, CenterMeasure::FiberInduced)?;
        equivariance = equivariance.max(h_base(&s_then_h).sup_distance(&h_then_s)?);
    }
    c.below("automorphism equivariance", equivariance, 1e-6);

    let mut recovery = 0.0f64;
    for f in [&flat_model, &hopf_model] {
        let model = f.model;
        let x = FieldGrid::sample(model, f.len(), 128, &RandomField::new(model, 1.0, &mut rng))?;
        let pushed = push_by_exp(f, &x.fair_part(), 0.02)?;
        let (s, _) = straighten(&pushed, CenterMeasure::FiberInduced)?;
        recovery = recovery.max(s.sup_distance(f)?);
    }
    c.below("fair perturbation recovery", recovery, 1e-6);

    let small = Fibering::model_fibering(hopf, 32, 64)?;
    let x = FieldGrid::sample(hopf, 32, 64, &RandomField::new(hopf, 1.0, &mut rng))?;
    let pushed = push_by_exp(&small, &x, 0.05)?;
    let r = refine(&pushed, 6, CenterMeasure::FiberInduced)?;
    let ratio = r
        .residuals
        .windows(2)
        .filter(|w| w[0] > 1e-9)
        .map(|w| w[1] / w[0])
        .fold(0.0, f64::max);
    c.expect("refine passes", r.residuals.len() >= 2, format!("{} >= 2", r.residuals.len()));
    c.below("refine contraction ratio", ratio, 0.8);
    Ok(c)
}

fn curve_shortening(mut rng: ChaCha8Rng) -> Result<Checks> {
    let mut c = Checks::new();
    let params = FlowParams::default();

    let lines = linear_fibering([1, 2], 16, 512)?;
    let dt = params.cfl * lines[0].spacings()[0].powi(2);
    let mut stationary = 0.0f64;
    for line in &lines {
        let mut cur = line.clone();
        for _ in 0..10 {
            let next = csf_step(&cur, dt)?;
            for (a, b) in cur.points().iter().zip(next.points()) {
                stationary = stationary.max((a[0] - b[0]).hypot(a[1] - b[1]));
            }
            cur = next;
        }
    }
    let (_, trace) = flow_curves(&lines, &params)?;
    c.below("geodesic step displacement", stationary.max(trace.max_step_displacement), 1e-12);

    let r0 = 0.25;
    let mut circle = CurveState::circle(256, [0.5, 0.5], r0)?;
    let (mut t, mut circle_err) = (0.0, 0.0f64);
    for frac in [0.2, 0.4, 0.6, 0.8, 0.96] {
        let target = frac * r0 * r0 / 2.0;
        circle = evolve(&circle, &params, target - t)?.0;
        t = target;
        let n = circle.len() as f64;
        let ctr = circle.points().iter().fold([0.0, 0.0], |a, p| [a[0] + p[0] / n, a[1] + p[1] / n]);
        let r = circle.points().iter().map(|p| (p[0] - ctr[0]).hypot(p[1] - ctr[1])).sum::<f64>() / n;
        circle_err = circle_err.max(((r * r + 2.0 * t) / (r0 * r0) - 1.0).abs());
    }
    c.below("shrinking circle relative error", circle_err, 1e-2);

    let curves = perturbed_linear_fibering([1, 2], 16, 512, 0.05, &mut rng)?;
    let (_, report) = flow_fibering(&fibering_of(&curves), &params)?;
    c.below("terminal max curvature", report.trace.max_kappa, 1e-3);
    c.expect("flow time", report.trace.t <= 1.0, format!("{:.3} <= 1", report.trace.t));
    c.expect(
        "terminal core",
        report.core == Core::Slope { slope: vec![1, 2] },
        format!("{:?} (tol {:.1e}) == (1,2)", report.core, report.core_tol),
    );
    let min_gap = report.trace.min_pair_dist.unwrap_or(0.0);
    c.above("min fiber gap", min_gap, 0.0);
    Ok(c)
}

fn core_orbit(mut rng: ChaCha8Rng) -> Result<Checks> {
    let mut c = Checks::new();
    let mut direction_err = 0.0f64;
    let mut chiralities = [0usize; 2];
    let mut misses = 0;
    for model in [FibrationModel::Hopf, FibrationModel::Lens(2)] {
        let base = Fibering::model_fibering(model, 12, 32)?;
        for _ in 0..200 {
            let (q1, q2) = (Quat::random_unit(&mut rng), Quat::random_unit(&mut rng));
            let reflect = rng.gen_bool(0.5);
            let moved = base.map(
                |p| {
                    let r = q1 * p.quat() * q2.conj();
                    TotalPoint(if reflect { r.conj().0 } else { r.0 })
                },
                |y| y,
            );
            // q exp(i t) goes to (q1 q q2^-1) exp(t n), or under the reflection
            // to exp(-t n) (q2 q^-1 q1^-1), with n = q2 i q2^-1
            let n = q2.rotate([1.0, 0.0, 0.0]);
            let (expected, chirality) = if reflect { (scale3(n, -1.0), -1) } else { (n, 1) };
            match core_membership(&moved, CORE_TOL) {
                Core::GreatCircles {
                    direction,
                    chirality: got,
                } if got == chirality => {
                    direction_err = direction_err.max(norm3(sub3(direction, expected)));
                    chiralities[usize::from(got < 0)] += 1;
                }
                _ => misses += 1,
            }
        }
    }
    c.expect("unrecognized orbits", misses == 0, format!("{misses} == 0"));
    c.below("direction error", direction_err, 1e-8);
    c.expect(
        "chirality classes",
        chiralities[0] > 0 && chiralities[1] > 0,
        format!("{} right, {} left", chiralities[0], chiralities[1]),
    );
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_criterion() {
        assert!(run(9, 0).is_err());
        assert!(run(0, 0).is_err());
    }

    #[test]
    fn shapes_stay_in_their_ball() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for model in [FibrationModel::Hopf, FibrationModel::FlatT3] {
            let s = random_shape(model, 32, 0.3, &mut rng).unwrap();
            let ys: Vec<BasePoint> = s.iter().map(|p| model.project(*p)).collect();
            let spread = ys.iter().map(|y| model.base_angle(ys[0], *y)).fold(0.0, f64::max);
            assert!(spread < 0.6 + 1e-12);
        }
    }
}
