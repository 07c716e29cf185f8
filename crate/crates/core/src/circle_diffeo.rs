//! Orientation-preserving circle diffeomorphisms through their periodic
//! displacement functions, and the heat-flow deformation retraction onto the
//! rotation subgroup.
//!
//! A diffeomorphism `f` of `R/Z` is stored through a lift `F: R -> R` with
//! `F(x + 1) = F(x) + 1`; its displacement `u(x) = F(x) - x` is 1-periodic and
//! satisfies `u'(x) > -1`. The lift is fixed up to an integer, which we
//! normalize so that the mean displacement lies in `[0, 1)`.

use std::f64::consts::PI;

use rand::Rng;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral;

/// Largest oscillation `max |u - mean(u)|` accepted for a displacement.
pub const AMPLITUDE_GUARD: f64 = 0.4;

/// Default grid size.
pub const DEFAULT_GRID: usize = 256;

/// Slack used when snapping the mean displacement into `[0, 1)`.
const MEAN_SNAP: f64 = 1e-9;

/// Point of the circle `R/Z`, measured in full turns.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Angle(f64);

impl Angle {
    pub fn new(value: f64) -> Self {
        Angle(wrap_unit(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Circle distance, at most `1/2`.
    pub fn distance(self, other: Angle) -> f64 {
        circle_distance(self.0, other.0)
    }

    /// Signed increment `d` in `[-1/2, 1/2)` with `self + d = other (mod 1)`.
    pub fn increment_to(self, other: Angle) -> f64 {
        signed_increment(self.0, other.0)
    }
}

/// Reduces `x` into `[0, 1)`.
pub fn wrap_unit(x: f64) -> f64 {
    let r = x - x.floor();
    // x.floor() can round so that r == 1.0 for tiny negative x
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Distance between two reals modulo 1.
pub fn circle_distance(a: f64, b: f64) -> f64 {
    signed_increment(a, b).abs()
}

/// Signed minimal increment from `a` to `b` modulo 1, in `[-1/2, 1/2)`.
pub fn signed_increment(a: f64, b: f64) -> f64 {
    let d = wrap_unit(b - a);
    if d >= 0.5 {
        d - 1.0
    } else {
        d
    }
}

/// Samples of a smooth 1-periodic function at `x_k = k/n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PeriodicSamples {
    values: Vec<f64>,
}

impl TryFrom<Vec<f64>> for PeriodicSamples {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        PeriodicSamples::new(values)
    }
}

impl From<PeriodicSamples> for Vec<f64> {
    fn from(s: PeriodicSamples) -> Self {
        s.values
    }
}

impl PeriodicSamples {
    /// Grid size must be a power of two, at least 16.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        if n < 16 || !n.is_power_of_two() {
            return Err(Error::GridMismatch(format!(
                "grid size {n} must be a power of two >= 16"
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite sample".into()));
        }
        Ok(PeriodicSamples { values })
    }

    pub fn from_fn(n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new((0..n).map(|k| f(k as f64 / n as f64)).collect())
    }

    pub fn constant(n: usize, c: f64) -> Result<Self> {
        Self::from_fn(n, |_| c)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Grid node `x_k`.
    pub fn node(&self, k: usize) -> f64 {
        k as f64 / self.len() as f64
    }

    /// Trapezoid quadrature of the mean, exact for the zero mode.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `max |u - mean(u)|`.
    pub fn oscillation(&self) -> f64 {
        let m = self.mean();
        self.values.iter().map(|v| (v - m).abs()).fold(0.0, f64::max)
    }

    pub fn sup_distance(&self, other: &PeriodicSamples) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> PeriodicSamples {
        PeriodicSamples {
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Spectral derivative at the grid nodes; the Nyquist mode is dropped.
    pub fn derivative(&self) -> PeriodicSamples {
        let n = self.len();
        let values = spectral::filter(&self.values, |k| {
            if 2.0 * k.abs() == n as f64 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, 2.0 * PI * k)
            }
        });
        PeriodicSamples { values }
    }

    /// Samples of `x -> u(x - c)`, exact for the trigonometric interpolant.
    pub fn translate(&self, c: f64) -> PeriodicSamples {
        let values =
            spectral::filter(&self.values, |k| Complex64::from_polar(1.0, -2.0 * PI * k * c));
        PeriodicSamples { values }
    }

    /// Periodic cubic spline through the samples.
    pub fn spline(&self) -> PeriodicSpline {
        PeriodicSpline::new(self)
    }
}

/// Interpolating periodic cubic spline on a uniform grid.
///
/// The second-derivative coefficients solve the cyclic system
/// `M[k-1] + 4 M[k] + M[k+1] = 6 (u[k+1] - 2 u[k] + u[k-1]) / h^2`, which is
/// diagonal in the Fourier basis.
#[derive(Debug, Clone)]
pub struct PeriodicSpline {
    values: Vec<f64>,
    second: Vec<f64>,
}

impl PeriodicSpline {
    fn new(samples: &PeriodicSamples) -> Self {
        let n = samples.len();
        let h = 1.0 / n as f64;
        let second = spectral::filter(&samples.values, |k| {
            let c = (2.0 * PI * k / n as f64).cos();
            Complex64::new(6.0 * (2.0 * c - 2.0) / (h * h * (4.0 + 2.0 * c)), 0.0)
        });
        PeriodicSpline {
            values: samples.values.clone(),
            second,
        }
    }

    fn locate(&self, x: f64) -> (usize, usize, f64, f64) {
        let n = self.values.len();
        let h = 1.0 / n as f64;
        let t = wrap_unit(x) * n as f64;
        let k = (t.floor() as usize).min(n - 1);
        let a = (t - k as f64) * h; // x - x_k
        let b = h - a; // x_{k+1} - x
        (k, (k + 1) % n, a, b)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.values.len();
        let h = 1.0 / n as f64;
        let (k, k1, a, b) = self.locate(x);
        let (mk, mk1) = (self.second[k], self.second[k1]);
        mk * b * b * b / (6.0 * h)
            + mk1 * a * a * a / (6.0 * h)
            + (self.values[k] - mk * h * h / 6.0) * b / h
            + (self.values[k1] - mk1 * h * h / 6.0) * a / h
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let n = self.values.len();
        let h = 1.0 / n as f64;
        let (k, k1, a, b) = self.locate(x);
        let (mk, mk1) = (self.second[k], self.second[k1]);
        -mk * b * b / (2.0 * h) + mk1 * a * a / (2.0 * h) + (self.values[k1] - self.values[k]) / h
            - (mk1 - mk) * h / 6.0
    }
}

/// Multiplies Fourier mode `k` by `exp(-4 pi^2 k^2 s)`: the exact solution
/// operator of `u_t = u_xx` on the grid.
///
/// # Panics
/// If `s` is negative or not finite.
pub fn heat_step(u: &PeriodicSamples, s: f64) -> PeriodicSamples {
    assert!(s.is_finite() && s >= 0.0, "heat time must be finite and >= 0");
    if s == 0.0 {
        return u.clone();
    }
    let values = spectral::filter(&u.values, |k| {
        Complex64::new((-4.0 * PI * PI * k * k * s).exp(), 0.0)
    });
    PeriodicSamples { values }
}

/// Orientation-preserving diffeomorphism of the circle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircleDiffeo {
    disp: PeriodicSamples,
}

#[derive(Serialize, Deserialize)]
struct CircleDiffeoJson {
    n: usize,
    disp: Vec<f64>,
}

impl CircleDiffeo {
    /// Validates the derivative bound and the amplitude guard, then snaps the
    /// mean displacement into `[0, 1)`.
    pub fn from_displacement(disp: PeriodicSamples) -> Result<Self> {
        let min_derivative = disp.derivative().min();
        if min_derivative <= -1.0 {
            return Err(Error::OrientationViolation { min_derivative });
        }
        let amplitude = disp.oscillation();
        if amplitude > AMPLITUDE_GUARD {
            return Err(Error::AmplitudeExceeded {
                amplitude,
                guard: AMPLITUDE_GUARD,
            });
        }
        let shift = (disp.mean() + MEAN_SNAP).floor();
        let disp = if shift != 0.0 {
            disp.map(|v| v - shift)
        } else {
            disp
        };
        Ok(CircleDiffeo { disp })
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::rotation(n, Angle::new(0.0))
    }

    pub fn rotation(n: usize, theta: Angle) -> Result<Self> {
        Self::from_displacement(PeriodicSamples::constant(n, theta.value())?)
    }

    /// Random smooth diffeomorphism: a uniform mean plus four Fourier modes,
    /// scaled to oscillation `amplitude` and derivative at least `-0.9`.
    pub fn random(n: usize, amplitude: f64, rng: &mut impl Rng) -> Result<Self> {
        let mean = rng.gen_range(0.0..1.0);
        let modes: Vec<(f64, f64)> = (1..=4).map(|k| (rng.gen_range(-1.0..1.0) / k as f64, rng.gen_range(0.0..1.0))).collect();
        let wave = PeriodicSamples::from_fn(n, |x| {
            modes
                .iter()
                .enumerate()
                .map(|(k, (a, ph))| a * (2.0 * PI * ((k + 1) as f64 * x + ph)).sin())
                .sum()
        })?;
        let wave = wave.map(|v| v - wave.mean());
        let osc = wave.oscillation();
        let slope = -wave.derivative().min();
        let scale = if osc > 0.0 { amplitude / osc } else { 0.0 };
        let scale = if slope * scale > 0.9 { 0.9 / slope } else { scale };
        Self::from_displacement(wave.map(|v| mean + scale * v))
    }

    pub fn displacement(&self) -> &PeriodicSamples {
        &self.disp
    }

    pub fn grid_size(&self) -> usize {
        self.disp.len()
    }

    /// Discrete derivative `u'(x_k)` of the displacement.
    pub fn min_derivative(&self) -> f64 {
        self.disp.derivative().min()
    }

    /// Lift `F(x) = x + u(x)` evaluated anywhere on the real line.
    pub fn eval(&self, x: f64) -> f64 {
        x + self.disp.spline().eval(x)
    }

    pub fn eval_angle(&self, a: Angle) -> Angle {
        Angle::new(self.eval(a.value()))
    }

    /// `Some(theta)` when the displacement is constant to within `tol`.
    pub fn as_rotation(&self, tol: f64) -> Option<Angle> {
        (self.disp.oscillation() <= tol).then(|| Angle::new(self.disp.mean()))
    }

    /// Sup-norm distance between displacements, measured modulo 1.
    pub fn distance(&self, other: &CircleDiffeo) -> Result<f64> {
        check_grids(self, other)?;
        Ok(self
            .disp
            .values()
            .iter()
            .zip(other.disp.values())
            .map(|(a, b)| circle_distance(*a, *b))
            .fold(0.0, f64::max))
    }

    /// Conjugation `rho o f o rho^{-1}` by the rotation `rho(x) = x + c`.
    pub fn conjugate_by_rotation(&self, c: f64) -> Result<CircleDiffeo> {
        CircleDiffeo::from_displacement(self.disp.translate(c))
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(CircleDiffeoJson {
            n: self.grid_size(),
            disp: self.disp.values().to_vec(),
        })
        .expect("plain numeric record")
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let raw: CircleDiffeoJson = serde_json::from_value(value.clone())
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
        if raw.n != raw.disp.len() {
            return Err(Error::GridMismatch(format!(
                "n = {} but {} samples given",
                raw.n,
                raw.disp.len()
            )));
        }
        Self::from_displacement(PeriodicSamples::new(raw.disp)?)
    }
}

fn check_grids(f: &CircleDiffeo, g: &CircleDiffeo) -> Result<()> {
    if f.grid_size() != g.grid_size() {
        return Err(Error::GridMismatch(format!(
            "grid sizes {} and {} differ",
            f.grid_size(),
            g.grid_size()
        )));
    }
    Ok(())
}

/// `f o g`, resampled on the common grid.
pub fn compose(f: &CircleDiffeo, g: &CircleDiffeo) -> Result<CircleDiffeo> {
    check_grids(f, g)?;
    let sf = f.disp.spline();
    let n = f.grid_size();
    let values = (0..n)
        .map(|k| {
            let x = k as f64 / n as f64;
            let gx = x + g.disp.values[k];
            g.disp.values[k] + sf.eval(gx)
        })
        .collect();
    CircleDiffeo::from_displacement(PeriodicSamples { values })
}

/// Inverse diffeomorphism by safeguarded Newton iteration on `x + u(x) = y_k`.
pub fn invert(f: &CircleDiffeo) -> Result<CircleDiffeo> {
    let spline = f.disp.spline();
    let n = f.grid_size();
    let (lo_u, hi_u) = (f.disp.min(), f.disp.max());
    let slack = 0.05 * (hi_u - lo_u) + 1e-6;
    let lift = |x: f64| x + spline.eval(x);

    let mut values = Vec::with_capacity(n);
    for k in 0..n {
        let y = k as f64 / n as f64;
        let mut lo = y - hi_u - slack;
        let mut hi = y - lo_u + slack;
        while lift(lo) > y {
            lo -= slack;
        }
        while lift(hi) < y {
            hi += slack;
        }
        let mut x = 0.5 * (lo + hi);
        for _ in 0..200 {
            let r = lift(x) - y;
            if r.abs() < 1e-15 {
                break;
            }
            if r > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let d = 1.0 + spline.derivative(x);
            let newton = x - r / d;
            x = if d > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo < 1e-15 {
                break;
            }
        }
        values.push(x - y);
    }
    CircleDiffeo::from_displacement(PeriodicSamples { values })
}

/// Heat time reached at retraction parameter `t`.
pub fn heat_time(t: f64) -> f64 {
    t / (1.0 - t)
}

/// The deformation retraction `H_t` of the diffeomorphism group onto rotations:
/// conjugates the heat flow through the displacement map. `H_0 = id` and
/// `H_1(f)` is the rotation by the mean displacement.
pub fn retract(f: &CircleDiffeo, t: f64) -> Result<CircleDiffeo> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidInput(format!("retraction time {t} outside [0, 1]")));
    }
    let disp = if t == 0.0 {
        return Ok(f.clone());
    } else if t == 1.0 {
        PeriodicSamples::constant(f.grid_size(), f.disp.mean())?
    } else {
        heat_step(&f.disp, heat_time(t))
    };
    CircleDiffeo::from_displacement(disp)
}

/// Degree of a closed sampled loop in the circle: the sum of signed minimal
/// increments, which must round to an integer within `1/4`.
pub fn winding_number(path: &[Angle]) -> Result<i64> {
    let mut total = 0.0;
    for (i, w) in path.windows(2).enumerate() {
        let d = w[0].increment_to(w[1]);
        if w[0].distance(w[1]) >= 0.5 - 1e-12 {
            return Err(Error::UndersampledPath(format!(
                "gap {} between samples {} and {}",
                d.abs(),
                i,
                i + 1
            )));
        }
        total += d;
    }
    let rounded = total.round();
    if (total - rounded).abs() >= 0.25 {
        return Err(Error::UndersampledPath(format!(
            "total increment {total} is not close to an integer"
        )));
    }
    Ok(rounded as i64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(n: usize, amp: f64) -> CircleDiffeo {
        CircleDiffeo::from_displacement(
            PeriodicSamples::from_fn(n, |x| amp * (2.0 * PI * x).sin()).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn angle_arithmetic_is_modular() {
        assert_eq!(Angle::new(1.25).value(), 0.25);
        assert_eq!(Angle::new(-0.25).value(), 0.75);
        assert!((Angle::new(0.95).distance(Angle::new(0.05)) - 0.1).abs() < 1e-15);
        assert!(Angle::new(-1e-18).value() < 1.0);
    }

    #[test]
    fn grid_size_must_be_power_of_two() {
        assert!(matches!(
            PeriodicSamples::new(vec![0.0; 100]),
            Err(Error::GridMismatch(_))
        ));
        assert!(PeriodicSamples::new(vec![0.0; 8]).is_err());
        assert!(PeriodicSamples::new(vec![0.0; 16]).is_ok());
    }

    #[test]
    fn rotations_add() {
        let a = CircleDiffeo::rotation(256, Angle::new(0.25)).unwrap();
        let b = CircleDiffeo::rotation(256, Angle::new(0.5)).unwrap();
        let c = compose(&a, &b).unwrap();
        let theta = c.as_rotation(1e-14).unwrap();
        assert!(theta.distance(Angle::new(0.75)) < 1e-14);
        let d = compose(&c, &b).unwrap();
        assert!(d.as_rotation(1e-14).unwrap().distance(Angle::new(0.25)) < 1e-14);
    }

    #[test]
    fn inverse_of_rotation() {
        let r = CircleDiffeo::rotation(64, Angle::new(0.3)).unwrap();
        let inv = invert(&r).unwrap();
        let theta = inv.as_rotation(1e-12).unwrap();
        assert!(theta.distance(Angle::new(0.7)) < 1e-12);
        let id = CircleDiffeo::identity(64).unwrap();
        assert!(invert(&id).unwrap().distance(&id).unwrap() < 1e-15);
    }

    #[test]
    fn inverse_round_trip() {
        let f = sine(256, 0.1);
        let g = invert(&f).unwrap();
        let id = CircleDiffeo::identity(256).unwrap();
        assert!(compose(&f, &g).unwrap().distance(&id).unwrap() < 1e-7);
        assert!(compose(&g, &f).unwrap().distance(&id).unwrap() < 1e-7);
    }

    #[test]
    fn orientation_guard() {
        // u'(x) = 0.2 * 2 pi cos(2 pi x) reaches -1.257
        let bad = PeriodicSamples::from_fn(64, |x| 0.2 * (2.0 * PI * x).sin()).unwrap();
        assert!(matches!(
            CircleDiffeo::from_displacement(bad),
            Err(Error::OrientationViolation { .. })
        ));
    }

    #[test]
    fn amplitude_guard() {
        // Fejer-smoothed sawtooth: derivative stays above -0.98 while the
        // oscillation is about 0.44.
        let k_max = 64;
        let saw = PeriodicSamples::from_fn(512, |x| {
            (1..=k_max)
                .map(|k| {
                    let k = k as f64;
                    0.98 * (1.0 - k / (k_max as f64 + 1.0)) * (2.0 * PI * k * x).sin() / (PI * k)
                })
                .sum()
        })
        .unwrap();
        assert!(saw.derivative().min() > -1.0);
        assert!(matches!(
            CircleDiffeo::from_displacement(saw.clone()),
            Err(Error::AmplitudeExceeded { .. })
        ));
        assert!(CircleDiffeo::from_displacement(saw.map(|v| 0.8 * v)).is_ok());
    }

    #[test]
    fn grid_mismatch_is_reported() {
        let f = CircleDiffeo::identity(64).unwrap();
        let g = CircleDiffeo::identity(128).unwrap();
        assert!(matches!(compose(&f, &g), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn heat_single_mode_decay() {
        let n = 256;
        let u = PeriodicSamples::from_fn(n, |x| (2.0 * PI * x).sin()).unwrap();
        for s in [0.001, 0.01, 0.1] {
            let v = heat_step(&u, s);
            let decay = (-4.0 * PI * PI * s).exp();
            for k in 0..n {
                let exact = decay * (2.0 * PI * u.node(k)).sin();
                assert!((v.values()[k] - exact).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn heat_fixes_constants() {
        let u = PeriodicSamples::constant(32, 0.37).unwrap();
        let v = heat_step(&u, 3.0);
        assert!(u.sup_distance(&v) < 1e-15);
    }

    #[test]
    fn retract_endpoints() {
        let f = sine(256, 0.1);
        assert_eq!(retract(&f, 0.0).unwrap(), f);
        let end = retract(&f, 1.0).unwrap();
        assert!(end.as_rotation(1e-15).unwrap().distance(Angle::new(0.0)) < 1e-15);

        let g = CircleDiffeo::from_displacement(
            PeriodicSamples::from_fn(256, |x| 0.2 + 0.05 * (2.0 * PI * x).cos()).unwrap(),
        )
        .unwrap();
        let end = retract(&g, 1.0).unwrap();
        assert!(end.as_rotation(1e-15).unwrap().distance(Angle::new(0.2)) < 1e-14);
    }

    #[test]
    fn retract_fixes_rotations() {
        let r = CircleDiffeo::rotation(128, Angle::new(0.61)).unwrap();
        for i in 0..=10 {
            let t = i as f64 / 10.0;
            assert!(retract(&r, t).unwrap().distance(&r).unwrap() < 1e-14);
        }
    }

    #[test]
    fn retract_rejects_bad_time() {
        let r = CircleDiffeo::identity(16).unwrap();
        assert!(retract(&r, 1.5).is_err());
        assert!(retract(&r, -0.1).is_err());
    }

    #[test]
    fn winding_examples() {
        let constant = vec![Angle::new(0.3); 10];
        assert_eq!(winding_number(&constant).unwrap(), 0);
        let n = 60;
        let wrap: Vec<Angle> = (0..=n).map(|k| Angle::new(3.0 * k as f64 / n as f64)).collect();
        assert_eq!(winding_number(&wrap).unwrap(), 3);
        let backward: Vec<Angle> = wrap.iter().rev().copied().collect();
        assert_eq!(winding_number(&backward).unwrap(), -3);
    }

    #[test]
    fn winding_rejects_large_gaps() {
        let path = [Angle::new(0.0), Angle::new(0.5), Angle::new(0.0)];
        assert!(matches!(winding_number(&path), Err(Error::UndersampledPath(_))));
    }

    #[test]
    fn spline_reproduces_trigonometric_data() {
        let n = 256;
        let u = PeriodicSamples::from_fn(n, |x| 0.05 * (2.0 * PI * x).sin()).unwrap();
        let s = u.spline();
        for i in 0..1000 {
            let x = (i as f64 + 0.37) / 1000.0;
            assert!((s.eval(x) - 0.05 * (2.0 * PI * x).sin()).abs() < 1e-9);
            let d = 0.05 * 2.0 * PI * (2.0 * PI * x).cos();
            assert!((s.derivative(x) - d).abs() < 1e-5);
        }
    }

    #[test]
    fn json_round_trip() {
        let f = sine(32, 0.05);
        let back = CircleDiffeo::from_json(&f.to_json()).unwrap();
        assert_eq!(back, f);
        let bad = serde_json::json!({"n": 16, "disp": vec![0.0; 32]});
        assert!(CircleDiffeo::from_json(&bad).is_err());
    }
}
