//! Circle-valued Čech cochains on fixed model covers of `S1`, `S2` and `T2`,
//! the coboundary action, Euler numbers of clutchings and the classification
//! table of oriented circle fiberings.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::circle_diffeo::{circle_distance, winding_number, Angle};
use crate::error::{Error, Result};

/// Bases for which a model cover exists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Base {
    S1,
    S2,
    T2,
}

impl fmt::Display for Base {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Base::S1 => "S1",
            Base::S2 => "S2",
            Base::T2 => "T2",
        })
    }
}

impl FromStr for Base {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "S1" => Ok(Base::S1),
            "S2" => Ok(Base::S2),
            "T2" => Ok(Base::T2),
            other => Err(Error::UnsupportedBase(other.to_string())),
        }
    }
}

/// Default number of equator samples on the `S2` cover.
pub const DEFAULT_S2_RING: usize = 64;
/// Default number of samples on the `S1` cover.
pub const DEFAULT_S1_POINTS: usize = 64;
/// Default grid side of the `T2` cover.
pub const DEFAULT_T2_GRID: usize = 16;

/// Pairwise overlap of two charts.
#[derive(Debug, Clone)]
pub struct Overlap {
    pub i: usize,
    pub j: usize,
    /// Global sample indices.
    pub points: Vec<usize>,
    pos_i: Vec<usize>,
    pos_j: Vec<usize>,
}

#[derive(Debug, Clone)]
struct Triple {
    ij: usize,
    jk: usize,
    ik: usize,
    // positions of each common sample inside the three overlaps
    pos: Vec<(usize, usize, usize)>,
}

/// A finite cover of a model base, sampled at a fixed point set.
#[derive(Debug, Clone)]
pub struct ModelCover {
    base: Base,
    /// Sample points embedded in `R^3` (circle and torus coordinates are
    /// stored as turns in the leading entries).
    points: Vec<[f64; 3]>,
    charts: Vec<Vec<usize>>,
    overlaps: Vec<Overlap>,
    triples: Vec<Triple>,
}

fn in_arc(x: f64, lo: f64) -> bool {
    // open arc (lo, lo + 3/4) modulo 1
    let d = (x - lo).rem_euclid(1.0);
    d > 0.0 && d < 0.75
}

impl ModelCover {
    /// Two arcs `(-1/8, 5/8)` and `(3/8, 9/8)` sampled at `(k + 1/2)/m`.
    pub fn s1(m: usize) -> Result<Self> {
        if m < 8 {
            return Err(Error::InvalidInput(format!("S1 cover needs at least 8 samples, got {m}")));
        }
        let points: Vec<[f64; 3]> = (0..m).map(|k| [(k as f64 + 0.5) / m as f64, 0.0, 0.0]).collect();
        let charts = [-0.125, 0.375]
            .iter()
            .map(|&lo| (0..m).filter(|&k| in_arc(points[k][0], lo)).collect())
            .collect();
        Ok(Self::assemble(Base::S1, points, charts))
    }

    /// Two closed caps meeting along the equator. Samples lie on rings at
    /// latitudes 0, ±30° and ±60° with `m` points each, plus both poles.
    pub fn s2(m: usize) -> Result<Self> {
        if m < 4 {
            return Err(Error::InvalidInput(format!("S2 cover needs at least 4 equator samples, got {m}")));
        }
        let mut points = vec![[0.0, 0.0, 0.0]];
        for lat_deg in [0.0f64, 30.0, -30.0, 60.0, -60.0] {
            let lat = lat_deg.to_radians();
            for k in 0..m {
                let phi = 2.0 * PI * k as f64 / m as f64;
                points.push([lat.cos() * phi.cos(), lat.cos() * phi.sin(), lat.sin()]);
            }
        }
        points[0] = [0.0, 0.0, 1.0];
        points.push([0.0, 0.0, -1.0]);
        // the equator ring must be the first block so the overlap is ordered by longitude
        let north = (0..points.len()).filter(|&p| points[p][2] >= -1e-12).collect::<Vec<_>>();
        let south = (0..points.len()).filter(|&p| points[p][2] <= 1e-12).collect::<Vec<_>>();
        let mut north = north;
        north.sort_by_key(|&p| if p == 0 { usize::MAX } else { p });
        Ok(Self::assemble(Base::S2, points, vec![north, south]))
    }

    /// Four squares `U_ab = (a/2 - 1/8, a/2 + 5/8) x (b/2 - 1/8, b/2 + 5/8)`
    /// on a `g x g` grid; every pair and every triple of squares meet.
    pub fn t2(g: usize) -> Result<Self> {
        if g < 8 {
            return Err(Error::InvalidInput(format!("T2 cover needs grid >= 8, got {g}")));
        }
        let mut points = Vec::with_capacity(g * g);
        for a in 0..g {
            for b in 0..g {
                points.push([(a as f64 + 0.5) / g as f64, (b as f64 + 0.5) / g as f64, 0.0]);
            }
        }
        let mut charts = Vec::new();
        for a in 0..2 {
            for b in 0..2 {
                let (lx, ly) = (a as f64 / 2.0 - 0.125, b as f64 / 2.0 - 0.125);
                charts.push(
                    (0..points.len())
                        .filter(|&p| in_arc(points[p][0], lx) && in_arc(points[p][1], ly))
                        .collect(),
                );
            }
        }
        Ok(Self::assemble(Base::T2, points, charts))
    }

    pub fn new(base: Base, resolution: usize) -> Result<Self> {
        match base {
            Base::S1 => Self::s1(resolution),
            Base::S2 => Self::s2(resolution),
            Base::T2 => Self::t2(resolution),
        }
    }

    fn assemble(base: Base, points: Vec<[f64; 3]>, charts: Vec<Vec<usize>>) -> Self {
        let position = |chart: &Vec<usize>, p: usize| chart.iter().position(|&q| q == p).expect("member");
        let mut overlaps = Vec::new();
        for i in 0..charts.len() {
            for j in i + 1..charts.len() {
                let common: Vec<usize> = charts[i].iter().copied().filter(|p| charts[j].contains(p)).collect();
                if common.is_empty() {
                    continue;
                }
                overlaps.push(Overlap {
                    i,
                    j,
                    pos_i: common.iter().map(|&p| position(&charts[i], p)).collect(),
                    pos_j: common.iter().map(|&p| position(&charts[j], p)).collect(),
                    points: common,
                });
            }
        }
        let find = |i: usize, j: usize| overlaps.iter().position(|o| o.i == i && o.j == j);
        let mut triples = Vec::new();
        for i in 0..charts.len() {
            for j in i + 1..charts.len() {
                for k in j + 1..charts.len() {
                    let (Some(ij), Some(jk), Some(ik)) = (find(i, j), find(j, k), find(i, k)) else {
                        continue;
                    };
                    let pos: Vec<(usize, usize, usize)> = overlaps[ij]
                        .points
                        .iter()
                        .enumerate()
                        .filter_map(|(a, p)| {
                            let b = overlaps[jk].points.iter().position(|q| q == p)?;
                            let c = overlaps[ik].points.iter().position(|q| q == p)?;
                            Some((a, b, c))
                        })
                        .collect();
                    if !pos.is_empty() {
                        triples.push(Triple { ij, jk, ik, pos });
                    }
                }
            }
        }
        ModelCover {
            base,
            points,
            charts,
            overlaps,
            triples,
        }
    }

    pub fn base(&self) -> Base {
        self.base
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn charts(&self) -> &[Vec<usize>] {
        &self.charts
    }

    pub fn overlaps(&self) -> &[Overlap] {
        &self.overlaps
    }

    pub fn triple_count(&self) -> usize {
        self.triples.len()
    }

    /// Circle coordinate of each overlap sample on `S1`/`S2` covers (turns).
    fn longitude(&self, p: usize) -> f64 {
        match self.base {
            Base::S2 => crate::circle_diffeo::wrap_unit(self.points[p][1].atan2(self.points[p][0]) / (2.0 * PI)),
            _ => self.points[p][0],
        }
    }
}

/// A 0-cochain: per chart, one angle per chart sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Cochain0 {
    pub values: Vec<Vec<Angle>>,
}

impl Cochain0 {
    pub fn zero(cover: &ModelCover) -> Self {
        Self::from_fn(cover, |_, _| 0.0)
    }

    /// `kappa_i(p) = f(i, p)` with `p` the embedded sample point.
    pub fn from_fn(cover: &ModelCover, f: impl Fn(usize, [f64; 3]) -> f64) -> Self {
        let values = cover
            .charts
            .iter()
            .enumerate()
            .map(|(i, chart)| chart.iter().map(|&p| Angle::new(f(i, cover.points[p]))).collect())
            .collect();
        Cochain0 { values }
    }

    /// Chart-wise sum.
    pub fn add(&self, other: &Cochain0) -> Result<Cochain0> {
        check_shape(&self.values, &other.values)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| Angle::new(x.value() + y.value())).collect())
            .collect();
        Ok(Cochain0 { values })
    }

    /// Smooth random cochain: each chart carries an independent trigonometric
    /// polynomial in the embedding coordinates.
    pub fn random(cover: &ModelCover, rng: &mut impl Rng) -> Self {
        let coeffs: Vec<[(f64, f64, f64, f64); 3]> = (0..cover.charts.len())
            .map(|_| {
                std::array::from_fn(|_| {
                    (
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(0.0..1.0),
                    )
                })
            })
            .collect();
        let base = cover.base;
        Self::from_fn(cover, |i, p| smooth_scalar(base, &coeffs[i], p))
    }
}

// A smooth real function on the base, written in the embedding coordinates.
fn smooth_scalar(base: Base, c: &[(f64, f64, f64, f64); 3], p: [f64; 3]) -> f64 {
    let (u, v, w) = match base {
        Base::S1 => ((2.0 * PI * p[0]).cos(), (2.0 * PI * p[0]).sin(), 0.0),
        Base::S2 => (p[0], p[1], p[2]),
        Base::T2 => ((2.0 * PI * p[0]).sin(), (2.0 * PI * p[1]).sin(), (2.0 * PI * (p[0] + p[1])).cos()),
    };
    c.iter()
        .enumerate()
        .map(|(k, (a, b, d, phase))| {
            let k = (k + 1) as f64;
            0.3 / k * (k * (a * u + b * v + d * w) + 2.0 * PI * phase).sin()
        })
        .sum()
}

/// A circle-valued 1-cochain: one sampled angle map per overlap.
#[derive(Debug, Clone, PartialEq)]
pub struct Cocycle1 {
    pub base: Base,
    pub values: Vec<Vec<Angle>>,
}

#[derive(Serialize, Deserialize)]
struct OverlapJson {
    i: usize,
    j: usize,
    samples: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CocycleJson {
    base: Base,
    overlaps: Vec<OverlapJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    grid: Option<usize>,
}

impl Cocycle1 {
    pub fn zero(cover: &ModelCover) -> Self {
        Self::from_fn(cover, |_, _| 0.0)
    }

    /// `tau_ij(p) = f(overlap index, p)`.
    pub fn from_fn(cover: &ModelCover, f: impl Fn(usize, [f64; 3]) -> f64) -> Self {
        let values = cover
            .overlaps
            .iter()
            .enumerate()
            .map(|(o, ov)| ov.points.iter().map(|&p| Angle::new(f(o, cover.points[p]))).collect())
            .collect();
        Cocycle1 {
            base: cover.base,
            values,
        }
    }

    /// Clutching cocycle on a one-overlap cover: `tau_01 = f(longitude)`.
    pub fn clutching(cover: &ModelCover, f: impl Fn(f64) -> f64) -> Result<Self> {
        if cover.overlaps.len() != 1 {
            return Err(Error::UnsupportedBase(format!(
                "clutching functions need a two-chart cover, {} has {} overlaps",
                cover.base,
                cover.overlaps.len()
            )));
        }
        let values = vec![cover.overlaps[0].points.iter().map(|&p| Angle::new(f(cover.longitude(p)))).collect()];
        Ok(Cocycle1 {
            base: cover.base,
            values,
        })
    }

    /// The coboundary of a random smooth cochain, hence a genuine cocycle of
    /// Euler number zero.
    pub fn random_trivial(cover: &ModelCover, rng: &mut impl Rng) -> Self {
        coboundary_act(&Self::zero(cover), &Cochain0::random(cover, rng), cover).expect("shapes agree")
    }

    /// An arbitrary smooth cochain, not in general a cocycle.
    pub fn random_cochain(cover: &ModelCover, rng: &mut impl Rng) -> Self {
        let coeffs: Vec<[(f64, f64, f64, f64); 3]> = (0..cover.overlaps.len())
            .map(|_| {
                std::array::from_fn(|_| {
                    (
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(0.0..1.0),
                    )
                })
            })
            .collect();
        let base = cover.base;
        Self::from_fn(cover, |o, p| smooth_scalar(base, &coeffs[o], p))
    }

    /// Builds the matching model cover from the sample counts in the JSON
    /// record.
    pub fn from_json(value: &serde_json::Value) -> Result<(Cocycle1, ModelCover)> {
        let raw: CocycleJson =
            serde_json::from_value(value.clone()).map_err(|e| Error::InvalidInput(e.to_string()))?;
        let first = raw
            .overlaps
            .first()
            .ok_or_else(|| Error::InvalidInput("cocycle has no overlaps".into()))?;
        let cover = match raw.base {
            Base::S1 => ModelCover::s1(2 * first.samples.len())?,
            Base::S2 => ModelCover::s2(first.samples.len())?,
            Base::T2 => ModelCover::t2(raw.grid.unwrap_or(DEFAULT_T2_GRID))?,
        };
        if raw.overlaps.len() != cover.overlaps.len() {
            return Err(Error::GridMismatch(format!(
                "{} cover has {} overlaps, got {}",
                raw.base,
                cover.overlaps.len(),
                raw.overlaps.len()
            )));
        }
        let mut values = vec![Vec::new(); cover.overlaps.len()];
        for ov in raw.overlaps {
            let o = cover
                .overlaps
                .iter()
                .position(|c| (c.i, c.j) == (ov.i, ov.j))
                .ok_or_else(|| Error::InvalidInput(format!("no overlap ({}, {}) in the {} cover", ov.i, ov.j, raw.base)))?;
            if ov.samples.len() != cover.overlaps[o].points.len() {
                return Err(Error::GridMismatch(format!(
                    "overlap ({}, {}) expects {} samples, got {}",
                    ov.i,
                    ov.j,
                    cover.overlaps[o].points.len(),
                    ov.samples.len()
                )));
            }
            values[o] = ov.samples.into_iter().map(Angle::new).collect();
        }
        Ok((
            Cocycle1 {
                base: raw.base,
                values,
            },
            cover,
        ))
    }

    pub fn to_json(&self, cover: &ModelCover) -> serde_json::Value {
        let overlaps = cover
            .overlaps
            .iter()
            .zip(&self.values)
            .map(|(o, v)| OverlapJson {
                i: o.i,
                j: o.j,
                samples: v.iter().map(|a| a.value()).collect(),
            })
            .collect();
        let grid = (self.base == Base::T2).then(|| (cover.points.len() as f64).sqrt().round() as usize);
        serde_json::to_value(CocycleJson {
            base: self.base,
            overlaps,
            grid,
        })
        .expect("plain record")
    }
}

fn check_shape(a: &[Vec<Angle>], b: &[Vec<Angle>]) -> Result<()> {
    if a.len() != b.len() || a.iter().zip(b).any(|(x, y)| x.len() != y.len()) {
        return Err(Error::GridMismatch("cochain sampling does not match the cover".into()));
    }
    Ok(())
}

fn check_cocycle(tau: &Cocycle1, cover: &ModelCover) -> Result<()> {
    let expected: Vec<usize> = cover.overlaps.iter().map(|o| o.points.len()).collect();
    let actual: Vec<usize> = tau.values.iter().map(Vec::len).collect();
    if tau.base != cover.base || expected != actual {
        return Err(Error::GridMismatch("cocycle sampling does not match the cover".into()));
    }
    Ok(())
}

fn check_cochain(kappa: &Cochain0, cover: &ModelCover) -> Result<()> {
    let expected: Vec<usize> = cover.charts.iter().map(Vec::len).collect();
    let actual: Vec<usize> = kappa.values.iter().map(Vec::len).collect();
    if expected != actual {
        return Err(Error::GridMismatch("0-cochain sampling does not match the cover".into()));
    }
    Ok(())
}

/// Largest triple-overlap defect `|tau_ij + tau_jk - tau_ik|` in the circle
/// metric; zero on covers without triple overlaps.
pub fn cocycle_check(tau: &Cocycle1, cover: &ModelCover) -> Result<f64> {
    check_cocycle(tau, cover)?;
    let mut worst: f64 = 0.0;
    for t in &cover.triples {
        for &(a, b, c) in &t.pos {
            let lhs = tau.values[t.ij][a].value() + tau.values[t.jk][b].value();
            worst = worst.max(circle_distance(lhs, tau.values[t.ik][c].value()));
        }
    }
    Ok(worst)
}

/// `tau'_ij = -kappa_i + tau_ij + kappa_j` modulo 1.
pub fn coboundary_act(tau: &Cocycle1, kappa: &Cochain0, cover: &ModelCover) -> Result<Cocycle1> {
    check_cocycle(tau, cover)?;
    check_cochain(kappa, cover)?;
    let values = cover
        .overlaps
        .iter()
        .zip(&tau.values)
        .map(|(o, t)| {
            t.iter()
                .enumerate()
                .map(|(s, a)| {
                    let ki = kappa.values[o.i][o.pos_i[s]].value();
                    let kj = kappa.values[o.j][o.pos_j[s]].value();
                    Angle::new(a.value() - ki + kj)
                })
                .collect()
        })
        .collect();
    Ok(Cocycle1 {
        base: tau.base,
        values,
    })
}

/// Sup distance between two cocycles in the circle metric.
pub fn cocycle_distance(a: &Cocycle1, b: &Cocycle1) -> Result<f64> {
    check_shape(&a.values, &b.values)?;
    Ok(a.values
        .iter()
        .zip(&b.values)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| p.distance(*q)))
        .fold(0.0, f64::max))
}

/// Whether `kappa` fixes `tau` under the coboundary action.
pub fn stabilizes(tau: &Cocycle1, kappa: &Cochain0, cover: &ModelCover, tol: f64) -> Result<bool> {
    let moved = coboundary_act(tau, kappa, cover)?;
    Ok(cocycle_distance(&moved, tau)? < tol)
}

/// Degree of the clutching function `tau_NS` along the equator.
pub fn euler_class(tau: &Cocycle1, cover: &ModelCover) -> Result<i64> {
    check_cocycle(tau, cover)?;
    if cover.base != Base::S2 {
        return Err(Error::UnsupportedBase(format!(
            "Euler class is computed on the S2 cover, got {}",
            cover.base
        )));
    }
    let mut path = tau.values[0].clone();
    path.push(path[0]);
    winding_number(&path)
}

/// One row of the classification table of oriented circle fiberings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiberingClassRecord {
    pub base: Base,
    pub euler: i64,
    pub total_space: String,
    pub core: String,
}

/// Total space and core of the oriented circle fibering with the given base
/// and Euler number.
pub fn classify(base: Base, euler: i64) -> Result<FiberingClassRecord> {
    let e = euler.unsigned_abs();
    let (total, core) = match (base, e) {
        (Base::S1, 0) => ("T2".to_string(), "Zprim2"),
        (Base::S1, _) => {
            return Err(Error::InvalidEuler {
                base: base.to_string(),
                euler,
            })
        }
        (Base::S2, 0) => ("S2xS1".to_string(), "non-finite-dimensional"),
        (Base::S2, 1 | 2) => (format!("L({e},1)"), "S2 ⊔ S2"),
        (Base::S2, _) => (format!("L({e},1)"), "S0"),
        (Base::T2, 0) => ("T3".to_string(), "Zprim3"),
        (Base::T2, _) => (format!("MT_{e}"), "S0"),
    };
    Ok(FiberingClassRecord {
        base,
        euler,
        total_space: total,
        core: core.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cover_shapes() {
        let s1 = ModelCover::s1(64).unwrap();
        assert_eq!(s1.overlaps().len(), 1);
        assert_eq!(s1.overlaps()[0].points.len(), 32);
        assert_eq!(s1.triple_count(), 0);

        let s2 = ModelCover::s2(32).unwrap();
        assert_eq!(s2.overlaps().len(), 1);
        assert_eq!(s2.overlaps()[0].points.len(), 32);
        assert_eq!(s2.charts()[0].len() + s2.charts()[1].len(), s2.points().len() + 32);

        let t2 = ModelCover::t2(16).unwrap();
        assert_eq!(t2.overlaps().len(), 6);
        assert_eq!(t2.triple_count(), 4);
        // every point lies in at least one square
        for p in 0..t2.points().len() {
            assert!(t2.charts().iter().any(|c| c.contains(&p)));
        }
    }

    #[test]
    fn equator_is_ordered_by_longitude() {
        let cover = ModelCover::s2(16).unwrap();
        let longs: Vec<f64> = cover.overlaps()[0].points.iter().map(|&p| cover.longitude(p)).collect();
        for (k, l) in longs.iter().enumerate() {
            assert!((l - k as f64 / 16.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_cocycle_has_zero_residual() {
        for base in [Base::S1, Base::S2, Base::T2] {
            let cover = ModelCover::new(base, 16).unwrap();
            assert_eq!(cocycle_check(&Cocycle1::zero(&cover), &cover).unwrap(), 0.0);
        }
    }

    #[test]
    fn random_cochain_on_torus_is_not_a_cocycle() {
        let cover = ModelCover::t2(16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let tau = Cocycle1::random_cochain(&cover, &mut rng);
        assert!(cocycle_check(&tau, &cover).unwrap() > 0.01);
        let exact = Cocycle1::random_trivial(&cover, &mut rng);
        assert!(cocycle_check(&exact, &cover).unwrap() < 1e-12);
    }

    #[test]
    fn constant_cochain_acts_trivially() {
        let cover = ModelCover::s2(32).unwrap();
        let tau = Cocycle1::clutching(&cover, |t| 2.0 * t).unwrap();
        let c = Cochain0::from_fn(&cover, |_, _| 0.37);
        assert!(stabilizes(&tau, &c, &cover, 1e-12).unwrap());
        let shifted = Cochain0::from_fn(&cover, |i, _| if i == 1 { 0.3 } else { 0.0 });
        assert!(!stabilizes(&tau, &shifted, &cover, 1e-6).unwrap());
        let moved = coboundary_act(&tau, &shifted, &cover).unwrap();
        assert!((cocycle_distance(&moved, &tau).unwrap() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn clutching_degrees() {
        let cover = ModelCover::s2(64).unwrap();
        for d in -3i64..=3 {
            let tau = Cocycle1::clutching(&cover, |t| d as f64 * t).unwrap();
            assert_eq!(euler_class(&tau, &cover).unwrap(), d);
        }
        let tau = Cocycle1::clutching(&cover, |t| 2.0 * t + 0.2 * (2.0 * PI * t).sin()).unwrap();
        assert_eq!(euler_class(&tau, &cover).unwrap(), 2);
    }

    #[test]
    fn euler_needs_fine_sampling() {
        let cover = ModelCover::s2(4).unwrap();
        let tau = Cocycle1::clutching(&cover, |t| 2.0 * t).unwrap();
        assert!(matches!(euler_class(&tau, &cover), Err(Error::UndersampledPath(_))));
    }

    #[test]
    fn mismatched_cochain_is_rejected() {
        let a = ModelCover::s2(16).unwrap();
        let b = ModelCover::s2(32).unwrap();
        let tau = Cocycle1::zero(&a);
        let kappa = Cochain0::zero(&b);
        assert!(matches!(coboundary_act(&tau, &kappa, &a), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn classification_table() {
        let row = classify(Base::S1, 0).unwrap();
        assert_eq!((row.total_space.as_str(), row.core.as_str()), ("T2", "Zprim2"));
        let row = classify(Base::S2, 2).unwrap();
        assert_eq!((row.total_space.as_str(), row.core.as_str()), ("L(2,1)", "S2 ⊔ S2"));
        let row = classify(Base::S2, 5).unwrap();
        assert_eq!((row.total_space.as_str(), row.core.as_str()), ("L(5,1)", "S0"));
        let row = classify(Base::S2, 0).unwrap();
        assert_eq!(row.core, "non-finite-dimensional");
        let row = classify(Base::T2, 0).unwrap();
        assert_eq!((row.total_space.as_str(), row.core.as_str()), ("T3", "Zprim3"));
        let row = classify(Base::T2, 3).unwrap();
        assert_eq!((row.total_space.as_str(), row.core.as_str()), ("MT_3", "S0"));
        assert!(matches!(classify(Base::S1, 1), Err(Error::InvalidEuler { .. })));
        assert!(matches!("S3".parse::<Base>(), Err(Error::UnsupportedBase(_))));
    }

    #[test]
    fn json_round_trip() {
        for base in [Base::S1, Base::S2, Base::T2] {
            let cover = ModelCover::new(base, 16).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let tau = Cocycle1::random_trivial(&cover, &mut rng);
            let (back, cover2) = Cocycle1::from_json(&tau.to_json(&cover)).unwrap();
            assert_eq!(back, tau);
            assert_eq!(cover2.points().len(), cover.points().len());
        }
    }
}
