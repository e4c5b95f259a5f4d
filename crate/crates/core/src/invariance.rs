//! Projective fiber measures and numerical su / su-c invariance defects.

use std::f64::consts::PI;

use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::base::{BaseMap, SuspensionModel, SuspensionPoint};
use crate::cocycle::CocycleField;
use crate::error::{Error, Result};
use crate::holonomy::{leaf_holonomy, loop_iterate, HomoclinicLoop, Side};
use crate::linalg::{max_abs, Mat, Vector};
use crate::lyapunov::{integrated_exponent, sample_std, ExponentEstimate};
use crate::rng;
use crate::symplectic::{act_raw, ProjectivePoint, SymplecticMatrix};

/// Tolerance on the total mass of a fiber measure.
pub const MASS_TOL: f64 = 1e-12;
/// Random 2-planes used by the sliced distance.
pub const SLICES: usize = 32;
/// Bootstrap resamples for defect standard errors.
pub const BOOTSTRAP: usize = 200;
const SLICE_SEED: u64 = 0x5eed_51ce;

/// Weighted atom cloud on `ℝP^{2d−1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiberMeasure {
    atoms: Vec<(ProjectivePoint, f64)>,
}

impl FiberMeasure {
    pub fn new(atoms: Vec<(ProjectivePoint, f64)>) -> Result<Self> {
        let Some((first, _)) = atoms.first() else {
            return Err(Error::InvalidParameter {
                name: "atoms",
                reason: "empty measure".into(),
            });
        };
        let dim = first.dim();
        if atoms.iter().any(|(p, _)| p.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: atoms.iter().map(|(p, _)| p.dim()).find(|&k| k != dim).unwrap(),
            });
        }
        if atoms.iter().any(|(_, w)| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidParameter {
                name: "weight",
                reason: "weights must be positive".into(),
            });
        }
        let total: f64 = atoms.iter().map(|(_, w)| w).sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidParameter {
                name: "weight",
                reason: format!("total mass {total}"),
            });
        }
        Ok(Self { atoms })
    }

    /// Equal weights on the given points.
    pub fn uniform(points: Vec<ProjectivePoint>) -> Result<Self> {
        let w = 1.0 / points.len() as f64;
        Self::new(points.into_iter().map(|p| (p, w)).collect())
    }

    pub fn dirac(p: ProjectivePoint) -> Self {
        Self {
            atoms: vec![(p, 1.0)],
        }
    }

    pub fn atoms(&self) -> &[(ProjectivePoint, f64)] {
        &self.atoms
    }

    pub fn n_atoms(&self) -> usize {
        self.atoms.len()
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|(_, w)| w).sum()
    }

    /// Dimension of the ambient vector space (`2d`).
    pub fn dim(&self) -> usize {
        self.atoms[0].0.dim()
    }
}

/// `B_* m`: atoms moved by the projective action, weights unchanged.
pub fn push_measure(b: &SymplecticMatrix, m: &FiberMeasure) -> FiberMeasure {
    push_raw(b.entries(), m)
}

fn push_raw(b: &Mat, m: &FiberMeasure) -> FiberMeasure {
    FiberMeasure {
        atoms: m.atoms.iter().map(|(p, w)| (act_raw(b, p), *w)).collect(),
    }
}

/// 1-Wasserstein distance for the ground metric `min(∠, π − ∠)`: exact on
/// `ℝP¹`, sliced over random 2-planes in higher dimension.
pub fn projective_distance(m1: &FiberMeasure, m2: &FiberMeasure) -> Result<f64> {
    if m1.dim() != m2.dim() {
        return Err(Error::DimensionMismatch {
            expected: m1.dim(),
            got: m2.dim(),
        });
    }
    if m1.dim() == 2 {
        let a: Vec<(f64, f64)> = m1.atoms.iter().map(|(p, w)| (p.angle(), *w)).collect();
        let b: Vec<(f64, f64)> = m2.atoms.iter().map(|(p, w)| (p.angle(), *w)).collect();
        Ok(circle_w1(&a, &b))
    } else {
        sliced_distance(m1, m2, SLICES, SLICE_SEED)
    }
}

/// Mean over `n_slices` random 2-planes of the exact `ℝP¹` distance between
/// the projected measures.
pub fn sliced_distance(m1: &FiberMeasure, m2: &FiberMeasure, n_slices: usize, seed: u64) -> Result<f64> {
    let dim = m1.dim();
    if dim != m2.dim() {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: m2.dim(),
        });
    }
    let mut g = rng::stream(seed, 0);
    let mut total = 0.0;
    for _ in 0..n_slices {
        let u = gaussian(&mut g, dim).normalize();
        let mut v = gaussian(&mut g, dim);
        v -= &u * u.dot(&v);
        let v = v.normalize();
        let project = |m: &FiberMeasure| -> Vec<(f64, f64)> {
            m.atoms
                .iter()
                .map(|(p, w)| {
                    let x = p.vector().dot(&u);
                    let y = p.vector().dot(&v);
                    (y.atan2(x).rem_euclid(PI), *w)
                })
                .collect()
        };
        total += circle_w1(&project(m1), &project(m2));
    }
    Ok(total / n_slices as f64)
}

fn gaussian(g: &mut rng::Rng, dim: usize) -> Vector {
    Vector::from_iterator(dim, (0..dim).map(|_| g.sample::<f64, _>(StandardNormal)))
}

/// Exact W1 on the circle `[0, π)`: `min_c ∫ |F₁ − F₂ − c|`, attained at a
/// weighted median of `F₁ − F₂`. Evaluated in both argument orders so the
/// result is symmetric bit for bit.
fn circle_w1(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    circle_w1_ordered(a, b).min(circle_w1_ordered(b, a))
}

fn circle_w1_ordered(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let mut events: Vec<(f64, f64)> = a
        .iter()
        .copied()
        .chain(b.iter().map(|&(x, w)| (x, -w)))
        .collect();
    events.sort_by(|p, q| p.0.total_cmp(&q.0).then(q.1.total_cmp(&p.1)));
    let mut segments = Vec::with_capacity(events.len() + 1);
    let mut g = 0.0;
    let mut prev = 0.0;
    for (x, w) in events {
        if x > prev {
            segments.push((g, x - prev));
        }
        g += w;
        prev = x;
    }
    if PI > prev {
        segments.push((g, PI - prev));
    }
    segments.sort_by(|p, q| p.0.total_cmp(&q.0));
    let half = 0.5 * segments.iter().map(|s| s.1).sum::<f64>();
    let mut acc = 0.0;
    let mut c = 0.0;
    for &(g, len) in &segments {
        acc += len;
        if acc >= half {
            c = g;
            break;
        }
    }
    segments.iter().map(|&(g, len)| len * (g - c).abs()).sum()
}

/// Initial atom cloud: stratified angles on `ℝP¹`, Gaussian directions
/// otherwise.
fn initial_cloud(dim: usize, n_atoms: usize, g: &mut rng::Rng) -> Vec<Vector> {
    if dim == 2 {
        (0..n_atoms)
            .map(|i| {
                let phi = PI * (i as f64 + g.gen::<f64>()) / n_atoms as f64;
                Vector::from_vec(vec![phi.cos(), phi.sin()])
            })
            .collect()
    } else {
        (0..n_atoms)
            .map(|_| loop {
                let v = gaussian(g, dim);
                if v.norm() > 1e-8 {
                    break v;
                }
            })
            .collect()
    }
}

/// Backward-orbit estimate of `m_x` for an invariant projective measure
/// projecting to the base measure, one per point in the order given.
///
/// Each atom starts uniformly at `f^{−k}(x)` and is pushed by `A^k`, with its
/// own `k` drawn from `[n_transient/2, n_transient]`; averaging over `k`
/// removes the phase that a plain fixed-`k` push keeps for elliptic
/// products.
pub fn estimate_fiber_measures(
    a: &CocycleField,
    points: &[SuspensionPoint],
    n_transient: usize,
    n_atoms: usize,
    seed: u64,
) -> Result<Vec<FiberMeasure>> {
    estimate_fiber_measures_over(a, a.model(), points, n_transient, n_atoms, seed)
}

pub fn estimate_fiber_measures_over<B: BaseMap + ?Sized>(
    a: &CocycleField,
    base: &B,
    points: &[SuspensionPoint],
    n_transient: usize,
    n_atoms: usize,
    seed: u64,
) -> Result<Vec<FiberMeasure>> {
    if n_atoms == 0 {
        return Err(Error::InvalidParameter {
            name: "n_atoms",
            reason: "need at least one atom".into(),
        });
    }
    points
        .par_iter()
        .enumerate()
        .map(|(i, p)| estimate_one(a, base, p, n_transient, n_atoms, &mut rng::stream(seed, i as u64)))
        .collect()
}

fn estimate_one<B: BaseMap + ?Sized>(
    a: &CocycleField,
    base: &B,
    p: &SuspensionPoint,
    n: usize,
    n_atoms: usize,
    g: &mut rng::Rng,
) -> Result<FiberMeasure> {
    let dim = 2 * a.d();
    let cloud = initial_cloud(dim, n_atoms, g);
    let lo = n.div_ceil(2);
    let mut order: Vec<(usize, usize)> = (0..n_atoms)
        .map(|i| (if n == 0 { 0 } else { g.gen_range(lo..=n) }, i))
        .collect();
    order.sort_unstable();
    let mut pushed: Vec<Option<Vector>> = vec![None; n_atoms];
    // prefix products A(y₁)⋯A(y_k) along the backward orbit y_k = f^{−k}(p)
    let mut prod = Mat::identity(dim, dim);
    let mut y = *p;
    let mut k = 0;
    for (target, i) in order {
        while k < target {
            y = base.backward(&y);
            prod *= a.evaluate_raw(&y);
            let s = max_abs(&prod);
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::NonFinite { step: k });
            }
            prod /= s;
            k += 1;
        }
        pushed[i] = Some(&prod * &cloud[i]);
    }
    let w = 1.0 / n_atoms as f64;
    let atoms = pushed
        .into_iter()
        .map(|v| ProjectivePoint::new(v.expect("every atom pushed")).map(|p| (p, w)))
        .collect::<Result<Vec<_>>>()?;
    Ok(FiberMeasure { atoms })
}

/// Two points on a common strong leaf: `q = p + offset·v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeafPair {
    pub p: SuspensionPoint,
    pub offset: f64,
    pub side: Side,
}

impl LeafPair {
    pub fn q(&self, model: &SuspensionModel) -> SuspensionPoint {
        let v = match self.side {
            Side::Stable => model.map().stable_direction(),
            Side::Unstable => model.map().unstable_direction(),
        };
        model.offset_along(&self.p, v, self.offset)
    }
}

/// `n` pairs from volume, sides alternating, `|offset|` uniform in
/// `[max_offset/10, max_offset]` with a random sign.
pub fn sample_leaf_pairs(model: &SuspensionModel, n: usize, max_offset: f64, seed: u64) -> Vec<LeafPair> {
    let points = model.volume_sample(n, rng::child_seed(seed, 0));
    let mut g = rng::stream(rng::child_seed(seed, 1), 0);
    points
        .into_iter()
        .enumerate()
        .map(|(i, p)| {
            let size = g.gen_range(0.1 * max_offset..=max_offset);
            let sign = if g.gen::<bool>() { 1.0 } else { -1.0 };
            LeafPair {
                p,
                offset: sign * size,
                side: if i % 2 == 0 { Side::Stable } else { Side::Unstable },
            }
        })
        .collect()
}

/// Fiber measures at both ends of each transport, plus an independent
/// re-estimate at the target that calibrates the atom-count noise.
#[derive(Debug, Clone, PartialEq)]
pub struct PairMeasures {
    pub source: Vec<FiberMeasure>,
    pub target: Vec<FiberMeasure>,
    pub control: Vec<FiberMeasure>,
}

impl PairMeasures {
    pub fn estimate<B: BaseMap + ?Sized>(
        a: &CocycleField,
        base: &B,
        sources: &[SuspensionPoint],
        targets: &[SuspensionPoint],
        n_transient: usize,
        n_atoms: usize,
        seed: u64,
    ) -> Result<Self> {
        let est = |pts: &[SuspensionPoint], tag| {
            estimate_fiber_measures_over(a, base, pts, n_transient, n_atoms, rng::child_seed(seed, tag))
        };
        let source = est(sources, 0)?;
        // a fiber has one estimate: targets that coincide with their source
        // (loops with ω = 0, j = 0) reuse it
        let target = est(targets, 1)?
            .into_iter()
            .zip(sources.iter().zip(targets))
            .zip(&source)
            .map(|((m, (p, q)), own)| if p == q { own.clone() } else { m })
            .collect();
        Ok(Self {
            source,
            target,
            control: est(targets, 2)?,
        })
    }

    pub fn len(&self) -> usize {
        self.source.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideDefect {
    pub side: Side,
    pub mean_defect: f64,
    pub bootstrap_se: f64,
    pub n_pairs: usize,
}

/// Transport defect: per pair `W(B_* m_src, m_tgt) − W(m'_tgt, m_tgt)`, the
/// second term being the distance between two independent estimates of the
/// same fiber. The mean of the corrected values is reported clamped at 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefectReport {
    pub mean_defect: f64,
    /// Unclamped mean of the corrected per-pair values.
    pub raw_mean: f64,
    pub bootstrap_se: f64,
    pub n_pairs: usize,
    pub transport_metric: String,
    /// Mean raw transport distance before the noise correction.
    pub mean_transport: f64,
    pub mean_noise: f64,
    pub per_pair: Vec<f64>,
    pub sides: Vec<SideDefect>,
}

fn metric_name(dim: usize) -> String {
    if dim == 2 {
        "w1-rp1-exact".into()
    } else {
        format!("w1-sliced-{SLICES}")
    }
}

/// Standard error of the mean by bootstrap over the values.
pub fn bootstrap_se(values: &[f64], resamples: usize, seed: u64) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let means: Vec<f64> = (0..resamples)
        .into_par_iter()
        .map(|b| {
            let mut g = rng::stream(seed, b as u64);
            (0..n).map(|_| values[g.gen_range(0..n)]).sum::<f64>() / n as f64
        })
        .collect();
    sample_std(&means)
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Defect of transporting `source` measures by `maps` onto `target`.
pub fn transport_defect(
    maps: &[SymplecticMatrix],
    measures: &PairMeasures,
    sides: Option<&[Side]>,
    seed: u64,
) -> Result<DefectReport> {
    let n = measures.len();
    if maps.len() != n || measures.target.len() != n || measures.control.len() != n {
        return Err(Error::InvalidParameter {
            name: "measures",
            reason: "one map and three measures per pair".into(),
        });
    }
    if n == 0 {
        return Err(Error::InvalidParameter {
            name: "pairs",
            reason: "no pairs".into(),
        });
    }
    let rows: Vec<(f64, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let moved = push_measure(&maps[i], &measures.source[i]);
            let d = projective_distance(&moved, &measures.target[i])?;
            let noise = projective_distance(&measures.control[i], &measures.target[i])?;
            Ok((d, noise))
        })
        .collect::<Result<_>>()?;
    let per_pair: Vec<f64> = rows.iter().map(|(d, e)| d - e).collect();
    let raw_mean = mean(&per_pair);
    let mut side_reports = Vec::new();
    if let Some(sides) = sides {
        for (tag, side) in [Side::Stable, Side::Unstable].into_iter().enumerate() {
            let vals: Vec<f64> = per_pair
                .iter()
                .zip(sides)
                .filter(|(_, s)| **s == side)
                .map(|(v, _)| *v)
                .collect();
            if !vals.is_empty() {
                side_reports.push(SideDefect {
                    side,
                    mean_defect: mean(&vals).max(0.0),
                    bootstrap_se: bootstrap_se(&vals, BOOTSTRAP, rng::child_seed(seed, 10 + tag as u64)),
                    n_pairs: vals.len(),
                });
            }
        }
    }
    Ok(DefectReport {
        mean_defect: raw_mean.max(0.0),
        raw_mean,
        bootstrap_se: bootstrap_se(&per_pair, BOOTSTRAP, seed),
        n_pairs: n,
        transport_metric: metric_name(measures.source[0].dim()),
        mean_transport: mean(&rows.iter().map(|r| r.0).collect::<Vec<_>>()),
        mean_noise: mean(&rows.iter().map(|r| r.1).collect::<Vec<_>>()),
        per_pair,
        sides: side_reports,
    })
}

/// su-defect over leaf pairs: stable and unstable holonomies from `p` to `q`
/// applied to `m_p` and compared with `m_q`.
pub fn su_defect(
    a: &CocycleField,
    pairs: &[LeafPair],
    measures: &PairMeasures,
    tol: f64,
    n_max: usize,
    seed: u64,
) -> Result<DefectReport> {
    let maps: Vec<SymplecticMatrix> = pairs
        .par_iter()
        .map(|lp| leaf_holonomy(a, a.model(), &lp.p, lp.offset, lp.side, tol, n_max).map(|h| h.matrix))
        .collect::<Result<_>>()?;
    let sides: Vec<Side> = pairs.iter().map(|lp| lp.side).collect();
    transport_defect(&maps, measures, Some(&sides), seed)
}

/// Sample pairs, estimate their measures and measure the su-defect.
#[allow(clippy::too_many_arguments)]
pub fn sampled_su_defect(
    a: &CocycleField,
    n_pairs: usize,
    max_offset: f64,
    n_transient: usize,
    n_atoms: usize,
    tol: f64,
    n_max: usize,
    seed: u64,
) -> Result<(Vec<LeafPair>, DefectReport)> {
    let model = a.model();
    let pairs = sample_leaf_pairs(model, n_pairs, max_offset, rng::child_seed(seed, 0));
    let ps: Vec<SuspensionPoint> = pairs.iter().map(|lp| lp.p).collect();
    let qs: Vec<SuspensionPoint> = pairs.iter().map(|lp| lp.q(model)).collect();
    let measures = PairMeasures::estimate(a, model, &ps, &qs, n_transient, n_atoms, rng::child_seed(seed, 1))?;
    let report = su_defect(a, &pairs, &measures, tol, n_max, rng::child_seed(seed, 2))?;
    Ok((pairs, report))
}

/// su/c-defect on the loop: `H^j_t` applied to `m_t` and compared with
/// `m_{h^j(t)}`, over the circle coordinates `ts`.
pub fn suc_defect(
    a: &CocycleField,
    lp: &HomoclinicLoop,
    ts: &[f64],
    measures: &PairMeasures,
    j: usize,
    seed: u64,
) -> Result<DefectReport> {
    let maps: Vec<SymplecticMatrix> = ts
        .par_iter()
        .map(|&t| loop_iterate(a, lp, j, t).map(|(_, h)| h))
        .collect::<Result<_>>()?;
    transport_defect(&maps, measures, None, seed)
}

/// Grid `t_i = (i + ½)·T/n`, which avoids the undefined point `t = 0`.
pub fn loop_grid(lp: &HomoclinicLoop, n: usize) -> Vec<f64> {
    let t_len = lp.leaf.period();
    (0..n).map(|i| (i as f64 + 0.5) * t_len / n as f64).collect()
}

/// Estimate leaf measures on a grid and measure the su/c-defect.
pub fn sampled_suc_defect(
    a: &CocycleField,
    lp: &HomoclinicLoop,
    grid_size: usize,
    j: usize,
    n_transient: usize,
    n_atoms: usize,
    seed: u64,
) -> Result<DefectReport> {
    let ts = loop_grid(lp, grid_size);
    let sources: Vec<SuspensionPoint> = ts.iter().map(|&t| lp.leaf.point_at(t)).collect();
    let mut targets = Vec::with_capacity(ts.len());
    for &t in &ts {
        let mut s = t;
        for _ in 0..j {
            s = lp.h(s);
        }
        targets.push(lp.leaf.point_at(s));
    }
    let measures = PairMeasures::estimate(a, &lp.leaf, &sources, &targets, n_transient, n_atoms, rng::child_seed(seed, 1))?;
    suc_defect(a, lp, &ts, &measures, j, rng::child_seed(seed, 2))
}

/// Self-consistency of the estimator: `A(x)_* m_x` against `m_{f(x)}`.
pub fn equivariance_defect(
    a: &CocycleField,
    points: &[SuspensionPoint],
    n_transient: usize,
    n_atoms: usize,
    seed: u64,
) -> Result<DefectReport> {
    let model = a.model();
    let images: Vec<SuspensionPoint> = points.iter().map(|p| model.time_one(p)).collect();
    let measures = PairMeasures::estimate(a, model, points, &images, n_transient, n_atoms, rng::child_seed(seed, 1))?;
    let maps: Vec<SymplecticMatrix> = points.iter().map(|p| a.evaluate(p)).collect::<Result<_>>()?;
    transport_defect(&maps, &measures, None, rng::child_seed(seed, 2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroExponentReport {
    pub zero: bool,
    pub estimate: ExponentEstimate,
    pub tol: f64,
}

/// `|L(A)| < tol` for the integrated top exponent over the samples.
pub fn zero_exponent_check(
    a: &CocycleField,
    samples: &[SuspensionPoint],
    n: usize,
    tol: f64,
) -> Result<ZeroExponentReport> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter {
            name: "tol",
            reason: "must be positive".into(),
        });
    }
    let estimate = integrated_exponent(a, samples, n)?;
    Ok(ZeroExponentReport {
        zero: estimate.value.abs() < tol,
        estimate,
        tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::{periodic_points, PeriodicLeaf};
    use crate::cocycle::{FieldPoly, Generator};
    use crate::symplectic::{diagonal_block, random_symplectic_near_identity, rotation_block};
    use crate::trig::TrigPoly;
    use proptest::prelude::*;

    fn model() -> SuspensionModel {
        SuspensionModel::default_model()
    }

    fn on_angles(angles: &[f64], weights: &[f64]) -> FiberMeasure {
        FiberMeasure::new(
            angles
                .iter()
                .zip(weights)
                .map(|(&a, &w)| (ProjectivePoint::from_angle(a), w))
                .collect(),
        )
        .unwrap()
    }

    fn ks_to_uniform(m: &FiberMeasure) -> f64 {
        let mut u: Vec<f64> = m.atoms().iter().map(|(p, _)| p.angle() / PI).collect();
        u.sort_by(f64::total_cmp);
        let n = u.len() as f64;
        u.iter()
            .enumerate()
            .map(|(i, x)| (x - i as f64 / n).abs().max(((i + 1) as f64 / n - x).abs()))
            .fold(0.0, f64::max)
    }

    fn rotation_field(mean: f64, amp: f64) -> CocycleField {
        CocycleField::new(
            model(),
            1,
            1.0,
            vec![Generator::Rotation {
                angle: FieldPoly::from_base(TrigPoly::constant(mean).with_term([1, 0], amp, 0.0)),
            }],
        )
        .unwrap()
    }

    #[test]
    fn measure_validation() {
        assert!(FiberMeasure::new(vec![]).is_err());
        let p = ProjectivePoint::from_angle(0.3);
        assert!(FiberMeasure::new(vec![(p.clone(), 0.5)]).is_err());
        assert!(FiberMeasure::new(vec![(p.clone(), 1.5), (p.clone(), -0.5)]).is_err());
        assert_eq!(FiberMeasure::dirac(p).total_mass(), 1.0);
    }

    #[test]
    fn push_basics() {
        let m = FiberMeasure::uniform((0..7).map(|i| ProjectivePoint::from_angle(0.4 * i as f64)).collect()).unwrap();
        assert!(projective_distance(&push_measure(&SymplecticMatrix::identity(1), &m), &m).unwrap() < 1e-15);
        let b1 = random_symplectic_near_identity(1, 0.5, 1).unwrap();
        let b2 = random_symplectic_near_identity(1, 0.5, 2).unwrap();
        let joint = push_measure(&b1.compose(&b2), &m);
        let seq = push_measure(&b1, &push_measure(&b2, &m));
        assert_eq!(joint.total_mass(), m.total_mass());
        assert!(projective_distance(&joint, &seq).unwrap() < 1e-12);
    }

    #[test]
    fn distance_closed_forms() {
        let a = on_angles(&[0.1], &[1.0]);
        let b = on_angles(&[0.1 + PI / 4.0], &[1.0]);
        assert!((projective_distance(&a, &b).unwrap() - PI / 4.0).abs() < 1e-12);
        assert_eq!(projective_distance(&a, &a).unwrap(), 0.0);
        // wraps around π
        let c = on_angles(&[PI - 0.05], &[1.0]);
        let d = on_angles(&[0.05], &[1.0]);
        assert!((projective_distance(&c, &d).unwrap() - 0.1).abs() < 1e-12);
        // half the mass moves by 0.2
        let e = on_angles(&[0.5, 1.5], &[0.5, 0.5]);
        let f = on_angles(&[0.5, 1.7], &[0.5, 0.5]);
        assert!((projective_distance(&e, &f).unwrap() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn sliced_matches_exact_on_the_circle() {
        let mut g = rng::stream(3, 0);
        for _ in 0..10 {
            let a: Vec<f64> = (0..40).map(|_| g.gen_range(0.0..PI)).collect();
            let b: Vec<f64> = (0..40).map(|_| g.gen_range(0.0..1.0)).collect();
            let w = vec![1.0 / 40.0; 40];
            let (ma, mb) = (on_angles(&a, &w), on_angles(&b, &w));
            let exact = projective_distance(&ma, &mb).unwrap();
            let sliced = sliced_distance(&ma, &mb, SLICES, 9).unwrap();
            assert!((sliced - exact).abs() <= 0.1 * exact, "{sliced} {exact}");
        }
    }

    #[test]
    fn sliced_distance_in_four_dimensions() {
        let lift = |angles: &[f64]| {
            FiberMeasure::uniform(
                angles
                    .iter()
                    .map(|a| ProjectivePoint::new(Vector::from_vec(vec![a.cos(), 0.0, a.sin(), 0.0])).unwrap())
                    .collect(),
            )
            .unwrap()
        };
        let a = lift(&[0.2, 0.9, 2.0]);
        assert_eq!(projective_distance(&a, &a).unwrap(), 0.0);
        let b = lift(&[0.3, 1.0, 2.1]);
        let c = lift(&[0.7, 1.4, 2.5]);
        let (ab, ac) = (projective_distance(&a, &b).unwrap(), projective_distance(&a, &c).unwrap());
        assert!(ab > 0.0 && ac > ab);
        assert_eq!(ab, projective_distance(&b, &a).unwrap());
    }

    fn arb_measure() -> impl Strategy<Value = FiberMeasure> {
        prop::collection::vec((0.0..PI, 0.1f64..1.0), 1..12).prop_map(|atoms| {
            let total: f64 = atoms.iter().map(|a| a.1).sum();
            let mut pts: Vec<(ProjectivePoint, f64)> = atoms
                .iter()
                .map(|&(a, w)| (ProjectivePoint::from_angle(a), w / total))
                .collect();
            let rest: f64 = pts[1..].iter().map(|p| p.1).sum();
            pts[0].1 = 1.0 - rest;
            FiberMeasure::new(pts).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn distance_is_a_metric(a in arb_measure(), b in arb_measure(), c in arb_measure()) {
            let ab = projective_distance(&a, &b).unwrap();
            let ba = projective_distance(&b, &a).unwrap();
            let bc = projective_distance(&b, &c).unwrap();
            let ac = projective_distance(&a, &c).unwrap();
            prop_assert!(ab >= 0.0);
            prop_assert_eq!(ab, ba);
            prop_assert!(ac <= ab + bc + 1e-12);
            prop_assert!(ab <= PI / 2.0 + 1e-12);
        }

        #[test]
        fn push_preserves_mass(m in arb_measure(), seed in 0u64..1000) {
            let b = random_symplectic_near_identity(1, 0.8, seed).unwrap();
            let pushed = push_measure(&b, &m);
            prop_assert_eq!(pushed.total_mass(), m.total_mass());
            prop_assert_eq!(pushed.n_atoms(), m.n_atoms());
        }
    }

    #[test]
    fn rotation_cocycle_keeps_uniform_clouds() {
        let a = CocycleField::constant(model(), rotation_block(0.9, 1), 1.0).unwrap();
        let pts = model().volume_sample(4, 1);
        for m in estimate_fiber_measures(&a, &pts, 100, 1000, 5).unwrap() {
            assert_eq!(m.n_atoms(), 1000);
            assert!((m.total_mass() - 1.0).abs() < 1e-12);
            assert!(ks_to_uniform(&m) < 0.05);
        }
    }

    #[test]
    fn hyperbolic_cocycle_collapses_to_the_unstable_line() {
        let a = CocycleField::constant(model(), diagonal_block(2f64.ln(), 1), 1.0).unwrap();
        let pts = model().volume_sample(3, 2);
        let e1 = ProjectivePoint::from_angle(0.0);
        for m in estimate_fiber_measures(&a, &pts, 50, 200, 5).unwrap() {
            assert!(m.atoms().iter().all(|(p, _)| p.distance(&e1) < 0.01));
        }
    }

    #[test]
    fn estimates_are_seeded() {
        let a = rotation_field(0.8, 0.3);
        let pts = model().volume_sample(5, 3);
        let m1 = estimate_fiber_measures(&a, &pts, 60, 50, 11).unwrap();
        let m2 = estimate_fiber_measures(&a, &pts, 60, 50, 11).unwrap();
        let m3 = estimate_fiber_measures(&a, &pts, 60, 50, 12).unwrap();
        assert_eq!(m1, m2);
        assert_ne!(m1, m3);
    }

    #[test]
    fn su_defect_vanishes_for_constant_cocycles() {
        for b in [rotation_block(0.9, 1), diagonal_block(2f64.ln(), 1)] {
            let a = CocycleField::constant(model(), b, 1.0).unwrap();
            let (pairs, r) = sampled_su_defect(&a, 60, 0.2, 80, 300, 1e-10, 200, 4).unwrap();
            assert_eq!(pairs.len(), 60);
            assert_eq!(r.n_pairs, 60);
            assert!(r.mean_defect >= 0.0);
            assert!(r.mean_defect < 2.0 * r.bootstrap_se.max(1e-12), "{r:?}");
            assert_eq!(r.sides.len(), 2);
            assert_eq!(r.transport_metric, "w1-rp1-exact");
        }
    }

    #[test]
    fn su_defect_for_rotation_valued_field() {
        let a = rotation_field(0.8, 0.3);
        let (_, r) = sampled_su_defect(&a, 100, 0.2, 200, 400, 1e-10, 200, 6).unwrap();
        assert!(r.mean_defect < 2.0 * r.bootstrap_se, "{} {} {}", r.raw_mean, r.bootstrap_se, r.mean_noise);
    }

    #[test]
    fn estimator_is_equivariant() {
        let a = rotation_field(0.8, 0.3);
        let pts = model().volume_sample(50, 8);
        let r = equivariance_defect(&a, &pts, 200, 400, 9).unwrap();
        assert!(r.mean_defect < 3.0 * r.bootstrap_se, "{} {}", r.raw_mean, r.bootstrap_se);
    }

    #[test]
    fn suc_defect_basics() {
        let m = model();
        let pts = periodic_points(m.map(), 5).unwrap();
        let leaf = PeriodicLeaf::new(&m, pts[pts.len() / 3], 5).unwrap();
        let lp = HomoclinicLoop::new(&m, &leaf, 1).unwrap();
        let c = CocycleField::constant(m.clone(), rotation_block(0.9, 1), 1.0).unwrap();
        let r = sampled_suc_defect(&c, &lp, 40, 1, 100, 300, 1).unwrap();
        assert!(r.mean_defect < 2.0 * r.bootstrap_se.max(1e-12), "{r:?}");
        let a = rotation_field(0.8, 0.3);
        let r0 = sampled_suc_defect(&a, &lp, 20, 0, 100, 300, 1).unwrap();
        assert_eq!(r0.mean_defect, 0.0);
        assert!(r0.per_pair.iter().all(|v| *v <= 0.0));
    }

    #[test]
    fn zero_exponent_gate() {
        let pts = model().volume_sample(20, 1);
        let rot = rotation_field(0.8, 0.3);
        assert!(zero_exponent_check(&rot, &pts, 2000, 1e-3).unwrap().zero);
        let hyp = CocycleField::constant(model(), diagonal_block(2f64.ln(), 1), 1.0).unwrap();
        let r = zero_exponent_check(&hyp, &pts, 2000, 1e-3).unwrap();
        assert!(!r.zero);
        assert!((r.estimate.value - 2f64.ln()).abs() < 1e-3);
        // strict inequality at the boundary
        let at = zero_exponent_check(&hyp, &pts, 2000, r.estimate.value.abs()).unwrap();
        assert!(!at.zero);
        assert!(zero_exponent_check(&hyp, &pts, 2000, r.estimate.value.abs() * (1.0 + 1e-12)).unwrap().zero);
        assert!(zero_exponent_check(&hyp, &pts, 2000, 0.0).is_err());
    }
}
