//! Lyapunov exponents: top exponent, full spectra, integrated and
//! leaf-restricted exponents, and finite-time splittings.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::base::{BaseMap, PeriodicLeaf, SuspensionPoint};
use crate::cocycle::{CircleCocycle, CocycleField};
use crate::error::{Error, Result};
use crate::linalg::{max_abs, spectral_norm, Mat};
use crate::symplectic::{symplectic_inverse, Subspace};

/// Number of checkpoints used for convergence diagnostics.
pub const CHECKPOINTS: usize = 4;
/// A gap is accepted once it exceeds this many standard errors.
pub const GAP_SIGMAS: f64 = 5.0;
/// Positivity threshold in standard errors.
pub const POSITIVE_SIGMAS: f64 = 3.0;
/// Values below this are round-off, whatever their spread.
pub const NUMERICAL_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n: usize,
    pub n_samples: usize,
}

impl ExponentEstimate {
    pub fn is_positive(&self) -> bool {
        self.value > POSITIVE_SIGMAS * self.std_error && self.value > NUMERICAL_FLOOR
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub n: usize,
    pub exponents: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovSpectrum {
    /// Sorted in decreasing order.
    pub exponents: Vec<f64>,
    /// `max_i |λ_i + λ_{2d+1−i}|`.
    pub pairing_residual: f64,
    pub n: usize,
    pub convergence: Vec<Checkpoint>,
}

impl LyapunovSpectrum {
    fn from_exponents(mut exponents: Vec<f64>, n: usize, convergence: Vec<Checkpoint>) -> Self {
        exponents.sort_by(|a, b| b.total_cmp(a));
        let pairing_residual = pairing_residual(&exponents);
        Self {
            exponents,
            pairing_residual,
            n,
            convergence,
        }
    }

    pub fn sum(&self) -> f64 {
        self.exponents.iter().sum()
    }

    /// Standard deviation over checkpoints of `λ_i − λ_{i+1}` (1-based `i`).
    pub fn gap_std_error(&self, i: usize) -> f64 {
        let gaps: Vec<f64> = self
            .convergence
            .iter()
            .map(|c| c.exponents[i - 1] - c.exponents[i])
            .collect();
        sample_std(&gaps)
    }
}

fn pairing_residual(sorted: &[f64]) -> f64 {
    let m = sorted.len();
    (0..m / 2)
        .map(|i| (sorted[i] + sorted[m - 1 - i]).abs())
        .fold(0.0, f64::max)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard deviation; zero for fewer than two values.
pub fn sample_std(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

fn block_std_error(checkpoints: &[(usize, f64)]) -> f64 {
    let mut slopes = Vec::with_capacity(checkpoints.len());
    let (mut n0, mut l0) = (0usize, 0.0);
    for &(n, value) in checkpoints {
        let l = value * n as f64;
        if n > n0 {
            slopes.push((l - l0) / (n - n0) as f64);
        }
        (n0, l0) = (n, l);
    }
    sample_std(&slopes) / (slopes.len().max(1) as f64).sqrt()
}

/// Step counts at which checkpoints are recorded: `n/4, n/2, 3n/4, n`.
pub fn checkpoint_steps(n: usize) -> Vec<usize> {
    (1..=CHECKPOINTS)
        .map(|k| ((k * n) / CHECKPOINTS).max(1))
        .collect()
}

fn check_finite(a: &Mat, step: usize) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { step })
    }
}

fn require_steps(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::InvalidParameter {
            name: "n",
            reason: "need at least one iteration".into(),
        })
    } else {
        Ok(())
    }
}

/// `(1/n)·log ‖A^n(P)‖`. The standard error is the spread of the growth
/// rates over the blocks between checkpoints, divided by `√blocks`.
pub fn top_exponent(a: &CocycleField, p: &SuspensionPoint, n: usize) -> Result<ExponentEstimate> {
    top_exponent_over(a, a.model(), p, n)
}

pub fn top_exponent_over<B: BaseMap + ?Sized>(
    a: &CocycleField,
    base: &B,
    p: &SuspensionPoint,
    n: usize,
) -> Result<ExponentEstimate> {
    require_steps(n)?;
    let dim = 2 * a.d();
    let steps = checkpoint_steps(n);
    let mut estimates: Vec<(usize, f64)> = Vec::with_capacity(CHECKPOINTS);
    let mut m = Mat::identity(dim, dim);
    let mut log_scale = 0.0;
    let mut q = *p;
    let mut next = 0;
    for i in 0..n {
        let ai = a.evaluate_raw(&q);
        check_finite(&ai, i)?;
        m = ai * m;
        let s = max_abs(&m);
        if !s.is_finite() || s == 0.0 {
            return Err(Error::Overflow { step: i });
        }
        m /= s;
        log_scale += s.ln();
        q = base.forward(&q);
        while next < steps.len() && steps[next] == i + 1 {
            estimates.push((i + 1, (spectral_norm(&m).ln() + log_scale) / (i + 1) as f64));
            next += 1;
        }
    }
    Ok(ExponentEstimate {
        value: estimates.last().expect("at least one checkpoint").1,
        std_error: block_std_error(&estimates),
        n,
        n_samples: 1,
    })
}

/// All `2d` exponents by QR re-orthonormalisation at every step.
pub fn full_spectrum(a: &CocycleField, p: &SuspensionPoint, n: usize) -> Result<LyapunovSpectrum> {
    full_spectrum_over(a, a.model(), p, n)
}

pub fn full_spectrum_over<B: BaseMap + ?Sized>(
    a: &CocycleField,
    base: &B,
    p: &SuspensionPoint,
    n: usize,
) -> Result<LyapunovSpectrum> {
    require_steps(n)?;
    let dim = 2 * a.d();
    let steps = checkpoint_steps(n);
    let mut q_frame = Mat::identity(dim, dim);
    let mut sums = vec![0.0; dim];
    let mut convergence = Vec::with_capacity(CHECKPOINTS);
    let mut x = *p;
    let mut next = 0;
    for i in 0..n {
        let ai = a.evaluate_raw(&x);
        check_finite(&ai, i)?;
        let qr = (ai * &q_frame).qr();
        let r = qr.r();
        for (k, s) in sums.iter_mut().enumerate() {
            *s += r[(k, k)].abs().ln();
        }
        q_frame = qr.q();
        x = base.forward(&x);
        while next < steps.len() && steps[next] == i + 1 {
            let mut e: Vec<f64> = sums.iter().map(|s| s / (i + 1) as f64).collect();
            e.sort_by(|u, v| v.total_cmp(u));
            convergence.push(Checkpoint {
                n: i + 1,
                exponents: e,
            });
            next += 1;
        }
    }
    let exponents = sums.iter().map(|s| s / n as f64).collect();
    Ok(LyapunovSpectrum::from_exponents(exponents, n, convergence))
}

/// `L(A, μ) ≈` mean of the top exponent over the samples. The standard error
/// combines the sample spread with the mean finite-`n` spread.
pub fn integrated_exponent(
    a: &CocycleField,
    samples: &[SuspensionPoint],
    n: usize,
) -> Result<ExponentEstimate> {
    let per: Vec<ExponentEstimate> = samples
        .par_iter()
        .map(|p| top_exponent(a, p, n))
        .collect::<Result<_>>()?;
    Ok(pool_estimates(&per, n))
}

fn pool_estimates(per: &[ExponentEstimate], n: usize) -> ExponentEstimate {
    let values: Vec<f64> = per.iter().map(|e| e.value).collect();
    let finite_n = mean(&per.iter().map(|e| e.std_error).collect::<Vec<_>>());
    let spread = sample_std(&values) / (values.len() as f64).sqrt();
    ExponentEstimate {
        value: mean(&values),
        std_error: (spread * spread + finite_n * finite_n).sqrt(),
        n,
        n_samples: per.len(),
    }
}

/// Exact spectrum at a point of a periodic leaf under the constant roof:
/// `(1/T)·log` of the eigenvalue moduli of `A^T(p)`.
pub fn periodic_exponents(
    a: &CocycleField,
    leaf: &PeriodicLeaf,
    p: &SuspensionPoint,
) -> Result<LyapunovSpectrum> {
    if !a.model().roof().is_constant() {
        return Err(Error::VariableRoof);
    }
    leaf.coordinate_of(p)?;
    let k = leaf.k() as usize;
    let prod = a.iterate_over(leaf, p, k as i64)?;
    let eig = prod.matrix.complex_eigenvalues();
    let exponents = eig
        .iter()
        .map(|z| (z.norm().ln() + prod.log_scale) / k as f64)
        .collect();
    Ok(LyapunovSpectrum::from_exponents(exponents, k, Vec::new()))
}

/// Lebesgue average over the leaf of top exponents started on an equidistant
/// grid of `grid_size` points.
pub fn circle_cocycle_exponent(
    c: &CircleCocycle,
    grid_size: usize,
    n: usize,
) -> Result<ExponentEstimate> {
    if grid_size == 0 {
        return Err(Error::InvalidParameter {
            name: "grid_size",
            reason: "need at least one grid point".into(),
        });
    }
    let t_len = c.period();
    let per: Vec<ExponentEstimate> = (0..grid_size)
        .into_par_iter()
        .map(|i| {
            let s = t_len * i as f64 / grid_size as f64;
            top_exponent_over(c.field(), c.leaf(), &c.leaf().point_at(s), n)
        })
        .collect::<Result<_>>()?;
    Ok(pool_estimates(&per, n))
}

/// Grid average of the exact top exponent `(1/k)·log ρ(A^k)` at leaf points
/// `s_i = iT/grid_size`; heights differ between grid points, and so do the
/// period products.
pub fn periodic_leaf_exponent(a: &CocycleField, leaf: &PeriodicLeaf, grid_size: usize) -> Result<f64> {
    if grid_size == 0 {
        return Err(Error::InvalidParameter {
            name: "grid_size",
            reason: "need at least one grid point".into(),
        });
    }
    let t_len = leaf.period();
    let tops = (0..grid_size)
        .into_par_iter()
        .map(|i| {
            let p = leaf.point_at(t_len * i as f64 / grid_size as f64);
            periodic_exponents(a, leaf, &p).map(|s| s.exponents[0])
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(mean(&tops))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaScanEntry {
    pub theta: f64,
    pub estimate: ExponentEstimate,
    pub positive: bool,
    /// Restricted exponent from the eigenvalues of the period products on
    /// the same grid (constant roof only).
    pub oracle: Option<f64>,
    /// `positive`, and not contradicted by the oracle.
    pub confirmed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaScan {
    pub entries: Vec<ThetaScanEntry>,
    /// Index of the largest estimate.
    pub argmax: usize,
    pub any_positive: bool,
    pub any_confirmed: bool,
}

/// Restricted exponent of `A_θ` on the leaf for each `θ` in the grid.
pub fn theta_scan(
    a: &CocycleField,
    leaf: &PeriodicLeaf,
    thetas: &[f64],
    grid_size: usize,
    n: usize,
) -> Result<ThetaScan> {
    if thetas.is_empty() {
        return Err(Error::InvalidParameter {
            name: "thetas",
            reason: "empty grid".into(),
        });
    }
    let entries = thetas
        .iter()
        .map(|&theta| {
            let c = a.perturb_global_rotation(theta).restrict_to_center_leaf(leaf);
            let estimate = circle_cocycle_exponent(&c, grid_size, n)?;
            let oracle = if a.model().roof().is_constant() {
                Some(periodic_leaf_exponent(c.field(), leaf, grid_size)?)
            } else {
                None
            };
            let positive = estimate.is_positive();
            Ok(ThetaScanEntry {
                theta,
                estimate,
                positive,
                oracle,
                confirmed: positive && oracle.map_or(true, |o| o > NUMERICAL_FLOOR),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let argmax = entries
        .iter()
        .enumerate()
        .max_by(|x, y| x.1.estimate.value.total_cmp(&y.1.estimate.value))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let any_positive = entries.iter().any(|e| e.positive);
    let any_confirmed = entries.iter().any(|e| e.confirmed);
    Ok(ThetaScan {
        entries,
        argmax,
        any_positive,
        any_confirmed,
    })
}

/// Finite-time approximation of the Oseledets splitting at `P` into the
/// `i` fastest directions `V^u` and the `2d − i` slowest directions `V^s`.
///
/// `V^u` is the range of `A^n(f^{−n}P)` on a generic `i`-frame (the top
/// left singular space of the forward product arriving at `P`), and `V^s`
/// the range of `A^{−n}(f^{n}P)` on a generic `(2d − i)`-frame. Both are
/// pushed with QR at every step, so they stay accurate for large `n` and are
/// equivariant up to `O(e^{−gap·n})`.
pub fn finite_time_splitting(
    a: &CocycleField,
    p: &SuspensionPoint,
    n: usize,
    i: usize,
) -> Result<(Subspace, Subspace)> {
    finite_time_splitting_over(a, a.model(), p, n, i)
}

pub fn finite_time_splitting_over<B: BaseMap + ?Sized>(
    a: &CocycleField,
    base: &B,
    p: &SuspensionPoint,
    n: usize,
    i: usize,
) -> Result<(Subspace, Subspace)> {
    let dim = 2 * a.d();
    if i == 0 || i >= dim {
        return Err(Error::InvalidParameter {
            name: "gap_index",
            reason: format!("{i} is not in 1..{dim}"),
        });
    }
    let spectrum = full_spectrum_over(a, base, p, n)?;
    let gap = spectrum.exponents[i - 1] - spectrum.exponents[i];
    let std_error = spectrum.gap_std_error(i);
    if !(gap > GAP_SIGMAS * std_error && gap > 1e-9) {
        return Err(Error::NoSpectralGap {
            index: i,
            gap,
            std_error,
        });
    }
    // orbit segments stored from P, so no point is reached by a round trip
    let mut past = Vec::with_capacity(n);
    let mut future = Vec::with_capacity(n);
    let (mut x, mut y) = (*p, *p);
    for _ in 0..n {
        x = base.backward(&x);
        past.push(x);
        future.push(y);
        y = base.forward(&y);
    }
    let mut vu = generic_frame(dim, i);
    for q in past.iter().rev() {
        vu = (a.evaluate_raw(q) * vu).qr().q();
    }
    let mut vs = generic_frame(dim, dim - i);
    for q in future.iter().rev() {
        vs = (symplectic_inverse(&a.evaluate_raw(q)) * vs).qr().q();
    }
    Ok((Subspace::span(&vu)?, Subspace::span(&vs)?))
}

/// A fixed frame in general position with respect to coordinate subspaces.
fn generic_frame(dim: usize, k: usize) -> Mat {
    Mat::from_fn(dim, k, |r, c| {
        let x = ((r + 1) * 7919 + (c + 1) * 104_729) as f64;
        (x * 0.618_033_988_749_894_9).fract() - 0.5
    })
    .qr()
    .q()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::{periodic_points, SuspensionModel};
    use crate::cocycle::{FieldPoly, Generator};
    use crate::linalg::principal_angle;
    use crate::symplectic::{diagonal_block, random_symplectic_near_identity, rotation_block, SymplecticMatrix};
    use crate::trig::TrigPoly;

    fn model() -> SuspensionModel {
        SuspensionModel::default_model()
    }

    fn constant(m: SymplecticMatrix) -> CocycleField {
        CocycleField::constant(model(), m, 1.0).unwrap()
    }

    fn mixed(d: usize) -> CocycleField {
        let mut gens = vec![
            Generator::Diagonal {
                log_stretch: FieldPoly::from_base(
                    TrigPoly::constant(0.4).with_term([1, 0], 0.2, 0.0),
                ),
            },
            Generator::Rotation {
                angle: FieldPoly::from_base(TrigPoly::cos_x1(0.5).with_term([0, 1], 0.0, 0.3)),
            },
        ];
        if d > 1 {
            gens.push(Generator::Constant {
                matrix: random_symplectic_near_identity(d, 0.3, 11).unwrap(),
            });
        }
        CocycleField::new(model(), d, 1.0, gens).unwrap()
    }

    fn p0() -> SuspensionPoint {
        SuspensionPoint::new([0.2137, 0.5521], 0.3)
    }

    #[test]
    fn top_exponent_constants() {
        let r = top_exponent(&constant(rotation_block(0.7, 1)), &p0(), 1000).unwrap();
        assert!(r.value.abs() < 1e-6);
        let id = top_exponent(&CocycleField::identity(model(), 1), &p0(), 100).unwrap();
        assert_eq!(id.value, 0.0);
        let d = top_exponent(&constant(diagonal_block(2f64.ln(), 1)), &p0(), 500).unwrap();
        assert!((d.value - 2f64.ln()).abs() < 1e-6);
        assert!(d.std_error < 1e-9);
    }

    #[test]
    fn checkpoint_dispersion_is_order_one_over_n() {
        // non-normal constant matrix: log‖Aⁿ‖/n = λ + c/n + o(1/n)
        let m = Mat::from_row_slice(2, 2, &[2.0, 3.0, 0.0, 0.5]);
        let a = constant(SymplecticMatrix::new(m, 1e-12).unwrap());
        let s1 = top_exponent(&a, &p0(), 400).unwrap().std_error;
        let s2 = top_exponent(&a, &p0(), 1600).unwrap().std_error;
        assert!((s1 / s2 - 4.0).abs() < 0.1, "{s1} {s2}");
    }

    #[test]
    fn spectrum_of_constant_diagonal() {
        let a = constant(diagonal_block(2f64.ln(), 1));
        let s = full_spectrum(&a, &p0(), 10_000).unwrap();
        assert!((s.exponents[0] - 2f64.ln()).abs() < 1e-3);
        assert!((s.exponents[1] + 2f64.ln()).abs() < 1e-3);
        assert!(s.sum().abs() < 1e-6);
        let r = full_spectrum(&constant(rotation_block(0.3, 1)), &p0(), 1000).unwrap();
        assert!(r.exponents.iter().all(|e| e.abs() < 1e-6));
        assert_eq!(s.convergence.len(), CHECKPOINTS);
    }

    #[test]
    fn spectra_are_paired() {
        for d in [1, 2] {
            let a = mixed(d);
            let s = full_spectrum(&a, &p0(), 10_000).unwrap();
            assert!(s.pairing_residual < 1e-3, "{:?}", s.exponents);
            assert!(s.sum().abs() < 1e-6);
            let top = top_exponent(&a, &p0(), 10_000).unwrap();
            assert!((top.value - s.exponents[0]).abs() < 2e-3);
        }
    }

    #[test]
    fn periodic_oracle_agreement() {
        let c = Mat::from_row_slice(2, 2, &[1.5, 0.7, 0.2, 0.5]);
        let c = SymplecticMatrix::new(c.clone() / c.determinant().sqrt(), 1e-12).unwrap();
        let eig = c.entries().complex_eigenvalues();
        let exact = eig.iter().map(|z| z.norm().ln()).fold(f64::MIN, f64::max);
        let a = constant(c);
        let leaf = PeriodicLeaf::new(a.model(), periodic_points(a.model().map(), 3).unwrap()[4], 3)
            .unwrap();
        let s = periodic_exponents(&a, &leaf, &leaf.point_at(0.2)).unwrap();
        assert!((s.exponents[0] - exact).abs() < 1e-12);
        assert!((s.exponents[0] + s.exponents[1]).abs() < 1e-12);

        let m = mixed(1);
        for k in 1..=5u32 {
            let pts = periodic_points(m.model().map(), k).unwrap();
            let leaf = PeriodicLeaf::new(m.model(), pts[pts.len() / 2], k).unwrap();
            let p = leaf.point_at(0.37);
            let exact = periodic_exponents(&m, &leaf, &p).unwrap();
            let n = 1000 * k as usize;
            let it = top_exponent_over(&m, &leaf, &p, n).unwrap();
            if exact.exponents[0] > 1e-9 {
                assert!((it.value - exact.exponents[0]).abs() < 2e-3, "k={k}");
            }
        }
    }

    #[test]
    fn integrated_matches_long_orbit() {
        let a = mixed(1);
        let samples = a.model().volume_sample(100, 4);
        let mean = integrated_exponent(&a, &samples, 2000).unwrap();
        let long = integrated_exponent(&a, &samples[..1], 20_000).unwrap();
        let combined = (mean.std_error.powi(2) + long.std_error.powi(2)).sqrt();
        assert!((mean.value - long.value).abs() < 3.0 * combined.max(1e-3));
        let rot = CocycleField::new(
            model(),
            1,
            1.0,
            vec![Generator::Rotation {
                angle: FieldPoly::from_base(TrigPoly::cos_x1(0.4)),
            }],
        )
        .unwrap();
        let z = integrated_exponent(&rot, &samples, 1000).unwrap();
        assert!(z.value.abs() <= 3.0 * z.std_error + 1e-12);
    }

    #[test]
    fn circle_exponents() {
        let model = model();
        let pts = periodic_points(model.map(), 2).unwrap();
        let leaf = PeriodicLeaf::new(&model, pts[1], 2).unwrap();
        let d = constant(diagonal_block(2f64.ln(), 1)).restrict_to_center_leaf(&leaf);
        let e = circle_cocycle_exponent(&d, 8, 500).unwrap();
        assert!((e.value - 2f64.ln()).abs() < 1e-6);
        let r = constant(rotation_block(0.4, 1)).restrict_to_center_leaf(&leaf);
        assert!(circle_cocycle_exponent(&r, 8, 500).unwrap().value.abs() < 1e-9);
        let m = mixed(1).restrict_to_center_leaf(&leaf);
        let coarse = circle_cocycle_exponent(&m, 16, 2000).unwrap();
        let fine = circle_cocycle_exponent(&m, 64, 2000).unwrap();
        let se = (coarse.std_error.powi(2) + fine.std_error.powi(2)).sqrt();
        assert!((coarse.value - fine.value).abs() < 3.0 * se, "{coarse:?} {fine:?}");
    }

    #[test]
    fn theta_scan_basics() {
        let model = model();
        let leaf = PeriodicLeaf::new(&model, periodic_points(model.map(), 1).unwrap()[0], 1).unwrap();
        let a = constant(rotation_block(0.2, 1));
        let scan = theta_scan(&a, &leaf, &[-0.1, 0.0, 0.1], 4, 200).unwrap();
        assert_eq!(scan.entries[1].theta, 0.0);
        assert!(scan.entries[1].estimate.value.abs() < 1e-12);
        assert!(!scan.any_positive);
    }

    #[test]
    fn splitting_of_constant_diagonal() {
        let a = constant(diagonal_block(2f64.ln(), 1));
        let (vu, vs) = finite_time_splitting(&a, &p0(), 200, 1).unwrap();
        let e1 = Mat::from_column_slice(2, 1, &[1.0, 0.0]);
        let e2 = Mat::from_column_slice(2, 1, &[0.0, 1.0]);
        assert!(principal_angle(vu.frame(), &e1) < 1e-8);
        assert!(principal_angle(vs.frame(), &e2) < 1e-8);
        let r = constant(rotation_block(0.3, 1));
        assert!(matches!(
            finite_time_splitting(&r, &p0(), 200, 1),
            Err(Error::NoSpectralGap { .. })
        ));
    }

    #[test]
    fn splitting_is_equivariant() {
        let a = mixed(2);
        let p = p0();
        let fp = a.model().time_one(&p);
        let spec = full_spectrum(&a, &p, 2000).unwrap();
        let i = 2;
        let gap = spec.exponents[i - 1] - spec.exponents[i];
        assert!(gap > 0.1);
        let mut prev = f64::INFINITY;
        for n in [20, 40] {
            let (vu, vs) = finite_time_splitting(&a, &p, n, i).unwrap();
            let (wu, ws) = finite_time_splitting(&a, &fp, n, i).unwrap();
            let ap = a.evaluate(&p).unwrap();
            let au = vu.image(ap.entries()).unwrap();
            let as_ = vs.image(ap.entries()).unwrap();
            let err = au.angle_to(&wu).max(as_.angle_to(&ws));
            assert!(err < prev.max(1e-12) || err < 1e-10, "n={n}: {err}");
            prev = err;
        }
        assert!(prev < 1e-4);
    }
}
