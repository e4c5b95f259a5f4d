//! Hölder cocycles over the time-one map, built from generator families.

use std::f64::consts::TAU;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::base::{BaseMap, PeriodicLeaf, SuspensionModel, SuspensionPoint};
use crate::error::{Error, Result};
use crate::linalg::{max_abs, spectral_norm, Mat};
use crate::rng;
use crate::symplectic::{
    diagonal_block, rotation_block, symplectic_defect, symplectic_inverse, symplectify,
    SymplecticMatrix,
};
use crate::trig::TrigPoly;

/// Products are rescaled at this cadence.
pub const RENORM_EVERY: usize = 25;
/// Products are also rescaled as soon as an entry leaves `[1/GUARD, GUARD]`.
pub const NORM_GUARD: f64 = 1e150;
/// Evaluations with a larger defect are repaired.
pub const EVAL_TOL: f64 = 1e-12;

/// `cos(2π m τ)` / `sin(2π m τ)` mode in the normalised height `τ = t / r(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeightTerm {
    pub m: i64,
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

/// Scalar field on the suspension manifold. A trig polynomial `p` on the
/// torus is lifted as `(1 − β(τ))·p(x) + β(τ)·p(F x)` with
/// `β(τ) = τ²(3 − 2τ)`, which is continuous across the roof identification;
/// height modes are added on top.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldPoly {
    #[serde(default)]
    pub base: TrigPoly,
    #[serde(default)]
    pub height: Vec<HeightTerm>,
}

fn seam_blend(tau: f64) -> f64 {
    tau * tau * (3.0 - 2.0 * tau)
}

impl FieldPoly {
    pub fn constant(c: f64) -> Self {
        Self {
            base: TrigPoly::constant(c),
            height: Vec::new(),
        }
    }

    pub fn from_base(base: TrigPoly) -> Self {
        Self {
            base,
            height: Vec::new(),
        }
    }

    pub fn with_height(mut self, m: i64, cos: f64, sin: f64) -> Self {
        self.height.push(HeightTerm { m, cos, sin });
        self
    }

    pub fn is_constant(&self) -> bool {
        self.base.is_constant() && self.height.iter().all(|h| h.cos == 0.0 && h.sin == 0.0)
    }

    pub fn value(&self, model: &SuspensionModel, p: &SuspensionPoint) -> f64 {
        let tau = model.normalized_height(p);
        let mut v = if self.base.is_constant() {
            self.base.value(p.x)
        } else {
            let b = seam_blend(tau);
            (1.0 - b) * self.base.value(p.x) + b * self.base.value(model.map().apply_linear(p.x))
        };
        for h in &self.height {
            let (s, c) = (TAU * h.m as f64 * tau).sin_cos();
            v += h.cos * c + h.sin * s;
        }
        v
    }

    /// Lipschitz constant of the lift with respect to `dist`, from the
    /// gradient bounds of each piece. Unwound charts see the field through
    /// `F⁻¹`, which costs a factor `‖F‖`.
    pub fn lipschitz_bound(&self, model: &SuspensionModel) -> f64 {
        let m = model.map().matrix();
        let f = Mat::from_row_slice(
            2,
            2,
            &[m[0][0] as f64, m[0][1] as f64, m[1][0] as f64, m[1][1] as f64],
        );
        let norm_f = spectral_norm(&f);
        let roof = model.roof();
        let r_min = roof.lower_bound();
        let lb = self.base.lipschitz_bound();
        // |β'| ≤ 3/2 and |p(Fx) − p(x)| ≤ 2·osc
        let c_tau = 3.0 * self.base.oscillation_bound()
            + self
                .height
                .iter()
                .map(|h| TAU * h.m.abs() as f64 * (h.cos.abs() + h.sin.abs()))
                .sum::<f64>();
        let gx = lb * norm_f + c_tau * roof.lipschitz_bound() / r_min;
        let gt = c_tau / r_min;
        ((norm_f * gx).powi(2) + gt * gt).sqrt()
    }
}

/// One factor of a cocycle field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Generator {
    Constant {
        matrix: SymplecticMatrix,
    },
    /// `rotation_block(θ(P))`.
    Rotation {
        angle: FieldPoly,
    },
    /// `diag(e^{s(P)}·I, e^{−s(P)}·I)`.
    Diagonal {
        log_stretch: FieldPoly,
    },
    /// `rotation_block(φ(dist(P, site)/radius)·angle)`.
    Bump {
        site: SuspensionPoint,
        radius: f64,
        angle: f64,
    },
}

/// `φ(u) = exp(1 − 1/(1 − u²))` on `[0, 1)`, zero beyond.
pub fn bump_profile(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - u * u)).exp()
    }
}

/// `A: M → Sp(2d, ℝ)`, evaluated as the ordered product of its generators,
/// together with the Hölder exponent it is considered in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocycleField {
    model: SuspensionModel,
    d: usize,
    alpha: f64,
    generators: Vec<Generator>,
}

/// `A^n(P) = e^{log_scale}·matrix`.
#[derive(Debug, Clone, PartialEq)]
pub struct Product {
    pub matrix: Mat,
    pub log_scale: f64,
    pub renormalizations: usize,
}

impl Product {
    fn identity(dim: usize) -> Self {
        Self {
            matrix: Mat::identity(dim, dim),
            log_scale: 0.0,
            renormalizations: 0,
        }
    }

    /// The unscaled product; may overflow for long products.
    pub fn value(&self) -> Mat {
        &self.matrix * self.log_scale.exp()
    }

    /// `log ‖A^n(P)‖`.
    pub fn log_norm(&self) -> f64 {
        spectral_norm(&self.matrix).ln() + self.log_scale
    }

    fn renormalize(&mut self) {
        let s = max_abs(&self.matrix);
        if s > 0.0 && s.is_finite() {
            self.matrix /= s;
            self.log_scale += s.ln();
            self.renormalizations += 1;
        }
    }

    fn step(&mut self, factor: &Mat, on_left: bool, step: usize) -> Result<()> {
        self.matrix = if on_left {
            factor * &self.matrix
        } else {
            &self.matrix * factor
        };
        let m = max_abs(&self.matrix);
        if !m.is_finite() {
            return Err(Error::Overflow { step });
        }
        if (step + 1) % RENORM_EVERY == 0 || m > NORM_GUARD || m < 1.0 / NORM_GUARD {
            self.renormalize();
        }
        Ok(())
    }
}

/// Sampled estimate of `‖A‖_α = sup ‖A‖ + sup ‖A(x) − A(y)‖ / dist(x, y)^α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderEstimate {
    pub sup_norm: f64,
    pub seminorm: f64,
    pub alpha: f64,
    pub n_pairs: usize,
}

impl HolderEstimate {
    pub fn total(&self) -> f64 {
        self.sup_norm + self.seminorm
    }
}

impl CocycleField {
    pub fn new(
        model: SuspensionModel,
        d: usize,
        alpha: f64,
        generators: Vec<Generator>,
    ) -> Result<Self> {
        if d == 0 {
            return Err(Error::ZeroDimension);
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "alpha",
                reason: format!("{alpha} is not in (0, 1]"),
            });
        }
        for g in &generators {
            match g {
                Generator::Constant { matrix } if matrix.d() != d => {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        got: matrix.d(),
                    })
                }
                Generator::Bump { radius, angle, .. } if !(*radius > 0.0) || !angle.is_finite() => {
                    return Err(Error::InvalidParameter {
                        name: "radius",
                        reason: format!("bump radius {radius} must be positive"),
                    })
                }
                _ => {}
            }
        }
        Ok(Self {
            model,
            d,
            alpha,
            generators,
        })
    }

    pub fn identity(model: SuspensionModel, d: usize) -> Self {
        Self::new(model, d, 1.0, Vec::new()).expect("valid identity cocycle")
    }

    pub fn constant(model: SuspensionModel, matrix: SymplecticMatrix, alpha: f64) -> Result<Self> {
        let d = matrix.d();
        Self::new(model, d, alpha, vec![Generator::Constant { matrix }])
    }

    pub fn model(&self) -> &SuspensionModel {
        &self.model
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        Self::new(self.model.clone(), self.d, alpha, self.generators.clone())
    }

    fn factor(&self, g: &Generator, p: &SuspensionPoint) -> Option<Mat> {
        match g {
            Generator::Constant { matrix } => Some(matrix.entries().clone()),
            Generator::Rotation { angle } => {
                Some(rotation_block(angle.value(&self.model, p), self.d).into_entries())
            }
            Generator::Diagonal { log_stretch } => {
                Some(diagonal_block(log_stretch.value(&self.model, p), self.d).into_entries())
            }
            Generator::Bump {
                site,
                radius,
                angle,
            } => {
                let phi = bump_profile(self.model.dist(p, site) / radius);
                if phi == 0.0 {
                    None
                } else {
                    Some(rotation_block(phi * angle, self.d).into_entries())
                }
            }
        }
    }

    /// Product of the factors without the defect check.
    pub(crate) fn evaluate_raw(&self, p: &SuspensionPoint) -> Mat {
        let dim = 2 * self.d;
        let mut acc: Option<Mat> = None;
        for g in &self.generators {
            if let Some(f) = self.factor(g, p) {
                acc = Some(match acc {
                    None => f,
                    Some(a) => a * f,
                });
            }
        }
        acc.unwrap_or_else(|| Mat::identity(dim, dim))
    }

    /// `A(P)`, repaired if round-off pushed it off the group.
    pub fn evaluate(&self, p: &SuspensionPoint) -> Result<SymplecticMatrix> {
        let raw = self.evaluate_raw(p);
        if !raw.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { step: 0 });
        }
        if symplectic_defect(&raw)? <= EVAL_TOL {
            SymplecticMatrix::new(raw, EVAL_TOL)
        } else {
            symplectify(&raw)
        }
    }

    /// `A^n(P)` over the time-one map.
    pub fn iterate(&self, p: &SuspensionPoint, n: i64) -> Result<Product> {
        self.iterate_over(&self.model, p, n)
    }

    /// `A^n(P)` along an arbitrary base map: `A(f^{n−1}P)⋯A(P)` for `n > 0`,
    /// the identity for `n = 0`, and `A(f^{n}P)⁻¹⋯A(f^{−1}P)⁻¹` for `n < 0`.
    pub fn iterate_over<B: BaseMap + ?Sized>(
        &self,
        base: &B,
        p: &SuspensionPoint,
        n: i64,
    ) -> Result<Product> {
        let mut prod = Product::identity(2 * self.d);
        let mut q = *p;
        if n >= 0 {
            for i in 0..n as usize {
                let a = self.evaluate_raw(&q);
                check_finite(&a, i)?;
                prod.step(&a, true, i)?;
                q = base.forward(&q);
            }
        } else {
            for i in 0..(-n) as usize {
                q = base.backward(&q);
                let a = self.evaluate_raw(&q);
                check_finite(&a, i)?;
                prod.step(&symplectic_inverse(&a), true, i)?;
            }
        }
        Ok(prod)
    }

    /// Monte-Carlo lower estimate of `‖A‖_α`. Pair `i` draws from its own
    /// stream, so estimates over nested pair counts are nondecreasing.
    pub fn holder_norm(&self, n_pairs: usize, seed: u64) -> HolderEstimate {
        let (sup_norm, seminorm) = (0..n_pairs)
            .into_par_iter()
            .map(|i| {
                let mut g = rng::stream(seed, i as u64);
                let x = self.model.sample_point(&mut g);
                let scale = 10f64.powf(g.gen_range(-4.0..-0.5));
                let dir: [f64; 3] = [
                    g.gen_range(-1.0..1.0),
                    g.gen_range(-1.0..1.0),
                    g.gen_range(-1.0..1.0),
                ];
                let nd = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt().max(1e-12);
                let y = self.model.normalize(
                    [x.x[0] + scale * dir[0] / nd, x.x[1] + scale * dir[1] / nd],
                    x.t + scale * dir[2] / nd,
                );
                let ax = self.evaluate_raw(&x);
                let ay = self.evaluate_raw(&y);
                let sup = spectral_norm(&ax).max(spectral_norm(&ay));
                let dist = self.model.dist(&x, &y);
                let semi = if dist > 0.0 {
                    spectral_norm(&(ax - ay)) / dist.powf(self.alpha)
                } else {
                    0.0
                };
                (sup, semi)
            })
            .reduce(|| (0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1)));
        HolderEstimate {
            sup_norm,
            seminorm,
            alpha: self.alpha,
            n_pairs,
        }
    }

    /// `A_θ = rotation_block(θ)·A`.
    pub fn perturb_global_rotation(&self, theta: f64) -> Self {
        if theta == 0.0 {
            return self.clone();
        }
        let mut out = self.clone();
        out.generators.insert(
            0,
            Generator::Constant {
                matrix: rotation_block(theta, self.d),
            },
        );
        out
    }

    /// `Â(x) = σ^{φ(dist(x, Q)/ρ)}·A(x)` for `σ = rotation_block(θ₀)`. The
    /// ball must not meet its own orbit: `dist(fⁿQ, Q) > 2ρ` for
    /// `1 ≤ |n| ≤ window`.
    pub fn perturb_bump(
        &self,
        site: SuspensionPoint,
        radius: f64,
        sigma: &SymplecticMatrix,
        window: i64,
    ) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidParameter {
                name: "radius",
                reason: format!("bump radius {radius} must be positive"),
            });
        }
        if sigma.d() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: sigma.d(),
            });
        }
        let angle = rotation_angle(sigma)?;
        check_orbit_separation(&self.model, &site, radius, window)?;
        if angle == 0.0 {
            return Ok(self.clone());
        }
        let mut out = self.clone();
        out.generators.insert(
            0,
            Generator::Bump {
                site,
                radius,
                angle,
            },
        );
        Ok(out)
    }

    pub fn restrict_to_center_leaf(&self, leaf: &PeriodicLeaf) -> CircleCocycle {
        CircleCocycle {
            field: self.clone(),
            leaf: leaf.clone(),
        }
    }
}

fn check_finite(a: &Mat, step: usize) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { step })
    }
}

/// `θ₀` with `σ = rotation_block(θ₀)`, or an error if `σ` is off that family.
pub fn rotation_angle(sigma: &SymplecticMatrix) -> Result<f64> {
    let d = sigma.d();
    let e = sigma.entries();
    let angle = e[(0, d)].atan2(e[(0, 0)]);
    if rotation_block(angle, d).distance(sigma) > 1e-12 {
        return Err(Error::BumpNotRotation);
    }
    Ok(angle)
}

pub fn check_orbit_separation(
    model: &SuspensionModel,
    site: &SuspensionPoint,
    radius: f64,
    window: i64,
) -> Result<()> {
    let mut fwd = *site;
    let mut bwd = *site;
    for n in 1..=window {
        fwd = model.time_one(&fwd);
        bwd = model.time_one_inverse(&bwd);
        for (k, q) in [(n, &fwd), (-n, &bwd)] {
            let distance = model.dist(q, site);
            if distance <= 2.0 * radius {
                return Err(Error::OrbitSeparation { n: k, distance });
            }
        }
    }
    Ok(())
}

/// Restriction of a cocycle to a compact center leaf: a cocycle over the
/// rotation `s ↦ s + 1` of `ℝ/Tℤ`.
#[derive(Debug, Clone, PartialEq)]
pub struct CircleCocycle {
    field: CocycleField,
    leaf: PeriodicLeaf,
}

impl CircleCocycle {
    pub fn field(&self) -> &CocycleField {
        &self.field
    }

    pub fn leaf(&self) -> &PeriodicLeaf {
        &self.leaf
    }

    pub fn period(&self) -> f64 {
        self.leaf.period()
    }

    /// Rotation number on the normalised circle, `1/T`.
    pub fn rotation_number(&self) -> f64 {
        self.leaf.rotation_number()
    }

    pub fn matrix_at(&self, s: f64) -> Result<SymplecticMatrix> {
        self.field.evaluate(&self.leaf.point_at(s))
    }

    pub fn iterate(&self, s: f64, n: i64) -> Result<Product> {
        self.field
            .iterate_over(&self.leaf, &self.leaf.point_at(s), n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::{periodic_points, RoofFunction, TorusAutomorphism};
    use crate::symplectic::is_symplectic;
    use proptest::prelude::*;

    fn model() -> SuspensionModel {
        SuspensionModel::default_model()
    }

    fn mixed() -> CocycleField {
        CocycleField::new(
            model(),
            1,
            1.0,
            vec![
                Generator::Diagonal {
                    log_stretch: FieldPoly::from_base(TrigPoly::constant(0.2).with_term(
                        [0, 1],
                        0.1,
                        0.05,
                    )),
                },
                Generator::Rotation {
                    angle: FieldPoly::from_base(TrigPoly::cos_x1(0.3)).with_height(1, 0.1, 0.0),
                },
            ],
        )
        .unwrap()
    }

    fn mixed4() -> CocycleField {
        let c = crate::symplectic::random_symplectic_near_identity(2, 0.5, 4).unwrap();
        CocycleField::new(
            model(),
            2,
            1.0,
            vec![
                Generator::Constant { matrix: c },
                Generator::Rotation {
                    angle: FieldPoly::from_base(TrigPoly::cos_x1(0.4)),
                },
            ],
        )
        .unwrap()
    }

    fn close(a: &Mat, b: &Mat, tol: f64) -> bool {
        max_abs(&(a - b)) <= tol * (1.0 + max_abs(b))
    }

    #[test]
    fn evaluation_basics() {
        let p = SuspensionPoint::new([0.3, 0.6], 0.2);
        let id = CocycleField::identity(model(), 2);
        assert_eq!(id.evaluate(&p).unwrap().entries(), &Mat::identity(4, 4));
        let c = diagonal_block(0.7, 1);
        let a = CocycleField::constant(model(), c.clone(), 1.0).unwrap();
        assert_eq!(a.evaluate(&p).unwrap(), c);
        let bump = CocycleField::new(
            model(),
            1,
            1.0,
            vec![Generator::Bump {
                site: SuspensionPoint::new([0.5, 0.5], 0.5),
                radius: 0.1,
                angle: 0.4,
            }],
        )
        .unwrap();
        assert_eq!(bump.evaluate(&p).unwrap().entries(), &Mat::identity(2, 2));
        assert!(CocycleField::new(model(), 1, 0.0, vec![]).is_err());
        assert!(CocycleField::new(model(), 2, 1.0, vec![Generator::Constant { matrix: c }]).is_err());
    }

    #[test]
    fn evaluations_are_symplectic() {
        for a in [mixed(), mixed4()] {
            for p in a.model().volume_sample(1000, 2) {
                let m = a.evaluate(&p).unwrap();
                assert!(is_symplectic(m.entries(), 1e-9).unwrap());
            }
        }
    }

    #[test]
    fn lifted_field_is_continuous_across_the_roof() {
        let roof = RoofFunction::trig(TrigPoly::constant(1.0).with_term([1, 1], 0.1, 0.0)).unwrap();
        let wavy = SuspensionModel::new(TorusAutomorphism::cat_map(), roof).unwrap();
        let f = FieldPoly::from_base(TrigPoly::cos_x1(0.3).with_term([0, 1], 0.0, 0.2))
            .with_height(2, 0.1, -0.05);
        for m in [model(), wavy] {
            let x = [0.17, 0.62];
            let below = SuspensionPoint::new(x, m.roof_at(x) - 1e-9);
            let above = SuspensionPoint::new(m.map().apply(x), 0.0);
            assert!((f.value(&m, &below) - f.value(&m, &above)).abs() < 1e-7);
        }
    }

    #[test]
    fn iterate_small_cases() {
        let a = mixed();
        let p = SuspensionPoint::new([0.13, 0.71], 0.4);
        let zero = a.iterate(&p, 0).unwrap();
        assert_eq!(zero.value(), Mat::identity(2, 2));
        let one = a.iterate(&p, 1).unwrap();
        assert!(close(&one.value(), a.evaluate(&p).unwrap().entries(), 1e-14));
        // direct product oracle for the cocycle law at (m, n) = (3, 4)
        let mut direct = Mat::identity(2, 2);
        let mut q = p;
        for _ in 0..7 {
            direct = a.evaluate(&q).unwrap().entries() * direct;
            q = a.model().time_one(&q);
        }
        let a4 = a.iterate(&p, 4).unwrap().value();
        let a3 = a.iterate(&a.model().iterate(&p, 4), 3).unwrap().value();
        assert!(close(&(a3 * a4), &direct, 1e-8));
        assert!(close(&a.iterate(&p, 7).unwrap().value(), &direct, 1e-8));
    }

    #[test]
    fn renormalized_long_product() {
        let a = CocycleField::constant(model(), diagonal_block(2f64.ln(), 1), 1.0).unwrap();
        let p = SuspensionPoint::new([0.1, 0.2], 0.0);
        let prod = a.iterate(&p, 5000).unwrap();
        assert!(prod.renormalizations > 0);
        assert!((prod.log_norm() - 5000.0 * 2f64.ln()).abs() < 1e-9);
        let back = a.iterate(&p, -5000).unwrap();
        assert!((back.log_norm() - 5000.0 * 2f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn holder_estimates() {
        let c = CocycleField::constant(model(), diagonal_block(0.3, 1), 1.0).unwrap();
        let h = c.holder_norm(1000, 1);
        assert_eq!(h.seminorm, 0.0);
        assert!((h.sup_norm - 0.3f64.exp()).abs() < 1e-12);

        let eps = 0.05;
        let angle = FieldPoly::from_base(TrigPoly::cos_x1(eps));
        let bound = angle.lipschitz_bound(&model());
        let r = CocycleField::new(model(), 1, 1.0, vec![Generator::Rotation { angle }]).unwrap();
        let small = r.holder_norm(1000, 9);
        let big = r.holder_norm(100_000, 9);
        assert!(big.seminorm >= small.seminorm);
        assert!(big.seminorm >= 0.5 * TAU * eps, "{}", big.seminorm);
        assert!(big.seminorm <= bound + 1e-6, "{} > {bound}", big.seminorm);
    }

    #[test]
    fn global_rotation_perturbation() {
        let a = mixed();
        assert_eq!(a.perturb_global_rotation(0.0), a);
        let theta = 0.01;
        let b = a.perturb_global_rotation(theta);
        let sup = a.holder_norm(2000, 3).sup_norm;
        for p in a.model().volume_sample(1000, 5) {
            let ea = a.evaluate(&p).unwrap();
            let eb = b.evaluate(&p).unwrap();
            assert!(is_symplectic(eb.entries(), 1e-9).unwrap());
            let diff = spectral_norm(&(eb.entries() - ea.entries()));
            assert!(diff <= theta * sup * (1.0 + 1e-6));
        }
    }

    #[test]
    fn bump_perturbation() {
        let a = mixed();
        let q = SuspensionPoint::new([0.3, 0.45], 0.5);
        assert_eq!(a.perturb_bump(q, 0.05, &SymplecticMatrix::identity(1), 3).unwrap(), a);
        let sigma = rotation_block(0.3, 1);
        let b = a.perturb_bump(q, 0.05, &sigma, 3).unwrap();
        let at_q = b.evaluate(&q).unwrap();
        let want = sigma.compose(&a.evaluate(&q).unwrap());
        assert!(at_q.distance(&want) < 1e-12);
        let far = SuspensionPoint::new([0.3, 0.55], 0.5);
        assert_eq!(b.evaluate(&far).unwrap(), a.evaluate(&far).unwrap());
        assert!(matches!(
            a.perturb_bump(q, 0.05, &diagonal_block(0.1, 1), 3),
            Err(Error::BumpNotRotation)
        ));
        assert!(matches!(
            a.perturb_bump(q, 0.4, &sigma, 3),
            Err(Error::OrbitSeparation { .. })
        ));
        // orbits that never enter the ball see no change
        for p in a.model().volume_sample(200, 8) {
            let mut x = p;
            let mut inside = false;
            for _ in 0..6 {
                inside |= a.model().dist(&x, &q) < 0.05;
                x = a.model().time_one(&x);
            }
            if !inside {
                assert_eq!(a.iterate(&p, 6).unwrap(), b.iterate(&p, 6).unwrap());
            }
        }
    }

    #[test]
    fn circle_restriction() {
        let a = mixed();
        let pts = periodic_points(a.model().map(), 2).unwrap();
        let p = *pts.iter().find(|q| q.num != [0, 0]).unwrap();
        let leaf = PeriodicLeaf::new(a.model(), p, 2).unwrap();
        let c = a.restrict_to_center_leaf(&leaf);
        assert_eq!(c.rotation_number(), 0.5);
        let s = 0.35;
        let circle = c.iterate(s, 6).unwrap().value();
        let full = a.iterate(&leaf.point_at(s), 6).unwrap().value();
        assert!(close(&circle, &full, 1e-9));
        assert!(c.matrix_at(s).unwrap().distance(&c.matrix_at(s + 2.0).unwrap()) < 1e-14);
        let k = CocycleField::constant(a.model().clone(), rotation_block(0.2, 1), 1.0).unwrap();
        let kc = k.restrict_to_center_leaf(&leaf);
        assert!(kc.matrix_at(0.1).unwrap().distance(&kc.matrix_at(1.3).unwrap()) < 1e-15);
    }

    #[test]
    fn config_round_trip() {
        let a = mixed4();
        let text = serde_json::to_string(&a).unwrap();
        let back: CocycleField = serde_json::from_str(&text).unwrap();
        assert_eq!(back, a);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn cocycle_law(x0 in 0.0..1.0f64, x1 in 0.0..1.0f64, t in 0.0..1.0f64,
                       m in -8i64..=8, n in -8i64..=8, wide in any::<bool>()) {
            let a = if wide { mixed4() } else { mixed() };
            let p = SuspensionPoint::new([x0, x1], t);
            let an = a.iterate(&p, n).unwrap().value();
            let am = a.iterate(&a.model().iterate(&p, n), m).unwrap().value();
            let amn = a.iterate(&p, m + n).unwrap().value();
            prop_assert!(close(&(am * an), &amn, 1e-8));
        }

        #[test]
        fn iterate_then_return(x0 in 0.0..1.0f64, x1 in 0.0..1.0f64, t in 0.0..1.0f64, n in -12i64..=12) {
            let a = mixed();
            let p = SuspensionPoint::new([x0, x1], t);
            let fwd = a.iterate(&p, n).unwrap().value();
            let back = a.iterate(&a.model().iterate(&p, n), -n).unwrap().value();
            prop_assert!(close(&(back * fwd), &Mat::identity(2, 2), 1e-8));
        }
    }
}
