//! Fiber bunching, strong stable/unstable linear holonomies, the center
//! Jacobian of stable holonomy, and the homoclinic loop on a center leaf.

use serde::{Deserialize, Serialize};

use crate::base::torus::{reduce, wrap_centered};
use crate::base::{
    homoclinic_points, BaseMap, HomoclinicPoint, HyperbolicityConstants, PeriodicLeaf,
    SuspensionModel, SuspensionPoint,
};
use crate::cocycle::CocycleField;
use crate::error::{Error, Result};
use crate::linalg::{spectral_norm, Mat};
use crate::lyapunov::sample_std;
use crate::symplectic::{symplectic_defect, symplectic_inverse, symplectify, SymplecticMatrix};

/// Default stopping tolerance on holonomy increments.
pub const HOLONOMY_TOL: f64 = 1e-10;
/// Default truncation cap.
pub const HOLONOMY_N_MAX: usize = 200;
/// Increments before this index are excluded from the rate fit.
const FIT_FROM: usize = 5;
/// Running products beyond this size mean the increments cannot converge.
const PRODUCT_GUARD: f64 = 1e100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Stable,
    Unstable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberBunchingCertificate {
    pub alpha: f64,
    pub lambda: f64,
    /// `sup_p ‖A(p)‖·‖A(p)⁻¹‖·λ^α` over the samples.
    pub one_step_ratio: f64,
    /// `θ̂` from the regression of the n-step quantity, when it was needed.
    pub fitted_theta: Option<f64>,
    pub c_estimate: f64,
    pub verdict: bool,
    pub n_samples: usize,
    /// `log sup_p ‖A^n(p)‖·‖A^n(p)⁻¹‖·λ^{nα}` for `n = 1..=n_max` (fallback only).
    pub log_sequence: Vec<f64>,
}

/// Least-squares slope and intercept of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mx)
}

/// Checks the bunching condition `‖A^n(p)‖·‖A^n(p)⁻¹‖·λ^{nα} ≤ C·θⁿ`.
///
/// The one-step bound `sup ‖A‖·‖A⁻¹‖·λ^α < 1` gives it with `C = 1`. When
/// that fails, `log sup_p` of the n-step quantity is regressed on `n` for
/// `n = 1..=n_max`, and the certificate passes if `θ̂ < 1` and the sequence
/// ends below where it started.
pub fn bunching_certificate(
    a: &CocycleField,
    alpha: f64,
    constants: &HyperbolicityConstants,
    n_samples: usize,
    n_max: usize,
    seed: u64,
) -> Result<FiberBunchingCertificate> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "alpha",
            reason: format!("{alpha} is not in (0, 1]"),
        });
    }
    if n_samples == 0 {
        return Err(Error::InvalidParameter {
            name: "n_samples",
            reason: "need at least one sample".into(),
        });
    }
    let lambda = constants.lambda;
    let log_lambda_alpha = alpha * lambda.ln();
    let samples = a.model().volume_sample(n_samples, seed);
    // for symplectic B, ‖B⁻¹‖ = ‖Bᵀ‖ = ‖B‖
    let one_step = samples
        .iter()
        .map(|p| 2.0 * spectral_norm(&a.evaluate_raw(p)).ln())
        .fold(f64::NEG_INFINITY, f64::max);
    let one_step_ratio = (one_step + log_lambda_alpha).exp();
    if one_step_ratio < 1.0 {
        return Ok(FiberBunchingCertificate {
            alpha,
            lambda,
            one_step_ratio,
            fitted_theta: None,
            c_estimate: 1.0,
            verdict: true,
            n_samples,
            log_sequence: Vec::new(),
        });
    }
    let n_max = n_max.max(2);
    let mut sup = vec![f64::NEG_INFINITY; n_max];
    for p in &samples {
        let dim = 2 * a.d();
        let mut m = Mat::identity(dim, dim);
        let mut log_scale = 0.0;
        let mut q = *p;
        for s in sup.iter_mut() {
            m = a.evaluate_raw(&q) * m;
            let norm = spectral_norm(&m);
            m /= norm;
            log_scale += norm.ln();
            *s = s.max(2.0 * log_scale);
            q = a.model().time_one(&q);
        }
    }
    let log_sequence: Vec<f64> = sup
        .iter()
        .enumerate()
        .map(|(i, s)| s + (i + 1) as f64 * log_lambda_alpha)
        .collect();
    let xs: Vec<f64> = (1..=n_max).map(|n| n as f64).collect();
    let (slope, intercept) = linear_fit(&xs, &log_sequence);
    let theta = slope.exp();
    let verdict = theta < 1.0 && log_sequence[n_max - 1] < log_sequence[0];
    Ok(FiberBunchingCertificate {
        alpha,
        lambda,
        one_step_ratio,
        fitted_theta: Some(theta),
        c_estimate: intercept.exp(),
        verdict,
        n_samples,
        log_sequence,
    })
}

/// Truncated limit `H^s_{p,q} = lim A^n(q)⁻¹·A^n(p)` (or its unstable mirror).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearHolonomy {
    pub matrix: SymplecticMatrix,
    pub p: SuspensionPoint,
    pub q: SuspensionPoint,
    pub side: Side,
    /// Signed offset of `q` from `p` along the leaf direction.
    pub offset: f64,
    pub truncation_n: usize,
    /// `‖Δ_N‖ / (1 − θ̂)`.
    pub tail_bound: f64,
    pub theta_hat: f64,
    /// `‖Δ_k‖` for each computed increment.
    pub increments: Vec<f64>,
}

pub(crate) fn leaf_direction(model: &SuspensionModel, side: Side) -> [f64; 2] {
    match side {
        Side::Stable => model.map().stable_direction(),
        Side::Unstable => model.map().unstable_direction(),
    }
}

/// Offset factor per step along the orbit used by the holonomy: forward
/// steps for the stable side, backward steps for the unstable side.
fn offset_factor(model: &SuspensionModel, side: Side) -> f64 {
    match side {
        Side::Stable => model.map().stable_eigenvalue(),
        Side::Unstable => 1.0 / model.map().unstable_eigenvalue(),
    }
}

/// Signed offset `a` with `q = p + a·v` on the local leaf, or `OffLeaf`.
pub fn leaf_offset(model: &SuspensionModel, p: &SuspensionPoint, q: &SuspensionPoint, side: Side) -> Result<f64> {
    if !model.roof().is_constant() {
        return Err(Error::VariableRoof);
    }
    let v = leaf_direction(model, side);
    let dx = [wrap_centered(q.x[0] - p.x[0]), wrap_centered(q.x[1] - p.x[1])];
    let a = dx[0] * v[0] + dx[1] * v[1];
    let res = ((dx[0] - a * v[0]).powi(2) + (dx[1] - a * v[1]).powi(2)).sqrt();
    if res > 1e-9 || (q.t - p.t).abs() > 1e-12 {
        return Err(Error::OffLeaf);
    }
    Ok(a)
}

/// Stable holonomy between two points of a local strong stable leaf.
pub fn stable_holonomy(
    a: &CocycleField,
    p: &SuspensionPoint,
    q: &SuspensionPoint,
    tol: f64,
    n_max: usize,
) -> Result<LinearHolonomy> {
    let off = leaf_offset(a.model(), p, q, Side::Stable)?;
    leaf_holonomy(a, a.model(), p, off, Side::Stable, tol, n_max)
}

/// Unstable holonomy between two points of a local strong unstable leaf.
pub fn unstable_holonomy(
    a: &CocycleField,
    p: &SuspensionPoint,
    q: &SuspensionPoint,
    tol: f64,
    n_max: usize,
) -> Result<LinearHolonomy> {
    let off = leaf_offset(a.model(), p, q, Side::Unstable)?;
    leaf_holonomy(a, a.model(), p, off, Side::Unstable, tol, n_max)
}

/// Holonomy from `p` to `q = p + offset·v` along a strong leaf, following the
/// base orbit of `p` through `base` and placing the partner on the leaf of
/// each orbit point, so the pair never separates through round-off.
///
/// Increments are `Δ_k = K_k·Y_k⁻¹(X_k − Y_k)·G_k` with `G_k`, `K_k` the
/// running products at `p` and (inverted) at `q`.
pub fn leaf_holonomy<B: BaseMap + ?Sized>(
    a: &CocycleField,
    base: &B,
    p: &SuspensionPoint,
    offset: f64,
    side: Side,
    tol: f64,
    n_max: usize,
) -> Result<LinearHolonomy> {
    if !a.model().roof().is_constant() {
        return Err(Error::VariableRoof);
    }
    let model = a.model();
    let v = leaf_direction(model, side);
    let factor = offset_factor(model, side);
    let q = model.offset_along(p, v, offset);
    let dim = 2 * a.d();
    let identity = Mat::identity(dim, dim);
    if offset == 0.0 {
        return Ok(LinearHolonomy {
            matrix: SymplecticMatrix::identity(a.d()),
            p: *p,
            q,
            side,
            offset,
            truncation_n: 0,
            tail_bound: 0.0,
            theta_hat: 0.0,
            increments: Vec::new(),
        });
    }
    let mut g = identity.clone();
    let mut k = identity.clone();
    let mut h = identity;
    let mut increments = Vec::new();
    let mut pk = *p;
    let mut off = offset;
    let mut converged = false;
    for _ in 0..n_max {
        let (x, y) = match side {
            Side::Stable => {
                let qk = model.offset_along(&pk, v, off);
                let pair = (a.evaluate_raw(&pk), a.evaluate_raw(&qk));
                pk = base.forward(&pk);
                off *= factor;
                pair
            }
            Side::Unstable => {
                pk = base.backward(&pk);
                off *= factor;
                let qk = model.offset_along(&pk, v, off);
                (
                    symplectic_inverse(&a.evaluate_raw(&pk)),
                    symplectic_inverse(&a.evaluate_raw(&qk)),
                )
            }
        };
        let y_inv = symplectic_inverse(&y);
        let delta = &k * (&y_inv * (&x - &y)) * &g;
        let size = spectral_norm(&delta);
        if !size.is_finite() {
            return Err(Error::NotCauchy {
                ratio: f64::INFINITY,
                last: size,
            });
        }
        h += delta;
        g = x * g;
        k *= y_inv;
        increments.push(size);
        if size < tol {
            converged = true;
            break;
        }
        if spectral_norm(&g) * spectral_norm(&k) > PRODUCT_GUARD {
            break;
        }
    }
    let theta_hat = fit_rate(&increments);
    let last = *increments.last().unwrap_or(&0.0);
    // a tiny last increment can come from the offset dropping below float
    // resolution, so a growing sequence is rejected even when it "stopped"
    if theta_hat >= 1.0 && (!converged || increments.len() > FIT_FROM + 2) {
        return Err(Error::NotCauchy {
            ratio: theta_hat,
            last,
        });
    }
    let tail_bound = if theta_hat < 1.0 {
        last / (1.0 - theta_hat)
    } else {
        f64::INFINITY
    };
    let matrix = if symplectic_defect(&h)? <= 1e-12 {
        SymplecticMatrix::new(h, 1e-12)?
    } else {
        symplectify(&h)?
    };
    Ok(LinearHolonomy {
        matrix,
        p: *p,
        q,
        side,
        offset,
        truncation_n: increments.len(),
        tail_bound,
        theta_hat,
        increments,
    })
}

/// Geometric rate of the increments from a log-linear fit, skipping the
/// first few and exact zeros.
fn fit_rate(increments: &[f64]) -> f64 {
    let from = if increments.len() > FIT_FROM + 2 { FIT_FROM } else { 0 };
    let (xs, ys): (Vec<f64>, Vec<f64>) = increments
        .iter()
        .enumerate()
        .skip(from)
        .filter(|(_, v)| **v > 0.0)
        .map(|(i, v)| (i as f64, v.ln()))
        .unzip();
    if xs.len() < 2 {
        return 0.0;
    }
    linear_fit(&xs, &ys).0.exp()
}

/// `A^n(q)⁻¹ ∘ H^s_{fⁿp, fⁿq} ∘ A^n(p)` for `q = p + offset·v_s` on the
/// global stable leaf: the bridge brings the pair within local range.
pub fn extend_stable_holonomy(
    a: &CocycleField,
    p: &SuspensionPoint,
    offset: f64,
    n_bridge: usize,
    tol: f64,
    n_max: usize,
) -> Result<LinearHolonomy> {
    let model = a.model();
    let v = model.map().stable_direction();
    let factor = model.map().stable_eigenvalue();
    let dim = 2 * a.d();
    let mut g = Mat::identity(dim, dim);
    let mut k = Mat::identity(dim, dim);
    let mut pk = *p;
    let mut off = offset;
    for _ in 0..n_bridge {
        let qk = model.offset_along(&pk, v, off);
        g = a.evaluate_raw(&pk) * g;
        k *= symplectic_inverse(&a.evaluate_raw(&qk));
        pk = model.time_one(&pk);
        off *= factor;
    }
    let local = leaf_holonomy(a, model, &pk, off, Side::Stable, tol, n_max)?;
    let h = k * local.matrix.entries() * g;
    let matrix = if symplectic_defect(&h)? <= 1e-12 {
        SymplecticMatrix::new(h, 1e-12)?
    } else {
        symplectify(&h)?
    };
    Ok(LinearHolonomy {
        matrix,
        p: *p,
        q: model.offset_along(p, v, offset),
        offset,
        truncation_n: n_bridge + local.truncation_n,
        ..local
    })
}

/// The point on the strong stable leaf of `p` over `x + a·v_s`, for any
/// roof: the height is shifted by `Σ_k r(F^k y) − r(F^k x)` so that the two
/// flow orbits stay in phase.
pub fn stable_partner(model: &SuspensionModel, p: &SuspensionPoint, a: f64) -> SuspensionPoint {
    let shift = roof_shift(model, p, a);
    let y = model.offset_along(p, model.map().stable_direction(), a);
    model.normalize(y.x, p.t + shift)
}

fn roof_shift(model: &SuspensionModel, p: &SuspensionPoint, a: f64) -> f64 {
    if model.roof().is_constant() {
        return 0.0;
    }
    let v = model.map().stable_direction();
    let lam = model.map().stable_eigenvalue();
    let mut x = p.x;
    let mut off = a;
    let mut shift = 0.0;
    for _ in 0..200 {
        let y = [x[0] + off * v[0], x[1] + off * v[1]];
        let term = model.roof_at(y) - model.roof_at(x);
        shift += term;
        if off.abs() * model.roof().lipschitz_bound() < 1e-17 {
            break;
        }
        x = model.map().apply(x);
        off *= lam;
    }
    shift
}

/// Truncated center Jacobian of stable holonomy from `p` to its stable
/// partner at offset `a`, with the center direction measured in normalised
/// height, where the flow has speed `1/r`:
/// `J_n = r(x_p)·r(x_{fⁿq}) / (r(x_{fⁿp})·r(x_q))`.
pub fn center_jacobian(model: &SuspensionModel, p: &SuspensionPoint, a: f64, n: usize) -> f64 {
    if model.roof().is_constant() {
        return 1.0;
    }
    let v = model.map().stable_direction();
    let lam = model.map().stable_eigenvalue();
    let shift = roof_shift(model, p, a);
    // base indices reached from the unnormalised pair (x, t), (y, t + shift)
    let index_after = |x0: [f64; 2], off0: f64, h0: f64, time: f64| -> (usize, [f64; 2]) {
        let mut x = x0;
        let mut off = off0;
        let mut h = h0 + time;
        let mut m = 0;
        loop {
            let b = [reduce(x[0] + off * v[0]), reduce(x[1] + off * v[1])];
            let r = model.roof_at(b);
            if h < r {
                return (m, b);
            }
            h -= r;
            x = model.map().apply(x);
            off *= lam;
            m += 1;
        }
    };
    let (_, xp) = index_after(p.x, 0.0, p.t, 0.0);
    let (_, xq) = index_after(p.x, a, p.t + shift, 0.0);
    let (_, xpn) = index_after(p.x, 0.0, p.t, n as f64);
    let (_, xqn) = index_after(p.x, a, p.t + shift, n as f64);
    model.roof_at(xp) * model.roof_at(xqn) / (model.roof_at(xpn) * model.roof_at(xq))
}

/// Homoclinic loop on the center leaf through an `F`-periodic point `p` of
/// period `k`: `z = p + a·v_u ≡ p + b·v_s` is homoclinic for `F^k`, so its
/// `F^j` image lies on both strong leaves of the leaf point over `F^j p`.
/// `h(t) = t + ω`, with `ω` measured by projecting along the stable leaf.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomoclinicLoop {
    pub leaf: PeriodicLeaf,
    pub z: HomoclinicPoint,
    pub omega: f64,
    /// Spread of `ω` over the probe coordinates.
    pub omega_dispersion: f64,
    pub tol: f64,
    pub n_max: usize,
}

impl HomoclinicLoop {
    /// Loop through the homoclinic point of `F^k` with the smallest
    /// `|a| + |b|` in the search window.
    pub fn new(model: &SuspensionModel, leaf: &PeriodicLeaf, window: i64) -> Result<Self> {
        if !model.roof().is_constant() {
            return Err(Error::VariableRoof);
        }
        let fk = model.map().power(leaf.k())?;
        let z = homoclinic_points(&fk, leaf.base_point().to_f64(), window)?
            .into_iter()
            .min_by(|x, y| (x.a.abs() + x.b.abs()).total_cmp(&(y.a.abs() + y.b.abs())))
            .ok_or(Error::InvalidParameter {
                name: "window",
                reason: "no homoclinic point in the window".into(),
            })?;
        Self::with_point(model, leaf, z)
    }

    pub fn with_point(model: &SuspensionModel, leaf: &PeriodicLeaf, z: HomoclinicPoint) -> Result<Self> {
        if !model.roof().is_constant() {
            return Err(Error::VariableRoof);
        }
        let mut lp = Self {
            leaf: leaf.clone(),
            z,
            omega: 0.0,
            omega_dispersion: 0.0,
            tol: HOLONOMY_TOL,
            n_max: HOLONOMY_N_MAX,
        };
        let t_len = leaf.period();
        let probes: Vec<f64> = (0..8).map(|i| t_len * (i as f64 + 0.5) / 8.0).collect();
        let omegas = probes
            .iter()
            .map(|&t| lp.measure_omega(model, t))
            .collect::<Result<Vec<_>>>()?;
        lp.omega = omegas.iter().sum::<f64>() / omegas.len() as f64;
        lp.omega_dispersion = sample_std(&omegas);
        Ok(lp)
    }

    pub fn with_truncation(mut self, tol: f64, n_max: usize) -> Self {
        self.tol = tol;
        self.n_max = n_max;
        self
    }

    fn check_t(&self, t: f64) -> Result<f64> {
        let t_len = self.leaf.period();
        let s = t.rem_euclid(t_len);
        if s < 1e-12 || s > t_len - 1e-12 {
            return Err(Error::UndefinedLoopPoint { t });
        }
        Ok(s)
    }

    /// Leaf point at `t` and the offsets of `h^u(t)` along `v_u` and `v_s`.
    pub fn anchor(&self, model: &SuspensionModel, t: f64) -> Result<(SuspensionPoint, f64, f64)> {
        let s = self.check_t(t)?;
        let p = self.leaf.point_at(s);
        let j = self.leaf.orbit_index(&p)?;
        let mu = model.map().unstable_eigenvalue();
        let lam = model.map().stable_eigenvalue();
        Ok((p, self.z.a * mu.powi(j as i32), self.z.b * lam.powi(j as i32)))
    }

    /// `h^u(t)`, the point of the orbit of `z` on the unstable leaf at `t`.
    pub fn unstable_image(&self, model: &SuspensionModel, t: f64) -> Result<SuspensionPoint> {
        let (p, au, _) = self.anchor(model, t)?;
        Ok(model.offset_along(&p, model.map().unstable_direction(), au))
    }

    fn measure_omega(&self, model: &SuspensionModel, t: f64) -> Result<f64> {
        let (_, _, bs) = self.anchor(model, t)?;
        let zt = self.unstable_image(model, t)?;
        let w = model.offset_along(&zt, model.map().stable_direction(), -bs);
        let s = self.leaf.coordinate_of(&w)?;
        let t_len = self.leaf.period();
        let d = s - t.rem_euclid(t_len);
        Ok(d - t_len * (d / t_len).round())
    }

    pub fn h(&self, t: f64) -> f64 {
        (t + self.omega).rem_euclid(self.leaf.period())
    }
}

/// `(h(t), H_t)` with `H_t = H^s_{h^u(t) → h(t)} ∘ H^u_{t → h^u(t)}`.
pub fn homoclinic_loop(a: &CocycleField, lp: &HomoclinicLoop, t: f64) -> Result<(f64, SymplecticMatrix)> {
    let model = a.model();
    let (p, au, bs) = lp.anchor(model, t)?;
    let hu = leaf_holonomy(a, &lp.leaf, &p, au, Side::Unstable, lp.tol, lp.n_max)?;
    // stable holonomy from the leaf point to h^u(t), then inverted
    let hs = leaf_holonomy(a, &lp.leaf, &p, bs, Side::Stable, lp.tol, lp.n_max)?;
    let h = hs.matrix.inverse().compose(&hu.matrix);
    Ok((lp.h(t), h))
}

/// `(h^j(t), H_{h^{j−1}(t)}⋯H_t)`.
pub fn loop_iterate(
    a: &CocycleField,
    lp: &HomoclinicLoop,
    j: usize,
    t: f64,
) -> Result<(f64, SymplecticMatrix)> {
    let mut s = t;
    let mut acc = SymplecticMatrix::identity(a.d());
    for _ in 0..j {
        let (next, h) = homoclinic_loop(a, lp, s)?;
        acc = h.compose(&acc);
        s = next;
    }
    Ok((s, acc))
}
