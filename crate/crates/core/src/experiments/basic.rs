//! Spectrum, bunching sweep and holonomy validation.

use rayon::prelude::*;
use serde_json::json;

use super::config::ExperimentConfig;
use super::{max_of, mean, Experiment, ExperimentReport, Relation, Series, Verdict};
use crate::base::{points_of_least_period, PeriodicLeaf, SuspensionModel, SuspensionPoint};
use crate::cocycle::{CocycleField, FieldPoly, Generator};
use crate::error::{Error, Result};
use crate::holonomy::{
    bunching_certificate, extend_stable_holonomy, leaf_direction, leaf_holonomy, linear_fit, Side,
    HOLONOMY_N_MAX, HOLONOMY_TOL,
};
use crate::linalg::{max_abs, spectral_norm, Mat};
use crate::lyapunov::{full_spectrum, full_spectrum_over, periodic_exponents, sample_std, LyapunovSpectrum};
use crate::rng::child_seed;
use crate::symplectic::{diagonal_block, SymplecticMatrix};
use crate::trig::TrigPoly;

fn dist(a: &SymplecticMatrix, b: &SymplecticMatrix) -> f64 {
    spectral_norm(&(a.entries() - b.entries()))
}

/// Leaf of least period `k` through the first such point.
pub(super) fn first_leaf(model: &SuspensionModel, k: u32) -> Result<PeriodicLeaf> {
    let pts = points_of_least_period(model.map(), k)?;
    let p = *pts.first().ok_or_else(|| Error::Config(format!("no points of least period {k}")))?;
    PeriodicLeaf::new(model, p, k)
}

/// Spectrum on a leaf from the second half of an orbit whose length is a
/// multiple of `4k`: once the QR frame has settled, the half-orbit covers
/// whole periods and the start-up transient cancels.
fn tail_spectrum(a: &CocycleField, leaf: &PeriodicLeaf, p: &SuspensionPoint, n: usize) -> Result<Vec<f64>> {
    let step = 4 * leaf.k() as usize;
    let n = n.div_ceil(step) * step;
    let s = full_spectrum_over(a, leaf, p, n)?;
    let (h, f) = (&s.convergence[1], &s.convergence[3]);
    Ok(h.exponents
        .iter()
        .zip(&f.exponents)
        .map(|(x, y)| (y * f.n as f64 - x * h.n as f64) / (f.n - h.n) as f64)
        .collect())
}

pub fn run_spectrum(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut r = ExperimentReport::new(Experiment::Spectrum, cfg);
    let e = &cfg.experiment;
    let a = cfg.build_cocycle()?;
    let dim = 2 * a.d();
    let samples = a.model().volume_sample(e.n_samples, child_seed(cfg.seed(), 1));
    let spectra: Vec<LyapunovSpectrum> = samples
        .par_iter()
        .map(|p| full_spectrum(&a, p, e.n_iter))
        .collect::<Result<_>>()?;

    let exponents: Vec<f64> = (0..dim)
        .map(|i| mean(&spectra.iter().map(|s| s.exponents[i]).collect::<Vec<_>>()))
        .collect();
    let std_errors: Vec<f64> = (0..dim)
        .map(|i| {
            let v: Vec<f64> = spectra.iter().map(|s| s.exponents[i]).collect();
            sample_std(&v) / (v.len() as f64).sqrt()
        })
        .collect();
    let pairing = max_of(spectra.iter().map(|s| s.pairing_residual));
    let sum = max_of(spectra.iter().map(|s| s.sum().abs()));

    let mut conv_cols = vec!["n".to_string()];
    conv_cols.extend((1..=dim).map(|i| format!("lambda_{i}")));
    let mut conv = Series {
        name: "convergence".into(),
        columns: conv_cols,
        rows: Vec::new(),
    };
    for (c, checkpoint) in spectra[0].convergence.iter().enumerate() {
        let mut row = vec![checkpoint.n as f64];
        for i in 0..dim {
            row.push(mean(
                &spectra.iter().map(|s| s.convergence[c].exponents[i]).collect::<Vec<_>>(),
            ));
        }
        conv.push(row);
    }
    let mut per_sample = Series::new("per_sample", &["sample", "lambda_top", "pairing_residual", "sum"]);
    for (i, s) in spectra.iter().enumerate() {
        per_sample.push(vec![i as f64, s.exponents[0], s.pairing_residual, s.sum()]);
    }

    r.record(
        "spectrum",
        &json!({
            "exponents": exponents,
            "std_errors": std_errors,
            "max_pairing_residual": pairing,
            "max_abs_sum": sum,
            "n": e.n_iter,
            "n_samples": e.n_samples,
        }),
    )?;
    r.verdict(Verdict::new("pairing_residual", pairing, Relation::Lt, e.pairing_tol));
    r.verdict(Verdict::new("exponent_sum", sum, Relation::Lt, e.sum_tol));
    if let Some(expected) = &e.expected {
        if expected.len() != dim {
            return Err(Error::Config(format!(
                "`expected` has {} entries; the spectrum has {dim}",
                expected.len()
            )));
        }
        let dev = max_of(exponents.iter().zip(expected).map(|(x, y)| (x - y).abs()));
        r.verdict(Verdict::new("expected_spectrum", dev, Relation::Lt, e.tol));
    }

    if a.model().roof().is_constant() && e.oracle_points > 0 {
        let leaf = first_leaf(a.model(), e.leaf_period)?;
        let t_len = leaf.period();
        let mut cols = vec!["s".to_string()];
        cols.extend((1..=dim).map(|i| format!("exact_{i}")));
        cols.extend((1..=dim).map(|i| format!("numeric_{i}")));
        let mut oracle = Series {
            name: "oracle".into(),
            columns: cols,
            rows: Vec::new(),
        };
        let mut worst: f64 = 0.0;
        for i in 0..e.oracle_points {
            let s = t_len * (i as f64 + 0.5) / e.oracle_points as f64;
            let p = leaf.point_at(s);
            let exact = periodic_exponents(&a, &leaf, &p)?;
            let numeric = tail_spectrum(&a, &leaf, &p, e.n_iter)?;
            worst = worst.max(max_of(
                exact.exponents.iter().zip(&numeric).map(|(x, y)| (x - y).abs()),
            ));
            let mut row = vec![s];
            row.extend(&exact.exponents);
            row.extend(&numeric);
            oracle.push(row);
        }
        r.record(
            "oracle",
            &json!({ "leaf_period": leaf.k(), "points": e.oracle_points, "max_deviation": worst }),
        )?;
        r.verdict(Verdict::new("periodic_oracle", worst, Relation::Lt, e.oracle_tol));
        r.series.push(oracle);
    }
    r.series.push(conv);
    r.series.push(per_sample);
    Ok(r)
}

pub fn run_bunching(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut r = ExperimentReport::new(Experiment::Bunching, cfg);
    let e = &cfg.experiment;
    let model = cfg.build_model()?;
    let (d, alpha) = (cfg.cocycle.d, cfg.cocycle.alpha);
    let h = model.hyperbolicity_constants();
    let closed_form = -0.5 * alpha * h.lambda.ln();
    let cert_seed = child_seed(cfg.seed(), 2);
    let certify = |a: &CocycleField| {
        bunching_certificate(a, alpha, &h, e.certificate_samples, e.certificate_n_max, cert_seed)
    };

    let n_steps = ((e.s_max - e.s_min) / e.s_step).round() as usize;
    let grid: Vec<f64> = (0..=n_steps).map(|i| e.s_min + i as f64 * e.s_step).collect();
    let mut sweep = Series::new("sweep", &["s", "one_step_ratio", "closed_form_ratio", "pass"]);
    let mut passes = Vec::with_capacity(grid.len());
    for &s in &grid {
        let a = CocycleField::constant(model.clone(), diagonal_block(s, d), alpha)?;
        let c = certify(&a)?;
        sweep.push(vec![
            s,
            c.one_step_ratio,
            (2.0 * s).exp() * h.lambda.powf(alpha),
            if c.verdict { 1.0 } else { 0.0 },
        ]);
        passes.push(c.verdict);
    }
    // one pass/fail switch along the grid
    let switches = passes.windows(2).filter(|w| w[0] != w[1]).count();
    let boundary = match passes.iter().position(|p| !p) {
        Some(i) if i > 0 && switches == 1 => Some(0.5 * (grid[i - 1] + grid[i])),
        _ => None,
    };
    let boundary_error = boundary.map_or(e.s_max - e.s_min, |b| (b - closed_form).abs());

    let identity = certify(&CocycleField::identity(model.clone(), d))?;
    let strong_s = 2.0 * closed_form + 1.0;
    let strong = certify(&CocycleField::constant(model.clone(), diagonal_block(strong_s, d), alpha)?)?;
    let configured = certify(&cfg.build_cocycle()?)?;

    r.record(
        "boundary",
        &json!({
            "closed_form": closed_form,
            "empirical": boundary,
            "grid_step": e.s_step,
            "lambda": h.lambda,
            "alpha": alpha,
            "switches": switches,
        }),
    )?;
    r.record("identity_certificate", &identity)?;
    r.record("strong_certificate", &json!({ "s": strong_s, "certificate": strong }))?;
    r.record("configured_certificate", &configured)?;
    r.verdict(Verdict::new("single_crossing", switches as f64, Relation::Le, 1.0));
    r.verdict(Verdict::new("boundary_vs_closed_form", boundary_error, Relation::Le, e.s_step));
    r.verdict(Verdict::flag("identity_passes", identity.verdict));
    r.verdict(Verdict::flag("strong_diagonal_fails", !strong.verdict));
    r.series.push(sweep);
    Ok(r)
}

pub fn run_holonomy_validation(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut r = ExperimentReport::new(Experiment::Holonomy, cfg);
    let e = &cfg.experiment;
    let a = cfg.build_cocycle()?;
    let m = a.model().clone();
    let seed = cfg.seed();
    let h = m.hyperbolicity_constants();
    let cert = bunching_certificate(&a, a.alpha(), &h, e.certificate_samples, e.certificate_n_max, child_seed(seed, 1))?;
    r.record("certificate", &cert)?;
    r.verdict(Verdict::flag("bunching_certificate", cert.verdict));
    if !cert.verdict {
        return Ok(r);
    }
    let tol = 1e-12;

    // equivariance and composition, both sides
    let points = m.volume_sample(e.n_pairs, child_seed(seed, 2));
    let rows: Vec<[f64; 3]> = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let off = 0.02 + 0.2 * (i as f64 / e.n_pairs as f64);
            let mut worst = [off, 0.0, 0.0];
            for side in [Side::Stable, Side::Unstable] {
                let factor = match side {
                    Side::Stable => m.map().stable_eigenvalue(),
                    Side::Unstable => m.map().unstable_eigenvalue(),
                };
                let hol = leaf_holonomy(&a, &m, p, off, side, tol, HOLONOMY_N_MAX)?;
                let fp = m.time_one(p);
                let hf = leaf_holonomy(&a, &m, &fp, off * factor, side, tol, HOLONOMY_N_MAX)?;
                let conj = a.evaluate(&hol.q)?.compose(&hol.matrix).compose(&a.evaluate(p)?.inverse());
                worst[1] = worst[1].max(dist(&hf.matrix, &conj));
                let w = m.offset_along(p, leaf_direction(&m, side), 0.4 * off);
                let h1 = leaf_holonomy(&a, &m, p, 0.4 * off, side, tol, HOLONOMY_N_MAX)?;
                let h2 = leaf_holonomy(&a, &m, &w, 0.6 * off, side, tol, HOLONOMY_N_MAX)?;
                worst[2] = worst[2].max(dist(&hol.matrix, &h2.matrix.compose(&h1.matrix)));
            }
            Ok(worst)
        })
        .collect::<Result<_>>()?;
    let mut eq_series = Series::new("equivariance", &["offset", "equivariance", "composition"]);
    for row in &rows {
        eq_series.push(row.to_vec());
    }
    let eq = max_of(rows.iter().map(|r| r[1]));
    let comp = max_of(rows.iter().map(|r| r[2]));

    // Hölder regression of ‖H − I‖ against distance
    let hp = m.volume_sample(e.holder_points, child_seed(seed, 3));
    let pairs: Vec<(f64, f64)> = hp
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let off = 10f64.powf(-4.0 + 3.0 * (i as f64 / e.holder_points as f64));
            let hol = leaf_holonomy(&a, &m, p, off, Side::Stable, 1e-13, HOLONOMY_N_MAX)?;
            let dev = max_abs(&(hol.matrix.entries() - Mat::identity(2 * a.d(), 2 * a.d())));
            Ok((m.dist(p, &hol.q).ln(), dev.ln()))
        })
        .collect::<Result<_>>()?;
    let usable: Vec<(f64, f64)> = pairs.into_iter().filter(|(_, y)| y.is_finite()).collect();
    let mut holder = Series::new("holder_regression", &["log_dist", "log_deviation"]);
    for (x, y) in &usable {
        holder.push(vec![*x, *y]);
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = usable.iter().copied().unzip();
    let (slope, intercept) = if usable.len() >= 2 {
        linear_fit(&xs, &ys)
    } else {
        (f64::INFINITY, 0.0)
    };
    // a constant cocycle has identity holonomies and no slope to fit
    let slope_value = if usable.len() >= 2 { slope } else { a.alpha() };

    // bridges: a global offset through 3 and 6 pullbacks
    let bp = m.volume_sample(5, child_seed(seed, 4));
    let bridge = max_of(
        bp.iter()
            .map(|p| {
                let b3 = extend_stable_holonomy(&a, p, 2.5, 3, tol, HOLONOMY_N_MAX)?;
                let b6 = extend_stable_holonomy(&a, p, 2.5, 6, tol, HOLONOMY_N_MAX)?;
                Ok(dist(&b3.matrix, &b6.matrix))
            })
            .collect::<Result<Vec<_>>>()?,
    );

    // increment ratios at floor points, and the doubled-truncation tail check
    let gp = m.volume_sample(50, child_seed(seed, 5));
    let mut ratio_excess: f64 = f64::NEG_INFINITY;
    let mut tail_violation: f64 = 0.0;
    let mut increments = Series::new("increments", &["sample", "k", "increment", "theta_hat"]);
    for (i, p) in gp.iter().enumerate() {
        let p = SuspensionPoint::new(p.x, 0.0);
        let side = if i % 2 == 0 { Side::Stable } else { Side::Unstable };
        let hol = leaf_holonomy(&a, &m, &p, 0.15, side, HOLONOMY_TOL, HOLONOMY_N_MAX)?;
        for w in hol.increments.windows(2).skip(5) {
            if w[0] > 0.0 {
                ratio_excess = ratio_excess.max(w[1] / w[0] - hol.theta_hat);
            }
        }
        if i < 5 {
            for (k, inc) in hol.increments.iter().enumerate() {
                increments.push(vec![i as f64, (k + 1) as f64, *inc, hol.theta_hat]);
            }
        }
        if i < 10 {
            let short = leaf_holonomy(&a, &m, &p, 0.2, side, 0.0, 15)?;
            let long = leaf_holonomy(&a, &m, &p, 0.2, side, 0.0, 30)?;
            tail_violation = tail_violation.max(dist(&short.matrix, &long.matrix) - short.tail_bound);
        }
    }
    // no increments past the fit start: the holonomy converged immediately
    let ratio_excess = if ratio_excess.is_finite() { ratio_excess } else { 0.0 };

    // the diagnostic path: a stretch far outside the bunching range
    let unbunched = CocycleField::new(
        m.clone(),
        a.d(),
        a.alpha(),
        vec![
            Generator::Constant {
                matrix: diagonal_block(2.3, a.d()),
            },
            Generator::Rotation {
                angle: FieldPoly::from_base(TrigPoly::cos_x1(0.5)),
            },
        ],
    )?;
    let diag = leaf_holonomy(&unbunched, &m, &SuspensionPoint::new([0.2, 0.2], 0.1), 0.2, Side::Stable, 1e-10, 60);
    let diagnostic = match &diag {
        Err(Error::NotCauchy { ratio, last }) => json!({ "raised": true, "ratio": ratio, "last": last }),
        Err(other) => json!({ "raised": false, "error": other.to_string() }),
        Ok(h) => json!({ "raised": false, "truncation_n": h.truncation_n }),
    };

    r.record(
        "residuals",
        &json!({
            "equivariance": eq,
            "composition": comp,
            "holder_slope": slope_value,
            "holder_intercept": intercept,
            "holder_points_used": usable.len(),
            "bridge": bridge,
            "ratio_excess": ratio_excess,
            "tail_violation": tail_violation,
        }),
    )?;
    r.record("unbunched_diagnostic", &diagnostic)?;
    r.verdict(Verdict::new("equivariance", eq, Relation::Lt, e.holonomy_tol));
    r.verdict(Verdict::new("composition", comp, Relation::Lt, e.holonomy_tol));
    r.verdict(Verdict::new("holder_slope", slope_value, Relation::Ge, a.alpha() - e.holder_slack));
    r.verdict(Verdict::new("bridge_independence", bridge, Relation::Lt, e.bridge_tol));
    r.verdict(Verdict::new("increment_ratio_excess", ratio_excess, Relation::Le, e.ratio_slack));
    r.verdict(Verdict::new("doubled_truncation_tail", tail_violation, Relation::Le, e.holonomy_tol));
    r.verdict(Verdict::flag("unbunched_not_cauchy", matches!(diag, Err(Error::NotCauchy { .. }))));
    r.series.push(eq_series);
    r.series.push(holder);
    r.series.push(increments);
    Ok(r)
}
