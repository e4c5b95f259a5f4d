//! Theta scan, the su-breaking pipeline and the openness probe.

use rand::Rng as _;
use serde_json::{json, Value};

use super::config::ExperimentConfig;
use super::{Experiment, ExperimentReport, Relation, Series, Verdict};
use crate::base::{points_of_least_period, PeriodicLeaf, SuspensionModel, SuspensionPoint};
use crate::cocycle::{CocycleField, FieldPoly, Generator};
use crate::error::{Error, Result};
use crate::holonomy::{homoclinic_loop, HomoclinicLoop, HOLONOMY_N_MAX, HOLONOMY_TOL};
use crate::invariance::{sampled_su_defect, sampled_suc_defect, zero_exponent_check, DefectReport};
use crate::lyapunov::{
    circle_cocycle_exponent, finite_time_splitting_over, integrated_exponent, theta_scan, ExponentEstimate,
    ThetaScan, POSITIVE_SIGMAS,
};
use crate::rng::{child_seed, stream};
use crate::symplectic::{
    in_generic_position, make_transverse_rotation, rotation_block, Subspace, SymplecticMatrix,
};
use crate::trig::TrigPoly;

/// Leaf of least period `k`, preferring a point with `F^{k/2} p = −p` so that
/// the leaf is mapped to itself by `x ↦ −x` with a half-period shift.
fn scan_leaf(model: &SuspensionModel, k: u32) -> Result<(PeriodicLeaf, bool)> {
    let f = model.map();
    let pts = points_of_least_period(f, k)?;
    let symmetric = (k % 2 == 0)
        .then(|| {
            pts.iter().copied().find(|p| {
                let mut q = *p;
                for _ in 0..k / 2 {
                    q = f.apply_rational(q);
                }
                q == p.neg()
            })
        })
        .flatten();
    let p = symmetric
        .or_else(|| pts.first().copied())
        .ok_or_else(|| Error::Config(format!("no points of least period {k}")))?;
    Ok((PeriodicLeaf::new(model, p, k)?, symmetric.is_some()))
}

/// `θ_i = i·spacing` for `|θ_i| ≤ theta_max`, symmetric about 0.
fn theta_grid(cfg: &ExperimentConfig, t_len: f64) -> Result<(Vec<f64>, f64)> {
    let e = &cfg.experiment;
    let max_spacing = 1.0 / (4.0 * t_len);
    let spacing = e.theta_spacing.unwrap_or(max_spacing);
    if spacing > max_spacing * (1.0 + 1e-12) {
        return Err(Error::Config(format!(
            "theta_spacing {spacing} exceeds 1/(4T) = {max_spacing}"
        )));
    }
    let half = (e.theta_max / spacing + 1e-9).floor() as i64;
    Ok(((-half..=half).map(|i| i as f64 * spacing).collect(), spacing))
}

/// The confirmed-positive entry with the largest restricted exponent `L`
/// among those with `2L ≤ ½·α·|log λ|`, which keeps the rotated cocycle well
/// inside the bunching range on the leaf. Ties go to the earlier entry.
pub fn select_theta(scan: &ThetaScan, alpha: f64, lambda: f64) -> Option<usize> {
    let budget = 0.25 * alpha * lambda.ln().abs();
    let mut best: Option<usize> = None;
    for (i, entry) in scan.entries.iter().enumerate() {
        if !entry.confirmed || entry.estimate.value > budget {
            continue;
        }
        if best.map_or(true, |b| entry.estimate.value > scan.entries[b].estimate.value) {
            best = Some(i);
        }
    }
    best
}

struct ScanOutcome {
    leaf: PeriodicLeaf,
    symmetric_leaf: bool,
    spacing: f64,
    scan: ThetaScan,
    winner: Option<usize>,
}

fn scan_for(cfg: &ExperimentConfig, a: &CocycleField) -> Result<ScanOutcome> {
    let e = &cfg.experiment;
    let (leaf, symmetric_leaf) = scan_leaf(a.model(), e.leaf_period)?;
    let (thetas, spacing) = theta_grid(cfg, leaf.period())?;
    let scan = theta_scan(a, &leaf, &thetas, e.leaf_grid, e.leaf_n_iter)?;
    let lambda = a.model().hyperbolicity_constants().lambda;
    let winner = select_theta(&scan, a.alpha(), lambda);
    Ok(ScanOutcome {
        leaf,
        symmetric_leaf,
        spacing,
        scan,
        winner,
    })
}

fn scan_series(scan: &ThetaScan) -> Series {
    let with_oracle = scan.entries.iter().all(|e| e.oracle.is_some());
    let mut cols = vec!["theta", "exponent", "std_error", "positive", "confirmed"];
    if with_oracle {
        cols.push("oracle");
    }
    let mut s = Series::new("theta_scan", &cols);
    for e in &scan.entries {
        let mut row = vec![
            e.theta,
            e.estimate.value,
            e.estimate.std_error,
            e.positive as u8 as f64,
            e.confirmed as u8 as f64,
        ];
        if let (true, Some(o)) = (with_oracle, e.oracle) {
            row.push(o);
        }
        s.push(row);
    }
    s
}

pub fn run_theta_scan(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut r = ExperimentReport::new(Experiment::ThetaScan, cfg);
    let e = &cfg.experiment;
    let a = cfg.build_cocycle()?;
    let out = scan_for(cfg, &a)?;
    let entries = &out.scan.entries;
    let t_len = out.leaf.period();

    let unperturbed = circle_cocycle_exponent(&a.restrict_to_center_leaf(&out.leaf), e.leaf_grid, e.leaf_n_iter)?;
    let zero = entries
        .iter()
        .find(|x| x.theta == 0.0)
        .expect("the grid contains 0");
    let zero_dev = (zero.estimate.value - unperturbed.value).abs();

    let n = entries.len();
    let mut sym_residual: f64 = 0.0;
    let mut sym_threshold: f64 = 0.0;
    for i in 0..n / 2 {
        let (x, y) = (&entries[i].estimate, &entries[n - 1 - i].estimate);
        sym_residual = sym_residual.max((x.value - y.value).abs());
        sym_threshold = sym_threshold.max(2.0 * (x.std_error.powi(2) + y.std_error.powi(2)).sqrt());
    }
    let confirmed = entries.iter().filter(|x| x.confirmed).count();
    let positive = entries.iter().filter(|x| x.positive).count();
    let winner = out.winner.map(|i| {
        json!({
            "theta": entries[i].theta,
            "exponent": entries[i].estimate.value,
            "std_error": entries[i].estimate.std_error,
            "oracle": entries[i].oracle,
        })
    });
    let smallest = entries
        .iter()
        .filter(|x| x.confirmed)
        .map(|x| x.theta.abs())
        .fold(None, |m: Option<f64>, t| Some(m.map_or(t, |m| m.min(t))));

    r.record(
        "leaf",
        &json!({
            "period": t_len,
            "base_point": out.leaf.base_point(),
            "symmetric": out.symmetric_leaf,
        }),
    )?;
    r.record(
        "scan",
        &json!({
            "spacing": out.spacing,
            "max_spacing": 1.0 / (4.0 * t_len),
            "entries": n,
            "positive": positive,
            "confirmed": confirmed,
            "smallest_confirmed_abs_theta": smallest,
            "unperturbed": unperturbed,
            "zero_entry_deviation": zero_dev,
            "symmetry_residual": sym_residual,
            "winner": winner,
        }),
    )?;
    r.verdict(Verdict::new("spacing", out.spacing, Relation::Le, 1.0 / (4.0 * t_len)));
    r.verdict(Verdict::new("leaf_period", t_len, Relation::Ge, 5.0));
    r.verdict(Verdict::new("confirmed_positive_count", confirmed as f64, Relation::Gt, 0.0));
    r.verdict(Verdict::new("zero_entry_deviation", zero_dev, Relation::Le, 1e-12));
    if e.expect_symmetric {
        r.verdict(Verdict::new("theta_symmetry", sym_residual, Relation::Le, sym_threshold));
    }
    r.series.push(scan_series(&out.scan));
    Ok(r)
}

/// Output of the construction steps of the su-breaking pipeline.
#[derive(Debug, Clone)]
pub struct SuBreakingPipeline {
    pub baseline: CocycleField,
    pub leaf: PeriodicLeaf,
    pub scan: ThetaScan,
    pub theta: f64,
    /// `R_θ·A` for the selected `θ`.
    pub rotated: CocycleField,
    pub homoclinic: HomoclinicLoop,
    pub loop_t: f64,
    pub splitting: (Subspace, Subspace),
    pub loop_matrix: SymplecticMatrix,
    /// Angle returned by the transversality search; 0 when the identity
    /// already works.
    pub searched_angle: f64,
    pub sigma_angle: f64,
    pub site: SuspensionPoint,
    /// The rotated cocycle with the bump `σ^φ` at `site`.
    pub perturbed: CocycleField,
}

fn transported_pairs(h: &SymplecticMatrix, vu: &Subspace, vs: &Subspace) -> Result<Vec<(Subspace, Subspace)>> {
    let hvu = vu.image(h.entries())?;
    let hvs = vs.image(h.entries())?;
    Ok(vec![
        (hvu.clone(), vu.clone()),
        (hvu, vs.clone()),
        (hvs.clone(), vu.clone()),
        (hvs, vs.clone()),
    ])
}

impl SuBreakingPipeline {
    pub fn build(cfg: &ExperimentConfig) -> Result<Self> {
        let e = &cfg.experiment;
        let seed = cfg.seed();
        let baseline = cfg.build_cocycle()?;
        let model = baseline.model().clone();
        let out = scan_for(cfg, &baseline)?;
        let winner = out.winner.ok_or(Error::Config(
            "theta scan found no admissible positive restricted exponent".into(),
        ))?;
        let theta = out.scan.entries[winner].theta;
        let rotated = baseline.perturb_global_rotation(theta);
        let leaf = out.leaf;

        let homoclinic = HomoclinicLoop::new(&model, &leaf, 2)?;
        let loop_t = e.loop_t;
        let p = leaf.point_at(loop_t);
        let splitting = finite_time_splitting_over(&rotated, &leaf, &p, e.split_n, rotated.d())?;
        let (_, loop_matrix) = homoclinic_loop(&rotated, &homoclinic, loop_t)?;
        let pairs = transported_pairs(&loop_matrix, &splitting.0, &splitting.1)?;
        let (searched_angle, _) = make_transverse_rotation(&pairs, e.bump_angle, child_seed(seed, 11), 64)?;
        // the identity is generic already; keep a nonzero σ so the bump acts
        let sigma_angle = if searched_angle != 0.0 {
            searched_angle
        } else {
            let d = rotated.d();
            [e.bump_angle, -e.bump_angle]
                .into_iter()
                .find(|&t| in_generic_position(&rotation_block(t, d), &pairs).unwrap_or(false))
                .ok_or(Error::TransversalityExhausted { tries: 2 })?
        };
        let site = homoclinic.unstable_image(&model, loop_t)?;
        let sigma = rotation_block(sigma_angle, rotated.d());
        let perturbed = rotated.perturb_bump(site, e.bump_radius, &sigma, e.window)?;
        Ok(Self {
            baseline,
            leaf,
            scan: out.scan,
            theta,
            rotated,
            homoclinic,
            loop_t,
            splitting,
            loop_matrix,
            searched_angle,
            sigma_angle,
            site,
            perturbed,
        })
    }
}

fn defect_summary(d: &DefectReport) -> Value {
    json!({
        "mean_defect": d.mean_defect,
        "raw_mean": d.raw_mean,
        "bootstrap_se": d.bootstrap_se,
        "n_pairs": d.n_pairs,
        "transport_metric": d.transport_metric,
        "mean_transport": d.mean_transport,
        "mean_noise": d.mean_noise,
        "sides": d.sides,
    })
}

fn loop_angles(a: &CocycleField, pl: &SuBreakingPipeline) -> Result<[f64; 2]> {
    let (_, h) = homoclinic_loop(a, &pl.homoclinic, pl.loop_t)?;
    let hvu = pl.splitting.0.image(h.entries())?;
    Ok([hvu.angle_to(&pl.splitting.0), hvu.angle_to(&pl.splitting.1)])
}

pub fn run_su_breaking(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut r = ExperimentReport::new(Experiment::SuBreaking, cfg);
    let e = &cfg.experiment;
    let seed = cfg.seed();
    let pl = SuBreakingPipeline::build(cfg)?;
    let model = pl.baseline.model();
    let samples = model.volume_sample(e.n_samples, child_seed(seed, 1));
    let su = |a: &CocycleField, s: u64| {
        sampled_su_defect(a, e.defect_pairs, e.max_offset, e.n_transient, e.n_atoms, HOLONOMY_TOL, HOLONOMY_N_MAX, s)
            .map(|(_, d)| d)
    };
    let suc = |a: &CocycleField| {
        sampled_suc_defect(a, &pl.homoclinic, e.loop_grid, 1, e.n_transient, e.n_atoms, child_seed(seed, 4))
    };
    let su_seed = child_seed(seed, 2);

    // (1) baseline
    let zero = zero_exponent_check(&pl.baseline, &samples, e.n_iter, e.tol)?;
    let su0 = su(&pl.baseline, su_seed)?;
    let suc0 = suc(&pl.baseline)?;
    // (2) rotated, (5) bumped, and the σ = I control
    let lam1 = integrated_exponent(&pl.rotated, &samples, e.n_iter)?;
    let su1 = su(&pl.rotated, su_seed)?;
    let suc1 = suc(&pl.rotated)?;
    let lam2 = integrated_exponent(&pl.perturbed, &samples, e.n_iter)?;
    let su2 = su(&pl.perturbed, su_seed)?;
    let suc2 = suc(&pl.perturbed)?;
    let control = pl.rotated.perturb_bump(pl.site, e.bump_radius, &SymplecticMatrix::identity(pl.rotated.d()), e.window)?;
    let su_ctrl = su(&control, child_seed(seed, 3))?;
    let angles1 = loop_angles(&pl.rotated, &pl)?;
    let angles2 = loop_angles(&pl.perturbed, &pl)?;

    let mut stages = Series::new(
        "stages",
        &[
            "stage",
            "lambda_top",
            "lambda_se",
            "su_defect",
            "su_se",
            "suc_defect",
            "suc_se",
            "angle_hvu_vu",
            "angle_hvu_vs",
        ],
    );
    let lam0 = zero.estimate;
    let base_angles = [0.0, 0.0];
    for (i, (lam, s, c, ang)) in [
        (&lam0, &su0, &suc0, &base_angles),
        (&lam1, &su1, &suc1, &angles1),
        (&lam2, &su2, &suc2, &angles2),
    ]
    .into_iter()
    .enumerate()
    {
        stages.push(vec![
            i as f64,
            lam.value,
            lam.std_error,
            s.mean_defect,
            s.bootstrap_se,
            c.mean_defect,
            c.bootstrap_se,
            ang[0],
            ang[1],
        ]);
    }
    let mut per_pair = Series::new("su_per_pair", &["pair", "baseline", "rotated", "perturbed", "control"]);
    for i in 0..su0.per_pair.len() {
        per_pair.push(vec![
            i as f64,
            su0.per_pair[i],
            su1.per_pair[i],
            su2.per_pair[i],
            su_ctrl.per_pair[i],
        ]);
    }

    let growth_threshold = e.growth_factor * su0.mean_defect.max(su0.bootstrap_se);
    let control_diff = (su_ctrl.mean_defect - su1.mean_defect).abs();
    let control_threshold = 2.0 * (su_ctrl.bootstrap_se.powi(2) + su1.bootstrap_se.powi(2)).sqrt();
    let winner = &pl.scan.entries.iter().find(|x| x.theta == pl.theta).expect("winner in scan");

    r.record("baseline", &json!({ "zero_exponent": zero, "su": defect_summary(&su0), "suc": defect_summary(&suc0) }))?;
    r.record(
        "theta",
        &json!({
            "theta": pl.theta,
            "restricted_exponent": winner.estimate,
            "oracle": winner.oracle,
            "leaf_period": pl.leaf.period(),
            "leaf_base_point": pl.leaf.base_point(),
        }),
    )?;
    r.record(
        "rotated",
        &json!({ "lambda_top": lam1, "su": defect_summary(&su1), "suc": defect_summary(&suc1), "loop_angles": angles1 }),
    )?;
    r.record(
        "loop",
        &json!({
            "t": pl.loop_t,
            "homoclinic_point": pl.homoclinic.z,
            "omega": pl.homoclinic.omega,
            "omega_dispersion": pl.homoclinic.omega_dispersion,
            "splitting_angle": pl.splitting.0.angle_to(&pl.splitting.1),
        }),
    )?;
    r.record(
        "bump",
        &json!({
            "site": pl.site,
            "radius": e.bump_radius,
            "window": e.window,
            "searched_angle": pl.searched_angle,
            "sigma_angle": pl.sigma_angle,
        }),
    )?;
    r.record(
        "perturbed",
        &json!({ "lambda_top": lam2, "su": defect_summary(&su2), "suc": defect_summary(&suc2), "loop_angles": angles2 }),
    )?;
    r.record("control", &json!({ "su": defect_summary(&su_ctrl), "difference": control_diff }))?;

    r.verdict(Verdict::new("baseline_zero_exponent", lam0.value.abs(), Relation::Lt, e.tol));
    r.verdict(Verdict::new("baseline_su_within_noise", su0.mean_defect, Relation::Lt, 2.0 * su0.bootstrap_se));
    r.verdict(Verdict::new("su_growth", su2.mean_defect, Relation::Gt, growth_threshold));
    r.verdict(Verdict::new("perturbed_exponent", lam2.value, Relation::Gt, POSITIVE_SIGMAS * lam2.std_error));
    r.verdict(Verdict::new("control_unchanged", control_diff, Relation::Le, control_threshold));
    r.series.push(stages);
    r.series.push(per_pair);
    r.series.push(scan_series(&pl.scan));
    Ok(r)
}

/// Unit-size random field: a constant and three Fourier modes with
/// coefficients summing to 1 in absolute value.
fn random_direction(g: &mut crate::rng::Rng) -> TrigPoly {
    let mut c: Vec<f64> = (0..7).map(|_| g.gen_range(-1.0..1.0)).collect();
    let total: f64 = c.iter().map(|v: &f64| v.abs()).sum::<f64>().max(1e-12);
    c.iter_mut().for_each(|v| *v /= total);
    TrigPoly::constant(c[0])
        .with_term([1, 0], c[1], c[2])
        .with_term([0, 1], c[3], c[4])
        .with_term([1, 1], c[5], c[6])
}

/// `A` with a rotation and a diagonal factor of size `δ` in front.
fn perturbed_copy(a: &CocycleField, dirs: &(TrigPoly, TrigPoly), delta: f64) -> Result<CocycleField> {
    if delta == 0.0 {
        return Ok(a.clone());
    }
    let mut gens = vec![
        Generator::Rotation {
            angle: FieldPoly::from_base(dirs.0.scaled(delta)),
        },
        Generator::Diagonal {
            log_stretch: FieldPoly::from_base(dirs.1.scaled(delta)),
        },
    ];
    gens.extend(a.generators().iter().cloned());
    CocycleField::new(a.model().clone(), a.d(), a.alpha(), gens)
}

pub fn run_openness(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut r = ExperimentReport::new(Experiment::Openness, cfg);
    let e = &cfg.experiment;
    let seed = cfg.seed();
    let pl = SuBreakingPipeline::build(cfg)?;
    let a = &pl.perturbed;
    let samples = a.model().volume_sample(e.n_samples, child_seed(seed, 1));
    let lam = integrated_exponent(a, &samples, e.n_iter)?;
    let norm = a.holder_norm(200, child_seed(seed, 5));
    let default_delta = 0.1 * lam.value.max(0.0) / norm.total();
    let delta = e.delta.unwrap_or(default_delta);

    let n_dirs = e.draws.max(e.sweep_draws);
    let dirs: Vec<(TrigPoly, TrigPoly)> = (0..n_dirs)
        .map(|i| {
            let mut g = stream(child_seed(seed, 6), i as u64);
            (random_direction(&mut g), random_direction(&mut g))
        })
        .collect();
    let exponent_at = |dir: &(TrigPoly, TrigPoly), d: f64| -> Result<ExponentEstimate> {
        integrated_exponent(&perturbed_copy(a, dir, d)?, &samples, e.n_iter)
    };

    let mut draws = Series::new("draws", &["draw", "delta", "lambda_top", "std_error", "positive"]);
    let mut failures = 0usize;
    for (i, dir) in dirs.iter().take(e.draws).enumerate() {
        let est = exponent_at(dir, delta)?;
        let ok = est.is_positive();
        failures += (!ok) as usize;
        draws.push(vec![i as f64, delta, est.value, est.std_error, ok as u8 as f64]);
    }
    let at_zero = exponent_at(&dirs[0], 0.0)?;
    let zero_dev = (at_zero.value - lam.value).abs();

    // common directions across the δ-grid
    let mut sweep = Series::new("sweep", &["delta", "failure_fraction", "draws"]);
    let mut fractions = Vec::new();
    let mut tested: Vec<(f64, bool)> = vec![(delta, failures == 0)];
    for &mult in &e.delta_multipliers {
        let d = mult * delta;
        let mut fails = 0usize;
        for dir in dirs.iter().take(e.sweep_draws) {
            fails += (!exponent_at(dir, d)?.is_positive()) as usize;
        }
        let frac = fails as f64 / e.sweep_draws.max(1) as f64;
        fractions.push(frac);
        tested.push((d, fails == 0));
        sweep.push(vec![d, frac, e.sweep_draws as f64]);
    }
    tested.sort_by(|x, y| x.0.total_cmp(&y.0));
    let radius = tested
        .iter()
        .take_while(|(_, ok)| *ok)
        .last()
        .map(|(d, _)| *d);
    let decreases = fractions.windows(2).filter(|w| w[1] < w[0]).count();

    r.record(
        "center",
        &json!({
            "theta": pl.theta,
            "sigma_angle": pl.sigma_angle,
            "lambda_top": lam,
            "holder_norm": norm,
        }),
    )?;
    r.record(
        "openness",
        &json!({
            "default_delta": default_delta,
            "delta": delta,
            "draws": e.draws,
            "failures": failures,
            "zero_delta_deviation": zero_dev,
            "failure_fractions": fractions,
            "empirical_positivity_radius": radius,
        }),
    )?;
    r.verdict(Verdict::new("center_exponent", lam.value, Relation::Gt, POSITIVE_SIGMAS * lam.std_error));
    r.verdict(Verdict::new("failures_at_delta", failures as f64, Relation::Le, 0.0));
    r.verdict(Verdict::new("zero_delta_deviation", zero_dev, Relation::Le, 0.0));
    r.verdict(Verdict::new("failure_fraction_decreases", decreases as f64, Relation::Le, 0.0));
    r.series.push(draws);
    r.series.push(sweep);
    Ok(r)
}
