//! Suspension flow of a torus automorphism under a roof function.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::torus::{reduce, reduce_point, torus_dist, TorusAutomorphism, TorusPoint};
use super::BaseMap;
use crate::error::{Error, Result};
use crate::rng;
use crate::trig::TrigPoly;

/// Roof under which the flow runs. The constant roof is `r ≡ 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RoofFunction {
    Constant,
    Trig { poly: TrigPoly },
}

impl RoofFunction {
    pub fn trig(poly: TrigPoly) -> Result<Self> {
        let r = RoofFunction::Trig { poly };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        let lower = self.lower_bound();
        if lower > 0.0 {
            Ok(())
        } else {
            Err(Error::RoofNotPositive { lower })
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, RoofFunction::Constant)
    }

    pub fn value(&self, x: TorusPoint) -> f64 {
        match self {
            RoofFunction::Constant => 1.0,
            RoofFunction::Trig { poly } => poly.value(x),
        }
    }

    pub fn lower_bound(&self) -> f64 {
        match self {
            RoofFunction::Constant => 1.0,
            RoofFunction::Trig { poly } => poly.mean() - poly.oscillation_bound(),
        }
    }

    pub fn upper_bound(&self) -> f64 {
        match self {
            RoofFunction::Constant => 1.0,
            RoofFunction::Trig { poly } => poly.mean() + poly.oscillation_bound(),
        }
    }

    pub fn lipschitz_bound(&self) -> f64 {
        match self {
            RoofFunction::Constant => 0.0,
            RoofFunction::Trig { poly } => poly.lipschitz_bound(),
        }
    }

    /// `∫ r dx` over the torus.
    pub fn integral(&self) -> f64 {
        match self {
            RoofFunction::Constant => 1.0,
            RoofFunction::Trig { poly } => poly.mean(),
        }
    }

    /// `∫ r² dx` over the torus.
    pub fn integral_of_square(&self) -> f64 {
        match self {
            RoofFunction::Constant => 1.0,
            RoofFunction::Trig { poly } => poly.mean_square(),
        }
    }
}

/// Point `(x, t)` of the suspension manifold with `0 ≤ t < r(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuspensionPoint {
    pub x: TorusPoint,
    pub t: f64,
}

impl SuspensionPoint {
    pub fn new(x: TorusPoint, t: f64) -> Self {
        Self {
            x: reduce_point(x),
            t,
        }
    }
}

/// Rates entering the partial hyperbolicity of the time-one map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperbolicityConstants {
    /// Contraction of the strong stable bundle per unit time.
    pub lambda: f64,
    /// Bound on center distortion; `1` for the constant roof.
    pub gamma: f64,
}

/// Suspension flow `φ_s` of `F` under `r`, and its time-one map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuspensionModel {
    map: TorusAutomorphism,
    roof: RoofFunction,
}

impl SuspensionModel {
    pub fn new(map: TorusAutomorphism, roof: RoofFunction) -> Result<Self> {
        roof.validate()?;
        Ok(Self { map, roof })
    }

    /// Cat map under the constant roof.
    pub fn default_model() -> Self {
        Self {
            map: TorusAutomorphism::cat_map(),
            roof: RoofFunction::Constant,
        }
    }

    pub fn map(&self) -> &TorusAutomorphism {
        &self.map
    }

    pub fn roof(&self) -> &RoofFunction {
        &self.roof
    }

    pub fn roof_at(&self, x: TorusPoint) -> f64 {
        self.roof.value(x)
    }

    /// Height rescaled to `[0, 1)`.
    pub fn normalized_height(&self, p: &SuspensionPoint) -> f64 {
        p.t / self.roof.value(p.x)
    }

    /// Bring an arbitrary `(x, t)` into the fundamental domain.
    pub fn normalize(&self, x: TorusPoint, t: f64) -> SuspensionPoint {
        self.flow(&SuspensionPoint::new(x, 0.0), t)
    }

    pub fn flow(&self, p: &SuspensionPoint, s: f64) -> SuspensionPoint {
        if self.roof.is_constant() {
            let total = p.t + s;
            let mut n = total.floor();
            let mut t = if s.fract() == 0.0 { p.t } else { total - n };
            if t >= 1.0 - super::torus::SEAM_SNAP {
                t = 0.0;
                n += 1.0;
            }
            let mut x = p.x;
            if n >= 0.0 {
                for _ in 0..(n as i64) {
                    x = self.map.apply(x);
                }
            } else {
                for _ in 0..((-n) as i64) {
                    x = self.map.apply_inverse(x);
                }
            }
            return SuspensionPoint { x, t };
        }
        let mut x = p.x;
        let mut t = p.t + s;
        loop {
            let r = self.roof.value(x);
            if t >= r - super::torus::SEAM_SNAP {
                t -= r;
                x = self.map.apply(x);
                if t < 0.0 {
                    t = 0.0;
                }
            } else if t < 0.0 {
                x = self.map.apply_inverse(x);
                t += self.roof.value(x);
            } else {
                break;
            }
        }
        SuspensionPoint { x, t }
    }

    /// `f = φ₁`.
    pub fn time_one(&self, p: &SuspensionPoint) -> SuspensionPoint {
        self.flow(p, 1.0)
    }

    pub fn time_one_inverse(&self, p: &SuspensionPoint) -> SuspensionPoint {
        self.flow(p, -1.0)
    }

    pub fn iterate(&self, p: &SuspensionPoint, n: i64) -> SuspensionPoint {
        let mut q = *p;
        if n >= 0 {
            for _ in 0..n {
                q = self.time_one(&q);
            }
        } else {
            for _ in 0..(-n) {
                q = self.time_one_inverse(&q);
            }
        }
        q
    }

    fn require_constant_roof(&self) -> Result<()> {
        if self.roof.is_constant() {
            Ok(())
        } else {
            Err(Error::VariableRoof)
        }
    }

    /// `(x + a·v_s, t)`, on the strong stable leaf of `p`.
    pub fn stable_leaf_point(&self, p: &SuspensionPoint, a: f64) -> Result<SuspensionPoint> {
        self.require_constant_roof()?;
        Ok(self.offset_along(p, self.map.stable_direction(), a))
    }

    /// `(x + a·v_u, t)`, on the strong unstable leaf of `p`.
    pub fn unstable_leaf_point(&self, p: &SuspensionPoint, a: f64) -> Result<SuspensionPoint> {
        self.require_constant_roof()?;
        Ok(self.offset_along(p, self.map.unstable_direction(), a))
    }

    pub(crate) fn offset_along(&self, p: &SuspensionPoint, v: [f64; 2], a: f64) -> SuspensionPoint {
        SuspensionPoint {
            x: [reduce(p.x[0] + a * v[0]), reduce(p.x[1] + a * v[1])],
            t: p.t,
        }
    }

    /// Flat metric on the base combined with the height difference, taking the
    /// minimum over the direct chart and one unwinding through the roof in
    /// either direction.
    pub fn dist(&self, p: &SuspensionPoint, q: &SuspensionPoint) -> f64 {
        let chart = |a: TorusPoint, ta: f64, b: TorusPoint, tb: f64| {
            let dx = torus_dist(a, b);
            let dt = ta - tb;
            (dx * dx + dt * dt).sqrt()
        };
        let direct = chart(p.x, p.t, q.x, q.t);
        let p_up = chart(self.map.apply(p.x), p.t - self.roof.value(p.x), q.x, q.t);
        let q_up = chart(p.x, p.t, self.map.apply(q.x), q.t - self.roof.value(q.x));
        direct.min(p_up).min(q_up)
    }

    pub fn hyperbolicity_constants(&self) -> HyperbolicityConstants {
        let mu = self.map.unstable_eigenvalue().abs();
        let sup = self.roof.upper_bound();
        let lambda = mu.powf(-1.0 / sup);
        let gamma = if self.roof.is_constant() {
            1.0
        } else {
            self.roof.lower_bound() / sup
        };
        HyperbolicityConstants { lambda, gamma }
    }

    /// `n` i.i.d. points from normalised volume `dx·dt` under the roof.
    /// Point `i` draws from its own stream, so the result does not depend on
    /// the thread count.
    pub fn volume_sample(&self, n: usize, seed: u64) -> Vec<SuspensionPoint> {
        (0..n)
            .into_par_iter()
            .map(|i| self.sample_point(&mut rng::stream(seed, i as u64)))
            .collect()
    }

    /// One draw from normalised volume, by rejection under `sup r`.
    pub fn sample_point(&self, g: &mut rng::Rng) -> SuspensionPoint {
        let top = self.roof.upper_bound();
        loop {
            let x = [g.gen::<f64>(), g.gen::<f64>()];
            let t = g.gen::<f64>() * top;
            if t < self.roof.value(x) {
                return SuspensionPoint { x, t };
            }
        }
    }
}

impl BaseMap for SuspensionModel {
    fn forward(&self, p: &SuspensionPoint) -> SuspensionPoint {
        self.time_one(p)
    }

    fn backward(&self, p: &SuspensionPoint) -> SuspensionPoint {
        self.time_one_inverse(p)
    }
}
