//! Compact center leaves: flow orbits through periodic points of the base map.

use serde::{Deserialize, Serialize};

use super::suspension::{SuspensionModel, SuspensionPoint};
use super::torus::{torus_dist, RationalPoint};
use super::BaseMap;
use crate::error::{Error, Result};

/// Distance below which a torus point is identified with an orbit point.
const LEAF_MATCH: f64 = 1e-9;

/// Flow orbit of an `F`-periodic point, parametrised by arc length `s` in
/// `ℝ/Tℤ`. The base orbit is kept exact, so iteration on the leaf does not
/// drift off it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicLeaf {
    base_point: RationalPoint,
    k: u32,
    orbit: Vec<RationalPoint>,
    roof: Vec<f64>,
    /// `cum[j] = Σ_{i<j} roof[i]`, with `cum[k] = T`.
    cum: Vec<f64>,
    constant_roof: bool,
}

impl PeriodicLeaf {
    pub fn new(model: &SuspensionModel, p: RationalPoint, k: u32) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter {
                name: "k",
                reason: "period must be at least 1".into(),
            });
        }
        let f = model.map();
        let mut orbit = Vec::with_capacity(k as usize);
        let mut q = p;
        for _ in 0..k {
            orbit.push(q);
            q = f.apply_rational(q);
        }
        if q != p {
            return Err(Error::NotPeriodic {
                residual: torus_dist(q.to_f64(), p.to_f64()),
            });
        }
        let roof: Vec<f64> = orbit.iter().map(|q| model.roof_at(q.to_f64())).collect();
        let mut cum = vec![0.0];
        for r in &roof {
            cum.push(cum.last().unwrap() + r);
        }
        Ok(Self {
            base_point: p,
            k,
            orbit,
            roof,
            cum,
            constant_roof: model.roof().is_constant(),
        })
    }

    pub fn base_point(&self) -> RationalPoint {
        self.base_point
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    /// Flow period `T`.
    pub fn period(&self) -> f64 {
        self.cum[self.k as usize]
    }

    /// `f` acts on the normalised circle `ℝ/ℤ` as `u ↦ u + 1/T`.
    pub fn rotation_number(&self) -> f64 {
        1.0 / self.period()
    }

    pub fn orbit(&self) -> &[RationalPoint] {
        &self.orbit
    }

    fn split(&self, s: f64) -> (usize, f64) {
        let t_len = self.period();
        let mut s = s.rem_euclid(t_len);
        if s >= t_len - super::torus::SEAM_SNAP {
            s = 0.0;
        }
        let j = match self.cum.partition_point(|&c| c <= s) {
            0 => 0,
            i => (i - 1).min(self.k as usize - 1),
        };
        (j, (s - self.cum[j]).max(0.0))
    }

    /// Point at arc length `s` (taken mod `T`).
    pub fn point_at(&self, s: f64) -> SuspensionPoint {
        let (j, t) = self.split(s);
        SuspensionPoint {
            x: self.orbit[j].to_f64(),
            t,
        }
    }

    /// Index `j` of the orbit point `F^j p` under `p`.
    pub fn orbit_index(&self, p: &SuspensionPoint) -> Result<usize> {
        self.orbit
            .iter()
            .position(|q| torus_dist(q.to_f64(), p.x) < LEAF_MATCH)
            .ok_or(Error::OffLeaf)
    }

    /// Arc length of a leaf point, in `[0, T)`.
    pub fn coordinate_of(&self, p: &SuspensionPoint) -> Result<f64> {
        let j = self.orbit_index(p)?;
        Ok(self.cum[j] + p.t)
    }

    /// Flow for time `s` along the leaf, snapping the base onto the exact orbit.
    pub fn advance(&self, p: &SuspensionPoint, s: f64) -> Result<SuspensionPoint> {
        let mut j = self.orbit_index(p)?;
        let k = self.k as usize;
        if self.constant_roof && s.fract() == 0.0 {
            j = (j as i64 + s as i64).rem_euclid(k as i64) as usize;
            return Ok(SuspensionPoint {
                x: self.orbit[j].to_f64(),
                t: p.t,
            });
        }
        let mut t = p.t + s;
        loop {
            if t >= self.roof[j] - super::torus::SEAM_SNAP {
                t = (t - self.roof[j]).max(0.0);
                j = (j + 1) % k;
            } else if t < 0.0 {
                j = (j + k - 1) % k;
                t += self.roof[j];
            } else {
                break;
            }
        }
        Ok(SuspensionPoint {
            x: self.orbit[j].to_f64(),
            t,
        })
    }
}

impl BaseMap for PeriodicLeaf {
    /// Panics if `p` is not on the leaf.
    fn forward(&self, p: &SuspensionPoint) -> SuspensionPoint {
        self.advance(p, 1.0).expect("point on the leaf")
    }

    fn backward(&self, p: &SuspensionPoint) -> SuspensionPoint {
        self.advance(p, -1.0).expect("point on the leaf")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::suspension::RoofFunction;
    use crate::base::torus::{periodic_points, TorusAutomorphism};
    use crate::trig::TrigPoly;

    #[test]
    fn fixed_point_leaf() {
        let m = SuspensionModel::default_model();
        let leaf = PeriodicLeaf::new(&m, RationalPoint::new([0, 0], 1), 1).unwrap();
        assert_eq!(leaf.period(), 1.0);
        assert_eq!(leaf.rotation_number(), 1.0);
        let p = leaf.point_at(0.4);
        assert_eq!(leaf.forward(&p), p);
    }

    #[test]
    fn period_two_leaf_rotates_by_half() {
        let m = SuspensionModel::default_model();
        let pts = periodic_points(m.map(), 2).unwrap();
        let p = *pts.iter().find(|q| q.num != [0, 0]).unwrap();
        let leaf = PeriodicLeaf::new(&m, p, 2).unwrap();
        assert_eq!(leaf.period(), 2.0);
        assert_eq!(leaf.rotation_number(), 0.5);
        for s in [0.0, 0.3, 1.7] {
            let a = leaf.point_at(s);
            let b = leaf.forward(&a);
            let expected = leaf.point_at(s + 1.0);
            assert!(m.dist(&b, &expected) < 1e-12);
            // the leaf map agrees with the time-one map for a single step
            assert!(m.dist(&m.time_one(&a), &b) < 1e-12);
            let c = leaf.forward(&b);
            assert!(m.dist(&c, &a) < 1e-10);
        }
        assert!(matches!(
            leaf.coordinate_of(&SuspensionPoint::new([0.123, 0.4], 0.0)),
            Err(Error::OffLeaf)
        ));
        assert!(PeriodicLeaf::new(&m, p, 1).is_err());
    }

    #[test]
    fn coordinates_round_trip() {
        let m = SuspensionModel::default_model();
        let p = periodic_points(m.map(), 5).unwrap()[7];
        let leaf = PeriodicLeaf::new(&m, p, 5).unwrap();
        assert_eq!(leaf.period(), 5.0);
        for s in [0.0, 0.25, 2.5, 4.99] {
            let q = leaf.point_at(s);
            assert!((leaf.coordinate_of(&q).unwrap() - s).abs() < 1e-12);
        }
        let q = leaf.point_at(1.25);
        assert_eq!(leaf.point_at(1.25 + 5.0), q);
        let mut r = q;
        for _ in 0..5 {
            r = leaf.forward(&r);
        }
        assert!(m.dist(&r, &q) < 1e-10);
        assert_eq!(leaf.backward(&leaf.forward(&q)), q);
    }

    #[test]
    fn variable_roof_period() {
        let roof = RoofFunction::trig(TrigPoly::constant(1.0).with_term([1, 0], 0.1, 0.0)).unwrap();
        let m = SuspensionModel::new(TorusAutomorphism::cat_map(), roof).unwrap();
        let p = periodic_points(m.map(), 3).unwrap()[2];
        let leaf = PeriodicLeaf::new(&m, p, 3).unwrap();
        let expected: f64 = leaf.orbit().iter().map(|q| m.roof_at(q.to_f64())).sum();
        assert!((leaf.period() - expected).abs() < 1e-15);
        assert!(leaf.period() >= 3.0 * 0.9);
        let a = leaf.point_at(0.5);
        let mut b = a;
        for _ in 0..100 {
            b = leaf.forward(&b);
        }
        let s = leaf.coordinate_of(&b).unwrap();
        let want = (0.5 + 100.0f64).rem_euclid(leaf.period());
        assert!((s - want).abs() < 1e-9);
    }
}
