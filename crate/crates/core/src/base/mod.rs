//! Base dynamics: torus automorphisms, their suspension flows and the
//! periodic center leaves of the time-one map.

pub mod leaf;
pub mod suspension;
pub mod torus;

pub use leaf::PeriodicLeaf;
pub use suspension::{HyperbolicityConstants, RoofFunction, SuspensionModel, SuspensionPoint};
pub use torus::{
    connecting_points, homoclinic_points, periodic_points, points_of_least_period, HomoclinicPoint, RationalPoint,
    TorusAutomorphism, TorusPoint,
};

/// An invertible map of the suspension manifold along which cocycles are
/// iterated.
pub trait BaseMap: Sync {
    fn forward(&self, p: &SuspensionPoint) -> SuspensionPoint;
    fn backward(&self, p: &SuspensionPoint) -> SuspensionPoint;
}
