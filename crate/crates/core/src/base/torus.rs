//! Hyperbolic automorphisms of the 2-torus, their periodic points and
//! homoclinic points.

use std::collections::{BTreeSet, HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type TorusPoint = [f64; 2];

/// Width of the seam snap: coordinates within this of 1 are mapped to 0.
pub const SEAM_SNAP: f64 = 1e-12;

/// Reduce a coordinate to `[0, 1)`.
pub fn reduce(v: f64) -> f64 {
    let r = v - v.floor();
    if r >= 1.0 - SEAM_SNAP {
        0.0
    } else {
        r
    }
}

pub fn reduce_point(x: TorusPoint) -> TorusPoint {
    [reduce(x[0]), reduce(x[1])]
}

/// Signed representative of `v` in `[−½, ½)`.
pub fn wrap_centered(v: f64) -> f64 {
    v - (v + 0.5).floor()
}

/// Flat geodesic distance on ℝ²/ℤ².
pub fn torus_dist(a: TorusPoint, b: TorusPoint) -> f64 {
    let dx = wrap_centered(a[0] - b[0]);
    let dy = wrap_centered(a[1] - b[1]);
    (dx * dx + dy * dy).sqrt()
}

/// A point with rational coordinates `num / den`, kept exact so periodic
/// orbits can be followed without round-off drift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RationalPoint {
    pub num: [i64; 2],
    pub den: i64,
}

impl RationalPoint {
    pub fn new(num: [i64; 2], den: i64) -> Self {
        Self {
            num: [num[0].rem_euclid(den), num[1].rem_euclid(den)],
            den,
        }
    }

    /// `−p` on the torus.
    pub fn neg(self) -> Self {
        Self::new([-self.num[0], -self.num[1]], self.den)
    }

    pub fn to_f64(self) -> TorusPoint {
        [
            self.num[0] as f64 / self.den as f64,
            self.num[1] as f64 / self.den as f64,
        ]
    }
}

/// `x ↦ F x mod 1` for an integer matrix with `|det F| = 1` and `|tr F| > 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[[i64; 2]; 2]", into = "[[i64; 2]; 2]")]
pub struct TorusAutomorphism {
    matrix: [[i64; 2]; 2],
    unstable_eigenvalue: f64,
    stable_eigenvalue: f64,
    v_u: [f64; 2],
    v_s: [f64; 2],
}

impl TryFrom<[[i64; 2]; 2]> for TorusAutomorphism {
    type Error = Error;

    fn try_from(m: [[i64; 2]; 2]) -> Result<Self> {
        Self::new(m)
    }
}

impl From<TorusAutomorphism> for [[i64; 2]; 2] {
    fn from(f: TorusAutomorphism) -> Self {
        f.matrix
    }
}

fn unit(v: [f64; 2]) -> [f64; 2] {
    let n = (v[0] * v[0] + v[1] * v[1]).sqrt();
    let mut u = [v[0] / n, v[1] / n];
    if u[0] < 0.0 || (u[0] == 0.0 && u[1] < 0.0) {
        u = [-u[0], -u[1]];
    }
    u
}

impl TorusAutomorphism {
    pub fn new(matrix: [[i64; 2]; 2]) -> Result<Self> {
        let [[a, b], [c, d]] = matrix;
        let det = a * d - b * c;
        let trace = a + d;
        if det.abs() != 1 || trace.abs() <= 2 {
            return Err(Error::NotHyperbolic { trace, det });
        }
        let tr = trace as f64;
        let disc = (tr * tr - 4.0 * det as f64).sqrt();
        let big = if tr > 0.0 { (tr + disc) / 2.0 } else { (tr - disc) / 2.0 };
        // product of eigenvalues is det
        let small = det as f64 / big;
        let eigvec = |mu: f64| -> [f64; 2] {
            // pick the better-conditioned row of (F − μI)
            let r1 = [a as f64 - mu, b as f64];
            let r2 = [c as f64, d as f64 - mu];
            let n1 = r1[0].abs() + r1[1].abs();
            let n2 = r2[0].abs() + r2[1].abs();
            let r = if n1 >= n2 { r1 } else { r2 };
            unit([r[1], -r[0]])
        };
        Ok(Self {
            matrix,
            unstable_eigenvalue: big,
            stable_eigenvalue: small,
            v_u: eigvec(big),
            v_s: eigvec(small),
        })
    }

    /// `[[2, 1], [1, 1]]`.
    pub fn cat_map() -> Self {
        Self::new([[2, 1], [1, 1]]).expect("cat map is hyperbolic")
    }

    pub fn matrix(&self) -> [[i64; 2]; 2] {
        self.matrix
    }

    pub fn det(&self) -> i64 {
        let [[a, b], [c, d]] = self.matrix;
        a * d - b * c
    }

    pub fn trace(&self) -> i64 {
        self.matrix[0][0] + self.matrix[1][1]
    }

    /// Eigenvalue with modulus > 1.
    pub fn unstable_eigenvalue(&self) -> f64 {
        self.unstable_eigenvalue
    }

    /// Eigenvalue with modulus < 1.
    pub fn stable_eigenvalue(&self) -> f64 {
        self.stable_eigenvalue
    }

    pub fn unstable_direction(&self) -> [f64; 2] {
        self.v_u
    }

    pub fn stable_direction(&self) -> [f64; 2] {
        self.v_s
    }

    fn inverse_matrix(&self) -> [[i64; 2]; 2] {
        let [[a, b], [c, d]] = self.matrix;
        let det = self.det();
        [[d * det, -b * det], [-c * det, a * det]]
    }

    pub fn inverse(&self) -> Self {
        Self::new(self.inverse_matrix()).expect("inverse of hyperbolic is hyperbolic")
    }

    /// Linear action on ℝ² (no reduction).
    pub fn apply_linear(&self, x: [f64; 2]) -> [f64; 2] {
        let [[a, b], [c, d]] = self.matrix;
        [
            a as f64 * x[0] + b as f64 * x[1],
            c as f64 * x[0] + d as f64 * x[1],
        ]
    }

    pub fn apply(&self, x: TorusPoint) -> TorusPoint {
        reduce_point(self.apply_linear(x))
    }

    pub fn apply_inverse(&self, x: TorusPoint) -> TorusPoint {
        let [[a, b], [c, d]] = self.inverse_matrix();
        reduce_point([
            a as f64 * x[0] + b as f64 * x[1],
            c as f64 * x[0] + d as f64 * x[1],
        ])
    }

    pub fn apply_rational(&self, p: RationalPoint) -> RationalPoint {
        let [[a, b], [c, d]] = self.matrix;
        let n = p.den as i128;
        let x = p.num[0] as i128;
        let y = p.num[1] as i128;
        let nx = (a as i128 * x + b as i128 * y).rem_euclid(n);
        let ny = (c as i128 * x + d as i128 * y).rem_euclid(n);
        RationalPoint {
            num: [nx as i64, ny as i64],
            den: p.den,
        }
    }

    /// `F^k`, with overflow reported as an error.
    pub fn power(&self, k: u32) -> Result<Self> {
        Self::new(int_power(self.matrix, k)?)
    }
}

fn int_mul(x: [[i64; 2]; 2], y: [[i64; 2]; 2]) -> Result<[[i64; 2]; 2]> {
    let mut out = [[0_i64; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let s = x[i][0]
                .checked_mul(y[0][j])
                .and_then(|p| x[i][1].checked_mul(y[1][j]).and_then(|q| p.checked_add(q)));
            out[i][j] = s.ok_or(Error::InvalidParameter {
                name: "k",
                reason: "matrix power overflows i64".into(),
            })?;
        }
    }
    Ok(out)
}

fn int_power(m: [[i64; 2]; 2], k: u32) -> Result<[[i64; 2]; 2]> {
    let mut acc = [[1, 0], [0, 1]];
    for _ in 0..k {
        acc = int_mul(acc, m)?;
    }
    Ok(acc)
}

/// All solutions of `(F^k − I)x ∈ ℤ²` in `[0, 1)²`, as exact rationals.
/// There are exactly `|det(F^k − I)|` of them.
pub fn periodic_points(f: &TorusAutomorphism, k: u32) -> Result<Vec<RationalPoint>> {
    if k == 0 {
        return Err(Error::InvalidParameter {
            name: "k",
            reason: "period must be at least 1".into(),
        });
    }
    let fk = int_power(f.matrix(), k)?;
    let m = [[fk[0][0] - 1, fk[0][1]], [fk[1][0], fk[1][1] - 1]];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det == 0 {
        return Err(Error::Singular);
    }
    let den = det.abs();
    // x = adj(M)·n / det for n ∈ ℤ²; the residues adj(M)·n mod |det| form the
    // subgroup generated by the two columns of adj(M).
    let adj = [[m[1][1], -m[0][1]], [-m[1][0], m[0][0]]];
    let gens = [
        [adj[0][0].rem_euclid(den), adj[1][0].rem_euclid(den)],
        [adj[0][1].rem_euclid(den), adj[1][1].rem_euclid(den)],
    ];
    let mut seen: HashSet<[i64; 2]> = HashSet::new();
    let mut queue = VecDeque::from([[0_i64, 0_i64]]);
    seen.insert([0, 0]);
    while let Some(v) = queue.pop_front() {
        for g in &gens {
            let w = [(v[0] + g[0]) % den, (v[1] + g[1]) % den];
            if seen.insert(w) {
                queue.push_back(w);
            }
        }
    }
    let set: BTreeSet<RationalPoint> = seen
        .into_iter()
        .map(|num| RationalPoint::new(num, den))
        .collect();
    Ok(set.into_iter().collect())
}

/// Points of least period exactly `k`, in the order of [`periodic_points`].
pub fn points_of_least_period(f: &TorusAutomorphism, k: u32) -> Result<Vec<RationalPoint>> {
    Ok(periodic_points(f, k)?
        .into_iter()
        .filter(|&p| {
            let mut q = f.apply_rational(p);
            let mut n = 1;
            while q != p {
                q = f.apply_rational(q);
                n += 1;
            }
            n == k
        })
        .collect())
}

/// Intersection of the unstable line through `p0` with the stable line through
/// `p0 + m`: `z = p0 + a·v_u = p0 + m + b·v_s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomoclinicPoint {
    pub z: TorusPoint,
    pub a: f64,
    pub b: f64,
    pub m: [i64; 2],
}

fn solve_unstable_stable(f: &TorusAutomorphism, target: [f64; 2]) -> (f64, f64) {
    let u = f.unstable_direction();
    let s = f.stable_direction();
    // a·u − b·s = target
    let det = u[0] * (-s[1]) - (-s[0]) * u[1];
    let a = (target[0] * (-s[1]) - (-s[0]) * target[1]) / det;
    let b = (u[0] * target[1] - u[1] * target[0]) / det;
    (a, b)
}

/// Homoclinic points of a fixed point `p0`, one for each nonzero integer
/// vector `m` with `‖m‖_∞ ≤ window`.
pub fn homoclinic_points(
    f: &TorusAutomorphism,
    p0: TorusPoint,
    window: i64,
) -> Result<Vec<HomoclinicPoint>> {
    if torus_dist(f.apply(p0), p0) > 1e-10 {
        return Err(Error::NotPeriodic {
            residual: torus_dist(f.apply(p0), p0),
        });
    }
    connecting_points(f, p0, p0, window)
}

/// Points on the unstable line of `p0` and the stable line of `q0`. With
/// `q0 = p0` these are the homoclinic points.
pub fn connecting_points(
    f: &TorusAutomorphism,
    p0: TorusPoint,
    q0: TorusPoint,
    window: i64,
) -> Result<Vec<HomoclinicPoint>> {
    let offset = [wrap_centered(q0[0] - p0[0]), wrap_centered(q0[1] - p0[1])];
    let u = f.unstable_direction();
    let mut out = Vec::new();
    for i in -window..=window {
        for j in -window..=window {
            if i == 0 && j == 0 && offset == [0.0, 0.0] {
                continue;
            }
            let target = [i as f64 + offset[0], j as f64 + offset[1]];
            let (a, b) = solve_unstable_stable(f, target);
            out.push(HomoclinicPoint {
                z: reduce_point([p0[0] + a * u[0], p0[1] + a * u[1]]),
                a,
                b,
                m: [i, j],
            });
        }
    }
    out.sort_by(|x, y| x.a.abs().total_cmp(&y.a.abs()));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cat_map_eigen_data() {
        let f = TorusAutomorphism::cat_map();
        let golden = (3.0 + 5f64.sqrt()) / 2.0;
        assert!((f.unstable_eigenvalue() - golden).abs() < 1e-14);
        assert!((f.stable_eigenvalue() - 1.0 / golden).abs() < 1e-14);
        for (mu, v) in [
            (f.unstable_eigenvalue(), f.unstable_direction()),
            (f.stable_eigenvalue(), f.stable_direction()),
        ] {
            let w = f.apply_linear(v);
            assert!((w[0] - mu * v[0]).abs() < 1e-12 && (w[1] - mu * v[1]).abs() < 1e-12);
            assert!(((v[0] * v[0] + v[1] * v[1]).sqrt() - 1.0).abs() < 1e-12);
        }
        assert!(TorusAutomorphism::new([[1, 1], [0, 1]]).is_err());
        assert!(TorusAutomorphism::new([[2, 0], [0, 1]]).is_err());
    }

    #[test]
    fn negative_trace_and_inverse() {
        let f = TorusAutomorphism::new([[-2, -1], [-1, -1]]).unwrap();
        assert!(f.unstable_eigenvalue() < -1.0);
        let x = [0.123, 0.456];
        let y = f.apply_inverse(f.apply(x));
        assert!(torus_dist(x, y) < 1e-14);
        let g = f.inverse();
        assert!((g.unstable_eigenvalue().abs() - f.unstable_eigenvalue().abs()).abs() < 1e-12);
    }

    /// Brute force over the rational lattice with denominator `den`.
    fn brute_periodic(f: &TorusAutomorphism, k: u32, den: i64) -> BTreeSet<RationalPoint> {
        let mut out = BTreeSet::new();
        for i in 0..den {
            for j in 0..den {
                let p = RationalPoint::new([i, j], den);
                let mut q = p;
                for _ in 0..k {
                    q = f.apply_rational(q);
                }
                if q == p {
                    out.insert(p);
                }
            }
        }
        out
    }

    fn reduced(p: RationalPoint) -> (i64, i64, i64) {
        fn gcd(a: i64, b: i64) -> i64 {
            if b == 0 {
                a.abs()
            } else {
                gcd(b, a % b)
            }
        }
        let g = gcd(gcd(p.num[0], p.num[1]), p.den);
        (p.num[0] / g, p.num[1] / g, p.den / g)
    }

    #[test]
    fn periodic_point_counts() {
        let f = TorusAutomorphism::cat_map();
        let expected = [1usize, 5, 16, 45, 121, 320];
        for (k, &count) in (1..=6).zip(expected.iter()) {
            let pts = periodic_points(&f, k).unwrap();
            assert_eq!(pts.len(), count, "k = {k}");
            assert!(pts.contains(&RationalPoint::new([0, 0], pts[0].den)));
            for p in &pts {
                let mut q = *p;
                for _ in 0..k {
                    q = f.apply_rational(q);
                }
                assert_eq!(q, *p);
            }
        }
        for k in 1..=2 {
            let pts: BTreeSet<_> = periodic_points(&f, k).unwrap().into_iter().map(reduced).collect();
            let den = periodic_points(&f, k).unwrap()[0].den;
            let brute: BTreeSet<_> = brute_periodic(&f, k, den).into_iter().map(reduced).collect();
            assert_eq!(pts, brute);
        }
    }

    #[test]
    fn homoclinic_points_converge_both_ways() {
        let f = TorusAutomorphism::cat_map();
        assert!(homoclinic_points(&f, [0.0, 0.0], 0).unwrap().is_empty());
        let pts = homoclinic_points(&f, [0.0, 0.0], 1).unwrap();
        let h = pts.iter().find(|h| h.m == [1, 0]).unwrap();
        // residual of the linear solve
        let u = f.unstable_direction();
        let s = f.stable_direction();
        assert!((h.a * u[0] - h.b * s[0] - 1.0).abs() < 1e-12);
        assert!((h.a * u[1] - h.b * s[1]).abs() < 1e-12);
        let mut fwd = h.z;
        let mut bwd = h.z;
        for _ in 0..15 {
            fwd = f.apply(fwd);
            bwd = f.apply_inverse(bwd);
        }
        assert!(torus_dist(fwd, [0.0, 0.0]) < 1e-4);
        assert!(torus_dist(bwd, [0.0, 0.0]) < 1e-4);
        let mut last = 0;
        for w in 0..4 {
            let n = homoclinic_points(&f, [0.0, 0.0], w).unwrap().len();
            assert!(n >= last);
            last = n;
        }
        assert!(homoclinic_points(&f, [0.3, 0.1], 1).is_err());
    }
}
