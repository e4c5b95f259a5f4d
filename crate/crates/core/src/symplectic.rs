//! Symplectic linear algebra on ℝ^{2d}: the standard form, membership tests,
//! drift repair, rotation blocks, near-identity random elements, subspace
//! transversality and the projective action.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{max_abs, orthonormal_columns, Mat, Vector};
use crate::rng;

/// Construction-time tolerance on `‖BᵀJB − J‖`.
pub const SYM_TOL: f64 = 1e-10;

/// Threshold under which a coordinate counts as zero when choosing the sign of
/// a projective representative.
pub const SIGN_THRESHOLD: f64 = 1e-12;

/// The standard symplectic form `J = [[0, I_d], [−I_d, 0]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardForm {
    d: usize,
    matrix: Mat,
}

impl StandardForm {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn matrix(&self) -> &Mat {
        &self.matrix
    }
}

pub fn standard_form(d: usize) -> Result<StandardForm> {
    if d == 0 {
        return Err(Error::ZeroDimension);
    }
    Ok(StandardForm {
        d,
        matrix: j_matrix(d),
    })
}

pub(crate) fn j_matrix(d: usize) -> Mat {
    let mut j = Mat::zeros(2 * d, 2 * d);
    for i in 0..d {
        j[(i, d + i)] = 1.0;
        j[(d + i, i)] = -1.0;
    }
    j
}

fn half_dim(b: &Mat) -> Result<usize> {
    let (r, c) = b.shape();
    if r != c || r == 0 || r % 2 != 0 {
        return Err(Error::BadShape { rows: r, cols: c });
    }
    Ok(r / 2)
}

/// `‖BᵀJB − J‖_∞` measured as the largest absolute entry.
pub fn symplectic_defect(b: &Mat) -> Result<f64> {
    let d = half_dim(b)?;
    let j = j_matrix(d);
    Ok(max_abs(&(b.transpose() * &j * b - j)))
}

pub fn is_symplectic(b: &Mat, tol: f64) -> Result<bool> {
    Ok(symplectic_defect(b)? <= tol)
}

/// A real `2d×2d` matrix in `Sp(2d, ℝ)` together with its measured defect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SymplecticRepr", into = "SymplecticRepr")]
pub struct SymplecticMatrix {
    d: usize,
    entries: Mat,
    sym_defect: f64,
}

#[derive(Serialize, Deserialize)]
struct SymplecticRepr {
    rows: Vec<Vec<f64>>,
}

impl TryFrom<SymplecticRepr> for SymplecticMatrix {
    type Error = Error;

    fn try_from(r: SymplecticRepr) -> Result<Self> {
        let n = r.rows.len();
        if r.rows.iter().any(|row| row.len() != n) {
            return Err(Error::BadShape {
                rows: n,
                cols: r.rows.first().map_or(0, Vec::len),
            });
        }
        let m = Mat::from_fn(n, n, |i, j| r.rows[i][j]);
        SymplecticMatrix::new(m, SYM_TOL)
    }
}

impl From<SymplecticMatrix> for SymplecticRepr {
    fn from(s: SymplecticMatrix) -> Self {
        let n = s.entries.nrows();
        SymplecticRepr {
            rows: (0..n)
                .map(|i| (0..n).map(|j| s.entries[(i, j)]).collect())
                .collect(),
        }
    }
}

impl SymplecticMatrix {
    /// Accepts `entries` if its defect is within `tol`.
    pub fn new(entries: Mat, tol: f64) -> Result<Self> {
        let d = half_dim(&entries)?;
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::Singular);
        }
        let defect = symplectic_defect(&entries)?;
        if defect > tol {
            return Err(Error::NotSymplectic { defect, tol });
        }
        let det = entries.clone().determinant();
        if (det - 1.0).abs() > 1e-8 * det.abs().max(1.0) {
            return Err(Error::NotSymplectic { defect, tol });
        }
        Ok(Self {
            d,
            entries,
            sym_defect: defect,
        })
    }

    /// Wraps a product of symplectic matrices without re-validating it.
    /// The defect is still measured.
    pub(crate) fn from_trusted(entries: Mat) -> Self {
        let d = entries.nrows() / 2;
        let sym_defect = symplectic_defect(&entries).unwrap_or(f64::INFINITY);
        Self {
            d,
            entries,
            sym_defect,
        }
    }

    pub fn identity(d: usize) -> Self {
        Self {
            d,
            entries: Mat::identity(2 * d, 2 * d),
            sym_defect: 0.0,
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn dim(&self) -> usize {
        2 * self.d
    }

    pub fn entries(&self) -> &Mat {
        &self.entries
    }

    pub fn into_entries(self) -> Mat {
        self.entries
    }

    pub fn sym_defect(&self) -> f64 {
        self.sym_defect
    }

    /// `B⁻¹ = −J Bᵀ J`, exact for symplectic `B`.
    pub fn inverse(&self) -> Self {
        Self {
            d: self.d,
            entries: symplectic_inverse(&self.entries),
            sym_defect: self.sym_defect,
        }
    }

    /// Matrix product `self · other`.
    pub fn compose(&self, other: &Self) -> Self {
        Self::from_trusted(&self.entries * &other.entries)
    }

    /// Distance to another element in the largest-entry norm.
    pub fn distance(&self, other: &Self) -> f64 {
        max_abs(&(&self.entries - &other.entries))
    }
}

/// `−J Bᵀ J` without forming `J`.
pub(crate) fn symplectic_inverse(b: &Mat) -> Mat {
    let n = b.nrows();
    let d = n / 2;
    // (−J Bᵀ J)_{ij} = −Σ J_{ik} B_{lk} J_{lj}
    Mat::from_fn(n, n, |i, j| {
        let (k, sk) = if i < d { (i + d, 1.0) } else { (i - d, -1.0) };
        let (l, sl) = if j < d { (j + d, -1.0) } else { (j - d, 1.0) };
        -sk * sl * b[(l, k)]
    })
}

/// Project a near-symplectic matrix back onto the group.
///
/// The input is first rescaled to unit determinant, then corrected by the
/// Newton step `B ← B(I + ½·J·E)` with `E = BᵀJB − J` until the defect stops
/// improving.
pub fn symplectify(b: &Mat) -> Result<SymplecticMatrix> {
    let d = half_dim(b)?;
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular);
    }
    let det = b.clone().determinant();
    if !det.is_finite() || det.abs() < 1e-300 {
        return Err(Error::Singular);
    }
    let initial = symplectic_defect(b)?;
    if initial >= 0.1 {
        return Err(Error::FarFromGroup { defect: initial });
    }
    let j = j_matrix(d);
    let mut cur = if det > 0.0 {
        b * det.powf(-1.0 / (2 * d) as f64)
    } else {
        b.clone()
    };
    let mut defect = symplectic_defect(&cur)?;
    for _ in 0..50 {
        if defect <= 1e-15 {
            break;
        }
        let e = cur.transpose() * &j * &cur - &j;
        let step = Mat::identity(2 * d, 2 * d) + (&j * e) * 0.5;
        let next = &cur * step;
        let next_defect = symplectic_defect(&next)?;
        if next_defect >= defect {
            break;
        }
        cur = next;
        defect = next_defect;
    }
    if defect > SYM_TOL {
        return Err(Error::FarFromGroup { defect });
    }
    SymplecticMatrix::new(cur, SYM_TOL)
}

/// `[[cos θ·I, sin θ·I], [−sin θ·I, cos θ·I]]`.
pub fn rotation_block(theta: f64, d: usize) -> SymplecticMatrix {
    let (s, c) = theta.sin_cos();
    let mut m = Mat::zeros(2 * d, 2 * d);
    for i in 0..d {
        m[(i, i)] = c;
        m[(d + i, d + i)] = c;
        m[(i, d + i)] = s;
        m[(d + i, i)] = -s;
    }
    SymplecticMatrix {
        d,
        entries: m,
        sym_defect: 0.0,
    }
    .remeasured()
}

/// `diag(e^s·I_d, e^{−s}·I_d)`.
pub fn diagonal_block(s: f64, d: usize) -> SymplecticMatrix {
    let mut m = Mat::zeros(2 * d, 2 * d);
    for i in 0..d {
        m[(i, i)] = s.exp();
        m[(d + i, d + i)] = (-s).exp();
    }
    SymplecticMatrix::from_trusted(m)
}

impl SymplecticMatrix {
    fn remeasured(mut self) -> Self {
        self.sym_defect = symplectic_defect(&self.entries).unwrap_or(f64::INFINITY);
        self
    }
}

/// Random element with `‖σ − I‖ ≤ ε`, built as the Cayley transform of a
/// random Hamiltonian matrix `J·S`.
pub fn random_symplectic_near_identity(d: usize, eps: f64, seed: u64) -> Result<SymplecticMatrix> {
    if d == 0 {
        return Err(Error::ZeroDimension);
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter {
            name: "eps",
            reason: format!("{eps} not in (0, 1)"),
        });
    }
    let n = 2 * d;
    let mut g = rng::stream(seed, 0);
    let mut s = Mat::zeros(n, n);
    for i in 0..n {
        for k in i..n {
            let v: f64 = g.gen_range(-1.0..1.0);
            s[(i, k)] = v;
            s[(k, i)] = v;
        }
    }
    let k = j_matrix(d) * s;
    let id = Mat::identity(n, n);
    let mut scale = eps / (max_abs(&k) * n as f64);
    for _ in 0..60 {
        let half = &k * (0.5 * scale);
        let lhs = &id - &half;
        let rhs = &id + &half;
        let sigma = lhs.lu().solve(&rhs).ok_or(Error::Singular)?;
        let sigma = symplectify(&sigma)?;
        if max_abs(&(sigma.entries() - &id)) <= eps {
            return Ok(sigma);
        }
        scale *= 0.5;
    }
    Err(Error::InvalidParameter {
        name: "eps",
        reason: "could not meet the distance bound".into(),
    })
}

/// Linear subspace of ℝ^{2d} stored as an orthonormal column frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    frame: Mat,
}

impl Subspace {
    /// Span of the columns of `m` (rank detected at relative level 1e−10).
    pub fn span(m: &Mat) -> Result<Self> {
        if m.nrows() == 0 || m.nrows() % 2 != 0 {
            return Err(Error::BadShape {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        let frame = orthonormal_columns(m, 1e-10);
        if frame.ncols() == 0 {
            return Err(Error::InvalidParameter {
                name: "subspace",
                reason: "zero subspace".into(),
            });
        }
        Ok(Self { frame })
    }

    pub fn from_vectors(vs: &[Vector]) -> Result<Self> {
        let n = vs.first().map_or(0, |v| v.len());
        if vs.iter().any(|v| v.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: vs.iter().map(|v| v.len()).find(|&l| l != n).unwrap_or(0),
            });
        }
        Self::span(&Mat::from_columns(vs))
    }

    /// Coordinate subspace spanned by `e_i`, `i ∈ indices`.
    pub fn coordinate(ambient_dim: usize, indices: &[usize]) -> Result<Self> {
        let mut m = Mat::zeros(ambient_dim, indices.len());
        for (c, &i) in indices.iter().enumerate() {
            m[(i, c)] = 1.0;
        }
        Self::span(&m)
    }

    pub fn dim(&self) -> usize {
        self.frame.ncols()
    }

    pub fn ambient_dim(&self) -> usize {
        self.frame.nrows()
    }

    pub fn frame(&self) -> &Mat {
        &self.frame
    }

    /// Image under an invertible linear map.
    pub fn image(&self, b: &Mat) -> Result<Self> {
        Self::span(&(b * &self.frame))
    }

    /// Largest principal angle to a subspace of the same dimension.
    pub fn angle_to(&self, other: &Subspace) -> f64 {
        crate::linalg::principal_angle(&self.frame, &other.frame)
    }
}

/// `dim(V ∩ W) = dim V + dim W − rank[V | W]`, with singular values below
/// `tol · σ_max` counted as zero.
pub fn subspace_intersection_dim(v: &Subspace, w: &Subspace, tol: f64) -> Result<usize> {
    if v.ambient_dim() != w.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: v.ambient_dim(),
            got: w.ambient_dim(),
        });
    }
    let mut joint = Mat::zeros(v.ambient_dim(), v.dim() + w.dim());
    joint.columns_mut(0, v.dim()).copy_from(v.frame());
    joint.columns_mut(v.dim(), w.dim()).copy_from(w.frame());
    let sv = joint.singular_values();
    let smax = sv.iter().fold(0.0_f64, |a, s| a.max(*s));
    let rank = sv.iter().filter(|s| **s > tol * smax).count();
    Ok(v.dim() + w.dim() - rank)
}

/// Rank cutoff used when checking generic position.
pub const TRANSVERSE_RANK_TOL: f64 = 1e-6;

fn generic_position(sigma: &Mat, pairs: &[(Subspace, Subspace)]) -> Result<bool> {
    for (v, w) in pairs {
        let n = v.ambient_dim();
        let target = (v.dim() + w.dim()).saturating_sub(n);
        let sv = v.image(sigma)?;
        if subspace_intersection_dim(&sv, w, TRANSVERSE_RANK_TOL)? != target {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Whether every `(σV_j, W_j)` meets in the expected dimension.
pub fn in_generic_position(sigma: &SymplecticMatrix, pairs: &[(Subspace, Subspace)]) -> Result<bool> {
    check_pairs(pairs)?;
    generic_position(sigma.entries(), pairs)
}

fn check_pairs(pairs: &[(Subspace, Subspace)]) -> Result<usize> {
    let n = pairs.first().map_or(0, |(v, _)| v.ambient_dim());
    for (v, w) in pairs {
        for s in [v, w] {
            if s.ambient_dim() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: s.ambient_dim(),
                });
            }
        }
    }
    Ok(n / 2)
}

/// Find `σ` with `‖σ − I‖ ≤ ε` putting every `(σV_j, W_j)` in generic
/// position. The identity is tried first, then random near-identity elements.
pub fn make_transverse(
    pairs: &[(Subspace, Subspace)],
    eps: f64,
    seed: u64,
    max_tries: usize,
) -> Result<SymplecticMatrix> {
    let d = check_pairs(pairs)?;
    if d == 0 {
        return Err(Error::ZeroDimension);
    }
    let id = SymplecticMatrix::identity(d);
    if generic_position(id.entries(), pairs)? {
        return Ok(id);
    }
    for attempt in 1..max_tries {
        let sigma = random_symplectic_near_identity(d, eps, rng::child_seed(seed, attempt as u64))?;
        if generic_position(sigma.entries(), pairs)? {
            return Ok(sigma);
        }
    }
    Err(Error::TransversalityExhausted { tries: max_tries })
}

/// Same search restricted to the rotation family `rotation_block(θ)` with
/// `|θ| ≤ max_angle`, so that fractional powers are exact.
pub fn make_transverse_rotation(
    pairs: &[(Subspace, Subspace)],
    max_angle: f64,
    seed: u64,
    max_tries: usize,
) -> Result<(f64, SymplecticMatrix)> {
    let d = check_pairs(pairs)?;
    if d == 0 {
        return Err(Error::ZeroDimension);
    }
    if generic_position(SymplecticMatrix::identity(d).entries(), pairs)? {
        return Ok((0.0, SymplecticMatrix::identity(d)));
    }
    let mut g = rng::stream(seed, 1);
    for _ in 1..max_tries {
        let mag: f64 = g.gen_range(0.5 * max_angle..=max_angle);
        let theta = if g.gen_bool(0.5) { mag } else { -mag };
        let sigma = rotation_block(theta, d);
        if generic_position(sigma.entries(), pairs)? {
            return Ok((theta, sigma));
        }
    }
    Err(Error::TransversalityExhausted { tries: max_tries })
}

/// Point of ℝP^{2d−1}: a unit vector whose first non-negligible coordinate is
/// positive.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectivePoint {
    vector: Vector,
}

impl ProjectivePoint {
    pub fn new(v: Vector) -> Result<Self> {
        let norm = v.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::InvalidParameter {
                name: "vector",
                reason: "zero or non-finite".into(),
            });
        }
        Ok(Self::canonical(v / norm))
    }

    fn canonical(mut v: Vector) -> Self {
        if let Some(first) = v.iter().find(|x| x.abs() > SIGN_THRESHOLD) {
            if *first < 0.0 {
                v.neg_mut();
            }
        }
        Self { vector: v }
    }

    /// Line at angle `phi` in ℝ² (`d = 1`).
    pub fn from_angle(phi: f64) -> Self {
        Self::canonical(Vector::from_vec(vec![phi.cos(), phi.sin()]))
    }

    pub fn vector(&self) -> &Vector {
        &self.vector
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }

    /// Angle in `[0, π)` of a line in ℝ².
    pub fn angle(&self) -> f64 {
        let a = self.vector[1].atan2(self.vector[0]);
        a.rem_euclid(std::f64::consts::PI)
    }

    /// Projective distance `min(∠, π − ∠)` between lines.
    pub fn distance(&self, other: &Self) -> f64 {
        let chord = (&self.vector - &other.vector)
            .norm()
            .min((&self.vector + &other.vector).norm());
        2.0 * (0.5 * chord).min(1.0).asin()
    }
}

/// `[Bv]`.
pub fn projective_act(b: &SymplecticMatrix, p: &ProjectivePoint) -> ProjectivePoint {
    act_raw(b.entries(), p)
}

pub(crate) fn act_raw(b: &Mat, p: &ProjectivePoint) -> ProjectivePoint {
    let w = b * &p.vector;
    let n = w.norm();
    ProjectivePoint::canonical(w / n)
}
