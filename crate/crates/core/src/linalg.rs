//! Dense symmetric matrix kernels.
//!
//! Everything downstream (bounds, designs, the conic layer) works with small
//! dense matrices, so this module is a thin, validated layer over `nalgebra`:
//! symmetric eigendecompositions sorted in descending order, the largest pair
//! of a symmetric-definite pencil, PSD square roots, compact SVD and
//! pseudo-determinants. Rank decisions use a single relative cutoff,
//! [`RANK_TOL`], applied to the largest eigenvalue or singular value.

use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Relative cutoff below which eigenvalues and singular values count as zero.
pub const RANK_TOL: f64 = 1e-12;

/// Relative asymmetry tolerated by [`SymMatrix::new`].
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("matrix is not symmetric (max |A - A^T| = {asym:e}, allowed {allowed:e})")]
    NotSymmetric { asym: f64, allowed: f64 },
    #[error("right-hand matrix of the pencil is singular (min eigenvalue {min_eig:e})")]
    SingularB { min_eig: f64 },
    #[error("matrix is not positive semidefinite (min eigenvalue {min_eig:e})")]
    NotPsd { min_eig: f64 },
    #[error("matrix is singular (min eigenvalue {min_eig:e})")]
    SingularInput { min_eig: f64 },
    #[error("matrix is zero")]
    ZeroMatrix,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix csv: {0}")]
    Csv(String),
}

/// A finite, exactly symmetric square matrix.
#[derive(Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Validates symmetry (relative to the largest entry) and finiteness, then
    /// stores the exactly symmetrized matrix.
    pub fn new(m: DMatrix<f64>) -> Result<Self, LinalgError> {
        if !m.is_square() {
            return Err(LinalgError::DimensionMismatch(format!(
                "expected a square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(LinalgError::InvalidInput("non-finite entry".into()));
        }
        let scale = m.amax();
        let asym = (&m - m.transpose()).amax();
        let allowed = SYMMETRY_TOL * scale.max(f64::MIN_POSITIVE);
        if asym > allowed {
            return Err(LinalgError::NotSymmetric { asym, allowed });
        }
        Ok(Self::symmetrized(m))
    }

    /// Symmetrizes `(m + m^T) / 2` without checking; for matrices that are
    /// symmetric by construction but carry rounding noise.
    pub fn symmetrized(m: DMatrix<f64>) -> Self {
        let t = m.transpose();
        SymMatrix((m + t) * 0.5)
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix(DMatrix::identity(n, n))
    }

    pub fn zeros(n: usize) -> Self {
        SymMatrix(DMatrix::zeros(n, n))
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        SymMatrix(DMatrix::from_diagonal(&DVector::from_row_slice(d)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn scale(&self, s: f64) -> SymMatrix {
        SymMatrix(&self.0 * s)
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    /// `Tr(self * other)` for two symmetric matrices.
    pub fn trace_product(&self, other: &SymMatrix) -> f64 {
        self.0.dot(&other.0)
    }

    /// `L^T * self * L`.
    pub fn congruence(&self, l: &DMatrix<f64>) -> SymMatrix {
        SymMatrix::symmetrized(l.transpose() * &self.0 * l)
    }

    /// Quadratic form `x^T A x`.
    pub fn quad_form(&self, x: &DVector<f64>) -> f64 {
        x.dot(&(&self.0 * x))
    }

    /// Smallest eigenvalue.
    pub fn min_eigenvalue(&self) -> f64 {
        if self.dim() == 0 {
            return 0.0;
        }
        SymmetricEigen::new(self.0.clone())
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_psd(&self, rel_tol: f64) -> bool {
        let scale = self.0.amax();
        self.min_eigenvalue() >= -rel_tol * scale.max(f64::MIN_POSITIVE)
    }
}

impl fmt::Debug for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SymMatrix({:?})", self.0)
    }
}

impl Serialize for SymMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        rows_of(&self.0).serialize(s)
    }
}

impl<'de> Deserialize<'de> for SymMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rows: Vec<Vec<f64>> = Vec::deserialize(d)?;
        let m = matrix_from_rows(&rows).map_err(serde::de::Error::custom)?;
        SymMatrix::new(m).map_err(serde::de::Error::custom)
    }
}

/// Row-major nested vectors, the JSON layout used for every matrix.
pub fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>, LinalgError> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return Err(LinalgError::DimensionMismatch("ragged rows".into()));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

/// Serde adapter for `DMatrix<f64>` fields stored as nested rows.
pub mod serde_rows {
    use super::*;

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        rows_of(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows: Vec<Vec<f64>> = Vec::deserialize(d)?;
        matrix_from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// Serde adapter for `DVector<f64>` fields stored as plain arrays.
pub mod serde_vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &DVector<f64>, s: S) -> Result<S::Ok, S::Error> {
        v.as_slice().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DVector<f64>, D::Error> {
        let v: Vec<f64> = Vec::deserialize(d)?;
        Ok(DVector::from_vec(v))
    }
}

/// Eigenpairs of a symmetric matrix, eigenvalues in descending order.
#[derive(Debug, Clone)]
pub struct SymEig {
    pub values: DVector<f64>,
    /// Orthonormal eigenvectors stored as columns, aligned with `values`.
    pub vectors: DMatrix<f64>,
}

pub fn sym_eig(a: &SymMatrix) -> SymEig {
    let n = a.dim();
    let eig = SymmetricEigen::new(a.0.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    SymEig { values, vectors }
}

/// Largest eigenpair of the pencil `A p = omega B p` with `B` positive definite.
///
/// The returned vector is `B`-normalized, `p^T B p = 1`.
pub fn gen_eig_largest(a: &SymMatrix, b: &SymMatrix) -> Result<(f64, DVector<f64>), LinalgError> {
    if a.dim() != b.dim() {
        return Err(LinalgError::DimensionMismatch(format!(
            "pencil sizes {} and {}",
            a.dim(),
            b.dim()
        )));
    }
    let eb = sym_eig(b);
    let bmax = eb.values.amax();
    let bmin = eb.values[eb.values.len() - 1];
    if bmax == 0.0 || bmin <= RANK_TOL * bmax {
        return Err(LinalgError::SingularB { min_eig: bmin });
    }
    // B^{-1/2} from the eigendecomposition keeps the reduced problem symmetric.
    let inv_sqrt = spectral_map(&eb, |l| 1.0 / l.sqrt());
    let reduced = a.congruence(&inv_sqrt);
    let er = sym_eig(&reduced);
    let omega = er.values[0];
    let p = inv_sqrt * er.vectors.column(0);
    Ok((omega, p))
}

fn spectral_map(e: &SymEig, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let d = DVector::from_iterator(e.values.len(), e.values.iter().map(|&l| f(l)));
    let scaled = &e.vectors * DMatrix::from_diagonal(&d);
    let m = scaled * e.vectors.transpose();
    (&m + m.transpose()) * 0.5
}

fn psd_spectrum(a: &SymMatrix) -> Result<SymEig, LinalgError> {
    let e = sym_eig(a);
    let n = e.values.len();
    if n == 0 {
        return Ok(e);
    }
    let lmax = e.values[0].abs().max(e.values[n - 1].abs());
    let lmin = e.values[n - 1];
    if lmin < -1e-10 * lmax.max(f64::MIN_POSITIVE) {
        return Err(LinalgError::NotPsd { min_eig: lmin });
    }
    Ok(e)
}

/// Symmetric PSD square root. Slightly negative eigenvalues from rounding
/// (above `-1e-10 * |lambda|_max`) are clamped to zero.
pub fn psd_sqrt(a: &SymMatrix) -> Result<SymMatrix, LinalgError> {
    let e = psd_spectrum(a)?;
    Ok(SymMatrix(spectral_map(&e, |l| l.max(0.0).sqrt())))
}

/// `(A^{1/2}, A^{-1/2})` for a positive definite `A`.
pub fn psd_sqrt_inv(a: &SymMatrix) -> Result<(SymMatrix, SymMatrix), LinalgError> {
    let e = psd_spectrum(a)?;
    let n = e.values.len();
    if n > 0 {
        let lmax = e.values[0];
        let lmin = e.values[n - 1];
        if lmax <= 0.0 || lmin <= RANK_TOL * lmax {
            return Err(LinalgError::SingularInput { min_eig: lmin });
        }
    }
    let root = SymMatrix(spectral_map(&e, f64::sqrt));
    let inv_root = SymMatrix(spectral_map(&e, |l| 1.0 / l.sqrt()));
    Ok((root, inv_root))
}

/// Inverse of a positive definite matrix through its spectrum.
pub fn spd_inverse(a: &SymMatrix) -> Result<SymMatrix, LinalgError> {
    let e = psd_spectrum(a)?;
    let n = e.values.len();
    if n > 0 && (e.values[0] <= 0.0 || e.values[n - 1] <= RANK_TOL * e.values[0]) {
        return Err(LinalgError::SingularInput {
            min_eig: e.values[n - 1],
        });
    }
    Ok(SymMatrix(spectral_map(&e, |l| 1.0 / l)))
}

/// Moore-Penrose pseudo-inverse of a symmetric PSD matrix.
pub fn psd_pinv(a: &SymMatrix) -> Result<SymMatrix, LinalgError> {
    let e = psd_spectrum(a)?;
    let cut = RANK_TOL * e.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    Ok(SymMatrix(spectral_map(&e, |l| if l > cut { 1.0 / l } else { 0.0 })))
}

/// Product of the eigenvalues above `RANK_TOL * lambda_max`.
pub fn pseudo_det(a: &SymMatrix) -> Result<f64, LinalgError> {
    log_pseudo_det(a).map(f64::exp)
}

/// Natural log of [`pseudo_det`], computed as a sum of logs.
pub fn log_pseudo_det(a: &SymMatrix) -> Result<f64, LinalgError> {
    let e = psd_spectrum(a)?;
    let lmax = e.values.iter().fold(0.0_f64, |m, v| m.max(*v));
    if lmax <= 0.0 {
        return Err(LinalgError::ZeroMatrix);
    }
    let cut = RANK_TOL * lmax;
    Ok(e.values.iter().filter(|&&l| l > cut).map(|l| l.ln()).sum())
}

/// `log det A` for a symmetric matrix, `-inf` when it is not positive definite.
pub fn log_det_pd(a: &DMatrix<f64>) -> f64 {
    match a.clone().cholesky() {
        Some(ch) => 2.0 * ch.l().diagonal().iter().map(|d| d.ln()).sum::<f64>(),
        None => f64::NEG_INFINITY,
    }
}

/// Compact SVD `V = U1 * diag(sigma) * U2^T` keeping singular values above
/// `RANK_TOL * sigma_max`, sorted descending.
#[derive(Debug, Clone)]
pub struct CompactSvd {
    pub u1: DMatrix<f64>,
    pub sigma: DVector<f64>,
    pub u2: DMatrix<f64>,
}

impl CompactSvd {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.u1 * DMatrix::from_diagonal(&self.sigma) * self.u2.transpose()
    }
}

pub fn compact_svd(v: &DMatrix<f64>) -> Result<CompactSvd, LinalgError> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(LinalgError::InvalidInput("non-finite entry".into()));
    }
    let svd = v.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested V^T");
    let smax = svd.singular_values.iter().fold(0.0_f64, |m, s| m.max(*s));
    if smax == 0.0 {
        return Err(LinalgError::ZeroMatrix);
    }
    let mut keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > RANK_TOL * smax)
        .collect();
    keep.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let r = keep.len();
    let mut u1 = DMatrix::zeros(v.nrows(), r);
    let mut u2 = DMatrix::zeros(v.ncols(), r);
    let mut sigma = DVector::zeros(r);
    for (k, &i) in keep.iter().enumerate() {
        u1.set_column(k, &u.column(i));
        u2.set_column(k, &vt.row(i).transpose());
        sigma[k] = svd.singular_values[i];
    }
    Ok(CompactSvd { u1, sigma, u2 })
}

/// Numerical rank with the module-wide relative cutoff.
pub fn rank(m: &DMatrix<f64>) -> usize {
    if m.is_empty() {
        return 0;
    }
    let s = m.clone().singular_values();
    let smax = s.iter().fold(0.0_f64, |a, b| a.max(*b));
    if smax == 0.0 {
        return 0;
    }
    s.iter().filter(|&&x| x > 1e-10 * smax).count()
}

/// Reads a matrix CSV: optional `# dim=<r>x<c>` comment line, then one row
/// per line with comma-separated values.
pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<DMatrix<f64>, LinalgError> {
    let text = std::fs::read_to_string(path.as_ref())
        .map_err(|e| LinalgError::Csv(format!("{}: {e}", path.as_ref().display())))?;
    parse_matrix_csv(&text)
}

pub fn parse_matrix_csv(text: &str) -> Result<DMatrix<f64>, LinalgError> {
    let mut declared: Option<(usize, usize)> = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(dims) = comment.trim().strip_prefix("dim=") {
                let (r, c) = dims
                    .split_once('x')
                    .ok_or_else(|| LinalgError::Csv(format!("bad dim header `{line}`")))?;
                let r = r.trim().parse().map_err(|_| LinalgError::Csv(format!("bad rows in `{line}`")))?;
                let c = c.trim().parse().map_err(|_| LinalgError::Csv(format!("bad cols in `{line}`")))?;
                declared = Some((r, c));
            }
            continue;
        }
        let row = line
            .split(',')
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|_| LinalgError::Csv(format!("line {}: bad number `{}`", lineno + 1, f.trim())))
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    let m = matrix_from_rows(&rows)?;
    if let Some((r, c)) = declared {
        if (r, c) != (m.nrows(), m.ncols()) {
            return Err(LinalgError::Csv(format!(
                "header declares {r}x{c} but data is {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
    }
    Ok(m)
}

pub fn format_matrix_csv(m: &DMatrix<f64>) -> String {
    let mut out = format!("# dim={}x{}\n", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:e}", m[(i, j)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn write_matrix_csv(path: impl AsRef<Path>, m: &DMatrix<f64>) -> Result<(), LinalgError> {
    std::fs::write(path.as_ref(), format_matrix_csv(m))
        .map_err(|e| LinalgError::Csv(format!("{}: {e}", path.as_ref().display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;

    #[test]
    fn eig_of_identity_and_diagonal() {
        let e = sym_eig(&SymMatrix::identity(2));
        assert_eq!(e.values.as_slice(), &[1.0, 1.0]);
        let e = sym_eig(&SymMatrix::from_diagonal(&[1.0, 3.0]));
        assert_eq!(e.values.as_slice(), &[3.0, 1.0]);
        assert_relative_eq!(e.vectors[(1, 0)].abs(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn eig_of_two_by_two() {
        let a = SymMatrix::new(dmatrix![2.0, 1.0; 1.0, 2.0]).unwrap();
        let e = sym_eig(&a);
        assert_relative_eq!(e.values[0], 3.0, epsilon = 1e-12);
        assert_relative_eq!(e.values[1], 1.0, epsilon = 1e-12);
        let v0 = e.vectors.column(0);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_relative_eq!(v0[0].abs(), s, epsilon = 1e-12);
        assert_relative_eq!(v0[0] * v0[1], 0.5, epsilon = 1e-12);
        let v1 = e.vectors.column(1);
        assert_relative_eq!(v1[0] * v1[1], -0.5, epsilon = 1e-12);
    }

    #[test]
    fn rejects_asymmetric_and_non_finite() {
        assert!(matches!(
            SymMatrix::new(dmatrix![1.0, 2.0; 0.0, 1.0]),
            Err(LinalgError::NotSymmetric { .. })
        ));
        assert!(matches!(
            SymMatrix::new(dmatrix![f64::NAN, 0.0; 0.0, 1.0]),
            Err(LinalgError::InvalidInput(_))
        ));
    }

    #[test]
    fn pencil_examples() {
        let (w, _) = gen_eig_largest(&SymMatrix::identity(2), &SymMatrix::identity(2)).unwrap();
        assert_relative_eq!(w, 1.0, epsilon = 1e-14);

        let a = SymMatrix::from_diagonal(&[4.0, 1.0]);
        let b = SymMatrix::from_diagonal(&[2.0, 1.0]);
        let (w, p) = gen_eig_largest(&a, &b).unwrap();
        assert_relative_eq!(w, 2.0, epsilon = 1e-12);
        assert!(p[1].abs() < 1e-12);
        assert_relative_eq!(b.quad_form(&p), 1.0, epsilon = 1e-12);

        let a = SymMatrix::new(dmatrix![1.0, 0.0; 0.0, 0.0]).unwrap();
        let (w, _) = gen_eig_largest(&a, &SymMatrix::identity(2)).unwrap();
        assert_relative_eq!(w, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn pencil_with_singular_b() {
        let b = SymMatrix::from_diagonal(&[1.0, 0.0]);
        assert!(matches!(
            gen_eig_largest(&SymMatrix::identity(2), &b),
            Err(LinalgError::SingularB { .. })
        ));
    }

    #[test]
    fn square_roots() {
        let (r, ir) = psd_sqrt_inv(&SymMatrix::identity(3)).unwrap();
        assert_relative_eq!(r.matrix(), &DMatrix::identity(3, 3), epsilon = 1e-14);
        assert_relative_eq!(ir.matrix(), &DMatrix::identity(3, 3), epsilon = 1e-14);

        let (r, ir) = psd_sqrt_inv(&SymMatrix::from_diagonal(&[4.0, 9.0])).unwrap();
        assert_relative_eq!(r.matrix(), &dmatrix![2.0, 0.0; 0.0, 3.0], epsilon = 1e-14);
        assert_relative_eq!(ir.matrix(), &dmatrix![0.5, 0.0; 0.0, 1.0 / 3.0], epsilon = 1e-14);

        let a = SymMatrix::new(dmatrix![2.0, 1.0; 1.0, 2.0]).unwrap();
        let (r, ir) = psd_sqrt_inv(&a).unwrap();
        assert_relative_eq!(r.matrix() * r.matrix(), a.matrix().clone(), epsilon = 1e-12);
        assert_relative_eq!(r.matrix() * ir.matrix(), DMatrix::identity(2, 2), epsilon = 1e-12);
    }

    #[test]
    fn square_root_errors() {
        let indefinite = SymMatrix::from_diagonal(&[1.0, -1.0]);
        assert!(matches!(psd_sqrt(&indefinite), Err(LinalgError::NotPsd { .. })));
        let singular = SymMatrix::from_diagonal(&[1.0, 0.0]);
        assert!(psd_sqrt(&singular).is_ok());
        assert!(matches!(psd_sqrt_inv(&singular), Err(LinalgError::SingularInput { .. })));
    }

    #[test]
    fn pseudo_determinants() {
        assert_relative_eq!(pseudo_det(&SymMatrix::from_diagonal(&[2.0, 0.0])).unwrap(), 2.0, epsilon = 1e-14);
        assert_relative_eq!(pseudo_det(&SymMatrix::identity(3)).unwrap(), 1.0, epsilon = 1e-14);
        assert_relative_eq!(
            pseudo_det(&SymMatrix::from_diagonal(&[3.0, 5.0, 0.0])).unwrap(),
            15.0,
            epsilon = 1e-12
        );
        assert!(matches!(pseudo_det(&SymMatrix::zeros(2)), Err(LinalgError::ZeroMatrix)));
    }

    #[test]
    fn compact_svd_of_rank_one() {
        let v = dmatrix![1.0, 2.0; 2.0, 4.0; 0.0, 0.0];
        let svd = compact_svd(&v).unwrap();
        assert_eq!(svd.rank(), 1);
        assert_relative_eq!(svd.reconstruct(), v, epsilon = 1e-12);
    }

    #[test]
    fn csv_round_trip_and_header_check() {
        let m = dmatrix![1.0, -2.5; 3.25, 0.0; 1e-3, 7.0];
        let parsed = parse_matrix_csv(&format_matrix_csv(&m)).unwrap();
        assert_eq!(parsed, m);
        assert!(parse_matrix_csv("# dim=2x2\n1,2\n").is_err());
        assert!(parse_matrix_csv("1,2\n3\n").is_err());
    }
}
