//! Dense linear-algebra helpers shared by the algorithm modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Orthonormality tolerance for emitted bases.
pub const ORTHO_TOL: f64 = 1e-10;

/// A tall matrix with orthonormal columns.
///
/// Rank zero is allowed and represents the trivial subspace `{0}`; its
/// complement projector is the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisMatrix {
    data: DMatrix<f64>,
}

impl BasisMatrix {
    /// Wraps `data`, checking `‖PᵀP − I‖_max ≤ tol`.
    pub fn new(data: DMatrix<f64>, tol: f64) -> Result<Self> {
        if data.ncols() > data.nrows() {
            return Err(Error::Dimension(format!(
                "basis has {} columns but ambient dimension {}",
                data.ncols(),
                data.nrows()
            )));
        }
        let dev = orthonormality_defect(&data);
        if dev > tol {
            return Err(Error::InvalidInput(format!(
                "columns not orthonormal (max |PᵀP − I| = {dev:.3e})"
            )));
        }
        Ok(Self { data })
    }

    /// Orthonormalises the columns of `data` (modified Gram-Schmidt with one
    /// reorthogonalisation pass). Fails if the columns are numerically
    /// dependent.
    pub fn orthonormalize(data: DMatrix<f64>) -> Result<Self> {
        let q = gram_schmidt(data)?;
        Ok(Self { data: q })
    }

    pub fn empty(n: usize) -> Self {
        Self {
            data: DMatrix::zeros(n, 0),
        }
    }

    pub(crate) fn from_trusted(data: DMatrix<f64>) -> Self {
        Self { data }
    }

    /// Ambient dimension.
    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn rank(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.data.ncols() == 0
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.data
    }

    /// `[self other]`. Fails if the result is not orthonormal within `tol`.
    pub fn concat(&self, other: &BasisMatrix, tol: f64) -> Result<Self> {
        if self.n() != other.n() {
            return Err(Error::Dimension(format!(
                "cannot concatenate bases of dimension {} and {}",
                self.n(),
                other.n()
            )));
        }
        let mut m = DMatrix::zeros(self.n(), self.rank() + other.rank());
        m.columns_mut(0, self.rank()).copy_from(&self.data);
        m.columns_mut(self.rank(), other.rank())
            .copy_from(&other.data);
        Self::new(m, tol)
    }

    /// First `k` columns.
    pub fn leading(&self, k: usize) -> Self {
        Self {
            data: self.data.columns(0, k).into_owned(),
        }
    }

    /// Columns `start..start+k`.
    pub fn columns(&self, start: usize, k: usize) -> Self {
        Self {
            data: self.data.columns(start, k).into_owned(),
        }
    }

    /// `(I − PPᵀ) v`, computed as `v − P(Pᵀv)`.
    pub fn project_out(&self, v: &DVector<f64>) -> DVector<f64> {
        if self.is_empty() {
            return v.clone();
        }
        let coeffs = self.data.tr_mul(v);
        v - &self.data * coeffs
    }

    /// `(I − PPᵀ) D` for a matrix argument.
    pub fn project_out_matrix(&self, d: &DMatrix<f64>) -> DMatrix<f64> {
        if self.is_empty() {
            return d.clone();
        }
        let coeffs = self.data.tr_mul(d);
        d - &self.data * coeffs
    }

    /// Row `i` of the basis.
    pub fn row(&self, i: usize) -> DVector<f64> {
        self.data.row(i).transpose()
    }
}

/// `max |PᵀP − I|`.
pub fn orthonormality_defect(p: &DMatrix<f64>) -> f64 {
    let g = p.tr_mul(p);
    let mut worst: f64 = 0.0;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}

/// Modified Gram-Schmidt, run twice per column.
pub fn gram_schmidt(mut a: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let ncols = a.ncols();
    for j in 0..ncols {
        let original = a.column(j).norm();
        for _pass in 0..2 {
            for i in 0..j {
                let proj = a.column(i).dot(&a.column(j));
                let qi = a.column(i).into_owned();
                a.column_mut(j).axpy(-proj, &qi, 1.0);
            }
        }
        let norm = a.column(j).norm();
        if norm <= 1e-12 * original.max(1e-300) || norm == 0.0 {
            return Err(Error::InvalidInput(format!(
                "column {j} is linearly dependent on earlier columns"
            )));
        }
        a.column_mut(j).scale_mut(1.0 / norm);
    }
    Ok(a)
}

/// Eigen-decomposition of the symmetric part of `m`.
///
/// `SymmetricEigen` occasionally returns non-finite values for finite inputs
/// with exactly decoupled blocks; a diagonal shift avoids the degenerate
/// deflation and is undone afterwards.
fn symmetric_eigen(m: &DMatrix<f64>) -> SymmetricEigen<f64, nalgebra::Dyn> {
    let sym = (m + m.transpose()) * 0.5;
    let finite = |e: &SymmetricEigen<f64, nalgebra::Dyn>| {
        e.eigenvalues.iter().all(|v| v.is_finite()) && e.eigenvectors.iter().all(|v| v.is_finite())
    };
    let eig = SymmetricEigen::new(sym.clone());
    if finite(&eig) || !sym.iter().all(|v| v.is_finite()) {
        return eig;
    }
    let base = sym.norm().max(f64::MIN_POSITIVE);
    for k in 1..=8 {
        let shift = base * (0.5 + 0.37 * k as f64);
        let n = sym.nrows();
        let mut e = SymmetricEigen::new(&sym + DMatrix::identity(n, n) * shift);
        if finite(&e) {
            e.eigenvalues.add_scalar_mut(-shift);
            return e;
        }
    }
    eig
}

/// Eigen-decomposition of a symmetric matrix with eigenvalues sorted in
/// descending order and each eigenvector sign-normalised so that its first
/// entry with magnitude above `1e-12` is positive.
pub fn sorted_symmetric_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let eig = symmetric_eigen(m);
    let mut order: Vec<usize> = (0..n).collect();
    // stable sort keeps the earlier index first among exact ties
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut vecs = DMatrix::zeros(n, n);
    let mut vals = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        vals.push(eig.eigenvalues[src]);
        let mut col = eig.eigenvectors.column(src).into_owned();
        normalize_sign(&mut col);
        vecs.set_column(dst, &col);
    }
    (vals, vecs)
}

/// Flip `v` so that its first entry of magnitude > 1e-12 is positive.
pub fn normalize_sign(v: &mut DVector<f64>) {
    if let Some(first) = v.iter().copied().find(|x| x.abs() > 1e-12) {
        if first < 0.0 {
            v.neg_mut();
        }
    }
}

/// Largest eigenvalue of a symmetric matrix (0 for an empty matrix).
pub fn lambda_max(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    symmetric_eigen(m).eigenvalues.max()
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn lambda_min(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    symmetric_eigen(m).eigenvalues.min()
}

/// Spectral norm of an arbitrary matrix, via the smaller Gram matrix.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    let gram = if m.nrows() <= m.ncols() {
        m * m.transpose()
    } else {
        m.tr_mul(m)
    };
    lambda_max(&gram).max(0.0).sqrt()
}

/// Spectral norm of a symmetric matrix, `max |λ_i|`.
pub fn symmetric_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    symmetric_eigen(m)
        .eigenvalues
        .iter()
        .fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Rows of `m` indexed by `rows`.
pub fn select_rows(m: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), m.ncols(), |i, j| m[(rows[i], j)])
}

/// Columns of `m` indexed by `cols`.
pub fn select_columns(m: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), cols.len(), |i, j| m[(i, cols[j])])
}

/// Principal submatrix `m[idx, idx]`.
pub fn principal_submatrix(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |i, j| m[(idx[i], idx[j])])
}

/// Binomial coefficient as u128, saturating.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

/// Iterator over all `k`-subsets of `0..n` in lexicographic order.
pub struct Combinations {
    n: usize,
    current: Vec<usize>,
    done: bool,
}

impl Combinations {
    pub fn new(n: usize, k: usize) -> Self {
        Self {
            n,
            current: (0..k).collect(),
            done: k > n,
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.current.clone();
        let k = self.current.len();
        // advance
        let mut i = k;
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.current[i] < self.n - k + i {
                self.current[i] += 1;
                for j in i + 1..k {
                    self.current[j] = self.current[j - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combinations_count_matches_binomial() {
        for n in 0..8 {
            for k in 0..=n {
                assert_eq!(Combinations::new(n, k).count() as u128, binomial(n, k));
            }
        }
        assert_eq!(Combinations::new(3, 4).count(), 0);
    }

    #[test]
    fn gram_schmidt_rejects_dependent_columns() {
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(gram_schmidt(m).is_err());
    }

    #[test]
    fn sorted_eigen_descending_with_sign_convention() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 3.0]);
        let (vals, vecs) = sorted_symmetric_eigen(&m);
        assert!((vals[0] - 3.0).abs() < 1e-14);
        assert!((vals[1] - 1.0).abs() < 1e-14);
        assert!(vecs[(1, 0)] > 0.0);
        assert!(vecs[(0, 1)] > 0.0);
    }

    #[test]
    fn spectral_norm_of_rectangular() {
        let m = DMatrix::from_row_slice(2, 3, &[3.0, 0.0, 0.0, 0.0, 4.0, 0.0]);
        assert!((spectral_norm(&m) - 4.0).abs() < 1e-12);
        assert!((spectral_norm(&m.transpose()) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn project_out_of_empty_basis_is_identity() {
        let p = BasisMatrix::empty(3);
        let v = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        assert_eq!(p.project_out(&v), v);
    }

    #[test]
    fn decoupled_blocks_give_finite_spectrum() {
        // two PSD blocks, one wrapping around the index range; the plain
        // nalgebra routine returns non-finite eigenvalues on some of these
        let mut state = 12345u64;
        let mut next = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for n in 12..=30 {
            let blocks: [Vec<usize>; 2] = [(0..3).chain(n - 3..n).collect(), (4..7).collect()];
            for _ in 0..300 {
                let mut m = DMatrix::zeros(n, n);
                for idx in &blocks {
                    let k = idx.len();
                    let g = DMatrix::from_fn(k, k, |_, _| next());
                    let a = &g * g.transpose();
                    for p in 0..k {
                        for q in 0..k {
                            m[(idx[p], idx[q])] += a[(p, q)];
                        }
                    }
                }
                check_spectrum(&m);
            }
        }
    }

    fn check_spectrum(m: &DMatrix<f64>) {
        let svd_norm = m.clone().svd(false, false).singular_values.max();
        let norm = symmetric_norm(m);
        assert!((norm - svd_norm).abs() <= 1e-12 * svd_norm, "{norm} vs {svd_norm}");
        let (vals, vecs) = sorted_symmetric_eigen(m);
        assert!(vals.iter().all(|v| v.is_finite()));
        let recon = &vecs * DMatrix::from_diagonal(&DVector::from_vec(vals)) * vecs.transpose();
        assert!((recon - m).amax() <= 1e-12 * svd_norm);
    }
}
