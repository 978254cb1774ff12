//! Dense real linear algebra used throughout the crate.
//!
//! Matrices are `nalgebra::DMatrix<f64>`; decompositions (SVD, symmetric and
//! general eigensolvers) come from nalgebra. The helpers here fix the
//! conventions the rest of the crate relies on: column-major vectorization,
//! descending eigenvalue order and relative singular-value cutoffs.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Relative singular-value threshold used by [`numerical_rank`] unless a
/// caller supplies its own.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Relative tolerance on `‖S − Sᵀ‖_F` accepted by [`sym_eig_desc`].
pub const SYMMETRY_TOL: f64 = 1e-9;

/// Kronecker product. Block `(i, j)` of the result is `a[(i, j)] * b`.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (p, q) = a.shape();
    let (r, s) = b.shape();
    let mut out = Matrix::zeros(p * r, q * s);
    for j in 0..q {
        for i in 0..p {
            let aij = a[(i, j)];
            if aij == 0.0 {
                continue;
            }
            let mut block = out.view_mut((i * r, j * s), (r, s));
            block.zip_apply(b, |o, bv| *o = aij * bv);
        }
    }
    out
}

/// Column-major stacking of `m`.
pub fn vec(m: &Matrix) -> Vector {
    Vector::from_column_slice(m.as_slice())
}

/// Inverse of [`vec`]: reshape a length `rows * cols` vector column by column.
pub fn unvec(v: &Vector, rows: usize, cols: usize) -> Result<Matrix> {
    if v.len() != rows * cols {
        return Err(Error::Dimension(format!(
            "cannot reshape vector of length {} into {rows}x{cols}",
            v.len()
        )));
    }
    Ok(Matrix::from_column_slice(rows, cols, v.as_slice()))
}

/// Moore–Penrose pseudoinverse via SVD.
///
/// Singular values `σ ≤ 1e-12 · σ_max · max(m, n)` are treated as zero, so a
/// zero matrix maps to the zero matrix of transposed shape.
pub fn pinv(m: &Matrix) -> Matrix {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Matrix::zeros(cols, rows);
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.as_ref().expect("svd computed with u");
    let v_t = svd.v_t.as_ref().expect("svd computed with v_t");
    let sigma_max = svd.singular_values.max();
    let cutoff = 1e-12 * sigma_max * rows.max(cols) as f64;

    let mut out = Matrix::zeros(cols, rows);
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s <= cutoff || s == 0.0 {
            continue;
        }
        // out += v_k * u_kᵀ / σ_k
        let vk = v_t.row(k).transpose();
        let uk = u.column(k);
        out.ger(1.0 / s, &vk, &uk, 1.0);
    }
    out
}

fn check_symmetric(s: &Matrix) -> Result<()> {
    if !s.is_square() {
        return Err(Error::Dimension(format!(
            "symmetric eigenproblem needs a square matrix, got {}x{}",
            s.nrows(),
            s.ncols()
        )));
    }
    let asym = (s - s.transpose()).norm();
    if asym > SYMMETRY_TOL * (1.0 + s.norm()) {
        return Err(Error::Contract(format!(
            "matrix is not symmetric (‖S − Sᵀ‖_F = {asym:.3e})"
        )));
    }
    Ok(())
}

/// Eigenvalues of a symmetric matrix sorted `λ₁ ≥ … ≥ λₙ`.
pub fn sym_eig_desc(s: &Matrix) -> Result<Vector> {
    Ok(sym_eig_desc_with_vectors(s)?.0)
}

/// Like [`sym_eig_desc`] but also returns the orthonormal eigenvectors as
/// columns, ordered to match the eigenvalues.
pub fn sym_eig_desc_with_vectors(s: &Matrix) -> Result<(Vector, Matrix)> {
    check_symmetric(s)?;
    let n = s.nrows();
    if n == 0 {
        return Ok((Vector::zeros(0), Matrix::zeros(0, 0)));
    }
    let sym = (s + s.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = Vector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok((values, vectors))
}

/// Eigenvalues of a general square matrix, sorted by descending real part.
pub fn general_eigenvalues(m: &Matrix) -> Result<Vec<Complex<f64>>> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "eigenvalues need a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let mut values: Vec<Complex<f64>> = m.clone().complex_eigenvalues().iter().copied().collect();
    values.sort_by(|a, b| b.re.total_cmp(&a.re));
    Ok(values)
}

/// Number of singular values above `rel_tol · σ_max`. The zero matrix has rank 0.
pub fn numerical_rank(m: &Matrix, rel_tol: f64) -> usize {
    assert!(rel_tol > 0.0, "rel_tol must be positive");
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.singular_values();
    rank_from_magnitudes(sv.iter().copied(), rel_tol)
}

/// Rank decision on an already computed spectrum. For a symmetric matrix the
/// singular values are the absolute eigenvalues, so this agrees with
/// [`numerical_rank`] without a second decomposition.
pub fn rank_from_magnitudes(values: impl IntoIterator<Item = f64>, rel_tol: f64) -> usize {
    let mags: Vec<f64> = values.into_iter().map(f64::abs).collect();
    let max = mags.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    mags.iter().filter(|&&s| s > rel_tol * max).count()
}

/// The permutation `P` with `P · vec(M) = vec(Mᵀ)` for every `n × n` matrix `M`.
pub fn symmetrizer_permutation(n: usize) -> Matrix {
    let mut p = Matrix::zeros(n * n, n * n);
    for r in 0..n {
        for c in 0..n {
            // vec index of (r, c) is c*n + r; it must receive entry (c, r).
            p[(c * n + r, r * n + c)] = 1.0;
        }
    }
    p
}

/// The 1-based standard basis vector `eᵢ ∈ ℝⁿ`.
pub fn standard_basis(n: usize, i: usize) -> Result<Vector> {
    if i == 0 || i > n {
        return Err(Error::Dimension(format!("basis index {i} outside 1..={n}")));
    }
    let mut e = Vector::zeros(n);
    e[i - 1] = 1.0;
    Ok(e)
}

/// Block-diagonal matrix from square or rectangular blocks.
pub fn block_diag(blocks: &[Matrix]) -> Matrix {
    let rows = blocks.iter().map(Matrix::nrows).sum();
    let cols = blocks.iter().map(Matrix::ncols).sum();
    let mut out = Matrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), b.shape()).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// Vertical stack `col{M₁, …, M_k}`; all blocks must share a column count.
pub fn vstack(blocks: &[&Matrix]) -> Result<Matrix> {
    let Some(first) = blocks.first() else {
        return Err(Error::Dimension("cannot stack an empty list".into()));
    };
    let cols = first.ncols();
    if let Some(bad) = blocks.iter().find(|b| b.ncols() != cols) {
        return Err(Error::Dimension(format!(
            "vstack: expected {cols} columns, found {}",
            bad.ncols()
        )));
    }
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = Matrix::zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        out.view_mut((r, 0), b.shape()).copy_from(*b);
        r += b.nrows();
    }
    Ok(out)
}

/// Concatenate vectors end to end.
pub fn vconcat(parts: &[&Vector]) -> Vector {
    let len = parts.iter().map(|v| v.len()).sum();
    let mut out = Vector::zeros(len);
    let mut at = 0;
    for v in parts {
        out.rows_mut(at, v.len()).copy_from(*v);
        at += v.len();
    }
    out
}

/// Matrix from row-major nested rows.
pub fn from_rows(rows: &[Vec<f64>]) -> Result<Matrix> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 {
        return Err(Error::Dimension("matrix must have at least one row and column".into()));
    }
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != ncols) {
        return Err(Error::Dimension(format!(
            "row {} has {} entries, expected {ncols}",
            i + 1,
            r.len()
        )));
    }
    Ok(Matrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;

    #[test]
    fn kron_identity_and_zero() {
        assert_eq!(kron(&Matrix::identity(2, 2), &Matrix::identity(2, 2)), Matrix::identity(4, 4));
        let a = dmatrix![1.0, 2.0; 3.0, 4.0; 5.0, 6.0];
        assert_eq!(kron(&a, &Matrix::zeros(2, 4)), Matrix::zeros(6, 8));
    }

    #[test]
    fn kron_hand_expansion() {
        let a = dmatrix![1.0, 2.0; 3.0, 4.0];
        let b = dmatrix![0.0, 1.0; 1.0, 0.0];
        let expected = dmatrix![
            0.0, 1.0, 0.0, 2.0;
            1.0, 0.0, 2.0, 0.0;
            0.0, 3.0, 0.0, 4.0;
            3.0, 0.0, 4.0, 0.0
        ];
        assert_eq!(kron(&a, &b), expected);
    }

    #[test]
    fn vec_is_column_major() {
        let m = dmatrix![1.0, 2.0; 3.0, 4.0];
        assert_eq!(vec(&m).as_slice(), &[1.0, 3.0, 2.0, 4.0]);
        assert_eq!(vec(&Matrix::identity(2, 2)).as_slice(), &[1.0, 0.0, 0.0, 1.0]);
        assert_eq!(vec(&Matrix::zeros(3, 2)), Vector::zeros(6));
    }

    #[test]
    fn unvec_inverts_and_checks_length() {
        let v = Vector::from_vec(vec![1.0, 3.0, 2.0, 4.0]);
        assert_eq!(unvec(&v, 2, 2).unwrap(), dmatrix![1.0, 2.0; 3.0, 4.0]);
        assert_eq!(unvec(&Vector::zeros(6), 2, 3).unwrap(), Matrix::zeros(2, 3));
        assert!(matches!(unvec(&v, 3, 2), Err(Error::Dimension(_))));
    }

    #[test]
    fn pinv_closed_forms() {
        let d = dmatrix![2.0, 0.0; 0.0, 0.0];
        assert_relative_eq!(pinv(&d), dmatrix![0.5, 0.0; 0.0, 0.0], epsilon = 1e-15);
        let col = dmatrix![1.0; 1.0];
        assert_relative_eq!(pinv(&col), dmatrix![0.5, 0.5], epsilon = 1e-15);
        assert_eq!(pinv(&Matrix::zeros(2, 3)), Matrix::zeros(3, 2));
    }

    #[test]
    fn sym_eig_descending() {
        assert_eq!(sym_eig_desc(&Matrix::identity(3, 3)).unwrap().as_slice(), &[1.0, 1.0, 1.0]);
        let d = Matrix::from_diagonal(&Vector::from_vec(vec![3.0, -1.0, 2.0]));
        assert_eq!(sym_eig_desc(&d).unwrap().as_slice(), &[3.0, 2.0, -1.0]);
        // Laplacian of K3: characteristic polynomial λ(λ − 3)².
        let k3 = dmatrix![2.0, -1.0, -1.0; -1.0, 2.0, -1.0; -1.0, -1.0, 2.0];
        let ev = sym_eig_desc(&k3).unwrap();
        assert_relative_eq!(ev[0], 3.0, epsilon = 1e-12);
        assert_relative_eq!(ev[1], 3.0, epsilon = 1e-12);
        assert_relative_eq!(ev[2], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn sym_eig_rejects_asymmetric() {
        let m = dmatrix![1.0, 2.0; 0.0, 1.0];
        assert!(matches!(sym_eig_desc(&m), Err(Error::Contract(_))));
    }

    #[test]
    fn rank_examples() {
        assert_eq!(numerical_rank(&Matrix::identity(4, 4), DEFAULT_RANK_TOL), 4);
        assert_eq!(numerical_rank(&Matrix::zeros(3, 3), DEFAULT_RANK_TOL), 0);
        assert_eq!(numerical_rank(&dmatrix![1.0, 1.0; 1.0, 1.0], DEFAULT_RANK_TOL), 1);
    }

    #[test]
    fn symmetrizer_examples() {
        assert_eq!(symmetrizer_permutation(1), Matrix::identity(1, 1));
        let p = symmetrizer_permutation(2);
        // (a, c, b, d) with a=1, b=2, c=3, d=4
        let x = Vector::from_vec(vec![1.0, 3.0, 2.0, 4.0]);
        assert_eq!((&p * x).as_slice(), &[1.0, 2.0, 3.0, 4.0]);
        let p3 = symmetrizer_permutation(3);
        assert_eq!(&p3 * &p3, Matrix::identity(9, 9));
    }

    #[test]
    fn standard_basis_examples() {
        assert_eq!(standard_basis(3, 1).unwrap().as_slice(), &[1.0, 0.0, 0.0]);
        assert_eq!(standard_basis(3, 3).unwrap().as_slice(), &[0.0, 0.0, 1.0]);
        let sum = (1..=4).map(|i| standard_basis(4, i).unwrap()).fold(Vector::zeros(4), |a, e| a + e);
        assert_eq!(sum, Vector::repeat(4, 1.0));
        assert!(standard_basis(3, 0).is_err());
        assert!(standard_basis(3, 4).is_err());
    }

    #[test]
    fn general_eigenvalues_of_rotation() {
        let r = dmatrix![0.0, -1.0; 1.0, 0.0];
        let ev = general_eigenvalues(&r).unwrap();
        assert_eq!(ev.len(), 2);
        for z in ev {
            assert_relative_eq!(z.re, 0.0, epsilon = 1e-12);
            assert_relative_eq!(z.im.abs(), 1.0, epsilon = 1e-12);
        }
    }
}
