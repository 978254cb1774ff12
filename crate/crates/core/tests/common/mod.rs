#![allow(dead_code)]

use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sylflow::partition::SylvesterProblem;

pub type M = DMatrix<f64>;
pub type V = DVector<f64>;

/// Writes past libtest's output capture so verdicts always reach the log.
pub fn announce(line: &str) {
    #[cfg(unix)]
    {
        use std::os::fd::FromRawFd;
        // Borrow fd 2 without closing it on drop.
        let mut err = std::mem::ManuallyDrop::new(unsafe { std::fs::File::from_raw_fd(2) });
        let _ = writeln!(err, "\n{line}");
    }
    #[cfg(not(unix))]
    eprintln!("{line}");
}

/// `I ⊗ A + Bᵀ ⊗ I` built with nalgebra's own Kronecker product.
pub fn operator_ref(a: &M, b: &M) -> M {
    let (n, m) = (a.nrows(), b.nrows());
    M::identity(m, m).kronecker(a) + b.transpose().kronecker(&M::identity(n, n))
}

/// `AX + XB = C` by LU on the vectorized system.
pub fn solve_ref(a: &M, b: &M, c: &M) -> M {
    let h = operator_ref(a, b);
    let x = h.lu().solve(&V::from_column_slice(c.as_slice())).expect("nonsingular");
    M::from_column_slice(a.nrows(), b.nrows(), x.as_slice())
}

/// Column `i` (0-based) of `AX + XB = C` as rows over `vec X`.
pub fn column_rows_ref(a: &M, b: &M, i: usize) -> M {
    let (n, m) = (a.nrows(), b.nrows());
    let mut e = M::zeros(1, m);
    e[(0, i)] = 1.0;
    e.kronecker(a) + b.column(i).transpose().kronecker(&M::identity(n, n))
}

pub fn pinv_ref(m: &M) -> M {
    m.clone().pseudo_inverse(1e-12).expect("svd converges")
}

pub fn eig_desc(s: &M) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(s.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

/// Smallest eigenvalue above `tol · λ_max` of a symmetric PSD matrix.
pub fn smallest_nonzero(s: &M, tol: f64) -> f64 {
    let ev = eig_desc(s);
    let cut = tol * ev[0].abs().max(1.0);
    ev.into_iter().filter(|&v| v > cut).fold(f64::INFINITY, f64::min)
}

pub fn rank_ref(m: &M) -> usize {
    let sv = m.clone().svd(false, false).singular_values;
    let top = sv.iter().copied().fold(0.0, f64::max);
    sv.iter().filter(|&&s| s > 1e-10 * top.max(1e-300)).count()
}

/// `K L ⊗ I + diag(Hᵢ†Hᵢ)` from the raw rows.
pub fn jl_ref(hs: &[M], lap: &M, k: f64) -> M {
    let d = hs[0].ncols();
    let n = hs.len();
    let mut j = lap.kronecker(&M::identity(d, d)) * k;
    for (i, h) in hs.iter().enumerate() {
        let block = pinv_ref(h) * h;
        let mut view = j.view_mut((i * d, i * d), (d, d));
        view += block;
    }
    assert_eq!(j.nrows(), n * d);
    j
}

pub fn cycle_laplacian(n: usize) -> M {
    let mut l = M::zeros(n, n);
    for i in 0..n {
        let j = (i + 1) % n;
        l[(i, i)] += 1.0;
        l[(j, j)] += 1.0;
        l[(i, j)] -= 1.0;
        l[(j, i)] -= 1.0;
    }
    l
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> M {
    M::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

/// `S diag(λ) S⁻¹` with a well-conditioned random `S`.
pub fn with_spectrum(rng: &mut ChaCha8Rng, spectrum: &[f64]) -> M {
    let n = spectrum.len();
    let s = M::identity(n, n) + random_matrix(rng, n, n) * 0.3;
    let inv = s.clone().try_inverse().expect("near identity");
    s * M::from_diagonal(&V::from_column_slice(spectrum)) * inv
}

/// Unique-solution 3×3 instance.
pub fn case_one(seed: u64) -> SylvesterProblem {
    let mut r = rng(seed);
    let a = with_spectrum(&mut r, &[1.0, 1.5, 2.0]);
    let b = with_spectrum(&mut r, &[0.5, 1.0, 2.5]);
    let c = random_matrix(&mut r, 3, 3);
    SylvesterProblem::new(a, b, c).unwrap()
}

/// Consistent 3×3 instance with a one-dimensional solution family:
/// `A` and `−B` share the eigenvalue 1.
pub fn case_two(seed: u64) -> SylvesterProblem {
    let mut r = rng(seed);
    let a = with_spectrum(&mut r, &[1.0, 1.5, 2.0]);
    let b = with_spectrum(&mut r, &[-1.0, 1.0, 2.5]);
    let x0 = random_matrix(&mut r, 3, 3);
    let c = &a * &x0 + &x0 * &b;
    SylvesterProblem::new(a, b, c).unwrap()
}
