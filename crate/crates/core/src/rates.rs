//! Closed-form convergence rates and their measurement from trajectories.

use serde::Serialize;

use crate::densela::{
    block_diag, general_eigenvalues, kron, numerical_rank, pinv, rank_from_magnitudes, sym_eig_desc, vstack, Matrix,
    DEFAULT_RANK_TOL,
};
use crate::error::{Error, Result};
use crate::flowsim::Trajectory;
use crate::netgraph::NetworkGraph;
use crate::partition::{ClusterOperators, NodeEquation, SylvesterProblem};

/// Samples with `e(t)` below this are ignored when fitting a rate.
pub const ERROR_FLOOR: f64 = 1e-20;

/// Minimum number of usable samples for [`measured_rate`].
pub const MIN_FIT_SAMPLES: usize = 10;

/// Default share of the trajectory used for rate fitting.
pub const DEFAULT_TAIL_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub k: f64,
    pub r_theory: f64,
    pub r_limit_r0: f64,
    pub r_measured: Option<f64>,
    pub bounds: Option<(f64, f64)>,
    pub rank_h: usize,
    pub rank_jl: usize,
}

fn common_dim(eqs: &[NodeEquation]) -> Result<usize> {
    let Some(first) = eqs.first() else {
        return Err(Error::Dimension("no node equations".into()));
    };
    let d = first.dim();
    if eqs.iter().any(|e| e.dim() != d) {
        return Err(Error::Dimension("node equations have different unknown dimensions".into()));
    }
    Ok(d)
}

/// `J = diag{Hᵢ†Hᵢ}`.
pub fn projection_block(eqs: &[NodeEquation]) -> Result<Matrix> {
    common_dim(eqs)?;
    let blocks: Vec<Matrix> = eqs.iter().map(|e| pinv(&e.h) * &e.h).collect();
    Ok(block_diag(&blocks))
}

/// `J_L = K (L ⊗ I_d) + J`.
pub fn jl_matrix(eqs: &[NodeEquation], lap: &Matrix, k: f64) -> Result<Matrix> {
    let d = common_dim(eqs)?;
    if lap.shape() != (eqs.len(), eqs.len()) {
        return Err(Error::Dimension(format!(
            "Laplacian is {}x{} for {} nodes",
            lap.nrows(),
            lap.ncols(),
            eqs.len()
        )));
    }
    let j = projection_block(eqs)?;
    Ok(kron(lap, &Matrix::identity(d, d)) * k + j)
}

/// `r(K) = λ_{rank(J_L)}(J_L)` and `rank(J_L)`.
pub fn r_of_k(eqs: &[NodeEquation], lap: &Matrix, k: f64) -> Result<(f64, usize)> {
    let jl = jl_matrix(eqs, lap, k)?;
    let ev = sym_eig_desc(&((&jl + jl.transpose()) * 0.5))?;
    let rank = rank_from_magnitudes(ev.iter().copied(), DEFAULT_RANK_TOL);
    if rank == 0 {
        return Err(Error::Degenerate("J_L is zero; no rate is defined".into()));
    }
    Ok((ev[rank - 1], rank))
}

/// Rank of the stacked operator `col{H₁, …, H_N}`.
pub fn stacked_rank(eqs: &[NodeEquation]) -> Result<usize> {
    common_dim(eqs)?;
    let hs: Vec<&Matrix> = eqs.iter().map(|e| &e.h).collect();
    Ok(numerical_rank(&vstack(&hs)?, DEFAULT_RANK_TOL))
}

/// `r₀ = λ_{rank H}((1/N) Σᵢ Hᵢ†Hᵢ)`, the large-`K` limit of `r(K)`.
pub fn r0_limit(eqs: &[NodeEquation]) -> Result<f64> {
    let d = common_dim(eqs)?;
    let rank = stacked_rank(eqs)?;
    if rank == 0 {
        return Err(Error::Degenerate("stacked H is zero".into()));
    }
    let mut avg = Matrix::zeros(d, d);
    for e in eqs {
        avg += pinv(&e.h) * &e.h;
    }
    avg /= eqs.len() as f64;
    let avg = (&avg + avg.transpose()) * 0.5;
    Ok(sym_eig_desc(&avg)?[rank - 1])
}

/// `f_AB = Iₙ ⊗ AᵀA + (Σᵢ BᵢBᵢᵀ) ⊗ Iₙ + B ⊗ A + (B ⊗ A)ᵀ`, which equals
/// `HᵀH` for the vectorized operator.
pub fn f_ab(p: &SylvesterProblem) -> Matrix {
    let (a, b) = (p.a(), p.b());
    let (n, m) = (p.n(), p.m());
    let ba = kron(b, a);
    kron(&Matrix::identity(m, m), &(a.transpose() * a))
        + kron(&(b * b.transpose()), &Matrix::identity(n, n))
        + &ba
        + ba.transpose()
}

/// `(λ_min(f/(Nλ*)), λ₁(f/(Nλ_*)))` where `f = Σᵢ HᵢᵀHᵢ`, `λ*` is the
/// largest and `λ_*` the smallest eigenvalue among the `HᵢHᵢᵀ`.
///
/// `None` when some `Hᵢ` lacks full row rank. For the column partition
/// `f` coincides with [`f_ab`].
pub fn r0_bounds(eqs: &[NodeEquation]) -> Result<Option<(f64, f64)>> {
    let d = common_dim(eqs)?;
    let mut lam_hi = f64::NEG_INFINITY;
    let mut lam_lo = f64::INFINITY;
    let mut f = Matrix::zeros(d, d);
    for e in eqs {
        if numerical_rank(&e.h, DEFAULT_RANK_TOL) != e.h.nrows() {
            return Ok(None);
        }
        let ev = sym_eig_desc(&(&e.h * e.h.transpose()))?;
        lam_hi = lam_hi.max(ev[0]);
        lam_lo = lam_lo.min(ev[ev.len() - 1]);
        f += e.h.transpose() * &e.h;
    }
    let nodes = eqs.len() as f64;
    let ev = sym_eig_desc(&((&f + f.transpose()) * 0.5))?;
    Ok(Some((ev[ev.len() - 1] / (nodes * lam_hi), ev[0] / (nodes * lam_lo))))
}

/// `min{1 + K_s, 1 + K λ₁(L)}`.
pub fn rs_upper_bound(k: f64, ks: f64, g: &NetworkGraph) -> f64 {
    (1.0 + ks).min(1.0 + k * g.largest_laplacian_eigenvalue())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusteringRate {
    pub k: f64,
    pub r_star: f64,
    pub rank_g: usize,
    pub rank_bound: usize,
    pub min_real: f64,
    pub max_real: f64,
    pub max_imag: f64,
    /// Set when some nonzero eigenvalue has `|Im λ| > 1e-6 |λ|`.
    pub warning: Option<String>,
}

/// `G = [[M̄ᵀM̄ + K(L_G ⊗ I), −M̄ᵀL̄], [−M̄, L̄]]`.
pub fn clustering_matrix(ops: &ClusterOperators, k: f64, outer: &NetworkGraph, inner: &[NetworkGraph]) -> Result<Matrix> {
    let n = ops.n();
    if outer.node_count() != n {
        return Err(Error::Dimension(format!("outer graph has {} nodes, expected {n}", outer.node_count())));
    }
    let m = ops.m_bar();
    let l = ops.l_bar(inner)?;
    let n3 = n * n * n;
    let mut g = Matrix::zeros(2 * n3, 2 * n3);
    let mt = m.transpose();
    g.view_mut((0, 0), (n3, n3))
        .copy_from(&(&mt * &m + kron(&outer.laplacian(), &Matrix::identity(n * n, n * n)) * k));
    g.view_mut((0, n3), (n3, n3)).copy_from(&-(&mt * &l));
    g.view_mut((n3, 0), (n3, n3)).copy_from(&-m);
    g.view_mut((n3, n3), (n3, n3)).copy_from(&l);
    Ok(g)
}

/// `r*(K) = λ_{rank G}(G)` with eigenvalues ordered by descending real part,
/// together with `rank(G)` and the bound `2n³ − n² − dim(∩ ker Mᵢ)`.
pub fn clustering_rate(ops: &ClusterOperators, k: f64, outer: &NetworkGraph, inner: &[NetworkGraph]) -> Result<ClusteringRate> {
    let g = clustering_matrix(ops, k, outer, inner)?;
    let n = ops.n();
    let rank_g = numerical_rank(&g, DEFAULT_RANK_TOL);
    if rank_g == 0 {
        return Err(Error::Degenerate("G is zero".into()));
    }
    let ev = general_eigenvalues(&g)?;
    let worst = ev
        .iter()
        .take(rank_g)
        .filter(|z| z.im.abs() > 1e-6 * z.norm())
        .max_by(|a, b| a.im.abs().total_cmp(&b.im.abs()));
    let warning = worst.map(|z| {
        format!("G has a complex eigenvalue {:.3e}{:+.3e}i; the rate may be poorly conditioned", z.re, z.im)
    });
    Ok(ClusteringRate {
        k,
        r_star: ev[rank_g - 1].re,
        rank_g,
        rank_bound: 2 * n * n * n - n * n - ops.kernel_intersection_dim(),
        min_real: ev.iter().map(|z| z.re).fold(f64::INFINITY, f64::min),
        max_real: ev[0].re,
        max_imag: ev.iter().map(|z| z.im.abs()).fold(0.0, f64::max),
        warning,
    })
}

/// Checks `rank(J_L) = N·d − d + rank(H)`. `None` when `rank(H) = 0`.
///
/// The identity is stated for `n` nodes of dimension `n²`; the `N`, `d` form
/// is its extension to other plain partitions.
pub fn rank_identity_check(eqs: &[NodeEquation], lap: &Matrix, k: f64) -> Result<Option<bool>> {
    let d = common_dim(eqs)?;
    let rank_h = stacked_rank(eqs)?;
    if rank_h == 0 {
        return Ok(None);
    }
    let rank_jl = numerical_rank(&jl_matrix(eqs, lap, k)?, DEFAULT_RANK_TOL);
    Ok(Some(rank_jl == eqs.len() * d - d + rank_h))
}

/// Fit `log e(t) ≈ α − 2 r t` and return `r`.
///
/// Samples with `e < 1e-20` are dropped first; the fit then uses the last
/// `tail_fraction` of the remaining samples.
pub fn measured_rate_from(times: &[f64], errors: &[f64], tail_fraction: f64) -> Result<f64> {
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(Error::Contract(format!("tail_fraction must lie in (0, 1], got {tail_fraction}")));
    }
    if times.len() != errors.len() {
        return Err(Error::Dimension(format!("{} times for {} errors", times.len(), errors.len())));
    }
    let usable: Vec<(f64, f64)> = times
        .iter()
        .zip(errors)
        .filter(|(_, &e)| e.is_finite() && e >= ERROR_FLOOR)
        .map(|(&t, &e)| (t, e.ln()))
        .collect();
    let take = ((usable.len() as f64) * tail_fraction).ceil() as usize;
    if take < MIN_FIT_SAMPLES {
        return Err(Error::FloorReached);
    }
    let window = &usable[usable.len() - take..];
    let count = window.len() as f64;
    let t_mean = window.iter().map(|p| p.0).sum::<f64>() / count;
    let y_mean = window.iter().map(|p| p.1).sum::<f64>() / count;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(t, y) in window {
        sxy += (t - t_mean) * (y - y_mean);
        sxx += (t - t_mean) * (t - t_mean);
    }
    if sxx == 0.0 {
        return Err(Error::FloorReached);
    }
    Ok(-(sxy / sxx) / 2.0)
}

pub fn measured_rate(traj: &Trajectory, tail_fraction: f64) -> Result<f64> {
    measured_rate_from(&traj.times(), &traj.errors(), tail_fraction)
}

/// Theory for one `K` on a plain partition, optionally with a measured rate.
pub fn rate_report(eqs: &[NodeEquation], lap: &Matrix, k: f64, traj: Option<&Trajectory>) -> Result<RateReport> {
    let (r_theory, rank_jl) = r_of_k(eqs, lap, k)?;
    Ok(RateReport {
        k,
        r_theory,
        r_limit_r0: r0_limit(eqs)?,
        r_measured: traj.and_then(|t| measured_rate(t, DEFAULT_TAIL_FRACTION).ok()),
        bounds: r0_bounds(eqs)?,
        rank_h: stacked_rank(eqs)?,
        rank_jl,
    })
}
