//! Network flows as ODE right-hand sides, and a fixed-step RK4 driver.
//!
//! A [`FlowState`] keeps one column per node (`d × N`), so node `i` is
//! `nodes.column(i)` and the column-major storage is exactly the stacked
//! vector `col{x₁, …, x_N}`. The clustering flow carries its auxiliary
//! `z` variables in `aux` with the same layout.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::densela::{kron, pinv, Matrix, Vector};
use crate::error::{Error, Result};
use crate::partition::{ClusterOperators, NodeEquation, StateLayout};

/// States with a larger Euclidean norm are treated as diverged.
pub const DIVERGENCE_NORM: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowKind {
    /// Consensus + projection.
    Cp,
    /// Consensus + projection + symmetrization.
    Cps,
    /// Least-squares flow.
    Ls,
    /// Consensus + projection on the augmented `(X, Z)` unknown.
    Augmented,
    /// Local conservation + global consensus over a double-layer network.
    Clustering,
}

impl FlowKind {
    pub const ALL: [FlowKind; 5] = [Self::Cp, Self::Cps, Self::Ls, Self::Augmented, Self::Clustering];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Cp => "cp",
            Self::Cps => "cps",
            Self::Ls => "ls",
            Self::Augmented => "augmented",
            Self::Clustering => "clustering",
        }
    }
}

impl fmt::Display for FlowKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FlowKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown flow \"{s}\"")))
    }
}

/// Projection onto `E = {y : H y = c}`: `y ↦ (I − H†H) y + H†c`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineProjector {
    h: Matrix,
    h_pinv: Matrix,
    c: Vector,
    gram: Matrix,
    offset: Vector,
}

impl AffineProjector {
    pub fn new(h: &Matrix, c: &Vector) -> Result<Self> {
        if h.nrows() != c.len() {
            return Err(Error::Dimension(format!(
                "H has {} rows but c has length {}",
                h.nrows(),
                c.len()
            )));
        }
        let h_pinv = pinv(h);
        let gram = &h_pinv * h;
        let offset = &h_pinv * c;
        Ok(Self { h: h.clone(), h_pinv, c: c.clone(), gram, offset })
    }

    pub fn from_equation(eq: &NodeEquation) -> Self {
        Self::new(&eq.h, &eq.c).expect("node equations are shape-checked")
    }

    pub fn dim(&self) -> usize {
        self.gram.nrows()
    }

    /// `I − H†H`.
    pub fn linear_part(&self) -> Matrix {
        Matrix::identity(self.dim(), self.dim()) - &self.gram
    }

    /// `H†H`.
    pub fn gram(&self) -> &Matrix {
        &self.gram
    }

    /// `H†c`.
    pub fn offset(&self) -> &Vector {
        &self.offset
    }

    pub fn project(&self, x: &Vector) -> Vector {
        x - &self.gram * x + &self.offset
    }

    /// `out += proj(x) − x = H†(c − Hx)`, using whichever factorization is
    /// cheaper for the shape of `H`.
    fn add_correction<S1, S2>(&self, x: &nalgebra::Matrix<f64, nalgebra::Dyn, nalgebra::U1, S1>, out: &mut nalgebra::Matrix<f64, nalgebra::Dyn, nalgebra::U1, S2>)
    where
        S1: nalgebra::Storage<f64, nalgebra::Dyn, nalgebra::U1>,
        S2: nalgebra::StorageMut<f64, nalgebra::Dyn, nalgebra::U1>,
    {
        if 2 * self.h.nrows() < self.dim() {
            let mut r = self.c.clone();
            r.gemv(-1.0, &self.h, x, 1.0);
            out.gemv(1.0, &self.h_pinv, &r, 1.0);
        } else {
            *out += &self.offset;
            out.gemv(-1.0, &self.gram, x, 1.0);
        }
    }
}

/// Node states at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub t: f64,
    /// `d × N`, one column per node.
    pub nodes: Matrix,
    /// Auxiliary variables, same layout as `nodes`.
    pub aux: Option<Matrix>,
}

impl FlowState {
    pub fn new(t: f64, nodes: Matrix, aux: Option<Matrix>) -> Result<Self> {
        if let Some(z) = &aux {
            if z.ncols() != nodes.ncols() {
                return Err(Error::Dimension(format!(
                    "aux has {} nodes, state has {}",
                    z.ncols(),
                    nodes.ncols()
                )));
            }
        }
        Ok(Self { t, nodes, aux })
    }

    pub fn zeros(dim: usize, nodes: usize, aux_dim: Option<usize>) -> Self {
        Self { t: 0.0, nodes: Matrix::zeros(dim, nodes), aux: aux_dim.map(|a| Matrix::zeros(a, nodes)) }
    }

    /// Every node starts from the same vector.
    pub fn replicated(x: &Vector, nodes: usize) -> Self {
        Self { t: 0.0, nodes: Matrix::from_fn(x.len(), nodes, |r, _| x[r]), aux: None }
    }

    /// Entries drawn uniformly from `[−1, 1]`; the auxiliary block stays zero.
    pub fn random(dim: usize, nodes: usize, aux_dim: Option<usize>, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = Self::zeros(dim, nodes, aux_dim);
        for v in s.nodes.iter_mut() {
            *v = rng.random_range(-1.0..=1.0);
        }
        s
    }

    pub fn node_count(&self) -> usize {
        self.nodes.ncols()
    }

    pub fn dim(&self) -> usize {
        self.nodes.nrows()
    }

    pub fn node(&self, i: usize) -> Vector {
        self.nodes.column(i).into_owned()
    }

    pub fn norm(&self) -> f64 {
        let z = self.aux.as_ref().map_or(0.0, |z| z.norm_squared());
        (self.nodes.norm_squared() + z).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.nodes.iter().all(|v| v.is_finite())
            && self.aux.as_ref().is_none_or(|z| z.iter().all(|v| v.is_finite()))
    }

    fn shaped_like(&self) -> Self {
        Self {
            t: self.t,
            nodes: Matrix::zeros(self.nodes.nrows(), self.nodes.ncols()),
            aux: self.aux.as_ref().map(|z| Matrix::zeros(z.nrows(), z.ncols())),
        }
    }

    /// `self = base + h · k` on nodes and aux.
    fn set_axpy(&mut self, base: &Self, h: f64, k: &Self) {
        self.nodes.copy_from(&base.nodes);
        add_scaled(&mut self.nodes, h, &k.nodes);
        if let (Some(z), Some(bz), Some(kz)) = (self.aux.as_mut(), base.aux.as_ref(), k.aux.as_ref()) {
            z.copy_from(bz);
            add_scaled(z, h, kz);
        }
    }

    fn axpy(&mut self, h: f64, k: &Self) {
        add_scaled(&mut self.nodes, h, &k.nodes);
        if let (Some(z), Some(kz)) = (self.aux.as_mut(), k.aux.as_ref()) {
            add_scaled(z, h, kz);
        }
    }
}

fn add_scaled(y: &mut Matrix, h: f64, x: &Matrix) {
    y.zip_apply(x, |a, b| *a += h * b);
}

/// `max_{i,j} ‖xᵢ − xⱼ‖` over the leading `x_len` entries of each node.
pub fn consensus_residual(s: &FlowState, x_len: usize) -> f64 {
    let x = s.nodes.rows(0, x_len.min(s.dim()));
    let n = x.ncols();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            worst = worst.max((x.column(i) - x.column(j)).norm());
        }
    }
    worst
}

/// Nonzero Laplacian entries, used for `−K (L ⊗ I) x` without forming the
/// Kronecker product.
#[derive(Debug, Clone, PartialEq)]
struct Coupling {
    entries: Vec<(usize, usize, f64)>,
}

impl Coupling {
    fn from_laplacian(l: &Matrix) -> Self {
        let mut entries = Vec::new();
        for j in 0..l.ncols() {
            for i in 0..l.nrows() {
                if l[(i, j)] != 0.0 {
                    entries.push((i, j, l[(i, j)]));
                }
            }
        }
        Self { entries }
    }

    /// `out.col(i) −= k Σⱼ L_ij x.col(j)`.
    fn apply(&self, k: f64, x: &Matrix, out: &mut Matrix) {
        for &(i, j, w) in &self.entries {
            out.column_mut(i).axpy(-k * w, &x.column(j), 1.0);
        }
    }
}

fn check_nodes(s: &FlowState, nodes: usize, dim: usize) -> Result<()> {
    if s.node_count() != nodes || s.dim() != dim {
        return Err(Error::Dimension(format!(
            "state is {}x{}, flow expects {dim} entries on {nodes} nodes",
            s.dim(),
            s.node_count()
        )));
    }
    Ok(())
}

fn check_laplacian(lap: &Matrix, nodes: usize) -> Result<()> {
    if lap.shape() != (nodes, nodes) {
        return Err(Error::Dimension(format!(
            "Laplacian is {}x{} for {nodes} nodes",
            lap.nrows(),
            lap.ncols()
        )));
    }
    Ok(())
}

/// A network flow `ẏ = f(y)`. The `t` of `out` is left untouched.
pub trait NetworkFlow: Send + Sync {
    fn node_count(&self) -> usize;
    fn dim(&self) -> usize;
    fn aux_dim(&self) -> Option<usize> {
        None
    }
    fn derivative_into(&self, s: &FlowState, out: &mut FlowState) -> Result<()>;

    fn derivative(&self, s: &FlowState) -> Result<FlowState> {
        let mut out = s.shaped_like();
        self.derivative_into(s, &mut out)?;
        Ok(out)
    }
}

/// `ẋᵢ = K Σ_{j∈Nᵢ}(xⱼ − xᵢ) + 𝒫ᵢ(xᵢ) − xᵢ`.
#[derive(Debug, Clone)]
pub struct ConsensusProjection {
    k: f64,
    coupling: Coupling,
    projectors: Vec<AffineProjector>,
}

impl ConsensusProjection {
    pub fn new(k: f64, lap: &Matrix, projectors: Vec<AffineProjector>) -> Result<Self> {
        check_laplacian(lap, projectors.len())?;
        let d = projectors.first().map_or(0, AffineProjector::dim);
        if projectors.iter().any(|p| p.dim() != d) {
            return Err(Error::Dimension("projectors act on different dimensions".into()));
        }
        Ok(Self { k, coupling: Coupling::from_laplacian(lap), projectors })
    }

    pub fn from_equations(k: f64, lap: &Matrix, eqs: &[NodeEquation]) -> Result<Self> {
        Self::new(k, lap, eqs.iter().map(AffineProjector::from_equation).collect())
    }

    pub fn projectors(&self) -> &[AffineProjector] {
        &self.projectors
    }
}

impl NetworkFlow for ConsensusProjection {
    fn node_count(&self) -> usize {
        self.projectors.len()
    }

    fn dim(&self) -> usize {
        self.projectors.first().map_or(0, AffineProjector::dim)
    }

    fn derivative_into(&self, s: &FlowState, out: &mut FlowState) -> Result<()> {
        check_nodes(s, self.node_count(), self.dim())?;
        out.nodes.fill(0.0);
        self.coupling.apply(self.k, &s.nodes, &mut out.nodes);
        for (i, p) in self.projectors.iter().enumerate() {
            p.add_correction(&s.nodes.column(i), &mut out.nodes.column_mut(i));
        }
        Ok(())
    }
}

/// Consensus + projection plus `K_s (𝒫_S(xᵢ) − xᵢ)` with
/// `𝒫_S(y) = (y + P y)/2`, `P` the symmetrizer permutation.
#[derive(Debug, Clone)]
pub struct Symmetrized {
    base: ConsensusProjection,
    ks: f64,
    /// `(P y)[k] = y[perm[k]]`.
    perm: Vec<usize>,
}

impl Symmetrized {
    pub fn new(base: ConsensusProjection, ks: f64) -> Result<Self> {
        let d = base.dim();
        let n = square_side(d)?;
        let perm = (0..d).map(|k| (k % n) * n + k / n).collect();
        Ok(Self { base, ks, perm })
    }
}

fn square_side(d: usize) -> Result<usize> {
    let n = (d as f64).sqrt().round() as usize;
    if n * n != d {
        return Err(Error::Dimension(format!(
            "symmetrization needs square states, got dimension {d}"
        )));
    }
    Ok(n)
}

impl NetworkFlow for Symmetrized {
    fn node_count(&self) -> usize {
        self.base.node_count()
    }

    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn derivative_into(&self, s: &FlowState, out: &mut FlowState) -> Result<()> {
        self.base.derivative_into(s, out)?;
        let half = 0.5 * self.ks;
        for i in 0..s.node_count() {
            let x = s.nodes.column(i);
            let mut o = out.nodes.column_mut(i);
            for (k, &pk) in self.perm.iter().enumerate() {
                o[k] += half * (x[pk] - x[k]);
            }
        }
        Ok(())
    }
}

/// `ẋᵢ = K Σ_{j∈Nᵢ}(xⱼ − xᵢ) − Hᵢ†(Hᵢxᵢ − cᵢ)`.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    k: f64,
    coupling: Coupling,
    h: Vec<Matrix>,
    h_pinv: Vec<Matrix>,
    c: Vec<Vector>,
}

impl LeastSquares {
    pub fn new(k: f64, lap: &Matrix, eqs: &[NodeEquation]) -> Result<Self> {
        check_laplacian(lap, eqs.len())?;
        Ok(Self {
            k,
            coupling: Coupling::from_laplacian(lap),
            h: eqs.iter().map(|e| e.h.clone()).collect(),
            h_pinv: eqs.iter().map(|e| pinv(&e.h)).collect(),
            c: eqs.iter().map(|e| e.c.clone()).collect(),
        })
    }
}

impl NetworkFlow for LeastSquares {
    fn node_count(&self) -> usize {
        self.h.len()
    }

    fn dim(&self) -> usize {
        self.h.first().map_or(0, Matrix::ncols)
    }

    fn derivative_into(&self, s: &FlowState, out: &mut FlowState) -> Result<()> {
        check_nodes(s, self.node_count(), self.dim())?;
        out.nodes.fill(0.0);
        self.coupling.apply(self.k, &s.nodes, &mut out.nodes);
        for i in 0..self.h.len() {
            let mut r = -&self.c[i];
            r.gemv(1.0, &self.h[i], &s.nodes.column(i), 1.0);
            out.nodes.column_mut(i).gemv(-1.0, &self.h_pinv[i], &r, 1.0);
        }
        Ok(())
    }
}

/// Local conservation + global consensus. Cluster `i`, node `j` holds
/// `x_{i_j}, z_{i_j} ∈ ℝⁿ` and evolves by
///
/// ```text
/// r      = T_ij x_ij − C_ji e_j − Σ_{k∈N_ij} (z_ij − z_ik)
/// ẋ_ij  = −T_ijᵀ r − K Σ_{k∈N_i} (x_ij − x_kj)
/// ż_ij  = r
/// ```
///
/// with `T_ij = 1_{j=i} A + B_ji I`.
#[derive(Debug, Clone)]
pub struct Clustering {
    k: f64,
    n: usize,
    a: Matrix,
    b: Matrix,
    c: Matrix,
    outer: Coupling,
    inner: Vec<Coupling>,
}

impl Clustering {
    pub fn new(k: f64, ops: &ClusterOperators, outer_lap: &Matrix, inner_laps: &[Matrix]) -> Result<Self> {
        let n = ops.n();
        check_laplacian(outer_lap, n)?;
        if inner_laps.len() != n {
            return Err(Error::Dimension(format!("{} inner Laplacians for {n} clusters", inner_laps.len())));
        }
        for l in inner_laps {
            check_laplacian(l, n)?;
        }
        let p = ops.problem();
        Ok(Self {
            k,
            n,
            a: p.a().clone(),
            b: p.b().clone(),
            c: p.c().clone(),
            outer: Coupling::from_laplacian(outer_lap),
            inner: inner_laps.iter().map(Coupling::from_laplacian).collect(),
        })
    }
}

impl NetworkFlow for Clustering {
    fn node_count(&self) -> usize {
        self.n
    }

    fn dim(&self) -> usize {
        self.n * self.n
    }

    fn aux_dim(&self) -> Option<usize> {
        Some(self.n * self.n)
    }

    fn derivative_into(&self, s: &FlowState, out: &mut FlowState) -> Result<()> {
        let n = self.n;
        check_nodes(s, n, n * n)?;
        let (Some(z), Some(dz)) = (s.aux.as_ref(), out.aux.as_mut()) else {
            return Err(Error::Contract("the clustering flow needs auxiliary z states".into()));
        };
        let x = s.nodes.as_slice();
        let z = z.as_slice();
        let dx = out.nodes.as_mut_slice();
        let dz = dz.as_mut_slice();
        let a = self.a.as_slice();
        let n2 = n * n;

        // ż = residual; −K (L_G ⊗ I) x accumulates into dx.
        dx.fill(0.0);
        dz.fill(0.0);
        for (i, inner) in self.inner.iter().enumerate() {
            let base = i * n2;
            for j in 0..n {
                let off = base + j * n;
                let bji = self.b[(j, i)];
                for r in 0..n {
                    dz[off + r] = bji * x[off + r];
                }
                if i == j {
                    for col in 0..n {
                        let xc = x[off + col];
                        for r in 0..n {
                            dz[off + r] += a[col * n + r] * xc;
                        }
                    }
                }
                dz[off + j] -= self.c[(j, i)];
            }
            for &(j, k, w) in &inner.entries {
                let (oj, ok) = (base + j * n, base + k * n);
                for r in 0..n {
                    dz[oj + r] -= w * z[ok + r];
                }
            }
            for j in 0..n {
                let off = base + j * n;
                let bji = self.b[(j, i)];
                for r in 0..n {
                    dx[off + r] = -bji * dz[off + r];
                }
                if i == j {
                    for r in 0..n {
                        let mut acc = 0.0;
                        for col in 0..n {
                            acc += a[r * n + col] * dz[off + col];
                        }
                        dx[off + r] -= acc;
                    }
                }
            }
        }
        for &(i, k, w) in &self.outer.entries {
            let scale = -self.k * w;
            let (oi, ok) = (i * n2, k * n2);
            for r in 0..n2 {
                dx[oi + r] += scale * x[ok + r];
            }
        }
        Ok(())
    }
}

/// `ẋ = M x + b` on a single node.
#[derive(Debug, Clone)]
pub struct LinearFlow {
    pub m: Matrix,
    pub b: Vector,
}

impl NetworkFlow for LinearFlow {
    fn node_count(&self) -> usize {
        1
    }

    fn dim(&self) -> usize {
        self.b.len()
    }

    fn derivative_into(&self, s: &FlowState, out: &mut FlowState) -> Result<()> {
        check_nodes(s, 1, self.dim())?;
        let mut col = out.nodes.column_mut(0);
        col.copy_from(&self.b);
        col.gemv(1.0, &self.m, &s.nodes.column(0), 1.0);
        Ok(())
    }
}

/// Node-wise consensus + projection derivative.
pub fn cp_rhs(s: &FlowState, k: f64, lap: &Matrix, projs: &[AffineProjector]) -> Result<FlowState> {
    ConsensusProjection::new(k, lap, projs.to_vec())?.derivative(s)
}

/// The same derivative from the stacked form `−(K L ⊗ I_d + J) x + Q_C`.
pub fn cp_rhs_compact(s: &FlowState, k: f64, lap: &Matrix, projs: &[AffineProjector]) -> Result<FlowState> {
    check_laplacian(lap, projs.len())?;
    let d = projs.first().map_or(0, AffineProjector::dim);
    check_nodes(s, projs.len(), d)?;
    let grams: Vec<Matrix> = projs.iter().map(|p| p.gram().clone()).collect();
    let j = crate::densela::block_diag(&grams);
    let jl = kron(lap, &Matrix::identity(d, d)) * k + j;
    let q: Vec<&Vector> = projs.iter().map(AffineProjector::offset).collect();
    let q = crate::densela::vconcat(&q);
    let x = Vector::from_column_slice(s.nodes.as_slice());
    let dx = -(jl * x) + q;
    FlowState::new(s.t, Matrix::from_column_slice(d, projs.len(), dx.as_slice()), None)
}

/// Symmetrization flow derivative using an explicit symmetrizer matrix.
pub fn cps_rhs(
    s: &FlowState,
    k: f64,
    ks: f64,
    lap: &Matrix,
    projs: &[AffineProjector],
    p_sym: &Matrix,
) -> Result<FlowState> {
    let d = s.dim();
    square_side(d)?;
    if p_sym.shape() != (d, d) {
        return Err(Error::Dimension(format!("symmetrizer is {:?}, states have dimension {d}", p_sym.shape())));
    }
    let mut out = cp_rhs(s, k, lap, projs)?;
    for i in 0..s.node_count() {
        let x = s.nodes.column(i);
        let sym = (x + p_sym * x) * 0.5;
        out.nodes.column_mut(i).axpy(ks, &(sym - x), 1.0);
    }
    Ok(out)
}

pub fn ls_rhs(s: &FlowState, k: f64, lap: &Matrix, eqs: &[NodeEquation]) -> Result<FlowState> {
    LeastSquares::new(k, lap, eqs)?.derivative(s)
}

/// Node-wise clustering derivative.
pub fn clustering_rhs(
    s: &FlowState,
    k: f64,
    outer_lap: &Matrix,
    inner_laps: &[Matrix],
    ops: &ClusterOperators,
) -> Result<FlowState> {
    Clustering::new(k, ops, outer_lap, inner_laps)?.derivative(s)
}

/// Clustering derivative from the stacked form
/// `ẋ = −M̄ᵀ(M̄x − C̄ − L̄z) − K(L_G ⊗ I)x`, `ż = M̄x − C̄ − L̄z`.
pub fn clustering_rhs_stacked(
    s: &FlowState,
    k: f64,
    outer_lap: &Matrix,
    inner_laps: &[Matrix],
    ops: &ClusterOperators,
) -> Result<FlowState> {
    let n = ops.n();
    check_nodes(s, n, n * n)?;
    let z = s.aux.as_ref().ok_or_else(|| Error::Contract("the clustering flow needs auxiliary z states".into()))?;
    let m_bar = ops.m_bar();
    let eye = Matrix::identity(n, n);
    let l_bar = crate::densela::block_diag(&inner_laps.iter().map(|l| kron(l, &eye)).collect::<Vec<_>>());
    let x = Vector::from_column_slice(s.nodes.as_slice());
    let zv = Vector::from_column_slice(z.as_slice());
    let r = &m_bar * &x - ops.c_bar() - &l_bar * &zv;
    let dx = -(m_bar.transpose() * &r) - kron(outer_lap, &Matrix::identity(n * n, n * n)) * &x * k;
    FlowState::new(
        s.t,
        Matrix::from_column_slice(n * n, n, dx.as_slice()),
        Some(Matrix::from_column_slice(n * n, n, r.as_slice())),
    )
}

struct Rk4Workspace {
    k1: FlowState,
    k2: FlowState,
    k3: FlowState,
    k4: FlowState,
    tmp: FlowState,
}

impl Rk4Workspace {
    fn new(s: &FlowState) -> Self {
        Self {
            k1: s.shaped_like(),
            k2: s.shaped_like(),
            k3: s.shaped_like(),
            k4: s.shaped_like(),
            tmp: s.shaped_like(),
        }
    }
}

fn finite_or_err(k: &FlowState, t: f64, stage: usize) -> Result<()> {
    if k.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite { t, detail: format!("RK4 stage {stage} produced NaN or infinity") })
    }
}

fn rk4_in_place(flow: &dyn NetworkFlow, s: &mut FlowState, dt: f64, ws: &mut Rk4Workspace) -> Result<()> {
    let t = s.t;
    flow.derivative_into(s, &mut ws.k1)?;
    finite_or_err(&ws.k1, t, 1)?;
    ws.tmp.set_axpy(s, 0.5 * dt, &ws.k1);
    flow.derivative_into(&ws.tmp, &mut ws.k2)?;
    finite_or_err(&ws.k2, t, 2)?;
    ws.tmp.set_axpy(s, 0.5 * dt, &ws.k2);
    flow.derivative_into(&ws.tmp, &mut ws.k3)?;
    finite_or_err(&ws.k3, t, 3)?;
    ws.tmp.set_axpy(s, dt, &ws.k3);
    flow.derivative_into(&ws.tmp, &mut ws.k4)?;
    finite_or_err(&ws.k4, t, 4)?;
    s.axpy(dt / 6.0, &ws.k1);
    s.axpy(dt / 3.0, &ws.k2);
    s.axpy(dt / 3.0, &ws.k3);
    s.axpy(dt / 6.0, &ws.k4);
    s.t = t + dt;
    Ok(())
}

/// One classical Runge–Kutta step.
pub fn rk4_step(flow: &dyn NetworkFlow, s: &FlowState, dt: f64) -> Result<FlowState> {
    if !(dt > 0.0) {
        return Err(Error::Contract(format!("dt must be positive, got {dt}")));
    }
    let mut next = s.clone();
    let mut ws = Rk4Workspace::new(s);
    rk4_in_place(flow, &mut next, dt, &mut ws)?;
    Ok(next)
}

/// `min(0.01, 0.5 / (K λ₁(L) + 2 + K_s))`.
pub fn default_dt(k: f64, lambda_max: f64, ks: f64) -> f64 {
    0.01_f64.min(0.5 / (k * lambda_max + 2.0 + ks))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integration {
    pub dt: f64,
    pub t_end: f64,
    pub sample_stride: usize,
}

impl Integration {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::Config(format!("t_end must be positive, got {}", self.t_end)));
        }
        if self.sample_stride == 0 {
            return Err(Error::Config("sample_stride must be at least 1".into()));
        }
        Ok(())
    }

    /// Number of RK4 steps; the last one is shortened to land on `t_end`.
    pub fn step_count(&self) -> usize {
        let q = self.t_end / self.dt;
        let r = q.round();
        if (q - r).abs() <= 1e-9 * q.max(1.0) {
            (r as usize).max(1)
        } else {
            q.ceil() as usize
        }
    }

    /// Whether `t_end` is reached exactly by whole steps of `dt`.
    fn lands_exactly(&self) -> bool {
        let q = self.t_end / self.dt;
        (q - q.round()).abs() <= 1e-9 * q.max(1.0)
    }

    /// Steps taken at the full `dt`.
    fn full_steps(&self) -> usize {
        let steps = self.step_count();
        if self.lands_exactly() {
            steps
        } else {
            steps - 1
        }
    }

    /// Rows a trajectory sampled with these settings contains:
    /// `floor(t_end / (dt · stride)) + 2`.
    pub fn expected_samples(&self) -> usize {
        self.full_steps() / self.sample_stride + 2
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    /// `Σᵢ ‖Xᵢ(t) − X_ref‖_F²`.
    pub e_total: f64,
    pub consensus_residual: f64,
    pub e_nodes: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub final_state: FlowState,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn errors(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.e_total).collect()
    }

    pub fn initial_error(&self) -> f64 {
        self.samples.first().map_or(f64::NAN, |s| s.e_total)
    }

    pub fn final_error(&self) -> f64 {
        self.samples.last().map_or(f64::NAN, |s| s.e_total)
    }

    /// The error sample closest to time `t`.
    pub fn error_at(&self, t: f64) -> Option<f64> {
        self.samples
            .iter()
            .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
            .map(|s| s.e_total)
    }
}

/// Per-node squared distances of the `X` blocks to `reference`.
pub fn node_errors(s: &FlowState, layout: &StateLayout, reference: &Vector) -> Vec<f64> {
    let len = layout.x_len();
    (0..s.node_count())
        .map(|i| (s.nodes.column(i).rows(0, len) - reference.rows(0, len)).norm_squared())
        .collect()
}

fn sample(s: &FlowState, layout: &StateLayout, reference: &Vector) -> Sample {
    let e_nodes = node_errors(s, layout, reference);
    Sample {
        t: s.t,
        e_total: e_nodes.iter().sum(),
        consensus_residual: consensus_residual(s, layout.x_len()),
        e_nodes,
    }
}

/// Integrate `flow` from `init` and sample the error against `reference`.
///
/// `reference` is the target `X`; node states are compared through
/// `layout`, so transposed and augmented encodings are handled. Samples are
/// taken at step 0, every `sample_stride` full steps, and at `t_end`. The
/// final row is always written, so when `t_end` falls on a stride sample
/// that row appears twice.
pub fn simulate(
    flow: &dyn NetworkFlow,
    layout: &StateLayout,
    init: FlowState,
    reference: &Matrix,
    integ: &Integration,
) -> Result<Trajectory> {
    integ.validate()?;
    check_nodes(&init, flow.node_count(), flow.dim())?;
    if init.dim() != layout.dim() {
        return Err(Error::Dimension(format!(
            "state dimension {} does not match layout dimension {}",
            init.dim(),
            layout.dim()
        )));
    }
    if flow.aux_dim().is_some() != init.aux.is_some() {
        return Err(Error::Contract("auxiliary state presence does not match the flow".into()));
    }
    let reference = layout.from_x(reference)?;
    let steps = integ.step_count();
    let full_steps = integ.full_steps();
    let mut s = init;
    let mut ws = Rk4Workspace::new(&s);
    let mut samples = Vec::with_capacity(integ.expected_samples());
    samples.push(sample(&s, layout, &reference));

    for step in 1..=steps {
        let dt = if step == steps { integ.t_end - s.t } else { integ.dt };
        rk4_in_place(flow, &mut s, dt, &mut ws)?;
        if step == steps {
            s.t = integ.t_end;
        }
        let norm = s.norm();
        if norm > DIVERGENCE_NORM {
            return Err(Error::Diverged { t: s.t, norm, dt: integ.dt });
        }
        if step <= full_steps && step % integ.sample_stride == 0 {
            samples.push(sample(&s, layout, &reference));
        }
        if step == steps {
            samples.push(sample(&s, layout, &reference));
        }
    }
    Ok(Trajectory { samples, final_state: s })
}
