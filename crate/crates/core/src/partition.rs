//! Data partitions: how the triplet (A, B, C) is split across network nodes.
//!
//! Every plain scheme yields one affine equation `Hᵢ y = cᵢ` per node over a
//! shared unknown `y`. What `y` means is recorded in [`StateLayout`] so that
//! callers can map node states back to a matrix `X`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::densela::{kron, numerical_rank, pinv, unvec, vec, Matrix, Vector, DEFAULT_RANK_TOL};
use crate::error::{Error, Result};
use crate::netgraph::NetworkGraph;

/// Relative tolerance deciding between Case II and Case III.
pub const CONSISTENCY_TOL: f64 = 1e-8;

/// `A X + X B = C` with `A: n×n`, `B: m×m`, `C: n×m`.
#[derive(Debug, Clone, PartialEq)]
pub struct SylvesterProblem {
    a: Matrix,
    b: Matrix,
    c: Matrix,
}

impl SylvesterProblem {
    pub fn new(a: Matrix, b: Matrix, c: Matrix) -> Result<Self> {
        if !a.is_square() || !b.is_square() {
            return Err(Error::Dimension(format!(
                "A and B must be square, got {}x{} and {}x{}",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols()
            )));
        }
        if c.shape() != (a.nrows(), b.nrows()) {
            return Err(Error::Dimension(format!(
                "C must be {}x{}, got {}x{}",
                a.nrows(),
                b.nrows(),
                c.nrows(),
                c.ncols()
            )));
        }
        if a.is_empty() || b.is_empty() {
            return Err(Error::Dimension("empty matrices are not allowed".into()));
        }
        for (name, m) in [("A", &a), ("B", &b), ("C", &c)] {
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::Dimension(format!("{name} has non-finite entries")));
            }
        }
        Ok(Self { a, b, c })
    }

    /// The Lyapunov problem `A X + X Aᵀ = C`.
    pub fn lyapunov(a: Matrix, c: Matrix) -> Result<Self> {
        let b = a.transpose();
        Self::new(a, b, c)
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn c(&self) -> &Matrix {
        &self.c
    }

    /// Row count of `X`.
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// Column count of `X`.
    pub fn m(&self) -> usize {
        self.b.nrows()
    }

    pub fn is_square(&self) -> bool {
        self.n() == self.m()
    }

    /// `H = I_m ⊗ A + Bᵀ ⊗ I_n`.
    pub fn operator(&self) -> Matrix {
        kron(&Matrix::identity(self.m(), self.m()), &self.a)
            + kron(&self.b.transpose(), &Matrix::identity(self.n(), self.n()))
    }

    /// `vec(C)`.
    pub fn rhs(&self) -> Vector {
        vec(&self.c)
    }

    /// `A X + X B − C`.
    pub fn residual(&self, x: &Matrix) -> Matrix {
        &self.a * x + x * &self.b - &self.c
    }

    /// `(Bᵀ, Aᵀ, Cᵀ)`, solved by `Xᵀ`.
    pub fn transposed(&self) -> Self {
        Self { a: self.b.transpose(), b: self.a.transpose(), c: self.c.transpose() }
    }

    /// The coefficient block `1_{j=i} A + B_{ji} I` used by the clustering
    /// scheme and by column-wise partitions. Indices are 0-based.
    pub fn column_block(&self, i: usize, j: usize) -> Matrix {
        let n = self.n();
        let mut t = Matrix::identity(n, n) * self.b[(j, i)];
        if i == j {
            t += &self.a;
        }
        t
    }
}

/// Solvability of the vectorized equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolvabilityCase {
    /// Unique solution.
    I,
    /// Infinitely many solutions.
    II,
    /// No exact solution.
    III,
}

impl fmt::Display for SolvabilityCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::I => "I",
            Self::II => "II",
            Self::III => "III",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Consistency {
    pub case: SolvabilityCase,
    pub rank: usize,
    /// `‖H H† c − c‖`.
    pub residual: f64,
}

pub fn consistency_check(p: &SylvesterProblem) -> Consistency {
    let h = p.operator();
    let c = p.rhs();
    let rank = numerical_rank(&h, DEFAULT_RANK_TOL);
    let residual = (&h * (pinv(&h) * &c) - &c).norm();
    let case = if rank == h.ncols() {
        SolvabilityCase::I
    } else if residual <= CONSISTENCY_TOL * (1.0 + c.norm()) {
        SolvabilityCase::II
    } else {
        SolvabilityCase::III
    };
    Consistency { case, rank, residual }
}

/// One node's affine constraint `H y = c`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeEquation {
    /// 1-based.
    pub node_id: usize,
    pub h: Matrix,
    pub c: Vector,
}

impl NodeEquation {
    pub fn new(node_id: usize, h: Matrix, c: Vector) -> Result<Self> {
        if h.nrows() != c.len() {
            return Err(Error::Dimension(format!(
                "node {node_id}: H has {} rows but c has length {}",
                h.nrows(),
                c.len()
            )));
        }
        Ok(Self { node_id, h, c })
    }

    pub fn dim(&self) -> usize {
        self.h.ncols()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    BcColumn,
    AcRow,
    Grouped,
    HighRes,
    LyapunovSym,
    FullRowColumn,
    Clustering,
}

impl Scheme {
    pub const ALL: [Scheme; 7] = [
        Self::BcColumn,
        Self::AcRow,
        Self::Grouped,
        Self::HighRes,
        Self::LyapunovSym,
        Self::FullRowColumn,
        Self::Clustering,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::BcColumn => "bc-column",
            Self::AcRow => "ac-row",
            Self::Grouped => "grouped",
            Self::HighRes => "high-res",
            Self::LyapunovSym => "lyapunov-sym",
            Self::FullRowColumn => "full-row-column",
            Self::Clustering => "clustering",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Partition(format!("unknown partition \"{s}\"")))
    }
}

/// How a node state maps back to the unknown matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateLayout {
    /// `y = vec(X)` with `X: n×m`.
    Plain { n: usize, m: usize },
    /// `y = vec(Xᵀ)`.
    Transposed { n: usize, m: usize },
    /// `y = col{vec(X), vec(Z)}` with `X: n×n` and `z_len` auxiliary entries.
    Augmented { n: usize, z_len: usize },
}

impl StateLayout {
    pub fn dim(&self) -> usize {
        match *self {
            Self::Plain { n, m } | Self::Transposed { n, m } => n * m,
            Self::Augmented { n, z_len } => n * n + z_len,
        }
    }

    /// Length of the leading block that encodes `X`.
    pub fn x_len(&self) -> usize {
        match *self {
            Self::Plain { n, m } | Self::Transposed { n, m } => n * m,
            Self::Augmented { n, .. } => n * n,
        }
    }

    pub fn x_shape(&self) -> (usize, usize) {
        match *self {
            Self::Plain { n, m } | Self::Transposed { n, m } => (n, m),
            Self::Augmented { n, .. } => (n, n),
        }
    }

    pub fn to_x(&self, y: &Vector) -> Result<Matrix> {
        if y.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "state of length {} for layout of dimension {}",
                y.len(),
                self.dim()
            )));
        }
        match *self {
            Self::Plain { n, m } => unvec(y, n, m),
            Self::Transposed { n, m } => Ok(unvec(y, m, n)?.transpose()),
            Self::Augmented { n, .. } => unvec(&y.rows(0, n * n).into_owned(), n, n),
        }
    }

    /// Encode `X`; auxiliary entries are zero.
    pub fn from_x(&self, x: &Matrix) -> Result<Vector> {
        if x.shape() != self.x_shape() {
            return Err(Error::Dimension(format!(
                "expected a {:?} matrix, got {:?}",
                self.x_shape(),
                x.shape()
            )));
        }
        Ok(match *self {
            Self::Plain { .. } => vec(x),
            Self::Transposed { .. } => vec(&x.transpose()),
            Self::Augmented { n, z_len } => {
                let mut y = Vector::zeros(n * n + z_len);
                y.rows_mut(0, n * n).copy_from(&vec(x));
                y
            }
        })
    }

    /// The leading `X` block of a state.
    pub fn x_part<'a>(&self, y: &'a Vector) -> nalgebra::DVectorView<'a, f64> {
        y.rows(0, self.x_len())
    }
}

/// The node equations of a plain scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct NodePartition {
    pub scheme: Scheme,
    pub layout: StateLayout,
    pub equations: Vec<NodeEquation>,
}

impl NodePartition {
    fn new(scheme: Scheme, layout: StateLayout, equations: Vec<NodeEquation>) -> Self {
        debug_assert!(equations.iter().all(|e| e.dim() == layout.dim()));
        Self { scheme, layout, equations }
    }

    pub fn node_count(&self) -> usize {
        self.equations.len()
    }

    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    /// `col{H₁, …, H_N}`.
    pub fn stacked_operator(&self) -> Matrix {
        let rows = self.equations.iter().map(|e| e.h.nrows()).sum();
        let mut out = Matrix::zeros(rows, self.dim());
        let mut r = 0;
        for e in &self.equations {
            out.view_mut((r, 0), e.h.shape()).copy_from(&e.h);
            r += e.h.nrows();
        }
        out
    }

    /// `col{c₁, …, c_N}`.
    pub fn stacked_rhs(&self) -> Vector {
        let parts: Vec<&Vector> = self.equations.iter().map(|e| &e.c).collect();
        crate::densela::vconcat(&parts)
    }
}

/// Row block `i` (0-based) of `I_m ⊗ A + Bᵀ ⊗ I_n`: `eᵢᵀ ⊗ A + Bᵢᵀ ⊗ I_n`.
fn column_equation(p: &SylvesterProblem, i: usize) -> Matrix {
    let (n, m) = (p.n(), p.m());
    let mut h = Matrix::zeros(n, n * m);
    for j in 0..m {
        let mut block = h.view_mut((0, j * n), (n, n));
        let bji = p.b()[(j, i)];
        if bji != 0.0 {
            block.fill_diagonal(bji);
        }
        if j == i {
            block += p.a();
        }
    }
    h
}

/// Node `i` holds column `i` of B and C, plus A. One node per column of `X`.
pub fn bc_column_partition(p: &SylvesterProblem) -> NodePartition {
    let equations = (0..p.m())
        .map(|i| NodeEquation {
            node_id: i + 1,
            h: column_equation(p, i),
            c: p.c().column(i).into_owned(),
        })
        .collect();
    NodePartition::new(Scheme::BcColumn, StateLayout::Plain { n: p.n(), m: p.m() }, equations)
}

/// Node `i` holds row `i` of A and C, plus B. Works on the transposed problem,
/// so node states encode `vec(Xᵀ)`.
pub fn ac_row_partition(p: &SylvesterProblem) -> NodePartition {
    let mut part = bc_column_partition(&p.transposed());
    part.scheme = Scheme::AcRow;
    part.layout = StateLayout::Transposed { n: p.n(), m: p.m() };
    part
}

/// Column partition where node `i` holds every column listed in `groups[i]`
/// (1-based). Groups may overlap.
pub fn grouped_column_partition(p: &SylvesterProblem, groups: &[Vec<usize>]) -> Result<NodePartition> {
    let m = p.m();
    if groups.is_empty() {
        return Err(Error::Partition("at least one group is required".into()));
    }
    let mut covered = vec![false; m];
    for (g, cols) in groups.iter().enumerate() {
        if cols.is_empty() {
            return Err(Error::Partition(format!("group {} is empty", g + 1)));
        }
        for &k in cols {
            if k == 0 || k > m {
                return Err(Error::Partition(format!(
                    "group {} names column {k}, outside 1..={m}",
                    g + 1
                )));
            }
            covered[k - 1] = true;
        }
    }
    if let Some(k) = covered.iter().position(|c| !c) {
        return Err(Error::Partition(format!("column {} is not in any group", k + 1)));
    }

    let n = p.n();
    let equations = groups
        .iter()
        .enumerate()
        .map(|(g, cols)| {
            let mut h = Matrix::zeros(n * cols.len(), n * m);
            let mut c = Vector::zeros(n * cols.len());
            for (r, &k) in cols.iter().enumerate() {
                h.view_mut((r * n, 0), (n, n * m)).copy_from(&column_equation(p, k - 1));
                c.rows_mut(r * n, n).copy_from(&p.c().column(k - 1));
            }
            NodeEquation { node_id: g + 1, h, c }
        })
        .collect();
    Ok(NodePartition::new(Scheme::Grouped, StateLayout::Plain { n, m }, equations))
}

fn require_square(p: &SylvesterProblem, scheme: Scheme) -> Result<()> {
    if p.is_square() {
        Ok(())
    } else {
        Err(Error::Dimension(format!(
            "partition {scheme} needs a square problem, got {}x{}",
            p.n(),
            p.m()
        )))
    }
}

/// Single row of `H` for entry `(l, k)` of the equation, 0-based:
/// `e_kᵀ ⊗ (row l of A) + (column k of B)ᵀ ⊗ e_lᵀ`.
fn entry_row(p: &SylvesterProblem, k: usize, l: usize) -> Matrix {
    let n = p.n();
    let mut h = Matrix::zeros(1, n * n);
    for j in 0..n {
        h[(0, k * n + j)] += p.a()[(l, j)];
        h[(0, j * n + l)] += p.b()[(j, k)];
    }
    h
}

/// One node per entry of `C`. Node `(k, l)`, numbered `(k−1)n + l`, holds
/// column `k` of B, row `l` of A and the entry `C_{lk}`. Stacking the nodes
/// in order reproduces `H` row for row.
pub fn high_res_partition(p: &SylvesterProblem) -> Result<NodePartition> {
    require_square(p, Scheme::HighRes)?;
    let n = p.n();
    let mut equations = Vec::with_capacity(n * n);
    for k in 0..n {
        for l in 0..n {
            equations.push(NodeEquation {
                node_id: k * n + l + 1,
                h: entry_row(p, k, l),
                c: Vector::from_element(1, p.c()[(l, k)]),
            });
        }
    }
    Ok(NodePartition::new(Scheme::HighRes, StateLayout::Plain { n, m: n }, equations))
}

/// Node index `g(k, l) = (k−1)n + l − k(k−1)/2` for `1 ≤ k ≤ l ≤ n`.
pub fn lyapunov_node_index(n: usize, k: usize, l: usize) -> usize {
    (k - 1) * n + l - k * (k - 1) / 2
}

/// `n(n+1)/2` nodes for `A X + X Aᵀ = C` with symmetric `C`. Node `g(k, l)`
/// stacks the entry rows for `(l, k)` and `(k, l)`; diagonal nodes keep both
/// copies of their single row.
pub fn lyapunov_sym_partition(a: &Matrix, c: &Matrix) -> Result<NodePartition> {
    let asym = (c - c.transpose()).norm();
    if asym > CONSISTENCY_TOL * (1.0 + c.norm()) {
        return Err(Error::Contract(format!("C is not symmetric (‖C − Cᵀ‖_F = {asym:.3e})")));
    }
    let p = SylvesterProblem::lyapunov(a.clone(), c.clone())?;
    let n = p.n();
    let mut equations = Vec::with_capacity(n * (n + 1) / 2);
    for k in 0..n {
        for l in k..n {
            let mut h = Matrix::zeros(2, n * n);
            h.row_mut(0).copy_from(&entry_row(&p, k, l).row(0));
            h.row_mut(1).copy_from(&entry_row(&p, l, k).row(0));
            equations.push(NodeEquation {
                node_id: lyapunov_node_index(n, k + 1, l + 1),
                h,
                c: Vector::from_vec(vec![c[(l, k)], c[(k, l)]]),
            });
        }
    }
    Ok(NodePartition::new(Scheme::LyapunovSym, StateLayout::Plain { n, m: n }, equations))
}

/// Full row/column partition over `g` with `N` nodes, `N` dividing `n`.
///
/// Node `i` holds block row `i` of A and block column `i` of B and C, with
/// blocks of width `b = n/N` (`b = 1` when `N = n`). Its constraint on
/// `y = col{vec X, vec Z}`, `Z: Nn × n`, is
/// `Sᵢ A X + X B Sᵢ − (ℓᵢ ⊗ I_n) Z = C Sᵢ`
/// where `Sᵢ` selects block `i` and `ℓᵢ` is row `i` of the Laplacian. Summing
/// over nodes cancels `Z` and recovers `A X + X B = C`.
pub fn full_rowcol_partition(p: &SylvesterProblem, g: &NetworkGraph) -> Result<NodePartition> {
    require_square(p, Scheme::FullRowColumn)?;
    let n = p.n();
    let nodes = g.node_count();
    if !n.is_multiple_of(nodes) {
        return Err(Error::Dimension(format!(
            "{nodes} nodes cannot split {n} rows into equal blocks"
        )));
    }
    let bw = n / nodes;
    let lap = g.laplacian();
    let z_len = nodes * n * n;
    let eye_n = Matrix::identity(n, n);

    let equations = (0..nodes)
        .map(|i| {
            let mut sel = Matrix::zeros(n, n);
            for r in i * bw..(i + 1) * bw {
                sel[(r, r)] = 1.0;
            }
            let x_part = kron(&eye_n, &(&sel * p.a())) + kron(&(&sel * p.b().transpose()), &eye_n);
            let ell = Matrix::from_row_slice(1, nodes, lap.row(i).transpose().as_slice());
            let z_part = -kron(&eye_n, &kron(&ell, &eye_n));
            let mut h = Matrix::zeros(n * n, n * n + z_len);
            h.view_mut((0, 0), (n * n, n * n)).copy_from(&x_part);
            h.view_mut((0, n * n), (n * n, z_len)).copy_from(&z_part);
            NodeEquation { node_id: i + 1, h, c: vec(&(p.c() * &sel)) }
        })
        .collect();
    Ok(NodePartition::new(Scheme::FullRowColumn, StateLayout::Augmented { n, z_len }, equations))
}

/// Per-cluster operators of the clustering block partition.
///
/// Cluster `i` (0-based) has `n` nodes; node `j` holds `B_{ji}`, `C_{ji}`
/// and, when `j = i`, the matrix `A`. Cluster states stack the node states,
/// so a consensus value of `vec(X)` puts column `j` of `X` at node `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterOperators {
    problem: SylvesterProblem,
}

impl ClusterOperators {
    pub fn n(&self) -> usize {
        self.problem.n()
    }

    pub fn problem(&self) -> &SylvesterProblem {
        &self.problem
    }

    /// `1_{j=i} A + B_{ji} I_n`.
    pub fn block(&self, i: usize, j: usize) -> Matrix {
        self.problem.column_block(i, j)
    }

    /// `B_{ji}`.
    pub fn b_coeff(&self, i: usize, j: usize) -> f64 {
        self.problem.b()[(j, i)]
    }

    /// `Mᵢ = diag{1_{j=i} A + B_{ji} I_n : j = 1..n}`.
    pub fn m_i(&self, i: usize) -> Matrix {
        let blocks: Vec<Matrix> = (0..self.n()).map(|j| self.block(i, j)).collect();
        crate::densela::block_diag(&blocks)
    }

    /// `C̃ᵢ = col{C_{1i} e₁, …, C_{ni} eₙ}`.
    pub fn c_tilde(&self, i: usize) -> Vector {
        let n = self.n();
        let mut v = Vector::zeros(n * n);
        for j in 0..n {
            v[j * n + j] = self.problem.c()[(j, i)];
        }
        v
    }

    /// `M̄ = diag{M₁, …, Mₙ}`.
    pub fn m_bar(&self) -> Matrix {
        let blocks: Vec<Matrix> = (0..self.n()).map(|i| self.m_i(i)).collect();
        crate::densela::block_diag(&blocks)
    }

    /// `C̄ = col{C̃₁, …, C̃ₙ}`.
    pub fn c_bar(&self) -> Vector {
        let parts: Vec<Vector> = (0..self.n()).map(|i| self.c_tilde(i)).collect();
        let refs: Vec<&Vector> = parts.iter().collect();
        crate::densela::vconcat(&refs)
    }

    /// `L̄ = diag{L_{Gᵢ} ⊗ I_n}`.
    pub fn l_bar(&self, inner: &[NetworkGraph]) -> Result<Matrix> {
        let n = self.n();
        if inner.len() != n || inner.iter().any(|g| g.node_count() != n) {
            return Err(Error::Dimension(format!("clustering needs {n} inner graphs on {n} nodes each")));
        }
        let eye = Matrix::identity(n, n);
        let blocks: Vec<Matrix> = inner.iter().map(|g| kron(&g.laplacian(), &eye)).collect();
        Ok(crate::densela::block_diag(&blocks))
    }

    /// `dim(∩ᵢ ker Mᵢ)`, from the rank of `col{M₁, …, Mₙ}`.
    pub fn kernel_intersection_dim(&self) -> usize {
        let ms: Vec<Matrix> = (0..self.n()).map(|i| self.m_i(i)).collect();
        let refs: Vec<&Matrix> = ms.iter().collect();
        let stacked = crate::densela::vstack(&refs).expect("equal widths");
        stacked.ncols() - numerical_rank(&stacked, DEFAULT_RANK_TOL)
    }

    /// `Σⱼ (1_{j=i} A + B_{ji} I) x_{i_j} − C_{ji} eⱼ` for a cluster state.
    pub fn cluster_sum_residual(&self, i: usize, x_i: &Vector) -> Vector {
        let n = self.n();
        let mut r = Vector::zeros(n);
        for j in 0..n {
            let xj = x_i.rows(j * n, n);
            r += self.block(i, j) * xj;
            r[j] -= self.problem.c()[(j, i)];
        }
        r
    }
}

pub fn clustering_partition(p: &SylvesterProblem) -> Result<ClusterOperators> {
    require_square(p, Scheme::Clustering)?;
    Ok(ClusterOperators { problem: p.clone() })
}
