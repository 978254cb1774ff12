//! Assemble problem, partition, graph and flow into a runnable experiment.

use crate::config::{ExperimentConfig, InitKind};
use crate::densela::{symmetrizer_permutation, Matrix, Vector};
use crate::error::{Error, Result};
use crate::flowsim::{
    default_dt, simulate, AffineProjector, Clustering, ConsensusProjection, FlowKind, FlowState, Integration,
    LeastSquares, NetworkFlow, Symmetrized, Trajectory,
};
use crate::netgraph::NetworkGraph;
use crate::oracle::{direct_solve, flow_limit, intersection_projector, stacked_least_squares};
use crate::partition::{
    ac_row_partition, bc_column_partition, clustering_partition, consistency_check, full_rowcol_partition,
    grouped_column_partition, high_res_partition, lyapunov_sym_partition, ClusterOperators, Consistency,
    NodeEquation, NodePartition, Scheme, SolvabilityCase, StateLayout, SylvesterProblem, CONSISTENCY_TOL,
};
use crate::rates::{clustering_rate, r0_limit, r_of_k, r0_bounds, rs_upper_bound, ClusteringRate};

/// Initial node states.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Init {
    Zero,
    /// Uniform `[−1, 1]` entries from a seeded ChaCha8 stream.
    Random(u64),
}

/// What to run: partition, flow, topology and gains.
#[derive(Debug, Clone)]
pub struct Setup {
    pub scheme: Scheme,
    /// Column groups for [`Scheme::Grouped`].
    pub groups: Option<Vec<Vec<usize>>>,
    pub flow: FlowKind,
    pub graph: NetworkGraph,
    /// Inner graphs for [`FlowKind::Clustering`].
    pub inner: Option<Vec<NetworkGraph>>,
    pub k: f64,
    pub ks: Option<f64>,
}

impl Setup {
    pub fn new(scheme: Scheme, flow: FlowKind, graph: NetworkGraph, k: f64) -> Self {
        Self { scheme, groups: None, flow, graph, inner: None, k, ks: None }
    }

    pub fn with_groups(mut self, groups: Vec<Vec<usize>>) -> Self {
        self.groups = Some(groups);
        self
    }

    pub fn with_inner(mut self, inner: Vec<NetworkGraph>) -> Self {
        self.inner = Some(inner);
        self
    }

    pub fn with_ks(mut self, ks: f64) -> Self {
        self.ks = Some(ks);
        self
    }
}

#[derive(Debug, Clone)]
enum Data {
    Plain(NodePartition),
    Clusters(ClusterOperators),
}

#[derive(Debug, Clone)]
pub struct Experiment {
    problem: SylvesterProblem,
    setup: Setup,
    data: Data,
    consistency: Consistency,
}

/// A finished simulation.
#[derive(Debug, Clone)]
pub struct Run {
    pub trajectory: Trajectory,
    /// The matrix every node's `X` is compared against.
    pub reference: Matrix,
    pub dt: f64,
    pub k: f64,
}

/// Closed-form rate quantities for one gain `K`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Theory {
    pub r_theory: Option<f64>,
    pub rank_jl: Option<usize>,
    pub r0: Option<f64>,
    pub bounds: Option<(f64, f64)>,
    pub rs_bound: Option<f64>,
    pub clustering: Option<ClusteringRate>,
}

fn compat(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config(msg()))
    }
}

impl Experiment {
    pub fn new(problem: SylvesterProblem, setup: Setup) -> Result<Self> {
        let (scheme, flow) = (setup.scheme, setup.flow);
        compat(setup.k > 0.0 && setup.k.is_finite(), || format!("k must be positive, got {}", setup.k))?;
        if let Some(ks) = setup.ks {
            compat(ks > 0.0 && ks.is_finite(), || format!("ks must be positive, got {ks}"))?;
        }
        match flow {
            FlowKind::Clustering => compat(scheme == Scheme::Clustering, || {
                format!("flow \"clustering\" needs partition \"clustering\", got \"{scheme}\"")
            })?,
            FlowKind::Augmented => compat(scheme == Scheme::FullRowColumn, || {
                format!("flow \"augmented\" needs partition \"full-row-column\", got \"{scheme}\"")
            })?,
            FlowKind::Cp | FlowKind::Ls | FlowKind::Cps => compat(
                !matches!(scheme, Scheme::Clustering | Scheme::FullRowColumn),
                || format!("partition \"{scheme}\" is driven by its own flow, not \"{flow}\""),
            )?,
        }
        if flow == FlowKind::Cps {
            compat(setup.ks.is_some(), || "flow \"cps\" needs ks".to_string())?;
            compat(problem.is_square(), || "flow \"cps\" needs a square problem".to_string())?;
        }
        compat(setup.groups.is_none() || scheme == Scheme::Grouped, || {
            "groups are only used by the \"grouped\" partition".to_string()
        })?;
        compat(setup.inner.is_none() || flow == FlowKind::Clustering, || {
            "inner_graphs are only used by the clustering flow".to_string()
        })?;

        let data = match scheme {
            Scheme::BcColumn => Data::Plain(bc_column_partition(&problem)),
            Scheme::AcRow => Data::Plain(ac_row_partition(&problem)),
            Scheme::Grouped => {
                let groups = setup
                    .groups
                    .as_ref()
                    .ok_or_else(|| Error::Config("partition \"grouped\" needs groups".into()))?;
                Data::Plain(grouped_column_partition(&problem, groups)?)
            }
            Scheme::HighRes => Data::Plain(high_res_partition(&problem)?),
            Scheme::LyapunovSym => {
                let b_err = (problem.b() - problem.a().transpose()).norm();
                compat(b_err <= CONSISTENCY_TOL * (1.0 + problem.a().norm()), || {
                    "partition \"lyapunov-sym\" needs B = Aᵀ".to_string()
                })?;
                Data::Plain(lyapunov_sym_partition(problem.a(), problem.c())?)
            }
            Scheme::FullRowColumn => Data::Plain(full_rowcol_partition(&problem, &setup.graph)?),
            Scheme::Clustering => {
                let ops = clustering_partition(&problem)?;
                let inner = setup
                    .inner
                    .as_ref()
                    .ok_or_else(|| Error::Config("the clustering flow needs inner_graphs".into()))?;
                let n = ops.n();
                compat(inner.len() == n, || format!("{} inner graphs for {n} clusters", inner.len()))?;
                compat(inner.iter().all(|g| g.node_count() == n), || {
                    format!("every inner graph needs {n} nodes")
                })?;
                Data::Clusters(ops)
            }
        };
        let nodes = match &data {
            Data::Plain(p) => p.node_count(),
            Data::Clusters(ops) => ops.n(),
        };
        compat(setup.graph.node_count() == nodes, || {
            format!(
                "partition \"{scheme}\" has {nodes} nodes but the graph has {}",
                setup.graph.node_count()
            )
        })?;
        let consistency = consistency_check(&problem);
        Ok(Self { problem, setup, data, consistency })
    }

    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        let problem = cfg.problem()?;
        let graph = cfg.graph.build().map_err(|e| Error::Config(format!("graph: {e}")))?;
        let inner = match &cfg.inner_graphs {
            Some(specs) => Some(
                specs
                    .iter()
                    .enumerate()
                    .map(|(i, s)| s.build().map_err(|e| Error::Config(format!("inner_graphs[{i}]: {e}"))))
                    .collect::<Result<Vec<_>>>()?,
            ),
            None => None,
        };
        let setup = Setup {
            scheme: cfg.partition,
            groups: cfg.groups.clone(),
            flow: cfg.flow,
            graph,
            inner,
            k: cfg.k,
            ks: cfg.ks,
        };
        Self::new(problem, setup)
    }

    pub fn problem(&self) -> &SylvesterProblem {
        &self.problem
    }

    pub fn setup(&self) -> &Setup {
        &self.setup
    }

    pub fn consistency(&self) -> &Consistency {
        &self.consistency
    }

    pub fn case(&self) -> SolvabilityCase {
        self.consistency.case
    }

    /// Node equations of a plain scheme; `None` for clustering.
    pub fn partition(&self) -> Option<&NodePartition> {
        match &self.data {
            Data::Plain(p) => Some(p),
            Data::Clusters(_) => None,
        }
    }

    pub fn clusters(&self) -> Option<&ClusterOperators> {
        match &self.data {
            Data::Clusters(ops) => Some(ops),
            Data::Plain(_) => None,
        }
    }

    pub fn node_count(&self) -> usize {
        self.setup.graph.node_count()
    }

    pub fn layout(&self) -> StateLayout {
        match &self.data {
            Data::Plain(p) => p.layout,
            Data::Clusters(ops) => StateLayout::Plain { n: ops.n(), m: ops.n() },
        }
    }

    fn inner_laplacians(&self) -> Vec<Matrix> {
        self.setup.inner.iter().flatten().map(NetworkGraph::laplacian).collect()
    }

    /// The flow at gain `k` (and the configured `K_s`).
    pub fn flow(&self, k: f64) -> Result<Box<dyn NetworkFlow>> {
        let lap = self.setup.graph.laplacian();
        Ok(match (&self.data, self.setup.flow) {
            (Data::Clusters(ops), _) => Box::new(Clustering::new(k, ops, &lap, &self.inner_laplacians())?),
            (Data::Plain(p), FlowKind::Ls) => Box::new(LeastSquares::new(k, &lap, &p.equations)?),
            (Data::Plain(p), FlowKind::Cps) => {
                let base = ConsensusProjection::from_equations(k, &lap, &p.equations)?;
                Box::new(Symmetrized::new(base, self.setup.ks.unwrap_or(0.0))?)
            }
            (Data::Plain(p), _) => Box::new(ConsensusProjection::from_equations(k, &lap, &p.equations)?),
        })
    }

    pub fn initial_state(&self, init: Init) -> FlowState {
        let layout = self.layout();
        let aux = self.clusters().map(|_| layout.dim());
        match init {
            Init::Zero => FlowState::zeros(layout.dim(), self.node_count(), aux),
            Init::Random(seed) => FlowState::random(layout.dim(), self.node_count(), aux, seed),
        }
    }

    /// Limit the error metric is measured against, given the initial state.
    ///
    /// Unique solutions use the direct solve. With infinitely many
    /// solutions the plain flows converge to the projection of the mean
    /// initial state onto the common solution set (restricted to symmetric
    /// matrices for `cps`); clustering runs use the min-norm solution.
    /// Without an exact solution only the least-squares flow has a target.
    pub fn reference(&self, init: &FlowState) -> Result<Matrix> {
        let layout = self.layout();
        match (self.case(), &self.data, self.setup.flow) {
            (SolvabilityCase::III, Data::Plain(p), FlowKind::Ls) => {
                layout.to_x(&stacked_least_squares(&p.equations)?)
            }
            (SolvabilityCase::III, _, _) => Err(Error::Unsolvable { residual: self.consistency.residual }),
            (SolvabilityCase::I, _, _) | (_, Data::Clusters(_), _) => Ok(direct_solve(&self.problem).x_star),
            (SolvabilityCase::II, Data::Plain(p), FlowKind::Cps) => {
                let n = self.problem.n();
                let mut eqs = p.equations.clone();
                let sym = Matrix::identity(n * n, n * n) - symmetrizer_permutation(n);
                eqs.push(NodeEquation::new(eqs.len() + 1, sym, Vector::zeros(n * n))?);
                let (lin, offset) = intersection_projector(&eqs).map_err(|_| {
                    Error::Inapplicable("the equation has no symmetric solution; the symmetrization flow has no limit".into())
                })?;
                let mean = init.nodes.column_mean();
                layout.to_x(&(lin * mean + offset))
            }
            (SolvabilityCase::II, Data::Plain(p), _) => {
                let starts: Vec<Vector> = (0..init.node_count()).map(|i| init.node(i)).collect();
                layout.to_x(&flow_limit(&p.equations, &starts)?)
            }
        }
    }

    /// Default RK4 step at gain `k`.
    ///
    /// Plain flows use `min(0.01, 0.5/(K λ₁(L) + 2 + K_s))`. The clustering
    /// flow is stiffer than that bound assumes, so it uses
    /// `min(0.01, 2/λ_max(G))`.
    pub fn default_dt(&self, k: f64) -> Result<f64> {
        match &self.data {
            Data::Clusters(ops) => {
                let rate = clustering_rate(ops, k, &self.setup.graph, self.setup.inner.as_deref().unwrap_or(&[]))?;
                Ok(0.01_f64.min(2.0 / rate.max_real))
            }
            Data::Plain(_) => {
                let ks = if self.setup.flow == FlowKind::Cps { self.setup.ks.unwrap_or(0.0) } else { 0.0 };
                Ok(default_dt(k, self.setup.graph.largest_laplacian_eigenvalue(), ks))
            }
        }
    }

    /// Integrate at gain `k`. `dt = None` picks [`Self::default_dt`].
    pub fn run(&self, k: f64, init: Init, dt: Option<f64>, t_end: f64, sample_stride: usize) -> Result<Run> {
        let dt = match dt {
            Some(dt) => dt,
            None => self.default_dt(k)?,
        };
        let state = self.initial_state(init);
        let reference = self.reference(&state)?;
        let flow = self.flow(k)?;
        let integ = Integration { dt, t_end, sample_stride };
        let trajectory = simulate(flow.as_ref(), &self.layout(), state, &reference, &integ)?;
        Ok(Run { trajectory, reference, dt, k })
    }

    /// Closed-form rates at gain `k`.
    pub fn theory(&self, k: f64) -> Result<Theory> {
        let lap = self.setup.graph.laplacian();
        match (&self.data, self.setup.flow) {
            (Data::Clusters(ops), _) => {
                let rate = clustering_rate(ops, k, &self.setup.graph, self.setup.inner.as_deref().unwrap_or(&[]))?;
                Ok(Theory { r_theory: Some(rate.r_star), clustering: Some(rate), ..Theory::default() })
            }
            (Data::Plain(_), FlowKind::Cps) => Ok(Theory {
                rs_bound: Some(rs_upper_bound(k, self.setup.ks.unwrap_or(0.0), &self.setup.graph)),
                ..Theory::default()
            }),
            (Data::Plain(p), _) => {
                let (r, rank) = r_of_k(&p.equations, &lap, k)?;
                Ok(Theory {
                    r_theory: Some(r),
                    rank_jl: Some(rank),
                    r0: Some(r0_limit(&p.equations)?),
                    bounds: r0_bounds(&p.equations)?,
                    ..Theory::default()
                })
            }
        }
    }

    /// Per-node projectors of a plain scheme.
    pub fn projectors(&self) -> Option<Vec<AffineProjector>> {
        self.partition().map(|p| p.equations.iter().map(AffineProjector::from_equation).collect())
    }
}

impl From<(InitKind, u64)> for Init {
    fn from((kind, seed): (InitKind, u64)) -> Self {
        match kind {
            InitKind::Zero => Init::Zero,
            InitKind::Random => Init::Random(seed),
        }
    }
}
