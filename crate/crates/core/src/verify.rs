//! Named reproduction scenarios with pass/fail checks.

use std::fmt;

use crate::densela::{Matrix, Vector};
use crate::error::{Error, Result};
use crate::experiment::{Experiment, Init, Setup};
use crate::fixtures;
use crate::flowsim::FlowKind;
use crate::netgraph::NetworkGraph;
use crate::oracle::{direct_solve, flow_limit, positive_definite_check};
use crate::partition::{Scheme, StateLayout};
use crate::rates::{measured_rate, r0_limit, r_of_k, r0_bounds, DEFAULT_TAIL_FRACTION};

pub const FIXTURES: [&str; 5] = ["example1", "example2", "example3", "example4", "example5"];

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub fixture: String,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    fn new(fixture: &str) -> Self {
        Self { fixture: fixture.to_string(), checks: Vec::new() }
    }

    fn check(&mut self, name: &str, passed: bool, detail: String) {
        self.checks.push(Check { name: name.to_string(), passed, detail });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    /// `Err(Error::Verification)` naming every failed check.
    pub fn into_result(self) -> Result<Self> {
        if self.passed() {
            Ok(self)
        } else {
            let names: Vec<String> = self.failures().iter().map(|c| c.name.clone()).collect();
            Err(Error::Verification(format!("{}: {}", self.fixture, names.join(", "))))
        }
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{} {}: {} ({})", if c.passed { "PASS" } else { "FAIL" }, self.fixture, c.name, c.detail)?;
        }
        Ok(())
    }
}

fn sci(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:.4e}")).collect::<Vec<_>>().join(", ")
}

pub fn run_fixture(name: &str) -> Result<VerifyReport> {
    match name {
        "example1" => example1(),
        "example2" => example2(),
        "example3" => example3(),
        "example4" => example4(),
        "example5" => example5(),
        other => Err(Error::Config(format!("unknown fixture {other:?}; expected one of {}", FIXTURES.join(", ")))),
    }
}

/// Rate law on the 5×5 instance over a 5-cycle, then one long run at
/// `K = 1` checking exponential decay at the predicted rate.
fn example1() -> Result<VerifyReport> {
    let mut rep = VerifyReport::new("example1");
    let exp = Experiment::new(
        fixtures::example1(),
        Setup::new(Scheme::BcColumn, FlowKind::Cp, NetworkGraph::cycle(5)?, 1.0),
    )?;
    let eqs = &exp.partition().expect("plain scheme").equations;
    let lap = exp.setup().graph.laplacian();
    let ks = [1.0, 5.0, 10.0, 50.0, 100.0, 1e3, 1e4];
    let rs = ks.iter().map(|&k| r_of_k(eqs, &lap, k).map(|p| p.0)).collect::<Result<Vec<_>>>()?;
    let r0 = r0_limit(eqs)?;
    rep.check(
        "r(K) nondecreasing",
        rs.windows(2).all(|w| w[1] >= w[0] - 1e-9),
        format!("r = {}", sci(&rs)),
    );
    rep.check("r(K) <= 1", rs.iter().all(|&r| r <= 1.0 + 1e-12), format!("max {:.4e}", rs[rs.len() - 1]));
    rep.check(
        "r(1e4) >= 0.98 r0",
        rs[rs.len() - 1] >= 0.98 * r0,
        format!("r(1e4) = {:.6e}, r0 = {r0:.6e}", rs[rs.len() - 1]),
    );
    match r0_bounds(eqs)? {
        Some((lo, hi)) => rep.check(
            "bounds sandwich r0",
            lo - r0 <= 1e-9 && r0 - hi <= 1e-9,
            format!("{lo:.4e} <= {r0:.4e} <= {hi:.4e}"),
        ),
        None => rep.check("bounds sandwich r0", false, "bounds inapplicable".into()),
    }

    let run = exp.run(1.0, Init::Zero, Some(0.05), 15000.0, 20)?;
    let ratio = run.trajectory.final_error() / run.trajectory.initial_error();
    rep.check("e(T)/e(0) <= 1e-6", ratio <= 1e-6, format!("ratio {ratio:.3e} at T = 15000"));
    let measured = measured_rate(&run.trajectory, DEFAULT_TAIL_FRACTION)?;
    let rel = (measured - rs[0]).abs() / rs[0];
    rep.check(
        "measured rate within 10% of r(1)",
        rel <= 0.10,
        format!("measured {measured:.4e}, r(1) = {:.4e}", rs[0]),
    );
    Ok(rep)
}

/// Column and row partitions of the same data lead to transposed limits.
fn example2() -> Result<VerifyReport> {
    let mut rep = VerifyReport::new("example2");
    for (label, problem) in [("first", fixtures::example2_first()), ("second", fixtures::example2_second())] {
        let x_star = direct_solve(&problem).x_star;
        let mut finals = Vec::new();
        for scheme in [Scheme::BcColumn, Scheme::AcRow] {
            let nodes = if scheme == Scheme::BcColumn { problem.m() } else { problem.n() };
            let exp = Experiment::new(problem.clone(), Setup::new(scheme, FlowKind::Cp, NetworkGraph::cycle(nodes)?, 1.0))?;
            let eqs = &exp.partition().expect("plain scheme").equations;
            let init = exp.initial_state(Init::Random(7));
            let starts: Vec<Vector> = (0..init.node_count()).map(|i| init.node(i)).collect();
            let limit = flow_limit(eqs, &starts)?;
            let native = match exp.layout() {
                StateLayout::Transposed { n, m } => Matrix::from_column_slice(m, n, limit.as_slice()),
                layout => layout.to_x(&limit)?,
            };
            finals.push((scheme, native, exp.layout().to_x(&limit)?));
            let run = exp.run(1.0, Init::Random(7), Some(0.05), 500.0, 100)?;
            let t = &run.trajectory;
            rep.check(
                &format!("{label} {scheme}: error decreases"),
                t.final_error() < t.initial_error(),
                format!("{:.3e} -> {:.3e}", t.initial_error(), t.final_error()),
            );
        }
        let (col, row) = (&finals[0], &finals[1]);
        let gap = (&col.1 - row.1.transpose()).norm();
        rep.check(
            &format!("{label}: row limit is the transpose of the column limit"),
            gap <= 1e-8 * (1.0 + col.1.norm()),
            format!("gap {gap:.3e}"),
        );
        let err = (&col.2 - &x_star).norm().max((&row.2 - &x_star).norm());
        rep.check(&format!("{label}: limits solve the equation"), err <= 1e-8 * (1.0 + x_star.norm()), format!("{err:.3e}"));
    }
    Ok(rep)
}

/// Five column nodes against twenty-five single-row nodes on cycles.
fn example3() -> Result<VerifyReport> {
    let mut rep = VerifyReport::new("example3");
    let problem = fixtures::example1();
    let coarse = Experiment::new(problem.clone(), Setup::new(Scheme::BcColumn, FlowKind::Cp, NetworkGraph::cycle(5)?, 1.0))?;
    let fine = Experiment::new(problem, Setup::new(Scheme::HighRes, FlowKind::Cp, NetworkGraph::cycle(25)?, 1.0))?;
    let rate = |exp: &Experiment| -> Result<f64> {
        let run = exp.run(1.0, Init::Zero, Some(0.05), 2000.0, 10)?;
        measured_rate(&run.trajectory, DEFAULT_TAIL_FRACTION)
    };
    let (r5, r25) = (rate(&coarse)?, rate(&fine)?);
    rep.check("5-node rate > 25-node rate", r5 > r25, format!("{r5:.4e} vs {r25:.4e}"));
    Ok(rep)
}

/// Augmented flow for the 6×6 Lyapunov equation on a 3-node path.
fn example4() -> Result<VerifyReport> {
    let mut rep = VerifyReport::new("example4");
    let problem = fixtures::example4_lyapunov();
    let graph = NetworkGraph::path(3)?;
    let lap_ok = (graph.laplacian() - fixtures::example4_laplacian()).norm() == 0.0;
    rep.check("path Laplacian", lap_ok, "[[1,-1,0],[-1,2,-1],[0,-1,1]]".into());
    let exp = Experiment::new(problem.clone(), Setup::new(Scheme::FullRowColumn, FlowKind::Augmented, graph, 1.0))?;
    let run = exp.run(1.0, Init::Zero, Some(0.1), 8000.0, 100)?;
    let layout = exp.layout();
    let limits = (0..exp.node_count())
        .map(|i| layout.to_x(&run.trajectory.final_state.node(i)))
        .collect::<Result<Vec<_>>>()?;
    let mut spread: f64 = 0.0;
    for i in 0..limits.len() {
        for j in i + 1..limits.len() {
            spread = spread.max((&limits[i] - &limits[j]).norm());
        }
    }
    rep.check("node limits agree", spread <= 1e-5, format!("max pairwise gap {spread:.3e}"));
    let residual = limits.iter().map(|x| problem.residual(x).norm()).fold(0.0, f64::max);
    rep.check("limits solve AX + XAᵀ = −I", residual <= 1e-5, format!("max residual {residual:.3e}"));
    let p_star = fixtures::example4_p_star();
    let dev = limits.iter().map(|x| (x - &p_star).amax()).fold(0.0, f64::max);
    rep.check("matches printed P*", dev <= 2e-3, format!("max entry deviation {dev:.3e}"));
    let pd = limits.iter().all(|x| positive_definite_check(&((x + x.transpose()) * 0.5)));
    rep.check("P* positive definite", pd, String::new());
    Ok(rep)
}

/// Clustering flow on the 5×5 instance with complete outer and inner graphs.
fn example5() -> Result<VerifyReport> {
    let mut rep = VerifyReport::new("example5");
    let problem = fixtures::example1();
    let n = problem.n();
    let inner = vec![NetworkGraph::complete(n)?; n];
    let exp = Experiment::new(
        problem.clone(),
        Setup::new(Scheme::Clustering, FlowKind::Clustering, NetworkGraph::complete(n)?, 100.0).with_inner(inner),
    )?;
    let mut r_star = Vec::new();
    for k in [1.0, 10.0, 100.0] {
        let rate = exp.theory(k)?.clustering.expect("clustering rate");
        if k == 100.0 {
            rep.check(
                "rank G <= bound",
                rate.rank_g <= rate.rank_bound,
                format!("rank {} vs bound {}", rate.rank_g, rate.rank_bound),
            );
            rep.check("spectrum of G in closed right half-plane", rate.min_real >= -1e-8, format!("min real part {:.3e}", rate.min_real));
        }
        r_star.push(rate.r_star);
    }
    rep.check("r*(K) nondecreasing", r_star.windows(2).all(|w| w[1] >= w[0] - 1e-9), sci(&r_star));
    let plain = Experiment::new(problem, Setup::new(Scheme::BcColumn, FlowKind::Cp, NetworkGraph::complete(n)?, 100.0))?;
    let r_plain = plain.theory(100.0)?.r_theory.unwrap_or(f64::NAN);
    rep.check(
        "clustering beats column partition at K = 100",
        r_star[2] > r_plain,
        format!("r* = {:.4e}, r = {r_plain:.4e}", r_star[2]),
    );
    let run = exp.run(100.0, Init::Zero, None, 3000.0, 1000)?;
    let e = run.trajectory.final_error();
    rep.check("final error <= 1e-6", e <= 1e-6, format!("{e:.3e}"));
    Ok(rep)
}
