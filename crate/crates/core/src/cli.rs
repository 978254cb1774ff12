//! Command implementations behind the `sylflow` binary.

use std::fmt;
use std::io::Write;

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::experiment::{Experiment, Init, Run};
use crate::flowsim::{FlowKind, Trajectory};
use crate::partition::SolvabilityCase;
use crate::rates::{measured_rate, DEFAULT_TAIL_FRACTION};

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

pub fn write_trajectory_csv(traj: &Trajectory, out: &mut dyn Write) -> Result<()> {
    let nodes = traj.samples.first().map_or(0, |s| s.e_nodes.len());
    let mut header = String::from("t,e_total,consensus_residual");
    for i in 1..=nodes {
        header.push_str(&format!(",e_node_{i}"));
    }
    writeln!(out, "{header}")?;
    for s in &traj.samples {
        let mut line = format!("{},{},{}", fmt_num(s.t), fmt_num(s.e_total), fmt_num(s.consensus_residual));
        for e in &s.e_nodes {
            line.push(',');
            line.push_str(&fmt_num(*e));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveSummary {
    pub case: SolvabilityCase,
    pub flow: FlowKind,
    pub nodes: usize,
    pub k: f64,
    pub dt: f64,
    pub seed: Option<u64>,
    pub initial_error: f64,
    pub final_error: f64,
    pub measured_rate: Option<f64>,
    pub r_theory: Option<f64>,
    pub converged: bool,
}

impl fmt::Display for SolveSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let opt = |x: Option<f64>| x.map_or("n/a".to_string(), |v| format!("{v:.6e}"));
        writeln!(f, "case:           {}", self.case)?;
        writeln!(f, "flow:           {} (K = {}, {} nodes, dt = {})", self.flow, self.k, self.nodes, self.dt)?;
        match self.seed {
            Some(seed) => writeln!(f, "init:           random (seed {seed})")?,
            None => writeln!(f, "init:           zero")?,
        }
        writeln!(f, "initial error:  {:.6e}", self.initial_error)?;
        writeln!(f, "final error:    {:.6e}", self.final_error)?;
        writeln!(f, "measured rate:  {}", opt(self.measured_rate))?;
        writeln!(f, "r(K) theory:    {}", opt(self.r_theory))?;
        write!(f, "converged:      {}", if self.converged { "yes" } else { "no" })
    }
}

fn init_of(cfg: &ExperimentConfig) -> Result<Init> {
    Ok(Init::from((cfg.init.kind, cfg.effective_seed()?)))
}

fn check_integrator(cfg: &ExperimentConfig) -> Result<()> {
    let i = &cfg.integrator;
    if !(i.t_end > 0.0 && i.t_end.is_finite()) {
        return Err(Error::Config(format!("integrator.t_end must be positive, got {}", i.t_end)));
    }
    if let Some(dt) = i.dt {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Config(format!("integrator.dt must be positive, got {dt}")));
        }
    }
    if i.sample_stride == 0 {
        return Err(Error::Config("integrator.sample_stride must be at least 1".into()));
    }
    Ok(())
}

fn run_at(exp: &Experiment, cfg: &ExperimentConfig, k: f64) -> Result<Run> {
    let i = &cfg.integrator;
    exp.run(k, init_of(cfg)?, i.dt, i.t_end, i.sample_stride)
}

/// Integrate the configured experiment, write its trajectory CSV to `out`
/// and return the run summary.
pub fn cmd_solve(cfg: &ExperimentConfig, out: &mut dyn Write) -> Result<SolveSummary> {
    check_integrator(cfg)?;
    let exp = Experiment::from_config(cfg)?;
    let k = cfg.k;
    let run = run_at(&exp, cfg, k)?;
    write_trajectory_csv(&run.trajectory, out)?;
    out.flush()?;
    let theory = exp.theory(k)?;
    let final_error = run.trajectory.final_error();
    Ok(SolveSummary {
        case: exp.case(),
        flow: cfg.flow,
        nodes: exp.node_count(),
        k,
        dt: run.dt,
        seed: match init_of(cfg)? {
            Init::Random(seed) => Some(seed),
            Init::Zero => None,
        },
        initial_error: run.trajectory.initial_error(),
        final_error,
        measured_rate: measured_rate(&run.trajectory, DEFAULT_TAIL_FRACTION).ok(),
        r_theory: theory.r_theory,
        converged: final_error <= cfg.converge_tol,
    })
}

/// Parse `a,b,c` into a nonempty, positive, strictly ascending list.
pub fn parse_k_values(text: &str) -> Result<Vec<f64>> {
    let ks = text
        .split(',')
        .map(|s| {
            let s = s.trim();
            s.parse::<f64>().map_err(|_| Error::Config(format!("--k-values: {s:?} is not a number")))
        })
        .collect::<Result<Vec<_>>>()?;
    if ks.is_empty() {
        return Err(Error::Config("--k-values is empty".into()));
    }
    if let Some(k) = ks.iter().find(|k| !(**k > 0.0 && k.is_finite())) {
        return Err(Error::Config(format!("--k-values: {k} is not positive")));
    }
    if ks.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("--k-values must be strictly ascending".into()));
    }
    Ok(ks)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub k: f64,
    pub r_theory: Option<f64>,
    pub r_measured: Option<f64>,
    pub r0: Option<f64>,
    pub bound_lower: Option<f64>,
    pub bound_upper: Option<f64>,
}

fn sweep_row(exp: &Experiment, cfg: &ExperimentConfig, k: f64) -> Result<SweepRow> {
    let theory = exp.theory(k)?;
    let run = run_at(exp, cfg, k)?;
    let r_measured = match measured_rate(&run.trajectory, DEFAULT_TAIL_FRACTION) {
        Ok(r) => Some(r),
        Err(Error::FloorReached) => None,
        Err(e) => return Err(e),
    };
    let (bound_lower, bound_upper) = match (theory.bounds, theory.rs_bound) {
        (Some((lo, hi)), _) => (Some(lo), Some(hi)),
        (None, Some(hi)) => (None, Some(hi)),
        (None, None) => (None, None),
    };
    Ok(SweepRow { k, r_theory: theory.r_theory, r_measured, r0: theory.r0, bound_lower, bound_upper })
}

/// One row per gain, each simulated on its own thread. Rows come back in
/// the order of `ks`.
pub fn cmd_rate_sweep(cfg: &ExperimentConfig, ks: &[f64]) -> Result<Vec<SweepRow>> {
    check_integrator(cfg)?;
    let exp = Experiment::from_config(cfg)?;
    let results: Vec<Result<SweepRow>> = std::thread::scope(|scope| {
        let handles: Vec<_> = ks.iter().map(|&k| scope.spawn({
            let exp = &exp;
            move || sweep_row(exp, cfg, k)
        })).collect();
        handles.into_iter().map(|h| h.join().expect("sweep worker panicked")).collect()
    });
    results.into_iter().collect()
}

pub fn write_sweep_csv(rows: &[SweepRow], out: &mut dyn Write) -> Result<()> {
    writeln!(out, "K,r_theory,r_measured,r0,bound_lower,bound_upper")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt_num(r.k),
            fmt_opt(r.r_theory),
            fmt_opt(r.r_measured),
            fmt_opt(r.r0),
            fmt_opt(r.bound_lower),
            fmt_opt(r.bound_upper)
        )?;
    }
    out.flush()?;
    Ok(())
}
