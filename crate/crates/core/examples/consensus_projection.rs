//! Five nodes on a cycle each hold one column of `AX + XB = C` and agree on `X`.

use sylflow::experiment::{Experiment, Init, Setup};
use sylflow::fixtures;
use sylflow::flowsim::FlowKind;
use sylflow::netgraph::NetworkGraph;
use sylflow::partition::Scheme;
use sylflow::rates::{measured_rate, DEFAULT_TAIL_FRACTION};

fn main() -> sylflow::Result<()> {
    let exp = Experiment::new(
        fixtures::example1(),
        Setup::new(Scheme::BcColumn, FlowKind::Cp, NetworkGraph::cycle(5)?, 1.0),
    )?;
    println!("case {:?}, {} nodes", exp.case(), exp.node_count());

    let run = exp.run(1.0, Init::Zero, Some(0.1), 15000.0, 500)?;
    let t = &run.trajectory;
    for s in t.samples.iter().step_by(6) {
        println!("t = {:>8.1}  e = {:.3e}  disagreement = {:.3e}", s.t, s.e_total, s.consensus_residual);
    }
    let theory = exp.theory(1.0)?;
    println!(
        "measured rate {:.4e}, predicted r(1) = {:.4e}",
        measured_rate(t, DEFAULT_TAIL_FRACTION)?,
        theory.r_theory.unwrap_or(f64::NAN)
    );
    Ok(())
}
