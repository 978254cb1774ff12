//! Certify stability of `ẋ = Ax` by solving `AᵀP + PA = −I` with the
//! augmented flow on three nodes, then checking `P ≻ 0`.

use sylflow::experiment::{Experiment, Init, Setup};
use sylflow::fixtures;
use sylflow::flowsim::FlowKind;
use sylflow::netgraph::NetworkGraph;
use sylflow::oracle::positive_definite_check;
use sylflow::partition::Scheme;

fn main() -> sylflow::Result<()> {
    let exp = Experiment::new(
        fixtures::example4_lyapunov(),
        Setup::new(Scheme::FullRowColumn, FlowKind::Augmented, NetworkGraph::path(3)?, 1.0),
    )?;
    let run = exp.run(1.0, Init::Zero, Some(0.1), 8000.0, 1000)?;
    let p = exp.layout().to_x(&run.trajectory.final_state.node(0))?;
    println!("node 1 estimate of P:\n{p:.5}");
    println!("distance to printed P*: {:.3e}", (&p - fixtures::example4_p_star()).norm());
    println!("positive definite: {}", positive_definite_check(&p));
    Ok(())
}
