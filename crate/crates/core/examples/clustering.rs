//! Double-layer network: five clusters of five agents, each agent holding
//! a single entry-equation, consensus only across clusters.

use sylflow::experiment::{Experiment, Init, Setup};
use sylflow::fixtures;
use sylflow::flowsim::FlowKind;
use sylflow::netgraph::NetworkGraph;
use sylflow::partition::Scheme;

fn main() -> sylflow::Result<()> {
    let inner = vec![NetworkGraph::complete(5)?; 5];
    let exp = Experiment::new(
        fixtures::example1(),
        Setup::new(Scheme::Clustering, FlowKind::Clustering, NetworkGraph::complete(5)?, 1.0).with_inner(inner),
    )?;
    for k in [1.0, 10.0, 100.0] {
        let c = exp.theory(k)?.clustering.expect("clustering run");
        println!("K = {k:>5}  r* = {:.4e}  rank G = {} (bound {})", c.r_star, c.rank_g, c.rank_bound);
        if let Some(w) = c.warning {
            println!("  {w}");
        }
    }
    let run = exp.run(100.0, Init::Zero, None, 500.0, 5000)?;
    println!("error after t = 500: {:.3e}", run.trajectory.final_error());
    Ok(())
}
