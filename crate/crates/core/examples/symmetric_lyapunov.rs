//! Lyapunov data solved two ways: plain consensus + projection on columns,
//! and the symmetrizing flow that pulls each node toward `X = Xᵀ`.

use sylflow::experiment::{Experiment, Init, Setup};
use sylflow::fixtures;
use sylflow::flowsim::FlowKind;
use sylflow::netgraph::NetworkGraph;
use sylflow::partition::Scheme;

fn main() -> sylflow::Result<()> {
    let p = fixtures::example4_lyapunov();
    for (flow, ks) in [(FlowKind::Cp, None), (FlowKind::Cps, Some(10.0))] {
        let mut setup = Setup::new(Scheme::BcColumn, flow, NetworkGraph::cycle(6)?, 10.0);
        if let Some(ks) = ks {
            setup = setup.with_ks(ks);
        }
        let exp = Experiment::new(p.clone(), setup)?;
        let run = exp.run(10.0, Init::Random(3), None, 3000.0, 20000)?;
        let x = run.trajectory.final_state.node(0);
        let x = nalgebra::DMatrix::from_column_slice(6, 6, x.as_slice());
        println!(
            "{flow}: final error {:.3e}, asymmetry {:.3e}",
            run.trajectory.final_error(),
            (&x - x.transpose()).norm()
        );
        if let Some(b) = exp.theory(10.0)?.rs_bound {
            println!("  rate bound {b:.4}");
        }
    }
    Ok(())
}
