//! Fewer nodes with more data each converge faster than many thin nodes.

use sylflow::experiment::{Experiment, Init, Setup};
use sylflow::fixtures;
use sylflow::flowsim::FlowKind;
use sylflow::netgraph::NetworkGraph;
use sylflow::partition::Scheme;
use sylflow::rates::{measured_rate, DEFAULT_TAIL_FRACTION};

fn main() -> sylflow::Result<()> {
    let p = fixtures::example1();
    let layouts = [
        ("one node", Setup::new(Scheme::Grouped, FlowKind::Cp, NetworkGraph::single(), 1.0).with_groups(vec![(1..=5).collect()])),
        ("two groups", Setup::new(Scheme::Grouped, FlowKind::Cp, NetworkGraph::path(2)?, 1.0).with_groups(vec![vec![1, 2], vec![3, 4, 5]])),
        ("five columns", Setup::new(Scheme::BcColumn, FlowKind::Cp, NetworkGraph::cycle(5)?, 1.0)),
        ("25 rows", Setup::new(Scheme::HighRes, FlowKind::Cp, NetworkGraph::cycle(25)?, 1.0)),
    ];
    for (label, setup) in layouts {
        let exp = Experiment::new(p.clone(), setup)?;
        let r = exp.theory(1.0)?.r_theory.unwrap_or(f64::NAN);
        let run = exp.run(1.0, Init::Zero, Some(0.05), 1000.0, 20)?;
        let m = measured_rate(&run.trajectory, DEFAULT_TAIL_FRACTION).map_or("floor".into(), |m| format!("{m:.4e}"));
        println!("{label:>12}: r(1) = {r:.4e}, measured {m}");
    }
    Ok(())
}
