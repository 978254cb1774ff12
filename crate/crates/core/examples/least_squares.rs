//! Two nodes disagree about a scalar. The least-squares flow settles near
//! the average, with a spread that shrinks like `1/K`.

use sylflow::densela::{Matrix, Vector};
use sylflow::flowsim::{simulate, FlowState, Integration, LeastSquares};
use sylflow::netgraph::NetworkGraph;
use sylflow::partition::{NodeEquation, StateLayout};

fn main() -> sylflow::Result<()> {
    let eqs = vec![
        NodeEquation::new(1, Matrix::from_element(1, 1, 1.0), Vector::from_element(1, 0.0))?,
        NodeEquation::new(2, Matrix::from_element(1, 1, 1.0), Vector::from_element(1, 2.0))?,
    ];
    let lap = NetworkGraph::path(2)?.laplacian();
    let target = Matrix::from_element(1, 1, 1.0);
    for k in [1.0, 10.0, 100.0] {
        let flow = LeastSquares::new(k, &lap, &eqs)?;
        let integ = Integration { dt: 0.5 / (1.0 + 2.0 * k), t_end: 60.0, sample_stride: 100 };
        let traj = simulate(&flow, &StateLayout::Plain { n: 1, m: 1 }, FlowState::zeros(1, 2, None), &target, &integ)?;
        let x = &traj.final_state.nodes;
        println!("K = {k:>5}: nodes at {:.5}, {:.5}", x[(0, 0)], x[(0, 1)]);
    }
    Ok(())
}
