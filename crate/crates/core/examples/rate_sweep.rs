//! How the gain `K` sets the decay rate, and where it saturates.

use sylflow::fixtures;
use sylflow::netgraph::NetworkGraph;
use sylflow::partition::bc_column_partition;
use sylflow::rates::{r0_limit, r_of_k, r0_bounds};

fn main() -> sylflow::Result<()> {
    let eqs = bc_column_partition(&fixtures::example1()).equations;
    for graph in [NetworkGraph::path(5)?, NetworkGraph::cycle(5)?, NetworkGraph::complete(5)?] {
        let lap = graph.laplacian();
        println!("graph with {} edges, algebraic connectivity {:.4}", graph.edge_count(), graph.algebraic_connectivity());
        for k in [0.1, 1.0, 10.0, 100.0, 1000.0] {
            let (r, rank) = r_of_k(&eqs, &lap, k)?;
            println!("  K = {k:>7}  r(K) = {r:.6e}  rank J_L = {rank}");
        }
    }
    let r0 = r0_limit(&eqs)?;
    println!("large-K limit r0 = {r0:.6e}");
    if let Some((lo, hi)) = r0_bounds(&eqs)? {
        println!("cheap bounds: {lo:.4e} <= r0 <= {hi:.4e}");
    }
    Ok(())
}
