//! Every way of splitting `AX + XB = C` across nodes, with sizes.

use sylflow::fixtures;
use sylflow::netgraph::NetworkGraph;
use sylflow::partition::{
    ac_row_partition, bc_column_partition, clustering_partition, consistency_check, full_rowcol_partition,
    grouped_column_partition, high_res_partition, lyapunov_sym_partition, NodePartition,
};

fn show(label: &str, part: &NodePartition) {
    let rows: Vec<usize> = part.equations.iter().map(|e| e.h.nrows()).collect();
    println!("{label:>16}: {} nodes, unknown dim {}, rows per node {rows:?}", part.node_count(), part.dim());
}

fn main() -> sylflow::Result<()> {
    let p = fixtures::example1();
    println!("{:?}", consistency_check(&p).case);
    show("column", &bc_column_partition(&p));
    show("row", &ac_row_partition(&p));
    show("grouped", &grouped_column_partition(&p, &[vec![1, 2], vec![3, 4, 5]])?);
    show("high resolution", &high_res_partition(&p)?);

    let a = fixtures::example4_system();
    let lyap = fixtures::example4_lyapunov();
    show("lyapunov sym", &lyapunov_sym_partition(&a, lyap.c())?);
    show("full row-column", &full_rowcol_partition(&lyap, &NetworkGraph::path(3)?)?);

    let ops = clustering_partition(&p)?;
    println!("      clustering: kernel intersection dim {}", ops.kernel_intersection_dim());
    Ok(())
}
