//! Reference problem data: the worked examples used by tests, the `verify`
//! command and the runnable examples.

use crate::densela::{from_rows, Matrix};
use crate::partition::SylvesterProblem;

fn m(rows: &[[f64; 5]; 5]) -> Matrix {
    from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).expect("fixture rows are rectangular")
}

/// Unique-solution 5×5 instance used for the column-partition experiments.
pub fn example1() -> SylvesterProblem {
    let a = m(&[
        [7.0, 1.0, 1.0, 1.0, 5.0],
        [7.0, 2.0, 8.0, 3.0, 0.0],
        [1.0, 4.0, 8.0, 7.0, 7.0],
        [7.0, 8.0, 4.0, 6.0, 7.0],
        [5.0, 8.0, 6.0, 8.0, 5.0],
    ]);
    let b = m(&[
        [6.0, 6.0, 7.0, 4.0, 4.0],
        [6.0, 0.0, 6.0, 3.0, 4.0],
        [3.0, 2.0, 3.0, 6.0, 5.0],
        [5.0, 0.0, 8.0, 6.0, 6.0],
        [1.0, 1.0, 0.0, 1.0, 6.0],
    ]);
    let c = m(&[
        [2.0, 4.0, 6.0, 8.0, 7.0],
        [5.0, 8.0, 2.0, 4.0, 2.0],
        [5.0, 3.0, 4.0, 1.0, 7.0],
        [1.0, 5.0, 6.0, 1.0, 2.0],
        [1.0, 2.0, 7.0, 2.0, 7.0],
    ]);
    SylvesterProblem::new(a, b, c).expect("fixture shapes agree")
}

/// First data set for comparing column and row partitions; `A` is sparse.
pub fn example2_first() -> SylvesterProblem {
    let a = m(&[
        [0.0, 0.0, 0.0, 5.0, 0.0],
        [0.0, 2.0, 0.0, 0.0, 2.0],
        [1.0, 3.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 4.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, 0.0],
    ]);
    let b = m(&[
        [7.0, 4.0, 4.0, 7.0, 10.0],
        [3.0, 8.0, 6.0, 7.0, 3.0],
        [10.0, 8.0, 7.0, 2.0, 6.0],
        [0.0, 2.0, 8.0, 1.0, 2.0],
        [4.0, 5.0, 3.0, 5.0, 8.0],
    ]);
    let c = m(&[
        [8.0, 1.0, 6.0, 8.0, 3.0],
        [8.0, 5.0, 5.0, 3.0, 7.0],
        [4.0, 8.0, 0.0, 5.0, 7.0],
        [6.0, 9.0, 3.0, 2.0, 7.0],
        [1.0, 1.0, 2.0, 6.0, 5.0],
    ]);
    SylvesterProblem::new(a, b, c).expect("fixture shapes agree")
}

/// Second data set for comparing partitions; here `B` is sparse.
pub fn example2_second() -> SylvesterProblem {
    let a = m(&[
        [1.0, 5.0, 10.0, 1.0, 9.0],
        [2.0, 10.0, 0.0, 4.0, 2.0],
        [9.0, 1.0, 8.0, 3.0, 3.0],
        [2.0, 4.0, 8.0, 8.0, 1.0],
        [8.0, 1.0, 9.0, 4.0, 1.0],
    ]);
    let b = m(&[
        [0.0, 0.0, 8.0, 6.0, 0.0],
        [2.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, 3.0],
    ]);
    let c = m(&[
        [9.0, 6.0, 2.0, 0.0, 3.0],
        [6.0, 4.0, 1.0, 9.0, 9.0],
        [5.0, 5.0, 2.0, 9.0, 4.0],
        [1.0, 4.0, 2.0, 5.0, 1.0],
        [9.0, 1.0, 4.0, 5.0, 8.0],
    ]);
    SylvesterProblem::new(a, b, c).expect("fixture shapes agree")
}

/// System matrix of three coupled 2-state subsystems, assembled from the
/// blocks `D_ij`.
pub fn example4_system() -> Matrix {
    let d = |r: [[f64; 2]; 2]| from_rows(&[r[0].to_vec(), r[1].to_vec()]).expect("2x2 block");
    let z = Matrix::zeros(2, 2);
    let blocks = [
        [d([[-5.0, 0.0], [0.0, -5.0]]), d([[4.0, 1.0], [0.0, 4.0]]), z.clone()],
        [d([[1.0, 0.0], [0.0, 1.0]]), d([[-6.0, 1.0], [1.0, -3.0]]), d([[2.0, 0.0], [2.0, 4.0]])],
        [z, d([[2.0, 0.0], [1.0, -1.0]]), d([[-4.0, 0.0], [0.0, -4.0]])],
    ];
    let mut a = Matrix::zeros(6, 6);
    for (i, row) in blocks.iter().enumerate() {
        for (j, blk) in row.iter().enumerate() {
            a.view_mut((2 * i, 2 * j), (2, 2)).copy_from(blk);
        }
    }
    a
}

/// `A X + X Aᵀ = −I₆` for the coupled system.
pub fn example4_lyapunov() -> SylvesterProblem {
    SylvesterProblem::lyapunov(example4_system(), -Matrix::identity(6, 6)).expect("fixture shapes agree")
}

/// Printed four-decimal solution of the coupled-system Lyapunov equation.
pub fn example4_p_star() -> Matrix {
    from_rows(&[
        vec![0.2278, 0.1343, 0.1176, 0.1690, 0.0744, -0.0009],
        vec![0.1343, 0.3170, 0.0990, 0.2713, 0.0694, -0.0068],
        vec![0.1176, 0.0990, 0.1529, 0.1360, 0.0819, 0.0040],
        vec![0.1690, 0.2713, 0.1360, 0.4106, 0.1067, 0.0278],
        vec![0.0744, 0.0694, 0.0819, 0.1069, 0.1660, -0.0021],
        vec![-0.0009, -0.0068, 0.0040, 0.0278, -0.0021, 0.1190],
    ])
    .expect("rectangular")
}

/// Laplacian of the three-node path linking the subsystems.
pub fn example4_laplacian() -> Matrix {
    from_rows(&[vec![1.0, -1.0, 0.0], vec![-1.0, 2.0, -1.0], vec![0.0, -1.0, 1.0]]).expect("rectangular")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgraph::NetworkGraph;

    #[test]
    fn example4_laplacian_matches_path() {
        assert_eq!(NetworkGraph::path(3).unwrap().laplacian(), example4_laplacian());
    }

    #[test]
    fn example4_a_is_hurwitz_blocks() {
        let a = example4_system();
        assert_eq!(a[(0, 0)], -5.0);
        assert_eq!(a[(0, 3)], 1.0);
        assert_eq!(a[(3, 5)], 4.0);
        assert_eq!(a[(5, 3)], -1.0);
        assert!(a.complex_eigenvalues().iter().all(|z| z.re < 0.0));
    }
}
