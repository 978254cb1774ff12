//! Reference answers computed directly from the vectorized equation,
//! independent of any flow.

use crate::densela::{pinv, sym_eig_desc, unvec, vec, Matrix, Vector};
use crate::error::{Error, Result};
use crate::partition::{consistency_check, NodeEquation, SolvabilityCase, SylvesterProblem, CONSISTENCY_TOL};

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub x_star: Matrix,
    pub case: SolvabilityCase,
    /// `‖H vec(X*) − c‖`.
    pub residual: f64,
    pub is_min_norm: bool,
}

/// `X* = unvec(H† c)`. For Case III this is the min-norm least-squares
/// minimizer and `residual` is nonzero.
pub fn direct_solve(p: &SylvesterProblem) -> OracleSolution {
    let h = p.operator();
    let c = p.rhs();
    let x = pinv(&h) * &c;
    let residual = (&h * &x - &c).norm();
    OracleSolution {
        x_star: unvec(&x, p.n(), p.m()).expect("H has n·m columns"),
        case: consistency_check(p).case,
        residual,
        is_min_norm: true,
    }
}

/// `x_LS = H† c`, the min-norm minimizer of `Σᵢ ‖Hᵢ x − cᵢ‖²`.
pub fn least_squares_reference(p: &SylvesterProblem) -> Vector {
    pinv(&p.operator()) * p.rhs()
}

/// Stacked least-squares solution for arbitrary node equations.
pub fn stacked_least_squares(eqs: &[NodeEquation]) -> Result<Vector> {
    let (h, c) = stack(eqs)?;
    Ok(pinv(&h) * c)
}

fn stack(eqs: &[NodeEquation]) -> Result<(Matrix, Vector)> {
    let Some(first) = eqs.first() else {
        return Err(Error::Dimension("no node equations".into()));
    };
    let d = first.dim();
    if let Some(e) = eqs.iter().find(|e| e.dim() != d) {
        return Err(Error::Dimension(format!(
            "node {} has unknown dimension {}, expected {d}",
            e.node_id,
            e.dim()
        )));
    }
    let rows = eqs.iter().map(|e| e.h.nrows()).sum();
    let mut h = Matrix::zeros(rows, d);
    let mut c = Vector::zeros(rows);
    let mut r = 0;
    for e in eqs {
        h.view_mut((r, 0), e.h.shape()).copy_from(&e.h);
        c.rows_mut(r, e.c.len()).copy_from(&e.c);
        r += e.h.nrows();
    }
    Ok((h, c))
}

/// Projector onto `∩ᵢ Eᵢ`, returned as `(I − H†H, H†c)` of the stacked system.
pub fn intersection_projector(eqs: &[NodeEquation]) -> Result<(Matrix, Vector)> {
    let (h, c) = stack(eqs)?;
    let hp = pinv(&h);
    let offset = &hp * &c;
    if (&h * &offset - &c).norm() > CONSISTENCY_TOL * (1.0 + c.norm()) {
        return Err(Error::Inapplicable(
            "node equations have no common solution; the consensus limit is undefined".into(),
        ));
    }
    let d = h.ncols();
    Ok((Matrix::identity(d, d) - &hp * &h, offset))
}

/// The limit of the consensus + projection flow from `init`:
/// `(1/N) Σᵢ 𝒫_{∩E}(xᵢ(0))`.
pub fn flow_limit(eqs: &[NodeEquation], init: &[Vector]) -> Result<Vector> {
    if init.len() != eqs.len() {
        return Err(Error::Dimension(format!(
            "{} initial states for {} nodes",
            init.len(),
            eqs.len()
        )));
    }
    let (lin, offset) = intersection_projector(eqs)?;
    let mut mean = Vector::zeros(offset.len());
    for x in init {
        if x.len() != offset.len() {
            return Err(Error::Dimension(format!(
                "initial state of length {}, expected {}",
                x.len(),
                offset.len()
            )));
        }
        mean += &lin * x + &offset;
    }
    Ok(mean / init.len() as f64)
}

/// Smallest eigenvalue of the symmetric part exceeds `1e-9 · (1 + ‖M‖_F)`.
pub fn positive_definite_check(m: &Matrix) -> bool {
    if !m.is_square() || m.is_empty() {
        return false;
    }
    let sym = (m + m.transpose()) * 0.5;
    let ev = sym_eig_desc(&sym).expect("symmetrized input");
    ev[ev.len() - 1] > 1e-9 * (1.0 + m.norm())
}

/// `vec(X*)` as a flat reference vector.
pub fn reference_vector(sol: &OracleSolution) -> Vector {
    vec(&sol.x_star)
}
