//! Minimal reverse-mode differentiation engine plus the loss helpers used
//! for contrastive training.
//!
//! [`tensor`] holds the dense row-major [`Tensor`] type, [`tape`] the
//! recording/backprop machinery, [`nn`] the LSTM and attention layers, and
//! [`optim`] the Adam optimizer and cyclical learning-rate schedule.

pub mod nn;
pub mod optim;
pub mod tape;
pub mod tensor;

pub use tape::{Tape, Var};
pub use tensor::{matmul, transpose, Scalar, Tensor};

use crate::error::{Error, Result};

/// Pairwise cosine similarities between the rows of two matrices.
///
/// `a` is `n×d`, `b` is `m×d`; the result is `n×m` with entry `(i, j)` the
/// cosine of `a`'s row `i` and `b`'s row `j`. Rows with zero norm are
/// rejected because the cosine is undefined there.
pub fn cosine_sim_matrix<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>) -> Result<Tensor<S>> {
    if a.ndim() != 2 || b.ndim() != 2 || a.cols() != b.cols() {
        return Err(Error::Shape(format!(
            "cosine_sim_matrix: incompatible shapes {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let norms = |t: &Tensor<S>, name: &str| -> Result<Vec<S>> {
        (0..t.rows())
            .map(|i| {
                let n = t.row(i).iter().map(|&v| v * v).sum::<S>().sqrt();
                if n <= S::zero() {
                    Err(Error::Eval(format!(
                        "cosine_sim_matrix: {name} row {i} has zero norm"
                    )))
                } else {
                    Ok(n)
                }
            })
            .collect()
    };
    let na = norms(a, "left")?;
    let nb = norms(b, "right")?;

    let mut out = Tensor::zeros(vec![a.rows(), b.rows()]);
    #[allow(clippy::needless_range_loop)]
    for i in 0..a.rows() {
        for j in 0..b.rows() {
            let dot: S = a.row(i).iter().zip(b.row(j)).map(|(&x, &y)| x * y).sum();
            *out.at2_mut(i, j) = dot / (na[i] * nb[j]);
        }
    }
    Ok(out)
}

/// Bidirectional max-margin ranking loss over a square similarity matrix,
/// without recording to a tape. See [`Tape::hinge_loss`] for the formula.
pub fn batch_hinge_loss<S: Scalar>(s: &Tensor<S>, margin: S) -> Result<S> {
    tape::hinge_loss_value(s, margin)
}
