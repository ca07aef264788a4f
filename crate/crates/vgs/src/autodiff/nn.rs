//! Recurrent and pooling layers assembled from tape primitives.
//!
//! Everything here operates on [`Var`] handles belonging to one [`Tape`], so
//! gradients flow through these layers with no extra bookkeeping.

use crate::autodiff::tape::{Tape, Var};
use crate::autodiff::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Weight handles for one LSTM direction.
///
/// `w_ih` is `input×4H`, `w_hh` is `H×4H`, `bias` has length `4H`. The four
/// gate blocks are packed in the column order input, forget, cell, output.
#[derive(Copy, Clone)]
pub struct LstmDirVars {
    pub w_ih: Var,
    pub w_hh: Var,
    pub bias: Var,
}

/// One LSTM step. `x_t` is `1×input`, `h_prev` and `c_prev` are `1×H`.
/// Returns the new `(h, c)`.
pub fn lstm_cell<S: Scalar>(
    tape: &Tape<S>,
    x_t: Var,
    h_prev: Var,
    c_prev: Var,
    w: &LstmDirVars,
    hidden: usize,
) -> Result<(Var, Var)> {
    let from_x = tape.matmul(x_t, w.w_ih)?;
    let from_h = tape.matmul(h_prev, w.w_hh)?;
    let gates = tape.add_row_broadcast(tape.add(from_x, from_h)?, w.bias)?;
    if tape.shape(gates) != [1, 4 * hidden] {
        return Err(Error::Shape(format!(
            "lstm_cell: gate block has shape {:?}, expected [1, {}]",
            tape.shape(gates),
            4 * hidden
        )));
    }

    let i = tape.sigmoid(tape.slice_cols(gates, 0, hidden)?);
    let f = tape.sigmoid(tape.slice_cols(gates, hidden, 2 * hidden)?);
    let g = tape.tanh(tape.slice_cols(gates, 2 * hidden, 3 * hidden)?);
    let o = tape.sigmoid(tape.slice_cols(gates, 3 * hidden, 4 * hidden)?);

    let c = tape.add(tape.mul(f, c_prev)?, tape.mul(i, g)?)?;
    let h = tape.mul(o, tape.tanh(c))?;
    Ok((h, c))
}

/// Runs one direction over `xs` (`T×input`). With `reverse` the recurrence
/// consumes frames last to first, but output row `t` always corresponds to
/// input frame `t`.
pub fn lstm_direction<S: Scalar>(
    tape: &Tape<S>,
    xs: Var,
    w: &LstmDirVars,
    hidden: usize,
    reverse: bool,
) -> Result<Var> {
    let shape = tape.shape(xs);
    if shape.len() != 2 {
        return Err(Error::Shape(format!(
            "lstm_direction expects T×input, got {shape:?}"
        )));
    }
    let t_len = shape[0];

    let mut h = tape.leaf(Tensor::zeros(vec![1, hidden]));
    let mut c = tape.leaf(Tensor::zeros(vec![1, hidden]));
    let mut outputs = vec![None; t_len];
    for step in 0..t_len {
        let t = if reverse { t_len - 1 - step } else { step };
        let x_t = tape.slice_rows(xs, t, t + 1)?;
        let (h_new, c_new) = lstm_cell(tape, x_t, h, c, w, hidden)?;
        h = h_new;
        c = c_new;
        outputs[t] = Some(h);
    }
    let rows: Vec<Var> = outputs.into_iter().map(|o| o.expect("all steps filled")).collect();
    tape.stack_rows(&rows)
}

/// Bidirectional layer: forward and backward passes concatenated per frame,
/// giving `T×2H`.
pub fn bilstm_layer<S: Scalar>(
    tape: &Tape<S>,
    xs: Var,
    forward: &LstmDirVars,
    backward: &LstmDirVars,
    hidden: usize,
) -> Result<Var> {
    let fwd = lstm_direction(tape, xs, forward, hidden, false)?;
    let bwd = lstm_direction(tape, xs, backward, hidden, true)?;
    tape.concat_cols(fwd, bwd)
}

/// Additive attention pooling over frames.
///
/// Scores each row of `h` (`T×D`) with `v·tanh(h_t·W + b)`, softmaxes the
/// scores over time and returns the weighted sum (`1×D`) plus the weights
/// (`T×1`) for inspection.
pub fn attention_pool<S: Scalar>(
    tape: &Tape<S>,
    h: Var,
    w: Var,
    b: Var,
    v: Var,
) -> Result<(Var, Var)> {
    let projected = tape.tanh(tape.add_row_broadcast(tape.matmul(h, w)?, b)?);
    let scores = tape.matmul(projected, v)?;
    if tape.shape(scores)[1] != 1 {
        return Err(Error::Shape(format!(
            "attention_pool: scorer v must map to one column, got {:?}",
            tape.shape(scores)
        )));
    }
    let weights = tape.softmax(scores)?;
    let pooled = tape.matmul(tape.transpose(weights)?, h)?;
    Ok((pooled, weights))
}
