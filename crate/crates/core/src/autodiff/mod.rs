//! Scalar reverse-mode differentiation for proof rescoring, the
//! entailment loss, and Adam.

mod adam;
mod tape;

pub use adam::{adam_step, AdamConfig, OptimizerState};
pub use tape::{Gradients, NodeId, Op, Tape, TapeError};

/// Default probability clamp used inside the loss.
pub const DEFAULT_CLAMP: (f64, f64) = (1e-6, 1.0 - 1e-6);

/// Records `-log p_correct - log(1 - p_wrong)` as
/// `neg_log(clamp(p_correct) * (1 - clamp(p_wrong)))`.
///
/// A missing side drops its term. Returns `None` when both are missing.
pub fn loss(tape: &mut Tape, p_correct: Option<NodeId>, p_wrong: Option<NodeId>, clamp: (f64, f64)) -> Option<NodeId> {
    let (lo, hi) = clamp;
    let mut factors = Vec::new();
    if let Some(pc) = p_correct {
        factors.push(tape.record(Op::Clamp { lo, hi }, &[pc]).expect("scalar input"));
    }
    if let Some(pw) = p_wrong {
        let c = tape.record(Op::Clamp { lo, hi }, &[pw]).expect("scalar input");
        factors.push(tape.record(Op::OneMinus, &[c]).expect("scalar input"));
    }
    if factors.is_empty() {
        return None;
    }
    let joint = tape.record(Op::Product, &factors).expect("scalar inputs");
    Some(tape.record(Op::NegLog, &[joint]).expect("scalar input"))
}
