//! Evaluation metrics: word error rate, semantic similarity scores,
//! and slot-filling / intent accuracy.

pub mod semantic;
pub mod slu;
pub mod wer;
