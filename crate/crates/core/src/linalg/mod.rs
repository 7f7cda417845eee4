//! Prime-field arithmetic, rank and the receiver decodability test.

mod echelon;
mod field;
mod store;

pub use echelon::{rank, Echelon};
pub use field::FieldSpec;
pub use store::{decodable, decode_own, project_out_known, DecodeTracker, Equation, EquationStore};
