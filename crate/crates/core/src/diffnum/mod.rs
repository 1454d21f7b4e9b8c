//! Dense double-precision tensors with a define-by-run gradient tape and
//! an Adam optimizer.
//!
//! ```
//! use micrograph::diffnum::{Tape, Tensor};
//!
//! let mut tape = Tape::new();
//! let x = tape.leaf(Tensor::from_rows(&[vec![-1.0, 2.0]]).unwrap());
//! let r = tape.relu(x).unwrap();
//! let loss = tape.sum(r).unwrap();
//! let grads = tape.backward(loss).unwrap();
//! assert_eq!(grads.get(x).unwrap().data(), &[0.0, 1.0]);
//! ```

mod adam;
mod tape;
mod tensor;

pub use adam::{adam_step, AdamState};
pub use tape::{Gradients, Tape, Var};
pub use tensor::{SparseRows, Tensor, ZERO_NORM};
