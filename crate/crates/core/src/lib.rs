// `!(x > 0.0)` style checks are used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod cosine;
pub mod error;
pub mod excitation;
pub mod ffvn;
pub mod fvn;
pub mod hiding;
pub mod io;
pub mod rng;
pub mod spectrum;
pub mod velvet;

pub use analysis::AudioBuffer;
pub use cosine::{phase_window, sidelobe_metrics, unit_allpass_response, CosineSeries};
pub use error::{FvnError, Result};
pub use fvn::{FvnParams, FvnUnit, PhaseSpec};
