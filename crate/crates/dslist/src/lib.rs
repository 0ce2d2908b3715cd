//! List decoding for distance-amplified binary codes built on double samplers.
//!
//! A double sampler is a three-layer set system `V2 -> V1 -> V0` over the
//! coordinates of a base code. Encoding a word `g` writes `g|S` on every
//! `S` in `V1`. Decoding recovers every base codeword whose encoding agrees
//! with a received word on an `epsilon` fraction of `V1`.
//!
//! The decoder runs in stages:
//!
//! 1. [`local_lists`] decodes each `T` in `V2` to a short list of local words;
//! 2. [`ug_instance`] stitches the lists into a unique-games instance over the
//!    two-step walk on `V2`;
//! 3. [`expander`] prunes each radius group to an induced expander;
//! 4. [`ug_solver`] peels off assignments with an SDP relaxation and rounding;
//! 5. [`pipeline`] reads each assignment back as a word and unique-decodes it.

pub mod bits;
pub mod codes;
pub mod error;
pub mod expander;
pub mod formats;
pub mod graph;
pub mod local_lists;
pub mod pipeline;
pub mod rng;
pub mod sampler;
pub mod ug_instance;
pub mod ug_solver;

pub use error::{Error, Result};
