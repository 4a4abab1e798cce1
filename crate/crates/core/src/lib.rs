//! Software model of a single-pixel tactile skin.
//!
//! Each taxel of an R x C array drives its piezoresistive element with a
//! pseudorandom bipolar voltage from its own LCG. A single inverting summer
//! adds all taxel currents, so every clock tick yields one random projection
//! `y_i = -R_f * sum_k V_ik C_k` of the conductance image. Frames are
//! recovered with OMP over a K-SVD dictionary and then classified, scored
//! and localized.
//!
//! Module map:
//!
//! * [`tactile`]: grid geometry, frames, pressure to conductance model
//! * [`firmware`]: LCG weight generator and the sensing matrix
//! * [`frontend`]: summing amplifier, ADC and clocked acquisition
//! * [`recovery`]: OMP, frame reconstruction, progressive reconstruction
//! * [`dictionary`]: corpus filtering and K-SVD
//! * [`perception`]: classification, voting, support scoring, localization
//! * [`scenarios`]: synthetic objects, press and bounce events, raster baseline
//! * [`io`]: file formats
//! * [`experiment`]: config-driven studies behind the `spts` binary

// `!(x > 0.0)` style guards are used on purpose so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dictionary;
pub mod error;
pub mod experiment;
pub mod firmware;
pub mod frontend;
pub mod io;
pub mod perception;
pub mod recovery;
pub mod scenarios;
pub mod tactile;

pub use error::{Error, Result};
