//! Detection of striped patterns in crossing flows of pedestrians.
//!
//! Positions of two groups are fitted with an oriented periodic wave, a 2D
//! sinusoid or a 2D square wave, whose crests should hold one group and
//! whose troughs the other. The fit maximises a group-contrast objective
//! with either a Nelder-Mead simplex or simulated annealing, and the
//! [`stats`] module compares the four resulting strategies.
//!
//! ```
//! use stripefit::model_io::{Frame, Point};
//! use stripefit::waveform::{objective, WaveKind, WaveParams};
//!
//! let frame = Frame::new(0.0, vec![Point::new(1.0, 0.0)], vec![Point::new(3.0, 0.0)]);
//! let c = objective(WaveKind::Square, &frame, WaveParams::new(90.0, 4.0, 0.0)).unwrap();
//! assert_eq!(c, 2.0);
//! ```

pub mod cli;
pub mod dsp;
pub mod error;
pub mod model_io;
pub mod optim;
pub mod patternfit;
pub mod report;
pub mod rng;
pub mod stats;
pub mod synth;
pub mod waveform;

pub use error::{Error, Result};
