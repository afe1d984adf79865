// Each chapter of the book is a module here so that `cargo test` runs its
// code blocks as doctests. One module per chapter keeps failures traceable
// to their file.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/waveforms.md")]
pub mod waveforms {}
#[doc = include_str!("../../../book/src/optimizers.md")]
pub mod optimizers {}
#[doc = include_str!("../../../book/src/filtering.md")]
pub mod filtering {}
#[doc = include_str!("../../../book/src/synthetic.md")]
pub mod synthetic {}
#[doc = include_str!("../../../book/src/statistics.md")]
pub mod statistics {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
