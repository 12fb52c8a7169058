//! Moment-matching model reduction for continuous-time linear switched
//! systems (LSS).
//!
//! The crate is organised bottom-up:
//!
//! * [`linalg`]: orthonormal ranges, pseudo-inverses and the matrix exponential.
//! * [`word`] and [`lss`]: mode words, the switched system itself and its
//!   Markov parameters.
//! * [`subspace`] and [`moment`]: partial reachability / unobservability
//!   spaces and the N / 2N moment-matching reducer.
//! * [`automata`], [`selection`], [`krylov`] and [`nice`]: nice selections,
//!   automaton-indexed Krylov spaces and the selection-based reducers,
//!   including exact matching along a fixed mode sequence.
//! * [`simulate`] and [`experiment`]: sampled simulation, random switching
//!   signals, the best-fit-rate metric and the multi-seed comparison harness.
//!
//! All numerical code is generic over [`Real`] (`f32` or `f64`); the
//! `*64` / `*32` aliases below fix the scalar.

pub mod automata;
pub mod error;
pub mod experiment;
pub mod krylov;
pub mod linalg;
pub mod lss;
pub mod moment;
pub mod nice;
pub mod scalar;
pub mod selection;
pub mod simulate;
pub mod subspace;
pub mod word;

pub use automata::Ndfa;
pub use error::{Error, Result};
pub use linalg::Basis;
pub use lss::{Lss, MarkovParameter, ModelIssue};
pub use moment::{ReductionMode, ReductionReport};
pub use scalar::Real;
pub use selection::{NiceColumnSelection, NiceRowSelection};
pub use simulate::{SampledSignal, SwitchingSequence};
pub use word::{Mode, Word};

pub type Lss64 = Lss<f64>;
pub type Lss32 = Lss<f32>;
pub type Basis64 = Basis<f64>;
pub type Basis32 = Basis<f32>;
pub type Signal64 = SampledSignal<f64>;
pub type Signal32 = SampledSignal<f32>;
pub type Report64 = ReductionReport<f64>;
pub type Report32 = ReductionReport<f32>;
pub type Matrix64 = nalgebra::DMatrix<f64>;
pub type Matrix32 = nalgebra::DMatrix<f32>;
