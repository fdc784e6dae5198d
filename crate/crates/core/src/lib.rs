//! Statistical simulation of database-free chip authentication built on
//! metal-oxide-metal capacitor mismatch, read out through a successive-
//! approximation ADC whose MSB capacitor array doubles as the sensor.
//!
//! The library models the full chain:
//!
//! * [`process`] — fabrication: per-chip unit-capacitor arrays drawn from a
//!   mismatch distribution, with temperature scaling and seed lineage.
//! * [`ler`] — a line-edge-roughness geometry model explaining where unit
//!   mismatch comes from and how it scales with area and edge correlation.
//! * [`frontend`] — the comparator and the switchable series offset
//!   capacitor that turns the converter into a mismatch prober.
//! * [`adc`] — the monotonic-switching successive-approximation converter
//!   (normal conversion mode, untouched by authentication).
//! * [`signature`] — extraction of the per-chip signature: how many unit
//!   pairs flip the comparator at each probe offset, majority-voted over
//!   repeated comparisons.
//! * [`auth`] — enrollment cards (average trace, spread, weights, distance
//!   threshold) and the accept/reject decision.
//! * [`stats`] — acceptance-window failure rates (analytic, quadrature and
//!   Monte Carlo), window optimization, and the experiment sweeps behind
//!   array sizing, weighting, temperature and offset sensitivity.
//! * [`config`] / [`report`] / [`harness`] — TOML configuration with a
//!   canonical hash, byte-stable CSV artifacts, and preset pipelines.
//!
//! Every random draw is addressed by an explicit stream key and counter
//! ([`rng`]), so results are independent of thread count and schedule, and
//! any single chip or comparison can be recomputed in isolation.

pub mod adc;
pub mod auth;
pub mod config;
pub mod error;
pub mod frontend;
pub mod harness;
pub mod ler;
pub mod process;
pub mod report;
pub mod rng;
pub mod signature;
pub mod stats;

pub use adc::{convert, AdcConfig, ConversionRecord};
pub use auth::{authenticate, enroll, ACCard, AuthDecision};
pub use config::{default_authentic_process, ExperimentConfig};
pub use error::{Error, Result};
pub use frontend::{ComparatorModel, OffsetCapBank};
pub use harness::{run_preset, Preset};
pub use process::{sample_chip, ChipInstance, FabProcess, Geometry};
pub use signature::{extract_signature, CofGrid, SignatureTrace};
