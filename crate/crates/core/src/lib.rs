//! Slot-level simulation and drift-plus-penalty control of RIS-aided MIMO
//! uplink offloading, minimizing long-term EMF exposure under service-delay
//! stability.
//!
//! Modules, bottom-up: [`geometry`] and [`channel`] produce per-slot channel
//! realizations, [`codebook`] builds the beam and RIS search sets,
//! [`radio_metrics`] and [`queues`] evaluate a decision, [`optimizer`] picks
//! one per slot, and [`simulator`] strings the slots together.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod codebook;
pub mod config;
pub mod error;
pub mod geometry;
pub mod optimizer;
pub mod queues;
pub mod radio_metrics;
pub mod simulator;

pub use channel::{compose_e2e, compose_pixel, ChannelGenerator, LinkSet, RicianParams, RisProfile, Scene, SlotChannels};
pub use codebook::Codebooks;
pub use config::{Profile, ScenarioConfig};
pub use error::{Error, Result};
pub use geometry::{ArraySpec, Position3D};
pub use optimizer::{Decision, LyapunovConfig, Policy, PolicyKind};
pub use queues::{QueueState, ServiceConfig};
pub use radio_metrics::{PixelSet, RadioConfig};
pub use simulator::{run, RunMetrics, RunOptions, Simulation};
