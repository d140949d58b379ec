//! Indoor visible-light communication (VLC) simulator with mirror-based
//! optical reconfigurable intelligent surfaces (ORIS) and angle-diversity
//! receivers (ADR).
//!
//! The crate is organized bottom-up:
//!
//! - [`geometry`] — vectors, photodiode orientations, ADR layouts, and
//!   segment/cylinder blockage tests.
//! - [`scenario`] — immutable scene construction: room, APs, ORIS crown
//!   molding, diffuse wall grid, users, and blockage indicators.
//! - [`channel`] — Lambertian LoS/NLoS channel gains, DCO-OFDM link budget,
//!   SNR, select-best combining, and the IM/DD rate lower bound.
//! - [`allocation`] — max-min optical-SNR assignment of ORIS elements to
//!   (AP, photodiode, user) triples: brute-force oracle, exact
//!   branch-and-bound, and a greedy heuristic.
//! - [`experiments`] — seeded Monte Carlo runners (SNR CDFs, ORIS usage,
//!   SNR heat maps, sum rate) with CSV/JSON output.
//! - [`config`] — JSON run configuration with physical defaults.

pub mod allocation;
pub mod channel;
pub mod config;
pub mod experiments;
pub mod geometry;
pub mod scenario;
