//! Shared fixtures for the criterion benchmarks.

use gmnar_core::netgen::NetworkKind;
use gmnar_core::{simulate_gmnar, SimConfig, Simulation};

/// Preset 1 on an SBM network.
pub fn fixture(n1: usize, n2: usize, t: usize) -> Simulation {
    simulate_gmnar(&SimConfig::preset(1, n1, n2, t, NetworkKind::sbm(), 7)).expect("preset 1 simulates")
}
