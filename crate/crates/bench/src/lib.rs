//! Shared fixtures for the benchmarks.

use swarmlab_core::{InitSpec, Protocol, ScenarioConfig};

/// A growing unstructured swarm with a few thousand peers by the horizon.
pub fn unstructured_scenario(horizon: f64) -> ScenarioConfig {
    ScenarioConfig {
        protocol: Protocol::Unstructured,
        k: 2,
        lambda: 4.0,
        us: 2.0,
        mu: 1.0,
        init: InitSpec::OneClub(500),
        horizon,
        replications: 1,
        ..ScenarioConfig::default()
    }
}

/// Group suppression on a larger file.
pub fn gs_scenario(k: usize, horizon: f64) -> ScenarioConfig {
    ScenarioConfig {
        protocol: Protocol::Gs,
        k,
        lambda: 12.0,
        ..unstructured_scenario(horizon)
    }
}
