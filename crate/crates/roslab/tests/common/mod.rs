#![allow(dead_code)]

use roslab::primitives::DistributionSpec;
use roslab::simulator::{InitialQueue, InitialServer, ServiceSpecs, SystemConfig};

pub fn exp(rate: f64) -> DistributionSpec {
    DistributionSpec::exponential(rate)
}

/// J=2, K=2, ρ=1.3 overloaded system with exponential laws.
pub fn reference(horizon: f64) -> SystemConfig {
    SystemConfig {
        classes: 2,
        servers: 2,
        weights: vec![0.6, 0.4],
        interarrival: vec![exp(1.6), exp(1.0)],
        first_arrival: vec![],
        service: ServiceSpecs::PerClass(vec![exp(1.0); 2]),
        patience: vec![exp(0.5), exp(0.4)],
        initial_queues: vec![
            InitialQueue::Drawn { mass: 0.5, patience: exp(0.5) },
            InitialQueue::Drawn { mass: 0.25, patience: exp(0.4) },
        ],
        initial_servers: vec![
            InitialServer::Busy { residual: exp(1.0), class: 0 },
            InitialServer::Busy { residual: exp(1.0), class: 1 },
        ],
        horizon,
        seed: 7,
    }
}

/// Single class, single server.
pub fn single(arrival: f64, service: f64, patience: f64, horizon: f64) -> SystemConfig {
    SystemConfig {
        classes: 1,
        servers: 1,
        weights: vec![1.0],
        interarrival: vec![exp(arrival)],
        first_arrival: vec![],
        service: ServiceSpecs::PerClass(vec![exp(service)]),
        patience: vec![exp(patience)],
        initial_queues: vec![],
        initial_servers: vec![],
        horizon,
        seed: 1,
    }
}

/// Two identical classes sharing two servers, overloaded.
pub fn symmetric(horizon: f64) -> SystemConfig {
    SystemConfig {
        classes: 2,
        servers: 2,
        weights: vec![0.5, 0.5],
        interarrival: vec![exp(1.5), exp(1.5)],
        first_arrival: vec![],
        service: ServiceSpecs::PerClass(vec![exp(1.0); 2]),
        patience: vec![exp(1.0), exp(1.0)],
        initial_queues: vec![],
        initial_servers: vec![],
        horizon,
        seed: 3,
    }
}
