//! Event-driven simulation of the continuous-time chain.
//!
//! Total event rate is `lambda + us + mu * n` where `n` counts every
//! transient peer. Dwell deadlines sit in a min-heap; when one falls before
//! the next drawn event the deadline is processed and the draw discarded,
//! which is exact because the competing clocks are memoryless.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;

use crate::config::{Protocol, ScenarioConfig};
use crate::error::Result;
use crate::metrics::{MetricsSample, RngProvenance, RunResult, SojournRecord};
use crate::model::{Completion, NetworkState, PeerId, PieceProfile, TransferEffect};
use crate::protocols::{waiting_on_complete, OutcomeReason, Policy, PolicyOutcome};

/// Seeded ChaCha8 generator on an independent stream.
#[derive(Clone, Debug)]
pub struct RngStream {
    rng: ChaCha8Rng,
    seed: u64,
    stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng, seed, stream }
    }

    pub fn provenance(&self) -> RngProvenance {
        RngProvenance {
            seed: self.seed,
            stream: self.stream,
        }
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EventKind {
    Arrival,
    SeedContact,
    PeerContact(PeerId),
    DwellExpiry(PeerId),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Event {
    pub kind: EventKind,
    pub t: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Deadline(f64, PeerId);

impl Eq for Deadline {}

impl PartialOrd for Deadline {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Deadline {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

/// Hooks called by [`run_scenario`].
pub trait Observer {
    fn on_event(&mut self, _event: &Event, _outcome: Option<&PolicyOutcome>, _state: &NetworkState) {}
    fn on_departure(&mut self, _record: &SojournRecord) {}
}

/// The chain plus its protocol and pending dwell deadlines.
pub struct Simulator {
    pub state: NetworkState,
    pub policy: Policy,
    lambda: f64,
    mu: f64,
    us: f64,
    dwell: BinaryHeap<Reverse<Deadline>>,
    rng: RngStream,
    events: u64,
}

/// What one [`Simulator::step`] did.
#[derive(Clone, Debug)]
pub struct StepReport {
    pub event: Event,
    pub outcome: Option<PolicyOutcome>,
    pub departed: Option<SojournRecord>,
}

impl Simulator {
    pub fn new(config: &ScenarioConfig, rng: RngStream) -> Result<Self> {
        config.validate()?;
        let mut sim = Self {
            state: NetworkState::new(config.k),
            policy: Policy::new(config.protocol, config.m),
            lambda: config.lambda,
            mu: config.mu,
            us: config.us,
            dwell: BinaryHeap::new(),
            rng,
            events: 0,
        };
        for p in config.init.profiles(config.k)? {
            // Complete initial peers dwell under waiting and are dropped otherwise.
            let complete = p.is_complete();
            if complete && config.protocol != Protocol::Waiting {
                continue;
            }
            let id = sim.state.add_peer(p, 0.0);
            sim.policy.on_arrival(id);
            if complete {
                let d = waiting_on_complete(0.0, sim.mu, &mut sim.rng);
                sim.state.peer_mut(id).expect("just added").dwell_deadline = Some(d);
                sim.dwell.push(Reverse(Deadline(d, id)));
            }
        }
        Ok(sim)
    }

    pub fn events(&self) -> u64 {
        self.events
    }

    pub fn total_rate(&self) -> f64 {
        self.lambda + self.us + self.mu * self.state.population() as f64
    }

    /// Draw the next event without applying it.
    pub fn next_event(&mut self) -> Event {
        let rate = self.total_rate();
        let gap = Exp::new(rate).expect("positive rate").sample(&mut self.rng);
        let t = self.state.t + gap;
        if let Some(Reverse(Deadline(d, id))) = self.dwell.peek().copied() {
            if d <= t {
                return Event {
                    kind: EventKind::DwellExpiry(id),
                    t: d,
                };
            }
        }
        let u = self.rng.random::<f64>() * rate;
        let kind = if u < self.lambda {
            EventKind::Arrival
        } else if u < self.lambda + self.us || self.state.is_empty() {
            EventKind::SeedContact
        } else {
            EventKind::PeerContact(self.state.random_peer(&mut self.rng).expect("non-empty"))
        };
        Event { kind, t }
    }

    /// Apply `event`, advancing the clock to its time.
    pub fn dispatch(&mut self, event: Event) -> StepReport {
        self.state.t = event.t;
        self.events += 1;
        let mut report = StepReport {
            event,
            outcome: None,
            departed: None,
        };
        match event.kind {
            EventKind::Arrival => {
                let id = self.state.add_peer(PieceProfile::empty(self.state.k()), event.t);
                self.policy.on_arrival(id);
            }
            EventKind::DwellExpiry(id) => {
                self.dwell.pop();
                report.departed = Some(self.state.remove_peer(id).expect("dweller present"));
            }
            EventKind::SeedContact => {
                let outcome = self.policy.seed_contact(&self.state, &mut self.rng);
                report.departed = self.apply(&outcome);
                report.outcome = Some(outcome);
            }
            EventKind::PeerContact(actor) => {
                let outcome = self.policy.peer_contact(actor, &mut self.state, &mut self.rng);
                report.departed = self.apply(&outcome);
                report.outcome = Some(outcome);
            }
        }
        report
    }

    pub fn step(&mut self) -> StepReport {
        let e = self.next_event();
        self.dispatch(e)
    }

    fn apply(&mut self, outcome: &PolicyOutcome) -> Option<SojournRecord> {
        let tr = outcome.transfer.as_ref()?;
        debug_assert_eq!(outcome.reason, OutcomeReason::Delivered);
        let completion = if self.policy.protocol == Protocol::Waiting {
            Completion::DwellUntil(waiting_on_complete(self.state.t, self.mu, &mut self.rng))
        } else {
            Completion::Depart
        };
        match self
            .state
            .apply_transfer(tr.from, tr.to, tr.piece, completion)
            .expect("protocols only propose useful transfers")
        {
            TransferEffect::Stayed => None,
            TransferEffect::Departed(rec) => Some(rec),
            TransferEffect::Dwelling { deadline } => {
                self.dwell.push(Reverse(Deadline(deadline, tr.to)));
                None
            }
        }
    }
}

/// Run one replication on stream `stream` of the configured seed.
pub fn run_scenario(
    config: &ScenarioConfig,
    stream: u64,
    observers: &mut [&mut dyn Observer],
) -> Result<RunResult> {
    let rng = RngStream::new(config.rng_seed, stream);
    let provenance = rng.provenance();
    let mut sim = Simulator::new(config, rng)?;
    let dt = config.sample_dt;
    let last_sample = (config.horizon / dt + 1e-9).floor() as u64;
    let mut next_sample = 0u64;
    let mut samples = Vec::with_capacity(last_sample as usize + 1);
    let mut sojourns = Vec::new();
    let mut counted = 0usize;
    let mut exploded = false;

    'run: loop {
        let event = sim.next_event();
        while next_sample <= last_sample && (next_sample as f64) * dt < event.t {
            samples.push(MetricsSample::capture(next_sample as f64 * dt, &sim.state));
            next_sample += 1;
        }
        if event.t > config.horizon {
            sim.state.t = config.horizon;
            break;
        }
        let report = sim.dispatch(event);
        for o in observers.iter_mut() {
            o.on_event(&report.event, report.outcome.as_ref(), &sim.state);
        }
        if let Some(rec) = report.departed {
            for o in observers.iter_mut() {
                o.on_departure(&rec);
            }
            if rec.t_depart >= config.warmup {
                counted += 1;
            }
            sojourns.push(rec);
            if config.stop_after_departures.is_some_and(|n| counted >= n) {
                break 'run;
            }
        }
        if sim.state.population() >= config.population_cap {
            exploded = true;
            break;
        }
    }

    Ok(RunResult {
        samples,
        sojourns,
        exploded,
        provenance,
        events: sim.events(),
        final_t: sim.state.t,
    })
}

/// `config.replications` independent runs on streams `0..n`, in stream order.
pub fn run_replications(config: &ScenarioConfig) -> Result<Vec<RunResult>> {
    config.validate()?;
    (0..config.replications as u64)
        .into_par_iter()
        .map(|s| run_scenario(config, s, &mut []))
        .collect()
}
