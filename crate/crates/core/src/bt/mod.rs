//! Round-based BitTorrent-like swarm.
//!
//! Time advances in ticks; a choking round spans several ticks. Each round
//! admits arrivals, tops up thin neighbour sets from the tracker, recomputes
//! every unchoke set, then runs its ticks: free slots issue rarest-first
//! requests, transfers advance, and peers that complete leave at once.
//! Peer id 0 is the permanent seed.

mod choke;

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::path::Path;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{InitSpec, DEFAULT_POPULATION_CAP};
use crate::engine::RngStream;
use crate::error::{Error, Result};
use crate::metrics::{create, csv_err, RngProvenance};
use crate::model::{GroupHistogram, PeerId, PieceProfile};

pub use choke::{
    gs_filter_slots, leecher_unchoke, local_largest_club, rarest_first_request, seed_unchoke,
    Optimistic, SeedCandidate, SeedState, Unchoke,
};

pub const SEED: PeerId = PeerId(0);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BtConfig {
    pub k: usize,
    pub arrivals_per_round: usize,
    /// Seconds per tick; every other duration is a multiple of it.
    pub tick_secs: u32,
    pub round_secs: u32,
    pub leecher_piece_secs: u32,
    pub seed_piece_secs: u32,
    pub upload_slots: usize,
    /// Pieces a peer may complete per round.
    pub download_cap: usize,
    pub neighbor_max: usize,
    pub tracker_topup_threshold: usize,
    pub tracker_response: usize,
    /// Rounds of received-volume history used to rank uploaders.
    pub history_rounds: usize,
    /// Optimistic and seed keep-round period, in rounds.
    pub optimistic_period: u32,
    /// Seed recency window, seconds.
    pub seed_recency_secs: u32,
    pub horizon_rounds: u64,
    pub init: InitSpec,
    pub gs_enabled: bool,
    pub rng_seed: u64,
    pub replications: usize,
    pub population_cap: usize,
}

impl Default for BtConfig {
    fn default() -> Self {
        Self {
            k: 12,
            arrivals_per_round: 30,
            tick_secs: 2,
            round_secs: 10,
            leecher_piece_secs: 10,
            seed_piece_secs: 2,
            upload_slots: 4,
            download_cap: 40,
            neighbor_max: 50,
            tracker_topup_threshold: 20,
            tracker_response: 40,
            history_rounds: 2,
            optimistic_period: 3,
            seed_recency_secs: 20,
            horizon_rounds: 300,
            init: InitSpec::BtMixed {
                all_but_last: 494,
                only_last: 5,
            },
            gs_enabled: false,
            rng_seed: 1,
            replications: 1,
            population_cap: DEFAULT_POPULATION_CAP,
        }
    }
}

impl BtConfig {
    pub fn validate(&self) -> Result<()> {
        let at_least_one = |key: &str, v: usize| {
            if v == 0 {
                Err(Error::config(key, "must be at least 1"))
            } else {
                Ok(())
            }
        };
        at_least_one("k", self.k)?;
        at_least_one("upload_slots", self.upload_slots)?;
        at_least_one("download_cap", self.download_cap)?;
        at_least_one("neighbor_max", self.neighbor_max)?;
        at_least_one("replications", self.replications)?;
        at_least_one("population_cap", self.population_cap)?;
        at_least_one("optimistic_period", self.optimistic_period as usize)?;
        at_least_one("tick_secs", self.tick_secs as usize)?;
        for (key, v) in [
            ("round_secs", self.round_secs),
            ("leecher_piece_secs", self.leecher_piece_secs),
            ("seed_piece_secs", self.seed_piece_secs),
        ] {
            if v == 0 || v % self.tick_secs != 0 {
                return Err(Error::config(
                    key,
                    format!("must be a positive multiple of tick_secs={}", self.tick_secs),
                ));
            }
        }
        self.init.profiles(self.k)?;
        Ok(())
    }

    fn ticks(&self, secs: u32) -> u32 {
        secs / self.tick_secs
    }

    pub fn round_ticks(&self) -> u32 {
        self.ticks(self.round_secs)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Upload {
    pub target: PeerId,
    pub piece: usize,
    pub ticks_left: u32,
}

#[derive(Clone, Debug)]
pub struct BtPeer {
    pub id: PeerId,
    pub profile: PieceProfile,
    pub neighbors: BTreeSet<PeerId>,
    pub unchoked: Vec<PeerId>,
    backup: VecDeque<PeerId>,
    pub optimistic: Option<Optimistic>,
    /// Pieces received per neighbour; front is the current round.
    received: VecDeque<HashMap<PeerId, u32>>,
    pub uploads: Vec<Upload>,
    /// Pieces requested and not yet delivered.
    pub incoming: PieceProfile,
    pub total_uploaded: u64,
    pub completed_this_round: usize,
    pub arrived_round: u64,
}

impl BtPeer {
    fn new(id: PeerId, profile: PieceProfile, round: u64, history: usize) -> Self {
        let k = profile.k();
        Self {
            id,
            profile,
            neighbors: BTreeSet::new(),
            unchoked: Vec::new(),
            backup: VecDeque::new(),
            optimistic: None,
            received: std::iter::repeat_with(HashMap::new).take(history + 1).collect(),
            uploads: Vec::new(),
            incoming: PieceProfile::empty(k),
            total_uploaded: 0,
            completed_this_round: 0,
            arrived_round: round,
        }
    }

    /// Pieces received from `from` over the finished rounds in the window.
    pub fn received_volume(&self, from: PeerId) -> u64 {
        self.received
            .iter()
            .skip(1)
            .map(|m| m.get(&from).copied().unwrap_or(0) as u64)
            .sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BtRoundRow {
    pub round: u64,
    pub t_seconds: f64,
    pub population: u64,
    pub largest_club_size: u64,
    pub departures_cum: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TransferLog {
    pub from: PeerId,
    pub to: PeerId,
    pub piece: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BtRunResult {
    pub rows: Vec<BtRoundRow>,
    pub exploded: bool,
    pub provenance: RngProvenance,
}

impl BtRunResult {
    pub fn population_series(&self) -> Vec<(f64, f64)> {
        self.rows.iter().map(|r| (r.t_seconds, r.population as f64)).collect()
    }
}

#[derive(Clone)]
pub struct BtSwarm {
    cfg: BtConfig,
    peers: HashMap<PeerId, BtPeer>,
    /// Live ids in ascending order, seed first.
    order: BTreeSet<PeerId>,
    pub seed_state: SeedState,
    hist: GroupHistogram,
    next_id: u64,
    round: u64,
    departures: u64,
    exploded: bool,
    rng: RngStream,
    /// When set, transfers completed in the last round are kept here.
    pub transfer_log: Option<Vec<TransferLog>>,
}

impl BtSwarm {
    pub fn new(cfg: &BtConfig, rng: RngStream) -> Result<Self> {
        cfg.validate()?;
        let mut swarm = Self {
            cfg: cfg.clone(),
            peers: HashMap::new(),
            order: BTreeSet::new(),
            seed_state: SeedState::default(),
            hist: GroupHistogram::new(),
            next_id: 1,
            round: 0,
            departures: 0,
            exploded: false,
            rng,
            transfer_log: None,
        };
        let seed = BtPeer::new(SEED, PieceProfile::full(cfg.k), 0, cfg.history_rounds);
        swarm.peers.insert(SEED, seed);
        swarm.order.insert(SEED);
        for profile in cfg.init.profiles(cfg.k)? {
            swarm.admit(profile);
        }
        Ok(swarm)
    }

    pub fn config(&self) -> &BtConfig {
        &self.cfg
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn now(&self) -> f64 {
        (self.round * self.cfg.round_secs as u64) as f64
    }

    /// Transient peers, seed excluded.
    pub fn population(&self) -> usize {
        self.peers.len() - 1
    }

    pub fn departures(&self) -> u64 {
        self.departures
    }

    pub fn exploded(&self) -> bool {
        self.exploded
    }

    pub fn peer(&self, id: PeerId) -> Option<&BtPeer> {
        self.peers.get(&id)
    }

    pub fn peer_ids(&self) -> impl Iterator<Item = PeerId> + '_ {
        self.order.iter().copied()
    }

    pub fn hist(&self) -> &GroupHistogram {
        &self.hist
    }

    fn admit(&mut self, profile: PieceProfile) -> PeerId {
        let id = PeerId(self.next_id);
        self.next_id += 1;
        if !profile.is_complete() {
            self.hist.add(&profile);
        }
        let peer = BtPeer::new(id, profile, self.round, self.cfg.history_rounds);
        self.peers.insert(id, peer);
        self.order.insert(id);
        self.tracker_sample(id, self.cfg.tracker_response);
        id
    }

    /// Link `requester` to up to `n` uniformly drawn peers that are neither
    /// itself, already neighbours, nor full. Returns the new neighbours.
    pub fn tracker_sample(&mut self, requester: PeerId, n: usize) -> Vec<PeerId> {
        let max = self.cfg.neighbor_max;
        let Some(me) = self.peers.get(&requester) else {
            return Vec::new();
        };
        let want = n.min(max.saturating_sub(me.neighbors.len()));
        if want == 0 {
            return Vec::new();
        }
        let pool: Vec<PeerId> = self
            .order
            .iter()
            .copied()
            .filter(|&id| {
                id != requester
                    && !me.neighbors.contains(&id)
                    && self.peers[&id].neighbors.len() < max
            })
            .collect();
        let take = want.min(pool.len());
        let mut picked: Vec<PeerId> = index::sample(&mut self.rng, pool.len(), take)
            .into_iter()
            .map(|i| pool[i])
            .collect();
        picked.sort();
        for &other in &picked {
            self.peers.get_mut(&other).unwrap().neighbors.insert(requester);
        }
        self.peers.get_mut(&requester).unwrap().neighbors.extend(picked.iter().copied());
        picked
    }

    fn interested(&self, target: PeerId, uploader: PeerId) -> bool {
        match (self.peers.get(&target), self.peers.get(&uploader)) {
            (Some(t), Some(u)) => u.profile.offers_to(&t.profile),
            _ => false,
        }
    }

    fn decide_unchokes(&mut self) {
        let now = self.now();
        let ids: Vec<PeerId> = self.order.iter().copied().collect();
        let regular = self.cfg.upload_slots.saturating_sub(1);
        for &id in &ids {
            let me = &self.peers[&id];
            let cands: Vec<PeerId> = me
                .neighbors
                .iter()
                .copied()
                .filter(|&n| n != SEED && me.profile.offers_to(&self.peers[&n].profile))
                .collect();
            let decision = if id == SEED {
                let cands: Vec<SeedCandidate> = cands
                    .iter()
                    .map(|&n| {
                        let p = &self.peers[&n];
                        SeedCandidate {
                            id: n,
                            pieces: p.profile.count(),
                            uploaded: p.total_uploaded,
                        }
                    })
                    .collect();
                seed_unchoke(
                    &mut self.seed_state,
                    &cands,
                    self.round,
                    now,
                    self.cfg.seed_recency_secs as f64,
                    self.cfg.upload_slots,
                    self.cfg.optimistic_period,
                    self.cfg.gs_enabled,
                    &mut self.rng,
                )
            } else {
                let cands = if self.cfg.gs_enabled
                    && local_largest_club(
                        &me.profile,
                        me.neighbors.iter().map(|n| &self.peers[n].profile),
                    ) {
                    let proposed: Vec<(PeerId, usize)> = cands
                        .iter()
                        .map(|&n| (n, self.peers[&n].profile.count()))
                        .collect();
                    gs_filter_slots(me.profile.count(), &proposed)
                } else {
                    cands
                };
                let mut optimistic = me.optimistic;
                let d = leecher_unchoke(
                    &cands,
                    |n| me.received_volume(n),
                    &mut optimistic,
                    self.round,
                    regular,
                    self.cfg.optimistic_period,
                    &mut self.rng,
                );
                self.peers.get_mut(&id).unwrap().optimistic = optimistic;
                d
            };
            let me = self.peers.get_mut(&id).unwrap();
            me.unchoked = decision.slots;
            me.backup = decision.backup.into();
        }
    }

    /// Drop unchoked peers that left or lost interest and refill from the
    /// ranked backup list.
    fn refresh_slots(&mut self, id: PeerId) {
        let now = self.now();
        let me = &self.peers[&id];
        let keep: Vec<PeerId> = me
            .unchoked
            .iter()
            .copied()
            .filter(|&t| self.interested(t, id))
            .collect();
        if keep.len() == me.unchoked.len() {
            return;
        }
        let mut backup = me.backup.clone();
        let mut slots = keep;
        while slots.len() < self.cfg.upload_slots {
            let Some(t) = backup.pop_front() else { break };
            if self.interested(t, id) {
                slots.push(t);
                if id == SEED {
                    self.seed_state.note(t, now);
                }
            }
        }
        if id == SEED {
            self.seed_state.unchoked = slots.clone();
        }
        let me = self.peers.get_mut(&id).unwrap();
        me.unchoked = slots;
        me.backup = backup;
    }

    fn availability(&self, target: PeerId) -> Vec<u32> {
        let mut a = vec![0u32; self.cfg.k];
        for n in &self.peers[&target].neighbors {
            for p in self.peers[n].profile.pieces() {
                a[p] += 1;
            }
        }
        a
    }

    fn issue_requests(&mut self) {
        let ids: Vec<PeerId> = self.order.iter().copied().collect();
        let mut avail: HashMap<PeerId, Vec<u32>> = HashMap::new();
        for &up in &ids {
            if self.peers[&up].uploads.len() >= self.cfg.upload_slots {
                continue;
            }
            self.refresh_slots(up);
            let piece_ticks = if up == SEED {
                self.cfg.ticks(self.cfg.seed_piece_secs)
            } else {
                self.cfg.ticks(self.cfg.leecher_piece_secs)
            };
            let targets = self.peers[&up].unchoked.clone();
            for t in targets {
                let u = &self.peers[&up];
                if u.uploads.len() >= self.cfg.upload_slots {
                    break;
                }
                if u.uploads.iter().any(|x| x.target == t) {
                    continue;
                }
                let tp = &self.peers[&t];
                if tp.completed_this_round + tp.incoming.count() >= self.cfg.download_cap {
                    continue;
                }
                if !avail.contains_key(&t) {
                    avail.insert(t, self.availability(t));
                }
                let piece = rarest_first_request(
                    &tp.profile,
                    &tp.incoming,
                    &u.profile,
                    &avail[&t],
                    &mut self.rng,
                );
                if let Some(piece) = piece {
                    self.peers.get_mut(&t).unwrap().incoming.insert(piece);
                    self.peers.get_mut(&up).unwrap().uploads.push(Upload {
                        target: t,
                        piece,
                        ticks_left: piece_ticks,
                    });
                }
            }
        }
    }

    fn advance_transfers(&mut self) {
        let ids: Vec<PeerId> = self.order.iter().copied().collect();
        let mut done: Vec<TransferLog> = Vec::new();
        for &up in &ids {
            let u = self.peers.get_mut(&up).unwrap();
            u.uploads.retain_mut(|x| {
                x.ticks_left -= 1;
                if x.ticks_left == 0 {
                    done.push(TransferLog {
                        from: up,
                        to: x.target,
                        piece: x.piece,
                    });
                    false
                } else {
                    true
                }
            });
        }
        let mut finished: BTreeSet<PeerId> = BTreeSet::new();
        for tr in &done {
            self.peers.get_mut(&tr.from).unwrap().total_uploaded += 1;
            let t = self.peers.get_mut(&tr.to).unwrap();
            let before = t.profile.clone();
            t.incoming.remove(tr.piece);
            t.profile.insert(tr.piece);
            t.completed_this_round += 1;
            *t.received[0].entry(tr.from).or_insert(0) += 1;
            let complete = t.profile.is_complete();
            let after = t.profile.clone();
            self.hist.remove(&before);
            if complete {
                finished.insert(tr.to);
            } else {
                self.hist.add(&after);
            }
        }
        if let Some(log) = self.transfer_log.as_mut() {
            log.extend(done);
        }
        for id in finished {
            self.depart(id);
        }
    }

    fn depart(&mut self, id: PeerId) {
        let peer = self.peers.remove(&id).expect("departing peer is present");
        self.order.remove(&id);
        for n in &peer.neighbors {
            self.peers.get_mut(n).unwrap().neighbors.remove(&id);
        }
        for up in &peer.uploads {
            if let Some(t) = self.peers.get_mut(&up.target) {
                t.incoming.remove(up.piece);
            }
        }
        for p in self.peers.values_mut() {
            p.uploads.retain(|x| x.target != id);
        }
        self.departures += 1;
    }

    /// One full choking round. Returns the row recorded at its end.
    pub fn run_round(&mut self) -> BtRoundRow {
        self.begin_round();
        self.finish_round()
    }

    /// Arrivals, tracker top-up and unchoke decisions.
    fn begin_round(&mut self) {
        if let Some(log) = self.transfer_log.as_mut() {
            log.clear();
        }
        for _ in 0..self.cfg.arrivals_per_round {
            self.admit(PieceProfile::empty(self.cfg.k));
        }
        let thin: Vec<PeerId> = self
            .order
            .iter()
            .copied()
            .filter(|id| self.peers[id].neighbors.len() < self.cfg.tracker_topup_threshold)
            .collect();
        for id in thin {
            self.tracker_sample(id, self.cfg.tracker_response);
        }
        for p in self.peers.values_mut() {
            p.received.pop_back();
            p.received.push_front(HashMap::new());
            p.completed_this_round = 0;
        }
        self.decide_unchokes();
    }

    fn finish_round(&mut self) -> BtRoundRow {
        for _ in 0..self.cfg.round_ticks() {
            self.issue_requests();
            self.advance_transfers();
        }
        self.round += 1;
        if self.population() > self.cfg.population_cap {
            self.exploded = true;
        }
        self.row()
    }

    pub fn row(&self) -> BtRoundRow {
        BtRoundRow {
            round: self.round,
            t_seconds: self.now(),
            population: self.population() as u64,
            largest_club_size: self.hist.largest_club_size().unwrap_or(0),
            departures_cum: self.departures,
        }
    }

    /// Structural invariants; returns a description of the first violation.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        for id in &self.order {
            let p = &self.peers[id];
            if p.uploads.len() > self.cfg.upload_slots {
                return Err(format!("{id} has {} uploads", p.uploads.len()));
            }
            if p.completed_this_round > self.cfg.download_cap {
                return Err(format!("{id} completed {} pieces", p.completed_this_round));
            }
            if p.neighbors.len() > self.cfg.neighbor_max {
                return Err(format!("{id} has {} neighbours", p.neighbors.len()));
            }
            for n in &p.neighbors {
                match self.peers.get(n) {
                    Some(q) if q.neighbors.contains(id) => {}
                    _ => return Err(format!("link {id}-{n} is not symmetric")),
                }
            }
            for up in &p.uploads {
                if !p.profile.has(up.piece) {
                    return Err(format!("{id} serves piece {} it lacks", up.piece));
                }
                match self.peers.get(&up.target) {
                    Some(t) if t.incoming.has(up.piece) && !t.profile.has(up.piece) => {}
                    _ => return Err(format!("{id} uploads to {} inconsistently", up.target)),
                }
            }
            if *id != SEED && p.profile.is_complete() {
                return Err(format!("{id} is complete but still present"));
            }
        }
        Ok(())
    }
}

/// Run one replication until the horizon or the population cap.
pub fn run_bt(cfg: &BtConfig, stream: u64) -> Result<BtRunResult> {
    let rng = RngStream::new(cfg.rng_seed, stream);
    let provenance = rng.provenance();
    let mut swarm = BtSwarm::new(cfg, rng)?;
    let mut rows = vec![swarm.row()];
    while swarm.round() < cfg.horizon_rounds && !swarm.exploded() {
        rows.push(swarm.run_round());
    }
    Ok(BtRunResult {
        rows,
        exploded: swarm.exploded(),
        provenance,
    })
}

/// Replications on streams `0..replications`, in stream order.
pub fn run_bt_replications(cfg: &BtConfig) -> Result<Vec<BtRunResult>> {
    cfg.validate()?;
    (0..cfg.replications as u64)
        .into_par_iter()
        .map(|s| run_bt(cfg, s))
        .collect()
}

/// Mean population per round across runs, truncated to the shortest run.
pub fn mean_population(runs: &[BtRunResult]) -> Vec<(f64, f64)> {
    let len = runs.iter().map(|r| r.rows.len()).min().unwrap_or(0);
    (0..len)
        .map(|i| {
            let t = runs[0].rows[i].t_seconds;
            let sum: f64 = runs.iter().map(|r| r.rows[i].population as f64).sum();
            (t, sum / runs.len() as f64)
        })
        .collect()
}

pub const BT_HEADER: [&str; 5] = [
    "round",
    "t_seconds",
    "population",
    "largest_club_size",
    "departures_cum",
];

pub fn write_bt_csv(path: &Path, rows: &[BtRoundRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(BT_HEADER).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record([
            r.round.to_string(),
            r.t_seconds.to_string(),
            r.population.to_string(),
            r.largest_club_size.to_string(),
            r.departures_cum.to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests;
