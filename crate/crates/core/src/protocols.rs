//! Contact policies of the continuous-time protocols.
//!
//! Push protocols (unstructured, gs, dgs, waiting) let the contacting peer
//! upload to a uniformly drawn target; the pull protocols (ff, cc) let it
//! download from sampled peers. Policies only decide; the engine applies the
//! returned transfer.

use std::collections::VecDeque;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Exp};
use smallvec::SmallVec;

use crate::config::Protocol;
use crate::model::{GroupHistogram, NetworkState, PeerId, PieceProfile, Uploader};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Transfer {
    pub from: Uploader,
    pub to: PeerId,
    pub piece: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OutcomeReason {
    Delivered,
    Suppressed,
    NoUsefulPiece,
    SkippedEmptyCandidateSet,
    RefusedCommonChunk,
    SelfContact,
    /// Nobody to contact.
    NoTarget,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PolicyOutcome {
    pub transfer: Option<Transfer>,
    pub reason: OutcomeReason,
}

impl PolicyOutcome {
    fn delivered(from: Uploader, to: PeerId, piece: usize) -> Self {
        Self {
            transfer: Some(Transfer { from, to, piece }),
            reason: OutcomeReason::Delivered,
        }
    }

    fn nothing(reason: OutcomeReason) -> Self {
        debug_assert_ne!(reason, OutcomeReason::Delivered);
        Self {
            transfer: None,
            reason,
        }
    }
}

/// Random useful piece from `uploader` to `target`.
fn push_random_useful<R: Rng + ?Sized>(
    from: Uploader,
    uploader: &PieceProfile,
    to: PeerId,
    target: &PieceProfile,
    rng: &mut R,
) -> PolicyOutcome {
    match uploader.useful_mask(target).random_piece(rng) {
        Some(piece) => PolicyOutcome::delivered(from, to, piece),
        None => PolicyOutcome::nothing(OutcomeReason::NoUsefulPiece),
    }
}

fn profile(state: &NetworkState, id: PeerId) -> &PieceProfile {
    &state.peer(id).expect("policy called with a departed peer").profile
}

/// Uniform target among all transient peers, the actor included.
fn draw_push_target<R: Rng + ?Sized>(
    actor: PeerId,
    state: &NetworkState,
    rng: &mut R,
) -> Result<PeerId, PolicyOutcome> {
    match state.random_peer(rng) {
        None => Err(PolicyOutcome::nothing(OutcomeReason::NoTarget)),
        Some(t) if t == actor => Err(PolicyOutcome::nothing(OutcomeReason::SelfContact)),
        Some(t) => Ok(t),
    }
}

/// Up to `n` distinct peers other than `actor`, uniformly without replacement.
pub(crate) fn sample_others<R: Rng + ?Sized>(
    actor: PeerId,
    state: &NetworkState,
    n: usize,
    rng: &mut R,
) -> SmallVec<[PeerId; 8]> {
    let roster = state.roster();
    let Some(actor_pos) = roster.index_of(actor) else {
        return SmallVec::new();
    };
    let others = roster.len() - 1;
    let amount = n.min(others);
    index::sample(rng, others, amount)
        .into_iter()
        .map(|i| roster.get(if i >= actor_pos { i + 1 } else { i }))
        .collect()
}

pub fn unstructured_contact<R: Rng + ?Sized>(
    actor: PeerId,
    state: &NetworkState,
    rng: &mut R,
) -> PolicyOutcome {
    let target = match draw_push_target(actor, state, rng) {
        Ok(t) => t,
        Err(o) => return o,
    };
    push_random_useful(
        Uploader::Peer(actor),
        profile(state, actor),
        target,
        profile(state, target),
        rng,
    )
}

/// Seed contact shared by the unstructured, waiting, ff and cc protocols.
pub fn unstructured_seed_contact<R: Rng + ?Sized>(
    state: &NetworkState,
    rng: &mut R,
) -> PolicyOutcome {
    let Some(target) = state.random_peer(rng) else {
        return PolicyOutcome::nothing(OutcomeReason::NoTarget);
    };
    seed_push(state, target, rng)
}

fn seed_push<R: Rng + ?Sized>(state: &NetworkState, target: PeerId, rng: &mut R) -> PolicyOutcome {
    let t = profile(state, target);
    push_random_useful(Uploader::Seed, &PieceProfile::full(t.k()), target, t, rng)
}

/// Whether group suppression lets `actor` upload to `target`.
///
/// Members of the strictly largest group may only serve peers holding more
/// pieces than themselves. Without a strictly largest group everyone may
/// upload.
pub fn gs_permit(actor: &PieceProfile, target: &PieceProfile, hist: &GroupHistogram) -> bool {
    !(hist.is_largest_club(actor) && target.count() <= actor.count())
}

pub fn gs_contact<R: Rng + ?Sized>(
    actor: PeerId,
    state: &NetworkState,
    rng: &mut R,
) -> PolicyOutcome {
    let target = match draw_push_target(actor, state, rng) {
        Ok(t) => t,
        Err(o) => return o,
    };
    let (a, t) = (profile(state, actor), profile(state, target));
    if !gs_permit(a, t, state.hist()) {
        return PolicyOutcome::nothing(OutcomeReason::Suppressed);
    }
    push_random_useful(Uploader::Peer(actor), a, target, t, rng)
}

/// Most-deprived seed: uniform among the peers holding the fewest pieces.
pub fn gs_seed_contact<R: Rng + ?Sized>(state: &NetworkState, rng: &mut R) -> PolicyOutcome {
    let Some(target) = state.least_piece_bucket().and_then(|b| b.sample(rng)) else {
        return PolicyOutcome::nothing(OutcomeReason::NoTarget);
    };
    seed_push(state, target, rng)
}

/// Local largest-club test: the own profile must be strictly more frequent
/// than every other profile in `own + seen`.
pub fn local_club_member<'a>(
    own: &PieceProfile,
    seen: impl IntoIterator<Item = &'a PieceProfile>,
) -> bool {
    let mut tally: SmallVec<[(&PieceProfile, usize); 8]> = SmallVec::new();
    let mut own_count = 1;
    for p in seen {
        if p == own {
            own_count += 1;
        } else if let Some(e) = tally.iter_mut().find(|(q, _)| *q == p) {
            e.1 += 1;
        } else {
            tally.push((p, 1));
        }
    }
    tally.iter().all(|&(_, c)| own_count > c)
}

/// Decentralised group suppression contact. The target's profile enters the
/// actor's history before the membership test.
pub fn dgs_contact<R: Rng + ?Sized>(
    actor: PeerId,
    state: &mut NetworkState,
    rng: &mut R,
) -> PolicyOutcome {
    let target = match draw_push_target(actor, state, rng) {
        Ok(t) => t,
        Err(o) => return o,
    };
    let target_profile = profile(state, target).clone();
    let peer = state.peer_mut(actor).expect("actor is present");
    peer.contact_history.push(target_profile.clone());
    let member = local_club_member(&peer.profile, peer.contact_history.iter());
    if member && target_profile.count() <= peer.profile.count() {
        return PolicyOutcome::nothing(OutcomeReason::Suppressed);
    }
    let own = peer.profile.clone();
    push_random_useful(Uploader::Peer(actor), &own, target, &target_profile, rng)
}

/// The seed's memory of the most recent arrivals, newest first.
#[derive(Clone, Debug, Default)]
pub struct ArrivalLedger {
    ids: VecDeque<PeerId>,
}

impl ArrivalLedger {
    pub const CAPACITY: usize = 5;

    pub fn record(&mut self, id: PeerId) {
        self.ids.push_front(id);
        self.ids.truncate(Self::CAPACITY);
    }

    pub fn ids(&self) -> impl Iterator<Item = PeerId> + '_ {
        self.ids.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

pub fn dgs_seed_contact<R: Rng + ?Sized>(
    state: &NetworkState,
    ledger: &ArrivalLedger,
    rng: &mut R,
) -> PolicyOutcome {
    match ledger.ids().find(|&id| state.contains(id)) {
        Some(target) => seed_push(state, target, rng),
        None => unstructured_seed_contact(state, rng),
    }
}

/// Deadline for a peer that just completed under the waiting protocol.
pub fn waiting_on_complete<R: Rng + ?Sized>(now: f64, mu: f64, rng: &mut R) -> f64 {
    now + Exp::new(mu).expect("mu > 0").sample(rng)
}

/// Pieces appearing exactly once and at least twice across `profiles`.
fn multiplicities<'a>(
    k: usize,
    profiles: impl IntoIterator<Item = &'a PieceProfile>,
) -> (PieceProfile, PieceProfile) {
    let words = k.div_ceil(64);
    let mut once: SmallVec<[u64; 2]> = SmallVec::from_elem(0, words);
    let mut more: SmallVec<[u64; 2]> = SmallVec::from_elem(0, words);
    for p in profiles {
        for (i, &w) in p.words().iter().enumerate() {
            more[i] |= once[i] & w;
            once[i] = (once[i] | w) & !more[i];
        }
    }
    (PieceProfile::from_words(k, once), PieceProfile::from_words(k, more))
}

/// Candidate set of the forced Friedman rule: pieces seen exactly once in the
/// samples that the actor lacks.
pub fn ff_candidates(actor: &PieceProfile, samples: &[&PieceProfile]) -> PieceProfile {
    let (once, _) = multiplicities(actor.k(), samples.iter().copied());
    once.useful_mask(actor)
}

/// Common chunk last-piece rule: every held piece must appear at least twice
/// among the contacts and some contact must hold the missing piece.
pub fn cc_allows_last_piece(actor: &PieceProfile, contacts: &[&PieceProfile]) -> bool {
    let (_, more) = multiplicities(actor.k(), contacts.iter().copied());
    let available = contacts.iter().any(|c| !c.useful_mask(actor).words().iter().all(|&w| w == 0));
    available && actor.is_subset_of(&more)
}

pub fn ff_pull<R: Rng + ?Sized>(actor: PeerId, state: &NetworkState, rng: &mut R) -> PolicyOutcome {
    let sampled = sample_others(actor, state, 3, rng);
    if sampled.is_empty() {
        return PolicyOutcome::nothing(OutcomeReason::NoTarget);
    }
    let own = profile(state, actor);
    let profiles: SmallVec<[&PieceProfile; 4]> =
        sampled.iter().map(|&id| profile(state, id)).collect();
    let candidates = ff_candidates(own, &profiles);
    let Some(piece) = candidates.random_piece(rng) else {
        return PolicyOutcome::nothing(OutcomeReason::SkippedEmptyCandidateSet);
    };
    let holder = sampled
        .iter()
        .zip(&profiles)
        .find_map(|(&id, p)| p.has(piece).then_some(id))
        .expect("a candidate piece has exactly one holder");
    PolicyOutcome::delivered(Uploader::Peer(holder), actor, piece)
}

pub fn cc_pull<R: Rng + ?Sized>(
    actor: PeerId,
    state: &NetworkState,
    m: usize,
    rng: &mut R,
) -> PolicyOutcome {
    let own = profile(state, actor);
    let held = own.count();
    let k = own.k();
    if held == 0 {
        return ff_pull(actor, state, rng);
    }
    if held + 1 < k {
        let Some(&target) = sample_others(actor, state, 1, rng).first() else {
            return PolicyOutcome::nothing(OutcomeReason::NoTarget);
        };
        let t = profile(state, target);
        return match t.useful_mask(own).random_piece(rng) {
            Some(piece) => PolicyOutcome::delivered(Uploader::Peer(target), actor, piece),
            None => PolicyOutcome::nothing(OutcomeReason::NoUsefulPiece),
        };
    }
    let contacts = sample_others(actor, state, m, rng);
    if contacts.is_empty() {
        return PolicyOutcome::nothing(OutcomeReason::NoTarget);
    }
    let profiles: SmallVec<[&PieceProfile; 8]> =
        contacts.iter().map(|&id| profile(state, id)).collect();
    if !cc_allows_last_piece(own, &profiles) {
        return PolicyOutcome::nothing(OutcomeReason::RefusedCommonChunk);
    }
    let missing = own.missing().next().expect("actor is incomplete");
    let holders: SmallVec<[PeerId; 8]> = contacts
        .iter()
        .zip(&profiles)
        .filter(|(_, p)| p.has(missing))
        .map(|(&id, _)| id)
        .collect();
    let from = holders[rng.random_range(0..holders.len())];
    PolicyOutcome::delivered(Uploader::Peer(from), actor, missing)
}

/// A protocol together with the per-run state its seed keeps.
#[derive(Clone, Debug)]
pub struct Policy {
    pub protocol: Protocol,
    pub m: usize,
    pub ledger: ArrivalLedger,
}

impl Policy {
    pub fn new(protocol: Protocol, m: usize) -> Self {
        Self {
            protocol,
            m,
            ledger: ArrivalLedger::default(),
        }
    }

    pub fn on_arrival(&mut self, id: PeerId) {
        if self.protocol == Protocol::Dgs {
            self.ledger.record(id);
        }
    }

    pub fn peer_contact<R: Rng + ?Sized>(
        &mut self,
        actor: PeerId,
        state: &mut NetworkState,
        rng: &mut R,
    ) -> PolicyOutcome {
        match self.protocol {
            Protocol::Unstructured | Protocol::Waiting => unstructured_contact(actor, state, rng),
            Protocol::Gs => gs_contact(actor, state, rng),
            Protocol::Dgs => dgs_contact(actor, state, rng),
            Protocol::Ff => ff_pull(actor, state, rng),
            Protocol::Cc => cc_pull(actor, state, self.m, rng),
        }
    }

    pub fn seed_contact<R: Rng + ?Sized>(
        &mut self,
        state: &NetworkState,
        rng: &mut R,
    ) -> PolicyOutcome {
        match self.protocol {
            Protocol::Gs => gs_seed_contact(state, rng),
            Protocol::Dgs => dgs_seed_contact(state, &self.ledger, rng),
            _ => unstructured_seed_contact(state, rng),
        }
    }
}
