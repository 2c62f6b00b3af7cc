//! Piece profiles, peers and the population state shared by every
//! continuous-time protocol.
//!
//! The fixed seed is not stored here: it holds every piece, never departs and
//! is addressed through [`Uploader::Seed`]. All population counts exclude it.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::metrics::SojournRecord;

const WORD_BITS: usize = 64;

/// Fixed-width bit vector over the `k` pieces of the file.
///
/// Bit `i` set means piece `i` is held. The textual form lists bit 0 first,
/// so `"10"` holds piece 0 and lacks piece 1.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PieceProfile {
    k: u32,
    words: SmallVec<[u64; 2]>,
}

impl PieceProfile {
    pub fn empty(k: usize) -> Self {
        assert!(k >= 1, "a file has at least one piece");
        let n = k.div_ceil(WORD_BITS);
        Self {
            k: k as u32,
            words: SmallVec::from_elem(0, n),
        }
    }

    pub fn full(k: usize) -> Self {
        let mut p = Self::empty(k);
        for i in 0..k {
            p.insert(i);
        }
        p
    }

    /// All pieces except `missing`.
    pub fn all_but(k: usize, missing: usize) -> Self {
        let mut p = Self::full(k);
        p.remove(missing);
        p
    }

    pub fn from_pieces(k: usize, pieces: impl IntoIterator<Item = usize>) -> Self {
        let mut p = Self::empty(k);
        for i in pieces {
            p.insert(i);
        }
        p
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.k as usize
    }

    #[inline]
    pub fn has(&self, piece: usize) -> bool {
        debug_assert!(piece < self.k());
        self.words[piece / WORD_BITS] >> (piece % WORD_BITS) & 1 == 1
    }

    #[inline]
    pub fn insert(&mut self, piece: usize) {
        assert!(piece < self.k(), "piece {piece} out of range for k={}", self.k);
        self.words[piece / WORD_BITS] |= 1 << (piece % WORD_BITS);
    }

    #[inline]
    pub fn remove(&mut self, piece: usize) {
        assert!(piece < self.k(), "piece {piece} out of range for k={}", self.k);
        self.words[piece / WORD_BITS] &= !(1 << (piece % WORD_BITS));
    }

    #[inline]
    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    #[inline]
    pub fn is_complete(&self) -> bool {
        self.count() == self.k()
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.k == other.k && self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    pub fn pieces(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.k()).filter(|&i| self.has(i))
    }

    pub fn missing(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.k()).filter(|&i| !self.has(i))
    }

    fn check_same_k(&self, other: &Self) -> Result<()> {
        if self.k != other.k {
            return Err(Error::MismatchedPieceCount {
                left: self.k(),
                right: other.k(),
            });
        }
        Ok(())
    }

    /// Pieces held by `self` and lacking in `target`, as a profile.
    #[inline]
    pub(crate) fn useful_mask(&self, target: &Self) -> PieceProfile {
        debug_assert_eq!(self.k, target.k);
        PieceProfile {
            k: self.k,
            words: self
                .words
                .iter()
                .zip(&target.words)
                .map(|(u, t)| u & !t)
                .collect(),
        }
    }

    /// True if `self` holds a piece that `target` lacks.
    #[inline]
    pub fn offers_to(&self, target: &Self) -> bool {
        self.words.iter().zip(&target.words).any(|(u, t)| u & !t != 0)
    }

    #[inline]
    pub(crate) fn words(&self) -> &[u64] {
        &self.words
    }

    pub(crate) fn from_words(k: usize, words: SmallVec<[u64; 2]>) -> Self {
        debug_assert_eq!(words.len(), k.div_ceil(WORD_BITS));
        Self { k: k as u32, words }
    }

    /// Index of the `n`-th set bit (0-based).
    pub(crate) fn nth_piece(&self, mut n: usize) -> Option<usize> {
        for (wi, &w) in self.words.iter().enumerate() {
            let ones = w.count_ones() as usize;
            if n < ones {
                let mut w = w;
                for _ in 0..n {
                    w &= w - 1;
                }
                return Some(wi * WORD_BITS + w.trailing_zeros() as usize);
            }
            n -= ones;
        }
        None
    }

    /// Uniformly random held piece.
    pub(crate) fn random_piece<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<usize> {
        match self.count() {
            0 => None,
            n => self.nth_piece(rng.random_range(0..n)),
        }
    }
}

impl fmt::Display for PieceProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.k() {
            f.write_str(if self.has(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for PieceProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PieceProfile({self})")
    }
}

impl FromStr for PieceProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.is_empty() {
            return Err(Error::InvalidProfile(s.to_string()));
        }
        let mut p = PieceProfile::empty(s.len());
        for (i, c) in s.chars().enumerate() {
            match c {
                '1' => p.insert(i),
                '0' => {}
                _ => return Err(Error::InvalidProfile(s.to_string())),
            }
        }
        Ok(p)
    }
}

impl Serialize for PieceProfile {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PieceProfile {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Pieces the uploader can offer the target: held by `uploader`, lacking in
/// `target`.
pub fn useful_pieces(uploader: &PieceProfile, target: &PieceProfile) -> Result<Vec<usize>> {
    uploader.check_same_k(target)?;
    Ok(uploader.useful_mask(target).pieces().collect())
}

/// Peer identifier, assigned in arrival order and never reused within a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PeerId(pub u64);

impl fmt::Display for PeerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Source of a piece transfer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Uploader {
    Seed,
    Peer(PeerId),
}

/// The last few profiles a peer saw on its own contacts.
#[derive(Clone, Debug, Default)]
pub struct ContactHistory {
    entries: VecDeque<PieceProfile>,
}

impl ContactHistory {
    pub const CAPACITY: usize = 3;

    pub fn push(&mut self, profile: PieceProfile) {
        if self.entries.len() == Self::CAPACITY {
            self.entries.pop_front();
        }
        self.entries.push_back(profile);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &PieceProfile> {
        self.entries.iter()
    }
}

#[derive(Clone, Debug)]
pub struct Peer {
    pub id: PeerId,
    pub profile: PieceProfile,
    pub arrived_at: f64,
    /// Departure time of a complete peer lingering under the waiting protocol.
    pub dwell_deadline: Option<f64>,
    pub contact_history: ContactHistory,
}

/// Dense id set with O(1) insert, remove and uniform sampling.
#[derive(Clone, Debug, Default)]
pub(crate) struct IndexedSet {
    items: Vec<PeerId>,
    pos: HashMap<PeerId, usize>,
}

impl IndexedSet {
    pub fn insert(&mut self, id: PeerId) {
        let prev = self.pos.insert(id, self.items.len());
        debug_assert!(prev.is_none());
        self.items.push(id);
    }

    pub fn remove(&mut self, id: PeerId) -> bool {
        let Some(i) = self.pos.remove(&id) else {
            return false;
        };
        self.items.swap_remove(i);
        if let Some(&moved) = self.items.get(i) {
            self.pos.insert(moved, i);
        }
        true
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.items.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize) -> PeerId {
        self.items[i]
    }

    #[inline]
    pub fn index_of(&self, id: PeerId) -> Option<usize> {
        self.pos.get(&id).copied()
    }

    pub fn as_slice(&self) -> &[PeerId] {
        &self.items
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<PeerId> {
        if self.items.is_empty() {
            None
        } else {
            Some(self.items[rng.random_range(0..self.items.len())])
        }
    }
}

/// Population count per piece profile, with the bookkeeping needed to answer
/// "is there a strictly largest group" in logarithmic time.
#[derive(Clone, Debug, Default)]
pub struct GroupHistogram {
    counts: HashMap<PieceProfile, u64>,
    // group size -> number of groups with that size
    size_multiplicity: BTreeMap<u64, u64>,
    total: u64,
}

impl GroupHistogram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_counts<I: IntoIterator<Item = (PieceProfile, u64)>>(it: I) -> Self {
        let mut h = Self::new();
        for (p, n) in it {
            for _ in 0..n {
                h.add(&p);
            }
        }
        h
    }

    fn bump_size(&mut self, size: u64, delta: i64) {
        if size == 0 {
            return;
        }
        let e = self.size_multiplicity.entry(size).or_insert(0);
        *e = (*e as i64 + delta) as u64;
        if *e == 0 {
            self.size_multiplicity.remove(&size);
        }
    }

    pub fn add(&mut self, profile: &PieceProfile) {
        let c = match self.counts.get_mut(profile) {
            Some(c) => c,
            None => self.counts.entry(profile.clone()).or_insert(0),
        };
        let old = *c;
        *c += 1;
        self.bump_size(old, -1);
        self.bump_size(old + 1, 1);
        self.total += 1;
    }

    pub fn remove(&mut self, profile: &PieceProfile) {
        let c = self
            .counts
            .get_mut(profile)
            .expect("removing a profile that is not in the histogram");
        let old = *c;
        *c -= 1;
        if *c == 0 {
            self.counts.remove(profile);
        }
        self.bump_size(old, -1);
        self.bump_size(old - 1, 1);
        self.total -= 1;
    }

    pub fn count(&self, profile: &PieceProfile) -> u64 {
        self.counts.get(profile).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn num_groups(&self) -> usize {
        self.counts.len()
    }

    /// Size of the strictly largest group, if one exists.
    pub fn largest_club_size(&self) -> Option<u64> {
        let (&size, &mult) = self.size_multiplicity.iter().next_back()?;
        (mult == 1).then_some(size)
    }

    pub fn is_largest_club(&self, profile: &PieceProfile) -> bool {
        match self.largest_club_size() {
            Some(size) => self.count(profile) == size,
            None => false,
        }
    }

    /// The group strictly more populous than every other group.
    pub fn largest_club(&self) -> Option<&PieceProfile> {
        let size = self.largest_club_size()?;
        self.counts
            .iter()
            .find_map(|(p, &c)| (c == size).then_some(p))
    }

    /// Groups sorted by descending size, ties by profile.
    pub fn sorted_groups(&self) -> Vec<(PieceProfile, u64)> {
        let mut v: Vec<_> = self.counts.iter().map(|(p, &c)| (p.clone(), c)).collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        v
    }
}

impl PartialEq for GroupHistogram {
    fn eq(&self, other: &Self) -> bool {
        self.counts == other.counts
    }
}

/// Free-function form of [`GroupHistogram::largest_club`].
pub fn largest_club(hist: &GroupHistogram) -> Option<PieceProfile> {
    hist.largest_club().cloned()
}

/// What happened to the target of a transfer.
#[derive(Clone, Debug, PartialEq)]
pub enum TransferEffect {
    Stayed,
    Departed(SojournRecord),
    Dwelling { deadline: f64 },
}

/// How a peer behaves once it holds the whole file.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Completion {
    Depart,
    DwellUntil(f64),
}

/// Transient peers of one swarm plus the model clock.
#[derive(Clone, Debug)]
pub struct NetworkState {
    k: usize,
    pub t: f64,
    peers: HashMap<PeerId, Peer>,
    roster: IndexedSet,
    by_piece_count: Vec<IndexedSet>,
    hist: GroupHistogram,
    next_id: u64,
}

impl NetworkState {
    pub fn new(k: usize) -> Self {
        assert!(k >= 1);
        Self {
            k,
            t: 0.0,
            peers: HashMap::new(),
            roster: IndexedSet::default(),
            by_piece_count: vec![IndexedSet::default(); k + 1],
            hist: GroupHistogram::new(),
            next_id: 0,
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn population(&self) -> usize {
        self.roster.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roster.is_empty()
    }

    pub fn hist(&self) -> &GroupHistogram {
        &self.hist
    }

    pub fn peer(&self, id: PeerId) -> Option<&Peer> {
        self.peers.get(&id)
    }

    pub(crate) fn peer_mut(&mut self, id: PeerId) -> Option<&mut Peer> {
        self.peers.get_mut(&id)
    }

    pub fn contains(&self, id: PeerId) -> bool {
        self.peers.contains_key(&id)
    }

    /// Peer ids in roster order (deterministic for a given event history).
    pub fn peer_ids(&self) -> &[PeerId] {
        self.roster.as_slice()
    }

    pub fn peers(&self) -> impl Iterator<Item = &Peer> {
        self.roster.as_slice().iter().map(|id| &self.peers[id])
    }

    pub(crate) fn roster(&self) -> &IndexedSet {
        &self.roster
    }

    pub fn random_peer<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<PeerId> {
        self.roster.sample(rng)
    }

    /// Insert a transient peer; returns its freshly assigned id.
    pub fn add_peer(&mut self, profile: PieceProfile, arrived_at: f64) -> PeerId {
        assert_eq!(profile.k(), self.k, "profile width must match the swarm");
        let id = PeerId(self.next_id);
        self.next_id += 1;
        self.by_piece_count[profile.count()].insert(id);
        self.hist.add(&profile);
        self.roster.insert(id);
        self.peers.insert(
            id,
            Peer {
                id,
                profile,
                arrived_at,
                dwell_deadline: None,
                contact_history: ContactHistory::default(),
            },
        );
        id
    }

    /// Remove a peer and return its sojourn record.
    pub fn remove_peer(&mut self, id: PeerId) -> Result<SojournRecord> {
        let peer = self.peers.remove(&id).ok_or(Error::UnknownPeer(id))?;
        self.roster.remove(id);
        self.by_piece_count[peer.profile.count()].remove(id);
        self.hist.remove(&peer.profile);
        Ok(SojournRecord {
            peer_id: id.0,
            t_arrive: peer.arrived_at,
            t_depart: self.t,
        })
    }

    /// Every transient peer holding the fewest pieces.
    pub fn least_piece_peers(&self) -> Vec<PeerId> {
        self.least_piece_bucket()
            .map(|b| {
                let mut v = b.as_slice().to_vec();
                v.sort();
                v
            })
            .unwrap_or_default()
    }

    pub(crate) fn least_piece_bucket(&self) -> Option<&IndexedSet> {
        self.by_piece_count.iter().find(|b| !b.is_empty())
    }

    /// Move `piece` to `to`. Fails if the uploader lacks the piece or the
    /// target already holds it.
    pub fn apply_transfer(
        &mut self,
        from: Uploader,
        to: PeerId,
        piece: usize,
        completion: Completion,
    ) -> Result<TransferEffect> {
        if piece >= self.k {
            return Err(Error::PieceOutOfRange { piece, k: self.k });
        }
        if let Uploader::Peer(from) = from {
            let up = self.peers.get(&from).ok_or(Error::UnknownPeer(from))?;
            if !up.profile.has(piece) {
                return Err(Error::NonUsefulTransfer { piece, peer: to });
            }
        }
        let target = self.peers.get_mut(&to).ok_or(Error::UnknownPeer(to))?;
        if target.profile.has(piece) {
            return Err(Error::NonUsefulTransfer { piece, peer: to });
        }
        let old_count = target.profile.count();
        self.hist.remove(&target.profile);
        target.profile.insert(piece);
        self.hist.add(&target.profile);
        self.by_piece_count[old_count].remove(to);
        self.by_piece_count[old_count + 1].insert(to);

        if !target.profile.is_complete() {
            return Ok(TransferEffect::Stayed);
        }
        match completion {
            Completion::Depart => Ok(TransferEffect::Departed(self.remove_peer(to)?)),
            Completion::DwellUntil(deadline) => {
                target.dwell_deadline = Some(deadline);
                Ok(TransferEffect::Dwelling { deadline })
            }
        }
    }

    /// Histogram rebuilt from the peer table; used to audit the maintained one.
    pub fn recount_hist(&self) -> GroupHistogram {
        let mut h = GroupHistogram::new();
        for p in self.peers.values() {
            h.add(&p.profile);
        }
        h
    }

    /// Number of transient peers holding a complete profile.
    pub fn complete_peers(&self) -> usize {
        self.by_piece_count[self.k].len()
    }
}
