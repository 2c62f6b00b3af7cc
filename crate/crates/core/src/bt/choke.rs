//! Per-round choking decisions and piece selection. Every function here is
//! pure apart from the random source, so each can be tested in isolation.

use std::collections::{HashMap, VecDeque};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use crate::model::{PeerId, PieceProfile};

/// Optimistic unchoke slot of a leecher.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Optimistic {
    pub peer: PeerId,
    pub rounds_left: u32,
}

/// Outcome of an unchoke decision: the slots granted now plus the remaining
/// candidates in rank order, used to refill slots vacated mid-round.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Unchoke {
    pub slots: Vec<PeerId>,
    pub backup: Vec<PeerId>,
}

/// Rarest needed piece the unchoker can serve.
///
/// Candidates are pieces `unchoker` holds that `peer` lacks and has not
/// already requested. Availability is indexed by piece; ties are uniform.
pub fn rarest_first_request<R: Rng + ?Sized>(
    peer: &PieceProfile,
    in_flight: &PieceProfile,
    unchoker: &PieceProfile,
    availability: &[u32],
    rng: &mut R,
) -> Option<usize> {
    let mut best = u32::MAX;
    let mut ties: Vec<usize> = Vec::new();
    for p in unchoker.pieces() {
        if peer.has(p) || in_flight.has(p) {
            continue;
        }
        let a = availability[p];
        if a < best {
            best = a;
            ties.clear();
        }
        if a == best {
            ties.push(p);
        }
    }
    ties.choose(rng).copied()
}

/// Candidates in descending order of volume; equal volumes in random order.
fn rank_desc<R: Rng + ?Sized>(
    candidates: &[PeerId],
    volume: impl Fn(PeerId) -> u64,
    rng: &mut R,
) -> Vec<PeerId> {
    let mut v = candidates.to_vec();
    v.shuffle(rng);
    v.sort_by_key(|&id| std::cmp::Reverse(volume(id)));
    v
}

/// Leecher choking: the `regular` best uploaders among `candidates`, plus an
/// optimistic slot drawn on rounds `r` with `r % period == 1` and held for
/// `period` rounds.
pub fn leecher_unchoke<R: Rng + ?Sized>(
    candidates: &[PeerId],
    volume: impl Fn(PeerId) -> u64,
    optimistic: &mut Option<Optimistic>,
    round: u64,
    regular: usize,
    period: u32,
    rng: &mut R,
) -> Unchoke {
    let ranked = rank_desc(candidates, volume, rng);
    let cut = regular.min(ranked.len());
    let (top, rest) = ranked.split_at(cut);
    let mut slots = top.to_vec();

    if let Some(o) = optimistic {
        if o.rounds_left == 0 || !rest.contains(&o.peer) {
            *optimistic = None;
        }
    }
    if optimistic.is_none() && round % period as u64 == 1 {
        if let Some(&peer) = rest.choose(rng) {
            *optimistic = Some(Optimistic {
                peer,
                rounds_left: period,
            });
        }
    }
    if let Some(o) = optimistic {
        slots.push(o.peer);
        o.rounds_left -= 1;
    }
    let backup = rest.iter().copied().filter(|id| !slots.contains(id)).collect();
    Unchoke { slots, backup }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeedCandidate {
    pub id: PeerId,
    pub pieces: usize,
    pub uploaded: u64,
}

/// Seed-side memory: recently unchoked peers (latest first) and the current
/// slot holders.
#[derive(Clone, Debug, Default)]
pub struct SeedState {
    pub recent: VecDeque<(PeerId, f64)>,
    pub unchoked: Vec<PeerId>,
}

impl SeedState {
    /// Drop entries older than `window` seconds.
    pub fn expire(&mut self, now: f64, window: f64) {
        self.recent.retain(|&(_, t)| now - t <= window + 1e-9);
    }

    /// Mark `id` as unchoked at `now`, moving it to the front.
    pub fn note(&mut self, id: PeerId, now: f64) {
        self.recent.retain(|&(p, _)| p != id);
        self.recent.push_front((id, now));
    }
}

/// Seed choking.
///
/// On rounds `r % period == 0` (after the first) the previous holders that
/// are still candidates are kept. Otherwise three ranked peers plus one
/// uniform pick. The default ranking is unchoke recency, padded uniformly
/// when the list is short; with `gs` it is ascending piece count, ties to
/// the larger upload total.
#[allow(clippy::too_many_arguments)]
pub fn seed_unchoke<R: Rng + ?Sized>(
    seed: &mut SeedState,
    candidates: &[SeedCandidate],
    round: u64,
    now: f64,
    window: f64,
    slots: usize,
    period: u32,
    gs: bool,
    rng: &mut R,
) -> Unchoke {
    seed.expire(now, window);
    let ranked: Vec<PeerId> = if gs {
        let mut v = candidates.to_vec();
        v.shuffle(rng);
        v.sort_by(|a, b| a.pieces.cmp(&b.pieces).then(b.uploaded.cmp(&a.uploaded)));
        v.into_iter().map(|c| c.id).collect()
    } else {
        let is_cand: HashMap<PeerId, ()> = candidates.iter().map(|c| (c.id, ())).collect();
        let mut v: Vec<PeerId> = seed
            .recent
            .iter()
            .map(|&(id, _)| id)
            .filter(|id| is_cand.contains_key(id))
            .collect();
        let mut rest: Vec<PeerId> = candidates
            .iter()
            .map(|c| c.id)
            .filter(|id| !v.contains(id))
            .collect();
        rest.shuffle(rng);
        v.extend(rest);
        v
    };

    let keep = round > 0 && round % period as u64 == 0 && !seed.unchoked.is_empty();
    let chosen: Vec<PeerId> = if keep {
        let mut kept: Vec<PeerId> = seed
            .unchoked
            .iter()
            .copied()
            .filter(|id| ranked.contains(id))
            .collect();
        for &id in &ranked {
            if kept.len() >= slots {
                break;
            }
            if !kept.contains(&id) {
                kept.push(id);
            }
        }
        kept
    } else {
        let top = &ranked[..ranked.len().min(slots - 1)];
        let others: Vec<PeerId> = ranked[top.len()..].to_vec();
        let mut v = Vec::with_capacity(slots);
        if let Some(&pick) = others.choose(rng) {
            v.push(pick);
        }
        v.extend_from_slice(top);
        v
    };

    for &id in chosen.iter().rev() {
        seed.note(id, now);
    }
    seed.unchoked = chosen.clone();
    let backup = ranked.into_iter().filter(|id| !chosen.contains(id)).collect();
    Unchoke {
        slots: chosen,
        backup,
    }
}

/// Whether `own` is strictly the most common profile among itself and its
/// neighbours. A peer with no neighbours is never in the club.
pub fn local_largest_club<'a>(
    own: &PieceProfile,
    neighbors: impl IntoIterator<Item = &'a PieceProfile>,
) -> bool {
    let mut mine = 1u32;
    let mut others: HashMap<&PieceProfile, u32> = HashMap::new();
    let mut any = false;
    for p in neighbors {
        any = true;
        if p == own {
            mine += 1;
        } else {
            *others.entry(p).or_insert(0) += 1;
        }
    }
    any && others.values().all(|&c| mine > c)
}

/// Keep only proposals holding strictly more pieces than the filtering peer.
pub fn gs_filter_slots(own_pieces: usize, proposed: &[(PeerId, usize)]) -> Vec<PeerId> {
    proposed
        .iter()
        .filter(|&&(_, n)| n > own_pieces)
        .map(|&(id, _)| id)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::RngStream;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn ids(v: &[u64]) -> Vec<PeerId> {
        v.iter().map(|&i| PeerId(i)).collect()
    }

    fn prof(s: &str) -> PieceProfile {
        s.parse().unwrap()
    }

    #[test]
    fn rarest_first_picks_unique_minimum() {
        let mut rng = RngStream::new(1, 0);
        let peer = prof("1000");
        let none = PieceProfile::empty(4);
        let avail = [0, 5, 1, 3];
        let got = rarest_first_request(&peer, &none, &prof("1111"), &avail, &mut rng);
        assert_eq!(got, Some(2));
        // Needed pieces all in flight.
        let got = rarest_first_request(&peer, &prof("0111"), &prof("1111"), &avail, &mut rng);
        assert_eq!(got, None);
        // Unchoker lacks the rarest piece.
        let got = rarest_first_request(&peer, &none, &prof("1101"), &avail, &mut rng);
        assert_eq!(got, Some(3));
    }

    #[test]
    fn rarest_first_ties_are_uniform() {
        let mut rng = RngStream::new(2, 0);
        let peer = prof("1000");
        let none = PieceProfile::empty(4);
        let avail = [5, 4, 1, 1];
        let n = 20_000;
        let mut c = [0f64; 2];
        for _ in 0..n {
            match rarest_first_request(&peer, &none, &prof("1111"), &avail, &mut rng) {
                Some(2) => c[0] += 1.0,
                Some(3) => c[1] += 1.0,
                other => panic!("unexpected {other:?}"),
            }
        }
        let e = n as f64 / 2.0;
        let chi: f64 = c.iter().map(|o| (o - e).powi(2) / e).sum();
        assert!(chi < ChiSquared::new(1.0).unwrap().inverse_cdf(0.99), "chi2 {chi}");
    }

    #[test]
    fn leecher_ranks_by_received_volume() {
        let mut rng = RngStream::new(3, 0);
        let vol = |id: PeerId| [7, 5, 2, 0][id.0 as usize];
        let mut opt = None;
        let u = leecher_unchoke(&ids(&[0, 1, 2, 3]), vol, &mut opt, 2, 3, 3, &mut rng);
        assert_eq!(u.slots, ids(&[0, 1, 2]));
        assert_eq!(u.backup, ids(&[3]));
        let u = leecher_unchoke(&ids(&[0, 1, 2, 3]), vol, &mut opt, 4, 3, 3, &mut rng);
        assert_eq!(u.slots, ids(&[0, 1, 2, 3]));
        assert!(u.backup.is_empty());
        let u = leecher_unchoke(&[], vol, &mut None, 1, 3, 3, &mut rng);
        assert!(u.slots.is_empty());
    }

    #[test]
    fn optimistic_slot_held_for_three_rounds() {
        let mut rng = RngStream::new(4, 0);
        let cands = ids(&(0..10).collect::<Vec<_>>());
        let vol = |id: PeerId| if id.0 < 3 { 10 } else { 0 };
        let mut opt = None;
        let u = leecher_unchoke(&cands, vol, &mut opt, 0, 3, 3, &mut rng);
        assert_eq!(u.slots.len(), 3);
        let u = leecher_unchoke(&cands, vol, &mut opt, 1, 3, 3, &mut rng);
        let pick = u.slots[3];
        assert!(pick.0 >= 3);
        for r in 2..4 {
            let u = leecher_unchoke(&cands, vol, &mut opt, r, 3, 3, &mut rng);
            assert_eq!(u.slots[3], pick, "round {r}");
        }
        let u = leecher_unchoke(&cands, vol, &mut opt, 4, 3, 3, &mut rng);
        assert_eq!(opt.map(|o| o.rounds_left), Some(2));
        assert_eq!(u.slots.len(), 4);
    }

    fn seed_cands(v: &[(u64, usize, u64)]) -> Vec<SeedCandidate> {
        v.iter()
            .map(|&(id, pieces, uploaded)| SeedCandidate {
                id: PeerId(id),
                pieces,
                uploaded,
            })
            .collect()
    }

    #[test]
    fn seed_uses_recency_list_latest_first() {
        let mut rng = RngStream::new(5, 0);
        let mut seed = SeedState::default();
        // A..E = 1..5, E unchoked last.
        for (i, id) in (1..=5).enumerate() {
            seed.note(PeerId(id), i as f64);
        }
        let cands = seed_cands(&[(1, 0, 0), (2, 0, 0), (3, 0, 0), (4, 0, 0), (5, 0, 0), (6, 0, 0)]);
        let u = seed_unchoke(&mut seed, &cands, 1, 10.0, 20.0, 4, 3, false, &mut rng);
        assert_eq!(&u.slots[1..], &ids(&[5, 4, 3]));
        assert!([1, 2, 6].contains(&u.slots[0].0));
        assert_eq!(seed.recent.front().map(|e| e.0), Some(u.slots[0]));
    }

    #[test]
    fn seed_gs_orders_by_fewest_pieces_then_upload() {
        let mut rng = RngStream::new(6, 0);
        let mut seed = SeedState::default();
        let cands = seed_cands(&[(1, 11, 0), (2, 3, 10), (3, 3, 4)]);
        let u = seed_unchoke(&mut seed, &cands, 1, 0.0, 20.0, 4, 3, true, &mut rng);
        assert_eq!(u.slots, ids(&[2, 3, 1]));
        let cands = seed_cands(&[(1, 11, 0), (2, 3, 10), (3, 3, 4), (4, 12, 0)]);
        let u = seed_unchoke(&mut SeedState::default(), &cands, 1, 0.0, 20.0, 4, 3, true, &mut rng);
        assert_eq!(u.slots, ids(&[4, 2, 3, 1]));
    }

    #[test]
    fn seed_keeps_its_four_every_third_round() {
        let mut rng = RngStream::new(7, 0);
        let mut seed = SeedState::default();
        let cands = seed_cands(&(1..=20).map(|i| (i, 0, 0)).collect::<Vec<_>>());
        let before = seed_unchoke(&mut seed, &cands, 2, 20.0, 20.0, 4, 3, false, &mut rng);
        let kept = seed_unchoke(&mut seed, &cands, 3, 30.0, 20.0, 4, 3, false, &mut rng);
        assert_eq!(before.slots, kept.slots);
        // A departed holder is replaced, the others stay.
        let fewer: Vec<_> = cands.iter().copied().filter(|c| c.id != kept.slots[0]).collect();
        let again = seed_unchoke(&mut seed, &fewer, 6, 60.0, 20.0, 4, 3, false, &mut rng);
        assert_eq!(&again.slots[..3], &kept.slots[1..]);
        assert_eq!(again.slots.len(), 4);
    }

    #[test]
    fn seed_recency_expires() {
        let mut seed = SeedState::default();
        seed.note(PeerId(1), 0.0);
        seed.note(PeerId(2), 10.0);
        seed.expire(25.0, 20.0);
        assert_eq!(seed.recent.iter().map(|e| e.0).collect::<Vec<_>>(), ids(&[2]));
    }

    #[test]
    fn largest_club_is_strict() {
        let (p, q) = (prof("110"), prof("011"));
        assert!(local_largest_club(&p, [&p, &p, &q]));
        assert!(!local_largest_club(&p, [&q, &q, &p]));
        assert!(!local_largest_club(&p, []));
        assert!(!local_largest_club(&p, [&q]));
    }

    #[test]
    fn gs_filter_keeps_strictly_richer() {
        let proposed = [(PeerId(1), 12), (PeerId(2), 11), (PeerId(3), 3), (PeerId(4), 12)];
        assert_eq!(gs_filter_slots(11, &proposed), ids(&[1, 4]));
        assert!(gs_filter_slots(12, &proposed).is_empty());
    }
}
