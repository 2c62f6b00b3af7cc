use super::*;
use crate::metrics::growth_slope;

fn small(gs: bool) -> BtConfig {
    BtConfig {
        k: 6,
        arrivals_per_round: 10,
        init: "bt_mixed:100,5".parse().unwrap(),
        gs_enabled: gs,
        horizon_rounds: 30,
        ..BtConfig::default()
    }
}

fn swarm(cfg: &BtConfig, stream: u64) -> BtSwarm {
    BtSwarm::new(cfg, RngStream::new(cfg.rng_seed, stream)).unwrap()
}

#[test]
fn lone_leecher_leaves_after_one_seed_transfer() {
    let cfg = BtConfig {
        arrivals_per_round: 0,
        init: "custom:111111111110".parse().unwrap(),
        ..BtConfig::default()
    };
    let mut s = swarm(&cfg, 0);
    s.transfer_log = Some(Vec::new());
    assert_eq!(s.population(), 1);
    s.issue_requests_for_test();
    assert_eq!(s.peer(SEED).unwrap().uploads[0].ticks_left, 1);
    s.advance_transfers();
    assert_eq!(s.population(), 0);
    assert_eq!(s.departures(), 1);
}

impl BtSwarm {
    fn issue_requests_for_test(&mut self) {
        self.decide_unchokes();
        self.issue_requests();
    }
}

#[test]
fn invariants_hold_every_round() {
    for gs in [false, true] {
        let cfg = small(gs);
        let mut s = swarm(&cfg, 3);
        for _ in 0..cfg.horizon_rounds {
            let seed_before = s.peer(SEED).unwrap().total_uploaded;
            s.run_round();
            s.check_invariants().unwrap_or_else(|e| panic!("gs={gs} round {}: {e}", s.round()));
            let seed_sent = s.peer(SEED).unwrap().total_uploaded - seed_before;
            assert!(seed_sent <= 20, "seed sent {seed_sent} pieces in a round");
            assert_eq!(s.hist().total() as usize, s.population());
        }
        assert!(s.departures() > 0);
    }
}

#[test]
fn departures_are_exactly_the_completed_peers() {
    let cfg = small(false);
    let mut s = swarm(&cfg, 4);
    s.transfer_log = Some(Vec::new());
    for _ in 0..20 {
        let before: BTreeSet<PeerId> = s.peer_ids().collect();
        let first_new = s.next_id;
        let deps = s.departures();
        s.run_round();
        let after: BTreeSet<PeerId> = s.peer_ids().collect();
        let existed: BTreeSet<PeerId> = before
            .iter()
            .copied()
            .chain((first_new..s.next_id).map(PeerId))
            .collect();
        let vanished: Vec<PeerId> = existed.difference(&after).copied().collect();
        assert_eq!(vanished.len() as u64, s.departures() - deps);
        let log = s.transfer_log.as_ref().unwrap();
        for id in vanished {
            let got = log.iter().filter(|t| t.to == id).count();
            let had = if before.contains(&id) { cfg.k - got } else { 0 };
            assert!(got > 0 && had + got >= cfg.k, "{id} left without completing");
        }
    }
}

#[test]
fn neighbour_links_stay_symmetric() {
    let cfg = BtConfig {
        neighbor_max: 8,
        tracker_topup_threshold: 4,
        tracker_response: 6,
        ..small(false)
    };
    let mut s = swarm(&cfg, 5);
    for _ in 0..15 {
        s.run_round();
        s.check_invariants().unwrap();
        assert!(s.peer_ids().all(|id| s.peer(id).unwrap().neighbors.len() <= 8));
    }
}

#[test]
fn tracker_sampling() {
    let cfg = BtConfig {
        arrivals_per_round: 0,
        init: "one_club:1".parse().unwrap(),
        ..BtConfig::default()
    };
    let mut s = swarm(&cfg, 0);
    // Seed plus one peer: the only candidate is already linked.
    let only = s.peer_ids().nth(1).unwrap();
    assert_eq!(s.peer(only).unwrap().neighbors.len(), 1);
    assert!(s.tracker_sample(only, 40).is_empty());

    let cfg = BtConfig {
        arrivals_per_round: 0,
        init: "one_club:500".parse().unwrap(),
        neighbor_max: 1000,
        ..BtConfig::default()
    };
    let mut s = swarm(&cfg, 1);
    let newcomer = s.admit(PieceProfile::empty(cfg.k));
    let n = &s.peer(newcomer).unwrap().neighbors;
    assert_eq!(n.len(), 40);
    assert!(!n.contains(&newcomer));

    let cfg = BtConfig {
        neighbor_max: 3,
        tracker_response: 3,
        ..cfg
    };
    let mut s = swarm(&cfg, 2);
    let full = s.peer_ids().find(|id| s.peer(*id).unwrap().neighbors.len() == 3).unwrap();
    assert!(s.tracker_sample(full, 5).is_empty());
}

#[test]
fn one_club_does_not_feed_newcomers_under_gs() {
    let k = 12;
    let mut counts = Vec::new();
    for gs in [true, false] {
        let cfg = BtConfig {
            k,
            arrivals_per_round: 5,
            init: "bt_mixed:499,0".parse().unwrap(),
            gs_enabled: gs,
            ..BtConfig::default()
        };
        let mut s = swarm(&cfg, 6);
        s.transfer_log = Some(Vec::new());
        let club = PieceProfile::all_but(k, k - 1);
        let mut to_poorer = 0;
        let mut member_rounds = 0;
        for _ in 0..8 {
            let carried: BTreeSet<(PeerId, PeerId, usize)> = s
                .peer_ids()
                .flat_map(|id| {
                    s.peer(id).unwrap().uploads.iter().map(move |u| (id, u.target, u.piece))
                })
                .collect();
            s.begin_round();
            let start: HashMap<PeerId, usize> = s
                .peer_ids()
                .map(|id| (id, s.peer(id).unwrap().profile.count()))
                .collect();
            let members: BTreeSet<PeerId> = s
                .peer_ids()
                .filter(|&id| {
                    let p = s.peer(id).unwrap();
                    p.profile == club
                        && local_largest_club(
                            &p.profile,
                            p.neighbors.iter().map(|n| &s.peer(*n).unwrap().profile),
                        )
                })
                .collect();
            member_rounds += members.len();
            s.finish_round();
            for t in s.transfer_log.as_ref().unwrap() {
                let fresh = !carried.contains(&(t.from, t.to, t.piece));
                if fresh && members.contains(&t.from) && start[&t.to] < k {
                    to_poorer += 1;
                }
            }
        }
        assert!(member_rounds > 1000);
        counts.push(to_poorer);
    }
    assert_eq!(counts[0], 0);
    assert!(counts[1] > 0);
}

#[test]
fn replications_are_deterministic() {
    let cfg = BtConfig {
        replications: 2,
        ..small(true)
    };
    let a = run_bt_replications(&cfg).unwrap();
    let b = run_bt_replications(&cfg).unwrap();
    assert_eq!(a, b);
    assert_ne!(a[0].rows, a[1].rows);

    let dir = tempfile::tempdir().unwrap();
    let (p, q) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    write_bt_csv(&p, &a[0].rows).unwrap();
    write_bt_csv(&q, &b[0].rows).unwrap();
    let text = std::fs::read(&p).unwrap();
    assert_eq!(text, std::fs::read(&q).unwrap());
    let header = String::from_utf8(text).unwrap();
    assert!(header.starts_with("round,t_seconds,population,largest_club_size,departures_cum\n"));
}

#[test]
fn rows_track_time_and_population() {
    let cfg = small(false);
    let r = run_bt(&cfg, 0).unwrap();
    assert_eq!(r.rows.len() as u64, cfg.horizon_rounds + 1);
    assert_eq!(r.rows[0].population, 105);
    for (i, row) in r.rows.iter().enumerate() {
        assert_eq!(row.round, i as u64);
        assert_eq!(row.t_seconds, 10.0 * i as f64);
        assert!(row.largest_club_size <= row.population);
    }
    assert!(r.rows.windows(2).all(|w| w[0].departures_cum <= w[1].departures_cum));
}

#[test]
fn population_cap_marks_explosion() {
    let cfg = BtConfig {
        population_cap: 120,
        horizon_rounds: 100,
        ..small(false)
    };
    let r = run_bt(&cfg, 0).unwrap();
    assert!(r.exploded);
    assert!(r.rows.len() < 101);
}

/// With an uncapped neighbourhood every newcomer sees the one club, which
/// then absorbs it; group suppression breaks that.
#[test]
fn well_connected_plain_swarm_outgrows_group_suppression() {
    let base = BtConfig {
        horizon_rounds: 80,
        neighbor_max: 10_000,
        ..BtConfig::default()
    };
    let plain = run_bt(&base, 0).unwrap();
    let gs = run_bt(
        &BtConfig {
            gs_enabled: true,
            ..base.clone()
        },
        0,
    )
    .unwrap();
    let slope = growth_slope(&plain.population_series(), 300.0, 800.0).unwrap();
    assert!(slope > 0.7, "plain slope {slope}");
    let slope_gs = growth_slope(&gs.population_series(), 300.0, 800.0).unwrap();
    assert!(slope_gs < 0.1, "gs slope {slope_gs}");
}

#[test]
fn config_validation() {
    assert!(BtConfig::default().validate().is_ok());
    let bad = BtConfig {
        seed_piece_secs: 3,
        ..BtConfig::default()
    };
    assert!(matches!(bad.validate(), Err(Error::InvalidConfig { key, .. }) if key == "seed_piece_secs"));
    let err = toml::from_str::<BtConfig>("k = 12\narrivals = 3\n");
    assert!(err.is_err());
    let ok: BtConfig = toml::from_str("gs_enabled = true\ninit = \"bt_mixed:499,0\"\n").unwrap();
    assert!(ok.gs_enabled);
}
