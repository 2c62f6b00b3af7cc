//! Scenario configuration for the continuous-time simulator.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::PieceProfile;

/// Default ceiling on the transient population before a run is declared
/// divergent.
pub const DEFAULT_POPULATION_CAP: usize = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    /// Uniform peer, random useful piece, push.
    Unstructured,
    /// Group suppression with global knowledge.
    Gs,
    /// Decentralised group suppression.
    Dgs,
    /// Unstructured, but complete peers linger for an Exp(mu) dwell.
    Waiting,
    /// Forced Friedman pull rule.
    Ff,
    /// Common chunk pull rule with `m` contacts.
    Cc,
}

impl Protocol {
    pub const ALL: [Protocol; 6] = [
        Protocol::Unstructured,
        Protocol::Gs,
        Protocol::Dgs,
        Protocol::Waiting,
        Protocol::Ff,
        Protocol::Cc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Protocol::Unstructured => "unstructured",
            Protocol::Gs => "gs",
            Protocol::Dgs => "dgs",
            Protocol::Waiting => "waiting",
            Protocol::Ff => "ff",
            Protocol::Cc => "cc",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Protocol::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                Error::config(
                    "protocol",
                    format!("unknown protocol {s:?} (expected unstructured|gs|dgs|waiting|ff|cc)"),
                )
            })
    }
}

/// Initial population preset.
#[derive(Clone, Debug, PartialEq)]
pub enum InitSpec {
    Empty,
    /// `n` peers all missing the last piece.
    OneClub(usize),
    /// `all_but_last` peers missing only the last piece plus `only_last`
    /// peers holding only the last piece.
    BtMixed { all_but_last: usize, only_last: usize },
    Custom(Vec<PieceProfile>),
}

impl InitSpec {
    pub fn profiles(&self, k: usize) -> Result<Vec<PieceProfile>> {
        Ok(match self {
            InitSpec::Empty => Vec::new(),
            InitSpec::OneClub(n) => vec![PieceProfile::all_but(k, k - 1); *n],
            InitSpec::BtMixed {
                all_but_last,
                only_last,
            } => {
                let mut v = vec![PieceProfile::all_but(k, k - 1); *all_but_last];
                v.extend(std::iter::repeat_n(
                    PieceProfile::from_pieces(k, [k - 1]),
                    *only_last,
                ));
                v
            }
            InitSpec::Custom(v) => {
                if let Some(bad) = v.iter().find(|p| p.k() != k) {
                    return Err(Error::config(
                        "init",
                        format!("profile {bad} has {} pieces, expected {k}", bad.k()),
                    ));
                }
                v.clone()
            }
        })
    }
}

impl fmt::Display for InitSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitSpec::Empty => f.write_str("empty"),
            InitSpec::OneClub(n) => write!(f, "one_club:{n}"),
            InitSpec::BtMixed {
                all_but_last,
                only_last,
            } => write!(f, "bt_mixed:{all_but_last},{only_last}"),
            InitSpec::Custom(v) => {
                f.write_str("custom:")?;
                for (i, p) in v.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{p}")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for InitSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |why: &str| Error::config("init", format!("{s:?}: {why}"));
        let count = |v: &str| v.trim().parse::<usize>().map_err(|_| bad("expected a count"));
        let (name, arg) = s.split_once(':').unwrap_or((s, ""));
        match name {
            "empty" if arg.is_empty() => Ok(InitSpec::Empty),
            "one_club" => Ok(InitSpec::OneClub(count(arg)?)),
            "bt_mixed" => {
                let (a, b) = arg
                    .split_once(',')
                    .ok_or_else(|| bad("expected bt_mixed:A,B"))?;
                Ok(InitSpec::BtMixed {
                    all_but_last: count(a)?,
                    only_last: count(b)?,
                })
            }
            "custom" => arg
                .split(',')
                .filter(|p| !p.is_empty())
                .map(|p| p.trim().parse())
                .collect::<Result<Vec<_>>>()
                .map(InitSpec::Custom),
            _ => Err(bad("expected empty | one_club:N | bt_mixed:A,B | custom:P,P,…")),
        }
    }
}

impl Serialize for InitSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for InitSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

/// Everything needed to reproduce a batch of continuous-time replications.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub protocol: Protocol,
    pub k: usize,
    /// Arrival rate of empty peers.
    pub lambda: f64,
    /// Contact rate of each transient peer.
    pub mu: f64,
    /// Contact rate of the fixed seed.
    pub us: f64,
    pub horizon: f64,
    pub init: InitSpec,
    pub rng_seed: u64,
    pub replications: usize,
    pub sample_dt: f64,
    /// Contacts made by peers missing one piece under common chunk.
    pub m: usize,
    pub population_cap: usize,
    /// Departures before this time are not counted by the early-stop rule.
    pub warmup: f64,
    /// Stop once this many departures at or after `warmup` are recorded.
    pub stop_after_departures: Option<usize>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            protocol: Protocol::Unstructured,
            k: 2,
            lambda: 4.0,
            mu: 1.0,
            us: 2.0,
            horizon: 1000.0,
            init: InitSpec::OneClub(500),
            rng_seed: 1,
            replications: 1,
            sample_dt: 1.0,
            m: 3,
            population_cap: DEFAULT_POPULATION_CAP,
            warmup: 0.0,
            stop_after_departures: None,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(key, format!("must be positive, got {v}")))
            }
        };
        positive("lambda", self.lambda)?;
        positive("mu", self.mu)?;
        positive("us", self.us)?;
        positive("sample_dt", self.sample_dt)?;
        if self.k == 0 {
            return Err(Error::config("k", "must be at least 1"));
        }
        if self.m == 0 {
            return Err(Error::config("m", "must be at least 1"));
        }
        if !(self.horizon.is_finite() && self.horizon >= 0.0) {
            return Err(Error::config("horizon", "must be finite and non-negative"));
        }
        if !(self.warmup.is_finite() && self.warmup >= 0.0) {
            return Err(Error::config("warmup", "must be finite and non-negative"));
        }
        if self.replications == 0 {
            return Err(Error::config("replications", "must be at least 1"));
        }
        if self.population_cap == 0 {
            return Err(Error::config("population_cap", "must be at least 1"));
        }
        if matches!(self.init, InitSpec::BtMixed { .. }) {
            return Err(Error::config(
                "init",
                "bt_mixed is a preset for the round-based simulator",
            ));
        }
        self.init.profiles(self.k)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_presets_parse_and_print() {
        for s in ["empty", "one_club:500", "bt_mixed:494,5", "custom:10,01,00"] {
            let spec: InitSpec = s.parse().unwrap();
            assert_eq!(spec.to_string(), s);
        }
        assert!("one_club".parse::<InitSpec>().is_err());
        assert!("bogus:3".parse::<InitSpec>().is_err());
    }

    #[test]
    fn one_club_misses_last_piece() {
        let v = InitSpec::OneClub(3).profiles(2).unwrap();
        assert_eq!(v.len(), 3);
        assert!(v.iter().all(|p| p.to_string() == "10"));
    }

    #[test]
    fn validation_rejects_bad_rates() {
        let mut c = ScenarioConfig::default();
        c.validate().unwrap();
        c.lambda = 0.0;
        assert!(matches!(c.validate(), Err(Error::InvalidConfig { key, .. }) if key == "lambda"));
        let c = ScenarioConfig {
            m: 0,
            ..ScenarioConfig::default()
        };
        assert!(c.validate().is_err());
        let c = ScenarioConfig {
            init: "custom:101".parse().unwrap(),
            ..ScenarioConfig::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn toml_rejects_unknown_keys() {
        let err = toml::from_str::<ScenarioConfig>("lambda = 3.0\nlamda = 4.0\n");
        assert!(err.is_err());
        let ok: ScenarioConfig = toml::from_str("protocol = \"gs\"\ninit = \"one_club:10\"\n").unwrap();
        assert_eq!(ok.protocol, Protocol::Gs);
        assert_eq!(ok.init, InitSpec::OneClub(10));
    }
}
