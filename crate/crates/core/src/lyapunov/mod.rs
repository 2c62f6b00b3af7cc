//! Potential function, drift and negative-drift certification for the
//! two-piece group-suppression chain.
//!
//! State is the type count `(n0, n1, n2)`: peers holding nothing, only
//! piece 0, only piece 1. All sign decisions use exact rationals.

mod closed_form;
mod constants;
mod kernel;
mod potential;
mod scan;

use std::fmt;

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::GroupHistogram;
use crate::model::PieceProfile;

pub use closed_form::{classify, closed_form_drift, covered, covered_regions, DriftCase};
pub use constants::{
    check_conditions, find_constants, ConditionReport, LyapunovConstants, CONDITION_NAMES,
    PRESET_DEFAULT,
};
pub use kernel::DriftKernel;
pub use potential::{drift, gs_generator_k2, potential, PotentialTerms, Transition};
pub use scan::{
    drift_scan, parse_shells, CertifierReport, DriftScanResult, ScanMode, ShellMax,
};

/// Exact rational with machine-word parts; used for constants and rates.
pub type Q = Ratio<i64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TypeCountState {
    pub n0: u64,
    pub n1: u64,
    pub n2: u64,
}

impl TypeCountState {
    pub const fn new(n0: u64, n1: u64, n2: u64) -> Self {
        Self { n0, n1, n2 }
    }

    pub fn s(&self) -> u64 {
        self.n0 + self.n1 + self.n2
    }

    /// The state with types 1 and 2 exchanged.
    pub fn swapped(&self) -> Self {
        Self::new(self.n0, self.n2, self.n1)
    }

    /// Read the counts off a two-piece histogram. Complete profiles are
    /// ignored; they never stay in the chain.
    pub fn from_histogram(hist: &GroupHistogram) -> Self {
        Self::new(
            hist.count(&PieceProfile::empty(2)),
            hist.count(&PieceProfile::from_pieces(2, [0])),
            hist.count(&PieceProfile::from_pieces(2, [1])),
        )
    }

    /// Every state with `n0 + n1 + n2 = s`.
    pub fn shell(s: u64) -> impl Iterator<Item = Self> {
        (0..=s).flat_map(move |n0| (0..=s - n0).map(move |n1| Self::new(n0, n1, s - n0 - n1)))
    }
}

impl fmt::Display for TypeCountState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.n0, self.n1, self.n2)
    }
}

/// Arrival, seed and per-peer contact rates as exact rationals.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rates {
    #[serde(with = "ratio_str")]
    pub lambda: Q,
    #[serde(with = "ratio_str")]
    pub us: Q,
    #[serde(with = "ratio_str")]
    pub mu: Q,
}

impl Rates {
    pub fn new(lambda: Q, us: Q, mu: Q) -> Result<Self> {
        for (key, v) in [("lambda", lambda), ("us", us), ("mu", mu)] {
            if v <= Q::from_integer(0) {
                return Err(Error::config(key, format!("must be positive, got {v}")));
            }
        }
        Ok(Self { lambda, us, mu })
    }

    /// Converts through the shortest decimal form, so `0.1` becomes `1/10`.
    pub fn from_f64(lambda: f64, us: f64, mu: f64) -> Result<Self> {
        Self::new(
            parse_ratio(&lambda.to_string())?,
            parse_ratio(&us.to_string())?,
            parse_ratio(&mu.to_string())?,
        )
    }
}

/// Parse `"3"`, `"12.5"`, `"1/19388"` or `"-0.25"` exactly.
pub fn parse_ratio(s: &str) -> Result<Q> {
    let bad = || Error::config("rational", format!("cannot parse {s:?} as an exact rational"));
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: i64 = n.trim().parse().map_err(|_| bad())?;
        let d: i64 = d.trim().parse().map_err(|_| bad())?;
        if d == 0 {
            return Err(bad());
        }
        return Ok(Q::new(n, d));
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() && frac.is_empty() || !(int.bytes().chain(frac.bytes()).all(|b| b.is_ascii_digit())) {
        return Err(bad());
    }
    let den = 10i64.checked_pow(frac.len() as u32).ok_or_else(bad)?;
    let digits = format!("{int}{frac}");
    let num: i64 = if digits.is_empty() { 0 } else { digits.parse().map_err(|_| bad())? };
    let q = Q::new(num, den);
    Ok(if neg { -q } else { q })
}

pub(crate) fn big(q: Q) -> BigRational {
    BigRational::new(BigInt::from(*q.numer()), BigInt::from(*q.denom()))
}

pub(crate) fn big_int(n: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// Serialises a rational as `"p/q"` (or `"p"`).
pub(crate) mod ratio_str {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(q: &Q, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(q)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Q, D::Error> {
        let s = String::deserialize(d)?;
        parse_ratio(&s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_exact_rationals() {
        assert_eq!(parse_ratio("12.5").unwrap(), Q::new(25, 2));
        assert_eq!(parse_ratio("6.25").unwrap(), Q::new(25, 4));
        assert_eq!(parse_ratio("1/19388").unwrap(), Q::new(1, 19388));
        assert_eq!(parse_ratio("-0.5").unwrap(), Q::new(-1, 2));
        assert_eq!(parse_ratio("4").unwrap(), Q::from_integer(4));
        assert!(parse_ratio("abc").is_err());
        assert!(parse_ratio("1/0").is_err());
        assert_eq!(Rates::from_f64(0.1, 2.0, 1.0).unwrap().lambda, Q::new(1, 10));
    }

    /// One-step transition frequencies of the simulator from a frozen state
    /// against the generator, chi-square at the 1% level.
    #[test]
    fn simulator_agrees_with_generator() {
        use crate::config::{Protocol, ScenarioConfig};
        use crate::engine::{RngStream, Simulator};
        use num_traits::ToPrimitive;
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        use std::collections::BTreeMap;

        for (n0, n1, n2) in [(2, 3, 1), (0, 3, 2), (3, 3, 1)] {
            let mut profiles = vec!["00"; n0];
            profiles.extend(vec!["10"; n1]);
            profiles.extend(vec!["01"; n2]);
            let cfg = ScenarioConfig {
                protocol: Protocol::Gs,
                init: format!("custom:{}", profiles.join(",")).parse().unwrap(),
                ..ScenarioConfig::default()
            };
            let mut sim = Simulator::new(&cfg, RngStream::new(11, 0)).unwrap();
            let frozen = sim.state.clone();
            let start = TypeCountState::from_histogram(frozen.hist());
            let trials = 40_000u64;
            let mut seen: BTreeMap<TypeCountState, u64> = BTreeMap::new();
            for _ in 0..trials {
                sim.state = frozen.clone();
                sim.step();
                *seen.entry(TypeCountState::from_histogram(sim.state.hist())).or_default() += 1;
            }
            let rates = Rates::from_f64(cfg.lambda, cfg.us, cfg.mu).unwrap();
            let total = cfg.lambda + cfg.us + cfg.mu * start.s() as f64;
            let mut expected: BTreeMap<TypeCountState, f64> = BTreeMap::new();
            for t in gs_generator_k2(start, &rates) {
                *expected.entry(t.next).or_default() += t.rate.to_f64().unwrap() / total;
            }
            let moved: f64 = expected.values().sum();
            expected.insert(start, 1.0 - moved);
            assert!(seen.keys().all(|k| expected.contains_key(k)), "{seen:?}");
            let chi: f64 = expected
                .iter()
                .map(|(k, p)| {
                    let e = p * trials as f64;
                    let o = seen.get(k).copied().unwrap_or(0) as f64;
                    (o - e).powi(2) / e
                })
                .sum();
            let crit = ChiSquared::new((expected.len() - 1) as f64).unwrap().inverse_cdf(0.99);
            assert!(chi < crit, "{start}: chi2 {chi} >= {crit}");
        }
    }

    #[test]
    fn shell_enumeration() {
        assert_eq!(TypeCountState::shell(0).count(), 1);
        assert_eq!(TypeCountState::shell(10).count(), 66);
        assert!(TypeCountState::shell(7).all(|s| s.s() == 7));
    }
}
