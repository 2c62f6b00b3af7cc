use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    check_conditions, DriftKernel, LyapunovConstants, Rates, TypeCountState, CONDITION_NAMES,
};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanMode {
    /// Every state on the shell.
    Full,
    /// Corners, edges, boundary lines and a coarse interior lattice.
    Grid,
}

impl fmt::Display for ScanMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScanMode::Full => "full",
            ScanMode::Grid => "grid",
        })
    }
}

impl FromStr for ScanMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(ScanMode::Full),
            "grid" => Ok(ScanMode::Grid),
            _ => Err(Error::config("mode", format!("expected full|grid, got {s:?}"))),
        }
    }
}

mod big_str {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(q: &BigRational, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(q)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<BigRational, D::Error> {
        let s = String::deserialize(d)?;
        let parse = |x: &str| x.trim().parse::<BigInt>().map_err(serde::de::Error::custom);
        match s.split_once('/') {
            Some((n, m)) => Ok(BigRational::new(parse(n)?, parse(m)?)),
            None => Ok(BigRational::from_integer(parse(&s)?)),
        }
    }

    pub mod opt {
        use super::*;

        pub fn serialize<S: Serializer>(q: &Option<BigRational>, s: S) -> std::result::Result<S::Ok, S::Error> {
            match q {
                Some(q) => s.collect_str(q),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<BigRational>, D::Error> {
            #[derive(Deserialize)]
            struct W(#[serde(with = "super")] BigRational);
            Ok(Option::<W>::deserialize(d)?.map(|w| w.0))
        }
    }
}

fn approx(q: &BigRational) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShellMax {
    pub s: u64,
    #[serde(with = "big_str")]
    pub max_drift: BigRational,
    pub max_drift_approx: f64,
    pub argmax: TypeCountState,
    pub states: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftScanResult {
    pub mode: ScanMode,
    pub shells: Vec<ShellMax>,
    /// Smallest scanned shell from which every scanned maximum is negative.
    pub s0: Option<u64>,
    #[serde(with = "big_str::opt")]
    pub epsilon: Option<BigRational>,
    pub epsilon_approx: Option<f64>,
    /// Largest drift over all states with `s < s0`, found by enumeration.
    #[serde(with = "big_str::opt")]
    pub b_bound: Option<BigRational>,
    pub b_bound_approx: Option<f64>,
    pub b_bound_state: Option<TypeCountState>,
}

impl DriftScanResult {
    pub fn max_for(&self, s: u64) -> Option<&ShellMax> {
        self.shells.iter().find(|m| m.s == s)
    }

    pub fn all_negative(&self) -> bool {
        self.shells.iter().all(|m| m.max_drift.is_negative())
    }
}

/// Running maximum over one shell. Numerators share a denominator so they
/// compare directly; overflowing states go through exact big rationals.
struct ShellBest<'a> {
    kernel: &'a DriftKernel,
    num: Option<(i128, TypeCountState)>,
    big: Option<(BigRational, TypeCountState)>,
    states: u64,
}

impl<'a> ShellBest<'a> {
    fn new(kernel: &'a DriftKernel) -> Self {
        Self { kernel, num: None, big: None, states: 0 }
    }

    fn visit(&mut self, st: TypeCountState, weight: u64) {
        self.states += weight;
        match self.kernel.numerator(st) {
            Some(n) => {
                if self.num.is_none_or(|(b, _)| n > b) {
                    self.num = Some((n, st));
                }
            }
            None => {
                let v = self.kernel.drift(st);
                if self.big.as_ref().is_none_or(|(b, _)| v > *b) {
                    self.big = Some((v, st));
                }
            }
        }
    }

    fn finish(self, s: u64) -> ShellMax {
        let from_num = self.num.map(|(n, st)| {
            (
                BigRational::new(BigInt::from(n), BigInt::from(self.kernel.denominator(s))),
                st,
            )
        });
        let (max_drift, argmax) = match (from_num, self.big) {
            (Some(a), Some(b)) => if b.0 > a.0 { b } else { a },
            (Some(a), None) | (None, Some(a)) => a,
            (None, None) => unreachable!("every shell has a state"),
        };
        ShellMax {
            s,
            max_drift_approx: approx(&max_drift),
            max_drift,
            argmax,
            states: self.states,
        }
    }
}

/// Exhaustive maximum over shell `s`. Drift is symmetric under `n1 <-> n2`,
/// so only `n1 <= n2` is evaluated and mirrored states are counted.
fn full_shell(kernel: &DriftKernel, s: u64) -> ShellMax {
    let mut best = ShellBest::new(kernel);
    for n0 in 0..=s {
        let rest = s - n0;
        for n1 in 0..=rest / 2 {
            let n2 = rest - n1;
            best.visit(TypeCountState::new(n0, n1, n2), if n1 == n2 { 1 } else { 2 });
        }
    }
    best.finish(s)
}

/// States probed on shell `s` in grid mode, sorted and de-duplicated.
pub(crate) fn grid_states(s: u64, p: &super::Q) -> Vec<TypeCountState> {
    let mut pts: Vec<(u64, u64)> = Vec::new();
    // (n0, n1) from a value on coordinate `i` and one on coordinate `j`.
    let mut put = |coords: [Option<u64>; 3]| {
        let known: u64 = coords.iter().flatten().sum();
        if known > s {
            return;
        }
        let fill = s - known;
        let v: Vec<u64> = coords.iter().map(|c| c.unwrap_or(fill)).collect();
        pts.push((v[0], v[1]));
    };
    let high = {
        // ceil((1 - p) s)
        let num = (*p.denom() - *p.numer()) as i128 * s as i128;
        Integer::div_ceil(&num, &(*p.denom() as i128)) as u64
    };
    let mut levels = vec![0, 1, 2, high.saturating_sub(1), high, high + 1];
    levels.sort_unstable();
    levels.dedup();
    for i in 0..3 {
        for &v in &levels {
            if v > s {
                continue;
            }
            let j = (i + 1) % 3;
            for w in 0..=s - v {
                let mut c = [None; 3];
                c[i] = Some(v);
                c[j] = Some(w);
                put(c);
            }
        }
    }
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        for delta in [-1i64, 0, 1] {
            for nj in 0..=s {
                let ni = nj as i64 + delta;
                if ni < 0 {
                    continue;
                }
                let mut c = [None; 3];
                c[i] = Some(ni as u64);
                c[j] = Some(nj);
                put(c);
            }
        }
    }
    let step = s.div_ceil(20).max(1);
    for n0 in (0..=s).step_by(step as usize) {
        for n1 in (0..=s - n0).step_by(step as usize) {
            put([Some(n0), Some(n1), None]);
        }
    }
    pts.sort_unstable();
    pts.dedup();
    pts.into_iter()
        .map(|(n0, n1)| TypeCountState::new(n0, n1, s - n0 - n1))
        .collect()
}

fn grid_shell(kernel: &DriftKernel, s: u64, p: &super::Q) -> ShellMax {
    let mut best = ShellBest::new(kernel);
    for st in grid_states(s, p) {
        best.visit(st, 1);
    }
    best.finish(s)
}

/// Scan the given shells for their maximum drift and derive `s0`, the
/// margin `epsilon` and the bound `b_bound` over the finite set `s < s0`.
///
/// `b_bound` needs every state below `s0`; it is only computed in full
/// mode, where that enumeration is of the same order as the scan itself.
pub fn drift_scan(
    consts: &LyapunovConstants,
    rates: &Rates,
    shells: &[u64],
    mode: ScanMode,
) -> DriftScanResult {
    let kernel = DriftKernel::new(consts, rates);
    let mut shells: Vec<u64> = shells.to_vec();
    shells.sort_unstable();
    shells.dedup();
    let maxima: Vec<ShellMax> = shells
        .par_iter()
        .map(|&s| match mode {
            ScanMode::Full => full_shell(&kernel, s),
            ScanMode::Grid => grid_shell(&kernel, s, &consts.p),
        })
        .collect();

    let mut s0 = None;
    for m in maxima.iter().rev() {
        if m.max_drift.is_negative() {
            s0 = Some(m.s);
        } else {
            break;
        }
    }
    let epsilon = s0.map(|s0| {
        -maxima
            .iter()
            .filter(|m| m.s >= s0)
            .map(|m| m.max_drift.clone())
            .max()
            .expect("s0 is a scanned shell")
    });
    let below = match (mode, s0) {
        (ScanMode::Full, Some(s0)) if s0 > 0 => {
            let per_shell: Vec<ShellMax> =
                (0..s0).into_par_iter().map(|s| full_shell(&kernel, s)).collect();
            per_shell.into_iter().max_by(|a, b| a.max_drift.cmp(&b.max_drift))
        }
        _ => None,
    };
    DriftScanResult {
        mode,
        shells: maxima,
        s0,
        epsilon_approx: epsilon.as_ref().map(approx),
        epsilon,
        b_bound_approx: below.as_ref().map(|m| m.max_drift_approx),
        b_bound_state: below.as_ref().map(|m| m.argmax),
        b_bound: below.map(|m| m.max_drift),
    }
}

/// Parse `"100:50:2000"` (inclusive range) or `"100,150,200"`.
pub fn parse_shells(text: &str) -> Result<Vec<u64>> {
    let bad = || Error::config("shells", format!("expected START:STEP:END or a comma list, got {text:?}"));
    let num = |x: &str| x.trim().parse::<u64>().map_err(|_| bad());
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        [a, step, b] => {
            let (a, step, b) = (num(a)?, num(step)?, num(b)?);
            if step == 0 || a > b {
                return Err(bad());
            }
            Ok((a..=b).step_by(step as usize).collect())
        }
        [list] => list.split(',').map(num).collect(),
        _ => Err(bad()),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConditionEntry {
    pub index: usize,
    pub condition: String,
    pub holds: bool,
}

/// JSON-ready summary of a certification run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CertifierReport {
    pub rates: Rates,
    pub constants: LyapunovConstants,
    pub conditions: Vec<ConditionEntry>,
    pub all_conditions_hold: bool,
    pub scan: Option<DriftScanResult>,
}

impl CertifierReport {
    pub fn new(rates: &Rates, constants: &LyapunovConstants, scan: Option<DriftScanResult>) -> Self {
        let report = check_conditions(constants, rates.lambda, rates.us);
        Self {
            rates: *rates,
            constants: *constants,
            conditions: CONDITION_NAMES
                .iter()
                .zip(report.holds)
                .enumerate()
                .map(|(i, (name, holds))| ConditionEntry {
                    index: i + 1,
                    condition: name.to_string(),
                    holds,
                })
                .collect(),
            all_conditions_hold: report.all(),
            scan,
        }
    }
}
