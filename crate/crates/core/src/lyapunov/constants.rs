use num_integer::Integer;
use serde::{Deserialize, Serialize};

use super::{ratio_str, Rates, Q};
use crate::error::{Error, Result};

/// `(c1, c3, c4)` used unless the caller supplies another preset.
pub const PRESET_DEFAULT: (i64, i64, i64) = (32, 20, 10);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LyapunovConstants {
    #[serde(with = "ratio_str")]
    pub c1: Q,
    #[serde(with = "ratio_str")]
    pub c2: Q,
    #[serde(with = "ratio_str")]
    pub c3: Q,
    #[serde(with = "ratio_str")]
    pub c4: Q,
    #[serde(with = "ratio_str")]
    pub p: Q,
}

pub const CONDITION_NAMES: [&str; 10] = [
    "c1, c2, c3, c4, p > 0",
    "0 < p < 1/2",
    "c4 < c3",
    "2 < c1",
    "3 c1 < c2",
    "p c2 < 1 - p",
    "lambda c3^2 < [1 - p(1 + c2)][Us(1 + c2) - 2 lambda]",
    "2(c1 - 1) < c4(c3 - c4)",
    "2 c3^2 < (c1 - 2)^2",
    "lambda c3^2 < Us (c2 - 3 c1 + 4) / 12",
];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub holds: [bool; 10],
}

impl ConditionReport {
    pub fn all(&self) -> bool {
        self.holds.iter().all(|&b| b)
    }

    /// One-based indices of the failing conditions.
    pub fn failures(&self) -> Vec<usize> {
        (1..=10).filter(|&i| !self.holds[i - 1]).collect()
    }
}

/// Evaluate the ten constant conditions exactly, in order.
pub fn check_conditions(c: &LyapunovConstants, lambda: Q, us: Q) -> ConditionReport {
    let zero = Q::from_integer(0);
    let one = Q::from_integer(1);
    let two = Q::from_integer(2);
    let three = Q::from_integer(3);
    let LyapunovConstants { c1, c2, c3, c4, p } = *c;
    // Products are formed in i128 to keep large c2 from overflowing.
    let wide = |q: Q| Ratio128::new(*q.numer() as i128, *q.denom() as i128);
    let (l, u) = (wide(lambda), wide(us));
    let (w1, w2, w3, w4, wp) = (wide(c1), wide(c2), wide(c3), wide(c4), wide(p));
    let i = |n: i128| Ratio128::from_integer(n);
    ConditionReport {
        holds: [
            [c1, c2, c3, c4, p].iter().all(|&x| x > zero),
            zero < p && p < one / two,
            c4 < c3,
            two < c1,
            three * c1 < c2,
            p * c2 < one - p,
            l * w3 * w3 < (i(1) - wp * (i(1) + w2)) * (u * (i(1) + w2) - i(2) * l),
            i(2) * (w1 - i(1)) < w4 * (w3 - w4),
            i(2) * w3 * w3 < (w1 - i(2)) * (w1 - i(2)),
            l * w3 * w3 < u * (w2 - i(3) * w1 + i(4)) / i(12),
        ],
    }
}

type Ratio128 = num_rational::Ratio<i128>;

fn floor(q: Ratio128) -> i128 {
    q.numer().div_floor(q.denom())
}

/// Fix `(c1, c3, c4)`, set `p = 1/(2(1 + c2))` and take the smallest integer
/// `c2` meeting the remaining conditions.
pub fn find_constants(rates: &Rates, preset: (Q, Q, Q)) -> Result<LyapunovConstants> {
    let (c1, c3, c4) = preset;
    let wide = |q: Q| Ratio128::new(*q.numer() as i128, *q.denom() as i128);
    let (l, u) = (wide(rates.lambda), wide(rates.us));
    let (w1, w3) = (wide(c1), wide(c3));
    let i = |n: i128| Ratio128::from_integer(n);
    // 3 c1 < c2
    let b5 = floor(i(3) * w1);
    // With this p the bracket in the seventh condition is 1/2, giving
    // Us (1 + c2) > 2 lambda c3^2 + 2 lambda.
    let b7 = floor((i(2) * l * w3 * w3 + i(2) * l) / u - i(1));
    // Us (c2 - 3 c1 + 4) > 12 lambda c3^2
    let b10 = floor(i(12) * l * w3 * w3 / u + i(3) * w1 - i(4));
    let mut c2 = b5.max(b7).max(b10).max(0) + 1;
    loop {
        let c2q: i64 = c2
            .try_into()
            .map_err(|_| Error::config("c2", "required c2 does not fit in 64 bits"))?;
        let consts = LyapunovConstants {
            c1,
            c2: Q::from_integer(c2q),
            c3,
            c4,
            p: Q::new(1, 2 * (1 + c2q)),
        };
        let report = check_conditions(&consts, rates.lambda, rates.us);
        if report.all() {
            return Ok(consts);
        }
        // Only the preset-dependent conditions can fail once c2 clears the
        // bounds; retrying cannot fix those.
        let fixed: Vec<_> = report
            .failures()
            .into_iter()
            .filter(|i| matches!(i, 1 | 3 | 4 | 8 | 9))
            .collect();
        if !fixed.is_empty() {
            return Err(Error::InvalidConstants(fixed));
        }
        c2 += 1;
    }
}
