use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::{BigRational, Ratio};

use super::{drift, LyapunovConstants, Rates, TypeCountState, Q};

/// Integer drift evaluator for shell scans.
///
/// Constants are scaled by the lcm `D` of their denominators and rates by
/// the lcm `R` of theirs. For a shell of size `s` (with `S = max(s, 1)`) the
/// drift equals `numerator / (2 R S D^2)`, so drifts within one shell can be
/// compared through numerators alone.
#[derive(Clone, Debug)]
pub struct DriftKernel {
    c1: i128,
    c2: i128,
    c3: i128,
    c4: i128,
    d: i128,
    lambda: i128,
    us: i128,
    mu: i128,
    r: i128,
    consts: LyapunovConstants,
    rates: Rates,
}

fn lcm_denoms(qs: &[Q]) -> i128 {
    qs.iter().fold(1i128, |acc, q| acc.lcm(&(*q.denom() as i128)))
}

fn scale(q: Q, by: i128) -> i128 {
    *q.numer() as i128 * (by / *q.denom() as i128)
}

impl DriftKernel {
    pub fn new(consts: &LyapunovConstants, rates: &Rates) -> Self {
        let d = lcm_denoms(&[consts.c1, consts.c2, consts.c3, consts.c4]);
        let r = lcm_denoms(&[rates.lambda, rates.us, rates.mu]);
        Self {
            c1: scale(consts.c1, d),
            c2: scale(consts.c2, d),
            c3: scale(consts.c3, d),
            c4: scale(consts.c4, d),
            d,
            lambda: scale(rates.lambda, r),
            us: scale(rates.us, r),
            mu: scale(rates.mu, r),
            r,
            consts: *consts,
            rates: *rates,
        }
    }

    fn demand(&self, n0: i128, own: i128, other: i128) -> Option<i128> {
        let base = self.d.checked_mul(n0 + n0.min(own))?;
        let excess = self.c1.checked_mul((own - n0).max(0))?;
        base.checked_add(excess)?.checked_sub(self.c2.checked_mul(other)?)
    }

    /// `(D a, D b)`; signs match those of `a` and `b`.
    pub(crate) fn scaled_demands(&self, st: TypeCountState) -> Option<(i128, i128)> {
        let (n0, n1, n2) = (st.n0 as i128, st.n1 as i128, st.n2 as i128);
        Some((self.demand(n0, n1, n2)?, self.demand(n0, n2, n1)?))
    }

    /// `D^2 V` at `(n0, n1, n2)`.
    fn v(&self, n0: i128, n1: i128, n2: i128) -> Option<i128> {
        let a = self.demand(n0, n1, n2)?.max(0);
        let b = self.demand(n0, n2, n1)?.max(0);
        let dd = self.c3.checked_mul(n0)?.checked_add(self.c4.checked_mul(n1 + n2)?)?;
        a.checked_mul(a)?
            .checked_add(b.checked_mul(b)?)?
            .checked_add(dd.checked_mul(dd)?)
    }

    /// Scaled drift numerator, or `None` if an intermediate overflows.
    pub fn numerator(&self, st: TypeCountState) -> Option<i128> {
        let (n0, n1, n2) = (st.n0 as i128, st.n1 as i128, st.n2 as i128);
        let s = n0 + n1 + n2;
        let big_s = s.max(1);
        let v0 = self.v(n0, n1, n2)?;
        let mut acc: i128 = 0;
        let mut add = |w: i128, m0: i128, m1: i128, m2: i128| -> Option<()> {
            if w == 0 {
                return Some(());
            }
            let dv = self.v(n0 + m0, n1 + m1, n2 + m2)?.checked_sub(v0)?;
            acc = acc.checked_add(w.checked_mul(dv)?)?;
            Some(())
        };
        add(2 * self.lambda.checked_mul(big_s)?, 1, 0, 0)?;
        if s == 0 {
            return Some(acc);
        }
        if n0 > 0 {
            add(self.us.checked_mul(big_s)?, -1, 1, 0)?;
            add(self.us.checked_mul(big_s)?, -1, 0, 1)?;
        } else {
            add(2 * self.us.checked_mul(n1)?, 0, -1, 0)?;
            add(2 * self.us.checked_mul(n2)?, 0, 0, -1)?;
        }
        let m2 = 2 * self.mu;
        if !(n1 > n0 && n1 > n2) {
            add(m2.checked_mul(n1 * n0)?, -1, 1, 0)?;
            add(m2.checked_mul(n1 * n2)?, 0, 0, -1)?;
        }
        if !(n2 > n0 && n2 > n1) {
            add(m2.checked_mul(n2 * n0)?, -1, 0, 1)?;
            add(m2.checked_mul(n2 * n1)?, 0, -1, 0)?;
        }
        Some(acc)
    }

    /// Denominator shared by every state on shell `s`.
    pub fn denominator(&self, s: u64) -> i128 {
        2 * self.r * (s.max(1) as i128) * self.d * self.d
    }

    pub fn drift(&self, st: TypeCountState) -> BigRational {
        match self.numerator(st) {
            Some(n) => BigRational::new(BigInt::from(n), BigInt::from(self.denominator(st.s()))),
            None => drift(st, &self.consts, &self.rates),
        }
    }

    /// Reduced drift as an `i128` ratio, `None` on overflow.
    pub fn drift_small(&self, st: TypeCountState) -> Option<Ratio<i128>> {
        Some(Ratio::new(self.numerator(st)?, self.denominator(st.s())))
    }
}
