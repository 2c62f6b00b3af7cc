use num_rational::BigRational;
use num_traits::{Signed, Zero};

use super::{big, big_int, LyapunovConstants, Rates, TypeCountState};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PotentialTerms {
    pub a: BigRational,
    pub b: BigRational,
    pub d: BigRational,
    pub v: BigRational,
}

fn plus(x: &BigRational) -> BigRational {
    if x.is_positive() {
        x.clone()
    } else {
        BigRational::zero()
    }
}

/// Excess demand for the piece held by `own` relative to `other`.
fn demand(n0: u64, own: u64, other: u64, c: &LyapunovConstants) -> BigRational {
    big_int(n0) + big_int(n0.min(own)) + big(c.c1) * big_int(own.saturating_sub(n0))
        - big(c.c2) * big_int(other)
}

pub fn potential(state: TypeCountState, c: &LyapunovConstants) -> PotentialTerms {
    let TypeCountState { n0, n1, n2 } = state;
    let a = demand(n0, n1, n2, c);
    let b = demand(n0, n2, n1, c);
    let d = big(c.c3) * big_int(n0) + big(c.c4) * big_int(n1 + n2);
    let v = plus(&a) * plus(&a) + plus(&b) * plus(&b) + &d * &d;
    PotentialTerms { a, b, d, v }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transition {
    pub rate: BigRational,
    pub next: TypeCountState,
}

/// Transition list of the group-suppression chain. A type that is the
/// strictly largest group does not upload; zero rates are omitted.
pub fn gs_generator_k2(state: TypeCountState, rates: &Rates) -> Vec<Transition> {
    let TypeCountState { n0, n1, n2 } = state;
    let s = state.s();
    let (lambda, us, mu) = (big(rates.lambda), big(rates.us), big(rates.mu));
    let mut out = Vec::with_capacity(7);
    let mut push = |rate: BigRational, next: TypeCountState| {
        if !rate.is_zero() {
            out.push(Transition { rate, next });
        }
    };
    push(lambda, TypeCountState::new(n0 + 1, n1, n2));
    if s == 0 {
        return out;
    }
    let half = &us / big_int(2);
    let per_s = |x: u64| big_int(x) / big_int(s);
    if n0 > 0 {
        push(half.clone(), TypeCountState::new(n0 - 1, n1 + 1, n2));
        push(half, TypeCountState::new(n0 - 1, n1, n2 + 1));
    } else {
        if n1 > 0 {
            push(&us * per_s(n1), TypeCountState::new(n0, n1 - 1, n2));
        }
        if n2 > 0 {
            push(&us * per_s(n2), TypeCountState::new(n0, n1, n2 - 1));
        }
    }
    let type1_largest = n1 > n0 && n1 > n2;
    let type2_largest = n2 > n0 && n2 > n1;
    if !type1_largest {
        if n0 > 0 {
            push(&mu * per_s(n1 * n0), TypeCountState::new(n0 - 1, n1 + 1, n2));
        }
        if n2 > 0 {
            push(&mu * per_s(n1 * n2), TypeCountState::new(n0, n1, n2 - 1));
        }
    }
    if !type2_largest {
        if n0 > 0 {
            push(&mu * per_s(n2 * n0), TypeCountState::new(n0 - 1, n1, n2 + 1));
        }
        if n1 > 0 {
            push(&mu * per_s(n2 * n1), TypeCountState::new(n0, n1 - 1, n2));
        }
    }
    out
}

/// Expected instantaneous change of the potential, summed over the generator.
pub fn drift(state: TypeCountState, c: &LyapunovConstants, rates: &Rates) -> BigRational {
    let v = potential(state, c).v;
    gs_generator_k2(state, rates)
        .into_iter()
        .map(|t| t.rate * (potential(t.next, c).v - &v))
        .fold(BigRational::zero(), |acc, x| acc + x)
}
