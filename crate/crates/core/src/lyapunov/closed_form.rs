//! Term-by-term drift formulas for the regions where the potential is
//! smooth along every transition. Used as an oracle against [`drift`].
//!
//! [`drift`]: super::drift

use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use super::{big, big_int, potential, DriftKernel, LyapunovConstants, Rates, TypeCountState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DriftCase {
    /// Empty peers dominate: `n0 >= n1 + 2` and `n0 >= n2 + 2`.
    Case1,
    /// Type 1 strictly largest with `n0 > 0`.
    Case3_1,
    /// Type 1 strictly largest with `n0 = 0`.
    Case3_2,
    /// `n1 = n2 > n0 > 0`.
    Case4_3,
    /// `n1 = n2 > 0 = n0`.
    Case4_4,
}

impl DriftCase {
    pub const ALL: [DriftCase; 5] = [
        DriftCase::Case1,
        DriftCase::Case3_1,
        DriftCase::Case3_2,
        DriftCase::Case4_3,
        DriftCase::Case4_4,
    ];

    pub fn label(self) -> &'static str {
        match self {
            DriftCase::Case1 => "1",
            DriftCase::Case3_1 => "3.1",
            DriftCase::Case3_2 => "3.2",
            DriftCase::Case4_3 => "4.3",
            DriftCase::Case4_4 => "4.4",
        }
    }

    /// Required signs of `a` and `b` (before and after every transition).
    fn signs(self) -> (Sign, Sign) {
        match self {
            DriftCase::Case1 => (Sign::Included, Sign::Included),
            DriftCase::Case3_1 | DriftCase::Case3_2 => (Sign::Included, Sign::Dropped),
            DriftCase::Case4_3 | DriftCase::Case4_4 => (Sign::Dropped, Sign::Dropped),
        }
    }
}

/// Which formula shape applies, and whether the state had to be mirrored
/// (`n1 <-> n2`) to reach it. Plus-part activation is not checked here.
pub fn classify(st: TypeCountState) -> Option<(DriftCase, bool)> {
    let mirrored = st.n2 > st.n1;
    let TypeCountState { n0, n1, n2 } = if mirrored { st.swapped() } else { st };
    if n0 >= n1 + 2 && n0 >= n2 + 2 {
        return Some((DriftCase::Case1, mirrored));
    }
    if n1 > n2 && n1 > n0 {
        return Some((if n0 > 0 { DriftCase::Case3_1 } else { DriftCase::Case3_2 }, mirrored));
    }
    if n1 == n2 && n1 > n0 {
        return Some((if n0 > 0 { DriftCase::Case4_3 } else { DriftCase::Case4_4 }, mirrored));
    }
    None
}

#[derive(Clone, Copy, PartialEq)]
enum Sign {
    /// Term is kept: value and successor value are non-negative.
    Included,
    /// Term is dropped: value and successor value are non-positive.
    Dropped,
}

impl Sign {
    fn admits(self, x: i8) -> bool {
        match self {
            Sign::Included => x >= 0,
            Sign::Dropped => x <= 0,
        }
    }
}

fn sign_of(x: &BigRational) -> i8 {
    if x.is_positive() {
        1
    } else if x.is_negative() {
        -1
    } else {
        0
    }
}

/// Rate factor of one formula term.
#[derive(Clone, Copy)]
enum RateKind {
    Lambda,
    HalfSeed,
    /// `Us x / s`
    SeedShare(u64),
    /// `mu x y / s`
    Pair(u64, u64),
}

impl RateKind {
    fn positive(self) -> bool {
        match self {
            RateKind::Lambda | RateKind::HalfSeed => true,
            RateKind::SeedShare(x) => x > 0,
            RateKind::Pair(x, y) => x > 0 && y > 0,
        }
    }
}

/// Successor move of a term.
#[derive(Clone, Copy)]
enum Move {
    Arrive,
    To1,
    To2,
    Lose1,
    Lose2,
}

fn apply(st: TypeCountState, m: Move) -> TypeCountState {
    let TypeCountState { n0, n1, n2 } = st;
    match m {
        Move::Arrive => TypeCountState::new(n0 + 1, n1, n2),
        Move::To1 => TypeCountState::new(n0 - 1, n1 + 1, n2),
        Move::To2 => TypeCountState::new(n0 - 1, n1, n2 + 1),
        Move::Lose1 => TypeCountState::new(n0, n1 - 1, n2),
        Move::Lose2 => TypeCountState::new(n0, n1, n2 - 1),
    }
}

/// Bracket shapes; each is `x (2 y + x)` summed over the moving terms.
#[derive(Clone, Copy)]
enum Bracket {
    /// Case 1 arrival: `(2a+1) + (2b+1) + c3(2d+c3)`.
    ArriveBoth,
    /// Case 1 fill of the piece `a` tracks: `-(1+c2)` on `a`, `c4-c3` on `d`.
    FillA,
    FillB,
    /// Case 1 loss of a type-2 peer: `c2` on `a`, `-1` on `b`, `-c4` on `d`.
    LoseA,
    LoseB,
    /// Case 3 arrival: `-(c1-2)` on `a`, `c3` on `d`.
    ArriveA,
    /// Case 3.1 seed to type 1: `2c1-2` on `a`, `c4-c3` on `d`.
    GainA,
    /// Case 3.1 fill towards type 2: `-(c2-c1+2)` on `a`, `c4-c3` on `d`.
    FillOther,
    /// Case 3 loss of a type-1 peer: `-c1` on `a`, `-c4` on `d`.
    ShrinkA,
    /// Case 3.2 seed serves a type-2 peer: `c2` on `a`, `-c4` on `d`.
    RaiseA,
    /// `d` terms only.
    DArrive,
    DFill,
    DLeave,
}

fn terms(case: DriftCase, st: TypeCountState) -> Vec<(RateKind, Move, Bracket)> {
    use Bracket::*;
    use Move::*;
    use RateKind::*;
    let TypeCountState { n0, n1, n2 } = st;
    match case {
        DriftCase::Case1 => vec![
            (Lambda, Arrive, ArriveBoth),
            (HalfSeed, To2, FillA),
            (HalfSeed, To1, FillB),
            (Pair(n2, n0), To2, FillA),
            (Pair(n1, n0), To1, FillB),
            (Pair(n1, n2), Lose2, LoseA),
            (Pair(n2, n1), Lose1, LoseB),
        ],
        DriftCase::Case3_1 => vec![
            (Lambda, Arrive, ArriveA),
            (HalfSeed, To1, GainA),
            (HalfSeed, To2, FillOther),
            (Pair(n2, n0), To2, FillOther),
            (Pair(n2, n1), Lose1, ShrinkA),
        ],
        DriftCase::Case3_2 => vec![
            (Lambda, Arrive, ArriveA),
            (SeedShare(n1), Lose1, ShrinkA),
            (SeedShare(n2), Lose2, RaiseA),
            (Pair(n2, n1), Lose1, ShrinkA),
        ],
        DriftCase::Case4_3 => vec![
            (Lambda, Arrive, DArrive),
            (HalfSeed, To1, DFill),
            (HalfSeed, To2, DFill),
            (Pair(n2, n0), To2, DFill),
            (Pair(n1, n0), To1, DFill),
            (Pair(n2, n1), Lose1, DLeave),
            (Pair(n1, n2), Lose2, DLeave),
        ],
        DriftCase::Case4_4 => vec![
            (Lambda, Arrive, DArrive),
            (SeedShare(n1), Lose1, DLeave),
            (SeedShare(n2), Lose2, DLeave),
            (Pair(n2, n1), Lose1, DLeave),
            (Pair(n1, n2), Lose2, DLeave),
        ],
    }
}

/// Drift from the region formula, or `None` outside the covered regions or
/// where a plus-part the formula assumes does not hold.
pub fn closed_form_drift(
    state: TypeCountState,
    c: &LyapunovConstants,
    rates: &Rates,
) -> Option<BigRational> {
    let (case, mirrored) = classify(state)?;
    let st = if mirrored { state.swapped() } else { state };
    let pt = potential(st, c);
    let (a_sign, b_sign) = case.signs();
    if !a_sign.admits(sign_of(&pt.a)) || !b_sign.admits(sign_of(&pt.b)) {
        return None;
    }
    let (a, b, d) = (&pt.a, &pt.b, &pt.d);
    let (c1, c2, c3, c4) = (big(c.c1), big(c.c2), big(c.c3), big(c.c4));
    let (lambda, us, mu) = (big(rates.lambda), big(rates.us), big(rates.mu));
    let s = big_int(st.s());
    let one = BigRational::from_integer(1.into());
    let two = BigRational::from_integer(2.into());
    let sq = |x: &BigRational, y: &BigRational| x * (&two * y + x);
    let fill_d = sq(&(&c4 - &c3), d);
    let leave_d = sq(&-&c4, d);
    let arrive_d = sq(&c3, d);
    let up = -(&one + &c2);

    let mut total = BigRational::zero();
    for (rate, mv, bracket) in terms(case, st) {
        if !rate.positive() {
            continue;
        }
        let next = potential(apply(st, mv), c);
        if !a_sign.admits(sign_of(&next.a)) || !b_sign.admits(sign_of(&next.b)) {
            return None;
        }
        let r = match rate {
            RateKind::Lambda => lambda.clone(),
            RateKind::HalfSeed => &us / &two,
            RateKind::SeedShare(x) => &us * big_int(x) / &s,
            RateKind::Pair(x, y) => &mu * big_int(x * y) / &s,
        };
        let v = match bracket {
            Bracket::ArriveBoth => (&two * a + &one) + (&two * b + &one) + &arrive_d,
            Bracket::FillA => sq(&up, a) + &fill_d,
            Bracket::FillB => sq(&up, b) + &fill_d,
            Bracket::LoseA => sq(&c2, a) + &leave_d + (-&two * b + &one),
            Bracket::LoseB => sq(&c2, b) + &leave_d + (-&two * a + &one),
            Bracket::ArriveA => sq(&-(&c1 - &two), a) + &arrive_d,
            Bracket::GainA => sq(&(&two * &c1 - &two), a) + &fill_d,
            Bracket::FillOther => sq(&-(&c2 - &c1 + &two), a) + &fill_d,
            Bracket::ShrinkA => sq(&-&c1, a) + &leave_d,
            Bracket::RaiseA => sq(&c2, a) + &leave_d,
            Bracket::DArrive => arrive_d.clone(),
            Bracket::DFill => fill_d.clone(),
            Bracket::DLeave => leave_d.clone(),
        };
        total += r * v;
    }
    Some(total)
}

fn sign_i(x: i128) -> i8 {
    x.signum() as i8
}

/// Whether [`closed_form_drift`] returns a value at `state`, decided with
/// integer arithmetic.
pub fn covered(state: TypeCountState, kernel: &DriftKernel) -> Option<(DriftCase, bool)> {
    let (case, mirrored) = classify(state)?;
    let st = if mirrored { state.swapped() } else { state };
    let (a_sign, b_sign) = case.signs();
    let ok = |s: TypeCountState| {
        kernel
            .scaled_demands(s)
            .is_some_and(|(a, b)| a_sign.admits(sign_i(a)) && b_sign.admits(sign_i(b)))
    };
    if !ok(st) {
        return None;
    }
    terms(case, st)
        .into_iter()
        .filter(|(r, _, _)| r.positive())
        .all(|(_, mv, _)| ok(apply(st, mv)))
        .then_some((case, mirrored))
}

/// Every state on shell `s` with a closed form, grouped by case and mirror.
pub fn covered_regions(
    s: u64,
    kernel: &DriftKernel,
) -> BTreeMap<(DriftCase, bool), Vec<TypeCountState>> {
    let mut out: BTreeMap<_, Vec<_>> = BTreeMap::new();
    for st in TypeCountState::shell(s) {
        if let Some(key) = covered(st, kernel) {
            out.entry(key).or_default().push(st);
        }
    }
    out
}
