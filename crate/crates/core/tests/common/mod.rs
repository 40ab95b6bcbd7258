//! Random rational objects for integration tests.
#![allow(dead_code)]

use bellkit_core::lhv::HiddenState;
use bellkit_core::probcore::rational;
use bellkit_core::{
    Alphabet, CondFamily, ExactProb, LhvModel, Outcome, PairPmf, Quadruple, Rational, Setting,
    SettingsDist, Spreadsheet,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;
pub type TestRng = ChaCha8Rng;

pub fn rng(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `k` non-negative rationals summing to one, with varied denominators.
/// With `positive`, every entry is nonzero.
pub fn pmf(rng: &mut TestRng, k: usize, positive: bool) -> Vec<Rational> {
    let scale: i64 = rng.gen_range(1..=997);
    loop {
        let w: Vec<i64> = (0..k)
            .map(|_| rng.gen_range(i64::from(positive)..=scale))
            .collect();
        let total: i64 = w.iter().sum();
        if total > 0 {
            return w.into_iter().map(|x| rational(x, total)).collect();
        }
    }
}

pub fn binary_pair(rng: &mut TestRng) -> PairPmf {
    use Outcome::{Minus, Plus};
    let p = pmf(rng, 4, false);
    let cells = [(Minus, Minus), (Minus, Plus), (Plus, Minus), (Plus, Plus)];
    PairPmf::from_entries(
        Alphabet::Binary,
        cells.into_iter().zip(p).map(|((x, y), v)| (x, y, v)),
    )
    .unwrap()
}

pub fn binary_family(rng: &mut TestRng) -> CondFamily {
    CondFamily::from_fn(Alphabet::Binary, |_, _| binary_pair(rng)).unwrap()
}

pub fn ternary_family(rng: &mut TestRng) -> CondFamily {
    CondFamily::from_fn(Alphabet::Ternary, |_, _| {
        let p = pmf(rng, 9, false);
        let cells = Outcome::ALL.into_iter().flat_map(|x| Outcome::ALL.map(|y| (x, y)));
        PairPmf::from_entries(
            Alphabet::Ternary,
            cells.zip(p).map(|((x, y), v)| (x, y, v)),
        )
        .unwrap()
    })
    .unwrap()
}

pub fn settings(rng: &mut TestRng, full_support: bool) -> SettingsDist {
    let p = pmf(rng, 4, full_support);
    SettingsDist::from_entries(Setting::pairs().zip(p).map(|((a, b), v)| (a, b, v))).unwrap()
}

pub fn quadruple(rng: &mut TestRng) -> Quadruple {
    Quadruple::from_index(rng.gen_range(0..16))
}

/// A mixture of up to `max_states` deterministic strategies.
pub fn lhv_model(rng: &mut TestRng, max_states: usize) -> LhvModel {
    let k = rng.gen_range(1..=max_states);
    let p = pmf(rng, k, false);
    LhvModel::new(
        p.into_iter()
            .enumerate()
            .map(|(i, v)| HiddenState {
                id: format!("l{i}"),
                p: ExactProb::new(v).unwrap(),
                response: quadruple(rng),
            })
            .collect(),
    )
    .unwrap()
}

pub fn sheet(rng: &mut TestRng, max_rows: usize) -> Spreadsheet {
    let n = rng.gen_range(1..=max_rows);
    Spreadsheet::new((0..n).map(|_| quadruple(rng)).collect()).unwrap()
}

/// Fine's criterion for a binary family: a coupling of (X1, X2, Y1, Y2)
/// exists iff the family is no-signalling and every Clauser–Horne
/// combination lies in [−1, 0].
pub fn fine_admits_coupling(q: &CondFamily) -> bool {
    use Outcome::Plus;
    let pp = |a: Setting, b: Setting| q.get(a, b).get(Plus, Plus).value().clone();
    let px = |a: Setting, b: Setting| q.get(a, b).marginal_x()[Plus.index()].value().clone();
    let py = |a: Setting, b: Setting| q.get(a, b).marginal_y()[Plus.index()].value().clone();
    for a in Setting::ALL {
        let [b1, b2] = Setting::ALL;
        if px(a, b1) != px(a, b2) {
            return false;
        }
    }
    for b in Setting::ALL {
        let [a1, a2] = Setting::ALL;
        if py(a1, b) != py(a2, b) {
            return false;
        }
    }
    let other = |s: Setting| if s == Setting::One { Setting::Two } else { Setting::One };
    for (ma, mb) in Setting::pairs() {
        let mut ch = Rational::from_integer(0.into());
        for (a, b) in Setting::pairs() {
            if (a, b) == (ma, mb) {
                ch -= pp(a, b);
            } else {
                ch += pp(a, b);
            }
        }
        ch -= px(other(ma), Setting::One);
        ch -= py(Setting::One, other(mb));
        if ch > Rational::from_integer(0.into()) || ch < Rational::from_integer((-1).into()) {
            return false;
        }
    }
    true
}
