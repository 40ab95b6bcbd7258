//! Named binary conditional families used in demonstrations and tests.

use num_traits::One;

use crate::probcore::{Alphabet, CondFamily, Outcome, PairPmf, Rational, Setting};

/// Perfect correlation on (1,1), (1,2), (2,1) and perfect anticorrelation
/// on (2,2), with uniform marginals. CHSH value 4.
pub fn pr_box() -> CondFamily {
    with_correlations([[1, 1], [1, -1]].map(|row| row.map(|e| Rational::from_integer(e.into()))))
}

/// q_11 = point (+1,+1), q_12 = point (−1,+1), the rest uniform. Alice's
/// marginal under setting 1 depends on Bob's setting.
pub fn signalling() -> CondFamily {
    use Outcome::{Minus, Plus};
    CondFamily::from_fn(Alphabet::Binary, |a, b| match (a, b) {
        (Setting::One, Setting::One) => PairPmf::point(Alphabet::Binary, Plus, Plus).unwrap(),
        (Setting::One, Setting::Two) => PairPmf::point(Alphabet::Binary, Minus, Plus).unwrap(),
        _ => PairPmf::uniform(Alphabet::Binary),
    })
    .expect("binary")
}

/// The family with uniform marginals and E(XY | a, b) = `e[a][b]`: mass
/// (1+E)/4 on each agreeing cell and (1−E)/4 on each disagreeing cell.
///
/// Panics if some |E| > 1.
pub fn with_correlations(e: [[Rational; 2]; 2]) -> CondFamily {
    use Outcome::{Minus, Plus};
    let four = Rational::from_integer(4.into());
    CondFamily::from_fn(Alphabet::Binary, |a, b| {
        let e = &e[a.index()][b.index()];
        let same = (Rational::one() + e) / &four;
        let diff = (Rational::one() - e) / &four;
        PairPmf::from_entries(
            Alphabet::Binary,
            [
                (Plus, Plus, same.clone()),
                (Minus, Minus, same),
                (Plus, Minus, diff.clone()),
                (Minus, Plus, diff),
            ],
        )
        .expect("|E| <= 1")
    })
    .expect("binary")
}
