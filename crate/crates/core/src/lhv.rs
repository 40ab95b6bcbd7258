//! Local hidden-variable models, the 16 deterministic strategies, and the
//! coupling of counterfactual outcomes that every such model induces.
//!
//! A model assigns each hidden state λ a probability and a deterministic
//! response quadruple (x1, x2, y1, y2). Pushing the hidden law forward
//! through the responses gives a [`Coupling`]: one joint law of all four
//! counterfactual outcomes whose (X_a, Y_b) margins are exactly the
//! model's conditional laws. The CHSH bound follows from that coupling.

use std::collections::HashSet;

use num_traits::{One, Signed, Zero};

use crate::bellstats::{chsh_of_coupling, ChshReport, Quadruple};
use crate::error::{Error, Result};
use crate::probcore::{
    rational, Alphabet, CondFamily, ExactProb, JointDist, PairPmf, Rational, Setting,
    SettingsDist,
};

/// Fixed responses (x1, x2, y1, y2) of both parties to both settings.
pub type DeterministicStrategy = Quadruple;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HiddenState {
    /// Opaque label.
    pub id: String,
    pub p: ExactProb,
    pub response: DeterministicStrategy,
}

/// A finite local hidden-variable model. λ is independent of the settings.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LhvModel {
    states: Vec<HiddenState>,
}

impl LhvModel {
    pub fn new(states: Vec<HiddenState>) -> Result<Self> {
        let mut ids = HashSet::new();
        for s in &states {
            if !ids.insert(s.id.as_str()) {
                return Err(Error::DuplicateEntry(format!("hidden state {:?}", s.id)));
            }
        }
        let total: ExactProb = states.iter().map(|s| &s.p).sum();
        if !total.value().is_one() {
            return Err(Error::NotNormalized {
                what: "hidden-state law".into(),
                deficit: Rational::one() - total.value(),
            });
        }
        Ok(LhvModel { states })
    }

    /// A model with one hidden state of probability one.
    pub fn deterministic(strategy: DeterministicStrategy) -> Self {
        LhvModel {
            states: vec![HiddenState {
                id: "lambda".into(),
                p: ExactProb::one(),
                response: strategy,
            }],
        }
    }

    pub fn states(&self) -> &[HiddenState] {
        &self.states
    }
}

/// A joint law of the counterfactual quadruple (X1, X2, Y1, Y2).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Coupling {
    pmf: [ExactProb; 16],
}

impl Coupling {
    pub fn from_entries(entries: impl IntoIterator<Item = (Quadruple, Rational)>) -> Result<Self> {
        let mut pmf: [ExactProb; 16] = Default::default();
        let mut seen = [false; 16];
        for (q, v) in entries {
            if std::mem::replace(&mut seen[q.index()], true) {
                return Err(Error::DuplicateEntry(format!("{:?}", q.values())));
            }
            if v.is_negative() {
                return Err(Error::NegativeMass { at: format!("{:?}", q.values()), value: v });
            }
            pmf[q.index()] = ExactProb::new(v)?;
        }
        let total: ExactProb = pmf.iter().sum();
        if !total.value().is_one() {
            return Err(Error::NotNormalized {
                what: "coupling".into(),
                deficit: Rational::one() - total.value(),
            });
        }
        Ok(Coupling { pmf })
    }

    pub fn point(q: Quadruple) -> Self {
        let mut pmf: [ExactProb; 16] = Default::default();
        pmf[q.index()] = ExactProb::one();
        Coupling { pmf }
    }

    pub fn uniform() -> Self {
        Coupling { pmf: std::array::from_fn(|_| ExactProb::ratio(1, 16)) }
    }

    pub fn get(&self, q: Quadruple) -> &ExactProb {
        &self.pmf[q.index()]
    }

    /// Quadruples of positive mass.
    pub fn support(&self) -> impl Iterator<Item = (Quadruple, &ExactProb)> + '_ {
        Quadruple::all()
            .zip(self.pmf.iter())
            .filter(|(_, p)| !p.is_zero())
    }

    /// `alpha·self + (1−alpha)·other`.
    pub fn mix(&self, alpha: &ExactProb, other: &Coupling) -> Result<Coupling> {
        let beta = alpha.complement()?;
        Ok(Coupling {
            pmf: std::array::from_fn(|i| &(alpha * &self.pmf[i]) + &(&beta * &other.pmf[i])),
        })
    }

    /// The four pairwise laws of (X_a, Y_b).
    pub fn conditional_family(&self) -> CondFamily {
        CondFamily::from_fn(Alphabet::Binary, |a, b| {
            let mut grid: [[ExactProb; 3]; 3] = Default::default();
            for (q, p) in self.support() {
                let cell = &mut grid[q.x(a).outcome().index()][q.y(b).outcome().index()];
                *cell = &*cell + p;
            }
            PairPmf::from_grid(Alphabet::Binary, grid)
        })
        .expect("binary by construction")
    }
}

/// Pushforward of the hidden law through the responses.
pub fn coupling_of(model: &LhvModel) -> Coupling {
    let mut pmf: [ExactProb; 16] = Default::default();
    for s in &model.states {
        let cell = &mut pmf[s.response.index()];
        *cell = &*cell + &s.p;
    }
    Coupling { pmf }
}

/// Observable law under measurement independence:
/// pmf(a,b,x,y) = settings(a,b) · Σ_λ ρ(λ)·[x_a(λ)=x]·[y_b(λ)=y].
pub fn predict(model: &LhvModel, settings: &SettingsDist) -> JointDist {
    let mut cells: [[[[ExactProb; 3]; 3]; 2]; 2] = Default::default();
    for (a, b) in Setting::pairs() {
        let w = settings.get(a, b);
        if w.is_zero() {
            continue;
        }
        for s in &model.states {
            let x = s.response.x(a).outcome().index();
            let y = s.response.y(b).outcome().index();
            let cell = &mut cells[a.index()][b.index()][x][y];
            *cell = &*cell + &(w * &s.p);
        }
    }
    JointDist::from_cells_unchecked(Alphabet::Binary, cells)
}

/// All 16 deterministic strategies, each once.
pub fn enumerate_deterministic() -> Vec<DeterministicStrategy> {
    Quadruple::all().collect()
}

/// CHSH report of a local model, certified by the coupling it induces.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CertifiedChsh {
    pub report: ChshReport,
    pub coupling: Coupling,
    pub certified: bool,
}

pub fn verify_chsh_bound(model: &LhvModel) -> Result<CertifiedChsh> {
    certify_coupling(coupling_of(model))
}

pub(crate) fn certify_coupling(coupling: Coupling) -> Result<CertifiedChsh> {
    let report = chsh_of_coupling(&coupling);
    if report.s_max > rational(2, 1) {
        return Err(Error::InternalBoundViolation(report.s_max));
    }
    Ok(CertifiedChsh { report, coupling, certified: true })
}

/// Searches for a coupling whose (X_a, Y_b) margins equal `cond` exactly.
///
/// Returns `None` when the family has no local model. Feasibility is
/// decided by an exact rational simplex over the 16 quadruple masses.
pub fn fit_coupling(cond: &CondFamily) -> Result<Option<Coupling>> {
    cond.require_binary()?;
    let mut rows = Vec::with_capacity(16);
    let mut rhs = Vec::with_capacity(16);
    for (a, b, pmf) in cond.pairs() {
        for (x, y, m) in pmf.cells() {
            let row = Quadruple::all()
                .map(|q| {
                    if q.x(a).outcome() == x && q.y(b).outcome() == y {
                        Rational::one()
                    } else {
                        Rational::zero()
                    }
                })
                .collect();
            rows.push(row);
            rhs.push(m.value().clone());
        }
    }
    Ok(simplex::feasible_point(&rows, &rhs).map(|v| {
        Coupling::from_entries(Quadruple::all().zip(v)).expect("feasible point is a pmf")
    }))
}

/// Certifies a binary family as local by exhibiting a coupling, or
/// returns `None` when none exists.
pub fn certify_family(cond: &CondFamily) -> Result<Option<CertifiedChsh>> {
    fit_coupling(cond)?.map(certify_coupling).transpose()
}

mod simplex {
    //! Phase-one simplex in exact arithmetic with Bland's rule.

    use num_traits::{Signed, Zero};

    use crate::probcore::Rational;

    /// Finds x ≥ 0 with A·x = b, where b ≥ 0.
    pub fn feasible_point(a: &[Vec<Rational>], b: &[Rational]) -> Option<Vec<Rational>> {
        let m = a.len();
        let n = a.first().map_or(0, Vec::len);
        debug_assert!(b.iter().all(|v| !v.is_negative()));
        let width = n + m;
        // rows: [A | I | b]
        let mut t: Vec<Vec<Rational>> = a
            .iter()
            .zip(b)
            .enumerate()
            .map(|(i, (row, rhs))| {
                let mut r = row.clone();
                r.extend((0..m).map(|k| if k == i { Rational::from_integer(1.into()) } else { Rational::zero() }));
                r.push(rhs.clone());
                r
            })
            .collect();
        let mut basis: Vec<usize> = (n..n + m).collect();
        // reduced costs of the auxiliary objective Σ artificials
        let mut cost: Vec<Rational> = (0..=width)
            .map(|j| {
                if (n..n + m).contains(&j) {
                    Rational::zero()
                } else {
                    -t.iter().map(|r| &r[j]).sum::<Rational>()
                }
            })
            .collect();

        while let Some(enter) = (0..width).find(|&j| cost[j].is_negative()) {
            let leave = (0..m)
                .filter(|&i| t[i][enter].is_positive())
                .min_by(|&i, &k| {
                    let ri = &t[i][width] / &t[i][enter];
                    let rk = &t[k][width] / &t[k][enter];
                    ri.cmp(&rk).then(basis[i].cmp(&basis[k]))
                })
                .expect("auxiliary problem is bounded below");
            let piv = t[leave][enter].clone();
            for v in t[leave].iter_mut() {
                *v /= &piv;
            }
            let prow = t[leave].clone();
            for (i, row) in t.iter_mut().enumerate() {
                if i == leave || row[enter].is_zero() {
                    continue;
                }
                let f = row[enter].clone();
                for (v, p) in row.iter_mut().zip(&prow) {
                    *v -= &f * p;
                }
            }
            let f = cost[enter].clone();
            for (v, p) in cost.iter_mut().zip(&prow) {
                *v -= &f * p;
            }
            basis[leave] = enter;
        }

        if !cost[width].is_zero() {
            return None;
        }
        let mut x = vec![Rational::zero(); n];
        for (i, &j) in basis.iter().enumerate() {
            if j < n {
                x[j] = t[i][width].clone();
            }
        }
        Some(x)
    }
}
