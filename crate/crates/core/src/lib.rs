//! Exact evaluation and stress-testing of hidden-variable models of Bell
//! experiments.
//!
//! * [`probcore`]: validated rational distributions of (A, B, X, Y).
//! * [`bellstats`]: CHSH values, no-signalling deltas, spreadsheet bound.
//! * [`lhv`]: local models, deterministic strategies, couplings.
//! * [`kupczynski`]: setting-dependent hidden-variable models, the
//!   universal construction, detection-loophole post-selection.
//! * [`mcsim`]: reproducible Monte Carlo of i.i.d. trials.
//! * [`io`]: JSON and CSV formats.

pub mod bellstats;
pub mod error;
pub mod families;
pub mod io;
pub mod kupczynski;
pub mod lhv;
pub mod mcsim;
pub mod probcore;

pub use bellstats::{chsh, chsh_of_coupling, no_signalling, spreadsheet_chsh, ChshReport, NoSignallingReport, Quadruple, Spreadsheet};
pub use error::{Error, Result};
pub use lhv::{coupling_of, predict, verify_chsh_bound, Coupling, DeterministicStrategy, LhvModel};
pub use probcore::{
    compose, expectation_xy, factor, Alphabet, CondFamily, ExactProb, JointDist, Outcome, PairPmf, Rational, Setting,
    SettingsDist, Sign,
};
