//! Contest success functions generated by random performance.
//!
//! An agent exerting effort `e` against a population whose efforts are
//! distributed as `p` draws a performance from `F_e`; the best performers
//! win, with the cutoff `s(p)` set so that the mass of winners equals the
//! budget fraction `k`. The winning probability is `W(e, p) = 1 - F_e(s(p))`.
//!
//! * [`distributions`]: noise distributions (normal, Student-t, logistic,
//!   shifted, tabulated).
//! * [`measures`]: effort distributions made of atoms and density segments.
//! * [`engine`]: performance families, the market-clearing cutoff and `W`.
//! * [`axioms`]: sampling checks of the properties that characterize such
//!   success functions, with counterexample witnesses.
//! * [`equilibrium`]: the symmetric equilibrium of the effort game.
//! * [`design`]: the winner fraction that maximizes effort, and rent
//!   dissipation.
//! * [`monte_carlo`]: finite-population simulation.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod axioms;
pub mod design;
pub mod distributions;
pub mod engine;
pub mod equilibrium;
pub mod error;
pub mod measures;
pub mod monte_carlo;
mod special;

pub use axioms::{audit, AuditConfig, Axiom, AxiomReport, BlackBoxCsf, RpfCsf, Verdict, Witness};
pub use distributions::{NoiseDistribution, TabulatedCdf};
pub use engine::{
    csf_eval, recover_translation, solve_cutoff, CsfProfile, CutoffResult, EffortWarp,
    PerformanceFamily,
};
pub use equilibrium::{ContestSpec, CostFunction, Utility};
pub use error::{Error, Result};
pub use measures::{Atom, EffortMeasure};
pub use monte_carlo::{simulate, SimConfig};
