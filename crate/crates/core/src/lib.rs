//! Finite static games recast as Markov chains over strategy profiles.
//!
//! Each agent moves within its own deviation set according to a payoff-based
//! [`DeviationPolicy`]. Aggregating the agents' moves, either one agent at a
//! time ([`build_async`]) or all at once ([`build_sync`]), yields a
//! row-stochastic [`TransitionMatrix`] whose long-run behaviour can be
//! analyzed ([`analysis`]), sampled ([`simulation`]), or shaped by a single
//! agent optimizing its own policy ([`optimizer`]).
//!
//! ```
//! use devchain::{build_sync, fixtures, DeviationPolicy};
//!
//! let pd = fixtures::prisoners_dilemma();
//! let z = build_sync(&pd, &DeviationPolicy::default()).unwrap();
//! let cc = pd.parse_profile("C,C").unwrap();
//! let dd = pd.parse_profile("D,D").unwrap();
//! assert_eq!(z.get(cc, dd), 1.0);
//! assert!(z.is_absorbing(dd));
//! ```

pub mod analysis;
pub mod chain;
pub mod error;
pub mod fixtures;
pub mod format;
pub mod game;
pub mod optimizer;
pub mod policy;
pub mod random;
pub mod simulation;

pub use analysis::{
    average_payoff, average_payoffs, cesaro_limit_exact, cesaro_limit_iterative, chain_structure,
    communicating_classes, mixed_equilibrium_2x2, stationary_distributions,
    verify_cycle_stationary, verify_pure_nash_absorbing, ChainStructure, DeviationProcess,
    Distribution,
};
pub use chain::{
    build, build_async, build_cycle_chain_2x2, build_sync, transition_graph, TransitionGraph,
    TransitionMatrix, UpdateRule,
};
pub use error::{Error, Result};
pub use game::{profile_distance, GameSpec, NeighborGraph, ProfileIndex};
pub use optimizer::{evaluate_policy, optimize, OptimizationResult, OptimizationSpec};
pub use policy::{
    validate_policy, AgendaWeights, DeviationPolicy, ExplicitPolicy, ValidationReport,
};
pub use simulation::{
    empirical_occupation, sample_trajectory, simulate, SimulationConfig, Trajectory,
};
