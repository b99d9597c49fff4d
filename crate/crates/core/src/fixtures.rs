//! Bundled example games and chains.

use crate::chain::TransitionMatrix;
use crate::game::GameSpec;
use crate::policy::DeviationPolicy;

/// Directory holding the fixture files in the source tree.
pub const FIXTURE_DIR: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures");

pub const PRISONERS_DILEMMA_JSON: &str = include_str!("../fixtures/prisoners_dilemma.json");
pub const SELECTION_GAME_JSON: &str = include_str!("../fixtures/selection_game.json");
pub const MATCHING_PENNIES_JSON: &str = include_str!("../fixtures/matching_pennies.json");
pub const SELECTION_MATRIX_JSON: &str = include_str!("../fixtures/selection_matrix.json");
pub const SELECTION_POLICY_JSON: &str = include_str!("../fixtures/selection_policy.json");
pub const SELECTION_CONFINED_POLICY_JSON: &str =
    include_str!("../fixtures/selection_confined_policy.json");

/// Prisoner's dilemma with strategies `C`/`D` for both players.
pub fn prisoners_dilemma() -> GameSpec {
    GameSpec::from_json_str(PRISONERS_DILEMMA_JSON).expect("bundled fixture")
}

/// 3x3 game with a four-profile better-reply cycle and the pure
/// equilibrium `(D,R)`.
pub fn selection_game() -> GameSpec {
    GameSpec::from_json_str(SELECTION_GAME_JSON).expect("bundled fixture")
}

pub fn matching_pennies() -> GameSpec {
    GameSpec::from_json_str(MATCHING_PENNIES_JSON).expect("bundled fixture")
}

/// Hand-specified 9x9 chain for [`selection_game`]. Its `(U,L)` row keeps
/// only 1/6 on the diagonal, which no asynchronous aggregation with equal
/// agenda weights can produce, so it is loaded as an explicit matrix.
pub fn selection_matrix() -> TransitionMatrix {
    TransitionMatrix::from_json_str(SELECTION_MATRIX_JSON, Some(&selection_game()))
        .expect("bundled fixture")
}

/// Per-agent rows matching [`selection_matrix`] under equal agenda weights
/// wherever that is possible.
pub fn selection_policy() -> DeviationPolicy {
    DeviationPolicy::from_json_str(SELECTION_POLICY_JSON, &selection_game())
        .expect("bundled fixture")
}

/// Like [`selection_policy`] with every move leaving the
/// `(U,L),(U,M),(C,L),(C,M)` cycle set to zero.
pub fn selection_confined_policy() -> DeviationPolicy {
    DeviationPolicy::from_json_str(SELECTION_CONFINED_POLICY_JSON, &selection_game())
        .expect("bundled fixture")
}
