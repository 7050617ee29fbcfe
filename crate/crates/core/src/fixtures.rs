//! The bundled three-player worked example used by the golden tests, the
//! `selftest` subcommand, and the shipped `paper_sec3.json` scenario.

use crate::measure::{rat, Density};
use crate::refproto::Profile;

/// 4/5 on `[0, 5/6]`, then 2 on `(5/6, 1]`.
pub fn density_one() -> Density {
    Density::new(vec![(rat(5, 6), rat(4, 5)), (rat(1, 1), rat(2, 1))]).expect("valid")
}

/// Uniform.
pub fn density_two() -> Density {
    Density::uniform()
}

/// 2 on `[0, 1/3]`, then 1/2 on `(1/3, 1]`.
pub fn density_three() -> Density {
    Density::new(vec![(rat(1, 3), rat(2, 1)), (rat(1, 1), rat(1, 2))]).expect("valid")
}

/// The canonical three-player profile.
pub fn three_player_profile() -> Profile {
    Profile::new(vec![density_one(), density_two(), density_three()]).expect("valid")
}

/// An all-uniform profile with `n` players.
pub fn uniform_profile(n: usize) -> Profile {
    Profile::new(vec![Density::uniform(); n]).expect("valid")
}
