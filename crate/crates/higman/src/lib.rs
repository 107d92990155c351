//! Numerical realisation of actions of Higman's group on the line and circle.
//!
//! Higman's group is generated by four elements `a, b, c, d` subject to
//! `a b a^-1 = b^2`, `b c b^-1 = c^2`, `c d c^-1 = d^2`, `d a d^-1 = a^2`.
//! This crate builds an explicit action by piecewise-linear homeomorphisms
//! of the real line commuting with the translation `x + 2` (equivalently, an
//! action on the circle of length 2), and verifies it numerically:
//!
//! 1. [`denjoy`] blows up the dyadic orbit of the standard affine
//!    Baumslag-Solitar action to free up an interval (`mod denjoy`);
//! 2. [`seed`] compresses the blown-up line into `(-1, 1)`, producing the
//!    ping-pong pair `b, d` and the seed maps `a0, c0`;
//! 3. [`operators`] implements the two extension operators that trade a map
//!    on a region for a map satisfying a doubling relation globally;
//! 4. [`iterate`] runs the alternating operator iteration to its unique
//!    fixed point, yielding the generators `a` and `c`;
//! 5. [`verify`] checks relations, freeness certificates, fixed points and
//!    rotation numbers; [`families`] varies the construction over sign
//!    sequences to produce non-conjugate actions.

pub mod config;
pub mod denjoy;
pub mod error;
pub mod families;
pub mod homeo;
pub mod iterate;
pub mod operators;
pub mod seed;
pub mod verify;

pub use error::{HomeoError, Result};
