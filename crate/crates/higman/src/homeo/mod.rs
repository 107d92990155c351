//! Piecewise-linear homeomorphisms: concrete maps, lazy expressions,
//! open sets, root extraction, and the bi-uniform metric.

pub mod interval;
pub mod lazy;
pub mod metric;
pub mod plmap;
pub mod root;

pub use interval::OpenSet;
pub use lazy::{compact, EvalBudget, Frame, FrameKind, LazyHomeo, Locator, TileRule, TiledNode};
pub use metric::{sup_dist, sup_dist_pl, sup_dist_window};
pub use plmap::{Extension, PLMap};
pub use root::{fractional_power, nth_two_root, two_root};
