//! Continuous 2-D mazes with coverage tracking, plus small tabular chains.

pub mod chain;
pub mod coverage;
pub mod layouts;
pub mod maze;

pub use chain::{reward_free_chain, sparse_chain_mdp};
pub use coverage::{coverage_ratio, CoverageTracker};
pub use layouts::{all_layouts, builtin_layout, layout_names};
pub use maze::{compass_actions, maze_reset, maze_step, MazeSpec, MazeState};
