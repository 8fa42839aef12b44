//! Experiment orchestration: attacked rollouts, table cells, the results
//! matrix, reward curves and the quick self-test.

mod cell;
mod config;
mod curves;
mod episode;
mod selftest;
mod table;

pub use cell::{
    check_compatible, checkpoint_path, episode_seed, evaluate_cell, evaluate_cell_traced, obtain_victim, row_seed,
    train_pepg_timer, victim_seed, CellResult, EpisodeRecord,
};
pub use config::{
    AttackerSection, EnvSection, EvalSection, ExperimentConfig, NoiseSection, OutputSection, VictimSection,
};
pub use curves::{export_reward_curves, reward_curves, RewardCurves};
pub use episode::{run_attacked_episode, Timer, TimerKind};
pub use selftest::{regret_check, run_selftest, Check};
pub use table::{all_rows, build_table, CellEntry, ResultsTable, TableRow};
