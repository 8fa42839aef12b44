//! Shared value types: observations, actions, transitions and episode traces.

use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;
use std::ops::Deref;

use crate::error::{Error, Result};

/// A fixed-length observation vector.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVec(Vec<f64>);

impl StateVec {
    pub fn new(values: Vec<f64>) -> Self {
        debug_assert!(values.iter().all(|v| v.is_finite()), "non-finite state entry");
        Self(values)
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl Deref for StateVec {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for StateVec {
    fn from(v: Vec<f64>) -> Self {
        Self::new(v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ActionValue {
    Discrete(usize),
    /// Entries are clamped to `[-1, 1]` on construction.
    Continuous(Vec<f64>),
}

impl ActionValue {
    pub fn continuous(values: Vec<f64>) -> Self {
        Self::Continuous(values.into_iter().map(|v| v.clamp(-1.0, 1.0)).collect())
    }
}

impl fmt::Display for ActionValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActionValue::Discrete(id) => write!(f, "{id}"),
            ActionValue::Continuous(v) => {
                for (i, x) in v.iter().enumerate() {
                    if i > 0 {
                        f.write_str(";")?;
                    }
                    write!(f, "{x}")?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: StateVec,
    pub action: ActionValue,
    pub reward: f64,
    pub next_state: StateVec,
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EpisodeTrace {
    pub transitions: Vec<Transition>,
    pub attacked_frames: BTreeSet<usize>,
    pub seed: u64,
}

impl EpisodeTrace {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn attack_count(&self) -> usize {
        self.attacked_frames.len()
    }

    pub fn rewards(&self) -> impl Iterator<Item = f64> + '_ {
        self.transitions.iter().map(|t| t.reward)
    }

    /// Writes the trace as CSV with header `t,action,reward,done,attacked`.
    /// Continuous actions are `;`-joined inside one field.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "action", "reward", "done", "attacked"])?;
        for (t, tr) in self.transitions.iter().enumerate() {
            w.write_record([
                t.to_string(),
                tr.action.to_string(),
                tr.reward.to_string(),
                u8::from(tr.done).to_string(),
                u8::from(self.attacked_frames.contains(&t)).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Total reward of an episode.
pub fn episode_return(trace: &EpisodeTrace) -> Result<f64> {
    if trace.is_empty() {
        return Err(Error::EmptyTrace);
    }
    Ok(trace.rewards().sum())
}
