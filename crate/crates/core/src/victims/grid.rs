use crate::envs::{ActionSpace, EnvContract, EnvKind};
use crate::error::{Error, Result};
use crate::trace::ActionValue;

/// Finite action set over a continuous action space: one value list per
/// axis, each axis written into a fixed slot of the action vector (other
/// slots stay 0). Joint indices are mixed-radix, first axis most significant.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionGrid {
    pub action_dim: usize,
    pub axes: Vec<Vec<f64>>,
    pub slots: Vec<usize>,
}

impl ActionGrid {
    pub fn new(action_dim: usize, axes: Vec<Vec<f64>>, slots: Vec<usize>) -> Result<Self> {
        if axes.is_empty() || axes.len() != slots.len() {
            return Err(Error::InvalidParameter("action grid needs one slot per axis".into()));
        }
        if axes.iter().any(|a| a.is_empty() || a.iter().any(|v| !(-1.0..=1.0).contains(v))) {
            return Err(Error::InvalidParameter("grid axes must be non-empty with values in [-1, 1]".into()));
        }
        if slots.iter().any(|&s| s >= action_dim) {
            return Err(Error::InvalidParameter("grid slot outside action vector".into()));
        }
        Ok(Self { action_dim, axes, slots })
    }

    /// Reacher: the two effective torques `a0 + a1` and `a2 + a3`, each in
    /// {-1, 0, 1}, written to slots 0 and 2 (9 joint actions).
    pub fn reacher() -> Self {
        Self::new(4, vec![vec![-1.0, 0.0, 1.0]; 2], vec![0, 2]).unwrap()
    }

    /// Car: seven evenly spaced steering values.
    pub fn car() -> Self {
        let steer = (0..7).map(|i| -1.0 + i as f64 / 3.0).collect();
        Self::new(2, vec![steer], vec![0]).unwrap()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn action(&self, index: usize) -> ActionValue {
        let mut out = vec![0.0; self.action_dim];
        let mut rest = index;
        for (axis, &slot) in self.axes.iter().zip(&self.slots).rev() {
            out[slot] = axis[rest % axis.len()];
            rest /= axis.len();
        }
        ActionValue::continuous(out)
    }
}

/// How a victim's `d` internal action indices map onto environment actions.
#[derive(Debug, Clone, PartialEq)]
pub enum ActionTable {
    Discrete(usize),
    Grid(ActionGrid),
}

impl ActionTable {
    pub fn for_env(kind: EnvKind) -> Self {
        match kind {
            EnvKind::Reacher => ActionTable::Grid(ActionGrid::reacher()),
            EnvKind::Collector => ActionTable::Discrete(4),
            EnvKind::Car => ActionTable::Grid(ActionGrid::car()),
        }
    }

    /// Discrete spaces map one-to-one; continuous ones need an explicit grid.
    pub fn for_contract(contract: &EnvContract) -> Result<Self> {
        match contract.action_space {
            ActionSpace::Discrete(d) => Ok(ActionTable::Discrete(d)),
            ActionSpace::Continuous(_) => Err(Error::InvalidParameter(
                "continuous action space needs an explicit ActionGrid".into(),
            )),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            ActionTable::Discrete(d) => *d,
            ActionTable::Grid(g) => g.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn action(&self, index: usize) -> ActionValue {
        match self {
            ActionTable::Discrete(_) => ActionValue::Discrete(index),
            ActionTable::Grid(g) => g.action(index),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reacher_grid_has_nine_pairwise_actions() {
        let g = ActionGrid::reacher();
        assert_eq!(g.len(), 9);
        assert_eq!(g.action(0), ActionValue::Continuous(vec![-1.0, 0.0, -1.0, 0.0]));
        assert_eq!(g.action(5), ActionValue::Continuous(vec![0.0, 0.0, 1.0, 0.0]));
        assert_eq!(g.action(8), ActionValue::Continuous(vec![1.0, 0.0, 1.0, 0.0]));
    }

    #[test]
    fn car_grid_spans_full_steering_range() {
        let g = ActionGrid::car();
        assert_eq!(g.len(), 7);
        assert_eq!(g.action(0), ActionValue::Continuous(vec![-1.0, 0.0]));
        assert_eq!(g.action(3), ActionValue::Continuous(vec![0.0, 0.0]));
        assert_eq!(g.action(6), ActionValue::Continuous(vec![1.0, 0.0]));
    }

    #[test]
    fn invalid_grids_rejected() {
        assert!(ActionGrid::new(2, vec![vec![]], vec![0]).is_err());
        assert!(ActionGrid::new(2, vec![vec![1.5]], vec![0]).is_err());
        assert!(ActionGrid::new(2, vec![vec![0.0]], vec![2]).is_err());
    }
}
