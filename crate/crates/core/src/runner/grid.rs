use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A parameter axis: an explicit list, or evenly spaced on a linear or
/// logarithmic scale (both ends included).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    List(Vec<f64>),
    Linear { start: f64, stop: f64, points: usize },
    Log { log_start: f64, log_stop: f64, points: usize },
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        let spaced = |a: f64, b: f64, n: usize| -> Vec<f64> {
            match n {
                0 => Vec::new(),
                1 => vec![a],
                _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
            }
        };
        match self {
            Grid::List(v) => v.clone(),
            Grid::Linear { start, stop, points } => spaced(*start, *stop, *points),
            Grid::Log { log_start, log_stop, points } => {
                spaced(*log_start, *log_stop, *points).into_iter().map(|e| 10f64.powf(e)).collect()
            }
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Grid::List(v) => v.len(),
            Grid::Linear { points, .. } | Grid::Log { points, .. } => *points,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Non-empty and finite.
    pub fn check(&self, name: &str) -> Result<Vec<f64>> {
        let v = self.values();
        if v.is_empty() {
            return Err(Error::Config(format!("grid `{name}` is empty")));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config(format!("grid `{name}` has non-finite entries")));
        }
        Ok(v)
    }
}

impl From<Vec<f64>> for Grid {
    fn from(v: Vec<f64>) -> Self {
        Grid::List(v)
    }
}
