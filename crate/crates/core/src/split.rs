use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Disjoint train/validation/test node index sets, each sorted ascending.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Splits {
    /// Checks that the three sets are disjoint and inside `0..n`, and with
    /// `require_partition` that together they cover every node.
    pub fn validate(&self, n: usize, require_partition: bool) -> Result<()> {
        let mut seen = vec![false; n];
        for (name, set) in [("train", &self.train), ("val", &self.val), ("test", &self.test)] {
            for &i in set {
                if i >= n {
                    return Err(Error::Validation(format!(
                        "{name} index {i} out of range for {n} nodes"
                    )));
                }
                if seen[i] {
                    return Err(Error::Validation(format!(
                        "node {i} appears in more than one split"
                    )));
                }
                seen[i] = true;
            }
        }
        if require_partition {
            if let Some(i) = seen.iter().position(|s| !s) {
                return Err(Error::Validation(format!("node {i} is in no split")));
            }
        }
        Ok(())
    }

    pub fn all(n: usize) -> Self {
        Self {
            train: (0..n).collect(),
            ..Self::default()
        }
    }
}
