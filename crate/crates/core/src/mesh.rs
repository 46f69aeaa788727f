use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform partition of `[lo, hi]` into `cells` control volumes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    pub lo: f64,
    pub hi: f64,
    pub cells: usize,
}

impl Mesh {
    pub fn new(lo: f64, hi: f64, cells: usize) -> Result<Self> {
        if !(hi > lo) || cells == 0 {
            return Err(Error::Config(format!(
                "invalid mesh [{lo}, {hi}] with {cells} cells"
            )));
        }
        Ok(Self { lo, hi, cells })
    }

    pub fn dx(&self) -> f64 {
        (self.hi - self.lo) / self.cells as f64
    }

    /// Left edge of cell `i`; `edge(cells)` is exactly `hi`.
    pub fn edge(&self, i: usize) -> f64 {
        if i >= self.cells {
            self.hi
        } else {
            self.lo + i as f64 * self.dx()
        }
    }

    pub fn center(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.dx()
    }

    pub fn edges(&self) -> Vec<f64> {
        (0..=self.cells).map(|i| self.edge(i)).collect()
    }

    /// Index of the cell containing `x`, clamped to the mesh.
    pub fn cell_of(&self, x: f64) -> usize {
        let i = ((x - self.lo) / self.dx()).floor();
        if i < 0.0 {
            0
        } else {
            let mut i = (i as usize).min(self.cells - 1);
            // guard against rounding at cell edges
            while i > 0 && x < self.edge(i) {
                i -= 1;
            }
            while i + 1 < self.cells && x >= self.edge(i + 1) {
                i += 1;
            }
            i
        }
    }

    pub fn same_as(&self, other: &Mesh) -> Result<()> {
        if self != other {
            return Err(Error::MeshMismatch(format!("{self:?} vs {other:?}")));
        }
        Ok(())
    }
}
