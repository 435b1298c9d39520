//! Per-action feature rows.
//!
//! Lengths are normalized by the edge of the ideal square/cube for the
//! problem's total area/volume. Row layout (2D: 10 columns, 3D: 13):
//!
//! | columns            | meaning                                   |
//! |--------------------|-------------------------------------------|
//! | `d` sizes          | oriented item extents / edge              |
//! | `d` positions      | placement corner / edge                   |
//! | 1                  | orientation code / (codes − 1)            |
//! | 1                  | item volume / total volume                |
//! | 1                  | fraction of items already placed          |
//! | `d` extents        | current enclosing-box extents / edge      |
//! | 1                  | current cost / ideal cost (0 when empty)  |
//!
//! The last `d + 2` columns are state-level and repeat on every row.

use crate::env::{Action, Dim, PackState};

use super::NetError;

pub fn feature_width(dim: Dim) -> usize {
    3 * dim.axes() + 4
}

/// Row-major `rows × cols` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, NetError> {
        if rows == 0 {
            return Err(NetError::NoActions);
        }
        if data.len() != rows * cols {
            return Err(NetError::Shape(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(FeatureMatrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Rows reordered so that output row `i` is input row `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(self.data.len());
        for &p in perm {
            data.extend_from_slice(self.row(p));
        }
        FeatureMatrix {
            rows: perm.len(),
            cols: self.cols,
            data,
        }
    }
}

pub fn featurize(state: &PackState, actions: &[Action]) -> Result<FeatureMatrix, NetError> {
    if actions.is_empty() {
        return Err(NetError::NoActions);
    }
    let problem = state.problem();
    let dim = problem.dim();
    let d = dim.axes();
    let cols = feature_width(dim);
    let edge = problem.ideal_edge();
    let total = problem.total_volume() as f64;
    let codes = (dim.orientation_count() - 1) as f64;

    let mut global = Vec::with_capacity(d + 2);
    global.push(state.step() as f64 / problem.len() as f64);
    let ext = state.extents();
    global.extend(ext[..d].iter().map(|&e| e as f64 / edge));
    global.push(match state.bin_cost() {
        Ok(c) => c / problem.ideal_cost(),
        Err(_) => 0.0,
    });

    let mut data = Vec::with_capacity(actions.len() * cols);
    for a in actions {
        data.extend(a.size[..d].iter().map(|&s| s as f64 / edge));
        data.extend(a.pos[..d].iter().map(|&p| p as f64 / edge));
        data.push(a.orient.code() as f64 / codes);
        let vol: i64 = a.size.iter().product();
        data.push(vol as f64 / total);
        data.extend_from_slice(&global);
    }
    FeatureMatrix::new(actions.len(), cols, data)
}
