use serde::{Deserialize, Serialize};

/// How an observation is mapped to a heatmap cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CellMap {
    /// Observation holds `(row, col) / (rows - 1, cols - 1)`.
    NormalizedGrid,
    /// 2-d histogram over observation components `dims`, clamped to `[lo, hi]`.
    Bins { dims: (usize, usize), lo: (f64, f64), hi: (f64, f64) },
}

/// State-visitation counts on a `rows x cols` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisitationLog {
    pub rows: usize,
    pub cols: usize,
    pub map: CellMap,
    pub counts: Vec<u64>,
}

impl VisitationLog {
    pub fn new(rows: usize, cols: usize, map: CellMap) -> Self {
        Self { rows, cols, map, counts: vec![0; rows * cols] }
    }

    pub fn cell_of(&self, obs: &[f64]) -> (usize, usize) {
        match &self.map {
            CellMap::NormalizedGrid => {
                let r = (obs[0] * (self.rows - 1) as f64).round() as usize;
                let c = (obs[1] * (self.cols - 1) as f64).round() as usize;
                (r.min(self.rows - 1), c.min(self.cols - 1))
            }
            CellMap::Bins { dims, lo, hi } => {
                let bin = |x: f64, lo: f64, hi: f64, n: usize| {
                    let f = ((x - lo) / (hi - lo)).clamp(0.0, 1.0);
                    ((f * n as f64) as usize).min(n - 1)
                };
                (bin(obs[dims.0], lo.0, hi.0, self.rows), bin(obs[dims.1], lo.1, hi.1, self.cols))
            }
        }
    }

    pub fn log_visit(&mut self, obs: &[f64]) {
        let (r, c) = self.cell_of(obs);
        self.counts[r * self.cols + c] += 1;
    }

    pub fn get(&self, row: usize, col: usize) -> u64 {
        self.counts[row * self.cols + col]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn merge(&mut self, other: &VisitationLog) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }
}
