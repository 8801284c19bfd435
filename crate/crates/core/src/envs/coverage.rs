use crate::envs::maze::{render_bins, MazeSpec};

/// Which free coverage bins of a maze have been visited.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageTracker {
    bins_per_cell: usize,
    bin_rows: usize,
    bin_cols: usize,
    cell_size: f64,
    origin: [f64; 2],
    visited: Vec<bool>,
    visited_count: usize,
    total_free: usize,
}

impl CoverageTracker {
    pub fn new(spec: &MazeSpec) -> crate::Result<Self> {
        let k = spec.bins_per_cell()?;
        let total_free = spec.free_tiles() * k * k;
        Ok(Self {
            bins_per_cell: k,
            bin_rows: spec.rows() * k,
            bin_cols: spec.cols() * k,
            cell_size: spec.cell_size,
            origin: spec.bounds.min,
            visited: vec![false; spec.rows() * k * spec.cols() * k],
            visited_count: 0,
            total_free,
        })
    }

    pub fn n_bins(&self) -> usize {
        self.visited.len()
    }

    pub fn total_free(&self) -> usize {
        self.total_free
    }

    pub fn visited_count(&self) -> usize {
        self.visited_count
    }

    /// Row-major bin index of a position.
    pub fn bin_of(&self, p: [f64; 2]) -> usize {
        let c = (((p[0] - self.origin[0]) / self.cell_size).floor().max(0.0) as usize).min(self.bin_cols - 1);
        let r = (((p[1] - self.origin[1]) / self.cell_size).floor().max(0.0) as usize).min(self.bin_rows - 1);
        r * self.bin_cols + c
    }

    /// Marks the bin containing `p`. Positions are assumed valid (free).
    pub fn update(&mut self, p: [f64; 2]) {
        let b = self.bin_of(p);
        if !self.visited[b] {
            self.visited[b] = true;
            self.visited_count += 1;
        }
    }

    pub fn ratio(&self) -> f64 {
        if self.total_free == 0 {
            0.0
        } else {
            self.visited_count as f64 / self.total_free as f64
        }
    }

    pub fn is_visited(&self, bin: usize) -> bool {
        self.visited[bin]
    }

    /// The layout at bin resolution with visited bins drawn as `*`.
    pub fn snapshot(&self, spec: &MazeSpec) -> String {
        render_bins(spec, self.bins_per_cell, |r, c| self.visited[r * self.bin_cols + c])
    }
}

/// Coverage ratio after visiting `positions` on a fresh tracker.
pub fn coverage_ratio(spec: &MazeSpec, positions: &[[f64; 2]]) -> crate::Result<f64> {
    let mut t = CoverageTracker::new(spec)?;
    positions.iter().for_each(|&p| t.update(p));
    Ok(t.ratio())
}
