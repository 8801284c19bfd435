use std::fmt::Write as _;

use rand::Rng;

use crate::error::{Error, Result};

pub const EPISODE_STEPS: usize = 50;

/// Axis-aligned box `[min, max]` in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Bounds {
    pub fn width(&self) -> f64 {
        self.max[0] - self.min[0]
    }

    pub fn height(&self) -> f64 {
        self.max[1] - self.min[1]
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        (0..2).all(|k| p[k] >= self.min[k] && p[k] < self.max[k])
    }
}

/// A wall layout on a square grid of `layout_cell`-sized tiles. World
/// coordinates put the origin at the top-left corner, `x` growing with the
/// column and `y` with the row.
#[derive(Debug, Clone, PartialEq)]
pub struct MazeSpec {
    pub name: String,
    /// `wall_mask[row][col]`.
    pub wall_mask: Vec<Vec<bool>>,
    pub start: [f64; 2],
    pub bounds: Bounds,
    /// Edge length of one layout tile.
    pub layout_cell: f64,
    /// Edge length of one coverage bin; divides `layout_cell`.
    pub cell_size: f64,
    pub max_episode_steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MazeState {
    pub position: [f64; 2],
    pub steps: usize,
}

impl MazeSpec {
    /// Parses a `#`/`.`/`S` grid, one row per line. Lines starting with `;`
    /// are comments.
    pub fn parse(name: &str, text: &str, layout_cell: f64, cell_size: f64) -> Result<Self> {
        let rows: Vec<(usize, &str)> = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim_end()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with(';'))
            .collect();
        if rows.is_empty() {
            return Err(Error::parse(1, 1, "empty layout"));
        }
        let width = rows[0].1.chars().count();
        let mut wall_mask = Vec::with_capacity(rows.len());
        let mut start = None;
        for (r, &(line, text)) in rows.iter().enumerate() {
            if text.chars().count() != width {
                return Err(Error::parse(line, 1, format!("row has {} cells, expected {width}", text.chars().count())));
            }
            let mut mask = Vec::with_capacity(width);
            for (c, ch) in text.chars().enumerate() {
                match ch {
                    '#' => mask.push(true),
                    '.' => mask.push(false),
                    'S' => {
                        if start.replace((r, c)).is_some() {
                            return Err(Error::parse(line, c + 1, "more than one start cell"));
                        }
                        mask.push(false);
                    }
                    other => return Err(Error::parse(line, c + 1, format!("unexpected character `{other}`"))),
                }
            }
            wall_mask.push(mask);
        }
        let (sr, sc) = start.ok_or_else(|| Error::parse(rows[0].0, 1, "layout has no start cell `S`"))?;
        let height = wall_mask.len();
        for (r, mask) in wall_mask.iter().enumerate() {
            for (c, &wall) in mask.iter().enumerate() {
                let border = r == 0 || c == 0 || r + 1 == height || c + 1 == width;
                if border && !wall {
                    return Err(Error::parse(rows[r].0, c + 1, "border must be closed by walls"));
                }
            }
        }
        let spec = Self {
            name: name.to_string(),
            wall_mask,
            start: [(sc as f64 + 0.5) * layout_cell, (sr as f64 + 0.5) * layout_cell],
            bounds: Bounds {
                min: [0.0, 0.0],
                max: [width as f64 * layout_cell, height as f64 * layout_cell],
            },
            layout_cell,
            cell_size,
            max_episode_steps: EPISODE_STEPS,
        };
        spec.bins_per_cell()?;
        Ok(spec)
    }

    /// Grid text with `#`, `.` and `S`.
    pub fn to_grid(&self) -> String {
        let (sr, sc) = self.tile_of(self.start);
        let mut out = String::new();
        for (r, mask) in self.wall_mask.iter().enumerate() {
            for (c, &wall) in mask.iter().enumerate() {
                out.push(if wall {
                    '#'
                } else if (r, c) == (sr, sc) {
                    'S'
                } else {
                    '.'
                });
            }
            out.push('\n');
        }
        out
    }

    pub fn rows(&self) -> usize {
        self.wall_mask.len()
    }

    pub fn cols(&self) -> usize {
        self.wall_mask[0].len()
    }

    /// Coverage bins along one tile edge.
    pub fn bins_per_cell(&self) -> Result<usize> {
        if !(self.cell_size > 0.0 && self.layout_cell > 0.0) {
            return Err(Error::Config("cell sizes must be positive".into()));
        }
        let ratio = self.layout_cell / self.cell_size;
        let k = ratio.round();
        if k < 1.0 || (ratio - k).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "coverage cell {} does not divide layout cell {}",
                self.cell_size, self.layout_cell
            )));
        }
        Ok(k as usize)
    }

    /// Largest per-axis action component: a tenth of the map width.
    pub fn max_action(&self) -> f64 {
        0.1 * self.bounds.width()
    }

    pub fn tile_of(&self, p: [f64; 2]) -> (usize, usize) {
        let c = ((p[0] - self.bounds.min[0]) / self.layout_cell).floor().max(0.0) as usize;
        let r = ((p[1] - self.bounds.min[1]) / self.layout_cell).floor().max(0.0) as usize;
        (r.min(self.rows() - 1), c.min(self.cols() - 1))
    }

    pub fn is_wall_tile(&self, r: usize, c: usize) -> bool {
        self.wall_mask[r][c]
    }

    pub fn is_free(&self, p: [f64; 2]) -> bool {
        if !self.bounds.contains(p) {
            return false;
        }
        let (r, c) = self.tile_of(p);
        !self.wall_mask[r][c]
    }

    /// Whether an axis-aligned move from `from` to `to` (differing in one
    /// coordinate) crosses or ends in a wall tile.
    fn axis_move_blocked(&self, from: [f64; 2], to: [f64; 2]) -> bool {
        if !self.bounds.contains(to) {
            return true;
        }
        let (r0, c0) = self.tile_of(from);
        let (r1, c1) = self.tile_of(to);
        for r in r0.min(r1)..=r0.max(r1) {
            for c in c0.min(c1)..=c0.max(c1) {
                if self.wall_mask[r][c] {
                    return true;
                }
            }
        }
        false
    }

    pub fn free_tiles(&self) -> usize {
        self.wall_mask.iter().flatten().filter(|w| !**w).count()
    }
}

/// Start position with a uniform jitter of up to a quarter tile per axis.
pub fn maze_reset<R: Rng + ?Sized>(spec: &MazeSpec, rng: &mut R) -> MazeState {
    let j = 0.25 * spec.layout_cell;
    let position = [
        spec.start[0] + rng.gen_range(-j..j),
        spec.start[1] + rng.gen_range(-j..j),
    ];
    MazeState { position, steps: 0 }
}

/// Position-delta dynamics with axis-separated collisions: the x component
/// is applied first, then y; a component whose move would touch a wall tile
/// is dropped. Reward-free; `done` after `max_episode_steps`.
pub fn maze_step(spec: &MazeSpec, state: &MazeState, action: [f64; 2]) -> Result<(MazeState, f64, bool)> {
    if !spec.is_free(state.position) {
        return Err(Error::Input(format!("position {:?} is not a free maze location", state.position)));
    }
    let a_max = spec.max_action();
    let dx = action[0].clamp(-a_max, a_max);
    let dy = action[1].clamp(-a_max, a_max);
    let mut p = state.position;
    let tx = [p[0] + dx, p[1]];
    if dx != 0.0 && !spec.axis_move_blocked(p, tx) {
        p = tx;
    }
    let ty = [p[0], p[1] + dy];
    if dy != 0.0 && !spec.axis_move_blocked(p, ty) {
        p = ty;
    }
    let steps = state.steps + 1;
    Ok((MazeState { position: p, steps }, 0.0, steps >= spec.max_episode_steps))
}

/// The eight compass moves of length `a_max`, counter-clockwise from east.
/// `y` grows downward, so "north" is `-y`.
pub fn compass_actions(a_max: f64) -> [[f64; 2]; 8] {
    let d = a_max * std::f64::consts::FRAC_1_SQRT_2;
    [
        [a_max, 0.0],
        [d, -d],
        [0.0, -a_max],
        [-d, -d],
        [-a_max, 0.0],
        [-d, d],
        [0.0, a_max],
        [d, d],
    ]
}

/// Render the layout at bin resolution, marking `marked` bins with `*`.
pub(crate) fn render_bins(spec: &MazeSpec, k: usize, marked: impl Fn(usize, usize) -> bool) -> String {
    let mut out = String::new();
    for br in 0..spec.rows() * k {
        for bc in 0..spec.cols() * k {
            let ch = if spec.wall_mask[br / k][bc / k] {
                '#'
            } else if marked(br, bc) {
                '*'
            } else {
                '.'
            };
            let _ = out.write_char(ch);
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const TINY: &str = "#####\n#...#\n#.S.#\n#...#\n#####\n";

    #[test]
    fn parse_and_render() {
        let spec = MazeSpec::parse("tiny", TINY, 1.0, 0.5).unwrap();
        assert_eq!(spec.start, [2.5, 2.5]);
        assert_eq!(spec.to_grid(), TINY);
        assert_eq!(spec.free_tiles(), 9);
        assert_eq!(spec.bins_per_cell().unwrap(), 2);
    }

    #[test]
    fn parse_errors_carry_positions() {
        let err = MazeSpec::parse("x", "####\n#.S#\n#.x#\n####\n", 1.0, 1.0).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, column: 3, .. }), "{err}");
        let err = MazeSpec::parse("x", "####\n#.S.\n####\n", 1.0, 1.0).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, column: 4, .. }), "{err}");
        assert!(MazeSpec::parse("x", "###\n#.#\n###\n", 1.0, 1.0).is_err());
        assert!(MazeSpec::parse("x", TINY, 1.0, 0.3).is_err());
    }

    #[test]
    fn zero_action_and_free_moves() {
        let spec = MazeSpec::parse("tiny", TINY, 1.0, 0.5).unwrap();
        let s = MazeState { position: [2.5, 2.5], steps: 0 };
        let (same, r, done) = maze_step(&spec, &s, [0.0, 0.0]).unwrap();
        assert_eq!(same.position, s.position);
        assert_eq!((r, done), (0.0, false));
        let (moved, _, _) = maze_step(&spec, &s, [0.25, -0.25]).unwrap();
        assert_eq!(moved.position, [2.75, 2.25]);
    }

    #[test]
    fn actions_are_clipped() {
        let spec = MazeSpec::parse("tiny", TINY, 1.0, 0.5).unwrap();
        let s = MazeState { position: [2.5, 2.5], steps: 0 };
        let (moved, _, _) = maze_step(&spec, &s, [10.0, 0.0]).unwrap();
        assert_eq!(moved.position, [3.0, 2.5]);
    }

    #[test]
    fn rejects_positions_inside_walls() {
        let spec = MazeSpec::parse("tiny", TINY, 1.0, 0.5).unwrap();
        let s = MazeState { position: [0.5, 0.5], steps: 0 };
        assert!(maze_step(&spec, &s, [0.0, 0.0]).is_err());
    }

    #[test]
    fn episode_ends_after_fifty_steps() {
        let spec = MazeSpec::parse("tiny", TINY, 1.0, 0.5).unwrap();
        let mut s = MazeState { position: [2.5, 2.5], steps: 0 };
        for k in 1..=EPISODE_STEPS {
            let (next, _, done) = maze_step(&spec, &s, [0.0, 0.0]).unwrap();
            assert_eq!(done, k == EPISODE_STEPS);
            s = next;
        }
    }

    #[test]
    fn reset_stays_in_the_start_tile() {
        let spec = MazeSpec::parse("tiny", TINY, 1.0, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let s = maze_reset(&spec, &mut rng);
            assert_eq!(spec.tile_of(s.position), (2, 2));
            assert_eq!(s.steps, 0);
        }
    }

    #[test]
    fn compass_moves_have_equal_length() {
        for a in compass_actions(0.3) {
            assert!(((a[0] * a[0] + a[1] * a[1]).sqrt() - 0.3).abs() < 1e-15);
        }
    }
}
