use crate::envs::maze::MazeSpec;
use crate::error::{Error, Result};

pub const LAYOUT_CELL: f64 = 0.2;

const SQUARE: &str = "\
###########
#.........#
#.........#
#..##.##..#
#..#...#..#
#....S....#
#..#...#..#
#..##.##..#
#.........#
#.........#
###########
";

const CORRIDOR: &str = "\
##############
#S...........#
###########..#
###########..#
#............#
#..###########
#..###########
#............#
##############
";

const TREE: &str = "\
###############
#.#.#.###.#.#.#
#.....###.....#
###.#######.###
###.........###
#######.#######
#######.#######
#######S#######
###############
";

const BOTTLENECK: &str = "\
###############
#......#......#
#......#......#
#......#......#
#......#......#
#......#......#
#......#......#
#..S...#......#
#......#......#
#......#......#
#......#......#
#.............#
#......#......#
#......#......#
###############
";

/// `(name, grid, coverage cell size)`.
const BUILTIN: [(&str, &str, f64); 4] = [
    ("square", SQUARE, 0.05),
    ("corridor", CORRIDOR, 0.05),
    ("tree", TREE, 0.1),
    ("bottleneck", BOTTLENECK, 0.1),
];

pub fn layout_names() -> Vec<&'static str> {
    BUILTIN.iter().map(|(n, _, _)| *n).collect()
}

pub fn builtin_layout(name: &str) -> Result<MazeSpec> {
    let (n, grid, cell) = BUILTIN
        .iter()
        .find(|(n, _, _)| *n == name)
        .ok_or_else(|| Error::Config(format!("unknown layout `{name}`; known: {}", layout_names().join(", "))))?;
    MazeSpec::parse(n, grid, LAYOUT_CELL, *cell)
}

pub fn all_layouts() -> Vec<MazeSpec> {
    BUILTIN
        .iter()
        .map(|(n, g, c)| MazeSpec::parse(n, g, LAYOUT_CELL, *c).expect("builtin layouts parse"))
        .collect()
}

/// Free tiles reachable from the start by 4-neighbour moves.
pub fn reachable_tiles(spec: &MazeSpec) -> Vec<(usize, usize)> {
    let start = spec.tile_of(spec.start);
    let mut seen = vec![vec![false; spec.cols()]; spec.rows()];
    let mut stack = vec![start];
    seen[start.0][start.1] = true;
    let mut out = Vec::new();
    while let Some((r, c)) = stack.pop() {
        out.push((r, c));
        let nbrs = [(r.wrapping_sub(1), c), (r + 1, c), (r, c.wrapping_sub(1)), (r, c + 1)];
        for (nr, nc) in nbrs {
            if nr < spec.rows() && nc < spec.cols() && !spec.is_wall_tile(nr, nc) && !seen[nr][nc] {
                seen[nr][nc] = true;
                stack.push((nr, nc));
            }
        }
    }
    out.sort_unstable();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::maze::{maze_reset, maze_step, MazeState};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn builtins_parse_and_are_connected() {
        for spec in all_layouts() {
            assert_eq!(reachable_tiles(&spec).len(), spec.free_tiles(), "{}", spec.name);
            assert_eq!(spec.to_grid(), BUILTIN.iter().find(|b| b.0 == spec.name).unwrap().1);
        }
        assert!(builtin_layout("nope").is_err());
    }

    #[test]
    fn bottleneck_gap_is_the_only_link() {
        let mut spec = builtin_layout("bottleneck").unwrap();
        let gap = (11, 7);
        assert!(!spec.wall_mask[gap.0][gap.1]);
        spec.wall_mask[gap.0][gap.1] = true;
        let reach = reachable_tiles(&spec);
        assert!(reach.iter().all(|&(_, c)| c < 7));
        assert!(reach.len() < spec.free_tiles());
    }

    #[test]
    fn coverage_cells_divide_layout_cells() {
        for spec in all_layouts() {
            let k = spec.bins_per_cell().unwrap();
            assert!(k == 2 || k == 4, "{}", spec.name);
        }
    }

    #[test]
    fn random_actions_never_enter_walls() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for spec in all_layouts() {
            let a = spec.max_action();
            let mut s: MazeState = maze_reset(&spec, &mut rng);
            for _ in 0..5000 {
                let act = [rng.gen_range(-1.5 * a..1.5 * a), rng.gen_range(-1.5 * a..1.5 * a)];
                let (next, _, done) = maze_step(&spec, &s, act).unwrap();
                assert!(spec.is_free(next.position), "{} {:?}", spec.name, next.position);
                let (r0, c0) = spec.tile_of(s.position);
                let (r1, c1) = spec.tile_of(next.position);
                assert!(r0.abs_diff(r1) <= 2 && c0.abs_diff(c1) <= 2);
                s = if done { maze_reset(&spec, &mut rng) } else { next };
            }
        }
    }
}
