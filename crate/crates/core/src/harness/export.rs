//! `teb layouts` and `teb export`: write built-in fixtures to disk.

use std::path::{Path, PathBuf};

use crate::envs::chain::{reward_free_chain, sparse_chain_mdp};
use crate::envs::layouts::all_layouts;
use crate::error::Result;
use crate::harness::config::ExperimentConfig;
use crate::harness::write_file;
use crate::mdp::random_mdp;

/// Grid text with a `; cell_size` line, which [`ExperimentConfig::layout`]
/// reads back when the config leaves `maze.cell_size` unset.
pub fn layout_file(spec: &crate::envs::maze::MazeSpec) -> String {
    format!("; {}\n; cell_size {}\n{}", spec.name, spec.cell_size, spec.to_grid())
}

pub fn write_layouts(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for spec in all_layouts() {
        let path = dir.join(format!("{}.txt", spec.name));
        write_file(&path, &layout_file(&spec))?;
        out.push(path);
    }
    Ok(out)
}

/// Chain and random MDP fixtures plus the default config.
pub fn export_fixtures(dir: &Path, seed: u64) -> Result<Vec<PathBuf>> {
    let files = [
        ("sparse_chain.mdp", sparse_chain_mdp(6, 1.0, 0.9)?.to_text()),
        ("reward_free_chain.mdp", reward_free_chain(5, 0.9)?.to_text()),
        ("random.mdp", random_mdp(seed, 6, 3, 0.5)?.to_text()),
        ("teb.toml", ExperimentConfig::default().to_toml()?),
    ];
    let mut out = Vec::new();
    for (name, text) in files {
        let path = dir.join(name);
        write_file(&path, &text)?;
        out.push(path);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::layouts::builtin_layout;
    use crate::mdp::TabularMdp;

    #[test]
    fn written_layouts_load_back() {
        let dir = tempfile::tempdir().unwrap();
        for path in write_layouts(dir.path()).unwrap() {
            let mut cfg = ExperimentConfig::default();
            cfg.maze.layout = path.to_string_lossy().into_owned();
            let spec = cfg.layout().unwrap();
            let orig = builtin_layout(&spec.name).unwrap();
            assert_eq!(spec.wall_mask, orig.wall_mask);
            assert_eq!(spec.start, orig.start);
            assert_eq!(spec.cell_size, orig.cell_size);
        }
    }

    #[test]
    fn fixtures_parse() {
        let dir = tempfile::tempdir().unwrap();
        let files = export_fixtures(dir.path(), 0).unwrap();
        for p in &files[..3] {
            TabularMdp::from_text(&std::fs::read_to_string(p).unwrap()).unwrap();
        }
        ExperimentConfig::load(&files[3]).unwrap();
    }
}
