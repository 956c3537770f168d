//! Paired image datasets: `<root>/input/*.png` with same-named `<root>/target/*.png`.

use std::path::{Path, PathBuf};

use log::warn;

use crate::error::{Error, Result};
use crate::image::ImagePlane;
use crate::imageio::load_png;

#[derive(Debug, Clone, PartialEq)]
pub struct Pair {
    pub name: String,
    pub input: ImagePlane<f32>,
    pub target: ImagePlane<f32>,
}

/// Training and held-out pairs. When nothing is held out, evaluation uses
/// the training pairs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub train: Vec<Pair>,
    pub val: Vec<Pair>,
}

/// Deterministic 90/10 split: a name is held out when `crc32(name) % 10 == 0`.
pub fn is_held_out(name: &str) -> bool {
    crc32fast::hash(name.as_bytes()).is_multiple_of(10)
}

impl Dataset {
    /// Splits `pairs` by [`is_held_out`] when `holdout` is set. If the split
    /// would leave nothing to train on, every pair is used for training.
    pub fn from_pairs(pairs: Vec<Pair>, holdout: bool) -> Self {
        if !holdout {
            return Self { train: pairs, val: Vec::new() };
        }
        let (val, train): (Vec<_>, Vec<_>) = pairs.into_iter().partition(|p| is_held_out(&p.name));
        if train.is_empty() {
            Self { train: val, val: Vec::new() }
        } else {
            Self { train, val }
        }
    }

    pub fn eval_pairs(&self) -> &[Pair] {
        if self.val.is_empty() {
            &self.train
        } else {
            &self.val
        }
    }

    /// Loads every readable pair under `root`, sorted by file name. Pairs
    /// that fail to decode or differ in size are skipped with a warning.
    pub fn load(root: impl AsRef<Path>, holdout: bool) -> Result<Self> {
        let root = root.as_ref();
        let input_dir = root.join("input");
        let target_dir = root.join("target");
        let entries = std::fs::read_dir(&input_dir).map_err(|e| Error::io(&input_dir, e))?;
        let mut names: Vec<String> = entries
            .filter_map(|e| e.ok())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .filter(|n| n.to_ascii_lowercase().ends_with(".png"))
            .collect();
        names.sort();
        let mut pairs = Vec::new();
        for name in names {
            let ip: PathBuf = input_dir.join(&name);
            let tp: PathBuf = target_dir.join(&name);
            let loaded = load_png(&ip).and_then(|i| load_png(&tp).map(|t| (i, t)));
            match loaded {
                Ok((input, target)) if input.same_shape(&target) => {
                    pairs.push(Pair { name, input, target })
                }
                Ok((input, target)) => warn!(
                    "skipping {name}: input is {}x{} but target is {}x{}",
                    input.width(),
                    input.height(),
                    target.width(),
                    target.height()
                ),
                Err(e) => warn!("skipping {name}: {e}"),
            }
        }
        if pairs.is_empty() {
            return Err(Error::Data(format!("no valid image pairs under {}", root.display())));
        }
        Ok(Self::from_pairs(pairs, holdout))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imageio::save_png;

    fn pair(name: &str) -> Pair {
        Pair {
            name: name.into(),
            input: ImagePlane::zeros(1, 1),
            target: ImagePlane::zeros(1, 1),
        }
    }

    #[test]
    fn split_is_deterministic_and_nonempty() {
        let names: Vec<String> = (0..50).map(|i| format!("img{i:03}.png")).collect();
        let ds = Dataset::from_pairs(names.iter().map(|n| pair(n)).collect(), true);
        assert_eq!(ds.train.len() + ds.val.len(), 50);
        assert!(ds.val.iter().all(|p| is_held_out(&p.name)));
        assert!(ds.train.iter().all(|p| !is_held_out(&p.name)));
        let held: Vec<&String> = names.iter().filter(|n| is_held_out(n)).collect();
        let single = Dataset::from_pairs(vec![pair(held[0])], true);
        assert_eq!(single.train.len(), 1);
        assert_eq!(single.eval_pairs().len(), 1);
    }

    #[test]
    fn load_skips_bad_pairs() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir_all(dir.path().join("input")).unwrap();
        std::fs::create_dir_all(dir.path().join("target")).unwrap();
        let img = ImagePlane::<f32>::filled(2, 3, [0.2, 0.4, 0.6]);
        save_png(&img, dir.path().join("input/a.png")).unwrap();
        save_png(&img, dir.path().join("target/a.png")).unwrap();
        save_png(&img, dir.path().join("input/b.png")).unwrap();
        save_png(&ImagePlane::<f32>::zeros(3, 3), dir.path().join("target/b.png")).unwrap();
        save_png(&img, dir.path().join("input/c.png")).unwrap();
        std::fs::write(dir.path().join("target/c.png"), b"junk").unwrap();
        let ds = Dataset::load(dir.path(), false).unwrap();
        assert_eq!(ds.train.len(), 1);
        assert_eq!(ds.train[0].name, "a.png");

        std::fs::remove_file(dir.path().join("target/a.png")).unwrap();
        assert!(matches!(Dataset::load(dir.path(), false), Err(Error::Data(_))));
    }
}
