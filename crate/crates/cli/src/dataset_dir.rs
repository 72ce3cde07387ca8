//! On-disk dataset layout: `<dir>/annotations.jsonl` plus PNG images at the
//! paths named in each record, relative to `<dir>`.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use orientseg_core::augmentation::Sample;
use orientseg_core::dataset_io::{load_annotations, save_annotations};

pub const ANNOTATIONS_FILE: &str = "annotations.jsonl";

pub fn annotations_path(dir: &Path) -> PathBuf {
    dir.join(ANNOTATIONS_FILE)
}

pub fn read_samples(dir: &Path) -> Result<Vec<Sample>> {
    let records = load_annotations(annotations_path(dir))?;
    records
        .into_iter()
        .map(|record| {
            let path = dir.join(&record.image_path);
            let image = image::open(&path)
                .with_context(|| format!("reading image {}", path.display()))?
                .to_luma8();
            Ok(Sample { record, image })
        })
        .collect()
}

pub fn write_samples(dir: &Path, samples: &[Sample]) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for s in samples {
        let path = dir.join(&s.record.image_path);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        s.image.save(&path).with_context(|| format!("writing image {}", path.display()))?;
    }
    let records: Vec<_> = samples.iter().map(|s| s.record.clone()).collect();
    save_annotations(annotations_path(dir), &records)?;
    Ok(())
}
