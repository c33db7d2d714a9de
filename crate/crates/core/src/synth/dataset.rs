//! On-disk datasets: PNG patches and masks indexed by a tab-separated manifest.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use super::atlas::CLASS_COUNT;
use super::render::{sample_rng, CharRenderer, SynthConfig};
use crate::error::{Error, Result};
use crate::raster::RasterImage;
use crate::textcnn::{MultiTaskSample, PATCH_SIDE};

pub const MANIFEST_NAME: &str = "manifest.tsv";

/// One manifest line. Paths are relative to the manifest's directory.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestEntry {
    pub patch: PathBuf,
    pub mask: Option<PathBuf>,
    pub class: Option<usize>,
    pub binary: Option<u8>,
}

impl ManifestEntry {
    pub fn to_line(&self) -> String {
        fn opt<T: ToString>(v: &Option<T>) -> String {
            v.as_ref().map_or_else(|| "-".into(), T::to_string)
        }
        format!(
            "{}\t{}\t{}\t{}",
            self.patch.display(),
            self.mask
                .as_ref()
                .map_or_else(|| "-".into(), |p| p.display().to_string()),
            opt(&self.class),
            opt(&self.binary)
        )
    }

    fn parse(line: &str) -> std::result::Result<Self, String> {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(format!("expected 4 tab-separated fields, found {}", fields.len()));
        }
        fn opt<T: std::str::FromStr>(s: &str, what: &str) -> std::result::Result<Option<T>, String> {
            if s == "-" {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| format!("bad {what} {s:?}"))
            }
        }
        Ok(Self {
            patch: PathBuf::from(fields[0]),
            mask: (fields[1] != "-").then(|| PathBuf::from(fields[1])),
            class: opt(fields[2], "class")?,
            binary: opt(fields[3], "binary label")?,
        })
    }
}

/// Renders `config.count` characters, cycling through the classes in order.
/// Sample `i` draws from generator stream `i` of `config.seed`.
pub fn render_dataset(config: &SynthConfig) -> Result<Vec<MultiTaskSample>> {
    let renderer = CharRenderer::new(config.clone())?;
    Ok((0..config.count)
        .map(|i| {
            renderer
                .render_with(i % CLASS_COUNT, &mut sample_rng(config.seed, i as u64))
                .to_sample()
        })
        .collect())
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::io(path, e)
}

fn mask_image(mask: &[f32]) -> RasterImage {
    let data = mask.iter().flat_map(|&m| [if m > 0.5 { 255 } else { 0 }; 3]).collect();
    RasterImage::new(PATCH_SIDE, PATCH_SIDE, data).expect("mask is 32x32")
}

/// Writes samples as `patches/NNNNNN.png` (+ `masks/NNNNNN.png`) under
/// `dir`, plus the manifest. Returns the manifest path.
pub fn save_samples(samples: &[MultiTaskSample], dir: &Path) -> Result<PathBuf> {
    let patches = dir.join("patches");
    fs::create_dir_all(&patches).map_err(io_err(&patches))?;
    if samples.iter().any(|s| s.mask.is_some()) {
        let masks = dir.join("masks");
        fs::create_dir_all(&masks).map_err(io_err(&masks))?;
    }
    let mut lines = String::new();
    for (i, s) in samples.iter().enumerate() {
        s.validate()?;
        let patch = PathBuf::from(format!("patches/{i:06}.png"));
        s.to_image().save_png(dir.join(&patch))?;
        let mask = match &s.mask {
            Some(m) => {
                let p = PathBuf::from(format!("masks/{i:06}.png"));
                mask_image(m).save_png(dir.join(&p))?;
                Some(p)
            }
            None => None,
        };
        let entry = ManifestEntry {
            patch,
            mask,
            class: s.char_label,
            binary: s.binary_label,
        };
        lines.push_str(&entry.to_line());
        lines.push('\n');
    }
    let path = dir.join(MANIFEST_NAME);
    let mut f = fs::File::create(&path).map_err(io_err(&path))?;
    f.write_all(lines.as_bytes()).map_err(io_err(&path))?;
    Ok(path)
}

/// Renders and saves a character dataset; see [`render_dataset`].
pub fn generate_dataset(config: &SynthConfig, dir: &Path) -> Result<PathBuf> {
    save_samples(&render_dataset(config)?, dir)
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let f = fs::File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(ManifestEntry::parse(&line).map_err(|message| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        })?);
    }
    Ok(out)
}

/// Loads every sample a manifest lists.
pub fn load_samples(manifest: &Path) -> Result<Vec<MultiTaskSample>> {
    let root = manifest.parent().unwrap_or(Path::new("."));
    read_manifest(manifest)?
        .into_iter()
        .map(|e| {
            let img = RasterImage::load(root.join(&e.patch))?;
            let mask = match &e.mask {
                Some(p) => {
                    let m = RasterImage::load(root.join(p))?;
                    Some(m.pixels().map(|px| u8::from(px[0] > 127)).collect::<Vec<_>>())
                }
                None => None,
            };
            MultiTaskSample::from_image(&img, mask.as_deref(), e.class, e.binary)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_line_roundtrip() {
        let e = ManifestEntry {
            patch: "patches/000001.png".into(),
            mask: None,
            class: Some(12),
            binary: Some(1),
        };
        assert_eq!(e.to_line(), "patches/000001.png\t-\t12\t1");
        assert_eq!(ManifestEntry::parse(&e.to_line()).unwrap(), e);
        assert!(ManifestEntry::parse("a\tb").is_err());
        assert!(ManifestEntry::parse("a\t-\tx\t-").is_err());
    }

    #[test]
    fn round_robin_classes() {
        let cfg = SynthConfig {
            count: 124,
            ..SynthConfig::default()
        };
        let set = render_dataset(&cfg).unwrap();
        let mut counts = [0usize; CLASS_COUNT];
        for s in &set {
            counts[s.char_label.unwrap()] += 1;
        }
        assert!(counts.iter().all(|&c| c == 2));
    }
}
