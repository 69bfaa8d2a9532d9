//! Expansion of a source corpus into the (band × SD × seed) stimulus grid.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::raster::Image;
use crate::spectral_noise::{apply_noise, synthesize_noise, FrequencyBand, NoiseSpec};
use crate::superclass::SuperclassSet;

pub const MANIFEST_FORMAT: &str = "vfa-manifest/1";
pub const RESIZE_POLICY: &str = "shorter-side-bilinear-center-crop";
pub const STIMULUS_DIR: &str = "stimuli";
pub const MANIFEST_FILE: &str = "manifest.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceImage {
    pub id: String,
    pub path: PathBuf,
    pub true_superclass: String,
    pub dataset_tag: String,
}

#[derive(Debug, Deserialize)]
struct LabelRow {
    id: String,
    file: String,
    superclass: String,
    #[serde(default)]
    dataset_tag: Option<String>,
}

/// Read a corpus label file with header `id,file,superclass[,dataset_tag]`.
/// `file` is resolved relative to `corpus_dir`.
pub fn load_corpus(corpus_dir: &Path, labels: &Path, classes: &SuperclassSet) -> Result<Vec<SourceImage>> {
    let mut reader = csv::Reader::from_path(labels)?;
    let mut seen = BTreeSet::new();
    let mut corpus = Vec::new();
    for (i, row) in reader.deserialize::<LabelRow>().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| Error::Parse {
            path: labels.display().to_string(),
            line,
            message: e.to_string(),
        })?;
        if !classes.contains(row.superclass.trim()) {
            return Err(Error::Parse {
                path: labels.display().to_string(),
                line,
                message: format!("unknown superclass {:?}", row.superclass),
            });
        }
        if !seen.insert(row.id.clone()) {
            return Err(Error::Parse {
                path: labels.display().to_string(),
                line,
                message: format!("duplicate image id {:?}", row.id),
            });
        }
        corpus.push(SourceImage {
            id: row.id,
            path: corpus_dir.join(row.file),
            true_superclass: row.superclass.trim().to_string(),
            dataset_tag: row.dataset_tag.filter(|t| !t.is_empty()).unwrap_or_else(|| "in-distribution".into()),
        });
    }
    Ok(corpus)
}

/// The experiment grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "FrequencyBand::default_ladder")]
    pub bands: Vec<FrequencyBand>,
    #[serde(default = "default_sd_ladder")]
    pub sd_ladder: Vec<f64>,
    #[serde(default = "default_image_size")]
    pub image_size: usize,
    #[serde(default = "default_seeds")]
    pub seeds_per_cell: usize,
    #[serde(default)]
    pub base_seed: u64,
}

pub fn default_sd_ladder() -> Vec<f64> {
    vec![0.0, 0.02, 0.04, 0.08, 0.16, 0.32, 0.64]
}

fn default_image_size() -> usize {
    224
}

fn default_seeds() -> usize {
    1
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            bands: FrequencyBand::default_ladder(),
            sd_ladder: default_sd_ladder(),
            image_size: default_image_size(),
            seeds_per_cell: default_seeds(),
            base_seed: 0,
        }
    }
}

impl GridConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        if self.bands.is_empty() {
            return Err(Error::Config("no frequency bands configured".into()));
        }
        for band in &self.bands {
            band.validate(self.image_size, self.image_size)?;
        }
        if self.sd_ladder.first() != Some(&0.0) {
            return Err(Error::Config("sd_ladder must start with 0 (unperturbed baseline)".into()));
        }
        if self.sd_ladder.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Config("sd_ladder must be strictly ascending".into()));
        }
        if self.sd_ladder.iter().any(|s| !s.is_finite()) {
            return Err(Error::Config("sd_ladder values must be finite".into()));
        }
        if self.seeds_per_cell == 0 {
            return Err(Error::Config("seeds_per_cell must be >= 1".into()));
        }
        Ok(())
    }

    /// Nonzero SD levels.
    pub fn noise_levels(&self) -> &[f64] {
        &self.sd_ladder[1..]
    }

    pub fn expected_entries(&self, n_sources: usize) -> usize {
        n_sources * self.bands.len() * self.noise_levels().len() * self.seeds_per_cell + n_sources
    }
}

/// Noise seed of one grid cell, stable across platforms and runs.
pub fn cell_seed(base_seed: u64, source_id: &str, band_index: usize, sd_index: usize, replicate: usize) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(format!("{base_seed}\u{1f}{source_id}\u{1f}{band_index}\u{1f}{sd_index}\u{1f}{replicate}"));
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestHeader {
    pub format: String,
    pub grid: GridConfig,
    pub image_size: usize,
    pub resize: String,
    /// False when the manifest was planned without writing image files.
    pub rendered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub stimulus_id: String,
    pub source_id: String,
    pub true_superclass: String,
    pub dataset_tag: String,
    /// Index into the header's band ladder; absent for the baseline.
    pub band_index: Option<usize>,
    pub band: Option<FrequencyBand>,
    pub target_sd: f64,
    pub seed: u64,
    /// Relative to the manifest's directory.
    pub path: Option<String>,
    pub clipped_fraction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ManifestEntry {
    pub fn is_baseline(&self) -> bool {
        self.band_index.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StimulusManifest {
    pub header: ManifestHeader,
    pub entries: Vec<ManifestEntry>,
}

impl StimulusManifest {
    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(format!("writing {}", path.display()), e);
        serde_json::to_writer(&mut w, &self.header)?;
        w.write_all(b"\n").map_err(io)?;
        for entry in &self.entries {
            serde_json::to_writer(&mut w, entry)?;
            w.write_all(b"\n").map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn read_jsonl(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
        let mut lines = BufReader::new(file).lines();
        let parse_err = |line: usize, message: String| Error::Parse {
            path: path.display().to_string(),
            line,
            message,
        };
        let first = lines
            .next()
            .ok_or_else(|| parse_err(1, "empty manifest".into()))?
            .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        let header: ManifestHeader = serde_json::from_str(&first).map_err(|e| parse_err(1, e.to_string()))?;
        if header.format != MANIFEST_FORMAT {
            return Err(parse_err(1, format!("unsupported manifest format {:?}", header.format)));
        }
        let mut entries = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
            if line.trim().is_empty() {
                continue;
            }
            entries.push(serde_json::from_str(&line).map_err(|e| parse_err(i + 2, e.to_string()))?);
        }
        Ok(Self { header, entries })
    }
}

/// Lay out every manifest entry for the grid without touching image files.
pub fn plan_stimuli(corpus: &[SourceImage], grid: &GridConfig) -> Result<StimulusManifest> {
    if corpus.is_empty() {
        return Err(Error::Config("corpus is empty".into()));
    }
    grid.validate()?;
    let mut ids = BTreeSet::new();
    for src in corpus {
        if !ids.insert(src.id.as_str()) {
            return Err(Error::Config(format!("duplicate source id {:?}", src.id)));
        }
    }

    let mut entries = Vec::with_capacity(grid.expected_entries(corpus.len()));
    for src in corpus {
        let stimulus_id = format!("{}_base", src.id);
        entries.push(ManifestEntry {
            path: Some(format!("{STIMULUS_DIR}/{stimulus_id}.png")),
            stimulus_id,
            source_id: src.id.clone(),
            true_superclass: src.true_superclass.clone(),
            dataset_tag: src.dataset_tag.clone(),
            band_index: None,
            band: None,
            target_sd: 0.0,
            seed: 0,
            clipped_fraction: 0.0,
            error: None,
        });
        for (b, band) in grid.bands.iter().enumerate() {
            for (s, &sd) in grid.noise_levels().iter().enumerate() {
                for rep in 0..grid.seeds_per_cell {
                    let stimulus_id = format!("{}_b{b:02}_sd{:02}_r{rep:02}", src.id, s + 1);
                    entries.push(ManifestEntry {
                        path: Some(format!("{STIMULUS_DIR}/{stimulus_id}.png")),
                        stimulus_id,
                        source_id: src.id.clone(),
                        true_superclass: src.true_superclass.clone(),
                        dataset_tag: src.dataset_tag.clone(),
                        band_index: Some(b),
                        band: Some(*band),
                        target_sd: sd,
                        seed: cell_seed(grid.base_seed, &src.id, b, s + 1, rep),
                        clipped_fraction: 0.0,
                        error: None,
                    });
                }
            }
        }
    }
    Ok(StimulusManifest {
        header: ManifestHeader {
            format: MANIFEST_FORMAT.into(),
            grid: grid.clone(),
            image_size: grid.image_size,
            resize: RESIZE_POLICY.into(),
            rendered: false,
        },
        entries,
    })
}

/// Render every stimulus of the grid into `out_dir/stimuli/` and write
/// `out_dir/manifest.jsonl`. Sources that fail to decode are kept in the
/// manifest with an `error`; at least one source must decode.
pub fn generate_stimuli(corpus: &[SourceImage], grid: &GridConfig, out_dir: &Path) -> Result<StimulusManifest> {
    let mut manifest = plan_stimuli(corpus, grid)?;
    let size = grid.image_size;

    let sources: Vec<std::result::Result<Image, String>> = corpus
        .par_iter()
        .map(|src| Image::open(&src.path).map(|img| img.resize_and_crop(size)).map_err(|e| e.to_string()))
        .collect();
    if sources.iter().all(|s| s.is_err()) {
        return Err(Error::Data("no decodable images in corpus".into()));
    }
    let by_id: std::collections::HashMap<&str, &std::result::Result<Image, String>> =
        corpus.iter().map(|s| s.id.as_str()).zip(sources.iter()).collect();

    let stim_dir = out_dir.join(STIMULUS_DIR);
    std::fs::create_dir_all(&stim_dir).map_err(|e| Error::io(format!("creating {}", stim_dir.display()), e))?;

    let rendered: Vec<Result<ManifestEntry>> = manifest
        .entries
        .par_iter()
        .map(|entry| {
            let mut entry = entry.clone();
            let source = match by_id[entry.source_id.as_str()] {
                Ok(img) => img,
                Err(msg) => {
                    entry.path = None;
                    entry.error = Some(msg.clone());
                    return Ok(entry);
                }
            };
            let (image, clipped) = match (entry.band, entry.target_sd) {
                (Some(band), sd) if sd > 0.0 => {
                    let spec = NoiseSpec {
                        band,
                        target_sd: sd,
                        seed: entry.seed,
                    };
                    let field = synthesize_noise(&spec, size, size)?;
                    apply_noise(source, &field)?
                }
                _ => (source.clone(), 0.0),
            };
            entry.clipped_fraction = clipped;
            let rel = entry.path.as_ref().expect("planned entries carry a path");
            image.save_png(&out_dir.join(rel))?;
            Ok(entry)
        })
        .collect();
    manifest.entries = rendered.into_iter().collect::<Result<_>>()?;
    manifest.header.rendered = true;
    manifest.write_jsonl(&out_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}
