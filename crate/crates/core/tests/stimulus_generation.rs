use std::path::Path;

use vfa::stimulus_gen::{generate_stimuli, load_corpus, GridConfig, StimulusManifest, MANIFEST_FILE};
use vfa::superclass::SuperclassSet;
use vfa::FrequencyBand;
use vfa::Error;

/// Writes `n` small RGB gradients plus a labels CSV; returns the labels path.
fn toy_corpus(dir: &Path, n: usize, broken: usize) -> std::path::PathBuf {
    let classes = SuperclassSet::default();
    let mut labels = String::from("id,file,superclass\n");
    for i in 0..n {
        let file = format!("src{i:02}.png");
        if i < broken {
            std::fs::write(dir.join(&file), b"not a png").unwrap();
        } else {
            let img = image::RgbImage::from_fn(80, 60, |x, y| {
                image::Rgb([(x * 3 + i as u32 * 7) as u8, (y * 4) as u8, ((x + y) * 2) as u8])
            });
            img.save(dir.join(&file)).unwrap();
        }
        labels.push_str(&format!("toy{i:02},{file},{}\n", classes.names()[i % 16]));
    }
    let path = dir.join("labels.csv");
    std::fs::write(&path, labels).unwrap();
    path
}

#[test]
fn default_grid_over_sixteen_images() {
    let src = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    let labels = toy_corpus(src.path(), 16, 0);
    let corpus = load_corpus(src.path(), &labels, &SuperclassSet::default()).unwrap();
    let grid = GridConfig::default();
    let manifest = generate_stimuli(&corpus, &grid, out.path()).unwrap();

    assert_eq!(manifest.entries.len(), 16 * 7 * 6 + 16);
    assert_eq!(manifest.entries.len(), 688);
    assert!(manifest.header.rendered);
    let png_count = std::fs::read_dir(out.path().join("stimuli")).unwrap().count();
    assert_eq!(png_count, 688);
    for e in manifest.entries.iter().step_by(37) {
        let img = image::open(out.path().join(e.path.as_ref().unwrap())).unwrap();
        assert_eq!((img.width(), img.height()), (224, 224));
        assert!((0.0..=1.0).contains(&e.clipped_fraction));
    }
    let back = StimulusManifest::read_jsonl(&out.path().join(MANIFEST_FILE)).unwrap();
    assert_eq!(back, manifest);
}

#[test]
fn rendering_is_reproducible() {
    let src = tempfile::tempdir().unwrap();
    let labels = toy_corpus(src.path(), 2, 0);
    let corpus = load_corpus(src.path(), &labels, &SuperclassSet::default()).unwrap();
    let grid = GridConfig {
        image_size: 64,
        bands: FrequencyBand::default_ladder().into_iter().take(5).collect(),
        sd_ladder: vec![0.0, 0.1],
        ..GridConfig::default()
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    generate_stimuli(&corpus, &grid, a.path()).unwrap();
    generate_stimuli(&corpus, &grid, b.path()).unwrap();
    assert_eq!(
        std::fs::read(a.path().join(MANIFEST_FILE)).unwrap(),
        std::fs::read(b.path().join(MANIFEST_FILE)).unwrap()
    );
    for entry in std::fs::read_dir(a.path().join("stimuli")).unwrap() {
        let name = entry.unwrap().file_name();
        assert_eq!(
            std::fs::read(a.path().join("stimuli").join(&name)).unwrap(),
            std::fs::read(b.path().join("stimuli").join(&name)).unwrap(),
            "{name:?}"
        );
    }
}

#[test]
fn undecodable_source_is_recorded_not_fatal() {
    let src = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    let labels = toy_corpus(src.path(), 3, 1);
    let corpus = load_corpus(src.path(), &labels, &SuperclassSet::default()).unwrap();
    let grid = GridConfig {
        image_size: 32,
        bands: vec![FrequencyBand::new(4.0, 1.0, 0.25)],
        sd_ladder: vec![0.0, 0.05],
        ..GridConfig::default()
    };
    let manifest = generate_stimuli(&corpus, &grid, out.path()).unwrap();
    let failed: Vec<_> = manifest.entries.iter().filter(|e| e.error.is_some()).collect();
    assert_eq!(failed.len(), 2);
    assert!(failed.iter().all(|e| e.source_id == "toy00" && e.path.is_none()));
    assert_eq!(std::fs::read_dir(out.path().join("stimuli")).unwrap().count(), 4);
}

#[test]
fn unknown_superclass_in_labels() {
    let src = tempfile::tempdir().unwrap();
    std::fs::write(src.path().join("labels.csv"), "id,file,superclass\na,a.png,giraffe\n").unwrap();
    let err = load_corpus(src.path(), &src.path().join("labels.csv"), &SuperclassSet::default()).unwrap_err();
    assert!(err.to_string().contains("giraffe"), "{err}");
    assert!(!matches!(err, Error::Io { .. }));
}
