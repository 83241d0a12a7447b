use std::fmt::Write as _;
use std::path::Path;

use nsv_core::audioio::read_manifest;
use nsv_core::pipeline::{gen_corpus, prepare, Dataset, PipelineConfig};
use nsv_core::ppcodec::{rle_decode, rle_encode};
use nsv_core::units::{import_units, parse_units_tsv, N_UNITS};
use nsv_core::NsvError;

#[test]
fn fixture_parses_with_valid_indices() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/units_3.tsv");
    let units = import_units(&path).unwrap();
    assert_eq!(units.len(), 3);
    for seq in units.values() {
        assert_eq!(seq.frame_rate_hz, 50);
        assert!(!seq.indices.is_empty());
        assert!(seq.indices.iter().all(|&i| (i as usize) < N_UNITS));
        let pp = rle_encode(seq);
        assert!(pp.units.windows(2).all(|w| w[0] != w[1]));
        assert_eq!(&rle_decode(&pp, &seq.utterance_id).unwrap(), seq);
    }
    assert_eq!(units["clip_b"].indices, vec![3]);
}

#[test]
fn malformed_rows_are_rejected_with_line_numbers() {
    let err = parse_units_tsv("#frame_rate_hz=50\na\t1,2\nb\t1,100\n").unwrap_err();
    assert!(matches!(err, NsvError::Parse { line: 3, .. }), "{err}");
    assert!(parse_units_tsv("a\t1,2\n").is_err());
    assert!(parse_units_tsv("#frame_rate_hz=50\na\t1,x\n").is_err());
    assert!(parse_units_tsv("#frame_rate_hz=50\na\t1\na\t2\n").is_err());
}

/// Units at the 50 Hz encoder rate drive `prepare` in place of the built-in
/// quantizer, and durations are rescaled onto the 100 Hz mel grid.
#[test]
fn imported_units_feed_prepare() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = PipelineConfig::default();
    cfg.workdir = tmp.path().to_path_buf();
    cfg.set("gen.n_speakers", "3").unwrap();
    cfg.set("gen.clips_per_speaker", "1").unwrap();
    gen_corpus(&cfg).unwrap();
    let manifest = read_manifest(&cfg.corpus_dir().join("manifest.tsv")).unwrap();
    let mut tsv = String::from("#frame_rate_hz=50\n");
    for (k, e) in manifest.entries.iter().enumerate() {
        let frames = (e.duration_s * 50.0).floor() as usize;
        let idx: Vec<String> = (0..frames).map(|i| ((i / 4 + k * 7) % 100).to_string()).collect();
        let _ = writeln!(tsv, "{}\t{}", e.utterance_id, idx.join(","));
    }
    let units_path = tmp.path().join("units.tsv");
    std::fs::write(&units_path, tsv).unwrap();
    cfg.set("units_file", units_path.to_str().unwrap()).unwrap();

    let report = prepare(&cfg).unwrap();
    assert!(report.units_source.starts_with("import:"));
    assert_eq!(report.alignment_violations, 0);
    let ds = Dataset::load(&cfg.dataset_dir()).unwrap();
    assert_eq!(ds.items.len(), 3);
    for item in &ds.items {
        assert_eq!(item.pp.frame_rate_hz, 50);
        let aligned: u32 = ds.aligned_durations(item).unwrap().iter().sum();
        assert_eq!(aligned as usize, item.mel.frames);
    }

    std::fs::write(&units_path, "#frame_rate_hz=50\nsomeone_else\t1,2\n").unwrap();
    let err = prepare(&cfg).unwrap_err();
    assert!(matches!(err.root(), NsvError::Validation(_)), "{err}");
}
