//! Acceptance gate. Each criterion prints one `PASS`/`FAIL` line; the process
//! exits nonzero if any fails. Criteria 5, 6 and 8 share one prepared corpus
//! and one trained model.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nsv_core::acoustic::{AcousticModel, Checkpoint, Mode, ModelInput};
use nsv_core::audioio::AudioClip;
use nsv_core::eval::{fid, repeated_fid, FidReference, GaussianStats};
use nsv_core::features::{analyze, FrameConfig, MelFilterbank, MelSpectrogram, PitchContour, N_MELS};
use nsv_core::io::read_text;
use nsv_core::pipeline::{
    analyze_speakers, gen_corpus, prepare, read_speaker_groups, synthesize, train_model, write_synthesis, Dataset,
    PipelineConfig, PpSource, Synthesizer,
};
use nsv_core::ppcodec::{from_text, rle_decode, rle_encode, to_text};
use nsv_core::units::UnitSequence;
use nsv_core::vocoder::{HnmConfig, Vocoder};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(limit: Duration, took: Duration, detail: String) -> Outcome {
    check(took < limit, format!("{detail}, {:.1} s of {} s budget", took.as_secs_f64(), limit.as_secs()))
}

fn codec_round_trip() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut failures = 0usize;
    let mut units_total = 0usize;
    for i in 0..10_000 {
        let len = rng.random_range(0..=10_000);
        let mut indices = Vec::with_capacity(len);
        // Mix of long runs and run-free stretches.
        let max_run = if i % 3 == 0 { 1 } else { rng.random_range(2..=50) };
        while indices.len() < len {
            let u: u16 = rng.random_range(0..100);
            let run = rng.random_range(1..=max_run).min(len - indices.len());
            indices.extend(std::iter::repeat_n(u, run));
        }
        units_total += len;
        let seq = UnitSequence {
            indices,
            frame_rate_hz: 50,
            utterance_id: format!("f{i}"),
        };
        let pp = rle_encode(&seq);
        let decoded = rle_decode(&pp, &seq.utterance_id);
        let text_ok = to_text(&pp).and_then(|t| from_text(&t)).map(|u| u == pp.units);
        if !matches!(decoded, Ok(ref d) if *d == seq) || !matches!(text_ok, Ok(true)) {
            failures += 1;
        }
    }
    let took = start.elapsed();
    if failures > 0 {
        return Err(format!("{failures} of 10000 sequences failed"));
    }
    within(
        Duration::from_secs(10),
        took,
        format!("10000 sequences, {units_total} units, 0 failures"),
    )
}

fn stats(mean: Vec<f64>, cov: Vec<f64>) -> GaussianStats {
    GaussianStats { mean, cov, n: 10 }
}

fn scaled_identity(d: usize, s: f64) -> Vec<f64> {
    (0..d * d).map(|i| if i % (d + 1) == 0 { s } else { 0.0 }).collect()
}

fn random_psd(d: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let b: Vec<f64> = (0..d * d).map(|_| StandardNormal.sample(rng)).collect();
    let mut c = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            c[i * d + j] = (0..d).map(|k| b[i * d + k] * b[j * d + k]).sum::<f64>() / d as f64;
        }
    }
    c
}

fn fid_closed_forms() -> Outcome {
    let a = stats(vec![0.3, -0.2, 1.0], vec![2.0, 0.5, 0.1, 0.5, 1.0, 0.2, 0.1, 0.2, 0.7]);
    let self_fid = fid(&a, &a).map_err(|e| e.to_string())?;
    let shift = fid(
        &stats(vec![0.0; 3], scaled_identity(3, 1.0)),
        &stats(vec![1.0, 0.0, 0.0], scaled_identity(3, 1.0)),
    )
    .map_err(|e| e.to_string())?;
    let commuting = fid(
        &stats(vec![0.0; 2], scaled_identity(2, 4.0)),
        &stats(vec![0.0; 2], scaled_identity(2, 1.0)),
    )
    .map_err(|e| e.to_string())?;

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst_sym, mut worst_shift) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let d = rng.random_range(2..=12);
        let ma: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mb: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let a = stats(ma, random_psd(d, &mut rng));
        let b = stats(mb, random_psd(d, &mut rng));
        let ab = fid(&a, &b).map_err(|e| e.to_string())?;
        worst_sym = worst_sym.max((ab - fid(&b, &a).unwrap()).abs());
        let by: Vec<f64> = (0..d).map(|_| rng.random_range(-5.0..5.0)).collect();
        let moved = |s: &GaussianStats| GaussianStats {
            mean: s.mean.iter().zip(&by).map(|(x, y)| x + y).collect(),
            ..s.clone()
        };
        worst_shift = worst_shift.max((ab - fid(&moved(&a), &moved(&b)).unwrap()).abs());
    }
    let ok = self_fid.abs() <= 1e-9
        && (shift - 1.0).abs() <= 1e-9
        && (commuting - 2.0).abs() <= 1e-9
        && worst_sym <= 1e-8
        && worst_shift <= 1e-8;
    check(
        ok,
        format!(
            "fid(a,a)={self_fid:.1e}, shift={shift:.12}, commuting={commuting:.12}, \
             max asymmetry {worst_sym:.1e}, max translation drift {worst_shift:.1e}"
        ),
    )
}

fn fid_small_sample_bias() -> Outcome {
    let start = Instant::now();
    let d = 512;
    let scale = |j: usize| 1.0 + (j % 7) as f64 * 0.1;
    let mean: Vec<f64> = (0..d).map(|j| 0.1 * j as f64 / d as f64).collect();
    let mut cov = vec![0.0; d * d];
    for j in 0..d {
        cov[j * d + j] = scale(j).powi(2);
    }
    let truth = FidReference::new(GaussianStats {
        mean: mean.clone(),
        cov,
        n: u64::MAX,
    })
    .map_err(|e| e.to_string())?;
    let source = |_: usize, n: usize, rng: &mut ChaCha8Rng| {
        Ok((0..n)
            .map(|_| {
                (0..d)
                    .map(|j| {
                        let z: f64 = StandardNormal.sample(rng);
                        mean[j] + scale(j) * z
                    })
                    .collect()
            })
            .collect())
    };
    let small = repeated_fid(source, &truth, 100, 10, 3).map_err(|e| e.to_string())?;
    let large = repeated_fid(source, &truth, 1000, 10, 3).map_err(|e| e.to_string())?;
    let detail = format!(
        "n=100 {:.3}±{:.3}, n=1000 {:.3}±{:.3}",
        small.mean, small.std, large.mean, large.std
    );
    if small.mean <= large.mean {
        return Err(detail);
    }
    within(Duration::from_secs(120), start.elapsed(), detail)
}

fn gradient_check_criterion() -> Outcome {
    use nsv_core::acoustic::{gradient_check, GradCheckOptions, ModelConfig, TrainItem, GROUPS};
    let start = Instant::now();
    let cfg = ModelConfig {
        embed_dim: 16,
        conv_channels: 16,
        n_speakers: 3,
        dropout: 0.0,
        ..ModelConfig::default()
    };
    let model = AcousticModel::new(cfg, 3).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    // Mel targets far above the outputs keep L1 away from its kink.
    let items: Vec<TrainItem> = (0..4)
        .map(|i| {
            let t = rng.random_range(3..7);
            let durations: Vec<u32> = (0..t).map(|_| rng.random_range(1..4)).collect();
            let frames: usize = durations.iter().map(|&d| d as usize).sum();
            TrainItem {
                utterance_id: format!("g{i}"),
                units: (0..t).map(|_| rng.random_range(0..100)).collect(),
                durations,
                speaker: i % 3,
                mel: vec![25.0; frames * N_MELS],
                pitch: (0..frames).map(|_| rng.random::<f64>()).collect(),
                voiced: (0..frames).map(|_| rng.random::<f64>() < 0.7).collect(),
            }
        })
        .collect();
    let report = gradient_check(&model, &items, &GradCheckOptions::default()).map_err(|e| e.to_string())?;
    let min_checked = report.groups.iter().map(|g| g.sampled - g.skipped).min().unwrap_or(0);
    let mut missed = Vec::new();
    for group in GROUPS {
        let opts = GradCheckOptions {
            per_group: 20,
            fault: Some((group.to_string(), 1.1)),
            ..GradCheckOptions::default()
        };
        if gradient_check(&model, &items, &opts).map_err(|e| e.to_string())?.passes(1e-4) {
            missed.push(group);
        }
    }
    let detail = format!(
        "max rel error {:.2e} over {} groups, >= {min_checked} coords each, 10% fault missed in {missed:?}",
        report.max_rel_error,
        report.groups.len()
    );
    if !(report.passes(1e-4) && min_checked >= 200 && missed.is_empty()) {
        return Err(detail);
    }
    within(Duration::from_secs(60), start.elapsed(), detail)
}

/// The 20-utterance corpus, prepared and trained once for criteria 5, 6 and 8.
struct Trained {
    cfg: PipelineConfig,
    dataset: Dataset,
    initial: AcousticModel,
    ckpt: Checkpoint,
    prepare_violations: usize,
    train_time: Duration,
}

fn build_trained(dir: &Path) -> Result<Trained, String> {
    let mut cfg = PipelineConfig::default();
    cfg.workdir = dir.to_path_buf();
    cfg.set("seed", "7").map_err(|e| e.to_string())?;
    gen_corpus(&cfg).map_err(|e| e.to_string())?;
    let report = prepare(&cfg).map_err(|e| e.to_string())?;
    let dataset = Dataset::load(&cfg.dataset_dir()).map_err(|e| e.to_string())?;
    let mut model_cfg = cfg.model.clone();
    model_cfg.n_speakers = dataset.speakers.len();
    let initial = AcousticModel::new(model_cfg, cfg.seeds.model()).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let (ckpt, _) = train_model(&cfg, |_, _| Ok(())).map_err(|e| e.to_string())?;
    Ok(Trained {
        cfg,
        dataset,
        initial,
        ckpt,
        prepare_violations: report.alignment_violations,
        train_time: start.elapsed(),
    })
}

fn frame_alignment(t: &Trained) -> Outcome {
    let mut violations = t.prepare_violations;
    for item in &t.dataset.items {
        let aligned: u32 = t.dataset.aligned_durations(item).map_err(|e| e.to_string())?.iter().sum();
        if aligned as usize != item.mel.frames || item.pitch.len() != item.mel.frames {
            violations += 1;
        }
    }
    check(
        violations == 0 && t.dataset.items.len() == 20,
        format!("{} utterances, {violations} violations", t.dataset.items.len()),
    )
}

fn overfit(t: &Trained) -> Outcome {
    let items = t.dataset.train_items().map_err(|e| e.to_string())?;
    let refs: Vec<_> = items.iter().collect();
    let before = t.initial.batch_loss(&refs).map_err(|e| e.to_string())?.mel_l1;
    let after = t.ckpt.model.batch_loss(&refs).map_err(|e| e.to_string())?.mel_l1;
    let (mut abs_err, mut tokens) = (0.0, 0usize);
    for item in &items {
        let out = t
            .ckpt
            .model
            .forward(
                &ModelInput {
                    units: &item.units,
                    speaker: item.speaker,
                    durations: None,
                },
                Mode::Infer,
            )
            .map_err(|e| e.to_string())?;
        for (p, g) in out.durations.iter().zip(&item.durations) {
            abs_err += (*p as f64 - *g as f64).abs();
            tokens += 1;
        }
    }
    let mae = abs_err / tokens as f64;
    let ratio = after / before;
    let detail = format!(
        "{} steps, mel L1 {before:.3} -> {after:.3} ({:.1}%), duration MAE {mae:.3} frames over {tokens} tokens",
        t.cfg.model.max_steps,
        100.0 * ratio
    );
    if !(ratio <= 0.2 && mae < 1.0) {
        return Err(detail);
    }
    within(Duration::from_secs(15 * 60), t.train_time, detail)
}

fn speaker_swap(t: &Trained, dir: &Path) -> Outcome {
    let synth = Synthesizer::new(t.ckpt.clone(), &t.cfg).map_err(|e| e.to_string())?;
    let source = PpSource::Utterance(t.dataset.items[0].utterance_id.clone());
    let hop = t.cfg.frame.hop_samples;
    let mut clips = Vec::new();
    let mut texts = Vec::new();
    for speaker in &t.ckpt.speakers[..3] {
        let (clip, sidecar) = synthesize(&synth, Some(&t.dataset), &source, speaker, 17, false).map_err(|e| e.to_string())?;
        let total: u32 = sidecar.durations.iter().sum();
        if clip.samples.len() != total as usize * hop {
            return Err(format!("{speaker}: {} samples for {total} frames", clip.samples.len()));
        }
        let wav = dir.join(format!("swap_{speaker}.wav"));
        let side = write_synthesis(&wav, &clip, &sidecar).map_err(|e| e.to_string())?;
        let row = read_text(&side).map_err(|e| e.to_string())?;
        let text = row.lines().nth(1).and_then(|l| l.split('\t').nth(2)).unwrap_or("").to_string();
        texts.push(text);
        clips.push(clip);
    }
    let mut min_diff = f64::INFINITY;
    for i in 0..3 {
        for j in i + 1..3 {
            let n = clips[i].samples.len().min(clips[j].samples.len());
            let d = (0..n)
                .map(|k| (clips[i].samples[k] - clips[j].samples[k]).abs() as f64)
                .fold(0.0, f64::max);
            min_diff = min_diff.max(0.0).min(d);
        }
    }
    let lens: Vec<usize> = clips.iter().map(|c| c.samples.len()).collect();
    check(
        texts.iter().all(|t| !t.is_empty() && *t == texts[0]) && min_diff > 1e-3,
        format!("sidecar text identical: {}, lengths {lens:?}, min pairwise max|diff| {min_diff:.4}", texts.iter().all(|t| *t == texts[0])),
    )
}

fn vocoder_fidelity() -> Outcome {
    let cfg = FrameConfig::default();
    let vocoder = Vocoder::new(HnmConfig::default(), N_MELS).map_err(|e| e.to_string())?;

    // Copy synthesis of a gliding, vibrato harmonic tone.
    let fs = 32000.0;
    let mut phase = 0.0f64;
    let x: Vec<f32> = (0..32000)
        .map(|i| {
            let t = i as f64 / fs;
            let f0 = 180.0 + 80.0 * t + 6.0 * (2.0 * PI * 5.0 * t).sin();
            phase += 2.0 * PI * f0 / fs;
            let s: f64 = (1..=30)
                .filter(|k| *k as f64 * f0 < 15000.0)
                .map(|k| (k as f64 * phase).sin() / (k * k) as f64)
                .sum();
            (0.3 * s) as f32
        })
        .collect();
    let (mel, pitch) = analyze(&AudioClip::new(x, 32000), &cfg).map_err(|e| e.to_string())?;
    let out = vocoder.synthesize(&mel, &pitch, 0, "copy").map_err(|e| e.to_string())?;
    let (_, again) = analyze(&out, &cfg).map_err(|e| e.to_string())?;
    let voiced: Vec<usize> = (0..pitch.len()).filter(|&i| pitch.voiced[i]).collect();
    let good = voiced
        .iter()
        .filter(|&&i| again.voiced[i] && (again.f0_hz[i] - pitch.f0_hz[i]).abs() <= 3.0)
        .count();
    let copy_share = good as f64 / voiced.len().max(1) as f64;

    // Constant 200 Hz.
    let fb = MelFilterbank::new(&cfg, N_MELS, 0.0, 16000.0).map_err(|e| e.to_string())?;
    let row: Vec<f64> = fb
        .center_hz
        .iter()
        .map(|&f| 3.0 - 2.0 * (f.max(200.0) / 200.0).log2() * 2f64.ln())
        .collect();
    let frames = 100;
    let tilted = MelSpectrogram::new(row.repeat(frames), frames, N_MELS, cfg).map_err(|e| e.to_string())?;
    let h = vocoder
        .harmonic_component(&tilted, &PitchContour::from_f0(vec![200.0; frames], cfg))
        .map_err(|e| e.to_string())?;
    let mut buf: Vec<Complex<f64>> = h[3200..3200 + 16384].iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    let peak = (1..8193).max_by(|&a, &b| buf[a].norm().total_cmp(&buf[b].norm())).unwrap();
    let bin_hz = 32000.0 / 16384.0;
    let peak_hz = peak as f64 * bin_hz;

    // All-unvoiced input.
    let unvoiced = PitchContour::unvoiced(frames, cfg);
    let noise = vocoder.noise_component(&tilted, &unvoiced, 5).map_err(|e| e.to_string())?;
    let full = vocoder.synthesize(&tilted, &unvoiced, 5, "n").map_err(|e| e.to_string())?;
    let identical = full.samples.len() == noise.len() && full.samples.iter().zip(&noise).all(|(a, b)| *a == *b as f32);

    check(
        copy_share >= 0.9 && (peak_hz - 200.0).abs() <= bin_hz && identical,
        format!(
            "copy-synthesis f0 within 3 Hz on {good}/{} voiced frames ({:.1}%), 200 Hz tone peak at {peak_hz:.2} Hz, \
             unvoiced output identical to noise branch: {identical}",
            voiced.len(),
            100.0 * copy_share
        ),
    )
}

fn speaker_space(dir: &Path) -> Outcome {
    let start = Instant::now();
    let mut cfg = PipelineConfig::default();
    cfg.workdir = dir.to_path_buf();
    for (k, v) in [
        ("seed", "3"),
        ("gen.n_speakers", "8"),
        ("gen.band_limit_hz", "4000"),
        ("units.bands", "96"),
        ("model.max_steps", "600"),
    ] {
        cfg.set(k, v).map_err(|e| e.to_string())?;
    }
    gen_corpus(&cfg).map_err(|e| e.to_string())?;
    prepare(&cfg).map_err(|e| e.to_string())?;
    let (ckpt, _) = train_model(&cfg, |_, _| Ok(())).map_err(|e| e.to_string())?;
    let groups = read_speaker_groups(&cfg.corpus_dir().join("speakers.tsv")).map_err(|e| e.to_string())?;
    let analysis = analyze_speakers(&cfg, &ckpt, Some(&groups)).map_err(|e| e.to_string())?;
    let s = analysis.silhouette.ok_or("no silhouette")?;
    check(
        s > 0.3 && !analysis.projection.degenerate,
        format!(
            "8 speakers in 2 conditions, silhouette {s:.3}, {:.0} s",
            start.elapsed().as_secs_f64()
        ),
    )
}

fn run(n: usize, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let outcome = match catch_unwind(AssertUnwindSafe(f)) {
        Ok(o) => o,
        Err(p) => Err(format!(
            "panicked: {}",
            p.downcast_ref::<String>().map(String::as_str).or(p.downcast_ref::<&str>().copied()).unwrap_or("?")
        )),
    };
    let (tag, detail, ok) = match outcome {
        Ok(d) => ("PASS", d, true),
        Err(d) => ("FAIL", d, false),
    };
    println!("acceptance {n} {name}: {tag} ({detail})");
    ok
}

fn main() -> ExitCode {
    // Respect `cargo test -- <filter>` loosely: any argument naming a
    // criterion number restricts the run to those numbers.
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let wanted = |n: usize| only.is_empty() || only.contains(&n);
    let tmp = tempfile::tempdir().expect("temp dir");
    let mut results = Vec::new();

    if wanted(1) {
        results.push(run(1, "codec round trip", codec_round_trip));
    }
    if wanted(2) {
        results.push(run(2, "FID closed forms", fid_closed_forms));
    }
    if wanted(3) {
        results.push(run(3, "FID small-sample bias", fid_small_sample_bias));
    }
    if wanted(4) {
        results.push(run(4, "gradient check", gradient_check_criterion));
    }
    if wanted(5) || wanted(6) || wanted(8) {
        match build_trained(&tmp.path().join("overfit")) {
            Ok(t) => {
                if wanted(5) {
                    results.push(run(5, "overfit convergence", || overfit(&t)));
                }
                if wanted(6) {
                    results.push(run(6, "content-preserving speaker swap", || speaker_swap(&t, tmp.path())));
                }
                if wanted(8) {
                    results.push(run(8, "frame alignment", || frame_alignment(&t)));
                }
            }
            Err(e) => {
                for (n, name) in [(5, "overfit convergence"), (6, "content-preserving speaker swap"), (8, "frame alignment")] {
                    if wanted(n) {
                        results.push(run(n, name, || Err(format!("setup failed: {e}"))));
                    }
                }
            }
        }
    }
    if wanted(7) {
        results.push(run(7, "vocoder spectral fidelity", vocoder_fidelity));
    }
    if wanted(9) {
        results.push(run(9, "speaker-space analysis", || speaker_space(&tmp.path().join("speakers"))));
    }
    let passed = results.iter().filter(|&&ok| ok).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
