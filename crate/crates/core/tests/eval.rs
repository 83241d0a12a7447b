use nsv_core::eval::*;
use nsv_core::features::{FrameConfig, MelSpectrogram};
use nsv_core::NsvError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn stats(mean: Vec<f64>, cov: Vec<f64>) -> GaussianStats {
    GaussianStats { mean, cov, n: 10 }
}

fn identity(d: usize, s: f64) -> Vec<f64> {
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

fn gaussian(n: usize, d: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            (0..d)
                .map(|j| {
                    let z: f64 = StandardNormal.sample(rng);
                    0.1 * j as f64 / d as f64 + (1.0 + (j % 7) as f64 * 0.1) * z
                })
                .collect()
        })
        .collect()
}

fn true_stats(d: usize) -> GaussianStats {
    let mean = (0..d).map(|j| 0.1 * j as f64 / d as f64).collect();
    let mut cov = vec![0.0; d * d];
    for j in 0..d {
        cov[j * d + j] = (1.0 + (j % 7) as f64 * 0.1).powi(2);
    }
    GaussianStats { mean, cov, n: u64::MAX }
}

#[test]
fn stats_examples() {
    let s = gaussian_stats(&[vec![0.0, 0.0], vec![2.0, 0.0]]).unwrap();
    assert_eq!(s.mean, vec![1.0, 0.0]);
    assert_eq!(s.cov, vec![2.0, 0.0, 0.0, 0.0]);
    assert_eq!(s.n, 2);
    let same = gaussian_stats(&vec![vec![3.0, -1.0, 2.0]; 10]).unwrap();
    assert!(same.cov.iter().all(|&c| c == 0.0));
    assert!(matches!(
        gaussian_stats(&[vec![1.0]]),
        Err(NsvError::InsufficientData { required: 2, available: 1 })
    ));
    assert!(gaussian_stats(&[vec![1.0], vec![1.0, 2.0]]).is_err());

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let big = gaussian_stats(&gaussian(20000, 4, &mut rng)).unwrap();
    let truth = true_stats(4);
    for (a, b) in big.mean.iter().zip(&truth.mean) {
        assert!((a - b).abs() < 0.05);
    }
    for (a, b) in big.cov.iter().zip(&truth.cov) {
        assert!((a - b).abs() < 0.06, "{a} vs {b}");
    }
}

#[test]
fn fid_closed_forms() {
    let a = stats(vec![0.3, -0.2, 1.0], vec![2.0, 0.5, 0.1, 0.5, 1.0, 0.2, 0.1, 0.2, 0.7]);
    assert!(fid(&a, &a).unwrap().abs() < 1e-9);
    let shifted = stats(vec![1.0, 0.0, 0.0], identity(3, 1.0));
    assert!((fid(&stats(vec![0.0; 3], identity(3, 1.0)), &shifted).unwrap() - 1.0).abs() < 1e-9);
    let b4 = stats(vec![0.0; 2], identity(2, 4.0));
    let b1 = stats(vec![0.0; 2], identity(2, 1.0));
    assert!((fid(&b4, &b1).unwrap() - 2.0).abs() < 1e-9);
    assert!(fid(&b4, &a).is_err());
    assert!(fid(&stats(vec![f64::NAN, 0.0], identity(2, 1.0)), &b1).is_err());
}

#[test]
fn fid_symmetry_and_translation() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..100 {
        let d = rng.random_range(2..9);
        let ma: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mb: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let a = stats(ma.clone(), random_psd(d, &mut rng));
        let b = stats(mb.clone(), random_psd(d, &mut rng));
        let ab = fid(&a, &b).unwrap();
        assert!(ab >= 0.0);
        assert!((ab - fid(&b, &a).unwrap()).abs() < 1e-8);
        let shift: Vec<f64> = (0..d).map(|_| rng.random_range(-5.0..5.0)).collect();
        let move_by = |s: &GaussianStats| GaussianStats {
            mean: s.mean.iter().zip(&shift).map(|(x, y)| x + y).collect(),
            ..s.clone()
        };
        assert!((ab - fid(&move_by(&a), &move_by(&b)).unwrap()).abs() < 1e-8);
        assert!(fid(&a, &a).unwrap() < 1e-9);
    }
}

#[test]
fn small_samples_inflate_fid() {
    let d = 16;
    let reference = FidReference::new(true_stats(d)).unwrap();
    let source = |_: usize, n: usize, rng: &mut ChaCha8Rng| Ok(gaussian(n, d, rng));
    let means: Vec<f64> = [50, 200, 1000]
        .iter()
        .map(|&n| repeated_fid(source, &reference, n, 30, 11).unwrap().mean)
        .collect();
    assert!(means[0] > means[1] && means[1] > means[2], "{means:?}");
}

#[test]
fn repeat_conventions() {
    let d = 3;
    let reference = FidReference::new(true_stats(d)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let pool = gaussian(60, d, &mut rng);
    let one = repeated_fid(pool_source(&pool), &reference, 20, 1, 0).unwrap();
    assert_eq!((one.std, one.std_defined, one.values.len()), (0.0, false, 1));
    let ten = repeated_fid(pool_source(&pool), &reference, 20, 10, 0).unwrap();
    assert_eq!(ten.values.len(), 10);
    assert!(ten.std_defined && ten.std > 0.0);
    let mean = ten.values.iter().sum::<f64>() / 10.0;
    let var = ten.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 9.0;
    assert!((ten.std - var.sqrt()).abs() < 1e-12);
    assert_eq!(ten, repeated_fid(pool_source(&pool), &reference, 20, 10, 0).unwrap());
    assert!(matches!(
        repeated_fid(pool_source(&pool), &reference, 61, 2, 0),
        Err(NsvError::InsufficientData { required: 61, available: 60 })
    ));
    // Features drawn from the reference's own sample still score above zero.
    let own = FidReference::new(gaussian_stats(&pool).unwrap()).unwrap();
    let r = repeated_fid(pool_source(&pool), &own, 30, 5, 1).unwrap();
    assert!(r.mean > 0.0);
}

#[test]
fn stats_file_round_trip() {
    let s = gaussian_stats(&[vec![0.0, 1.5], vec![2.0, -1.0], vec![1.0, 0.25]]).unwrap();
    let bytes = encode_stats(&s).unwrap();
    assert_eq!(&bytes[..4], b"FIDS");
    assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 2);
    assert_eq!(bytes.len(), 8 + 8 * 6 + 8);
    assert_eq!(u64::from_le_bytes(bytes[bytes.len() - 8..].try_into().unwrap()), 3);
    assert_eq!(decode_stats(&bytes).unwrap(), s);
    assert!(decode_stats(&bytes[..bytes.len() - 1]).is_err());
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("ref.fids");
    write_stats(&p, &s).unwrap();
    assert_eq!(read_stats(&p).unwrap(), s);
}

#[test]
fn utterance_features() {
    let mut values = vec![0.0; 3 * 256];
    for (t, row) in values.chunks_exact_mut(256).enumerate() {
        row.iter_mut().for_each(|v| *v = t as f64);
    }
    let mel = MelSpectrogram::new(values, 3, 256, FrameConfig::default()).unwrap();
    let f = utterance_feature(&mel).unwrap();
    assert_eq!(f.len(), FEATURE_DIM);
    assert!(f[..256].iter().all(|&m| (m - 1.0).abs() < 1e-12));
    assert!(f[256..].iter().all(|&s| (s - (2.0f64 / 3.0).sqrt()).abs() < 1e-12));
    let empty = MelSpectrogram::new(vec![], 0, 256, FrameConfig::default()).unwrap();
    assert!(utterance_feature(&empty).is_err());
}

fn ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("s{i}")).collect()
}

#[test]
fn projection_of_planar_data_is_an_isometry() {
    let pts = vec![vec![1.0, 0.0], vec![-1.0, 0.5], vec![0.5, -2.0], vec![-0.5, 1.5]];
    let mean = [0.0, 0.0];
    assert_eq!(pts.iter().map(|p| p[0]).sum::<f64>(), mean[0]);
    let p = project_speakers(&ids(4), &pts).unwrap();
    assert!(!p.degenerate);
    let dist = |a: (f64, f64), b: (f64, f64)| ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt();
    for i in 0..4 {
        for j in 0..4 {
            let orig = ((pts[i][0] - pts[j][0]).powi(2) + (pts[i][1] - pts[j][1]).powi(2)).sqrt();
            let proj = dist((p.points[i].1, p.points[i].2), (p.points[j].1, p.points[j].2));
            assert!((orig - proj).abs() < 1e-9);
        }
    }
    // Negating the table cannot flip the output: signs are pinned by the loadings.
    let neg: Vec<Vec<f64>> = pts.iter().map(|r| r.iter().map(|v| -v).collect()).collect();
    let q = project_speakers(&ids(4), &neg).unwrap();
    for (a, b) in p.points.iter().zip(&q.points) {
        assert!((a.1 + b.1).abs() < 1e-9 && (a.2 + b.2).abs() < 1e-9);
    }
}

#[test]
fn separated_groups_score_high_silhouette() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut table = Vec::new();
    let mut labels = Vec::new();
    for g in 0..2 {
        for _ in 0..6 {
            table.push(
                (0..32)
                    .map(|j| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        (if j == 0 { 4.0 * g as f64 } else { 0.0 }) + 0.3 * z
                    })
                    .collect::<Vec<f64>>(),
            );
            labels.push(g);
        }
    }
    let p = project_speakers(&ids(12), &table).unwrap();
    let pts: Vec<Vec<f64>> = p.points.iter().map(|(_, x, y)| vec![*x, *y]).collect();
    assert!(silhouette(&pts, &labels).unwrap() > 0.5);
    let tsv = format_projection_tsv(&p);
    assert!(tsv.starts_with("speaker_id\tx\ty\n"));
    assert_eq!(tsv.lines().count(), 13);
}

#[test]
fn degenerate_and_invalid_tables() {
    let p = project_speakers(&ids(3), &vec![vec![1.0, 2.0]; 3]).unwrap();
    assert!(p.degenerate);
    assert!(p.points.iter().all(|(_, x, y)| *x == 0.0 && *y == 0.0));
    assert!(project_speakers(&ids(2), &vec![vec![1.0]; 2]).is_err());
    assert!(project_speakers(&ids(3), &vec![vec![1.0]; 4]).is_err());
    assert!(silhouette(&[vec![0.0], vec![1.0]], &[0, 0]).is_err());
    let s = silhouette(&[vec![0.0], vec![0.1], vec![5.0], vec![5.2]], &[0, 0, 1, 1]).unwrap();
    assert!(s > 0.9);
}
