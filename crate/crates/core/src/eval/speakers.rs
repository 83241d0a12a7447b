use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{NsvError, Result};
use crate::io::write_bytes;

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub points: Vec<(String, f64, f64)>,
    /// Set when the table has no spread (every row equal).
    pub degenerate: bool,
    /// Variance captured by each of the two components.
    pub explained: [f64; 2],
}

/// Mean-centred PCA of the speaker table onto two components. Each
/// component's sign is fixed by making its largest-magnitude loading positive.
pub fn project_speakers(ids: &[String], table: &[Vec<f64>]) -> Result<Projection> {
    if ids.len() != table.len() {
        return Err(NsvError::invalid(format!("{} ids for {} rows", ids.len(), table.len())));
    }
    if table.len() < 3 {
        return Err(NsvError::InsufficientData {
            required: 3,
            available: table.len(),
        });
    }
    let d = table[0].len();
    if d == 0 || table.iter().any(|r| r.len() != d) {
        return Err(NsvError::invalid("speaker rows must share a nonzero dimension"));
    }
    if table.iter().flatten().any(|v| !v.is_finite()) {
        return Err(NsvError::invalid("speaker table has non-finite entries"));
    }
    let n = table.len();
    let mut x = DMatrix::zeros(n, d);
    for j in 0..d {
        let mean = table.iter().map(|r| r[j]).sum::<f64>() / n as f64;
        for i in 0..n {
            x[(i, j)] = table[i][j] - mean;
        }
    }
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Ok(Projection {
            points: ids.iter().map(|s| (s.clone(), 0.0, 0.0)).collect(),
            degenerate: true,
            explained: [0.0, 0.0],
        });
    }
    let cov = x.transpose() * &x / (n - 1) as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut coords = vec![[0.0; 2]; n];
    let mut explained = [0.0; 2];
    for (c, &k) in order.iter().take(2).enumerate() {
        let mut v = eig.eigenvectors.column(k).into_owned();
        let lead = v.iter().copied().max_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap_or(0.0);
        if lead < 0.0 {
            v = -v;
        }
        explained[c] = eig.eigenvalues[k].max(0.0);
        let proj = &x * v;
        for i in 0..n {
            coords[i][c] = proj[i];
        }
    }
    Ok(Projection {
        points: ids.iter().zip(coords).map(|(s, [a, b])| (s.clone(), a, b)).collect(),
        degenerate: false,
        explained,
    })
}

/// Mean silhouette coefficient of labelled points under Euclidean distance.
/// Points alone in their cluster score 0.
pub fn silhouette(points: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
    if points.len() != labels.len() {
        return Err(NsvError::invalid("one label per point required"));
    }
    let mut distinct: Vec<usize> = labels.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(NsvError::invalid("silhouette needs at least two clusters"));
    }
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let mut total = 0.0;
    for (i, p) in points.iter().enumerate() {
        let mean_to = |c: usize| {
            let (sum, cnt) = points
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i && labels[j] == c)
                .fold((0.0, 0usize), |(s, k), (_, q)| (s + dist(p, q), k + 1));
            (sum, cnt)
        };
        let (own_sum, own_cnt) = mean_to(labels[i]);
        if own_cnt == 0 {
            continue;
        }
        let a = own_sum / own_cnt as f64;
        let b = distinct
            .iter()
            .filter(|&&c| c != labels[i])
            .map(|&c| {
                let (s, k) = mean_to(c);
                s / k as f64
            })
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        if m > 0.0 {
            total += (b - a) / m;
        }
    }
    Ok(total / points.len() as f64)
}

pub fn format_projection_tsv(p: &Projection) -> String {
    let mut s = String::from("speaker_id\tx\ty\n");
    for (id, x, y) in &p.points {
        let _ = writeln!(s, "{id}\t{x}\t{y}");
    }
    s
}

pub fn write_projection(path: &Path, p: &Projection) -> Result<()> {
    write_bytes(path, format_projection_tsv(p).as_bytes())
}
