//! Two-component PCA of word range-vectors.
//!
//! With k words in D dimensions (k small, D up to ~1024) the eigenproblem is
//! solved on the k×k Gram matrix of the centered data instead of the D×D
//! covariance. Both have the same nonzero spectrum; a Gram eigenvector `u`
//! with eigenvalue `λ` maps to the principal axis `Xᵀu / sqrt(λ)`.
//!
//! Output is deterministic: each axis is signed so that its largest-magnitude
//! loading is positive, and near-equal eigenvalues are ordered by their
//! loadings.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gap::{range_vector, GapError, LayerRange};
use crate::store::EmbeddingDump;

const JACOBI_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;
const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum PcaError {
    #[error("need at least 3 distinct words, got {0}")]
    TooFewWords(usize),
    #[error("word `{0}` listed twice")]
    DuplicateWord(String),
    #[error("need at least 2 dimensions to project, got {0}")]
    TooFewDimensions(usize),
    #[error("all points are identical; principal axes are undefined")]
    Degenerate,
    #[error("inconsistent point dimensions")]
    RaggedInput,
    #[error(transparent)]
    Gap(#[from] GapError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectedPoint {
    pub word: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub points: Vec<ProjectedPoint>,
    /// Fraction of total variance captured by PC1 and PC2.
    pub explained_variance: [f64; 2],
    /// Unit principal axes in the original space.
    pub axes: [Vec<f64>; 2],
}

impl Projection {
    /// CSV with header `word,x,y`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("word,x,y\n");
        for p in &self.points {
            out.push_str(&format!("{},{},{}\n", csv_field(&p.word), p.x, p.y));
        }
        out
    }

    /// JSON sidecar with the explained-variance fractions.
    pub fn sidecar_json(&self) -> String {
        serde_json::json!({
            "explained_variance": self.explained_variance,
        })
        .to_string()
    }

    /// Reads the CSV form back (axes are not stored there).
    pub fn points_from_csv(text: &str) -> Result<Vec<ProjectedPoint>, String> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == "word,x,y" => {}
            other => return Err(format!("expected header `word,x,y`, found {other:?}")),
        }
        let mut points = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row = i + 2;
            let (word, rest) = split_word_field(line).ok_or(format!("row {row}: malformed"))?;
            let (x, y) = rest
                .split_once(',')
                .ok_or(format!("row {row}: expected 3 columns"))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or(format!("row {row}: bad coordinate `{s}`"))
            };
            points.push(ProjectedPoint {
                word,
                x: parse(x)?,
                y: parse(y)?,
            });
        }
        Ok(points)
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn split_word_field(line: &str) -> Option<(String, &str)> {
    if let Some(rest) = line.strip_prefix('"') {
        let mut word = String::new();
        let mut chars = rest.char_indices();
        while let Some((i, c)) = chars.next() {
            if c == '"' {
                if rest[i + 1..].starts_with('"') {
                    word.push('"');
                    chars.next();
                } else {
                    return rest[i + 1..].strip_prefix(',').map(|r| (word, r));
                }
            } else {
                word.push(c);
            }
        }
        None
    } else {
        line.split_once(',').map(|(w, r)| (w.to_string(), r))
    }
}

/// Eigen-decomposition of a small symmetric matrix by cyclic Jacobi sweeps.
///
/// Returns eigenvalues and the matching eigenvectors (as rows), unsorted.
pub fn symmetric_eigen(matrix: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = matrix.len();
    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();

    let total: f64 = a.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
    let threshold = JACOBI_TOL * total.max(f64::MIN_POSITIVE);

    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum::<f64>()
            .sqrt();
        if off <= threshold {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vp = row[p];
                    let vq = row[q];
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }

    let values = (0..n).map(|i| a[i][i]).collect();
    // columns of v are eigenvectors
    let vectors = (0..n).map(|j| (0..n).map(|i| v[i][j]).collect()).collect();
    (values, vectors)
}

/// Flips `axis` so its largest-magnitude coordinate (first on ties) is positive.
fn fix_sign(axis: &mut [f64]) {
    let mut best = 0;
    for (i, x) in axis.iter().enumerate() {
        if x.abs() > axis[best].abs() {
            best = i;
        }
    }
    if axis.get(best).is_some_and(|x| *x < 0.0) {
        axis.iter_mut().for_each(|x| *x = -*x);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = dot(v, v).sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

/// Unit vector orthogonal to `axis`, taken from the standard basis vector
/// with the largest residual.
fn orthogonal_complement(axis: &[f64]) -> Vec<f64> {
    let dim = axis.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for j in 0..dim {
        let mut e: Vec<f64> = (0..dim).map(|i| if i == j { 1.0 } else { 0.0 }).collect();
        let proj = axis[j];
        e.iter_mut().zip(axis).for_each(|(x, a)| *x -= proj * a);
        let norm = dot(&e, &e);
        if best.as_ref().is_none_or(|(b, _)| norm > *b) {
            best = Some((norm, e));
        }
    }
    let mut e = best.expect("dim >= 2").1;
    normalize(&mut e);
    e
}

/// Projects labelled points onto their top two principal axes.
pub fn project_points(words: &[String], points: &[Vec<f64>]) -> Result<Projection, PcaError> {
    let k = points.len();
    if k < 3 || words.len() != k {
        return Err(PcaError::TooFewWords(k.min(words.len())));
    }
    for (i, w) in words.iter().enumerate() {
        if words[..i].contains(w) {
            return Err(PcaError::DuplicateWord(w.clone()));
        }
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(PcaError::RaggedInput);
    }
    if dim < 2 {
        return Err(PcaError::TooFewDimensions(dim));
    }

    let mut mean = vec![0.0; dim];
    for p in points {
        mean.iter_mut().zip(p).for_each(|(m, x)| *m += x);
    }
    mean.iter_mut().for_each(|m| *m /= k as f64);
    let centered: Vec<Vec<f64>> = points
        .iter()
        .map(|p| p.iter().zip(&mean).map(|(x, m)| x - m).collect())
        .collect();

    let gram: Vec<Vec<f64>> = (0..k)
        .map(|i| (0..k).map(|j| dot(&centered[i], &centered[j])).collect())
        .collect();
    let trace: f64 = (0..k).map(|i| gram[i][i]).sum();
    let scale: f64 = points.iter().map(|p| dot(p, p)).sum();
    if trace <= 1e-24 * scale || trace == 0.0 {
        return Err(PcaError::Degenerate);
    }

    let (values, vectors) = symmetric_eigen(&gram);
    let mut pairs: Vec<(f64, Vec<f64>)> = values
        .into_iter()
        .zip(vectors)
        .map(|(lambda, u)| {
            // map Gram eigenvector to a loading vector in the original space
            let mut axis = vec![0.0; dim];
            for (ui, row) in u.iter().zip(&centered) {
                axis.iter_mut().zip(row).for_each(|(a, x)| *a += ui * x);
            }
            normalize(&mut axis);
            fix_sign(&mut axis);
            (lambda.max(0.0), axis)
        })
        .collect();
    let lambda_max = pairs.iter().map(|p| p.0).fold(0.0, f64::max);
    let tie = TIE_TOL * lambda_max.max(1.0);
    pairs.sort_by(|a, b| {
        if (a.0 - b.0).abs() <= tie {
            // larger first-differing loading first
            b.1.iter()
                .zip(&a.1)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        } else {
            b.0.total_cmp(&a.0)
        }
    });

    let (lambda1, axis1) = pairs[0].clone();
    let lambda2 = pairs.get(1).map_or(0.0, |p| p.0);
    let mut axis2 = if lambda2 > 1e-12 * lambda1 {
        let mut a = pairs[1].1.clone();
        let proj = dot(&a, &axis1);
        a.iter_mut().zip(&axis1).for_each(|(x, b)| *x -= proj * b);
        if normalize(&mut a) > 0.0 {
            a
        } else {
            orthogonal_complement(&axis1)
        }
    } else {
        log::debug!("second principal axis is degenerate (lambda2 = {lambda2:e}); using an orthogonal complement");
        orthogonal_complement(&axis1)
    };
    fix_sign(&mut axis2);

    let points = words
        .iter()
        .zip(&centered)
        .map(|(w, c)| ProjectedPoint {
            word: w.clone(),
            x: dot(c, &axis1),
            y: dot(c, &axis2),
        })
        .collect();

    Ok(Projection {
        points,
        explained_variance: [lambda1 / trace, lambda2 / trace],
        axes: [axis1, axis2],
    })
}

/// PCA of the words' range-vectors.
pub fn project_2d(
    dump: &EmbeddingDump,
    words: &[String],
    range: LayerRange,
) -> Result<Projection, PcaError> {
    range.check(dump.num_layers)?;
    let vectors = words
        .iter()
        .map(|w| {
            let entry = dump.entry(w).map_err(GapError::from)?;
            range_vector(entry, range)
        })
        .collect::<Result<Vec<_>, GapError>>()?;
    project_points(words, &vectors)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("w{i}")).collect()
    }

    #[test]
    fn collinear_points() {
        let pts = vec![vec![-2.0, 0.0], vec![0.0, 0.0], vec![2.0, 0.0]];
        let proj = project_points(&names(3), &pts).unwrap();
        let xs: Vec<f64> = proj.points.iter().map(|p| p.x).collect();
        let ys: Vec<f64> = proj.points.iter().map(|p| p.y).collect();
        assert_eq!(xs, [-2.0, 0.0, 2.0]);
        assert!(ys.iter().all(|y| y.abs() < 1e-15));
        assert_eq!(proj.axes[0], [1.0, 0.0]);
        assert_eq!(proj.axes[1], [0.0, 1.0]);
        assert!((proj.explained_variance[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn translation_invariance() {
        let pts = vec![
            vec![1.0, 2.0, 0.5],
            vec![-0.3, 0.7, 1.5],
            vec![0.2, -1.0, 0.1],
            vec![2.0, 0.0, -0.4],
        ];
        let moved: Vec<Vec<f64>> = pts
            .iter()
            .map(|p| p.iter().zip([10.0, -3.0, 7.5]).map(|(x, t)| x + t).collect())
            .collect();
        let a = project_points(&names(4), &pts).unwrap();
        let b = project_points(&names(4), &moved).unwrap();
        for (p, q) in a.points.iter().zip(&b.points) {
            assert!((p.x - q.x).abs() < 1e-10 && (p.y - q.y).abs() < 1e-10);
        }
    }

    #[test]
    fn errors() {
        assert_eq!(
            project_points(&names(2), &[vec![0.0, 1.0], vec![1.0, 0.0]]),
            Err(PcaError::TooFewWords(2))
        );
        let same = vec![vec![1.0, 2.0]; 3];
        assert_eq!(project_points(&names(3), &same), Err(PcaError::Degenerate));
        let dup = vec!["a".to_string(), "b".into(), "a".into()];
        assert_eq!(
            project_points(&dup, &[vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]]),
            Err(PcaError::DuplicateWord("a".into()))
        );
        assert_eq!(
            project_points(&names(3), &[vec![0.0], vec![1.0], vec![2.0]]),
            Err(PcaError::TooFewDimensions(1))
        );
    }

    #[test]
    fn jacobi_diagonalizes() {
        let m = vec![
            vec![4.0, 1.0, 0.5],
            vec![1.0, 3.0, 0.2],
            vec![0.5, 0.2, 1.0],
        ];
        let (vals, vecs) = symmetric_eigen(&m);
        for (lambda, v) in vals.iter().zip(&vecs) {
            for i in 0..3 {
                let mv: f64 = (0..3).map(|j| m[i][j] * v[j]).sum();
                assert!((mv - lambda * v[i]).abs() < 1e-10);
            }
        }
        let trace: f64 = vals.iter().sum();
        assert!((trace - 8.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_square_ties_are_deterministic() {
        let pts = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, 0.0], vec![0.0, -1.0]];
        let a = project_points(&names(4), &pts).unwrap();
        let b = project_points(&names(4), &pts).unwrap();
        assert_eq!(a, b);
        assert!((a.explained_variance[0] - 0.5).abs() < 1e-12);
        assert!(dot(&a.axes[0], &a.axes[1]).abs() < 1e-10);
    }

    #[test]
    fn csv_round_trip_with_quoting() {
        let proj = Projection {
            points: vec![
                ProjectedPoint { word: "a,b".into(), x: 1.5, y: -2.0 },
                ProjectedPoint { word: "q\"".into(), x: 0.0, y: 3.25 },
            ],
            explained_variance: [0.7, 0.2],
            axes: [vec![1.0, 0.0], vec![0.0, 1.0]],
        };
        let back = Projection::points_from_csv(&proj.to_csv()).unwrap();
        assert_eq!(back, proj.points);
        assert!(proj.sidecar_json().contains("explained_variance"));
    }
}
