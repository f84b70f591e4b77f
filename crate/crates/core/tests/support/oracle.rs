//! Reference computations that share no code path with the library.

/// Brute-force similarity gap on integer-valued layer vectors.
///
/// Range means are replaced by exact integer range sums (cosine is invariant
/// to the positive `1/len` factor), so dot products and squared norms are
/// exact in `i128` and each cosine carries only the rounding of one square
/// root and one division.
pub fn gap_integer(
    probe: &[Vec<i64>],
    gendered: &[Vec<Vec<i64>>],
    neutral: &[Vec<Vec<i64>>],
    m: usize,
    n: usize,
) -> f64 {
    let sum = |layers: &[Vec<i64>]| -> Vec<i128> {
        let dim = layers[0].len();
        let mut s = vec![0i128; dim];
        for layer in &layers[m..=n] {
            for (acc, x) in s.iter_mut().zip(layer) {
                *acc += *x as i128;
            }
        }
        s
    };
    let p = sum(probe);
    let cos = |w: &[i128]| -> f64 {
        let dot: i128 = p.iter().zip(w).map(|(a, b)| a * b).sum();
        let pp: i128 = p.iter().map(|a| a * a).sum();
        let ww: i128 = w.iter().map(|a| a * a).sum();
        dot as f64 / ((pp * ww) as f64).sqrt()
    };
    let mean = |set: &[Vec<Vec<i64>>]| -> f64 {
        set.iter().map(|w| cos(&sum(w))).sum::<f64>() / set.len() as f64
    };
    mean(gendered) - mean(neutral)
}

fn det(m: &[Vec<f64>]) -> f64 {
    match m.len() {
        0 => 1.0,
        1 => m[0][0],
        2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        n => (0..n)
            .map(|j| {
                let minor: Vec<Vec<f64>> = m[1..]
                    .iter()
                    .map(|row| row.iter().enumerate().filter(|(c, _)| *c != j).map(|(_, v)| *v).collect())
                    .collect();
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                sign * m[0][j] * det(&minor)
            })
            .sum(),
    }
}

/// Characteristic polynomial coefficients of `a` (lowest degree first,
/// monic), by Faddeev–LeVerrier.
fn char_poly(a: &[Vec<f64>]) -> Vec<f64> {
    let n = a.len();
    let mut coeffs = vec![0.0; n + 1];
    coeffs[n] = 1.0;
    let mut mk: Vec<Vec<f64>> = vec![vec![0.0; n]; n];
    for k in 1..=n {
        // M_k = A M_{k-1} + c_{n-k+1} I
        let mut next = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                next[i][j] = (0..n).map(|l| a[i][l] * mk[l][j]).sum::<f64>();
            }
            next[i][i] += coeffs[n - k + 1];
        }
        mk = next;
        let trace: f64 = (0..n)
            .map(|i| (0..n).map(|l| a[i][l] * mk[l][i]).sum::<f64>())
            .sum();
        coeffs[n - k] = -trace / k as f64;
    }
    coeffs
}

fn eval(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, ci| acc * x + ci)
}

/// Real roots of a real-rooted polynomial, located between the critical
/// points (roots of the derivative) and refined by bisection.
fn real_roots(c: &[f64]) -> Vec<f64> {
    let deg = c.len() - 1;
    if deg == 1 {
        return vec![-c[0] / c[1]];
    }
    let deriv: Vec<f64> = (1..=deg).map(|i| c[i] * i as f64).collect();
    let bound = 1.0 + c[..deg].iter().map(|x| (x / c[deg]).abs()).fold(0.0, f64::max);
    let mut marks = vec![-bound];
    marks.extend(real_roots(&deriv));
    marks.push(bound);
    let mut roots = Vec::new();
    for w in marks.windows(2) {
        let (mut lo, mut hi) = (w[0], w[1]);
        let (flo, fhi) = (eval(c, lo), eval(c, hi));
        if flo == 0.0 {
            roots.push(lo);
            continue;
        }
        if flo.signum() == fhi.signum() {
            continue;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if eval(c, mid).signum() == flo.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        roots.push(0.5 * (lo + hi));
    }
    roots
}

/// Unit eigenvector for eigenvalue `lambda`: the largest column of the
/// adjugate of `A - lambda I`.
fn eigenvector(a: &[Vec<f64>], lambda: f64) -> Vec<f64> {
    let n = a.len();
    let shifted: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| a[i][j] - if i == j { lambda } else { 0.0 }).collect())
        .collect();
    let mut best = vec![0.0; n];
    let mut best_norm = -1.0;
    for col in 0..n {
        // adj[i][col] = cofactor(col, i)
        let v: Vec<f64> = (0..n)
            .map(|i| {
                let minor: Vec<Vec<f64>> = shifted
                    .iter()
                    .enumerate()
                    .filter(|(r, _)| *r != col)
                    .map(|(_, row)| row.iter().enumerate().filter(|(c, _)| *c != i).map(|(_, x)| *x).collect())
                    .collect();
                let sign = if (i + col) % 2 == 0 { 1.0 } else { -1.0 };
                sign * det(&minor)
            })
            .collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > best_norm {
            best_norm = norm;
            best = v;
        }
    }
    best.iter().map(|x| x / best_norm).collect()
}

pub struct OraclePca {
    /// Eigenvalues of the covariance, descending.
    pub eigenvalues: Vec<f64>,
    pub axes: [Vec<f64>; 2],
    pub coords: Vec<(f64, f64)>,
    pub explained: [f64; 2],
}

/// PCA from the D×D covariance matrix. Returns `None` when the top two
/// eigenvalues are not clearly separated from each other, from the third,
/// or from zero, since the axes are then ill-conditioned.
pub fn pca_covariance(points: &[Vec<f64>]) -> Option<OraclePca> {
    let k = points.len();
    let d = points[0].len();
    let mean: Vec<f64> = (0..d)
        .map(|j| points.iter().map(|p| p[j]).sum::<f64>() / k as f64)
        .collect();
    let centered: Vec<Vec<f64>> = points
        .iter()
        .map(|p| p.iter().zip(&mean).map(|(x, m)| x - m).collect())
        .collect();
    let cov: Vec<Vec<f64>> = (0..d)
        .map(|i| {
            (0..d)
                .map(|j| centered.iter().map(|c| c[i] * c[j]).sum::<f64>() / (k as f64 - 1.0))
                .collect()
        })
        .collect();
    let mut eig = real_roots(&char_poly(&cov));
    eig.sort_by(|a, b| b.total_cmp(a));
    let total: f64 = (0..d).map(|i| cov[i][i]).sum();
    let l1 = eig[0];
    let l2 = *eig.get(1)?;
    let l3 = eig.get(2).copied().unwrap_or(0.0).max(0.0);
    let sep = 1e-3 * l1;
    if l1 - l2 < sep || l2 - l3 < sep || l2 < sep {
        return None;
    }
    let mut axes = [eigenvector(&cov, l1), eigenvector(&cov, l2)];
    for axis in axes.iter_mut() {
        let (mut idx, mut mag) = (0, -1.0);
        for (i, x) in axis.iter().enumerate() {
            if x.abs() > mag {
                mag = x.abs();
                idx = i;
            }
        }
        if axis[idx] < 0.0 {
            axis.iter_mut().for_each(|x| *x = -*x);
        }
    }
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let coords = centered
        .iter()
        .map(|c| (dot(c, &axes[0]), dot(c, &axes[1])))
        .collect();
    Some(OraclePca {
        eigenvalues: eig,
        explained: [l1 / total, l2 / total],
        axes,
        coords,
    })
}
