//! Sample-quality metrics.

use crate::{Error, Result};

fn check_points(name: &str, pts: &[Vec<f64>]) -> Result<usize> {
    let d = pts
        .first()
        .map(|p| p.len())
        .ok_or_else(|| Error::InvalidArgument(format!("{name} is empty")))?;
    for p in pts {
        if p.len() != d {
            return Err(Error::Dimension {
                expected: d,
                got: p.len(),
            });
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "{name} contains a non-finite coordinate"
            )));
        }
    }
    Ok(d)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}

/// Minimum-cost perfect assignment on a square cost matrix (shortest
/// augmenting paths with potentials, `O(n³)`). Returns `assign[row] = col`.
pub fn linear_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    // 1-based potentials and matching; index 0 is the virtual root
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut col_owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        col_owner[0] = row;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = col_owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[col_owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if col_owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            col_owner[j0] = col_owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0; n];
    for j in 1..=n {
        if col_owner[j] > 0 {
            assign[col_owner[j] - 1] = j - 1;
        }
    }
    assign
}

/// Exact squared 2-Wasserstein distance between two equal-size empirical
/// measures: `(1/n) min_σ Σ ‖aᵢ − b_σ(i)‖²`.
pub fn w2_squared(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "W2 needs equal sample sizes, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let da = check_points("first sample set", a)?;
    let db = check_points("second sample set", b)?;
    if da != db {
        return Err(Error::Dimension {
            expected: da,
            got: db,
        });
    }
    let cost: Vec<Vec<f64>> = a
        .iter()
        .map(|p| b.iter().map(|q| sq_dist(p, q)).collect())
        .collect();
    let assign = linear_assignment(&cost);
    let total: f64 = assign.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
    Ok(total / a.len() as f64)
}

fn mean_pair_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let s: f64 = a
        .iter()
        .map(|p| b.iter().map(|q| dist(p, q)).sum::<f64>())
        .sum();
    s / (a.len() * b.len()) as f64
}

/// Energy distance `2E‖A−B‖ − E‖A−A′‖ − E‖B−B′‖` as a V-statistic
/// (within-sample means include the zero self-pairs).
pub fn energy_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    let da = check_points("first sample set", a)?;
    let db = check_points("second sample set", b)?;
    if da != db {
        return Err(Error::Dimension {
            expected: da,
            got: db,
        });
    }
    let e = 2.0 * mean_pair_distance(a, b) - mean_pair_distance(a, a) - mean_pair_distance(b, b);
    // the V-statistic is a squared MMD and therefore non-negative
    Ok(e.max(0.0))
}

/// Minimum series length accepted by [`ess`].
pub const MIN_ESS_LENGTH: usize = 10;

/// Univariate effective sample size `n / (1 + 2Σρ̂_t)` with Geyer's initial
/// positive sequence truncation, clamped to `[1, n]`. A constant series has
/// ESS 1.
pub fn ess(series: &[f64]) -> Result<f64> {
    let n = series.len();
    if n < MIN_ESS_LENGTH {
        return Err(Error::InvalidArgument(format!(
            "ESS needs at least {MIN_ESS_LENGTH} values, got {n}"
        )));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("ESS series".into()));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let c: Vec<f64> = series.iter().map(|v| v - mean).collect();
    let acov = |lag: usize| {
        c[..n - lag]
            .iter()
            .zip(&c[lag..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / n as f64
    };
    let g0 = acov(0);
    if g0 <= 0.0 {
        return Ok(1.0);
    }
    // τ = −1 + 2 Σ_k (ρ_{2k} + ρ_{2k+1}) over the initial positive pairs
    let mut tau = -1.0;
    let mut k = 0;
    while 2 * k + 1 < n {
        let pair = (acov(2 * k) + acov(2 * k + 1)) / g0;
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        k += 1;
    }
    let nf = n as f64;
    Ok((nf / tau.max(1.0 / nf)).clamp(1.0, nf))
}

/// Minimum univariate ESS over coordinates of a chain given as rows of
/// states.
pub fn ess_min(chain: &[Vec<f64>]) -> Result<f64> {
    let d = check_points("chain", chain)?;
    let mut best = f64::INFINITY;
    for j in 0..d {
        let col: Vec<f64> = chain.iter().map(|x| x[j]).collect();
        best = best.min(ess(&col)?);
    }
    Ok(best)
}

/// CPU seconds per effective sample.
pub fn cpu_per_ess(runtime_seconds: f64, min_ess: f64) -> Result<f64> {
    if runtime_seconds.is_nan() || runtime_seconds <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "runtime must be positive, got {runtime_seconds}"
        )));
    }
    if min_ess.is_nan() || min_ess < 1.0 {
        return Err(Error::InvalidArgument(format!(
            "ESS must be at least 1, got {min_ess}"
        )));
    }
    Ok(runtime_seconds / min_ess)
}

/// Mean of a set of vectors.
pub fn mean_point(xs: &[Vec<f64>]) -> Option<Vec<f64>> {
    let d = xs.first()?.len();
    let mut m = vec![0.0; d];
    for x in xs {
        for (mi, xi) in m.iter_mut().zip(x) {
            *mi += xi;
        }
    }
    m.iter_mut().for_each(|v| *v /= xs.len() as f64);
    Some(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    fn pts(v: &[&[f64]]) -> Vec<Vec<f64>> {
        v.iter().map(|p| p.to_vec()).collect()
    }

    #[test]
    fn w2_examples() {
        let a = pts(&[&[0.0, 0.0], &[1.0, 0.0]]);
        assert_eq!(w2_squared(&a, &a).unwrap(), 0.0);
        assert_eq!(
            w2_squared(&pts(&[&[0.0, 0.0]]), &pts(&[&[1.0, 0.0]])).unwrap(),
            1.0
        );
        let b = pts(&[&[1.0, 0.0], &[0.0, 0.0]]);
        assert_eq!(w2_squared(&a, &b).unwrap(), 0.0);
        assert!(w2_squared(&a, &pts(&[&[0.0, 0.0]])).is_err());
    }

    #[test]
    fn energy_examples() {
        let a = pts(&[&[0.0], &[2.0], &[5.0]]);
        assert_eq!(energy_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(
            energy_distance(&pts(&[&[0.0]]), &pts(&[&[1.0]])).unwrap(),
            2.0
        );
    }

    #[test]
    fn ess_examples() {
        let mut rng = RngStream::new(21, 0);
        let n = 10_000;
        let iid: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        let e = ess(&iid).unwrap();
        assert!(e > 0.8 * n as f64 && e <= 1.2 * n as f64, "{e}");

        assert_eq!(ess(&[3.0; 50]).unwrap(), 1.0);

        let mut x = 0.0;
        let ar: Vec<f64> = (0..n)
            .map(|_| {
                x = 0.9 * x + rng.normal();
                x
            })
            .collect();
        let ratio = ess(&ar).unwrap() / n as f64;
        let target = 0.1 / 1.9;
        assert!((ratio - target).abs() < 0.3 * target, "{ratio}");
        assert!(ess(&[1.0; 5]).is_err());
    }

    #[test]
    fn cpu_per_ess_examples() {
        assert_eq!(cpu_per_ess(10.0, 100.0).unwrap(), 0.1);
        assert_eq!(cpu_per_ess(3.0, 1.0).unwrap(), 3.0);
        assert!(cpu_per_ess(0.0, 1.0).is_err());
    }
}
