//! Small moment and rank statistics shared by evaluation code and tests.

use crate::flowcore::StateVec;

pub fn mean_state(states: &[StateVec]) -> Vec<f64> {
    let d = states[0].dim();
    let mut m = vec![0.0; d];
    for s in states {
        for i in 0..d {
            m[i] += s[i];
        }
    }
    for v in &mut m {
        *v /= states.len() as f64;
    }
    m
}

/// Sample covariance (n - 1 normalization).
pub fn covariance(states: &[StateVec]) -> Vec<Vec<f64>> {
    let d = states[0].dim();
    let n = states.len();
    let m = mean_state(states);
    let mut cov = vec![vec![0.0; d]; d];
    for s in states {
        for i in 0..d {
            for j in 0..d {
                cov[i][j] += (s[i] - m[i]) * (s[j] - m[j]);
            }
        }
    }
    for row in &mut cov {
        for v in row {
            *v /= (n - 1) as f64;
        }
    }
    cov
}

pub fn frobenius(m: &[Vec<f64>]) -> f64 {
    m.iter()
        .flat_map(|row| row.iter())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt()
}

/// `|a - b|_F / max(|a|_F, |b|_F)`.
pub fn frobenius_diff_rel(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let diff: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x - y).collect())
        .collect();
    frobenius(&diff) / frobenius(a).max(frobenius(b))
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).expect("finite values"));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0; // average rank for ties
        for k in i..=j {
            out[idx[k]] = avg;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation (average ranks for ties).
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let rx = ranks(xs);
    let ry = ranks(ys);
    let n = xs.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut dx = 0.0;
    let mut dy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        num += (a - mx) * (b - my);
        dx += (a - mx) * (a - mx);
        dy += (b - my) * (b - my);
    }
    num / (dx.sqrt() * dy.sqrt())
}
