//! Exact inference over raw potentials.
//!
//! `emissions` is row-major `n × L` (position, label) and `transitions` is
//! row-major `L × L` (previous label, next label). All recursions keep
//! log-domain messages; the transition matrix is exponentiated once after
//! subtracting its maximum so each step costs `L` exponentials instead of `L²`.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

/// Log of the sum of exponentials, `-inf` for an empty slice.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + values.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

struct ExpTransitions {
    shift: f64,
    table: Vec<f64>,
}

impl ExpTransitions {
    fn new(transitions: &[f64]) -> Self {
        let shift = transitions.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let shift = if shift.is_finite() { shift } else { 0.0 };
        ExpTransitions {
            shift,
            table: transitions.iter().map(|t| (t - shift).exp()).collect(),
        }
    }
}

fn shifted_exp(values: &[f64], out: &mut [f64]) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let m = if m.is_finite() { m } else { 0.0 };
    for (o, v) in out.iter_mut().zip(values) {
        *o = (v - m).exp();
    }
    m
}

/// Forward and backward log-messages plus the log-partition.
#[derive(Debug, Clone, PartialEq)]
pub struct Messages {
    pub n: usize,
    pub n_labels: usize,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub log_partition: f64,
}

pub fn messages(emissions: &[f64], transitions: &[f64], n_labels: usize) -> Messages {
    let l = n_labels;
    let n = emissions.len() / l;
    assert!(n >= 1 && emissions.len() == n * l && transitions.len() == l * l);
    let et = ExpTransitions::new(transitions);

    let mut alpha = vec![0.0; n * l];
    alpha[..l].copy_from_slice(&emissions[..l]);
    let mut p = vec![0.0; l];
    for t in 1..n {
        let m = shifted_exp(&alpha[(t - 1) * l..t * l], &mut p);
        for y in 0..l {
            let mut s = 0.0;
            for (yp, pv) in p.iter().enumerate() {
                s += pv * et.table[yp * l + y];
            }
            alpha[t * l + y] = emissions[t * l + y] + m + et.shift + s.ln();
        }
    }

    let mut beta = vec![0.0; n * l];
    let mut q = vec![0.0; l];
    let mut r = vec![0.0; l];
    for t in (0..n - 1).rev() {
        for y in 0..l {
            q[y] = emissions[(t + 1) * l + y] + beta[(t + 1) * l + y];
        }
        let m = shifted_exp(&q, &mut r);
        for yp in 0..l {
            let row = &et.table[yp * l..(yp + 1) * l];
            let s: f64 = row.iter().zip(&r).map(|(a, b)| a * b).sum();
            beta[t * l + yp] = m + et.shift + s.ln();
        }
    }
    let log_partition = log_sum_exp(&alpha[(n - 1) * l..]);
    Messages {
        n,
        n_labels: l,
        alpha,
        beta,
        log_partition,
    }
}

impl Messages {
    /// Per-position label marginals, row-major `n × L`. Each row is
    /// renormalized to absorb rounding accumulated along long sequences.
    pub fn marginals(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self
            .alpha
            .iter()
            .zip(&self.beta)
            .map(|(a, b)| (a + b - self.log_partition).exp())
            .collect();
        for row in out.chunks_mut(self.n_labels) {
            let total: f64 = row.iter().sum();
            if total > 0.0 {
                row.iter_mut().for_each(|p| *p /= total);
            }
        }
        out
    }

    /// Calls `visit(t, prev, next, probability)` for every adjacent pair
    /// `(t-1, t)` with `t ≥ 1`.
    pub fn for_each_pairwise<V>(&self, emissions: &[f64], transitions: &[f64], mut visit: V)
    where
        V: FnMut(usize, usize, usize, f64),
    {
        let l = self.n_labels;
        let et = ExpTransitions::new(transitions);
        let mut u = vec![0.0; l];
        let mut w = vec![0.0; l];
        let mut q = vec![0.0; l];
        for t in 1..self.n {
            let ma = shifted_exp(&self.alpha[(t - 1) * l..t * l], &mut u);
            for y in 0..l {
                q[y] = emissions[t * l + y] + self.beta[t * l + y];
            }
            let mq = shifted_exp(&q, &mut w);
            let scale = (ma + mq + et.shift - self.log_partition).exp();
            for yp in 0..l {
                let row = &et.table[yp * l..(yp + 1) * l];
                let up = u[yp] * scale;
                for y in 0..l {
                    visit(t, yp, y, up * row[y] * w[y]);
                }
            }
        }
    }

    /// Pairwise marginals, one `L × L` block per adjacent pair.
    pub fn pairwise(&self, emissions: &[f64], transitions: &[f64]) -> Vec<Vec<f64>> {
        let l = self.n_labels;
        let mut out = vec![vec![0.0; l * l]; self.n.saturating_sub(1)];
        self.for_each_pairwise(emissions, transitions, |t, yp, y, p| out[t - 1][yp * l + y] = p);
        out
    }
}

/// Sum of emission and transition potentials along `path`.
pub fn path_score(emissions: &[f64], transitions: &[f64], n_labels: usize, path: &[usize]) -> f64 {
    let l = n_labels;
    let mut score = 0.0;
    for (t, &y) in path.iter().enumerate() {
        score += emissions[t * l + y];
        if t > 0 {
            score += transitions[path[t - 1] * l + y];
        }
    }
    score
}

/// Highest-scoring path. Among equally good paths the one that is
/// lexicographically smallest in label index, reading left to right, wins.
pub fn viterbi<F: Float>(emissions: &[F], transitions: &[F], n_labels: usize) -> Vec<usize> {
    let l = n_labels;
    let n = emissions.len() / l;
    assert!(n >= 1 && transitions.len() == l * l);
    // best[t][y]: best score of the suffix t.. given label y at t
    let mut best = vec![F::zero(); n * l];
    best[(n - 1) * l..].copy_from_slice(&emissions[(n - 1) * l..]);
    for t in (0..n - 1).rev() {
        for y in 0..l {
            let mut m = F::neg_infinity();
            for y2 in 0..l {
                let v = transitions[y * l + y2] + best[(t + 1) * l + y2];
                if v > m {
                    m = v;
                }
            }
            best[t * l + y] = emissions[t * l + y] + m;
        }
    }
    let mut path = Vec::with_capacity(n);
    let first_argmax = |scores: &mut dyn Iterator<Item = F>| {
        let mut arg = 0;
        let mut m = F::neg_infinity();
        for (i, v) in scores.enumerate() {
            if v > m {
                m = v;
                arg = i;
            }
        }
        arg
    };
    path.push(first_argmax(&mut best[..l].iter().copied()));
    for t in 1..n {
        let prev = path[t - 1];
        let y = first_argmax(&mut (0..l).map(|y| transitions[prev * l + y] + best[t * l + y]));
        path.push(y);
    }
    path
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_position_marginals_are_softmax() {
        let e = [0.5, -1.0, 2.0];
        let t = [0.0; 9];
        let msg = messages(&e, &t, 3);
        let z = log_sum_exp(&e);
        assert!((msg.log_partition - z).abs() < 1e-15);
        for (m, v) in msg.marginals().iter().zip(e) {
            assert!((m - (v - z).exp()).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_potentials_are_uniform() {
        let (n, l) = (4, 3);
        let msg = messages(&vec![0.0; n * l], &vec![0.0; l * l], l);
        assert!((msg.log_partition - n as f64 * (l as f64).ln()).abs() < 1e-12);
        assert!(msg.marginals().iter().all(|m| (m - 1.0 / 3.0).abs() < 1e-12));
        assert_eq!(viterbi(&vec![0.0f64; n * l], &vec![0.0; l * l], l), [0, 0, 0, 0]);
    }

    #[test]
    fn large_weights_do_not_overflow() {
        let (n, l) = (10_000, 3);
        let e: Vec<f64> = (0..n * l).map(|i| if i % 2 == 0 { 50.0 } else { -50.0 }).collect();
        let t = [50.0, -50.0, 50.0, -50.0, 50.0, -50.0, 50.0, 50.0, -50.0];
        let msg = messages(&e, &t, l);
        assert!(msg.log_partition.is_finite());
        for row in msg.marginals().chunks(l) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
