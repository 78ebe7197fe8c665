//! Limited-memory BFGS with a backtracking Armijo line search.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsConfig {
    /// Stop once the gradient's Euclidean norm falls below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Number of correction pairs kept.
    pub memory: usize,
    pub max_line_search: usize,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        LbfgsConfig {
            tol: 1e-5,
            max_iter: 300,
            memory: 10,
            max_line_search: 40,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxIterations,
    /// The line search could not decrease the objective further.
    Stalled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsReport {
    /// Objective after each accepted step, starting with the initial value.
    pub losses: Vec<f64>,
    pub termination: Termination,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonFinite {
    pub iteration: usize,
    pub value: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `objective`, which writes the gradient into its second argument
/// and returns the function value. `x` is updated in place.
pub fn minimize<F>(mut objective: F, x: &mut [f64], config: &LbfgsConfig) -> Result<LbfgsReport, NonFinite>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x.len();
    let mut grad = vec![0.0; n];
    let mut fx = objective(x, &mut grad);
    let mut evaluations = 1;
    if !fx.is_finite() {
        return Err(NonFinite {
            iteration: 0,
            value: fx,
        });
    }
    let mut losses = vec![fx];
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(config.memory);
    let mut direction = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut trial_grad = vec![0.0; n];
    let mut alpha = vec![0.0; config.memory];

    for iteration in 1..=config.max_iter {
        if dot(&grad, &grad).sqrt() < config.tol {
            return Ok(LbfgsReport {
                losses,
                termination: Termination::Converged,
                evaluations,
            });
        }

        // two-loop recursion: direction = -H * grad
        direction.copy_from_slice(&grad);
        for (k, (s, y, rho)) in history.iter().enumerate().rev() {
            let a = rho * dot(s, &direction);
            alpha[k] = a;
            for (d, yi) in direction.iter_mut().zip(y) {
                *d -= a * yi;
            }
        }
        let gamma = match history.back() {
            Some((s, y, _)) => dot(s, y) / dot(y, y),
            None => 1.0 / dot(&grad, &grad).sqrt().max(f64::MIN_POSITIVE),
        };
        for d in direction.iter_mut() {
            *d *= gamma;
        }
        for (k, (s, y, rho)) in history.iter().enumerate() {
            let b = rho * dot(y, &direction);
            for (d, si) in direction.iter_mut().zip(s) {
                *d += (alpha[k] - b) * si;
            }
        }
        for d in direction.iter_mut() {
            *d = -*d;
        }
        let mut slope = dot(&grad, &direction);
        if slope >= 0.0 {
            // not a descent direction; restart from steepest descent
            history.clear();
            let scale = 1.0 / dot(&grad, &grad).sqrt().max(f64::MIN_POSITIVE);
            for (d, g) in direction.iter_mut().zip(&grad) {
                *d = -g * scale;
            }
            slope = dot(&grad, &direction);
        }

        let mut step = 1.0;
        let mut accepted = false;
        let mut f_new = fx;
        for _ in 0..config.max_line_search {
            for i in 0..n {
                trial[i] = x[i] + step * direction[i];
            }
            f_new = objective(&trial, &mut trial_grad);
            evaluations += 1;
            if f_new.is_finite() && f_new <= fx + 1e-4 * step * slope && f_new < fx {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            if !f_new.is_finite() {
                return Err(NonFinite {
                    iteration,
                    value: f_new,
                });
            }
            return Ok(LbfgsReport {
                losses,
                termination: Termination::Stalled,
                evaluations,
            });
        }

        let s: Vec<f64> = trial.iter().zip(x.iter()).map(|(t, xi)| t - xi).collect();
        let y: Vec<f64> = trial_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).max(f64::MIN_POSITIVE) {
            if history.len() == config.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        x.copy_from_slice(&trial);
        grad.copy_from_slice(&trial_grad);
        fx = f_new;
        losses.push(fx);
    }
    let termination = if dot(&grad, &grad).sqrt() < config.tol {
        Termination::Converged
    } else {
        Termination::MaxIterations
    };
    Ok(LbfgsReport {
        losses,
        termination,
        evaluations,
    })
}

/// Adam optimizer state for one flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<F> {
    pub lr: F,
    pub beta1: F,
    pub beta2: F,
    pub eps: F,
    pub m: Vec<F>,
    pub v: Vec<F>,
    pub t: u64,
}

impl<F: Float> Adam<F> {
    pub fn new(n_params: usize, lr: F) -> Self {
        let c = |x: f64| F::from(x).expect("representable constant");
        Adam {
            lr,
            beta1: c(0.9),
            beta2: c(0.999),
            eps: c(1e-8),
            m: vec![F::zero(); n_params],
            v: vec![F::zero(); n_params],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [F], grad: &[F]) {
        self.t += 1;
        let one = F::one();
        let t = F::from(self.t).expect("step count fits");
        let bc1 = one - self.beta1.powf(t);
        let bc2 = one - self.beta2.powf(t);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (one - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (one - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] = params[i] - self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_rosenbrock() {
        let mut x = [-1.2, 1.0];
        let report = minimize(
            |p, g| {
                let (a, b) = (p[0], p[1]);
                g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
                g[1] = 200.0 * (b - a * a);
                (1.0 - a) * (1.0 - a) + 100.0 * (b - a * a) * (b - a * a)
            },
            &mut x,
            &LbfgsConfig {
                tol: 1e-8,
                max_iter: 500,
                ..LbfgsConfig::default()
            },
        )
        .unwrap();
        assert_eq!(report.termination, Termination::Converged);
        assert!((x[0] - 1.0).abs() < 1e-6 && (x[1] - 1.0).abs() < 1e-6, "{x:?}");
        assert!(report.losses.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn adam_descends_quadratic() {
        let mut p = [3.0f64, -2.0];
        let mut adam = Adam::new(2, 0.1);
        for _ in 0..500 {
            let g = [2.0 * p[0], 2.0 * p[1]];
            adam.step(&mut p, &g);
        }
        assert!(p[0].abs() < 1e-2 && p[1].abs() < 1e-2);
    }
}
