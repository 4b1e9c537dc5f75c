//! Limited-memory BFGS with a backtracking Armijo line search.
//!
//! Every accepted step satisfies the sufficient-decrease condition along a
//! descent direction, so the recorded loss sequence never increases.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct LbfgsSettings {
    pub memory: usize,
    /// Stop once `|g| <= tolerance * max(1, |g0|)`.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub armijo: f64,
    pub max_backtracks: usize,
}

impl Default for LbfgsSettings {
    fn default() -> Self {
        LbfgsSettings {
            memory: 10,
            tolerance: 1e-5,
            max_iterations: 200,
            armijo: 1e-4,
            max_backtracks: 60,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LbfgsOutcome {
    pub x: Vec<f64>,
    pub loss: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Loss at the start point followed by the loss after each accepted step.
    pub loss_history: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn minimize<F>(mut f: F, x0: Vec<f64>, settings: &LbfgsSettings) -> Result<LbfgsOutcome>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let mut x = x0;
    let (mut loss, mut grad) = f(&x);
    if !loss.is_finite() {
        return Err(Error::Numerical("non-finite loss at the starting point".into()));
    }
    let threshold = settings.tolerance * dot(&grad, &grad).sqrt().max(1.0);
    let mut history = vec![loss];
    let mut s_mem: Vec<Vec<f64>> = Vec::new();
    let mut y_mem: Vec<Vec<f64>> = Vec::new();
    let mut rho_mem: Vec<f64> = Vec::new();
    let mut iterations = 0;
    let mut gnorm = dot(&grad, &grad).sqrt();

    while gnorm > threshold && iterations < settings.max_iterations {
        // Two-loop recursion for d = -H g.
        let mut q = grad.clone();
        let mut alphas = vec![0.0; s_mem.len()];
        for i in (0..s_mem.len()).rev() {
            alphas[i] = rho_mem[i] * dot(&s_mem[i], &q);
            q.iter_mut().zip(&y_mem[i]).for_each(|(qj, yj)| *qj -= alphas[i] * yj);
        }
        if let (Some(s), Some(y)) = (s_mem.last(), y_mem.last()) {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|v| *v *= gamma);
        }
        for i in 0..s_mem.len() {
            let beta = rho_mem[i] * dot(&y_mem[i], &q);
            q.iter_mut().zip(&s_mem[i]).for_each(|(qj, sj)| *qj += (alphas[i] - beta) * sj);
        }
        let mut dir: Vec<f64> = q.into_iter().map(|v| -v).collect();
        let mut slope = dot(&grad, &dir);
        if slope.is_nan() || slope >= 0.0 {
            s_mem.clear();
            y_mem.clear();
            rho_mem.clear();
            dir = grad.iter().map(|g| -g).collect();
            slope = -gnorm * gnorm;
        }

        let mut step = if s_mem.is_empty() { (1.0 / gnorm).min(1.0) } else { 1.0 };
        let mut accepted = None;
        for _ in 0..settings.max_backtracks {
            let candidate: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + step * di).collect();
            let (new_loss, new_grad) = f(&candidate);
            if new_loss.is_finite() && new_loss <= loss + settings.armijo * step * slope {
                accepted = Some((candidate, new_loss, new_grad));
                break;
            }
            step *= 0.5;
        }
        let Some((new_x, new_loss, new_grad)) = accepted else {
            break;
        };

        let s: Vec<f64> = new_x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = new_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 {
            if s_mem.len() == settings.memory {
                s_mem.remove(0);
                y_mem.remove(0);
                rho_mem.remove(0);
            }
            s_mem.push(s);
            y_mem.push(y);
            rho_mem.push(1.0 / sy);
        }
        x = new_x;
        loss = new_loss;
        grad = new_grad;
        gnorm = dot(&grad, &grad).sqrt();
        history.push(loss);
        iterations += 1;
    }

    Ok(LbfgsOutcome {
        x,
        loss,
        gradient_norm: gnorm,
        iterations,
        converged: gnorm <= threshold,
        loss_history: history,
    })
}
