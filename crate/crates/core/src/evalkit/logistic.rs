//! Multinomial logistic regression with L2 penalty.
//!
//! Features are standardized with training statistics. The penalized
//! cross-entropy is minimized by limited-memory quasi-Newton steps with a
//! halving backtracking search, so the training loss never increases from
//! one iteration to the next.

use super::LabeledDataset;

#[derive(Debug, Clone)]
pub struct LogisticModel {
    mean: Vec<f64>,
    scale: Vec<f64>,
    classes: usize,
    dim: usize,
    /// Row-major `classes × (dim + 1)`, bias last.
    weights: Vec<f64>,
    /// Training loss after each accepted iteration (the first entry is the
    /// loss at zero weights).
    pub loss_trace: Vec<f64>,
}

struct Problem<'a> {
    x: Vec<f64>,
    y: &'a [usize],
    n: usize,
    dim: usize,
    classes: usize,
    l2: f64,
}

impl Problem<'_> {
    fn width(&self) -> usize {
        self.dim + 1
    }

    /// Penalized mean cross-entropy and its gradient.
    fn eval(&self, w: &[f64], grad: &mut [f64]) -> f64 {
        let (k, width) = (self.classes, self.width());
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut logits = vec![0.0; k];
        let mut loss = 0.0;
        for i in 0..self.n {
            let row = &self.x[i * self.dim..(i + 1) * self.dim];
            for (c, l) in logits.iter_mut().enumerate() {
                let wc = &w[c * width..(c + 1) * width];
                *l = wc[self.dim] + row.iter().zip(wc).map(|(a, b)| a * b).sum::<f64>();
            }
            let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = logits.iter().map(|l| (l - max).exp()).sum();
            let log_z = max + z.ln();
            loss += log_z - logits[self.y[i]];
            for (c, &l) in logits.iter().enumerate() {
                let p = (l - log_z).exp() - if c == self.y[i] { 1.0 } else { 0.0 };
                let gc = &mut grad[c * width..(c + 1) * width];
                for (g, &xv) in gc.iter_mut().zip(row) {
                    *g += p * xv;
                }
                gc[self.dim] += p;
            }
        }
        let inv = 1.0 / self.n as f64;
        loss *= inv;
        grad.iter_mut().for_each(|g| *g *= inv);
        for c in 0..k {
            for j in 0..self.dim {
                let idx = c * width + j;
                loss += 0.5 * self.l2 * w[idx] * w[idx];
                grad[idx] += self.l2 * w[idx];
            }
        }
        loss
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl LogisticModel {
    pub fn fit(data: &LabeledDataset, l2: f64, max_iter: usize, tol: f64) -> LogisticModel {
        let (n, dim, classes) = (data.len(), data.n_features(), data.class_count());
        let mut mean = vec![0.0; dim];
        let mut scale = vec![0.0; dim];
        for i in 0..n {
            for (m, &v) in mean.iter_mut().zip(data.row(i)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        for i in 0..n {
            for ((s, &m), &v) in scale.iter_mut().zip(&mean).zip(data.row(i)) {
                *s += (v - m) * (v - m);
            }
        }
        for s in scale.iter_mut() {
            let sd = (*s / n as f64).sqrt();
            *s = if sd > 1e-12 { sd } else { 1.0 };
        }
        let mut x = Vec::with_capacity(n * dim);
        for i in 0..n {
            x.extend(
                data.row(i)
                    .iter()
                    .zip(&mean)
                    .zip(&scale)
                    .map(|((&v, &m), &s)| (v - m) / s),
            );
        }
        let problem = Problem {
            x,
            y: data.labels(),
            n,
            dim,
            classes,
            l2,
        };
        let (weights, loss_trace) = minimize(&problem, max_iter, tol);
        LogisticModel {
            mean,
            scale,
            classes,
            dim,
            weights,
            loss_trace,
        }
    }

    pub fn predict(&self, row: &[f64]) -> usize {
        let width = self.dim + 1;
        let z: Vec<f64> = row
            .iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((&v, &m), &s)| (v - m) / s)
            .collect();
        (0..self.classes)
            .map(|c| {
                let wc = &self.weights[c * width..(c + 1) * width];
                wc[self.dim] + dot(&z, &wc[..self.dim])
            })
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (c, s)| {
                if s > best.1 {
                    (c, s)
                } else {
                    best
                }
            })
            .0
    }
}

const MEMORY: usize = 10;

fn minimize(p: &Problem, max_iter: usize, tol: f64) -> (Vec<f64>, Vec<f64>) {
    let size = p.classes * p.width();
    let mut w = vec![0.0; size];
    let mut g = vec![0.0; size];
    let mut loss = p.eval(&w, &mut g);
    let mut trace = vec![loss];
    let mut history: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::with_capacity(MEMORY);
    let mut trial = vec![0.0; size];
    let mut g_trial = vec![0.0; size];
    for _ in 0..max_iter {
        if g.iter().all(|v| v.abs() < 1e-10) {
            break;
        }
        // Two-loop recursion for the quasi-Newton direction.
        let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = rho * dot(s, &d);
            d.iter_mut().zip(y).for_each(|(di, yi)| *di -= a * yi);
            alphas.push(a);
        }
        if let Some((s, y, _)) = history.last() {
            let gamma = dot(s, y) / dot(y, y);
            d.iter_mut().for_each(|di| *di *= gamma);
        } else {
            let norm = dot(&g, &g).sqrt();
            d.iter_mut().for_each(|di| *di /= norm.max(1.0));
        }
        for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &d);
            d.iter_mut().zip(s).for_each(|(di, si)| *di += (a - b) * si);
        }
        let mut slope = dot(&g, &d);
        if slope >= 0.0 {
            // Not a descent direction: fall back to steepest descent.
            history.clear();
            d = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            trial
                .iter_mut()
                .zip(&w)
                .zip(&d)
                .for_each(|((t, wi), di)| *t = wi + step * di);
            let l = p.eval(&trial, &mut g_trial);
            if l <= loss + 1e-4 * step * slope {
                accepted = Some(l);
                break;
            }
            step *= 0.5;
        }
        let Some(new_loss) = accepted else { break };
        let s: Vec<f64> = trial.iter().zip(&w).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_trial.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 {
            if history.len() == MEMORY {
                history.remove(0);
            }
            history.push((s, y, 1.0 / sy));
        }
        std::mem::swap(&mut w, &mut trial);
        std::mem::swap(&mut g, &mut g_trial);
        let improvement = loss - new_loss;
        loss = new_loss;
        trace.push(loss);
        if improvement <= tol * loss.abs().max(1e-12) {
            break;
        }
    }
    (w, trace)
}
