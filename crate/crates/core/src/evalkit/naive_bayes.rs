//! Gaussian naive Bayes.

use super::LabeledDataset;

#[derive(Debug, Clone)]
pub struct GaussianNbModel {
    log_prior: Vec<f64>,
    mean: Vec<Vec<f64>>,
    var: Vec<Vec<f64>>,
}

impl GaussianNbModel {
    /// Per-class, per-feature Gaussians; variances below `var_floor` are raised to it.
    pub fn fit(data: &LabeledDataset, var_floor: f64) -> Self {
        let (k, d) = (data.class_count(), data.n_features());
        let mut count = vec![0usize; k];
        let mut mean = vec![vec![0.0; d]; k];
        let mut var = vec![vec![0.0; d]; k];
        for i in 0..data.len() {
            let c = data.labels()[i];
            count[c] += 1;
            for (m, &x) in mean[c].iter_mut().zip(data.row(i)) {
                *m += x;
            }
        }
        for c in 0..k {
            if count[c] > 0 {
                mean[c].iter_mut().for_each(|m| *m /= count[c] as f64);
            }
        }
        for i in 0..data.len() {
            let c = data.labels()[i];
            for ((v, &m), &x) in var[c].iter_mut().zip(&mean[c]).zip(data.row(i)) {
                *v += (x - m) * (x - m);
            }
        }
        for c in 0..k {
            for v in var[c].iter_mut() {
                *v = (*v / count[c].max(1) as f64).max(var_floor);
            }
        }
        let n = data.len() as f64;
        let log_prior = count
            .iter()
            .map(|&c| {
                if c == 0 {
                    f64::NEG_INFINITY
                } else {
                    (c as f64 / n).ln()
                }
            })
            .collect();
        GaussianNbModel {
            log_prior,
            mean,
            var,
        }
    }

    pub fn log_likelihood(&self, class: usize, row: &[f64]) -> f64 {
        let ln_2pi = (2.0 * std::f64::consts::PI).ln();
        self.log_prior[class]
            + row
                .iter()
                .zip(&self.mean[class])
                .zip(&self.var[class])
                .map(|((&x, &m), &v)| -0.5 * (ln_2pi + v.ln() + (x - m) * (x - m) / v))
                .sum::<f64>()
    }

    pub fn predict(&self, row: &[f64]) -> usize {
        (0..self.log_prior.len())
            .map(|c| self.log_likelihood(c, row))
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
