//! Parameter tables and the in-place negative-sampling update shared by the
//! skip-gram and VERSE trainers.
//!
//! A trainer runs either on a [`DenseTable`] owned by one worker
//! (bit-for-bit reproducible) or on a [`SharedTable`] that several workers
//! update without locks. Shared updates are relaxed atomic loads and stores,
//! so concurrent writes to one row may be lost; only statistical guarantees
//! hold in that mode.

use std::sync::atomic::{AtomicU32, Ordering};

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)`, stable for large `|x|`.
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[inline]
pub(crate) fn dot(a: &[f32], b: &[f32]) -> f32 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) trait RowStore {
    fn read(&self, row: usize, out: &mut [f32]);
    /// `table[row] += a * x`
    fn axpy(&mut self, row: usize, a: f32, x: &[f32]);
}

#[derive(Debug, Clone)]
pub(crate) struct DenseTable {
    pub dim: usize,
    pub data: Vec<f32>,
}

impl RowStore for DenseTable {
    #[inline]
    fn read(&self, row: usize, out: &mut [f32]) {
        out.copy_from_slice(&self.data[row * self.dim..(row + 1) * self.dim]);
    }

    #[inline]
    fn axpy(&mut self, row: usize, a: f32, x: &[f32]) {
        for (t, &v) in self.data[row * self.dim..(row + 1) * self.dim]
            .iter_mut()
            .zip(x)
        {
            *t += a * v;
        }
    }
}

#[derive(Debug)]
pub(crate) struct SharedTable {
    pub dim: usize,
    data: Vec<AtomicU32>,
}

impl SharedTable {
    pub fn from_dense(t: DenseTable) -> Self {
        SharedTable {
            dim: t.dim,
            data: t
                .data
                .into_iter()
                .map(|v| AtomicU32::new(v.to_bits()))
                .collect(),
        }
    }

    pub fn into_dense(self) -> DenseTable {
        DenseTable {
            dim: self.dim,
            data: self
                .data
                .into_iter()
                .map(|a| f32::from_bits(a.into_inner()))
                .collect(),
        }
    }
}

impl RowStore for &SharedTable {
    #[inline]
    fn read(&self, row: usize, out: &mut [f32]) {
        let src = &self.data[row * self.dim..(row + 1) * self.dim];
        for (o, a) in out.iter_mut().zip(src) {
            *o = f32::from_bits(a.load(Ordering::Relaxed));
        }
    }

    #[inline]
    fn axpy(&mut self, row: usize, a: f32, x: &[f32]) {
        let dst = &self.data[row * self.dim..(row + 1) * self.dim];
        for (t, &v) in dst.iter().zip(x) {
            let cur = f32::from_bits(t.load(Ordering::Relaxed));
            t.store((cur + a * v).to_bits(), Ordering::Relaxed);
        }
    }
}

/// Reusable per-worker buffers.
#[derive(Debug, Clone)]
pub(crate) struct Scratch {
    center: Vec<f32>,
    row: Vec<f32>,
    grad: Vec<f32>,
}

impl Scratch {
    pub fn new(dim: usize) -> Self {
        Scratch {
            center: vec![0.0; dim],
            row: vec![0.0; dim],
            grad: vec![0.0; dim],
        }
    }
}

/// One SGD step on `-log σ(c·t₊) - Σ log σ(-c·t₋)`, where `c` is row
/// `center` of `centers` and the targets are rows of `targets`. Target rows
/// are updated immediately; the center row is updated once at the end.
/// Returns the loss before the update.
#[inline]
pub(crate) fn negative_sampling_step<C: RowStore, T: RowStore>(
    centers: &mut C,
    targets: &mut T,
    center: usize,
    positive: usize,
    negatives: &[usize],
    lr: f32,
    s: &mut Scratch,
) -> f64 {
    centers.read(center, &mut s.center);
    s.grad.iter_mut().for_each(|g| *g = 0.0);
    let mut loss = 0.0;
    for (k, &t) in std::iter::once(&positive).chain(negatives).enumerate() {
        let label = if k == 0 { 1.0 } else { 0.0 };
        targets.read(t, &mut s.row);
        let f = dot(&s.center, &s.row) as f64;
        loss += if k == 0 { softplus(-f) } else { softplus(f) };
        let g = ((label - sigmoid(f)) * lr as f64) as f32;
        for (acc, &r) in s.grad.iter_mut().zip(&s.row) {
            *acc += g * r;
        }
        targets.axpy(t, g, &s.center);
    }
    centers.axpy(center, 1.0, &s.grad);
    loss
}

/// Same update when centers and targets live in one table.
#[inline]
pub(crate) fn shared_table_step<S: RowStore>(
    table: &mut S,
    center: usize,
    positive: usize,
    negatives: &[usize],
    lr: f32,
    s: &mut Scratch,
) -> f64 {
    table.read(center, &mut s.center);
    s.grad.iter_mut().for_each(|g| *g = 0.0);
    let mut loss = 0.0;
    for (k, &t) in std::iter::once(&positive).chain(negatives).enumerate() {
        let label = if k == 0 { 1.0 } else { 0.0 };
        table.read(t, &mut s.row);
        let f = dot(&s.center, &s.row) as f64;
        loss += if k == 0 { softplus(-f) } else { softplus(f) };
        let g = ((label - sigmoid(f)) * lr as f64) as f32;
        for (acc, &r) in s.grad.iter_mut().zip(&s.row) {
            *acc += g * r;
        }
        table.axpy(t, g, &s.center);
    }
    table.axpy(center, 1.0, &s.grad);
    loss
}

/// Linearly decayed learning rate with a floor of `initial * 1e-4`.
#[inline]
pub(crate) fn decayed_lr(initial: f64, done: u64, total: u64) -> f32 {
    let frac = if total == 0 {
        0.0
    } else {
        done as f64 / total as f64
    };
    (initial * (1.0 - frac)).max(initial * 1e-4) as f32
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stable_logistic_helpers() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(800.0) == 1.0 && sigmoid(-800.0) == 0.0);
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert!((softplus(-20.0) - 2.061_153_620_314_381e-9).abs() < 1e-22);
        assert_eq!(softplus(1000.0), 1000.0);
    }

    #[test]
    fn lr_decays_to_floor() {
        assert_eq!(decayed_lr(0.025, 0, 100), 0.025);
        assert!((decayed_lr(0.025, 50, 100) - 0.0125).abs() < 1e-9);
        assert!((decayed_lr(0.025, 100, 100) - 2.5e-6).abs() < 1e-12);
    }

    #[test]
    fn shared_and_dense_tables_agree_single_threaded() {
        let dense = DenseTable {
            dim: 3,
            data: vec![0.1, -0.2, 0.3, 0.05, 0.4, -0.1, 0.2, 0.2, 0.2],
        };
        let mut a = dense.clone();
        let shared = SharedTable::from_dense(dense);
        let mut b = &shared;
        let mut s = Scratch::new(3);
        let la = shared_table_step(&mut a, 0, 1, &[2, 0], 0.1, &mut s);
        let lb = shared_table_step(&mut b, 0, 1, &[2, 0], 0.1, &mut s);
        assert_eq!(la, lb);
        assert_eq!(shared.into_dense().data, a.data);
    }
}
