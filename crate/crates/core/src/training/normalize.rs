use crate::error::{Error, Result};

/// Floor applied to per-feature standard deviations.
pub const STD_FLOOR: f64 = 1e-8;

/// Per-feature mean and (population) standard deviation of a training set.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    pub fn identity(dim: usize) -> Self {
        NormStats {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn fit<'a, I>(rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut n = 0usize;
        let mut sum: Vec<f64> = Vec::new();
        let mut rows_vec = Vec::new();
        for r in rows {
            if n == 0 {
                sum = vec![0.0; r.len()];
            } else if r.len() != sum.len() {
                return Err(Error::dim("normalize", &[sum.len()], &[r.len()]));
            }
            for (s, v) in sum.iter_mut().zip(r) {
                *s += v;
            }
            rows_vec.push(r);
            n += 1;
        }
        if n == 0 {
            return Err(Error::EmptyInput("no rows to normalize"));
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
        let mut var = vec![0.0; mean.len()];
        for r in &rows_vec {
            for ((acc, v), m) in var.iter_mut().zip(r.iter()).zip(&mean) {
                *acc += (v - m) * (v - m);
            }
        }
        let std = var
            .iter()
            .map(|v| (v / n as f64).sqrt().max(STD_FLOOR))
            .collect();
        Ok(NormStats { mean, std })
    }

    pub fn apply_in_place(&self, row: &mut [f64]) -> Result<()> {
        if row.len() != self.mean.len() {
            return Err(Error::dim("normalize apply", &[self.mean.len()], &[row.len()]));
        }
        for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
            *v = (*v - m) / s;
        }
        Ok(())
    }

    pub fn apply(&self, row: &[f64]) -> Result<Vec<f64>> {
        let mut out = row.to_vec();
        self.apply_in_place(&mut out)?;
        Ok(out)
    }
}

/// Standardizes every feature to zero mean and unit (population) standard
/// deviation and returns the statistics for reuse on dev/test/inference.
/// Constant features map to zero.
pub fn normalize_dataset(examples: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, NormStats)> {
    if examples.len() < 2 {
        return Err(Error::config("normalization needs at least two examples"));
    }
    let stats = NormStats::fit(examples.iter().map(|r| r.as_slice()))?;
    let out = examples
        .iter()
        .map(|r| stats.apply(r))
        .collect::<Result<Vec<_>>>()?;
    Ok((out, stats))
}
