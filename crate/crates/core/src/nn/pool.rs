use crate::error::{Error, Result};
use crate::math::Tensor;

/// Max-over-time pooling: `out[i] = max_t xs[t][i]`.
///
/// Backward routes each feature's gradient to the first time step that
/// attains the maximum.
#[derive(Debug, Clone, Default)]
pub struct MaxPoolTime {
    cache: Vec<(usize, Vec<usize>)>,
}

impl MaxPoolTime {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn compute(xs: &Tensor) -> Result<(Tensor, Vec<usize>)> {
        if xs.shape().len() != 2 {
            return Err(Error::dim("maxpool_time", xs.shape(), &[0, 0]));
        }
        let d = xs.cols();
        let mut out = xs.row(0).to_vec();
        let mut arg = vec![0usize; d];
        for t in 1..xs.rows() {
            for (i, &v) in xs.row(t).iter().enumerate() {
                if v > out[i] {
                    out[i] = v;
                    arg[i] = t;
                }
            }
        }
        Ok((Tensor::vector(out), arg))
    }

    pub fn forward(&mut self, xs: &Tensor) -> Result<Tensor> {
        let (y, arg) = Self::compute(xs)?;
        self.cache.push((xs.rows(), arg));
        Ok(y)
    }

    pub fn backward(&mut self, dy: &Tensor) -> Result<Tensor> {
        let (t, arg) = self
            .cache
            .pop()
            .ok_or(Error::State("maxpool backward called without a recorded forward"))?;
        if dy.len() != arg.len() {
            return Err(Error::dim("maxpool backward", &[arg.len()], dy.shape()));
        }
        let d = arg.len();
        let mut dx = Tensor::zeros(&[t, d]);
        for (i, &a) in arg.iter().enumerate() {
            dx.data_mut()[a * d + i] = dy.data()[i];
        }
        Ok(dx)
    }

    pub fn clear_cache(&mut self) {
        self.cache.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn elementwise_max() {
        let xs = Tensor::matrix(2, 2, vec![1.0, 5.0, 3.0, 2.0]).unwrap();
        let (y, _) = MaxPoolTime::compute(&xs).unwrap();
        assert_eq!(y.data(), &[3.0, 5.0]);
        let one = Tensor::matrix(1, 3, vec![0.1, -2.0, 7.0]).unwrap();
        assert_eq!(MaxPoolTime::compute(&one).unwrap().0.data(), one.data());
    }

    #[test]
    fn ties_route_to_first_occurrence() {
        let xs = Tensor::matrix(3, 1, vec![2.0, 2.0, 1.0]).unwrap();
        let mut p = MaxPoolTime::new();
        p.forward(&xs).unwrap();
        let dx = p.backward(&Tensor::vector(vec![1.0])).unwrap();
        assert_eq!(dx.data(), &[1.0, 0.0, 0.0]);
    }

    proptest! {
        #[test]
        fn permutation_invariant_and_monotone(
            rows in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 3), 1..8),
            seed in 0u64..1000,
            bump in 0.0f64..5.0,
            which in 0usize..100,
        ) {
            let xs = Tensor::from_rows(&rows).unwrap();
            let (y, _) = MaxPoolTime::compute(&xs).unwrap();
            let mut perm = rows.clone();
            crate::math::Rng::new(seed).shuffle(&mut perm);
            let (yp, _) = MaxPoolTime::compute(&Tensor::from_rows(&perm).unwrap()).unwrap();
            prop_assert_eq!(y.data(), yp.data());

            let mut raised = rows.clone();
            let r = which % raised.len();
            raised[r][which % 3] += bump;
            let (yr, _) = MaxPoolTime::compute(&Tensor::from_rows(&raised).unwrap()).unwrap();
            for (a, b) in yr.data().iter().zip(y.data()) {
                prop_assert!(a >= b);
            }
        }
    }
}
