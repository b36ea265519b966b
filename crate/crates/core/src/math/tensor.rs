//! Dense row-major `f64` tensors and the handful of primitives every layer
//! is built from.
//!
//! Shapes are checked on every operation; nothing broadcasts.

use std::fmt;

use crate::error::{Error, Result};

/// Probability floor used by [`cross_entropy`].
pub const CE_FLOOR: f64 = 1e-12;

#[derive(Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tensor{:?}", self.shape)?;
        if self.data.len() <= 16 {
            write!(f, " {:?}", self.data)?;
        }
        Ok(())
    }
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.iter().any(|&d| d == 0) {
            return Err(Error::config(format!("tensor shape {shape:?} has a zero dimension")));
        }
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::dim("tensor", &shape, &[data.len()]));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; n],
        }
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; n],
        }
    }

    /// One-dimensional tensor. An empty vector yields shape `[0]`, which is
    /// only ever used as a placeholder for "no data".
    pub fn vector(data: Vec<f64>) -> Self {
        Tensor {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(vec![rows, cols], data)
    }

    /// Stacks equally sized rows into a `[rows.len() x d]` matrix.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows.first().ok_or(Error::EmptyInput("no rows"))?;
        let d = first.len();
        let mut data = Vec::with_capacity(rows.len() * d);
        for r in rows {
            if r.len() != d {
                return Err(Error::dim("from_rows", &[d], &[r.len()]));
            }
            data.extend_from_slice(r);
        }
        Self::new(vec![rows.len(), d], data)
    }

    pub fn eye(n: usize) -> Self {
        let mut t = Self::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Number of rows of a matrix (first dimension).
    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    /// Row width: product of all but the first dimension.
    pub fn cols(&self) -> usize {
        self.shape[1..].iter().product()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let c = self.cols();
        &mut self.data[i * c..(i + 1) * c]
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols() + j]
    }

    pub fn fill(&mut self, value: f64) {
        self.data.iter_mut().for_each(|v| *v = value);
    }

    pub fn scale(&self, alpha: f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| v * alpha).collect(),
        }
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.same_shape("add", other)?;
        Ok(Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn add_assign(&mut self, other: &Tensor) -> Result<()> {
        self.same_shape("add_assign", other)?;
        self.data.iter_mut().zip(&other.data).for_each(|(a, b)| *a += b);
        Ok(())
    }

    pub fn argmax(&self) -> usize {
        argmax(&self.data)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn same_shape(&self, op: &'static str, other: &Tensor) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::dim(op, &self.shape, &other.shape));
        }
        Ok(())
    }

    pub fn reshape(self, shape: Vec<usize>) -> Result<Tensor> {
        Tensor::new(shape, self.data)
    }
}

/// First index of the maximum; `0` for an empty slice.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in xs.iter().enumerate() {
        if v > xs[best] {
            best = i;
        }
    }
    best
}

/// `W x + b` for `W: [m x n]`, `x: [n]`, `b: [m]`.
pub fn affine(w: &Tensor, x: &Tensor, b: &Tensor) -> Result<Tensor> {
    if w.shape.len() != 2 || x.shape.len() != 1 || b.shape.len() != 1 {
        return Err(Error::dim("affine", &w.shape, &x.shape));
    }
    let (m, n) = (w.shape[0], w.shape[1]);
    if x.shape[0] != n {
        return Err(Error::dim("affine", &w.shape, &x.shape));
    }
    if b.shape[0] != m {
        return Err(Error::dim("affine", &w.shape, &b.shape));
    }
    let mut out = b.data.clone();
    affine_into(&w.data, n, &x.data, &mut out);
    Ok(Tensor::vector(out))
}

/// `out += W x` on raw row-major slices; `out` must already hold the bias.
#[inline]
pub(crate) fn affine_into(w: &[f64], n: usize, x: &[f64], out: &mut [f64]) {
    for (o, row) in out.iter_mut().zip(w.chunks_exact(n)) {
        *o += dot(row, x);
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four accumulators let the compiler vectorize without reassociating.
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        let i = 4 * k;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Sigmoid,
    Tanh,
    Relu,
    /// No nonlinearity; used for linear probes and logits.
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Sigmoid => sigmoid(z),
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the activation's output `y = f(z)`.
    /// ReLU's derivative at exactly zero is taken as 0.
    #[inline]
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Sigmoid => "sigmoid",
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
            Activation::Identity => "identity",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sigmoid" => Ok(Activation::Sigmoid),
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            "identity" | "linear" => Ok(Activation::Identity),
            other => Err(Error::config(format!("unknown activation `{other}`"))),
        }
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn activation(kind: Activation, x: &Tensor) -> Tensor {
    Tensor {
        shape: x.shape.clone(),
        data: x.data.iter().map(|&v| kind.apply(v)).collect(),
    }
}

/// Numerically stable softmax (max subtraction).
pub fn softmax(x: &Tensor) -> Result<Tensor> {
    if x.is_empty() {
        return Err(Error::EmptyInput("softmax of an empty vector"));
    }
    Ok(Tensor {
        shape: x.shape.clone(),
        data: softmax_slice(&x.data),
    })
}

pub(crate) fn softmax_slice(x: &[f64]) -> Vec<f64> {
    let m = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = x.iter().map(|&v| (v - m).exp()).collect();
    let s: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= s);
    out
}

/// `-ln(max(p[label], 1e-12))`.
pub fn cross_entropy(p: &Tensor, label: usize) -> Result<f64> {
    let v = p.data.get(label).ok_or(Error::Index {
        index: label,
        len: p.len(),
    })?;
    Ok(-v.max(CE_FLOOR).ln())
}
