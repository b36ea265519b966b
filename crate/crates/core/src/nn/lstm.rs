//! LSTM cell with input, forget and output gates:
//!
//! ```text
//! i_t = σ(W_ix x_t + W_ih h_{t-1} + b_i)
//! f_t = σ(W_fx x_t + W_fh h_{t-1} + b_f)
//! o_t = σ(W_ox x_t + W_oh h_{t-1} + b_o)
//! s_t = tanh(W_sx x_t + W_sh h_{t-1} + b_s)
//! c_t = f_t ⊙ c_{t-1} + i_t ⊙ s_t
//! h_t = tanh(c_t) ⊙ o_t
//! ```

use super::param::{join, Param};
use crate::error::{Error, Result};
use crate::math::{affine_into, axpy, sigmoid, Rng, Tensor};

#[derive(Debug, Clone)]
struct Gate {
    wx: Param,
    wh: Param,
    b: Param,
}

impl Gate {
    fn new(input: usize, hidden: usize, rng: &mut Rng) -> Self {
        Gate {
            wx: Param::glorot(hidden, input, rng),
            wh: Param::glorot(hidden, hidden, rng),
            b: Param::zeros(&[hidden]),
        }
    }

    fn preactivation(&self, x: &[f64], h: &[f64]) -> Vec<f64> {
        let mut z = self.b.value.data().to_vec();
        affine_into(self.wx.value.data(), x.len(), x, &mut z);
        affine_into(self.wh.value.data(), h.len(), h, &mut z);
        z
    }

    /// Accumulates parameter gradients for `dz` and adds the input/hidden
    /// gradients into `dx` / `dh`.
    fn backward(&mut self, dz: &[f64], x: &[f64], h_prev: &[f64], dx: &mut [f64], dh: &mut [f64]) {
        let (ni, nh) = (x.len(), h_prev.len());
        for (k, &g) in dz.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            axpy(g, x, &mut self.wx.grad.data_mut()[k * ni..(k + 1) * ni]);
            axpy(g, h_prev, &mut self.wh.grad.data_mut()[k * nh..(k + 1) * nh]);
            axpy(g, &self.wx.value.data()[k * ni..(k + 1) * ni], dx);
            axpy(g, &self.wh.value.data()[k * nh..(k + 1) * nh], dh);
        }
        axpy(1.0, dz, self.b.grad.data_mut());
    }
}

/// Gate values to force in [`LstmCell::step_with_forced_gates`]. `None`
/// keeps the value computed from the parameters.
#[derive(Debug, Clone, Default)]
pub struct ForcedGates {
    pub input: Option<Vec<f64>>,
    pub forget: Option<Vec<f64>>,
    pub output: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
struct StepCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    i: Vec<f64>,
    f: Vec<f64>,
    o: Vec<f64>,
    s: Vec<f64>,
    tanh_c: Vec<f64>,
}

/// Intermediate values of one step, exposed for inspection.
#[derive(Debug, Clone)]
pub struct StepTrace {
    pub input_gate: Vec<f64>,
    pub forget_gate: Vec<f64>,
    pub output_gate: Vec<f64>,
    pub candidate: Vec<f64>,
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LstmCell {
    input: usize,
    hidden: usize,
    gates: [Gate; 4],
    cache: Vec<Vec<StepCache>>,
}

const GATE_NAMES: [&str; 4] = ["i", "f", "o", "s"];

impl LstmCell {
    pub fn new(input: usize, hidden: usize, rng: &mut Rng) -> Result<Self> {
        if input == 0 || hidden == 0 {
            return Err(Error::config("LSTM sizes must be positive"));
        }
        let gates = [
            Gate::new(input, hidden, rng),
            Gate::new(input, hidden, rng),
            Gate::new(input, hidden, rng),
            Gate::new(input, hidden, rng),
        ];
        Ok(LstmCell {
            input,
            hidden,
            gates,
            cache: Vec::new(),
        })
    }

    /// All-zero parameters.
    pub fn zeros(input: usize, hidden: usize) -> Result<Self> {
        let mut cell = Self::new(input, hidden, &mut Rng::new(0))?;
        for g in &mut cell.gates {
            g.wx.value.fill(0.0);
            g.wh.value.fill(0.0);
        }
        Ok(cell)
    }

    pub fn input_size(&self) -> usize {
        self.input
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden
    }

    fn check(&self, x: &[f64], h: &[f64], c: &[f64]) -> Result<()> {
        if x.len() != self.input {
            return Err(Error::dim("lstm_step input", &[self.input], &[x.len()]));
        }
        if h.len() != self.hidden || c.len() != self.hidden {
            return Err(Error::dim("lstm_step state", &[self.hidden], &[h.len(), c.len()]));
        }
        Ok(())
    }

    fn step_inner(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64], forced: &ForcedGates) -> Result<StepCache> {
        self.check(x, h_prev, c_prev)?;
        let gate = |k: usize, f: fn(f64) -> f64| -> Vec<f64> {
            self.gates[k]
                .preactivation(x, h_prev)
                .into_iter()
                .map(f)
                .collect()
        };
        let pick = |forced: &Option<Vec<f64>>, k: usize| -> Result<Vec<f64>> {
            match forced {
                Some(v) if v.len() != self.hidden => {
                    Err(Error::dim("forced gate", &[self.hidden], &[v.len()]))
                }
                Some(v) => Ok(v.clone()),
                None => Ok(gate(k, sigmoid)),
            }
        };
        let i = pick(&forced.input, 0)?;
        let f = pick(&forced.forget, 1)?;
        let o = pick(&forced.output, 2)?;
        let s = gate(3, f64::tanh);
        let c: Vec<f64> = (0..self.hidden)
            .map(|k| f[k] * c_prev[k] + i[k] * s[k])
            .collect();
        let tanh_c = c.iter().map(|v| v.tanh()).collect();
        Ok(StepCache {
            x: x.to_vec(),
            h_prev: h_prev.to_vec(),
            c_prev: c_prev.to_vec(),
            i,
            f,
            o,
            s,
            tanh_c,
        })
    }

    fn finish(sc: &StepCache) -> (Vec<f64>, Vec<f64>) {
        let h = sc.tanh_c.iter().zip(&sc.o).map(|(t, o)| t * o).collect();
        let c = sc
            .f
            .iter()
            .zip(&sc.c_prev)
            .zip(sc.i.iter().zip(&sc.s))
            .map(|((f, cp), (i, s))| f * cp + i * s)
            .collect();
        (h, c)
    }

    /// One step from explicit state; returns `(h_t, c_t)`.
    pub fn step(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let sc = self.step_inner(x, h_prev, c_prev, &ForcedGates::default())?;
        Ok(Self::finish(&sc))
    }

    /// Diagnostic entry point: one step with some gate activations replaced
    /// by given values. The regular paths never force gates.
    pub fn step_with_forced_gates(
        &self,
        x: &[f64],
        h_prev: &[f64],
        c_prev: &[f64],
        forced: &ForcedGates,
    ) -> Result<StepTrace> {
        let sc = self.step_inner(x, h_prev, c_prev, forced)?;
        let (h, c) = Self::finish(&sc);
        Ok(StepTrace {
            input_gate: sc.i,
            forget_gate: sc.f,
            output_gate: sc.o,
            candidate: sc.s,
            h,
            c,
        })
    }

    /// Runs the cell over `xs: [T x input]` from a zero state; returns all
    /// hidden states `[T x hidden]`.
    pub fn compute_seq(&self, xs: &Tensor) -> Result<Tensor> {
        Ok(self.run(xs)?.0)
    }

    fn run(&self, xs: &Tensor) -> Result<(Tensor, Vec<StepCache>)> {
        if xs.shape().len() != 2 || xs.cols() != self.input {
            return Err(Error::dim("lstm", &[self.input], xs.shape()));
        }
        let mut h = vec![0.0; self.hidden];
        let mut c = vec![0.0; self.hidden];
        let mut hs = Vec::with_capacity(xs.rows() * self.hidden);
        let mut steps = Vec::with_capacity(xs.rows());
        for t in 0..xs.rows() {
            let sc = self.step_inner(xs.row(t), &h, &c, &ForcedGates::default())?;
            let (nh, nc) = Self::finish(&sc);
            hs.extend_from_slice(&nh);
            h = nh;
            c = nc;
            steps.push(sc);
        }
        Ok((Tensor::matrix(xs.rows(), self.hidden, hs)?, steps))
    }

    pub fn forward_seq(&mut self, xs: &Tensor) -> Result<Tensor> {
        let (hs, steps) = self.run(xs)?;
        self.cache.push(steps);
        Ok(hs)
    }

    /// Backpropagation through time. `dhs` holds the loss gradient for
    /// every hidden state; returns the gradient for every input row.
    pub fn backward_seq(&mut self, dhs: &Tensor) -> Result<Tensor> {
        let steps = self
            .cache
            .pop()
            .ok_or(Error::State("lstm backward called without a recorded forward"))?;
        if dhs.shape() != [steps.len(), self.hidden] {
            return Err(Error::dim("lstm backward", &[steps.len(), self.hidden], dhs.shape()));
        }
        let hd = self.hidden;
        let mut dxs = Tensor::zeros(&[steps.len(), self.input]);
        let mut dh_next = vec![0.0; hd];
        let mut dc_next = vec![0.0; hd];
        for (t, sc) in steps.iter().enumerate().rev() {
            let mut dz = [vec![0.0; hd], vec![0.0; hd], vec![0.0; hd], vec![0.0; hd]];
            let mut dc_prev = vec![0.0; hd];
            for k in 0..hd {
                let dh = dhs.row(t)[k] + dh_next[k];
                let do_ = dh * sc.tanh_c[k];
                let dc = dh * sc.o[k] * (1.0 - sc.tanh_c[k] * sc.tanh_c[k]) + dc_next[k];
                let df = dc * sc.c_prev[k];
                let di = dc * sc.s[k];
                let ds = dc * sc.i[k];
                dc_prev[k] = dc * sc.f[k];
                dz[0][k] = di * sc.i[k] * (1.0 - sc.i[k]);
                dz[1][k] = df * sc.f[k] * (1.0 - sc.f[k]);
                dz[2][k] = do_ * sc.o[k] * (1.0 - sc.o[k]);
                dz[3][k] = ds * (1.0 - sc.s[k] * sc.s[k]);
            }
            let mut dh_prev = vec![0.0; hd];
            let dx = dxs.row_mut(t);
            for (g, dzg) in self.gates.iter_mut().zip(&dz) {
                g.backward(dzg, &sc.x, &sc.h_prev, dx, &mut dh_prev);
            }
            dh_next = dh_prev;
            dc_next = dc_prev;
        }
        Ok(dxs)
    }

    pub fn clear_cache(&mut self) {
        self.cache.clear();
    }

    pub fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param)) {
        for (g, n) in self.gates.iter().zip(GATE_NAMES) {
            f(&join(prefix, &format!("w_{n}x")), &g.wx);
            f(&join(prefix, &format!("w_{n}h")), &g.wh);
            f(&join(prefix, &format!("b_{n}")), &g.b);
        }
    }

    pub fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param)) {
        for (g, n) in self.gates.iter_mut().zip(GATE_NAMES) {
            f(&join(prefix, &format!("w_{n}x")), &mut g.wx);
            f(&join(prefix, &format!("w_{n}h")), &mut g.wh);
            f(&join(prefix, &format!("b_{n}")), &mut g.b);
        }
    }
}

/// Free-function form of a single step.
pub fn lstm_step(cell: &LstmCell, x: &Tensor, h_prev: &Tensor, c_prev: &Tensor) -> Result<(Tensor, Tensor)> {
    let (h, c) = cell.step(x.data(), h_prev.data(), c_prev.data())?;
    Ok((Tensor::vector(h), Tensor::vector(c)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_state(rng: &mut Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.uniform_range(-1.0, 1.0)).collect()
    }

    #[test]
    fn forced_gates_semantics() {
        let mut rng = Rng::new(11);
        let cell = LstmCell::new(3, 4, &mut rng).unwrap();
        let x = random_state(&mut rng, 3);
        let h = random_state(&mut rng, 4);
        let c = random_state(&mut rng, 4);

        let keep = cell
            .step_with_forced_gates(&x, &h, &c, &ForcedGates {
                input: Some(vec![0.0; 4]),
                forget: Some(vec![1.0; 4]),
                output: None,
            })
            .unwrap();
        assert_eq!(keep.c, c);

        let forget = cell
            .step_with_forced_gates(&x, &h, &c, &ForcedGates {
                forget: Some(vec![0.0; 4]),
                ..Default::default()
            })
            .unwrap();
        let expect: Vec<f64> = forget.input_gate.iter().zip(&forget.candidate).map(|(i, s)| i * s).collect();
        assert_eq!(forget.c, expect);

        let mute = cell
            .step_with_forced_gates(&x, &h, &c, &ForcedGates {
                output: Some(vec![0.0; 4]),
                ..Default::default()
            })
            .unwrap();
        assert!(mute.h.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_cell_stays_zero() {
        let cell = LstmCell::zeros(5, 3).unwrap();
        let (h, c) = cell.step(&[1.0, -2.0, 3.0, 0.5, 9.0], &[0.0; 3], &[0.0; 3]).unwrap();
        assert!(h.iter().chain(&c).all(|&v| v == 0.0));
    }

    #[test]
    fn step_matches_hand_computed_gates() {
        let mut rng = Rng::new(4);
        let cell = LstmCell::new(2, 2, &mut rng).unwrap();
        let x = [0.3, -0.4];
        let h = [0.1, 0.2];
        let c = [-0.5, 0.7];
        let (h1, c1) = cell.step(&x, &h, &c).unwrap();
        let pre = |g: &Gate| g.preactivation(&x, &h);
        let i: Vec<f64> = pre(&cell.gates[0]).into_iter().map(sigmoid).collect();
        let f: Vec<f64> = pre(&cell.gates[1]).into_iter().map(sigmoid).collect();
        let o: Vec<f64> = pre(&cell.gates[2]).into_iter().map(sigmoid).collect();
        let s: Vec<f64> = pre(&cell.gates[3]).into_iter().map(f64::tanh).collect();
        for k in 0..2 {
            let ck = f[k] * c[k] + i[k] * s[k];
            assert!((c1[k] - ck).abs() < 1e-15);
            assert!((h1[k] - ck.tanh() * o[k]).abs() < 1e-15);
        }
    }

    #[test]
    fn shape_errors() {
        let cell = LstmCell::zeros(2, 2).unwrap();
        assert!(matches!(cell.step(&[0.0; 3], &[0.0; 2], &[0.0; 2]), Err(Error::Dimension { .. })));
        let mut cell = cell;
        assert!(matches!(cell.backward_seq(&Tensor::zeros(&[1, 2])), Err(Error::State(_))));
    }
}
