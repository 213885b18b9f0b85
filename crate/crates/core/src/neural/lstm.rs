use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, ArrayView1, Axis};
use rand::Rng;

use super::{sigmoid, xavier, Params};
use crate::error::{ensure_dim, Error, Result};

/// Single-layer LSTM. Gate blocks are stacked in the order input, forget,
/// candidate, output along the first axis of every parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCell {
    /// `4H × D`
    pub w_input: Array2<f64>,
    /// `4H × H`
    pub w_hidden: Array2<f64>,
    /// `4H`
    pub bias: Array1<f64>,
}

/// Per-step values kept by the forward pass for BPTT.
#[derive(Debug, Clone)]
pub struct LstmTrace {
    inputs: Vec<Array1<f64>>,
    hidden: Vec<Array1<f64>>,
    cells: Vec<Array1<f64>>,
    /// Activated gates `[i, f, g, o]` per step.
    gates: Vec<Array1<f64>>,
}

impl LstmTrace {
    pub fn final_hidden(&self) -> &Array1<f64> {
        self.hidden.last().expect("non-empty trace")
    }

    pub fn hidden_states(&self) -> &[Array1<f64>] {
        &self.hidden[1..]
    }

    pub fn cell_states(&self) -> &[Array1<f64>] {
        &self.cells[1..]
    }
}

impl LstmCell {
    /// Xavier-uniform weights, zero biases except the forget gate at 1.
    pub fn new(input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        assert!(hidden > 0 && input > 0);
        let w_input = Array2::from_shape_vec((4 * hidden, input), xavier(rng, input, hidden, 4 * hidden * input))
            .expect("shape");
        let w_hidden =
            Array2::from_shape_vec((4 * hidden, hidden), xavier(rng, hidden, hidden, 4 * hidden * hidden))
                .expect("shape");
        let mut bias = Array1::zeros(4 * hidden);
        bias.slice_mut(s![hidden..2 * hidden]).fill(1.0);
        LstmCell {
            w_input,
            w_hidden,
            bias,
        }
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        LstmCell {
            w_input: Array2::zeros((4 * hidden, input)),
            w_hidden: Array2::zeros((4 * hidden, hidden)),
            bias: Array1::zeros(4 * hidden),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.input_dim(), self.hidden_dim())
    }

    pub fn input_dim(&self) -> usize {
        self.w_input.ncols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_hidden.ncols()
    }

    /// Runs the recurrence from zero state and keeps the trace.
    pub fn forward_trace<'a, I>(&self, sequence: I) -> Result<LstmTrace>
    where
        I: IntoIterator<Item = ArrayView1<'a, f64>>,
    {
        let h_dim = self.hidden_dim();
        let mut trace = LstmTrace {
            inputs: Vec::new(),
            hidden: vec![Array1::zeros(h_dim)],
            cells: vec![Array1::zeros(h_dim)],
            gates: Vec::new(),
        };
        for x in sequence {
            ensure_dim("lstm input", self.input_dim(), x.len())?;
            let h_prev = trace.hidden.last().expect("state");
            let c_prev = trace.cells.last().expect("state");
            let mut z = self.w_input.dot(&x) + self.w_hidden.dot(h_prev) + &self.bias;
            {
                let (mut ifg, mut o) = z.view_mut().split_at(Axis(0), 3 * h_dim);
                ifg.slice_mut(s![..2 * h_dim]).mapv_inplace(sigmoid);
                ifg.slice_mut(s![2 * h_dim..]).mapv_inplace(f64::tanh);
                o.mapv_inplace(sigmoid);
            }
            let i = z.slice(s![..h_dim]);
            let f = z.slice(s![h_dim..2 * h_dim]);
            let g = z.slice(s![2 * h_dim..3 * h_dim]);
            let o = z.slice(s![3 * h_dim..]);
            let c = &f * c_prev + &i * &g;
            let h = &o * &c.mapv(f64::tanh);
            trace.inputs.push(x.to_owned());
            trace.hidden.push(h);
            trace.cells.push(c);
            trace.gates.push(z);
        }
        if trace.inputs.is_empty() {
            return Err(Error::invalid("lstm input sequence is empty"));
        }
        Ok(trace)
    }

    /// Final hidden state `h_T`.
    pub fn forward<'a, I>(&self, sequence: I) -> Result<Array1<f64>>
    where
        I: IntoIterator<Item = ArrayView1<'a, f64>>,
    {
        Ok(self.forward_trace(sequence)?.final_hidden().clone())
    }

    /// Backpropagation through time from a gradient on `h_T`.
    /// Returns per-step input gradients and the parameter gradient.
    pub fn backward(&self, trace: &LstmTrace, d_h_final: ArrayView1<f64>) -> Result<(Vec<Array1<f64>>, LstmCell)> {
        let mut grads = self.zeros_like();
        let dxs = self.backward_into(trace, d_h_final, &mut grads)?;
        Ok((dxs, grads))
    }

    /// Like [`LstmCell::backward`] but adds the parameter gradient into `grads`.
    pub fn backward_into(
        &self,
        trace: &LstmTrace,
        d_h_final: ArrayView1<f64>,
        grads: &mut LstmCell,
    ) -> Result<Vec<Array1<f64>>> {
        let h_dim = self.hidden_dim();
        ensure_dim("lstm hidden grad", h_dim, d_h_final.len())?;
        ensure_dim("lstm grad buffer", self.bias.len(), grads.bias.len())?;
        let steps = trace.inputs.len();
        let mut dxs = vec![Array1::zeros(0); steps];
        let mut dh = d_h_final.to_owned();
        let mut dc: Array1<f64> = Array1::zeros(h_dim);
        let mut dz = Array1::zeros(4 * h_dim);

        for t in (0..steps).rev() {
            let gates = &trace.gates[t];
            let c = &trace.cells[t + 1];
            let c_prev = &trace.cells[t];
            for k in 0..h_dim {
                let i = gates[k];
                let f = gates[h_dim + k];
                let g = gates[2 * h_dim + k];
                let o = gates[3 * h_dim + k];
                let tc = c[k].tanh();
                let dck = dc[k] + dh[k] * o * (1.0 - tc * tc);
                dz[k] = dck * g * i * (1.0 - i);
                dz[h_dim + k] = dck * c_prev[k] * f * (1.0 - f);
                dz[2 * h_dim + k] = dck * i * (1.0 - g * g);
                dz[3 * h_dim + k] = dh[k] * tc * o * (1.0 - o);
                dc[k] = dck * f;
            }
            let x = &trace.inputs[t];
            let h_prev = &trace.hidden[t];
            let dz_col = dz.view().insert_axis(Axis(1));
            general_mat_mul(1.0, &dz_col, &x.view().insert_axis(Axis(0)), 1.0, &mut grads.w_input);
            general_mat_mul(1.0, &dz_col, &h_prev.view().insert_axis(Axis(0)), 1.0, &mut grads.w_hidden);
            grads.bias += &dz;
            dxs[t] = self.w_input.t().dot(&dz);
            dh = self.w_hidden.t().dot(&dz);
        }
        Ok(dxs)
    }
}

impl Params for LstmCell {
    fn shapes(&self) -> Vec<(String, Vec<usize>)> {
        vec![
            ("w_input".into(), self.w_input.shape().to_vec()),
            ("w_hidden".into(), self.w_hidden.shape().to_vec()),
            ("bias".into(), self.bias.shape().to_vec()),
        ]
    }

    fn slices(&self) -> Vec<&[f64]> {
        vec![
            self.w_input.as_slice().expect("contiguous"),
            self.w_hidden.as_slice().expect("contiguous"),
            self.bias.as_slice().expect("contiguous"),
        ]
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.w_input.as_slice_mut().expect("contiguous"),
            self.w_hidden.as_slice_mut().expect("contiguous"),
            self.bias.as_slice_mut().expect("contiguous"),
        ]
    }
}
