//! LSTM and Elman (SimpleRNN) layers with hand-written backward passes.
//!
//! Inputs are row vectors: a sequence is a `T × d_in` matrix and weights
//! map `d_in → units` by right multiplication. LSTM gate blocks are laid out
//! as `[input, forget, output, candidate]` along the `4·units` axis.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Uniform in `±sqrt(6 / (fan_in + fan_out))`.
pub(crate) fn glorot<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Array2<f64> {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || rng.gen_range(-bound..=bound))
}

#[derive(Clone, Debug, PartialEq)]
pub struct LstmParams {
    /// `d_in × 4h`
    pub w_input: Array2<f64>,
    /// `h × 4h`
    pub w_hidden: Array2<f64>,
    /// `4h`
    pub bias: Array1<f64>,
}

/// Activations kept for the backward pass.
#[derive(Clone, Debug)]
pub struct LstmCache {
    /// `T × 4h`, post-nonlinearity `[i, f, o, g]`.
    gates: Array2<f64>,
    /// `T × h`
    cells: Array2<f64>,
    tanh_cells: Array2<f64>,
    /// `T × h`, the layer output.
    pub hidden: Array2<f64>,
}

impl LstmParams {
    pub fn zeros(input: usize, units: usize) -> Self {
        LstmParams {
            w_input: Array2::zeros((input, 4 * units)),
            w_hidden: Array2::zeros((units, 4 * units)),
            bias: Array1::zeros(4 * units),
        }
    }

    /// Glorot-uniform weights, zero biases except +1 on the forget gate.
    pub fn init<R: Rng>(rng: &mut R, input: usize, units: usize) -> Self {
        let mut bias = Array1::zeros(4 * units);
        bias.slice_mut(s![units..2 * units]).fill(1.0);
        LstmParams {
            w_input: glorot(rng, input, 4 * units),
            w_hidden: glorot(rng, units, 4 * units),
            bias,
        }
    }

    pub fn units(&self) -> usize {
        self.w_hidden.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.w_input.nrows()
    }

    /// One step from `(h_prev, c_prev)`; returns `(h, c)`.
    pub fn step(&self, x: ArrayView1<f64>, h_prev: ArrayView1<f64>, c_prev: ArrayView1<f64>) -> (Array1<f64>, Array1<f64>) {
        let n = self.units();
        let z = x.dot(&self.w_input) + h_prev.dot(&self.w_hidden) + &self.bias;
        let mut h = Array1::zeros(n);
        let mut c = Array1::zeros(n);
        for j in 0..n {
            let i = sigmoid(z[j]);
            let f = sigmoid(z[n + j]);
            let o = sigmoid(z[2 * n + j]);
            let g = z[3 * n + j].tanh();
            c[j] = f * c_prev[j] + i * g;
            h[j] = o * c[j].tanh();
        }
        (h, c)
    }

    pub fn forward(&self, inputs: ArrayView2<f64>) -> LstmCache {
        let n = self.units();
        let len = inputs.nrows();
        let mut gates = inputs.dot(&self.w_input) + &self.bias;
        let mut cells = Array2::zeros((len, n));
        let mut tanh_cells = Array2::zeros((len, n));
        let mut hidden = Array2::zeros((len, n));
        let mut h_prev = Array1::zeros(n);
        let mut c_prev = Array1::<f64>::zeros(n);
        for t in 0..len {
            let recurrent = h_prev.dot(&self.w_hidden);
            let mut z = gates.row_mut(t);
            z += &recurrent;
            for j in 0..n {
                let i = sigmoid(z[j]);
                let f = sigmoid(z[n + j]);
                let o = sigmoid(z[2 * n + j]);
                let g = z[3 * n + j].tanh();
                z[j] = i;
                z[n + j] = f;
                z[2 * n + j] = o;
                z[3 * n + j] = g;
                let c = f * c_prev[j] + i * g;
                let tc = c.tanh();
                cells[[t, j]] = c;
                tanh_cells[[t, j]] = tc;
                hidden[[t, j]] = o * tc;
            }
            h_prev.assign(&hidden.row(t));
            c_prev.assign(&cells.row(t));
        }
        LstmCache {
            gates,
            cells,
            tanh_cells,
            hidden,
        }
    }

    /// Accumulates parameter gradients into `grad` and returns `∂L/∂inputs`.
    pub fn backward(
        &self,
        inputs: ArrayView2<f64>,
        cache: &LstmCache,
        d_hidden: ArrayView2<f64>,
        grad: &mut LstmParams,
    ) -> Array2<f64> {
        let n = self.units();
        let len = inputs.nrows();
        let mut dz = Array2::zeros((len, 4 * n));
        let mut dh_next = Array1::<f64>::zeros(n);
        let mut dc_next = Array1::<f64>::zeros(n);
        for t in (0..len).rev() {
            let gates = cache.gates.row(t);
            {
                let mut dz_t = dz.row_mut(t);
                for j in 0..n {
                    let (i, f, o, g) = (gates[j], gates[n + j], gates[2 * n + j], gates[3 * n + j]);
                    let tc = cache.tanh_cells[[t, j]];
                    let c_prev = if t > 0 { cache.cells[[t - 1, j]] } else { 0.0 };
                    let dh = d_hidden[[t, j]] + dh_next[j];
                    let d_o = dh * tc;
                    let dc = dh * o * (1.0 - tc * tc) + dc_next[j];
                    dz_t[j] = dc * g * i * (1.0 - i);
                    dz_t[n + j] = dc * c_prev * f * (1.0 - f);
                    dz_t[2 * n + j] = d_o * o * (1.0 - o);
                    dz_t[3 * n + j] = dc * i * (1.0 - g * g);
                    dc_next[j] = dc * f;
                }
            }
            dh_next = self.w_hidden.dot(&dz.row(t));
        }
        if len > 1 {
            let h_prev = cache.hidden.slice(s![..len - 1, ..]);
            grad.w_hidden += &h_prev.t().dot(&dz.slice(s![1.., ..]));
        }
        grad.w_input += &inputs.t().dot(&dz);
        grad.bias += &dz.sum_axis(Axis(0));
        dz.dot(&self.w_input.t())
    }
}

/// Elman recurrence `h_t = tanh(x_t W + h_{t-1} U + b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RnnParams {
    pub w_input: Array2<f64>,
    pub w_hidden: Array2<f64>,
    pub bias: Array1<f64>,
}

impl RnnParams {
    pub fn zeros(input: usize, units: usize) -> Self {
        RnnParams {
            w_input: Array2::zeros((input, units)),
            w_hidden: Array2::zeros((units, units)),
            bias: Array1::zeros(units),
        }
    }

    pub fn init<R: Rng>(rng: &mut R, input: usize, units: usize) -> Self {
        RnnParams {
            w_input: glorot(rng, input, units),
            w_hidden: glorot(rng, units, units),
            bias: Array1::zeros(units),
        }
    }

    pub fn units(&self) -> usize {
        self.w_hidden.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.w_input.nrows()
    }

    /// Returns the `T × h` hidden states.
    pub fn forward(&self, inputs: ArrayView2<f64>) -> Array2<f64> {
        let mut hidden = inputs.dot(&self.w_input) + &self.bias;
        for t in 0..inputs.nrows() {
            if t > 0 {
                let recurrent = hidden.row(t - 1).dot(&self.w_hidden);
                let mut row = hidden.row_mut(t);
                row += &recurrent;
            }
            hidden.row_mut(t).mapv_inplace(f64::tanh);
        }
        hidden
    }

    pub fn backward(
        &self,
        inputs: ArrayView2<f64>,
        hidden: ArrayView2<f64>,
        d_hidden: ArrayView2<f64>,
        grad: &mut RnnParams,
    ) -> Array2<f64> {
        let len = inputs.nrows();
        let n = self.units();
        let mut dz = Array2::zeros((len, n));
        let mut dh_next = Array1::<f64>::zeros(n);
        for t in (0..len).rev() {
            for j in 0..n {
                let h = hidden[[t, j]];
                dz[[t, j]] = (d_hidden[[t, j]] + dh_next[j]) * (1.0 - h * h);
            }
            dh_next = self.w_hidden.dot(&dz.row(t));
        }
        if len > 1 {
            grad.w_hidden += &hidden.slice(s![..len - 1, ..]).t().dot(&dz.slice(s![1.., ..]));
        }
        grad.w_input += &inputs.t().dot(&dz);
        grad.bias += &dz.sum_axis(Axis(0));
        dz.dot(&self.w_input.t())
    }
}

/// Reverses the row order of a matrix.
pub(crate) fn reversed(m: ArrayView2<f64>) -> Array2<f64> {
    m.slice(s![..;-1, ..]).to_owned()
}
