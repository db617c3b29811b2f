use std::collections::BTreeMap;
use std::path::Path as FsPath;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Point, DT, INPUT_LEN, OUTPUT_LEN};
use crate::error::{Error, Result};
use crate::rng::{stream, StreamKind};

/// Flat gradient vector with the same layout as `PredictorWeights::params`.
pub type Gradients = Vec<f64>;

/// Offsets of each tensor inside the flat parameter vector.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Layout {
    pub h: usize,
    pub m1: usize,
    pub m2: usize,
    pub out: usize,
    pub w_ih: usize,
    pub w_hh: usize,
    pub b: usize,
    pub w1: usize,
    pub b1: usize,
    pub w2: usize,
    pub b2: usize,
    pub w3: usize,
    pub b3: usize,
    pub total: usize,
}

impl Layout {
    pub fn new(h: usize, m1: usize, m2: usize, out: usize) -> Self {
        let w_ih = 0;
        let w_hh = w_ih + 4 * h * 2;
        let b = w_hh + 4 * h * h;
        let w1 = b + 4 * h;
        let b1 = w1 + m1 * h;
        let w2 = b1 + m1;
        let b2 = w2 + m2 * m1;
        let w3 = b2 + m2;
        let b3 = w3 + out * m2;
        let total = b3 + out;
        Self { h, m1, m2, out, w_ih, w_hh, b, w1, b1, w2, b2, w3, b3, total }
    }

    fn tensors(&self) -> [(&'static str, usize, Vec<usize>); 9] {
        let (h, m1, m2, o) = (self.h, self.m1, self.m2, self.out);
        [
            ("lstm.w_ih", self.w_ih, vec![4 * h, 2]),
            ("lstm.w_hh", self.w_hh, vec![4 * h, h]),
            ("lstm.b", self.b, vec![4 * h]),
            ("mlp.w1", self.w1, vec![m1, h]),
            ("mlp.b1", self.b1, vec![m1]),
            ("mlp.w2", self.w2, vec![m2, m1]),
            ("mlp.b2", self.b2, vec![m2]),
            ("mlp.w3", self.w3, vec![o, m2]),
            ("mlp.b3", self.b3, vec![o]),
        ]
    }
}

/// LSTM-MLP parameters.
///
/// Gate rows are ordered input, forget, cell, output. Inputs are multiplied
/// by `coord_scale` before entering the network and outputs divided by it.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorWeights {
    pub hidden_dim: usize,
    pub mlp_hidden: [usize; 2],
    pub input_len: usize,
    pub output_len: usize,
    pub dt: f64,
    pub coord_scale: f64,
    pub params: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct WeightsFile {
    hidden_dim: usize,
    mlp_hidden: [usize; 2],
    dt: f64,
    input_len: usize,
    output_len: usize,
    coord_scale: f64,
    tensors: BTreeMap<String, Tensor>,
}

impl PredictorWeights {
    pub fn zeros(hidden_dim: usize, mlp_hidden: [usize; 2], coord_scale: f64) -> Self {
        let layout = Layout::new(hidden_dim, mlp_hidden[0], mlp_hidden[1], 2 * OUTPUT_LEN);
        Self {
            hidden_dim,
            mlp_hidden,
            input_len: INPUT_LEN,
            output_len: OUTPUT_LEN,
            dt: DT,
            coord_scale,
            params: vec![0.0; layout.total],
        }
    }

    /// Random initialisation: uniform `±1/√H` for the LSTM with forget bias
    /// 1, He-uniform for the dense layers.
    pub fn init(hidden_dim: usize, mlp_hidden: [usize; 2], coord_scale: f64, seed: u64) -> Self {
        let mut w = Self::zeros(hidden_dim, mlp_hidden, coord_scale);
        let l = w.layout();
        let mut rng = stream(seed, StreamKind::Training, 0);
        let k = 1.0 / (hidden_dim as f64).sqrt();
        for v in &mut w.params[l.w_ih..l.w1] {
            *v = rng.random_range(-k..k);
        }
        for j in 0..hidden_dim {
            w.params[l.b + hidden_dim + j] = 1.0;
        }
        for j in 0..hidden_dim {
            w.params[l.b + j] = 0.0;
            w.params[l.b + 2 * hidden_dim + j] = 0.0;
            w.params[l.b + 3 * hidden_dim + j] = 0.0;
        }
        let mut dense = |start: usize, len: usize, fan_in: usize| {
            let a = (6.0 / fan_in as f64).sqrt();
            for v in &mut w.params[start..start + len] {
                *v = rng.random_range(-a..a);
            }
        };
        dense(l.w1, l.m1 * l.h, l.h);
        dense(l.w2, l.m2 * l.m1, l.m1);
        dense(l.w3, l.out * l.m2, l.m2);
        w
    }

    pub(crate) fn layout(&self) -> Layout {
        Layout::new(self.hidden_dim, self.mlp_hidden[0], self.mlp_hidden[1], 2 * self.output_len)
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.layout();
        if self.hidden_dim == 0 || self.mlp_hidden.contains(&0) {
            return Err(Error::ShapeMismatch("layer widths must be positive".into()));
        }
        if self.params.len() != l.total {
            return Err(Error::ShapeMismatch(format!("expected {} parameters, found {}", l.total, self.params.len())));
        }
        if self.params.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("non-finite weight".into()));
        }
        if !(self.coord_scale > 0.0) {
            return Err(Error::InvalidConfig("coord_scale must be > 0".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let l = self.layout();
        let tensors = l
            .tensors()
            .into_iter()
            .map(|(name, off, shape)| {
                let n: usize = shape.iter().product();
                (name.to_string(), Tensor { data: self.params[off..off + n].to_vec(), shape })
            })
            .collect();
        let file = WeightsFile {
            hidden_dim: self.hidden_dim,
            mlp_hidden: self.mlp_hidden,
            dt: self.dt,
            input_len: self.input_len,
            output_len: self.output_len,
            coord_scale: self.coord_scale,
            tensors,
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut file: WeightsFile = serde_json::from_str(text)?;
        if file.input_len != INPUT_LEN || file.output_len != OUTPUT_LEN {
            return Err(Error::ShapeMismatch(format!(
                "window lengths {}/{} unsupported, expected {INPUT_LEN}/{OUTPUT_LEN}",
                file.input_len, file.output_len
            )));
        }
        let mut w = Self::zeros(file.hidden_dim, file.mlp_hidden, file.coord_scale);
        w.dt = file.dt;
        for (name, off, shape) in w.layout().tensors() {
            let t = file
                .tensors
                .remove(name)
                .ok_or_else(|| Error::ShapeMismatch(format!("missing tensor {name}")))?;
            if t.shape != shape || t.data.len() != shape.iter().product::<usize>() {
                return Err(Error::ShapeMismatch(format!("{name}: expected {shape:?}, found {:?}", t.shape)));
            }
            w.params[off..off + t.data.len()].copy_from_slice(&t.data);
        }
        w.validate()?;
        Ok(w)
    }

    pub fn load(path: impl AsRef<FsPath>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// The weights shipped with the crate, trained on the synthetic
    /// linear, turning and sinusoidal dataset.
    pub fn default_trained() -> Self {
        Self::from_json(include_str!("../../assets/predictor.json")).expect("bundled weights are valid")
    }

    pub fn save(&self, path: impl AsRef<FsPath>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Intermediate values of one forward pass, kept for backpropagation.
#[derive(Debug, Clone, Default)]
pub(crate) struct Tape {
    x: Vec<Point>,
    /// Gate activations per step, `[i | f | g | o]`, each `H` long.
    gates: Vec<Vec<f64>>,
    /// Cell and hidden states; index 0 is the zero initial state.
    c: Vec<Vec<f64>>,
    h: Vec<Vec<f64>>,
    mask: Option<Vec<f64>>,
    u: Vec<f64>,
    z1: Vec<f64>,
    r1: Vec<f64>,
    z2: Vec<f64>,
    r2: Vec<f64>,
    pub y: Vec<f64>,
}

fn dense(w: &[f64], b: &[f64], x: &[f64], out: &mut Vec<f64>) {
    let n_in = x.len();
    out.clear();
    out.extend(b.iter().enumerate().map(|(j, bj)| {
        let row = &w[j * n_in..(j + 1) * n_in];
        bj + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
    }));
}

/// Forward pass on an already scaled input. `mask` multiplies the final
/// hidden state (dropout).
pub(crate) fn forward_tape(w: &PredictorWeights, x: &[Point], mask: Option<&[f64]>, tape: &mut Tape) {
    let l = w.layout();
    let p = &w.params;
    let h = l.h;
    let t_len = x.len();
    tape.x.clear();
    tape.x.extend_from_slice(x);
    tape.gates.resize(t_len, Vec::new());
    tape.c.resize(t_len + 1, Vec::new());
    tape.h.resize(t_len + 1, Vec::new());
    tape.c[0].clear();
    tape.c[0].resize(h, 0.0);
    tape.h[0].clear();
    tape.h[0].resize(h, 0.0);
    let mut a = vec![0.0; 4 * h];
    for t in 0..t_len {
        let hp = &tape.h[t];
        for (j, aj) in a.iter_mut().enumerate() {
            let wi = &p[l.w_ih + 2 * j..l.w_ih + 2 * j + 2];
            let wh = &p[l.w_hh + h * j..l.w_hh + h * (j + 1)];
            *aj = p[l.b + j] + wi[0] * x[t][0] + wi[1] * x[t][1] + wh.iter().zip(hp).map(|(u, v)| u * v).sum::<f64>();
        }
        let g = &mut tape.gates[t];
        g.clear();
        g.extend(a[..h].iter().map(|v| sigmoid(*v)));
        g.extend(a[h..2 * h].iter().map(|v| sigmoid(*v)));
        g.extend(a[2 * h..3 * h].iter().map(|v| v.tanh()));
        g.extend(a[3 * h..].iter().map(|v| sigmoid(*v)));
        let (cp, _) = tape.c.split_at_mut(t + 1);
        let cprev = &cp[t];
        let cn: Vec<f64> = (0..h).map(|k| g[h + k] * cprev[k] + g[k] * g[2 * h + k]).collect();
        let hn: Vec<f64> = (0..h).map(|k| g[3 * h + k] * cn[k].tanh()).collect();
        tape.c[t + 1] = cn;
        tape.h[t + 1] = hn;
    }
    tape.u.clear();
    tape.u.extend_from_slice(&tape.h[t_len]);
    tape.mask = mask.map(|m| m.to_vec());
    if let Some(m) = mask {
        for (u, m) in tape.u.iter_mut().zip(m) {
            *u *= m;
        }
    }
    dense(&p[l.w1..l.b1], &p[l.b1..l.w2], &tape.u, &mut tape.z1);
    tape.r1.clear();
    tape.r1.extend(tape.z1.iter().map(|v| v.max(0.0)));
    dense(&p[l.w2..l.b2], &p[l.b2..l.w3], &tape.r1, &mut tape.z2);
    tape.r2.clear();
    tape.r2.extend(tape.z2.iter().map(|v| v.max(0.0)));
    dense(&p[l.w3..l.b3], &p[l.b3..l.total], &tape.r2, &mut tape.y);
}

/// Accumulates into `grad` the gradient of a loss whose derivative with
/// respect to the network output is `dy`.
pub(crate) fn backward(w: &PredictorWeights, tape: &Tape, dy: &[f64], grad: &mut [f64]) {
    let l = w.layout();
    let p = &w.params;
    let h = l.h;

    // dense layers, output to input
    let back_dense = |w_off: usize, b_off: usize, x: &[f64], dz: &[f64], grad: &mut [f64]| -> Vec<f64> {
        let n_in = x.len();
        let mut dx = vec![0.0; n_in];
        for (j, dzj) in dz.iter().enumerate() {
            if *dzj == 0.0 {
                continue;
            }
            grad[b_off + j] += dzj;
            let row = w_off + j * n_in;
            for k in 0..n_in {
                grad[row + k] += dzj * x[k];
                dx[k] += dzj * p[row + k];
            }
        }
        dx
    };
    let dr2 = back_dense(l.w3, l.b3, &tape.r2, dy, grad);
    let dz2: Vec<f64> = dr2.iter().zip(&tape.z2).map(|(d, z)| if *z > 0.0 { *d } else { 0.0 }).collect();
    let dr1 = back_dense(l.w2, l.b2, &tape.r1, &dz2, grad);
    let dz1: Vec<f64> = dr1.iter().zip(&tape.z1).map(|(d, z)| if *z > 0.0 { *d } else { 0.0 }).collect();
    let mut dh = back_dense(l.w1, l.b1, &tape.u, &dz1, grad);
    if let Some(m) = &tape.mask {
        for (d, m) in dh.iter_mut().zip(m) {
            *d *= m;
        }
    }

    let mut dc = vec![0.0; h];
    let mut da = vec![0.0; 4 * h];
    for t in (0..tape.x.len()).rev() {
        let g = &tape.gates[t];
        let (c, cprev, hprev) = (&tape.c[t + 1], &tape.c[t], &tape.h[t]);
        for k in 0..h {
            let (i, f, gg, o) = (g[k], g[h + k], g[2 * h + k], g[3 * h + k]);
            let tc = c[k].tanh();
            let d_o = dh[k] * tc;
            dc[k] += dh[k] * o * (1.0 - tc * tc);
            da[k] = dc[k] * gg * i * (1.0 - i);
            da[h + k] = dc[k] * cprev[k] * f * (1.0 - f);
            da[2 * h + k] = dc[k] * i * (1.0 - gg * gg);
            da[3 * h + k] = d_o * o * (1.0 - o);
            dc[k] *= f;
        }
        let x = tape.x[t];
        dh.iter_mut().for_each(|v| *v = 0.0);
        for (j, daj) in da.iter().enumerate() {
            grad[l.b + j] += daj;
            grad[l.w_ih + 2 * j] += daj * x[0];
            grad[l.w_ih + 2 * j + 1] += daj * x[1];
            let row = l.w_hh + h * j;
            for k in 0..h {
                grad[row + k] += daj * hprev[k];
                dh[k] += daj * p[row + k];
            }
        }
    }
}

/// Predicts `OUTPUT_LEN` points from an origin-normalised window of
/// `INPUT_LEN` points, without dropout.
pub fn lstm_forward(w: &PredictorWeights, input: &[Point]) -> Result<Vec<Point>> {
    if input.len() != w.input_len {
        return Err(Error::ShapeMismatch(format!("expected {} input points, got {}", w.input_len, input.len())));
    }
    if w.params.len() != w.layout().total {
        return Err(Error::ShapeMismatch("parameter vector does not match layer sizes".into()));
    }
    let s = w.coord_scale;
    let x: Vec<Point> = input.iter().map(|p| [p[0] * s, p[1] * s]).collect();
    let mut tape = Tape::default();
    forward_tape(w, &x, None, &mut tape);
    Ok(tape.y.chunks(2).map(|c| [c[0] / s, c[1] / s]).collect())
}
