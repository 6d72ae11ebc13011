//! Feedforward networks with exact differentiation services.
//!
//! Three services back the learning method:
//!
//! * plain forward evaluation,
//! * forward-mode tangent propagation (Jacobian–vector products, and the full
//!   input Jacobian by seeding basis tangents),
//! * reverse-mode parameter gradients, includingreverse-over-forward when the
//!   loss consumes directional derivatives. This is what makes the residual
//!   term exactly differentiable: its mixed second-order terms fall out of
//!   backpropagating through the tangent channel.
//!
//! Hidden layers use `tanh`; the output layer is linear. `tanh` is smooth, so
//! the Jacobian itself stays differentiable, which a piecewise-linear
//! activation would break.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::mat::{gemm_acc, spectral_norm, Mat};
use crate::math;
use crate::rng;

/// Hidden-layer activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
}

impl Activation {
    pub fn tag(&self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
        }
    }
}

/// A multilayer perceptron: sizes `[n_in, h_1, …, h_L, n_out]`, weights
/// stored row-major as `(out × in)` per layer, biases per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layer_sizes: Vec<usize>,
    pub weights: Vec<Mat>,
    pub biases: Vec<Vec<f64>>,
    pub activation: Activation,
}

/// Gradient of a scalar loss with respect to every parameter, flattened in
/// layer order (weights row-major, then biases, per layer).
#[derive(Debug, Clone, PartialEq)]
pub struct FlatGradient {
    pub values: Vec<f64>,
}

impl FlatGradient {
    pub fn zeros(n: usize) -> Self {
        FlatGradient { values: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// self += other
    pub fn add_assign(&mut self, other: &FlatGradient) {
        assert_eq!(self.values.len(), other.values.len());
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
    }
}

/// Stored intermediates of a batched forward pass.
///
/// `h[0]` is the input block, `h[1..=L]` the hidden post-activations and
/// `h[L+1]` the linear output. When tangents are propagated, `ta[l]` holds
/// the pre-activation tangent of layer `l` (`ta[0]` is the seeded input
/// tangent, `ta[L+1]` the output tangent).
pub struct BatchTrace {
    h: Vec<Mat>,
    ta: Option<Vec<Mat>>,
}

impl BatchTrace {
    pub fn output(&self) -> &Mat {
        self.h.last().unwrap()
    }

    pub fn output_tangent(&self) -> Option<&Mat> {
        self.ta.as_ref().map(|t| t.last().unwrap())
    }
}

/// A batch loss expressed on network outputs (and, when tangents were seeded,
/// on the output directional derivatives). `evaluate` returns the scalar loss
/// and fills the adjoints `∂loss/∂y` and `∂loss/∂u`.
pub trait BatchObjective {
    fn evaluate(&mut self, y: &Mat, u: Option<&Mat>, dy: &mut Mat, du: Option<&mut Mat>) -> f64;
}

impl Mlp {
    /// Glorot-uniform weights (`±√(6/(fan_in+fan_out))`), zero biases,
    /// drawn from the seeded stream in layer order.
    pub fn init(layer_sizes: &[usize], seed: u64) -> Result<Mlp> {
        if layer_sizes.len() < 2 {
            return Err(Error::InvalidArgument(
                "a network needs at least input and output layers".into(),
            ));
        }
        if layer_sizes.iter().any(|&s| s == 0) {
            return Err(Error::InvalidArgument("layer sizes must be positive".into()));
        }
        let mut r = rng::seeded(seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let scale = math::sqrt(6.0 / (fan_in + fan_out) as f64);
            let mut m = Mat::zeros(fan_out, fan_in);
            for v in m.data_mut() {
                *v = rng::uniform(&mut r, -scale, scale);
            }
            weights.push(m);
            biases.push(vec![0.0; fan_out]);
        }
        Ok(Mlp { layer_sizes: layer_sizes.to_vec(), weights, biases, activation: Activation::Tanh })
    }

    pub fn n_in(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn n_out(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    /// Number of hidden layers.
    pub fn n_hidden(&self) -> usize {
        self.layer_sizes.len() - 2
    }

    pub fn n_params(&self) -> usize {
        self.weights.iter().map(|w| w.rows() * w.cols()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    /// Flat parameter vector in gradient layout.
    pub fn params_to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.data());
            out.extend_from_slice(b);
        }
        out
    }

    pub fn set_from_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.n_params());
        let mut off = 0;
        for (w, b) in self.weights.iter_mut().zip(&mut self.biases) {
            let wl = w.rows() * w.cols();
            w.data_mut().copy_from_slice(&flat[off..off + wl]);
            off += wl;
            let bl = b.len();
            b.copy_from_slice(&flat[off..off + bl]);
            off += bl;
        }
    }

    /// Visit every parameter mutably in flat order.
    pub fn visit_params_mut(&mut self, mut f: impl FnMut(usize, &mut f64)) {
        let mut idx = 0;
        for (w, b) in self.weights.iter_mut().zip(&mut self.biases) {
            for v in w.data_mut() {
                f(idx, v);
                idx += 1;
            }
            for v in b.iter_mut() {
                f(idx, v);
                idx += 1;
            }
        }
    }

    /// `true` for flat indices that are weights (not biases). Used by
    /// decoupled weight decay.
    pub fn weight_mask(&self) -> Vec<bool> {
        let mut mask = Vec::with_capacity(self.n_params());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            mask.extend(core::iter::repeat(true).take(w.rows() * w.cols()));
            mask.extend(core::iter::repeat(false).take(b.len()));
        }
        mask
    }

    /// FNV-1a over the parameter bit patterns, in flat order.
    pub fn checksum(&self) -> u64 {
        let mut hash: u64 = 0xcbf29ce484222325;
        let mut eat = |x: f64| {
            for byte in x.to_bits().to_le_bytes() {
                hash ^= byte as u64;
                hash = hash.wrapping_mul(0x100000001b3);
            }
        };
        for (w, b) in self.weights.iter().zip(&self.biases) {
            w.data().iter().for_each(|&x| eat(x));
            b.iter().for_each(|&x| eat(x));
        }
        hash
    }

    /// Evaluate the network at a single point.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_in() {
            return Err(Error::DimensionMismatch(format!(
                "forward: input has length {}, network expects {}",
                x.len(),
                self.n_in()
            )));
        }
        let n_layers = self.weights.len();
        let mut cur = x.to_vec();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut next = b.clone();
            for (o, no) in next.iter_mut().enumerate() {
                *no += math::dot(w.row(o), &cur);
            }
            if l + 1 < n_layers {
                next.iter_mut().for_each(|v| *v = math::tanh(*v));
            }
            cur = next;
        }
        Ok(cur)
    }

    /// Batched forward pass storing all intermediates.
    pub fn forward_trace(&self, x: &Mat) -> BatchTrace {
        self.trace_impl(x, None)
    }

    /// Batched forward pass that also propagates one tangent per row,
    /// producing the directional derivatives `J(x_i)·v_i` alongside outputs.
    pub fn forward_trace_dual(&self, x: &Mat, v: &Mat) -> BatchTrace {
        assert_eq!(x.rows(), v.rows(), "one tangent row per input row");
        assert_eq!(v.cols(), self.n_in(), "tangent dimension");
        self.trace_impl(x, Some(v))
    }

    fn trace_impl(&self, x: &Mat, v: Option<&Mat>) -> BatchTrace {
        assert_eq!(x.cols(), self.n_in(), "input dimension");
        let rows = x.rows();
        let n_layers = self.weights.len();
        let mut h: Vec<Mat> = Vec::with_capacity(n_layers + 1);
        h.push(x.clone());
        let mut ta: Option<Vec<Mat>> = v.map(|v| {
            let mut t = Vec::with_capacity(n_layers + 1);
            t.push(v.clone());
            t
        });

        // Scratch holding the post-activation tangent of the previous layer.
        let mut th_prev: Option<Mat> = v.map(|v| v.clone());

        for l in 0..n_layers {
            let w = &self.weights[l];
            let wt = w.transpose();
            let out_dim = w.rows();
            let last = l + 1 == n_layers;

            let mut a = Mat::zeros(rows, out_dim);
            for r in 0..rows {
                a.row_mut(r).copy_from_slice(&self.biases[l]);
            }
            gemm_acc(&mut a, &h[l], &wt);

            if let (Some(ta_vec), Some(thp)) = (ta.as_mut(), th_prev.as_ref()) {
                let mut t = Mat::zeros(rows, out_dim);
                gemm_acc(&mut t, thp, &wt);
                ta_vec.push(t);
            }

            if last {
                h.push(a);
            } else {
                // h = tanh(a); next layer's tangent input is (1−h²)⊙ta.
                let mut hm = a;
                hm.data_mut().iter_mut().for_each(|x| *x = math::tanh(*x));
                if let (Some(ta_vec), Some(thp)) = (ta.as_mut(), th_prev.as_mut()) {
                    let tal = ta_vec.last().unwrap();
                    let mut th = Mat::zeros(rows, out_dim);
                    for ((t, &a_t), &hv) in
                        th.data_mut().iter_mut().zip(tal.data()).zip(hm.data())
                    {
                        *t = (1.0 - hv * hv) * a_t;
                    }
                    *thp = th;
                }
                h.push(hm);
            }
        }
        BatchTrace { h, ta }
    }

    /// Reverse-mode accumulation through a stored trace.
    ///
    /// `d_out` is `∂loss/∂output`; `d_tan`, when the trace carries tangents,
    /// is `∂loss/∂(output tangent)`. Parameter gradients are accumulated into
    /// `grad` (flat layout).
    pub fn backward(
        &self,
        trace: &BatchTrace,
        d_out: &Mat,
        d_tan: Option<&Mat>,
        grad: &mut FlatGradient,
    ) {
        assert_eq!(grad.len(), self.n_params());
        assert_eq!(d_out.rows(), trace.h[0].rows());
        assert_eq!(d_out.cols(), self.n_out());
        assert_eq!(d_tan.is_some(), trace.ta.is_some(), "tangent adjoints iff tangents traced");

        let rows = d_out.rows();
        let n_layers = self.weights.len();
        let offsets = self.layer_offsets();

        let mut dh = d_out.clone();
        let mut dth = d_tan.cloned();

        for l in (0..n_layers).rev() {
            let w = &self.weights[l];
            let (in_dim, out_dim) = (w.cols(), w.rows());
            let inp = &trace.h[l];

            // Adjoints of the affine pre-activation (value and tangent
            // channels). The output layer is linear, so they pass through;
            // a hidden layer folds in the tanh node
            //   h = tanh(a), th = (1−h²)·ta
            // whose adjoints are
            //   dA  = (1−h²)·dH − 2h(1−h²)·ta·dTH,   dTA = (1−h²)·dTH.
            let (da, dta) = if l + 1 == n_layers {
                (dh, dth.take())
            } else {
                let hl = &trace.h[l + 1];
                let mut da = dh;
                let mut dta = None;
                if let Some(ta_vec) = trace.ta.as_ref() {
                    let tal = ta_vec[l + 1].data();
                    let hls = hl.data();
                    let mut dth_m = dth.take().expect("dual trace requires tangent adjoints");
                    let das = da.data_mut();
                    let dths = dth_m.data_mut();
                    for i in 0..das.len() {
                        let hv = hls[i];
                        let s = 1.0 - hv * hv;
                        das[i] = s * das[i] - 2.0 * hv * s * tal[i] * dths[i];
                        dths[i] *= s;
                    }
                    dta = Some(dth_m);
                } else {
                    for (d, &hv) in da.data_mut().iter_mut().zip(hl.data()) {
                        *d *= 1.0 - hv * hv;
                    }
                }
                (da, dta)
            };

            // Weight and bias gradients.
            let (w_off, b_off) = offsets[l];
            {
                let gw = &mut grad.values[w_off..w_off + out_dim * in_dim];
                gemm_tn_acc_slice(gw, out_dim, in_dim, &da, inp);
                if let Some(dta_m) = &dta {
                    // The tangent path consumed the previous layer's
                    // post-activation tangent; rebuild it.
                    let th_prev = self.post_activation_tangent(trace, l);
                    gemm_tn_acc_slice(gw, out_dim, in_dim, dta_m, &th_prev);
                }
            }
            {
                let gb = &mut grad.values[b_off..b_off + out_dim];
                for r in 0..rows {
                    for (g, &d) in gb.iter_mut().zip(da.row(r)) {
                        *g += d;
                    }
                }
            }

            // Propagate adjoints to the previous layer; input adjoints are
            // discarded.
            if l > 0 {
                let mut dh_prev = Mat::zeros(rows, in_dim);
                gemm_acc(&mut dh_prev, &da, w);
                dh = dh_prev;
                if let Some(dta_m) = dta {
                    let mut dth_prev = Mat::zeros(rows, in_dim);
                    gemm_acc(&mut dth_prev, &dta_m, w);
                    dth = Some(dth_prev);
                }
            } else {
                dh = Mat::zeros(0, 0);
                dth = None;
            }
        }
        let _ = dh;
    }

    /// Post-activation tangent feeding layer `l` (`l = 0` is the seeded
    /// input tangent).
    fn post_activation_tangent(&self, trace: &BatchTrace, l: usize) -> Mat {
        let ta_vec = trace.ta.as_ref().expect("trace has no tangents");
        if l == 0 {
            return ta_vec[0].clone();
        }
        let hl = &trace.h[l];
        let tal = &ta_vec[l];
        let mut th = Mat::zeros(tal.rows(), tal.cols());
        for ((t, &a_t), &hv) in th.data_mut().iter_mut().zip(tal.data()).zip(hl.data()) {
            *t = (1.0 - hv * hv) * a_t;
        }
        th
    }

    fn layer_offsets(&self) -> Vec<(usize, usize)> {
        let mut offsets = Vec::with_capacity(self.weights.len());
        let mut off = 0;
        for (w, b) in self.weights.iter().zip(&self.biases) {
            let w_off = off;
            off += w.rows() * w.cols();
            let b_off = off;
            off += b.len();
            offsets.push((w_off, b_off));
        }
        offsets
    }

    /// Value and directional derivative `(f(x), J(x)·v)` at one point.
    pub fn jvp(&self, x: &[f64], v: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if x.len() != self.n_in() || v.len() != self.n_in() {
            return Err(Error::DimensionMismatch(format!(
                "jvp: got point/tangent of lengths {}/{}, expected {}",
                x.len(),
                v.len(),
                self.n_in()
            )));
        }
        let xm = Mat::from_vec(1, x.len(), x.to_vec());
        let vm = Mat::from_vec(1, v.len(), v.to_vec());
        let trace = self.forward_trace_dual(&xm, &vm);
        Ok((trace.output().row(0).to_vec(), trace.output_tangent().unwrap().row(0).to_vec()))
    }

    /// Full Jacobian `∂f/∂x` at `x` via one batched tangent pass seeded with
    /// the identity.
    pub fn input_jacobian(&self, x: &[f64]) -> Result<Mat> {
        if x.len() != self.n_in() {
            return Err(Error::DimensionMismatch(format!(
                "input_jacobian: input has length {}, network expects {}",
                x.len(),
                self.n_in()
            )));
        }
        let n = self.n_in();
        let mut xs = Mat::zeros(n, n);
        let mut vs = Mat::zeros(n, n);
        for i in 0..n {
            xs.row_mut(i).copy_from_slice(x);
            vs.set(i, i, 1.0);
        }
        let trace = self.forward_trace_dual(&xs, &vs);
        let u = trace.output_tangent().unwrap();
        let mut j = Mat::zeros(self.n_out(), n);
        for c in 0..n {
            for r in 0..self.n_out() {
                j.set(r, c, u.get(c, r));
            }
        }
        Ok(j)
    }

    /// Scalar-loss gradient with respect to every parameter.
    ///
    /// The objective sees the batched outputs (and directional derivatives
    /// when `tangents` is given) and returns the loss plus its output
    /// adjoints; the engine completes the reverse pass.
    pub fn loss_gradient(
        &self,
        x: &Mat,
        tangents: Option<&Mat>,
        objective: &mut dyn BatchObjective,
    ) -> Result<(f64, FlatGradient)> {
        let trace = match tangents {
            Some(v) => self.forward_trace_dual(x, v),
            None => self.forward_trace(x),
        };
        let mut dy = Mat::zeros(x.rows(), self.n_out());
        let mut du = tangents.map(|_| Mat::zeros(x.rows(), self.n_out()));
        let loss = objective.evaluate(trace.output(), trace.output_tangent(), &mut dy, du.as_mut());
        if !loss.is_finite() {
            return Err(Error::InvalidArgument(format!("loss is not finite: {loss}")));
        }
        let mut grad = FlatGradient::zeros(self.n_params());
        self.backward(&trace, &dy, du.as_ref(), &mut grad);
        Ok((loss, grad))
    }

    /// Certified Lipschitz upper bound: the product of per-layer spectral
    /// norms (power iteration), times the unit activation constant.
    pub fn lipschitz_upper_bound(&self) -> f64 {
        self.weights.iter().map(|w| spectral_norm(w, 100, 1e-9)).product()
    }
}

/// c (m×n, flat) += aᵀ·b with a: k×m, b: k×n.
fn gemm_tn_acc_slice(c: &mut [f64], m: usize, n: usize, a: &Mat, b: &Mat) {
    assert_eq!(a.rows(), b.rows());
    assert_eq!(a.cols(), m);
    assert_eq!(b.cols(), n);
    assert_eq!(c.len(), m * n);
    for r in 0..a.rows() {
        let arow = a.row(r);
        let brow = b.row(r);
        for (i, &ari) in arow.iter().enumerate() {
            let crow = &mut c[i * n..(i + 1) * n];
            for (cv, &bv) in crow.iter_mut().zip(brow) {
                *cv += ari * bv;
            }
        }
    }
}
