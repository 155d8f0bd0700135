//! Dense ReLU network with softmax cross-entropy and optional unit gates.

use lagrangekit::scalar::Scalar;
use lagrangekit::{Error, Result};
use nalgebra::{DMatrix, DMatrixView, DMatrixViewMut, DVector, DVectorView};
use rand::Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    SoftmaxCrossEntropy,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DenseNetSpec {
    pub layer_widths: Vec<usize>,
    pub activation: Activation,
    pub loss: Loss,
}

impl DenseNetSpec {
    pub fn new(layer_widths: Vec<usize>) -> Result<Self> {
        if layer_widths.len() < 2 {
            return Err(Error::contract("a network needs at least input and output widths"));
        }
        if layer_widths.contains(&0) {
            return Err(Error::contract("layer widths must be at least 1"));
        }
        Ok(Self {
            layer_widths,
            activation: Activation::Relu,
            loss: Loss::SoftmaxCrossEntropy,
        })
    }

    /// 784-64-32-10.
    pub fn scaled_default() -> Self {
        Self::new(vec![784, 64, 32, 10]).expect("valid widths")
    }

    pub fn num_layers(&self) -> usize {
        self.layer_widths.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.layer_widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_widths.last().expect("nonempty")
    }

    /// One gate per input feature and per hidden unit.
    pub fn num_gates(&self) -> usize {
        self.layer_widths[..self.num_layers()].iter().sum()
    }

    /// Offset of layer `l`'s input gates in the concatenated gate vector.
    pub fn gate_offset(&self, l: usize) -> usize {
        self.layer_widths[..l].iter().sum()
    }

    pub fn num_params(&self) -> usize {
        self.layer_widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// `(weight offset, bias offset)` of layer `l` in the flat parameter vector.
    fn offsets(&self, l: usize) -> (usize, usize) {
        let before: usize = self.layer_widths[..=l].windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        let (i, o) = (self.layer_widths[l], self.layer_widths[l + 1]);
        (before, before + i * o)
    }
}

/// Parameters live in one flat vector; layer `l` holds an `in x out` weight
/// block (column-major) followed by its bias.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet<T: Scalar> {
    pub spec: DenseNetSpec,
    pub params: DVector<T>,
}

impl<T: Scalar> DenseNet<T> {
    pub fn zeros(spec: DenseNetSpec) -> Self {
        let n = spec.num_params();
        Self { spec, params: DVector::zeros(n) }
    }

    /// He-normal weights, zero biases.
    pub fn init<R: Rng>(spec: DenseNetSpec, rng: &mut R) -> Self {
        let mut net = Self::zeros(spec);
        for l in 0..net.spec.num_layers() {
            let std = (2.0 / net.spec.layer_widths[l] as f64).sqrt();
            for w in net.weight_mut(l).iter_mut() {
                let z: f64 = rng.sample(StandardNormal);
                *w = T::lit(std * z);
            }
        }
        net
    }

    pub fn from_params(spec: DenseNetSpec, params: DVector<T>) -> Result<Self> {
        if params.len() != spec.num_params() {
            return Err(Error::contract(format!(
                "expected {} parameters, got {}",
                spec.num_params(),
                params.len()
            )));
        }
        Ok(Self { spec, params })
    }

    pub fn weight(&self, l: usize) -> DMatrixView<'_, T> {
        let (w, _) = self.spec.offsets(l);
        let (i, o) = (self.spec.layer_widths[l], self.spec.layer_widths[l + 1]);
        DMatrixView::from_slice(&self.params.as_slice()[w..w + i * o], i, o)
    }

    pub fn weight_mut(&mut self, l: usize) -> DMatrixViewMut<'_, T> {
        let (w, _) = self.spec.offsets(l);
        let (i, o) = (self.spec.layer_widths[l], self.spec.layer_widths[l + 1]);
        DMatrixViewMut::from_slice(&mut self.params.as_mut_slice()[w..w + i * o], i, o)
    }

    pub fn bias(&self, l: usize) -> DVectorView<'_, T> {
        let (_, b) = self.spec.offsets(l);
        let o = self.spec.layer_widths[l + 1];
        DVectorView::from_slice(&self.params.as_slice()[b..b + o], o)
    }
}

/// Gate values for every gated unit and, for training passes, `dz/dlog_alpha`.
#[derive(Debug, Clone, Copy)]
pub struct GateValues<'a, T: Scalar> {
    pub z: &'a DVector<T>,
    pub dz: Option<&'a DVector<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T: Scalar> {
    /// Same layout as [`DenseNet::params`].
    pub params: DVector<T>,
    /// Loss gradient per gate; empty for ungated passes.
    pub log_alpha: DVector<T>,
}

fn scale_columns<T: Scalar>(m: &mut DMatrix<T>, s: &[T]) {
    for (mut col, &k) in m.column_iter_mut().zip(s) {
        col *= k;
    }
}

struct Forward<T: Scalar> {
    /// Gated input to each layer.
    inputs: Vec<DMatrix<T>>,
    /// Same before gating (only kept for gated passes).
    ungated: Vec<DMatrix<T>>,
    logits: DMatrix<T>,
}

fn forward<T: Scalar>(net: &DenseNet<T>, x: &DMatrix<T>, gates: Option<&DVector<T>>) -> Result<Forward<T>> {
    let spec = &net.spec;
    if x.ncols() != spec.input_dim() {
        return Err(Error::contract(format!(
            "batch has {} features, network expects {}",
            x.ncols(),
            spec.input_dim()
        )));
    }
    if let Some(z) = gates {
        if z.len() != spec.num_gates() {
            return Err(Error::contract("gate vector length differs from the gate count"));
        }
    }
    let nl = spec.num_layers();
    let mut inputs = Vec::with_capacity(nl);
    let mut ungated = Vec::new();
    let mut a = x.clone();
    for l in 0..nl {
        if let Some(z) = gates {
            let off = spec.gate_offset(l);
            let raw = a.clone();
            scale_columns(&mut a, &z.as_slice()[off..off + spec.layer_widths[l]]);
            ungated.push(raw);
        }
        let mut next = &a * net.weight(l);
        let b = net.bias(l);
        for (mut col, &bj) in next.column_iter_mut().zip(b.iter()) {
            col.add_scalar_mut(bj);
        }
        if l + 1 < nl {
            next.apply(|v| *v = v.max(T::zero()));
        }
        inputs.push(a);
        a = next;
    }
    Ok(Forward { inputs, ungated, logits: a })
}

/// Mean softmax cross-entropy and its gradient in the logits.
fn softmax_ce<T: Scalar>(logits: &DMatrix<T>, labels: &[u8]) -> Result<(T, DMatrix<T>)> {
    let (b, k) = logits.shape();
    let inv_b = T::one() / T::from_usize_lossy(b);
    let mut loss = T::zero();
    let mut d = DMatrix::zeros(b, k);
    for r in 0..b {
        let y = labels[r] as usize;
        if y >= k {
            return Err(Error::contract(format!("label {y} out of range for {k} classes")));
        }
        let row = logits.row(r);
        let m = row.iter().fold(T::neg_infinity(), |a, &v| a.max(v));
        let sum: T = row.iter().map(|&v| (v - m).exp()).sum();
        let lse = m + sum.ln();
        loss += lse - logits[(r, y)];
        for c in 0..k {
            d[(r, c)] = (logits[(r, c)] - lse).exp() * inv_b;
        }
        d[(r, y)] -= inv_b;
    }
    let loss = loss * inv_b;
    if !loss.is_finite() {
        return Err(Error::evaluation("network loss"));
    }
    Ok((loss, d))
}

/// Mean cross-entropy on `(x, labels)` and analytic gradients for all
/// parameters. `x` is `batch x input_dim`.
pub fn loss_and_gradients<T: Scalar>(
    net: &DenseNet<T>,
    x: &DMatrix<T>,
    labels: &[u8],
    gates: Option<GateValues<'_, T>>,
) -> Result<(T, Gradients<T>)> {
    if x.nrows() == 0 || x.nrows() != labels.len() {
        return Err(Error::contract("batch must be nonempty with one label per row"));
    }
    let spec = &net.spec;
    let fwd = forward(net, x, gates.map(|g| g.z))?;
    let (loss, mut d) = softmax_ce(&fwd.logits, labels)?;
    let mut grad = Gradients {
        params: DVector::zeros(spec.num_params()),
        log_alpha: DVector::zeros(if gates.is_some() { spec.num_gates() } else { 0 }),
    };
    for l in (0..spec.num_layers()).rev() {
        let (wo, bo) = spec.offsets(l);
        let (i, o) = (spec.layer_widths[l], spec.layer_widths[l + 1]);
        let gw = fwd.inputs[l].tr_mul(&d);
        grad.params.as_mut_slice()[wo..wo + i * o].copy_from_slice(gw.as_slice());
        for (j, col) in d.column_iter().enumerate() {
            grad.params[bo + j] = col.sum();
        }
        if l == 0 && gates.is_none() {
            break;
        }
        let mut dh = &d * net.weight(l).transpose();
        if let Some(g) = gates {
            let off = spec.gate_offset(l);
            let raw = &fwd.ungated[l];
            if let Some(dz) = g.dz {
                for u in 0..i {
                    let dzu: T = dh.column(u).dot(&raw.column(u));
                    grad.log_alpha[off + u] = dzu * dz[off + u];
                }
            }
            scale_columns(&mut dh, &g.z.as_slice()[off..off + i]);
        }
        if l == 0 {
            break;
        }
        // ReLU mask from the ungated activation (positive iff pre-activation was).
        let act = if gates.is_some() { &fwd.ungated[l] } else { &fwd.inputs[l] };
        dh.zip_apply(act, |g, a| {
            if a <= T::zero() {
                *g = T::zero();
            }
        });
        d = dh;
    }
    Ok((loss, grad))
}

/// Class scores for each row of `x`.
pub fn logits<T: Scalar>(net: &DenseNet<T>, x: &DMatrix<T>, gates: Option<&DVector<T>>) -> Result<DMatrix<T>> {
    Ok(forward(net, x, gates)?.logits)
}

/// Fraction of rows whose arg-max logit equals the label.
pub fn accuracy<T: Scalar>(net: &DenseNet<T>, x: &DMatrix<T>, labels: &[u8], gates: Option<&DVector<T>>) -> Result<T> {
    let s = logits(net, x, gates)?;
    let correct = (0..s.nrows())
        .filter(|&r| s.row(r).transpose().imax() == labels[r] as usize)
        .count();
    Ok(T::from_usize_lossy(correct) / T::from_usize_lossy(s.nrows().max(1)))
}
