//! A small deterministic permutation-invariant point-cloud model.
//!
//! Per-point trunk MLP, max-pool and mean-pool concatenated, then a head
//! MLP producing either 9 raw orientation entries or 24 flip logits.
//! Gradients are computed by hand-written reverse mode over the fixed
//! layer structure.  The forward pass is bitwise permutation-invariant:
//! mean-pooling sums each feature's values in sorted order, and max-pooling
//! is order-free (gradient ties route to the lowest point index).

mod checkpoint;
mod train;

pub use checkpoint::{sha256_hex, Checkpoint};
pub use train::{make_batch, train, OptState, OptimizerKind, TrainConfig, TrainOutcome, TrainState};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::objectives::{flip_cross_entropy, naive_l2, quotient_l2};
use crate::octa::{Flip, FLIP_COUNT};
use crate::so3::{seeded_rng, Mat3, Rotation};

/// Fewest points a cloud may have to run through the model.
pub const MIN_POINTS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    /// 9 raw entries of an orientation estimate (projected later).
    Orienter,
    /// 24 flip logits.
    Flipper,
}

impl HeadKind {
    pub fn output_dim(self) -> usize {
        match self {
            HeadKind::Orienter => 9,
            HeadKind::Flipper => FLIP_COUNT,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelArch {
    /// Per-point MLP widths.
    pub trunk: Vec<usize>,
    /// Post-pooling MLP widths (excluding the output layer).
    pub head: Vec<usize>,
    pub head_kind: HeadKind,
    pub leaky_slope: f64,
}

impl ModelArch {
    pub fn default_for(head_kind: HeadKind) -> Self {
        ModelArch { trunk: vec![64, 128], head: vec![128], head_kind, leaky_slope: 0.01 }
    }

    /// Pooled feature width: max-pool plus mean-pool of the last trunk layer.
    pub fn pooled_dim(&self) -> usize {
        2 * self.trunk.last().copied().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trunk.is_empty() || self.trunk.iter().any(|&w| w == 0) {
            return Err(Error::Config("model trunk widths must be non-empty and positive".into()));
        }
        if self.head.iter().any(|&w| w == 0) {
            return Err(Error::Config("model head widths must be positive".into()));
        }
        if !(self.leaky_slope.is_finite() && self.leaky_slope >= 0.0 && self.leaky_slope < 1.0) {
            return Err(Error::Config("leaky slope must lie in [0, 1)".into()));
        }
        Ok(())
    }

    /// (rows, cols) of every dense layer, trunk first.
    fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut shapes = Vec::new();
        let mut prev = 3;
        for &w in &self.trunk {
            shapes.push((w, prev));
            prev = w;
        }
        prev = self.pooled_dim();
        for &w in &self.head {
            shapes.push((w, prev));
            prev = w;
        }
        shapes.push((self.head_kind.output_dim(), prev));
        shapes
    }

    fn layer_name(&self, index: usize) -> String {
        if index < self.trunk.len() {
            format!("trunk{index}")
        } else if index < self.trunk.len() + self.head.len() {
            format!("head{}", index - self.trunk.len())
        } else {
            "out".into()
        }
    }

    pub fn param_count(&self) -> usize {
        self.layer_shapes().iter().map(|(r, c)| r * c + r).sum()
    }
}

/// Flat parameter vector interpreted through the arch's layer shapes
/// (row-major weight block, then bias, per layer).
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub arch: ModelArch,
    pub values: Vec<f64>,
}

struct LayerView<'a> {
    w: &'a [f64],
    b: &'a [f64],
    rows: usize,
    cols: usize,
}

impl ModelParams {
    pub fn from_values(arch: ModelArch, values: Vec<f64>) -> Result<Self> {
        arch.validate()?;
        if values.len() != arch.param_count() {
            return Err(Error::Mismatch(format!(
                "parameter vector has {} entries, arch needs {}",
                values.len(),
                arch.param_count()
            )));
        }
        Ok(ModelParams { arch, values })
    }

    fn layer(&self, index: usize) -> LayerView<'_> {
        let shapes = self.arch.layer_shapes();
        let mut offset = 0;
        for (i, &(r, c)) in shapes.iter().enumerate() {
            if i == index {
                return LayerView {
                    w: &self.values[offset..offset + r * c],
                    b: &self.values[offset + r * c..offset + r * c + r],
                    rows: r,
                    cols: c,
                };
            }
            offset += r * c + r;
        }
        unreachable!("layer index out of range")
    }

    fn weight_matrix(&self, index: usize) -> DMatrix<f64> {
        let l = self.layer(index);
        DMatrix::from_row_slice(l.rows, l.cols, l.w)
    }

    /// Materialize every layer once; shared across a whole batch.
    fn layer_mats(&self) -> LayerMats {
        let count = self.arch.layer_shapes().len();
        let mut w = Vec::with_capacity(count);
        let mut b = Vec::with_capacity(count);
        for i in 0..count {
            w.push(self.weight_matrix(i));
            b.push(DVector::from_column_slice(self.layer(i).b));
        }
        LayerMats { w, b }
    }
}

struct LayerMats {
    w: Vec<DMatrix<f64>>,
    b: Vec<DVector<f64>>,
}

/// Weights drawn uniformly with fan-in scaling (bound `sqrt(1 / fan_in)`,
/// so the target standard deviation is `sqrt(1 / (3 fan_in))`); biases zero.
pub fn init_params(arch: &ModelArch, seed: u64) -> Result<ModelParams> {
    arch.validate()?;
    let mut rng = seeded_rng(seed);
    let mut values = Vec::with_capacity(arch.param_count());
    for (rows, cols) in arch.layer_shapes() {
        let bound = (1.0 / cols as f64).sqrt();
        for _ in 0..rows * cols {
            values.push(rng.random_range(-bound..bound));
        }
        values.extend(std::iter::repeat_n(0.0, rows));
    }
    ModelParams::from_values(arch.clone(), values)
}

fn leaky(x: f64, slope: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        slope * x
    }
}

fn leaky_grad(x: f64, slope: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        slope
    }
}

struct Trace {
    /// Input to each trunk layer (the first is the cloud itself).
    trunk_inputs: Vec<DMatrix<f64>>,
    trunk_preacts: Vec<DMatrix<f64>>,
    /// Row index that won each max-pooled feature.
    argmax: Vec<usize>,
    head_inputs: Vec<DVector<f64>>,
    head_preacts: Vec<DVector<f64>>,
    output: Vec<f64>,
}

fn ensure_finite_matrix(m: &DMatrix<f64>, layer: &str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numeric(format!("non-finite activation in layer {layer}")))
    }
}

fn forward_trace(arch: &ModelArch, mats: &LayerMats, cloud: &PointCloud) -> Result<Trace> {
    let n = cloud.len();
    if n < MIN_POINTS {
        return Err(Error::InvalidInput(format!(
            "model input needs at least {MIN_POINTS} points, got {n}"
        )));
    }
    let mut a = DMatrix::from_fn(n, 3, |i, j| cloud.points[i][j]);
    ensure_finite_matrix(&a, "input")?;

    let mut trunk_inputs = Vec::with_capacity(arch.trunk.len());
    let mut trunk_preacts = Vec::with_capacity(arch.trunk.len());
    for li in 0..arch.trunk.len() {
        let rows = mats.b[li].len();
        let mut z = &a * mats.w[li].transpose();
        for i in 0..n {
            for j in 0..rows {
                z[(i, j)] += mats.b[li][j];
            }
        }
        ensure_finite_matrix(&z, &arch.layer_name(li))?;
        trunk_inputs.push(a);
        a = z.map(|x| leaky(x, arch.leaky_slope));
        trunk_preacts.push(z);
    }

    let d = *arch.trunk.last().expect("validated non-empty");
    let mut pooled = DVector::zeros(2 * d);
    let mut argmax = vec![0usize; d];
    let mut column = vec![0.0f64; n];
    for j in 0..d {
        let mut best = f64::NEG_INFINITY;
        let mut best_i = 0;
        for i in 0..n {
            let v = a[(i, j)];
            column[i] = v;
            if v > best {
                best = v;
                best_i = i;
            }
        }
        pooled[j] = best;
        argmax[j] = best_i;
        column.sort_by(f64::total_cmp);
        pooled[d + j] = column.iter().sum::<f64>() / n as f64;
    }

    let mut h = pooled;
    let mut head_inputs = Vec::new();
    let mut head_preacts = Vec::new();
    let head_layer_count = arch.head.len() + 1;
    for k in 0..head_layer_count {
        let li = arch.trunk.len() + k;
        let mut z = &mats.w[li] * &h;
        z += &mats.b[li];
        if !z.iter().all(|x| x.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite activation in layer {}",
                arch.layer_name(li)
            )));
        }
        head_inputs.push(h);
        let is_last = k == head_layer_count - 1;
        h = if is_last { z.clone() } else { z.map(|x| leaky(x, arch.leaky_slope)) };
        head_preacts.push(z);
    }

    Ok(Trace {
        trunk_inputs,
        trunk_preacts,
        argmax,
        head_inputs,
        head_preacts,
        output: h.iter().copied().collect(),
    })
}

/// Raw model output for a cloud: 9 orientation entries or 24 logits.
pub fn forward(params: &ModelParams, cloud: &PointCloud) -> Result<Vec<f64>> {
    Ok(forward_trace(&params.arch, &params.layer_mats(), cloud)?.output)
}

fn accumulate_layer_grad(
    grad: &mut [f64],
    arch: &ModelArch,
    index: usize,
    dw: &DMatrix<f64>,
    db: &DVector<f64>,
) {
    let shapes = arch.layer_shapes();
    let mut offset = 0;
    for (i, &(r, c)) in shapes.iter().enumerate() {
        if i == index {
            for row in 0..r {
                for col in 0..c {
                    grad[offset + row * c + col] += dw[(row, col)];
                }
            }
            for row in 0..r {
                grad[offset + r * c + row] += db[row];
            }
            return;
        }
        offset += r * c + r;
    }
}

fn backward(arch: &ModelArch, mats: &LayerMats, trace: &Trace, dout: &[f64], grad: &mut [f64]) {
    let head_layer_count = arch.head.len() + 1;
    let mut delta = DVector::from_row_slice(dout);

    let mut d_pooled = DVector::zeros(arch.pooled_dim());
    for k in (0..head_layer_count).rev() {
        let li = arch.trunk.len() + k;
        let a_in = &trace.head_inputs[k];
        let dw = &delta * a_in.transpose();
        accumulate_layer_grad(grad, arch, li, &dw, &delta);
        let da = mats.w[li].transpose() * &delta;
        if k > 0 {
            let z = &trace.head_preacts[k - 1];
            delta = DVector::from_fn(da.len(), |i, _| da[i] * leaky_grad(z[i], arch.leaky_slope));
        } else {
            d_pooled = da;
        }
    }

    let d = *arch.trunk.last().expect("validated non-empty");
    let n = trace.trunk_inputs[0].nrows();
    let last_act =
        trace.trunk_preacts.last().expect("non-empty trunk").map(|x| leaky_grad(x, arch.leaky_slope));
    let mut delta_m = DMatrix::zeros(n, d);
    for j in 0..d {
        let mean_share = d_pooled[d + j] / n as f64;
        for i in 0..n {
            let mut g = mean_share;
            if i == trace.argmax[j] {
                g += d_pooled[j];
            }
            delta_m[(i, j)] = g * last_act[(i, j)];
        }
    }

    for li in (0..arch.trunk.len()).rev() {
        let a_in = &trace.trunk_inputs[li];
        let dw = delta_m.transpose() * a_in;
        let db = DVector::from_fn(delta_m.ncols(), |j, _| delta_m.column(j).sum());
        accumulate_layer_grad(grad, arch, li, &dw, &db);
        if li > 0 {
            let da = &delta_m * &mats.w[li];
            let z = &trace.trunk_preacts[li - 1];
            delta_m =
                DMatrix::from_fn(da.nrows(), da.ncols(), |i, j| {
                    da[(i, j)] * leaky_grad(z[(i, j)], arch.leaky_slope)
                });
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegressionObjective {
    /// L2 to the single target rotation.
    Naive,
    /// L2 to the nearest flip-equivalent target.
    Quotient,
}

/// A prepared training batch: inputs with their targets, augmentation
/// already applied.
#[derive(Clone, Debug)]
pub enum Batch {
    Orient { pairs: Vec<(PointCloud, Rotation)>, objective: RegressionObjective },
    Flip { pairs: Vec<(PointCloud, Flip)> },
}

impl Batch {
    pub fn len(&self) -> usize {
        match self {
            Batch::Orient { pairs, .. } => pairs.len(),
            Batch::Flip { pairs } => pairs.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn output_as_matrix(output: &[f64]) -> Mat3 {
    Mat3::new(
        output[0], output[1], output[2],
        output[3], output[4], output[5],
        output[6], output[7], output[8],
    )
}

pub fn output_as_logits(output: &[f64]) -> [f64; FLIP_COUNT] {
    let mut l = [0.0; FLIP_COUNT];
    l.copy_from_slice(output);
    l
}

/// Mean loss over the batch and its gradient with respect to the flat
/// parameter vector.  Examples are processed in parallel; the reduction
/// runs in batch order so the result does not depend on thread count.
pub fn loss_and_grad(params: &ModelParams, batch: &Batch) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::InvalidInput("empty training batch".into()));
    }
    match (batch, params.arch.head_kind) {
        (Batch::Orient { .. }, HeadKind::Orienter) | (Batch::Flip { .. }, HeadKind::Flipper) => {}
        _ => {
            return Err(Error::InvalidInput(
                "batch kind does not match the model head".into(),
            ))
        }
    }

    let arch = &params.arch;
    let mats = params.layer_mats();
    let per_example: Result<Vec<(f64, Vec<f64>)>> = match batch {
        Batch::Orient { pairs, objective } => pairs
            .par_iter()
            .map(|(cloud, r)| {
                let trace = forward_trace(arch, &mats, cloud)?;
                let pred = output_as_matrix(&trace.output);
                let loss = match objective {
                    RegressionObjective::Naive => naive_l2(&pred, r, &Rotation::identity()),
                    RegressionObjective::Quotient => {
                        quotient_l2(&pred, r, &Rotation::identity()).0
                    }
                };
                let dout: Vec<f64> = loss.grad.transpose().iter().copied().collect();
                let mut g = vec![0.0; params.values.len()];
                backward(arch, &mats, &trace, &dout, &mut g);
                Ok((loss.value, g))
            })
            .collect(),
        Batch::Flip { pairs } => pairs
            .par_iter()
            .map(|(cloud, target)| {
                let trace = forward_trace(arch, &mats, cloud)?;
                let loss = flip_cross_entropy(&output_as_logits(&trace.output), *target);
                let mut g = vec![0.0; params.values.len()];
                backward(arch, &mats, &trace, &loss.grad, &mut g);
                Ok((loss.value, g))
            })
            .collect(),
    };
    let per_example = per_example?;

    let scale = 1.0 / per_example.len() as f64;
    let mut total = 0.0;
    let mut grad = vec![0.0; params.values.len()];
    for (value, g) in &per_example {
        total += value;
        for (acc, x) in grad.iter_mut().zip(g) {
            *acc += x;
        }
    }
    for g in &mut grad {
        *g *= scale;
    }
    Ok((total * scale, grad))
}

#[cfg(test)]
mod tests;
