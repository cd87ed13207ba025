//! One-vs-rest linear SVM over pooled features.
//!
//! Each class gets an L2-regularized hinge-loss separator
//!
//! ```text
//! min_w  lambda/2 |w|^2 + 1/n sum_i max(0, 1 - y_i (w . x_i + b))
//! ```
//!
//! solved by dual coordinate descent with box constraint `C = 1/(lambda n)`.
//! The bias is handled as an extra constant feature of value 1 and is
//! regularized along with `w`. Features are first divided by their
//! per-feature maximum over the training set (features whose maximum is 0
//! keep scale 1). Training stops once the duality gap, in the objective
//! units above (where `w = 0` scores 1), drops to the tolerance.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::pooling::FeatureVector;
use crate::rng::Rng;

/// Sparse read access to a feature vector.
pub trait Features {
    fn dim(&self) -> usize;
    fn for_each_nonzero(&self, f: &mut dyn FnMut(usize, f64));
}

impl Features for FeatureVector {
    fn dim(&self) -> usize {
        FeatureVector::dim(self)
    }

    fn for_each_nonzero(&self, f: &mut dyn FnMut(usize, f64)) {
        for (i, c) in self.nonzeros() {
            f(i, c as f64);
        }
    }
}

impl Features for [f64] {
    fn dim(&self) -> usize {
        self.len()
    }

    fn for_each_nonzero(&self, f: &mut dyn FnMut(usize, f64)) {
        for (i, &v) in self.iter().enumerate() {
            if v != 0.0 {
                f(i, v);
            }
        }
    }
}

impl Features for Vec<f64> {
    fn dim(&self) -> usize {
        self.len()
    }

    fn for_each_nonzero(&self, f: &mut dyn FnMut(usize, f64)) {
        self.as_slice().for_each_nonzero(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub lambda: f64,
    /// Duality gap at which a binary problem counts as solved.
    pub tolerance: f64,
    pub max_epochs: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            lambda: 1e-3,
            tolerance: 1e-6,
            max_epochs: 2000,
        }
    }
}

/// Per-class optimizer trace.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryTelemetry {
    pub class: usize,
    pub epochs: usize,
    pub converged: bool,
    pub primal: f64,
    pub duality_gap: f64,
    /// Dual objective in minimization form after every epoch; never
    /// increases.
    pub dual_objective_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    /// `c x D`.
    pub weights: Matrix,
    pub bias: Vec<f64>,
    /// Multiplier applied to each raw feature before scoring.
    pub feature_scale: Vec<f64>,
}

struct Csr {
    offsets: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl Csr {
    fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let (a, b) = (self.offsets[i], self.offsets[i + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    #[inline]
    fn dot(&self, i: usize, w: &[f64]) -> f64 {
        let (idx, val) = self.row(i);
        idx.iter().zip(val).map(|(&j, v)| w[j as usize] * v).sum()
    }
}

/// Trains one binary separator per class.
pub fn train_linear_ovr<F: Features + Sync>(
    features: &[F],
    labels: &[usize],
    class_count: usize,
    lambda: f64,
) -> Result<LinearModel> {
    let opts = SolverOptions {
        lambda,
        ..Default::default()
    };
    train_linear_ovr_with_telemetry(features, labels, class_count, &opts).map(|(m, _)| m)
}

pub fn train_linear_ovr_with_telemetry<F: Features + Sync>(
    features: &[F],
    labels: &[usize],
    class_count: usize,
    opts: &SolverOptions,
) -> Result<(LinearModel, Vec<BinaryTelemetry>)> {
    if features.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: features.len(),
            found: labels.len(),
            context: "label count",
        });
    }
    if !(opts.lambda > 0.0 && opts.lambda.is_finite()) {
        return Err(Error::Config(format!("lambda must be positive, got {}", opts.lambda)));
    }
    let first = features.first().ok_or(Error::NoSamples)?;
    let dim = first.dim();
    if let Some(f) = features.iter().find(|f| f.dim() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: f.dim(),
            context: "feature dimension",
        });
    }
    if let Some(&label) = labels.iter().find(|&&l| l >= class_count) {
        return Err(Error::LabelOutOfRange { label, class_count });
    }
    let mut present = vec![false; class_count];
    labels.iter().for_each(|&l| present[l] = true);
    if present.iter().filter(|&&p| p).count() < 2 {
        return Err(Error::SingleClass);
    }

    let mut maxima = vec![0.0f64; dim];
    for f in features {
        f.for_each_nonzero(&mut |j, v| maxima[j] = maxima[j].max(v.abs()));
    }
    let feature_scale: Vec<f64> = maxima.iter().map(|&m| if m > 0.0 { 1.0 / m } else { 1.0 }).collect();

    // scaled rows plus the constant bias feature at index `dim`
    let mut csr = Csr {
        offsets: vec![0],
        indices: Vec::new(),
        values: Vec::new(),
    };
    for f in features {
        f.for_each_nonzero(&mut |j, v| {
            csr.indices.push(j as u32);
            csr.values.push(v * feature_scale[j]);
        });
        csr.indices.push(dim as u32);
        csr.values.push(1.0);
        csr.offsets.push(csr.indices.len());
    }

    let solved: Vec<(Vec<f64>, BinaryTelemetry)> = (0..class_count)
        .into_par_iter()
        .map(|class| {
            let y: Vec<f64> = labels.iter().map(|&l| if l == class { 1.0 } else { -1.0 }).collect();
            solve_binary(&csr, &y, dim + 1, opts, class)
        })
        .collect();

    let mut weights = Matrix::zeros(class_count, dim);
    let mut bias = Vec::with_capacity(class_count);
    let mut telemetry = Vec::with_capacity(class_count);
    for (class, (w, t)) in solved.into_iter().enumerate() {
        weights.row_mut(class).copy_from_slice(&w[..dim]);
        bias.push(w[dim]);
        telemetry.push(t);
    }
    Ok((
        LinearModel {
            weights,
            bias,
            feature_scale,
        },
        telemetry,
    ))
}

fn solve_binary(csr: &Csr, y: &[f64], dim: usize, opts: &SolverOptions, class: usize) -> (Vec<f64>, BinaryTelemetry) {
    let n = y.len();
    let c = 1.0 / (opts.lambda * n as f64);
    let mut w = vec![0.0; dim];
    let mut alpha = vec![0.0; n];
    let qii: Vec<f64> = (0..n).map(|i| csr.row(i).1.iter().map(|v| v * v).sum()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = Rng::from_seed(0x5eed_0000 + class as u64);
    let mut trace = Vec::new();
    let (mut primal, mut gap, mut converged, mut epochs) = (f64::INFINITY, f64::INFINITY, false, 0);

    while epochs < opts.max_epochs {
        epochs += 1;
        rng.shuffle(&mut order);
        for &i in &order {
            let g = y[i] * csr.dot(i, &w) - 1.0;
            let pg = if alpha[i] <= 0.0 {
                g.min(0.0)
            } else if alpha[i] >= c {
                g.max(0.0)
            } else {
                g
            };
            if pg == 0.0 {
                continue;
            }
            let old = alpha[i];
            let new = (old - g / qii[i]).clamp(0.0, c);
            let delta = (new - old) * y[i];
            if delta != 0.0 {
                alpha[i] = new;
                let (idx, val) = csr.row(i);
                for (&j, v) in idx.iter().zip(val) {
                    w[j as usize] += delta * v;
                }
            }
        }
        let half_norm = 0.5 * w.iter().map(|v| v * v).sum::<f64>();
        let hinge: f64 = (0..n).map(|i| (1.0 - y[i] * csr.dot(i, &w)).max(0.0)).sum();
        let alpha_sum: f64 = alpha.iter().sum();
        // rescale to lambda units: objective(w = 0) == 1
        primal = opts.lambda * (half_norm + c * hinge);
        let dual_min = opts.lambda * (half_norm - alpha_sum);
        gap = primal + dual_min;
        trace.push(dual_min);
        if gap <= opts.tolerance {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("class {class}: solver stopped after {epochs} epochs with duality gap {gap:.3e}");
    }
    (
        w,
        BinaryTelemetry {
            class,
            epochs,
            converged,
            primal,
            duality_gap: gap,
            dual_objective_trace: trace,
        },
    )
}

impl LinearModel {
    pub fn dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn class_count(&self) -> usize {
        self.weights.rows()
    }

    /// Raw class scores `w_c . (scale * x) + b_c`.
    pub fn scores<F: Features + ?Sized>(&self, feature: &F) -> Result<Vec<f64>> {
        if feature.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: feature.dim(),
                context: "feature dimension",
            });
        }
        let mut scores = self.bias.clone();
        feature.for_each_nonzero(&mut |j, v| {
            let x = v * self.feature_scale[j];
            for (c, s) in scores.iter_mut().enumerate() {
                *s += self.weights.get(c, j) * x;
            }
        });
        Ok(scores)
    }

    /// Highest-scoring class; ties go to the lowest index.
    pub fn predict<F: Features + ?Sized>(&self, feature: &F) -> Result<usize> {
        Ok(argmax(&self.scores(feature)?))
    }
}

pub(crate) fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub error_rate: f64,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
}

impl Evaluation {
    pub fn from_predictions(predicted: &[usize], truth: &[usize], class_count: usize) -> Result<Self> {
        if predicted.is_empty() {
            return Err(Error::NoSamples);
        }
        if predicted.len() != truth.len() {
            return Err(Error::DimensionMismatch {
                expected: truth.len(),
                found: predicted.len(),
                context: "prediction count",
            });
        }
        let mut confusion = vec![vec![0usize; class_count]; class_count];
        for (&p, &t) in predicted.iter().zip(truth) {
            if p >= class_count || t >= class_count {
                return Err(Error::LabelOutOfRange {
                    label: p.max(t),
                    class_count,
                });
            }
            confusion[t][p] += 1;
        }
        let wrong = predicted.iter().zip(truth).filter(|(p, t)| p != t).count();
        Ok(Evaluation {
            error_rate: wrong as f64 / predicted.len() as f64,
            confusion,
        })
    }

    pub fn total(&self) -> usize {
        self.confusion.iter().flatten().sum()
    }

    pub fn correct(&self) -> usize {
        (0..self.confusion.len()).map(|i| self.confusion[i][i]).sum()
    }
}

/// Error rate and confusion matrix of `model` on labeled features.
pub fn evaluate<F: Features>(model: &LinearModel, features: &[F], labels: &[usize]) -> Result<Evaluation> {
    let predicted = features.iter().map(|f| model.predict(f)).collect::<Result<Vec<_>>>()?;
    Evaluation::from_predictions(&predicted, labels, model.class_count())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clusters(rng: &mut Rng, centers: &[[f64; 2]], per: usize, spread: f64) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (c, center) in centers.iter().enumerate() {
            for _ in 0..per {
                x.push(vec![
                    center[0] + spread * rng.uniform_range(-1.0, 1.0),
                    center[1] + spread * rng.uniform_range(-1.0, 1.0),
                ]);
                y.push(c);
            }
        }
        (x, y)
    }

    #[test]
    fn separable_two_class() {
        let mut rng = Rng::from_seed(1);
        let (x, y) = clusters(&mut rng, &[[1.0, 4.0], [4.0, 1.0]], 30, 0.5);
        let model = train_linear_ovr(&x, &y, 2, 1e-3).unwrap();
        let eval = evaluate(&model, &x, &y).unwrap();
        assert_eq!(eval.error_rate, 0.0);
        assert_eq!(eval.confusion, vec![vec![30, 0], vec![0, 30]]);
        assert_eq!(model.predict(&x[3]).unwrap(), y[3]);
    }

    #[test]
    fn three_class_rows_separate_their_class() {
        let mut rng = Rng::from_seed(2);
        let (x, y) = clusters(&mut rng, &[[0.5, 0.5], [5.0, 0.5], [2.5, 5.0]], 20, 0.4);
        let (model, tel) = train_linear_ovr_with_telemetry(&x, &y, 3, &SolverOptions { lambda: 1e-2, ..Default::default() }).unwrap();
        assert_eq!(model.weights.rows(), 3);
        for c in 0..3 {
            // oracle: evaluate each one-vs-rest score directly
            for (xi, &yi) in x.iter().zip(&y) {
                let s = model.bias[c]
                    + (0..2).map(|j| model.weights.get(c, j) * xi[j] * model.feature_scale[j]).sum::<f64>();
                let sign = if yi == c { 1.0 } else { -1.0 };
                assert!(sign * s >= 0.0, "class {c} misplaces a point: {s}");
            }
            assert!(tel[c].converged, "{:?}", (tel[c].epochs, tel[c].duality_gap));
            assert!(tel[c].duality_gap <= 1e-6);
        }
    }

    #[test]
    fn dual_objective_never_increases() {
        let mut rng = Rng::from_seed(3);
        // overlapping clusters so the problem is not separable
        let (x, y) = clusters(&mut rng, &[[1.0, 1.0], [1.6, 1.4]], 40, 1.0);
        let (_, tel) = train_linear_ovr_with_telemetry(&x, &y, 2, &SolverOptions::default()).unwrap();
        for t in &tel {
            assert!(t.dual_objective_trace.len() > 1);
            for w in t.dual_objective_trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0));
            }
        }
    }

    #[test]
    fn deterministic() {
        let mut rng = Rng::from_seed(4);
        let (x, y) = clusters(&mut rng, &[[1.0, 1.0], [2.0, 2.0], [1.0, 3.0]], 25, 0.8);
        let a = train_linear_ovr(&x, &y, 3, 1e-3).unwrap();
        let b = train_linear_ovr(&x, &y, 3, 1e-3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn tie_breaks_and_invariance() {
        let zero = LinearModel {
            weights: Matrix::zeros(3, 2),
            bias: vec![0.0; 3],
            feature_scale: vec![1.0; 2],
        };
        assert_eq!(zero.predict(&vec![0.3, 0.7]).unwrap(), 0);
        let scores = [0.2, 1.5, -0.3, 1.5];
        assert_eq!(argmax(&scores), 1);
        let scaled: Vec<f64> = scores.iter().map(|s| 7.0 * s).collect();
        let monotone: Vec<f64> = scores.iter().map(|s| s.exp() + 3.0).collect();
        assert_eq!(argmax(&scaled), 1);
        assert_eq!(argmax(&monotone), 1);
        assert!(zero.predict(&vec![1.0]).is_err());
    }

    #[test]
    fn input_errors() {
        let x = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert!(matches!(train_linear_ovr(&x, &[0, 0], 2, 1e-3), Err(Error::SingleClass)));
        assert!(train_linear_ovr(&[vec![1.0], vec![1.0, 2.0]], &[0, 1], 2, 1e-3).is_err());
        assert!(train_linear_ovr(&x, &[0, 1], 2, 0.0).is_err());
        assert!(train_linear_ovr(&x, &[0, 2], 2, 1e-3).is_err());
    }

    #[test]
    fn evaluation_arithmetic() {
        let e = Evaluation::from_predictions(&[0, 1, 1], &[0, 1, 1], 2).unwrap();
        assert_eq!(e.error_rate, 0.0);
        let e = Evaluation::from_predictions(&[1, 0], &[0, 1], 2).unwrap();
        assert_eq!(e.error_rate, 1.0);
        let truth: Vec<usize> = (0..100).map(|i| i % 2).collect();
        let mut pred = truth.clone();
        pred[17] = 1 - pred[17];
        let e = Evaluation::from_predictions(&pred, &truth, 2).unwrap();
        assert_eq!(e.error_rate, 0.01);
        assert!((e.error_rate - (1.0 - e.correct() as f64 / e.total() as f64)).abs() < 1e-15);
        assert_eq!(e.total(), 100);
        assert!(matches!(Evaluation::from_predictions(&[], &[], 2), Err(Error::NoSamples)));
    }
}
