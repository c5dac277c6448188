//! Affine ridge calibration from observables to the six wrench axes.

use nalgebra::{DMatrix, Matrix2, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Sample, SweepKind};
use crate::error::{Error, Result};
use crate::features::MoireObservables;
use crate::load::Wrench;

/// Number of features in the regression input.
pub const FEATURE_DIM: usize = 8;
pub const FEATURE_VERSION: u32 = 1;
pub const FEATURE_ORDER: &str = "I,cx,cy,pox,poy,sin2theta,cos2theta,inv_lambda";
pub const MODEL_FORMAT: &str = "moire-calibration";
pub const DEFAULT_RIDGE_LAMBDA: f64 = 1e-6;
/// Largest condition number accepted for the regularized normal matrix.
pub const MAX_CONDITION: f64 = 1e12;
/// Share of each sweep kind held out for testing.
pub const TEST_FRACTION: f64 = 0.2;

/// Regression input assembled from observables in [`FEATURE_ORDER`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector(pub [f64; FEATURE_DIM]);

impl FeatureVector {
    pub fn from_observables(obs: &MoireObservables) -> Self {
        // θ lives in a folded half-plane; the doubled angle is continuous there
        let (s, c) = (2.0 * obs.orientation).sin_cos();
        Self([
            obs.mean_brightness,
            obs.centroid[0],
            obs.centroid[1],
            obs.phase_offset[0],
            obs.phase_offset[1],
            s,
            c,
            1.0 / obs.period,
        ])
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

/// Fitted affine map `W·standardize(f) + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationModel {
    pub format: String,
    pub version: u32,
    pub feature_order: String,
    pub weights: [[f64; FEATURE_DIM]; 6],
    pub bias: [f64; 6],
    pub feature_means: [f64; FEATURE_DIM],
    pub feature_scales: [f64; FEATURE_DIM],
    pub ridge_lambda: f64,
}

impl CalibrationModel {
    pub fn predict_features(&self, f: &FeatureVector) -> Wrench {
        let mut out = self.bias;
        for (axis, row) in self.weights.iter().enumerate() {
            for j in 0..FEATURE_DIM {
                out[axis] += row[j] * (f.0[j] - self.feature_means[j]) / self.feature_scales[j];
            }
        }
        Wrench::from_array(out)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(text).map_err(|e| Error::ModelFormat(e.to_string()))?;
        if model.format != MODEL_FORMAT || model.version != FEATURE_VERSION || model.feature_order != FEATURE_ORDER {
            return Err(Error::ModelFormat(format!(
                "unsupported model {} v{} with features {:?}",
                model.format, model.version, model.feature_order
            )));
        }
        if model.feature_scales.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::ModelFormat("feature scales must be positive".into()));
        }
        Ok(model)
    }
}

pub fn predict(model: &CalibrationModel, obs: &MoireObservables) -> Wrench {
    model.predict_features(&FeatureVector::from_observables(obs))
}

/// Per-axis goodness of fit. `r2` is `None` for an axis whose targets do
/// not vary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub r2: [Option<f64>; 6],
    pub mae: [f64; 6],
    pub n: usize,
}

/// R² and MAE of predicted against true wrenches.
pub fn score(truth: &[Wrench], predicted: &[Wrench]) -> Metrics {
    let n = truth.len().min(predicted.len());
    let mut r2 = [None; 6];
    let mut mae = [0.0; 6];
    if n == 0 {
        return Metrics { r2, mae, n };
    }
    for axis in 0..6 {
        let y: Vec<f64> = truth[..n].iter().map(|w| w.to_array()[axis]).collect();
        let p: Vec<f64> = predicted[..n].iter().map(|w| w.to_array()[axis]).collect();
        let mean = y.iter().sum::<f64>() / n as f64;
        let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
        let ss_res: f64 = y.iter().zip(&p).map(|(a, b)| (a - b).powi(2)).sum();
        let scale: f64 = y.iter().map(|v| v * v).sum();
        r2[axis] = if ss_tot > f64::EPSILON * scale && ss_tot > 0.0 {
            Some(1.0 - ss_res / ss_tot)
        } else {
            None
        };
        mae[axis] = y.iter().zip(&p).map(|(a, b)| (a - b).abs()).sum::<f64>() / n as f64;
    }
    Metrics { r2, mae, n }
}

pub fn evaluate(model: &CalibrationModel, samples: &[Sample]) -> Metrics {
    let truth: Vec<Wrench> = samples.iter().map(|s| s.wrench).collect();
    let predicted: Vec<Wrench> = samples.iter().map(|s| predict(model, &s.observables)).collect();
    score(&truth, &predicted)
}

/// Fits on every sample (no hold-out).
pub fn fit_all(samples: &[Sample], ridge_lambda: f64) -> Result<CalibrationModel> {
    let rows: Vec<(FeatureVector, Wrench)> = samples
        .iter()
        .map(|s| (FeatureVector::from_observables(&s.observables), s.wrench))
        .collect();
    fit_rows(&rows, ridge_lambda)
}

/// Ridge fit on features/targets pairs.
pub fn fit_rows(rows: &[(FeatureVector, Wrench)], ridge_lambda: f64) -> Result<CalibrationModel> {
    if !(ridge_lambda.is_finite() && ridge_lambda >= 0.0) {
        return Err(Error::InvalidParameter(format!("ridge lambda must be >= 0, got {ridge_lambda}")));
    }
    let n = rows.len();
    if n < 2 * FEATURE_DIM {
        return Err(Error::InsufficientSamples {
            needed: 2 * FEATURE_DIM,
            got: n,
        });
    }
    if rows.iter().any(|(f, w)| !f.is_finite() || !w.is_finite()) {
        return Err(Error::InvalidParameter("non-finite feature or target".into()));
    }
    let mut means = [0.0; FEATURE_DIM];
    let mut scales = [0.0; FEATURE_DIM];
    for j in 0..FEATURE_DIM {
        let mean = rows.iter().map(|(f, _)| f.0[j]).sum::<f64>() / n as f64;
        let var = rows.iter().map(|(f, _)| (f.0[j] - mean).powi(2)).sum::<f64>() / n as f64;
        means[j] = mean;
        scales[j] = if var.sqrt() > 0.0 { var.sqrt() } else { 1.0 };
    }
    let x = DMatrix::from_fn(n, FEATURE_DIM, |i, j| (rows[i].0 .0[j] - means[j]) / scales[j]);
    let mut bias = [0.0; 6];
    for (axis, b) in bias.iter_mut().enumerate() {
        *b = rows.iter().map(|(_, w)| w.to_array()[axis]).sum::<f64>() / n as f64;
    }
    let y = DMatrix::from_fn(n, 6, |i, a| rows[i].1.to_array()[a] - bias[a]);

    let mut normal = x.transpose() * &x;
    for j in 0..FEATURE_DIM {
        normal[(j, j)] += ridge_lambda;
    }
    check_condition(&normal)?;
    let rhs = x.transpose() * y;
    let solved = normal
        .clone()
        .cholesky()
        .map(|c| c.solve(&rhs))
        .or_else(|| normal.lu().solve(&rhs))
        .ok_or(Error::SingularSystem {
            condition: f64::INFINITY,
        })?;
    let mut weights = [[0.0; FEATURE_DIM]; 6];
    for (axis, row) in weights.iter_mut().enumerate() {
        for (j, w) in row.iter_mut().enumerate() {
            *w = solved[(j, axis)];
        }
    }
    Ok(CalibrationModel {
        format: MODEL_FORMAT.into(),
        version: FEATURE_VERSION,
        feature_order: FEATURE_ORDER.into(),
        weights,
        bias,
        feature_means: means,
        feature_scales: scales,
        ridge_lambda,
    })
}

fn check_condition(normal: &DMatrix<f64>) -> Result<()> {
    let eigen = SymmetricEigen::new(normal.clone());
    let max = eigen.eigenvalues.max();
    let min = eigen.eigenvalues.min();
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::SingularSystem { condition });
    }
    Ok(())
}

/// Train/test partition: `TEST_FRACTION` of each sweep kind, drawn with
/// `split_seed`, is held out.
pub fn stratified_split(samples: &[Sample], split_seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(split_seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for kind in SweepKind::ALL {
        let mut group: Vec<usize> = (0..samples.len()).filter(|&i| samples[i].sweep == kind).collect();
        group.shuffle(&mut rng);
        let held = (group.len() as f64 * TEST_FRACTION).round() as usize;
        test.extend_from_slice(&group[..held]);
        train.extend_from_slice(&group[held..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// Standardizes on the training split, fits, and scores the held-out split.
pub fn fit(samples: &[Sample], ridge_lambda: f64, split_seed: u64) -> Result<(CalibrationModel, Metrics)> {
    let (train, test) = stratified_split(samples, split_seed);
    if test.is_empty() {
        return Err(Error::InsufficientSamples {
            needed: 2 * FEATURE_DIM,
            got: samples.len(),
        });
    }
    let pick = |idx: &[usize]| idx.iter().map(|&i| samples[i].clone()).collect::<Vec<_>>();
    let model = fit_all(&pick(&train), ridge_lambda)?;
    let metrics = evaluate(&model, &pick(&test));
    Ok((model, metrics))
}

/// Least-squares tilt map `[Tx, Ty] = M·(c − c0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TiltFit {
    /// N·m per mm of centroid shift.
    pub matrix: [[f64; 2]; 2],
    /// Centroid at zero tilt, mm.
    pub centroid_origin: [f64; 2],
    /// Root-sum-square of the torque residuals, N·m.
    pub residual_norm: f64,
}

impl TiltFit {
    pub fn predict(&self, centroid: [f64; 2]) -> [f64; 2] {
        let d = [centroid[0] - self.centroid_origin[0], centroid[1] - self.centroid_origin[1]];
        [
            self.matrix[0][0] * d[0] + self.matrix[0][1] * d[1],
            self.matrix[1][0] * d[0] + self.matrix[1][1] * d[1],
        ]
    }
}

/// Fits the 2×2 centroid-to-tilt matrix on a fixed-preload tilt sweep.
pub fn fit_tilt_matrix(samples: &[Sample]) -> Result<TiltFit> {
    let n = samples.len();
    if n < 3 {
        return Err(Error::InsufficientSamples { needed: 3, got: n });
    }
    let excitation = samples.iter().map(|s| s.wrench.tx.abs().max(s.wrench.ty.abs())).fold(0.0, f64::max);
    if excitation == 0.0 {
        return Err(Error::SingularSystem {
            condition: f64::INFINITY,
        });
    }
    let mean = |f: &dyn Fn(&Sample) -> f64| samples.iter().map(f).sum::<f64>() / n as f64;
    let c_mean = [mean(&|s| s.observables.centroid[0]), mean(&|s| s.observables.centroid[1])];
    let t_mean = [mean(&|s| s.wrench.tx), mean(&|s| s.wrench.ty)];
    let mut cc = Matrix2::<f64>::zeros();
    let mut tc = Matrix2::<f64>::zeros();
    for s in samples {
        let c = [s.observables.centroid[0] - c_mean[0], s.observables.centroid[1] - c_mean[1]];
        let t = [s.wrench.tx - t_mean[0], s.wrench.ty - t_mean[1]];
        for i in 0..2 {
            for j in 0..2 {
                cc[(i, j)] += c[i] * c[j];
                tc[(i, j)] += t[i] * c[j];
            }
        }
    }
    let eigen = cc.symmetric_eigenvalues();
    let condition = if eigen.min() > 0.0 { eigen.max() / eigen.min() } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::SingularSystem { condition });
    }
    let m: Matrix2<f64> = tc * cc.try_inverse().ok_or(Error::SingularSystem { condition })?;
    let inv_m = m.try_inverse().ok_or(Error::SingularSystem {
        condition: f64::INFINITY,
    })?;
    // T = M·c + b with b = t̄ − M·c̄, so c0 = −M⁻¹·b
    let b = nalgebra::Vector2::new(t_mean[0], t_mean[1]) - m * nalgebra::Vector2::new(c_mean[0], c_mean[1]);
    let c0 = -(inv_m * b);
    let fit = TiltFit {
        matrix: [[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]],
        centroid_origin: [c0[0], c0[1]],
        residual_norm: 0.0,
    };
    let residual = samples
        .iter()
        .map(|s| {
            let p = fit.predict(s.observables.centroid);
            (p[0] - s.wrench.tx).powi(2) + (p[1] - s.wrench.ty).powi(2)
        })
        .sum::<f64>()
        .sqrt();
    Ok(TiltFit {
        residual_norm: residual,
        ..fit
    })
}
