//! Fitting `A / P` kernel models and topology-dictated overhead models, and
//! locating the crossover `P★` where overhead equals kernel time.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{self, Granularity, PhaseTiming, Regime, Thresholds};
use crate::topology::{OverheadForm, TopologyClass};

/// One `(P, T_kernel, T_overhead)` measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingSample {
    pub ranks: u32,
    pub t_kernel: f64,
    pub t_overhead: f64,
}

impl ScalingSample {
    pub fn new(ranks: u32, t_kernel: f64, t_overhead: f64) -> Result<Self> {
        if ranks == 0 {
            return Err(Error::Domain("sample rank count must be positive".into()));
        }
        if !(t_kernel > 0.0 && t_kernel.is_finite()) {
            return Err(Error::Domain(format!(
                "t_kernel = {t_kernel} must be positive"
            )));
        }
        if !(t_overhead >= 0.0 && t_overhead.is_finite()) {
            return Err(Error::Domain(format!(
                "t_overhead = {t_overhead} must be >= 0"
            )));
        }
        Ok(ScalingSample {
            ranks,
            t_kernel,
            t_overhead,
        })
    }

    pub fn p(&self) -> f64 {
        f64::from(self.ranks)
    }

    pub fn timing(&self) -> PhaseTiming {
        PhaseTiming {
            t_kernel: self.t_kernel,
            t_overhead: self.t_overhead,
        }
    }
}

/// `T_kernel(P) = a / P`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelModel {
    pub a: f64,
}

impl KernelModel {
    pub fn new(a: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::Argument(format!(
                "kernel constant A = {a} must be positive"
            )));
        }
        Ok(KernelModel { a })
    }

    pub fn at(&self, p: f64) -> f64 {
        self.a / p
    }
}

/// Overhead as a function of rank count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverheadModel {
    pub form: OverheadForm,
    /// Absent for the constant form.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    pub beta: f64,
}

impl OverheadModel {
    pub fn quadratic(alpha: f64, beta: f64) -> Self {
        OverheadModel {
            form: OverheadForm::Quadratic,
            alpha: Some(alpha),
            beta,
        }
    }

    pub fn linear(alpha: f64, beta: f64) -> Self {
        OverheadModel {
            form: OverheadForm::Linear,
            alpha: Some(alpha),
            beta,
        }
    }

    pub fn constant(beta: f64) -> Self {
        OverheadModel {
            form: OverheadForm::Constant,
            alpha: None,
            beta,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        let alpha_ok = match (self.form, self.alpha) {
            (OverheadForm::Constant, None) => true,
            (OverheadForm::Constant, Some(_)) => false,
            (_, Some(a)) => a >= 0.0 && a.is_finite(),
            (_, None) => false,
        };
        if !alpha_ok {
            return Err(Error::Argument(format!(
                "overhead model {:?} needs {} alpha >= 0",
                self.form,
                if self.form == OverheadForm::Constant {
                    "no"
                } else {
                    "an"
                }
            )));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::Argument(format!(
                "beta = {} must be >= 0",
                self.beta
            )));
        }
        Ok(())
    }

    /// `T_overhead(P)`.
    pub fn at(&self, p: f64) -> f64 {
        match self.form {
            OverheadForm::Quadratic => self.alpha() * p * p + self.beta,
            OverheadForm::Linear => self.alpha() * p + self.beta,
            OverheadForm::Constant => self.beta,
        }
    }
}

/// Fit result with diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverheadFit {
    pub model: OverheadModel,
    /// Euclidean norm of the residuals over the points used.
    pub residual_norm: f64,
    /// Rank counts the final fit used.
    pub points_used: Vec<u32>,
    /// A negative parameter was clamped to zero.
    pub clamped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FitOptions {
    /// Restrict global-topology fits to the pre-collapse region.
    pub pre_collapse: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { pre_collapse: true }
    }
}

/// Least-squares `A` for `t = A / P`:
/// `A = sum(t_i / P_i) / sum(1 / P_i^2)`.
pub fn fit_kernel(samples: &[ScalingSample]) -> Result<KernelModel> {
    if samples.is_empty() {
        return Err(Error::Argument(
            "insufficient samples: kernel fit needs at least 1".into(),
        ));
    }
    let (num, den) = samples.iter().fold((0.0, 0.0), |(n, d), s| {
        let inv = 1.0 / s.p();
        (n + s.t_kernel * inv, d + inv * inv)
    });
    KernelModel::new(num / den)
}

pub fn min_samples(form: OverheadForm) -> usize {
    match form {
        OverheadForm::Constant => 1,
        OverheadForm::Linear | OverheadForm::Quadratic => 2,
    }
}

fn regressor(form: OverheadForm, p: f64) -> f64 {
    match form {
        OverheadForm::Quadratic => p * p,
        OverheadForm::Linear => p,
        OverheadForm::Constant => 0.0,
    }
}

/// Ordinary least squares of overhead on `(x, 1)`, negative parameters
/// clamped to zero with the other one refitted.
fn ols(form: OverheadForm, samples: &[ScalingSample]) -> Result<(OverheadModel, bool)> {
    let n = samples.len() as f64;
    let xs: Vec<f64> = samples.iter().map(|s| regressor(form, s.p())).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.t_overhead).collect();
    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - x_mean).powi(2)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - x_mean) * (y - y_mean))
        .sum();
    if sxx <= 0.0 {
        return Err(Error::Argument(
            "insufficient samples: need at least 2 distinct rank counts".into(),
        ));
    }
    let mut alpha = sxy / sxx;
    let mut beta = y_mean - alpha * x_mean;
    let mut clamped = false;
    if alpha < 0.0 {
        alpha = 0.0;
        beta = y_mean;
        clamped = true;
    } else if beta < 0.0 {
        // least squares through the origin
        let sxx0: f64 = xs.iter().map(|x| x * x).sum();
        let sxy0: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
        alpha = (sxy0 / sxx0).max(0.0);
        beta = 0.0;
        clamped = true;
    }
    let model = match form {
        OverheadForm::Quadratic => OverheadModel::quadratic(alpha, beta),
        OverheadForm::Linear => OverheadModel::linear(alpha, beta),
        OverheadForm::Constant => unreachable!("constant form uses the median"),
    };
    Ok((model, clamped))
}

fn fit_form(form: OverheadForm, samples: &[ScalingSample]) -> Result<(OverheadModel, bool)> {
    let need = min_samples(form);
    if samples.len() < need {
        return Err(Error::Argument(format!(
            "insufficient samples: {form:?} overhead fit needs at least {need}, got {}",
            samples.len()
        )));
    }
    match form {
        OverheadForm::Constant => {
            let values: Vec<f64> = samples.iter().map(|s| s.t_overhead).collect();
            Ok((
                OverheadModel::constant(crate::simulator::median(&values)),
                false,
            ))
        }
        _ => ols(form, samples),
    }
}

fn residual_norm(model: &OverheadModel, samples: &[ScalingSample]) -> f64 {
    samples
        .iter()
        .map(|s| (s.t_overhead - model.at(s.p())).powi(2))
        .sum::<f64>()
        .sqrt()
}

pub fn fit_overhead(topology: TopologyClass, samples: &[ScalingSample]) -> Result<OverheadFit> {
    fit_overhead_with(topology, samples, FitOptions::default())
}

/// Fit the overhead form dictated by `topology`.
///
/// Global fits are restricted to the pre-collapse region when
/// `options.pre_collapse` is set, using the kernel model fitted from the
/// same samples.
pub fn fit_overhead_with(
    topology: TopologyClass,
    samples: &[ScalingSample],
    options: FitOptions,
) -> Result<OverheadFit> {
    let form = topology.overhead_form();
    let mut sorted = samples.to_vec();
    sorted.sort_by_key(|s| s.ranks);
    let used = if form == OverheadForm::Quadratic && options.pre_collapse && sorted.len() >= 2 {
        let kernel = fit_kernel(&sorted)?;
        pre_collapse_filter(&sorted, &kernel)?
    } else {
        sorted
    };
    let (model, clamped) = fit_form(form, &used)?;
    Ok(OverheadFit {
        model,
        residual_norm: residual_norm(&model, &used),
        points_used: used.iter().map(|s| s.ranks).collect(),
        clamped,
    })
}

/// Keep the samples at or below the crossover of a quadratic fit, refitting
/// until the retained set stops changing (at most 5 rounds). The two
/// smallest-`P` samples are always kept.
pub fn pre_collapse_filter(
    samples: &[ScalingSample],
    kernel: &KernelModel,
) -> Result<Vec<ScalingSample>> {
    if samples.len() < 2 {
        return Err(Error::Argument(
            "insufficient samples: pre-collapse filter needs at least 2".into(),
        ));
    }
    let mut all = samples.to_vec();
    all.sort_by_key(|s| s.ranks);
    let mut retained = all.clone();
    for _ in 0..5 {
        let (model, _) = ols(OverheadForm::Quadratic, &retained)?;
        let crossover = predict_crossover(&model, kernel, u32::MAX)?;
        let next: Vec<ScalingSample> = all
            .iter()
            .enumerate()
            .filter(|(idx, s)| *idx < 2 || s.p() <= crossover.p_star)
            .map(|(_, s)| *s)
            .collect();
        if next == retained {
            break;
        }
        retained = next;
    }
    Ok(retained)
}

/// Predicted strong-scaling limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossoverPrediction {
    /// `f64::INFINITY` (serialized as `null`) when no crossover exists.
    #[serde(with = "unbounded")]
    pub p_star: f64,
    pub exists_in_range: bool,
    pub range_hi: u32,
}

pub(crate) mod unbounded {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// Bisection of an increasing function to machine precision.
fn bisect_increasing(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Solve `T_overhead(P) = A / P` for the unique positive root.
pub fn predict_crossover(
    model: &OverheadModel,
    kernel: &KernelModel,
    range_hi: u32,
) -> Result<CrossoverPrediction> {
    let a = kernel.a;
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::Argument(format!(
            "kernel constant A = {a} must be positive"
        )));
    }
    model.validate()?;
    let alpha = model.alpha();
    let beta = model.beta;
    let p_star = match model.form {
        _ if alpha == 0.0 && beta == 0.0 => f64::INFINITY,
        OverheadForm::Constant => a / beta,
        _ if alpha == 0.0 => a / beta,
        OverheadForm::Linear => {
            // 2A / (beta + sqrt(beta^2 + 4 alpha A)), cancellation-free
            2.0 * a / (beta + (beta * beta + 4.0 * alpha * a).sqrt())
        }
        OverheadForm::Quadratic => {
            // alpha P^3 + beta P - A is strictly increasing for P > 0
            let f = |p: f64| alpha * p * p * p + beta * p - a;
            let mut hi = 1e9f64;
            while f(hi) < 0.0 {
                hi *= 2.0;
            }
            bisect_increasing(f, 0.0, hi)
        }
    };
    Ok(CrossoverPrediction {
        p_star,
        exists_in_range: p_star <= f64::from(range_hi),
        range_hi,
    })
}

/// Model-derived granularity at one rank count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub ranks: f64,
    pub g: Granularity,
    pub omega_pct: f64,
    pub regime: Regime,
}

pub fn granularity_curve(
    model: &OverheadModel,
    kernel: &KernelModel,
    ranks: &[f64],
) -> Vec<CurvePoint> {
    granularity_curve_with(model, kernel, ranks, &Thresholds::default())
}

pub fn granularity_curve_with(
    model: &OverheadModel,
    kernel: &KernelModel,
    ranks: &[f64],
    thresholds: &Thresholds,
) -> Vec<CurvePoint> {
    ranks
        .iter()
        .map(|&p| {
            let g = model::granularity(PhaseTiming {
                t_kernel: kernel.at(p),
                t_overhead: model.at(p),
            });
            CurvePoint {
                ranks: p,
                g,
                omega_pct: model::overhead_fraction_percent(g),
                regime: model::classify_regime_with(g, thresholds),
            }
        })
        .collect()
}
