//! Fit-and-evaluate pipeline shared by the command-line tool: variant
//! selection, held-out evaluation and machine-readable reports.

use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::baselines::{appgrad_config, cca_closed_form_default, men_cca_mode};
use crate::data_io::{ModelBody, ModelFile};
use crate::error::{CcaError, Result};
use crate::kernel::{fit_kernel, project_kernel, KernelKind, KernelModel};
use crate::metrics::{constraint_residual, pcc, PccReport};
use crate::model::{CanonicalPair, Hyperparams, Termination, TwoViewDataset};
use crate::solver::{fit, project_pair};

/// Which method to fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Rmen,
    Men,
    #[serde(rename = "appgrad")]
    AppGrad,
    ClosedForm,
    KernelRmen,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Rmen,
        Variant::Men,
        Variant::AppGrad,
        Variant::ClosedForm,
        Variant::KernelRmen,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Rmen => "rmen",
            Variant::Men => "men",
            Variant::AppGrad => "appgrad",
            Variant::ClosedForm => "closed-form",
            Variant::KernelRmen => "kernel-rmen",
        }
    }

    /// Hyperparameters the solver actually runs with for this variant.
    pub fn hyperparams(self, hp: &Hyperparams) -> Hyperparams {
        match self {
            Variant::Men => men_cca_mode(hp),
            Variant::AppGrad => appgrad_config(hp),
            _ => hp.clone(),
        }
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| format!("unknown variant {s:?}; expected one of rmen, men, appgrad, closed-form, kernel-rmen"))
    }
}

#[derive(Debug, Clone)]
pub enum FittedModel {
    Linear(CanonicalPair),
    Kernel(KernelModel),
}

impl FittedModel {
    /// Projects centered evaluation views.
    pub fn project(&self, eval: &TwoViewDataset) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        match self {
            FittedModel::Linear(pair) => project_pair(pair, eval),
            FittedModel::Kernel(model) => project_kernel(model, &eval.x, &eval.y),
        }
    }

    pub fn evaluate(&self, eval: &TwoViewDataset) -> Result<PccReport> {
        let (a, b) = self.project(eval)?;
        pcc(&a, &b)
    }

    pub fn from_file(file: &ModelFile) -> Result<Self> {
        match (&file.body, file.kernel_model()?) {
            (_, Some(model)) => Ok(FittedModel::Kernel(model)),
            (ModelBody::Linear { pair }, None) => Ok(FittedModel::Linear(pair.clone())),
            (ModelBody::Kernel { .. }, None) => unreachable!("kernel bodies always rebuild a kernel model"),
        }
    }
}

impl FitOutcome {
    /// Container for this fit; `train` supplies the centering means.
    pub fn to_file(&self, hp: &Hyperparams, train: &TwoViewDataset) -> ModelFile {
        let means_x = train.x.feature_means().clone();
        let means_y = train.y.feature_means().clone();
        let hyperparams = self.variant.hyperparams(hp);
        match &self.model {
            FittedModel::Kernel(model) => ModelFile::from_kernel(&hyperparams, means_x, means_y, model),
            FittedModel::Linear(pair) => ModelFile {
                variant: self.variant,
                hyperparams,
                means_x,
                means_y,
                body: ModelBody::Linear { pair: pair.clone() },
            },
        }
    }
}

/// Result of fitting one variant on centered training data.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub variant: Variant,
    pub model: FittedModel,
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub termination: Option<Termination>,
    pub residual_u: f64,
    pub residual_v: f64,
    pub wall_seconds: f64,
}

/// Fits `variant` on a centered training set. `kernel` is required for
/// [`Variant::KernelRmen`] and applies to both views.
pub fn fit_variant(
    train: &TwoViewDataset,
    variant: Variant,
    hp: &Hyperparams,
    kernel: Option<KernelKind>,
) -> Result<FitOutcome> {
    let started = Instant::now();
    let hp = variant.hyperparams(hp);
    let outcome = match variant {
        Variant::ClosedForm => {
            let sol = cca_closed_form_default(train, hp.k)?;
            let (ru, rv) = constraint_residual(&sol.pair, train);
            FitOutcome {
                variant,
                model: FittedModel::Linear(sol.pair),
                objective_trace: Vec::new(),
                iterations: 0,
                termination: None,
                residual_u: ru,
                residual_v: rv,
                wall_seconds: 0.0,
            }
        }
        Variant::KernelRmen => {
            let kind = kernel.ok_or_else(|| CcaError::InvalidHyperparams("kernel-rmen needs a kernel".into()))?;
            let (model, report) = fit_kernel(train, kind, kind, &hp)?;
            FitOutcome {
                variant,
                model: FittedModel::Kernel(model),
                objective_trace: report.objective_trace,
                iterations: report.iterations_run,
                termination: Some(report.termination),
                residual_u: report.final_constraint_residual_u,
                residual_v: report.final_constraint_residual_v,
                wall_seconds: 0.0,
            }
        }
        _ => {
            let report = fit(train, &hp)?;
            FitOutcome {
                variant,
                model: FittedModel::Linear(report.pair),
                objective_trace: report.objective_trace,
                iterations: report.iterations_run,
                termination: Some(report.termination),
                residual_u: report.final_constraint_residual_u,
                residual_v: report.final_constraint_residual_v,
                wall_seconds: 0.0,
            }
        }
    };
    Ok(FitOutcome {
        wall_seconds: started.elapsed().as_secs_f64(),
        ..outcome
    })
}

/// One row of a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantReport {
    pub variant: Variant,
    pub k: usize,
    pub pcc_per_dimension: Vec<f64>,
    pub mean_pcc_percent: f64,
    pub objective_trace: Vec<f64>,
    pub constraint_residual_u: f64,
    pub constraint_residual_v: f64,
    pub iterations: usize,
    pub termination: Option<Termination>,
    pub wall_seconds: f64,
}

impl VariantReport {
    pub fn new(outcome: &FitOutcome, k: usize, pcc: &PccReport) -> Self {
        Self {
            variant: outcome.variant,
            k,
            pcc_per_dimension: pcc.per_dimension.clone(),
            mean_pcc_percent: pcc.mean_pcc_percent,
            objective_trace: outcome.objective_trace.clone(),
            constraint_residual_u: outcome.residual_u,
            constraint_residual_v: outcome.residual_v,
            iterations: outcome.iterations,
            termination: outcome.termination,
            wall_seconds: outcome.wall_seconds,
        }
    }
}

/// Fits on `train` and scores on `eval`; both must share the training centering.
pub fn run_variant(
    train: &TwoViewDataset,
    eval: &TwoViewDataset,
    variant: Variant,
    hp: &Hyperparams,
    kernel: Option<KernelKind>,
) -> Result<(FitOutcome, VariantReport)> {
    let outcome = fit_variant(train, variant, hp, kernel)?;
    let score = outcome.model.evaluate(eval)?;
    let report = VariantReport::new(&outcome, hp.k, &score);
    Ok((outcome, report))
}

/// A whole run: what was done and one row per variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub hyperparams: Hyperparams,
    pub n_train: usize,
    pub n_eval: usize,
    pub variants: Vec<VariantReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ReportFormat {
    #[default]
    Json,
    Tsv,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "tsv" => Ok(ReportFormat::Tsv),
            other => Err(format!("unknown report format {other:?}; expected json or tsv")),
        }
    }
}

pub const TSV_HEADER: &str = "variant\tk\tmean_pcc_percent\tseconds\titerations\ttermination\tresidual_u\tresidual_v\tpcc_per_dimension\tobjective_trace";

fn join(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(",")
}

impl RunReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// One header line, then one line per variant. List-valued columns are
    /// comma-separated.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from(TSV_HEADER);
        out.push('\n');
        for v in &self.variants {
            let termination = match v.termination {
                Some(Termination::Converged) => "converged",
                Some(Termination::MaxIters) => "max-iters",
                None => "none",
            };
            writeln!(
                out,
                "{}\t{}\t{:?}\t{:?}\t{}\t{}\t{:?}\t{:?}\t{}\t{}",
                v.variant.name(),
                v.k,
                v.mean_pcc_percent,
                v.wall_seconds,
                v.iterations,
                termination,
                v.constraint_residual_u,
                v.constraint_residual_v,
                join(&v.pcc_per_dimension),
                join(&v.objective_trace),
            )
            .expect("writing to a String");
        }
        out
    }

    pub fn render(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::Json => self.to_json(),
            ReportFormat::Tsv => self.to_tsv(),
        }
    }

    /// Copy with every wall-time field zeroed, for reproducibility checks.
    pub fn without_timing(&self) -> Self {
        let mut copy = self.clone();
        for v in &mut copy.variants {
            v.wall_seconds = 0.0;
        }
        copy
    }
}
