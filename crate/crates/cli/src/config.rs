//! Turns flags plus an optional JSON config file into a validated run.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rmen_cca::kernel::KernelKind;
use rmen_cca::pipeline::{ReportFormat, Variant};
use rmen_cca::Hyperparams;
use serde::Deserialize;

use crate::args::{CompareArgs, DataArgs, FitArgs, FormatArg, KernelArg, TrainArgs};
use crate::exit::CliError;

/// Keys mirror the long flag names with `_` for `-`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub x: Option<PathBuf>,
    pub y: Option<PathBuf>,
    pub mnist: Option<PathBuf>,
    pub delimiter: Option<char>,
    pub variant: Option<String>,
    pub variants: Option<Vec<String>>,
    pub k: Option<usize>,
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    pub eta: Option<f64>,
    pub gamma: Option<f64>,
    pub zeta: Option<f64>,
    pub iters: Option<usize>,
    pub tol: Option<f64>,
    pub batch_size: Option<usize>,
    pub kernel: Option<KernelArg>,
    pub kernel_width: Option<f64>,
    pub seed: Option<u64>,
    pub validation: Option<f64>,
    pub format: Option<FormatArg>,
    pub out: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Dsv { x: PathBuf, y: PathBuf, delimiter: u8 },
    Mnist(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Compare,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mode: Mode,
    pub data: DataSource,
    pub variants: Vec<Variant>,
    pub hyperparams: Hyperparams,
    pub kernel: Option<KernelKind>,
    pub validation: f64,
    pub model_out: Option<PathBuf>,
    pub report_out: Option<PathBuf>,
    pub format: ReportFormat,
}

pub const DEFAULT_VALIDATION: f64 = 0.2;
pub const DEFAULT_KERNEL_WIDTH: f64 = 1.0;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn parse_variant(name: &str) -> Result<Variant, CliError> {
    name.trim().parse().map_err(usage)
}

pub fn delimiter_byte(c: char) -> Result<u8, CliError> {
    if c.is_ascii() {
        Ok(c as u8)
    } else {
        Err(usage(format!("delimiter {c:?} is not a single ASCII character")))
    }
}

pub fn require_file(path: &Path) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(io::Error::new(io::ErrorKind::NotFound, format!("input file {} does not exist", path.display())).into())
    }
}

/// The file may not exist yet, but its directory must.
pub fn require_writable(path: &Path) -> Result<(), CliError> {
    if path.is_dir() {
        return Err(usage(format!("output path {} is a directory", path.display())));
    }
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() && !dir.is_dir() => Err(io::Error::new(
            io::ErrorKind::NotFound,
            format!("output directory {} does not exist", dir.display()),
        )
        .into()),
        _ => Ok(()),
    }
}

pub fn resolve_data(data: &DataArgs, file: &FileConfig) -> Result<DataSource, CliError> {
    let from_flags = data.x.is_some() || data.y.is_some() || data.mnist.is_some();
    let (x, y, mnist) = if from_flags {
        (data.x.clone(), data.y.clone(), data.mnist.clone())
    } else {
        (file.x.clone(), file.y.clone(), file.mnist.clone())
    };
    let delimiter = delimiter_byte(data.delimiter.or(file.delimiter).unwrap_or(','))?;
    let source = match (x, y, mnist) {
        (Some(x), Some(y), None) => DataSource::Dsv { x, y, delimiter },
        (None, None, Some(m)) => DataSource::Mnist(m),
        (_, _, Some(_)) => return Err(usage("give either --mnist or --x and --y, not both")),
        (None, None, None) => return Err(usage("no input data; give --x and --y, or --mnist")),
        _ => return Err(usage("--x and --y must be given together")),
    };
    match &source {
        DataSource::Dsv { x, y, .. } => {
            require_file(x)?;
            require_file(y)?;
        }
        DataSource::Mnist(m) => require_file(m)?,
    }
    Ok(source)
}

pub fn resolve_format(flag: Option<FormatArg>, file: &FileConfig) -> ReportFormat {
    match flag.or(file.format).unwrap_or(FormatArg::Json) {
        FormatArg::Json => ReportFormat::Json,
        FormatArg::Tsv => ReportFormat::Tsv,
    }
}

fn resolve_hyperparams(fit: &FitArgs, file: &FileConfig) -> Result<Hyperparams, CliError> {
    let d = Hyperparams::default();
    let hp = Hyperparams {
        k: fit.k.or(file.k).unwrap_or(d.k),
        lambda1: fit.lambda1.or(file.lambda1).unwrap_or(d.lambda1),
        lambda2: fit.lambda2.or(file.lambda2).unwrap_or(d.lambda2),
        eta: fit.eta.or(file.eta).unwrap_or(d.eta),
        gamma: fit.gamma.or(file.gamma).unwrap_or(d.gamma),
        zeta: fit.zeta.or(file.zeta).unwrap_or(d.zeta),
        max_iters: fit.iters.or(file.iters).unwrap_or(d.max_iters),
        tol: fit.tol.or(file.tol).unwrap_or(d.tol),
        batch_size: fit.batch_size.or(file.batch_size),
        seed: fit.seed.or(file.seed).unwrap_or(d.seed),
        row_penalty: d.row_penalty,
    };
    hp.check()?;
    Ok(hp)
}

fn resolve_kernel(fit: &FitArgs, file: &FileConfig, variants: &[Variant], hp: &Hyperparams) -> Result<Option<KernelKind>, CliError> {
    let kind = fit.kernel.or(file.kernel);
    let width = fit.kernel_width.or(file.kernel_width);
    if !variants.contains(&Variant::KernelRmen) {
        if width.is_some() {
            return Err(usage("--kernel-width needs the kernel-rmen variant"));
        }
        if kind.is_some() {
            return Err(usage("--kernel needs the kernel-rmen variant"));
        }
        return Ok(None);
    }
    if hp.batch_size.is_some() {
        return Err(usage("kernel-rmen is full-batch only; drop --batch-size"));
    }
    let kernel = match kind.unwrap_or(KernelArg::Gaussian) {
        KernelArg::Gaussian => KernelKind::Gaussian {
            width: width.unwrap_or(DEFAULT_KERNEL_WIDTH),
        },
        KernelArg::Linear if width.is_some() => return Err(usage("--kernel-width only applies to the gaussian kernel")),
        KernelArg::Linear => KernelKind::Linear,
    };
    kernel.check()?;
    Ok(Some(kernel))
}

fn load_file_config(fit: &FitArgs) -> Result<FileConfig, CliError> {
    match &fit.config {
        Some(path) => FileConfig::load(path),
        None => Ok(FileConfig::default()),
    }
}

fn finish(
    mode: Mode,
    data: &DataArgs,
    fit: &FitArgs,
    file: &FileConfig,
    variants: Vec<Variant>,
    model_out: Option<PathBuf>,
    report_out: Option<PathBuf>,
) -> Result<RunConfig, CliError> {
    let hyperparams = resolve_hyperparams(fit, file)?;
    let kernel = resolve_kernel(fit, file, &variants, &hyperparams)?;
    let validation = fit.validation.or(file.validation).unwrap_or(DEFAULT_VALIDATION);
    if !(validation > 0.0 && validation < 1.0) {
        return Err(rmen_cca::CcaError::InvalidFraction(validation).into());
    }
    let data = resolve_data(data, file)?;
    for path in model_out.iter().chain(report_out.iter()) {
        require_writable(path)?;
    }
    if model_out.is_some() && model_out == report_out {
        return Err(usage("the model and the report cannot share a path"));
    }
    Ok(RunConfig {
        mode,
        data,
        variants,
        hyperparams,
        kernel,
        validation,
        model_out,
        report_out,
        format: resolve_format(fit.format, file),
    })
}

pub fn resolve_train(args: &TrainArgs) -> Result<RunConfig, CliError> {
    let file = load_file_config(&args.fit)?;
    if file.variants.is_some() {
        return Err(CliError::Config("`variants` belongs to compare; train takes `variant`".into()));
    }
    let variant = match args.variant.as_deref().or(file.variant.as_deref()) {
        Some(name) => parse_variant(name)?,
        None => Variant::Rmen,
    };
    let model_out = args.out.clone().or(file.out.clone());
    let report_out = args.report.clone().or(file.report.clone());
    finish(Mode::Train, &args.data, &args.fit, &file, vec![variant], model_out, report_out)
}

pub fn resolve_compare(args: &CompareArgs) -> Result<RunConfig, CliError> {
    let file = load_file_config(&args.fit)?;
    if file.variant.is_some() || file.report.is_some() {
        return Err(CliError::Config("compare takes `variants` and `out`".into()));
    }
    let names = args
        .variants
        .clone()
        .or(file.variants.clone())
        .unwrap_or_else(|| vec!["rmen".into(), "appgrad".into(), "closed-form".into()]);
    let variants = names.iter().map(|n| parse_variant(n)).collect::<Result<Vec<_>, _>>()?;
    if variants.is_empty() {
        return Err(usage("--variants is empty"));
    }
    let report_out = args.out.clone().or(file.out.clone());
    finish(Mode::Compare, &args.data, &args.fit, &file, variants, None, report_out)
}
