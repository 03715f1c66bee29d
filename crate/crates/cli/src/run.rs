use std::fs;
use std::path::Path;
use std::time::Instant;

use rmen_cca::data_io::{
    append_noise_features, load_dsv, load_mnist_halves, load_model, save_dsv, save_model, split_train_validation,
    synth_two_view, SyntheticSpec,
};
use rmen_cca::linalg::identity_residual;
use rmen_cca::metrics::pcc;
use rmen_cca::parallel::map_range;
use rmen_cca::pipeline::{run_variant, FittedModel, ReportFormat, RunReport, VariantReport};
use rmen_cca::{TwoViewDataset, ViewMatrix};
use serde::Serialize;

use crate::args::{EvalArgs, SynthArgs};
use crate::config::{delimiter_byte, require_file, require_writable, resolve_data, resolve_format, DataSource, FileConfig, Mode, RunConfig};
use crate::exit::CliError;

fn load(source: &DataSource) -> Result<TwoViewDataset, CliError> {
    Ok(match source {
        DataSource::Dsv { x, y, delimiter } => TwoViewDataset::new(load_dsv(x, *delimiter)?, load_dsv(y, *delimiter)?)?,
        DataSource::Mnist(path) => load_mnist_halves(path)?,
    })
}

fn emit(report: &RunReport, format: ReportFormat, out: Option<&Path>) -> Result<(), CliError> {
    let text = report.render(format);
    match out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

/// Load, split, center on the training part, fit every variant, score on
/// the held-out part.
pub fn fit_and_report(cfg: &RunConfig) -> Result<(), CliError> {
    let raw = load(&cfg.data)?;
    let hp = &cfg.hyperparams;
    let (train, valid) = split_train_validation(&raw, cfg.validation, hp.seed)?;
    let train = train.center()?;
    let valid = valid.center_like(&train)?;

    let results = map_range(cfg.variants.len(), |i| run_variant(&train, &valid, cfg.variants[i], hp, cfg.kernel));
    let mut rows = Vec::with_capacity(results.len());
    let mut outcomes = Vec::with_capacity(results.len());
    for result in results {
        let (outcome, row) = result?;
        outcomes.push(outcome);
        rows.push(row);
    }
    if let (Mode::Train, Some(path)) = (cfg.mode, &cfg.model_out) {
        save_model(path, &outcomes[0].to_file(hp, &train))?;
    }
    let report = RunReport {
        command: match cfg.mode {
            Mode::Train => "train",
            Mode::Compare => "compare",
        }
        .into(),
        hyperparams: hp.clone(),
        n_train: train.n(),
        n_eval: valid.n(),
        variants: rows,
    };
    emit(&report, cfg.format, cfg.report_out.as_deref())
}

pub fn eval(args: &EvalArgs) -> Result<(), CliError> {
    require_file(&args.model)?;
    let source = resolve_data(&args.data, &FileConfig::default())?;
    if let Some(out) = &args.out {
        require_writable(out)?;
    }
    let started = Instant::now();
    let file = load_model(&args.model)?;
    let raw = load(&source)?;
    let data = TwoViewDataset::new(raw.x.center_with(&file.means_x)?, raw.y.center_with(&file.means_y)?)?;
    let model = FittedModel::from_file(&file)?;
    let (a, b) = model.project(&data)?;
    let score = pcc(&a, &b)?;
    let n = data.n() as f64;
    let row = VariantReport {
        variant: file.variant,
        k: a.ncols(),
        pcc_per_dimension: score.per_dimension,
        mean_pcc_percent: score.mean_pcc_percent,
        objective_trace: Vec::new(),
        constraint_residual_u: identity_residual(&(a.tr_mul(&a) / n)),
        constraint_residual_v: identity_residual(&(b.tr_mul(&b) / n)),
        iterations: 0,
        termination: None,
        wall_seconds: started.elapsed().as_secs_f64(),
    };
    let report = RunReport {
        command: "eval".into(),
        hyperparams: file.hyperparams.clone(),
        n_train: 0,
        n_eval: data.n(),
        variants: vec![row],
    };
    emit(&report, resolve_format(Some(args.format), &FileConfig::default()), args.out.as_deref())
}

#[derive(Serialize)]
struct Truth<'a> {
    correlations: &'a [f64],
    n: usize,
    test_samples: usize,
    noise_features: usize,
}

pub fn synth(args: &SynthArgs) -> Result<(), CliError> {
    if args.out.is_file() {
        return Err(CliError::Usage(format!("{} is a file, expected a directory", args.out.display())));
    }
    let delimiter = delimiter_byte(args.delimiter)?;
    let spec = SyntheticSpec {
        n: args.n + args.test_samples,
        d1: args.d1,
        d2: args.d2,
        k_true: args.correlations.len(),
        correlations: args.correlations.clone(),
        noise_scale: args.noise,
        seed: args.seed,
    };
    let (mut ds, truth) = synth_two_view(&spec)?;
    if args.noise_features > 0 {
        ds = append_noise_features(&ds, args.noise_features, args.noise_features, 1.0, args.seed.wrapping_add(1))?;
    }
    fs::create_dir_all(&args.out)?;
    let write = |name: &str, view: &ViewMatrix| save_dsv(args.out.join(name), view.data(), delimiter);
    let train = ds.select_samples(&(0..args.n).collect::<Vec<_>>());
    write("x.csv", &train.x)?;
    write("y.csv", &train.y)?;
    if args.test_samples > 0 {
        let test = ds.select_samples(&(args.n..ds.n()).collect::<Vec<_>>());
        write("x_test.csv", &test.x)?;
        write("y_test.csv", &test.y)?;
    }
    let summary = Truth {
        correlations: truth.correlations.as_slice(),
        n: args.n,
        test_samples: args.test_samples,
        noise_features: args.noise_features,
    };
    let mut json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    json.push('\n');
    fs::write(args.out.join("truth.json"), json)?;
    Ok(())
}
