use std::fs;
use std::path::{Path, PathBuf};

use bdris::circuits::BinaryConfig;
use bdris::environment::{build_k, read_matrix_file, synth_re, write_matrix_file, CascadeModel, RadioEnvironment};
use bdris::estimation::{fit, generate_dataset, nmse_db, param_count, Dataset, FitReport, ModelParams};
use bdris::network::validate;
use bdris::optimization::{
    coordinate_ascent_with, exhaustive_search, rssi, ChannelOracle, FittedModel, GroundTruth, OptResult,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{ensure_finite, CliError};

pub const ENVIRONMENT: &str = "environment.smatrix";
pub const CASCADE: &str = "cascade.smatrix";
pub const TRAIN: &str = "train.csv";
pub const TEST: &str = "test.csv";
pub const MANIFEST: &str = "manifest.json";
pub const PARAMS: &str = "params.json";
pub const FIT_REPORT: &str = "fit_report.json";
pub const LOSS: &str = "loss_trajectory.csv";
pub const HELDOUT: &str = "heldout_predictions.csv";
pub const OPTIMIZATION: &str = "optimization.json";
pub const HISTOGRAM: &str = "rssi_histogram.csv";

const EXHAUSTIVE_LIMIT: usize = 24;

fn out_path(cfg: &RunConfig, name: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(cfg.out_dir())?;
    Ok(cfg.out_dir().join(name))
}

/// Input written by an earlier stage; a missing file names the stage to run.
fn input(cfg: &RunConfig, name: &str, stage: &str) -> Result<PathBuf, CliError> {
    let p = cfg.out_dir().join(name);
    if p.is_file() {
        Ok(p)
    } else {
        Err(CliError::Config(format!("{} not found; run `bdris {stage}` first", p.display())))
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn gen_env(cfg: &RunConfig) -> Result<(), CliError> {
    let sc = &cfg.scenario;
    let env = synth_re(sc.n_t, sc.n_r, sc.n_s, sc.loss_factor, sc.seed)?;
    let path = out_path(cfg, ENVIRONMENT)?;
    write_matrix_file(env.s_re(), &path)?;
    println!("wrote {} ({} ports)", path.display(), env.s_re().n());
    Ok(())
}

fn load_environment(cfg: &RunConfig) -> Result<RadioEnvironment, CliError> {
    let s = read_matrix_file(input(cfg, ENVIRONMENT, "gen-env")?)?;
    let sc = &cfg.scenario;
    Ok(RadioEnvironment::new(s, sc.n_t, sc.n_r, sc.n_s)?)
}

#[derive(Serialize)]
struct Manifest<'a> {
    n_t: usize,
    n_r: usize,
    n_s: usize,
    n_c: usize,
    parameters: usize,
    dataset_seed: u64,
    cascade_reciprocity_err: f64,
    cascade_passivity_margin: f64,
    files: [&'static str; 4],
    config: &'a RunConfig,
}

/// Dataset draws use the scenario seed plus one, so they never share a stream with
/// the environment generator.
pub fn dataset_seed(cfg: &RunConfig) -> u64 {
    cfg.scenario.seed.wrapping_add(1)
}

pub fn simulate(cfg: &RunConfig) -> Result<(), CliError> {
    let env = load_environment(cfg)?;
    let slc = cfg.slc()?;
    let bank = cfg.bank()?;
    let k = build_k(&env, &slc)?;
    let est = &cfg.estimation;
    let all = generate_dataset(&env, &slc, &bank, est.n_train + est.n_test, dataset_seed(cfg), est.snr_db)?;
    ensure_finite("dataset", all.samples().iter().flat_map(|(_, h)| h.iter().flat_map(|v| [v.re, v.im])))?;
    let (train, test) = all.split(est.n_train)?;
    train.save(out_path(cfg, TRAIN)?)?;
    test.save(out_path(cfg, TEST)?)?;
    write_matrix_file(k.s_k(), out_path(cfg, CASCADE)?)?;

    let rep = validate(k.s_k());
    let manifest = Manifest {
        n_t: k.n_t(),
        n_r: k.n_r(),
        n_s: slc.n_s(),
        n_c: k.n_c(),
        parameters: param_count(k.n_a(), k.n_c())?,
        dataset_seed: dataset_seed(cfg),
        cascade_reciprocity_err: rep.reciprocity_err,
        cascade_passivity_margin: rep.passivity_margin,
        files: [TRAIN, TEST, CASCADE, MANIFEST],
        config: cfg,
    };
    write_json(&out_path(cfg, MANIFEST)?, &manifest)?;
    println!(
        "simulated {} training and {} held-out configurations over {} loads into {}",
        train.len(),
        test.len(),
        k.n_c(),
        cfg.out_dir().display()
    );
    Ok(())
}

#[derive(Serialize)]
struct FitSummary<'a> {
    train_samples: usize,
    test_samples: usize,
    heldout_nmse_db: f64,
    report: &'a FitReport,
}

pub fn estimate(cfg: &RunConfig) -> Result<(), CliError> {
    let train = Dataset::load(input(cfg, TRAIN, "simulate")?)?;
    let test = Dataset::load(input(cfg, TEST, "simulate")?)?;
    let (params, report) = fit(&train, &cfg.estimation.fit)?;
    ensure_finite("fitted parameters", params.to_vec())?;
    let nmse = nmse_db(&params, &test)?;
    ensure_finite("held-out NMSE", [nmse])?;

    fs::write(out_path(cfg, PARAMS)?, params.to_json()?)?;

    let mut w = csv::Writer::from_path(out_path(cfg, LOSS)?)?;
    w.write_record(["iteration", "loss"])?;
    for (i, l) in report.trajectory.iter().enumerate() {
        w.write_record([i.to_string(), l.to_string()])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(out_path(cfg, HELDOUT)?)?;
    w.write_record([
        "sample",
        "rx",
        "tx",
        "true_amplitude",
        "true_phase",
        "predicted_amplitude",
        "predicted_phase",
    ])?;
    for (s, (b, h)) in test.samples().iter().enumerate() {
        let pred = params.predict(b)?;
        for r in 0..h.nrows() {
            for t in 0..h.ncols() {
                let (v, p) = (h[(r, t)], pred[(r, t)]);
                w.write_record([
                    s.to_string(),
                    (r + 1).to_string(),
                    (t + 1).to_string(),
                    v.norm().to_string(),
                    v.arg().to_string(),
                    p.norm().to_string(),
                    p.arg().to_string(),
                ])?;
            }
        }
    }
    w.flush()?;

    let summary = FitSummary { train_samples: train.len(), test_samples: test.len(), heldout_nmse_db: nmse, report: &report };
    write_json(&out_path(cfg, FIT_REPORT)?, &summary)?;
    println!(
        "fit {} parameters: train loss {:.3e}, held-out NMSE {nmse:.1} dB (restart {} of {})",
        params.dof(),
        report.final_loss,
        report.best_restart + 1,
        report.restarts.len()
    );
    Ok(())
}

#[derive(Serialize)]
struct OptimizationSummary {
    coordinate_ascent: OptResult,
    predicted_rssi: f64,
    ground_truth_rssi: f64,
    relative_difference: f64,
    exhaustive: Option<OptResult>,
    reaches_exhaustive_optimum: Option<bool>,
}

fn load_cascade(cfg: &RunConfig, params: &ModelParams) -> Result<CascadeModel, CliError> {
    let s_k = read_matrix_file(input(cfg, CASCADE, "simulate")?)?;
    let k = CascadeModel::new(s_k, cfg.scenario.n_t, cfg.scenario.n_r, params.n_c())?;
    if (k.n_t(), k.n_r()) != (params.n_t(), params.n_r()) {
        return Err(CliError::Config("fitted parameters do not match the scenario antennas".into()));
    }
    Ok(k)
}

pub fn optimize(cfg: &RunConfig) -> Result<(), CliError> {
    let params = ModelParams::from_json(&fs::read_to_string(input(cfg, PARAMS, "estimate")?)?)?;
    let k = load_cascade(cfg, &params)?;
    let bank = cfg.bank()?;
    let opt = &cfg.optimization;
    let n_c = params.n_c();

    let model = FittedModel::new(&params);
    let truth = GroundTruth::new(&k, &bank);
    let ca = coordinate_ascent_with(&model, n_c, opt.seed, opt.restarts, opt.budget.unwrap_or(10 * n_c))?;
    let gt_rssi = rssi(&truth.channel(&ca.b_opt)?);
    ensure_finite("RSSI", [ca.r_opt, gt_rssi])?;
    let rel = (ca.r_opt - gt_rssi).abs() / gt_rssi;

    let exhaustive = if opt.exhaustive && n_c <= EXHAUSTIVE_LIMIT {
        Some(exhaustive_search(&truth, n_c)?)
    } else {
        None
    };
    let reaches = exhaustive.as_ref().map(|ex| gt_rssi >= ex.r_opt * (1.0 - 1e-9));

    write_histogram(cfg, &model, &truth, n_c)?;
    println!(
        "b_opt = {}: predicted RSSI {:.6e}, ground truth {gt_rssi:.6e} (rel diff {rel:.2e})",
        ca.b_opt, ca.r_opt
    );
    if let Some(ex) = &exhaustive {
        println!("exhaustive optimum {} with RSSI {:.6e}", ex.b_opt, ex.r_opt);
    }
    let summary = OptimizationSummary {
        predicted_rssi: ca.r_opt,
        coordinate_ascent: ca,
        ground_truth_rssi: gt_rssi,
        relative_difference: rel,
        exhaustive,
        reaches_exhaustive_optimum: reaches,
    };
    write_json(&out_path(cfg, OPTIMIZATION)?, &summary)?;
    Ok(())
}

/// RSSI density over random configurations for the ground truth and the fitted model,
/// on shared bins.
fn write_histogram(cfg: &RunConfig, model: &FittedModel, truth: &GroundTruth, n_c: usize) -> Result<(), CliError> {
    let opt = &cfg.optimization;
    let mut rng = ChaCha8Rng::seed_from_u64(opt.seed);
    rng.set_stream(1);
    let mut gt = Vec::with_capacity(opt.histogram_samples);
    let mut pred = Vec::with_capacity(opt.histogram_samples);
    for _ in 0..opt.histogram_samples {
        let b = BinaryConfig::random(n_c, &mut rng);
        gt.push(rssi(&truth.channel(&b)?));
        pred.push(rssi(&model.channel(&b)?));
    }
    ensure_finite("RSSI samples", gt.iter().chain(&pred).copied())?;
    let lo = gt.iter().chain(&pred).copied().fold(f64::INFINITY, f64::min);
    let hi = gt.iter().chain(&pred).copied().fold(f64::NEG_INFINITY, f64::max);
    let bins = opt.histogram_bins;
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let counts = |xs: &[f64]| {
        let mut c = vec![0usize; bins];
        for &x in xs {
            c[(((x - lo) / width) as usize).min(bins - 1)] += 1;
        }
        c
    };
    let (cg, cp) = (counts(&gt), counts(&pred));
    let norm = opt.histogram_samples as f64 * width;
    let mut w = csv::Writer::from_path(out_path(cfg, HISTOGRAM)?)?;
    w.write_record(["rssi_low", "rssi_high", "pdf_ground_truth", "pdf_predicted"])?;
    for i in 0..bins {
        w.write_record([
            (lo + i as f64 * width).to_string(),
            (lo + (i + 1) as f64 * width).to_string(),
            (cg[i] as f64 / norm).to_string(),
            (cp[i] as f64 / norm).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
