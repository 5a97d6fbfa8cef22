use std::fs;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use super::{Check, Outcome};
use crate::analysis::{default_resolution, lp_norm_mc, separation_violation_rate, sup_norm_grid};
use crate::approx_space::{
    build_basis, fit_interpolating, rate_experiment, rate_resolution, separated_samples, BasisSpec,
};
use crate::dataset::{load_csv, split, Dataset, SplitOptions};
use crate::deepen::{
    bad_interpolant, bad_interpolant_bound, check_student, deepen, make_plan, DeepenFlavor,
    DeepenPlan,
};
use crate::error::{invalid, Result};
use crate::gate::{verify_gate, GateFlavor, GateSpec};
use crate::net::ReluNet;
use crate::synth::{random_teacher, sample_dataset, target, Target, TargetKind};
use crate::trainer::{
    compare_constructed, epoch_sweep, train_model, width_sweep, TrainConfig, TrainData,
};

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Deepen a teacher net into an exact interpolant of a dataset.
    Deepen(DeepenArgs),
    /// Build the sum-of-bumps interpolant that is tiny in L^p.
    BadInterp(BadInterpArgs),
    /// Sup-error rate of the hat-function basis, with and without interpolation.
    ApproxRate(ApproxRateArgs),
    /// Fit the hat-function basis subject to exact interpolation of a dataset.
    InterpFit(InterpFitArgs),
    /// Train a fully connected ReLU net with Adam.
    Train(TrainArgs),
    /// Train over a grid of depths and widths.
    Sweep(SweepArgs),
    /// Monte-Carlo L^p and grid sup norms of a target or a net.
    Norms(NormsArgs),
    /// Measure product-gate errors, depths and zero preservation.
    VerifyGates(VerifyGatesArgs),
    /// Trained nets, a deepened teacher and classical baselines side by side.
    Compare(CompareArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Deepen(_) => "deepen",
            Self::BadInterp(_) => "bad-interp",
            Self::ApproxRate(_) => "approx-rate",
            Self::InterpFit(_) => "interp-fit",
            Self::Train(_) => "train",
            Self::Sweep(_) => "sweep",
            Self::Norms(_) => "norms",
            Self::VerifyGates(_) => "verify-gates",
            Self::Compare(_) => "compare",
        }
    }

    pub(super) fn run(&self, seed: u64) -> Result<Outcome> {
        match self {
            Self::Deepen(a) => a.run(seed),
            Self::BadInterp(a) => a.run(seed),
            Self::ApproxRate(a) => a.run(seed),
            Self::InterpFit(a) => a.run(seed),
            Self::Train(a) => a.run(seed),
            Self::Sweep(a) => a.run(seed),
            Self::Norms(a) => a.run(seed),
            Self::VerifyGates(a) => a.run(seed),
            Self::Compare(a) => a.run(seed),
        }
    }
}

/// Where the samples come from: a CSV file or a synthetic target.
#[derive(Clone, Debug, Args, Serialize)]
pub struct DataArgs {
    /// CSV with feature columns followed by the label; synthetic data when absent.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Map CSV features onto [-1, 1] by per-column min/max.
    #[arg(long)]
    pub normalize: bool,
    /// Input dimension of synthetic data.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Number of synthetic samples.
    #[arg(long)]
    pub points: Option<usize>,
    /// Synthetic target: smooth[:r], sine, holder[:r], additive or sparse[:u].
    #[arg(long)]
    pub target: Option<String>,
    /// Half-width of the uniform label noise.
    #[arg(long)]
    pub noise: Option<f64>,
}

struct Defaults {
    dim: usize,
    points: usize,
    target: &'static str,
    noise: f64,
}

struct Loaded {
    data: TrainData,
    target: Option<Target>,
    warnings: Vec<String>,
}

impl DataArgs {
    fn synthetic(&self, def: &Defaults) -> Result<(usize, usize, Target)> {
        let d = self.dim.unwrap_or(def.dim);
        let m = self.points.unwrap_or(def.points);
        let kind: TargetKind = self.target.as_deref().unwrap_or(def.target).parse()?;
        Ok((d, m, target(&kind, d)?))
    }

    fn load(&self, def: &Defaults, train_ratio: f64, seed: u64) -> Result<Loaded> {
        if let Some(path) = &self.data {
            if self.dim.is_some()
                || self.points.is_some()
                || self.target.is_some()
                || self.noise.is_some()
            {
                return Err(invalid(
                    "--dim, --points, --target and --noise apply only to synthetic data",
                ));
            }
            let opts = SplitOptions {
                normalize: self.normalize,
                train_ratio,
                seed,
            };
            let split = load_csv(path, &opts)?;
            let warnings = split.warnings.clone();
            for w in &warnings {
                eprintln!("warning: {w}");
            }
            return Ok(Loaded {
                data: split.into(),
                target: None,
                warnings,
            });
        }
        let (d, m, f) = self.synthetic(def)?;
        let ds = sample_dataset(&*f, d, m, self.noise.unwrap_or(def.noise), seed)?;
        let (train, test) = split(&ds, train_ratio, seed)?;
        Ok(Loaded {
            data: TrainData { train, test },
            target: Some(f),
            warnings: Vec::new(),
        })
    }
}

fn data_summary(loaded: &Loaded) -> serde_json::Value {
    json!({
        "dim": loaded.data.train.dim(),
        "train": loaded.data.train.len(),
        "test": loaded.data.test.as_ref().map_or(0, Dataset::len),
        "synthetic": loaded.target.is_some(),
        "warnings": loaded.warnings,
    })
}

fn add_noise(ds: Dataset, level: f64, seed: u64) -> Result<Dataset> {
    if !(0.0..=1.0).contains(&level) {
        return Err(invalid(format!(
            "noise level must lie in [0, 1], got {level}"
        )));
    }
    if level == 0.0 {
        return Ok(ds);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels = ds
        .labels()
        .iter()
        .map(|y| y + rng.gen_range(-level..=level))
        .collect();
    ds.with_labels(labels)
}

fn read_net(path: &PathBuf) -> Result<ReluNet> {
    ReluNet::from_json(&fs::read(path)?)
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct DeepenArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Teacher net JSON; a random teacher is drawn when absent.
    #[arg(long)]
    pub teacher: Option<PathBuf>,
    /// Hidden widths of the random teacher.
    #[arg(long, value_delimiter = ',', default_value = "16,16")]
    pub teacher_widths: Vec<usize>,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    /// Gate constant θ.
    #[arg(long, default_value_t = 1.0)]
    pub theta: f64,
    /// Depth parameter L̃ of the squaring nets.
    #[arg(long = "tilde-l", default_value_t = 1)]
    pub tilde_l: usize,
    /// fixed-depth or fully-connected.
    #[arg(long, default_value = "fixed-depth")]
    pub flavor: DeepenFlavor,
    /// Monte-Carlo samples for the closeness check.
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
}

impl DeepenArgs {
    fn run(&self, seed: u64) -> Result<Outcome> {
        let def = Defaults {
            dim: 2,
            points: 50,
            target: "additive",
            noise: 0.0,
        };
        let loaded = self.data.load(&def, 1.0, seed)?;
        let ds = &loaded.data.train;
        let teacher = match &self.teacher {
            Some(path) => read_net(path)?,
            None => random_teacher(ds.dim(), &self.teacher_widths, seed.wrapping_add(1))?,
        };
        if teacher.input_dim() != ds.dim() {
            return Err(invalid(format!(
                "teacher takes {} inputs but the data has dimension {}",
                teacher.input_dim(),
                ds.dim()
            )));
        }
        let plan = make_plan(
            ds,
            &teacher,
            self.epsilon,
            self.p,
            self.theta,
            self.tilde_l,
            self.flavor,
        )?;
        let student = deepen(&teacher, ds, &plan)?;
        let check = check_student(
            &student,
            &teacher,
            ds,
            &plan,
            self.samples,
            seed.wrapping_add(2),
        )?;
        let mut checks = vec![
            Check::at_most("interpolation", check.max_residual, 1e-8),
            Check::at_most("locality", check.locality_deviation, 1e-12),
            Check::at_most(
                "closeness",
                check.distance.value,
                check.distance_bound + 3.0 * check.distance.stderr,
            ),
            Check::at_most(
                "off-support equality",
                check.off_support_error,
                check.off_support_bound,
            ),
        ];
        if let Some(expected) = check.expected_depth {
            checks.push(Check {
                name: "depth identity".into(),
                passed: check.depth == expected,
                value: Some(check.depth as f64),
                limit: Some(expected as f64),
            });
        }
        // informational: how often uniform samples of this size fall below m^{-2/d}
        let separation = (ds.len() >= 2)
            .then(|| separation_violation_rate(ds.dim(), ds.len(), 2.0, 100))
            .transpose()?;
        let table = vec![
            format!("data        m = {}, d = {}", ds.len(), ds.dim()),
            format!(
                "teacher     depth {}, {} params",
                teacher.depth(),
                teacher.param_count()
            ),
            format!(
                "student     depth {}, {} params",
                student.depth(),
                student.param_count()
            ),
            format!(
                "plan        tau {:.4e}, nu {:.4e}, C* {:.4}",
                plan.tau, plan.nu, plan.c_star
            ),
            format!(
                "L{} distance {:.4e} ± {:.1e} (bound {:.4e})",
                self.p, check.distance.value, check.distance.stderr, check.distance_bound
            ),
        ];
        Ok(Outcome {
            result: json!({
                "data": data_summary(&loaded),
                "teacher": teacher.summarize(),
                "student": student.summarize(),
                "plan": plan,
                "check": check,
                "separation_study": separation,
            }),
            checks,
            artifacts: vec![("student.json".into(), student.to_json())],
            table,
        })
    }
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct BadInterpArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Bump width; defaults to 0.9 of the largest admissible value.
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub p: f64,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
}

impl BadInterpArgs {
    fn run(&self, seed: u64) -> Result<Outcome> {
        let def = Defaults {
            dim: 1,
            points: 5,
            target: "sine",
            noise: 0.0,
        };
        let loaded = self.data.load(&def, 1.0, seed)?;
        let ds = &loaded.data.train;
        let tau = match self.tau {
            Some(t) => t,
            None => 0.9 * DeepenPlan::separation_bound(ds.separation_radius()?, ds.dim()),
        };
        let net = bad_interpolant(ds, tau)?;
        let residual = ds
            .points()
            .iter()
            .zip(ds.labels())
            .map(|(x, y)| (net.eval(x) - y).abs())
            .fold(0.0, f64::max);
        let norm = lp_norm_mc(
            &|x: &[f64]| net.eval(x),
            ds.dim(),
            self.p,
            self.samples,
            seed.wrapping_add(2),
        )?;
        let bound = bad_interpolant_bound(ds, tau, self.p);
        let checks = vec![
            Check::at_most("interpolation", residual, 1e-8),
            Check::at_most("small norm", norm.value, 2.0 * bound),
        ];
        let table = vec![
            format!("data        m = {}, d = {}", ds.len(), ds.dim()),
            format!("tau         {tau:.4e}"),
            format!(
                "L{} norm     {:.4e} ± {:.1e}",
                self.p, norm.value, norm.stderr
            ),
            format!("2·bound     {:.4e}", 2.0 * bound),
        ];
        Ok(Outcome {
            result: json!({
                "data": data_summary(&loaded),
                "tau": tau,
                "net": net.summarize(),
                "max_residual": residual,
                "norm": norm,
                "bound": bound,
            }),
            checks,
            artifacts: vec![("net.json".into(), net.to_json())],
            table,
        })
    }
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct ApproxRateArgs {
    /// Target: smooth[:r], sine, holder[:r], additive or sparse[:u].
    #[arg(long, default_value = "sine")]
    pub target: String,
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    /// Smoothness order used for the basis parameters and the slope check.
    #[arg(long, default_value_t = 1.0)]
    pub r: f64,
    /// Polynomial degree per axis.
    #[arg(long, default_value_t = 0)]
    pub s: usize,
    #[arg(long = "n-list", value_delimiter = ',', default_value = "4,8,16")]
    pub n_list: Vec<usize>,
    /// Number of interpolation constraints.
    #[arg(long, default_value_t = 3)]
    pub points: usize,
}

impl ApproxRateArgs {
    fn run(&self, seed: u64) -> Result<Outcome> {
        let kind: TargetKind = self.target.parse()?;
        let f = target(&kind, self.dim)?;
        let n_min = self.n_list.iter().copied().min().unwrap_or(1).max(1);
        let ds = separated_samples(&f, self.dim, self.points, 2.0 / n_min as f64, seed)?;
        let report = rate_experiment(&f, self.r, self.dim, &self.n_list, self.s, &ds)?;
        let worst_ratio = report
            .rows
            .iter()
            .map(|r| r.sup_err_constrained / (5.0 * r.sup_err_unconstrained + 1e-6))
            .fold(0.0, f64::max);
        let worst_residual = report
            .rows
            .iter()
            .map(|r| r.max_residual)
            .fold(0.0, f64::max);
        let checks = vec![
            Check::at_most(
                "rate slope",
                report.unconstrained.slope,
                -0.7 * self.r / self.dim as f64,
            ),
            Check::at_least("slope fit r2", report.unconstrained.r_squared, 0.9),
            Check::at_most("constrained within 5x", worst_ratio, 1.0),
            Check::at_most("interpolation", worst_residual, 1e-8),
        ];
        let csv = report.to_csv();
        Ok(Outcome {
            result: serde_json::to_value(&report).unwrap_or_default(),
            checks,
            table: csv.lines().map(str::to_string).collect(),
            artifacts: vec![("rate.csv".into(), csv)],
        })
    }
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct InterpFitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Grid size per axis.
    #[arg(long, default_value_t = 16)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub s: usize,
    #[arg(long, default_value_t = 1.0)]
    pub r: f64,
    /// Also fit the synthetic target in least squares (minimum coefficient norm otherwise).
    #[arg(long)]
    pub fit_target: bool,
}

impl InterpFitArgs {
    fn run(&self, seed: u64) -> Result<Outcome> {
        let def = Defaults {
            dim: 1,
            points: 5,
            target: "sine",
            noise: 0.0,
        };
        let (ds, f) = match &self.data.data {
            Some(_) => {
                let loaded = self.data.load(&def, 1.0, seed)?;
                (loaded.data.train, None)
            }
            None => {
                let (d, m, f) = self.data.synthetic(&def)?;
                let ds = separated_samples(&f, d, m, 2.0 / self.n.max(1) as f64, seed)?;
                (
                    add_noise(
                        ds,
                        self.data.noise.unwrap_or(def.noise),
                        seed.wrapping_add(1),
                    )?,
                    Some(f),
                )
            }
        };
        if self.fit_target && f.is_none() {
            return Err(invalid("--fit-target needs synthetic data"));
        }
        let d = ds.dim();
        let spec = BasisSpec::for_rate(self.n, self.s, self.r, d)?;
        let basis = Arc::new(build_basis(&spec, d)?);
        let mut model = fit_interpolating(
            &basis,
            &ds,
            f.as_ref().filter(|_| self.fit_target),
            rate_resolution(self.n, d),
        )?;
        let report = model.fit_report.clone();
        let coeff_norm = model.coefficients.iter().map(|c| c * c).sum::<f64>().sqrt();
        let net = model.combined()?.clone();
        let checks = vec![Check::at_most("interpolation", report.max_residual, 1e-8)];
        let table = vec![
            format!("data        m = {}, d = {d}", ds.len()),
            format!(
                "basis       {} elements, {} params",
                basis.len(),
                basis.param_count()
            ),
            format!(
                "net         depth {}, {} params",
                net.depth(),
                net.param_count()
            ),
            format!("residual    {:.4e}", report.max_residual),
            format!("|c|_2       {coeff_norm:.4e}"),
        ];
        Ok(Outcome {
            result: json!({
                "spec": spec,
                "basis_size": basis.len(),
                "fit": report,
                "coefficient_norm": coeff_norm,
                "net": net.summarize(),
            }),
            checks,
            artifacts: vec![("net.json".into(), net.to_json())],
            table,
        })
    }
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// TOML training config; flags below override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Step budget.
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub record_every: Option<usize>,
    #[arg(long)]
    pub target_rmse: Option<f64>,
    /// Fraction of the samples used for training.
    #[arg(long)]
    pub split: Option<f64>,
}

impl TrainArgs {
    fn config(&self, seed: u64) -> Result<TrainConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)?;
                toml::from_str(&text)
                    .map_err(|e| invalid(format!("config {}: {e}", path.display())))?
            }
            None => TrainConfig::default(),
        };
        cfg.seed = seed;
        if let Some(v) = self.depth {
            cfg.depth = v;
        }
        if let Some(v) = self.width {
            cfg.width = v;
        }
        if let Some(v) = self.lr {
            cfg.lr = v;
        }
        if let Some(v) = self.epochs {
            cfg.epochs = v;
        }
        if self.batch.is_some() {
            cfg.batch = self.batch;
        }
        if let Some(v) = self.record_every {
            cfg.record_every = v;
        }
        if self.target_rmse.is_some() {
            cfg.target_rmse = self.target_rmse;
        }
        if let Some(v) = self.split {
            cfg.split_ratio = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn run(&self, seed: u64) -> Result<Outcome> {
        let cfg = self.config(seed)?;
        let def = Defaults {
            dim: 2,
            points: 200,
            target: "smooth",
            noise: 0.0,
        };
        let loaded = self.data.load(&def, cfg.split_ratio, seed)?;
        let (hist, mlp) = train_model(&cfg, &loaded.data)?;
        let first = hist.train_rmse.first().copied().unwrap_or(f64::NAN);
        let checks = vec![
            Check::holds("finite loss", !hist.diverged),
            Check::at_most("train RMSE decreased", hist.final_train(), first),
        ];
        let table = vec![
            format!(
                "net         depth {}, width {}, {} params",
                cfg.depth, cfg.width, hist.params
            ),
            format!("steps       {}", hist.steps_run),
            format!("train RMSE  {:.4e} (start {first:.4e})", hist.final_train()),
            format!(
                "test RMSE   {}",
                hist.final_test().map_or("-".into(), |t| format!("{t:.4e}"))
            ),
        ];
        Ok(Outcome {
            result: json!({
                "data": data_summary(&loaded),
                "config": cfg,
                "final_train_rmse": hist.final_train(),
                "final_test_rmse": hist.final_test(),
                "min_test_rmse": hist.min_test(),
                "history": hist,
            }),
            checks,
            artifacts: vec![("net.json".into(), mlp.to_relu_net()?.to_json())],
            table,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepMode {
    /// Final RMSE per (depth, width) cell.
    Width,
    /// Full train/test curves per cell.
    Epoch,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct SweepArgs {
    #[arg(long, value_enum, default_value_t = SweepMode::Width)]
    pub mode: SweepMode,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_delimiter = ',', default_value = "1,2,4")]
    pub depths: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "2,8,32,128")]
    pub widths: Vec<usize>,
    #[arg(long, default_value_t = 2000)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long)]
    pub target_rmse: Option<f64>,
    #[arg(long, default_value_t = 10)]
    pub record_every: usize,
}

impl SweepArgs {
    fn run(&self, seed: u64) -> Result<Outcome> {
        let base = TrainConfig {
            epochs: self.epochs,
            lr: self.lr,
            seed,
            target_rmse: self.target_rmse,
            record_every: self.record_every,
            ..TrainConfig::default()
        };
        base.validate()?;
        let def = Defaults {
            dim: 2,
            points: 100,
            target: "additive",
            noise: 0.0,
        };
        let loaded = self.data.load(&def, base.split_ratio, seed)?;
        match self.mode {
            SweepMode::Width => {
                let report = width_sweep(&self.depths, &self.widths, &loaded.data, &base)?;
                let mut csv = String::from(
                    "depth,width,params,final_train_rmse,final_test_rmse,min_test_rmse,steps\n",
                );
                for c in &report.cells {
                    let opt = |v: Option<f64>| v.map_or(String::new(), |t| format!("{t:.6e}"));
                    csv.push_str(&format!(
                        "{},{},{},{:.6e},{},{},{}\n",
                        c.depth,
                        c.width,
                        c.params,
                        c.final_train_rmse,
                        opt(c.final_test_rmse),
                        opt(c.min_test_rmse),
                        c.steps_run
                    ));
                }
                let checks = vec![Check::holds(
                    "train RMSE non-increasing past m params",
                    report.train_nonincreasing_beyond_threshold(),
                )];
                Ok(Outcome {
                    result: json!({"data": data_summary(&loaded), "sweep": report}),
                    checks,
                    table: csv.lines().map(str::to_string).collect(),
                    artifacts: vec![("sweep.csv".into(), csv)],
                })
            }
            SweepMode::Epoch => {
                let configs: Vec<TrainConfig> = self
                    .depths
                    .iter()
                    .flat_map(|&depth| {
                        let base = &base;
                        self.widths.iter().map(move |&width| TrainConfig {
                            depth,
                            width,
                            ..base.clone()
                        })
                    })
                    .collect();
                let curves = epoch_sweep(&configs, &loaded.data)?;
                let mut csv = String::from("depth,width,step,train_rmse,test_rmse\n");
                let mut table = vec!["depth  width  final train  final test  min test".to_string()];
                for c in &curves {
                    let Some(h) = &c.history else {
                        table.push(format!(
                            "{:>5}  {:>5}  failed: {}",
                            c.config.depth,
                            c.config.width,
                            c.error.as_deref().unwrap_or("")
                        ));
                        continue;
                    };
                    for (i, step) in h.steps.iter().enumerate() {
                        let test = h
                            .test_rmse
                            .get(i)
                            .map_or(String::new(), |t| format!("{t:.6e}"));
                        csv.push_str(&format!(
                            "{},{},{step},{:.6e},{test}\n",
                            c.config.depth, c.config.width, h.train_rmse[i]
                        ));
                    }
                    let fmt = |v: Option<f64>| v.map_or("-".to_string(), |t| format!("{t:.4e}"));
                    table.push(format!(
                        "{:>5}  {:>5}  {:.4e}   {}  {}",
                        c.config.depth,
                        c.config.width,
                        h.final_train(),
                        fmt(h.final_test()),
                        fmt(h.min_test())
                    ));
                }
                let finite = curves
                    .iter()
                    .all(|c| c.history.as_ref().is_none_or(|h| !h.diverged));
                Ok(Outcome {
                    result: json!({"data": data_summary(&loaded), "curves": curves}),
                    checks: vec![Check::holds("finite loss", finite)],
                    table,
                    artifacts: vec![("curves.csv".into(), csv)],
                })
            }
        }
    }
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct NormsArgs {
    /// Net JSON to measure instead of a synthetic target.
    #[arg(long)]
    pub net: Option<PathBuf>,
    /// Target: smooth[:r], sine, holder[:r], additive or sparse[:u].
    #[arg(long, default_value = "additive")]
    pub target: String,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    /// Exponents of the L^p norms.
    #[arg(long = "p", value_delimiter = ',', default_value = "1,2,4")]
    pub p: Vec<f64>,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    /// Grid cells per axis for the sup norm.
    #[arg(long)]
    pub resolution: Option<usize>,
}

impl NormsArgs {
    fn run(&self, seed: u64) -> Result<Outcome> {
        let (f, d): (Target, usize) = match &self.net {
            Some(path) => {
                let net = read_net(path)?;
                let d = net.input_dim();
                (Arc::new(move |x: &[f64]| net.eval(x)), d)
            }
            None => (target(&self.target.parse()?, self.dim)?, self.dim),
        };
        if self.p.is_empty() {
            return Err(invalid("need at least one exponent"));
        }
        let mut ps = self.p.clone();
        ps.sort_by(f64::total_cmp);
        let estimates = ps
            .iter()
            .map(|&p| lp_norm_mc(&*f, d, p, self.samples, seed))
            .collect::<Result<Vec<_>>>()?;
        let sup = sup_norm_grid(
            &*f,
            d,
            self.resolution.unwrap_or_else(|| default_resolution(d)),
        )?;
        // averages over the cube are monotone in p and bounded by the sup
        let avg: Vec<(f64, f64)> = estimates
            .iter()
            .zip(&ps)
            .map(|(e, p)| {
                let scale = 2f64.powf(-(d as f64) / p);
                (e.value * scale, e.stderr * scale)
            })
            .collect();
        let mut checks: Vec<Check> = avg
            .windows(2)
            .zip(ps.windows(2))
            .map(|(w, pw)| {
                Check::at_most(
                    format!("mean norm p={} <= p={}", pw[0], pw[1]),
                    w[0].0,
                    w[1].0 + 3.0 * (w[0].1 + w[1].1),
                )
            })
            .collect();
        let (top, top_err) = avg[avg.len() - 1];
        checks.push(Check::at_most(
            "mean norm <= sup",
            top,
            sup.value + 3.0 * top_err,
        ));
        let mut table = vec!["p        L^p norm      stderr".to_string()];
        for e in &estimates {
            table.push(format!(
                "{:<8} {:.6e}  {:.2e}",
                e.p.unwrap_or(f64::NAN),
                e.value,
                e.stderr
            ));
        }
        table.push(format!(
            "sup      {:.6e}  ({} grid points)",
            sup.value, sup.samples
        ));
        Ok(Outcome {
            result: json!({"dim": d, "lp": estimates, "sup": sup}),
            checks,
            table,
            artifacts: Vec::new(),
        })
    }
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct VerifyGatesArgs {
    #[arg(long, value_delimiter = ',', default_value = "2,3,4")]
    pub ells: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1e-2,1e-3,1e-4")]
    pub nus: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub theta: f64,
    #[arg(long = "tilde-l", default_value_t = 1)]
    pub tilde_l: usize,
    /// fixed-depth or log-depth.
    #[arg(long, default_value = "fixed-depth")]
    pub flavor: GateFlavor,
    #[arg(long, default_value_t = 20_000)]
    pub grid_points: usize,
    #[arg(long, default_value_t = 20_000)]
    pub random_points: usize,
    #[arg(long, default_value_t = 1000)]
    pub zero_inputs: usize,
}

impl VerifyGatesArgs {
    fn run(&self, seed: u64) -> Result<Outcome> {
        let mut rows = Vec::new();
        let mut checks = Vec::new();
        let mut table =
            vec!["ell  nu        sup error    depth  bound  params  zero viol.".to_string()];
        for &ell in &self.ells {
            for &nu in &self.nus {
                let spec = GateSpec::new(ell, nu, self.theta, self.tilde_l, self.flavor)?;
                let row = verify_gate(
                    &spec,
                    self.grid_points,
                    self.random_points,
                    self.zero_inputs,
                    seed,
                )?;
                checks.push(Check::holds(
                    format!("gate ell={ell} nu={nu:e}"),
                    row.passed(),
                ));
                table.push(format!(
                    "{ell:<4} {nu:<9.1e} {:<12.4e} {:<6} {:<6} {:<7} {}",
                    row.sup_error,
                    row.depth,
                    row.depth_bound.map_or("-".into(), |b| b.to_string()),
                    row.params,
                    row.zero_violations
                ));
                rows.push(row);
            }
        }
        Ok(Outcome {
            result: json!({"flavor": self.flavor, "theta": self.theta, "tilde_l": self.tilde_l, "rows": rows}),
            checks,
            table,
            artifacts: Vec::new(),
        })
    }
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct CompareArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 4)]
    pub depth: usize,
    #[arg(long, default_value_t = 256)]
    pub width: usize,
    #[arg(long, default_value_t = 2)]
    pub teacher_depth: usize,
    #[arg(long, default_value_t = 8)]
    pub teacher_width: usize,
    #[arg(long, default_value_t = 2000)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
}

impl CompareArgs {
    fn run(&self, seed: u64) -> Result<Outcome> {
        let trained = TrainConfig {
            depth: self.depth,
            width: self.width,
            epochs: self.epochs,
            lr: self.lr,
            seed,
            record_every: self.epochs,
            ..TrainConfig::default()
        };
        let teacher = TrainConfig {
            depth: self.teacher_depth,
            width: self.teacher_width,
            seed: seed.wrapping_add(1),
            ..trained.clone()
        };
        trained.validate()?;
        teacher.validate()?;
        let def = Defaults {
            dim: 2,
            points: 150,
            target: "additive",
            noise: 0.1,
        };
        let loaded = self.data.load(&def, trained.split_ratio, seed)?;
        let report = compare_constructed(&trained, &teacher, &loaded.data, self.epsilon)?;
        let constructed = report.row("constructed").map_or(f64::NAN, |r| r.train_rmse);
        let checks = vec![
            Check::at_most("constructed interpolates", constructed, 1e-8),
            Check::at_most(
                "constructed close to teacher",
                report.l2_distance,
                report.closeness_bound + 3.0 * report.l2_stderr,
            ),
        ];
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |t| format!("{t:.4e}"));
        let mut table = vec!["model               train RMSE   test RMSE    params".to_string()];
        for r in &report.rows {
            table.push(format!(
                "{:<19} {:.4e}   {:<12} {}",
                r.model,
                r.train_rmse,
                fmt(r.test_rmse),
                r.params.map_or("-".into(), |p| p.to_string())
            ));
        }
        Ok(Outcome {
            result: json!({"data": data_summary(&loaded), "compare": report}),
            checks,
            table,
            artifacts: Vec::new(),
        })
    }
}
