//! `poisoncert`: generate datasets, train plain and robust learners, run
//! instance-targeted poisoning attacks, certify predictions, and reproduce
//! the desk-scale experiments.
//!
//! Every subcommand is deterministic given its `--seed`; all randomness is
//! derived from it through named sub-seeds. Outputs are CSV/JSON only.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use poisoncert::analytics;
use poisoncert::attacks;
use poisoncert::core::{AdversaryClass, BudgetRule, Example, Prediction};
use poisoncert::data;
use poisoncert::error::Error;
use poisoncert::exactcert;
use poisoncert::experiments::{self, ImageSource};
use poisoncert::geometry::{vc_epsilon_heuristic, SphereTask};
use poisoncert::learners::{train, LearnerSpec};
use poisoncert::modelfile::{HalfspaceCertifier, KnnCertifier, ModelFile};
use poisoncert::robust::{rlrn_train, wr_train, EnsembleCertifier, PartitionScheme};
use poisoncert::seeding::sub_seed;

#[derive(Parser)]
#[command(name = "poisoncert", version, about = "learning, attacking, and certification under instance-targeted data poisoning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset as CSV.
    Gen(GenArgs),
    /// Train a learner and write its model JSON.
    Train(TrainArgs),
    /// Run an attack; writes the poisoned dataset plus a JSON transcript.
    Attack(AttackArgs),
    /// Certify predictions of a model on a test set (CSV: index,pred,cert).
    Certify(CertifyArgs),
    /// Evaluate accuracy/risk of a model on a test set (JSON).
    Eval(EvalArgs),
    /// Budget sweep: risk, certified accuracy, clean accuracy per budget.
    Curve(CurveArgs),
    /// Check the exact risk/robustness identities on a profile JSON.
    VerifyIdentity(VerifyIdentityArgs),
    /// Re-run a named desk-scale experiment end to end.
    Reproduce(ReproduceArgs),
}

#[derive(Args)]
struct GenArgs {
    /// two-circles | sphere
    #[arg(long)]
    dist: String,
    #[arg(long)]
    m: usize,
    /// Dimension (sphere only; two-circles is always 3-dimensional).
    #[arg(long, default_value_t = 3)]
    d: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// halfspace | knn:K | table | wr | rlrn-seq | rlrn-hash
    #[arg(long)]
    learner: String,
    /// Base learner for wr / rlrn-*: halfspace | knn:K | table.
    #[arg(long)]
    base: Option<String>,
    /// Budget rule, e.g. const:5 | linear:0.1 | power:1.0,0.5 | sphere:1.0,10
    #[arg(long)]
    budget_rule: Option<String>,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AttackArgs {
    /// flip-interval | rotation | greedy-add | brute-force
    #[arg(long)]
    kind: String,
    #[arg(long)]
    data: PathBuf,
    /// Index of the target example (in --test when given, else in --data).
    #[arg(long)]
    target_index: usize,
    /// Test set supplying the target.
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    budget: u64,
    /// Model JSON (rotation: supplies the true halfspace; greedy-add and
    /// brute-force: the model under attack).
    #[arg(long)]
    model: Option<PathBuf>,
    /// Adversary class for brute-force: rep|flip|add|rem.
    #[arg(long, default_value = "rep")]
    class: String,
    /// Randomize the interval center (flip-interval only).
    #[arg(long, default_value_t = false)]
    randomized: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path for the poisoned dataset CSV.
    #[arg(long)]
    out: PathBuf,
    /// Output path for the transcript JSON (default: <out>.transcript.json).
    #[arg(long)]
    transcript: Option<PathBuf>,
}

#[derive(Args)]
struct CertifyArgs {
    #[arg(long)]
    model: PathBuf,
    /// The training dataset the model was fitted on.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    test: PathBuf,
    /// rep|flip|add|rem|addrem
    #[arg(long)]
    class: String,
    /// Uniform-convergence slack for halfspace certificates; defaults to a
    /// VC-style heuristic (outside any guarantee).
    #[arg(long)]
    epsilon: Option<f64>,
    /// Budget rule defining the replaced fraction for halfspace
    /// certificates.
    #[arg(long)]
    budget_rule: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CurveArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    test: PathBuf,
    /// rep|flip|add|rem|addrem (K-NN models only).
    #[arg(long)]
    class: String,
    #[arg(long)]
    b_max: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyIdentityArgs {
    /// Profile JSON as produced by `curve --profile-out` or hand-written.
    #[arg(long)]
    profile: PathBuf,
}

#[derive(Args)]
struct ReproduceArgs {
    /// fig2a | fig2b | thm310 | thm311 | lemma42
    name: String,
    #[arg(long, default_value_t = 20210810)]
    seed: u64,
    /// IDX image file for the image experiments (surrogate data otherwise).
    #[arg(long)]
    mnist_images: Option<PathBuf>,
    #[arg(long)]
    mnist_labels: Option<PathBuf>,
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("POISON_CERT_THREADS") {
        match threads.parse::<usize>() {
            Ok(n) if n >= 1 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("error[E_INVALID_INPUT]: POISON_CERT_THREADS must be a positive integer");
                return ExitCode::from(2);
            }
        }
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Train(a) => cmd_train(a),
        Command::Attack(a) => cmd_attack(a),
        Command::Certify(a) => cmd_certify(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Curve(a) => cmd_curve(a),
        Command::VerifyIdentity(a) => cmd_verify_identity(a),
        Command::Reproduce(a) => cmd_reproduce(a),
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

/// Parses `const:B | linear:BETA | power:Q,C | sphere:C,D`.
fn parse_budget_rule(s: &str) -> Result<BudgetRule, Error> {
    let (form, params) = s
        .split_once(':')
        .ok_or_else(|| invalid(format!("budget rule {s:?} must look like form:params")))?;
    let nums: Vec<&str> = params.split(',').collect();
    let f = |i: usize| -> Result<f64, Error> {
        nums.get(i)
            .ok_or_else(|| invalid(format!("budget rule {s:?}: missing parameter {i}")))?
            .parse::<f64>()
            .map_err(|e| invalid(format!("budget rule {s:?}: {e}")))
    };
    match form {
        "const" => {
            let b: u64 = nums[0]
                .parse()
                .map_err(|e| invalid(format!("budget rule {s:?}: {e}")))?;
            Ok(BudgetRule::constant(b))
        }
        "linear" => BudgetRule::linear_fraction(f(0)?),
        "power" => BudgetRule::power(f(0)?, f(1)?),
        "sphere" => {
            let d = nums
                .get(1)
                .ok_or_else(|| invalid("sphere rule needs c,d"))?
                .parse::<usize>()
                .map_err(|e| invalid(format!("budget rule {s:?}: {e}")))?;
            BudgetRule::sphere_scaled(f(0)?, d)
        }
        other => Err(invalid(format!("unknown budget rule form {other:?}"))),
    }
}

fn parse_base_learner(s: &str, seed: u64) -> Result<LearnerSpec, Error> {
    if s == "halfspace" {
        return Ok(LearnerSpec::halfspace(seed));
    }
    if s == "table" {
        return Ok(LearnerSpec::table(seed));
    }
    if let Some(k) = s.strip_prefix("knn:") {
        let k: usize = k.parse().map_err(|e| invalid(format!("knn:K: {e}")))?;
        return Ok(LearnerSpec::knn(k, seed));
    }
    Err(invalid(format!(
        "unknown learner {s:?}; expected halfspace | knn:K | table"
    )))
}

fn cmd_gen(a: GenArgs) -> Result<ExitCode, Error> {
    let s = match a.dist.as_str() {
        "two-circles" => {
            if a.d != 3 {
                return Err(invalid("two-circles data is always 3-dimensional"));
            }
            data::gen_two_circles(a.m, sub_seed(a.seed, "gen:two-circles"))?
        }
        "sphere" => {
            let mut omega = vec![0.0; a.d];
            *omega
                .first_mut()
                .ok_or_else(|| invalid("d must be >= 2"))? = 1.0;
            data::gen_sphere_halfspace(a.m, a.d, &omega, sub_seed(a.seed, "gen:sphere"))?
        }
        other => return Err(invalid(format!("unknown distribution {other:?}"))),
    };
    data::save_dataset_csv(&s, &a.out)?;
    println!("wrote {} examples (d={}) to {}", s.len(), s.dim(), a.out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_train(a: TrainArgs) -> Result<ExitCode, Error> {
    let s = data::load_dataset_csv(&a.data)?;
    let all_indices: Vec<usize> = (0..s.len()).collect();
    let rule = a.budget_rule.as_deref().map(parse_budget_rule).transpose()?;
    let need_rule = || rule.ok_or_else(|| invalid("this learner needs --budget-rule"));
    let base = |seed| -> Result<LearnerSpec, Error> {
        parse_base_learner(
            a.base.as_deref().ok_or_else(|| invalid("this learner needs --base"))?,
            seed,
        )
    };
    let seed = sub_seed(a.seed, "train");
    let file = match a.learner.as_str() {
        "halfspace" => {
            let h = train(&LearnerSpec::halfspace(seed), &s)?;
            ModelFile::Halfspace {
                spec: LearnerSpec::halfspace(seed),
                omega: h.omega().unwrap().to_vec(),
            }
        }
        "table" => ModelFile::Table { spec: LearnerSpec::table(seed), indices: all_indices },
        "wr" => {
            let b = base(seed)?;
            let model = wr_train(&b, &s, &need_rule()?)?;
            let omega = model.hypothesis.omega().map(<[f64]>::to_vec);
            ModelFile::Wr { base: b, subsample: model.subsample, omega }
        }
        "rlrn-seq" | "rlrn-hash" => {
            let b = base(seed)?;
            let scheme = if a.learner == "rlrn-seq" {
                PartitionScheme::Sequential
            } else {
                PartitionScheme::Hashed { key: sub_seed(a.seed, "rlrn-key") as u128 }
            };
            let model = rlrn_train(&b, &s, &need_rule()?, scheme)?;
            ModelFile::Ensemble { manifest: model.manifest() }
        }
        other => {
            if let Some(k) = other.strip_prefix("knn:") {
                let k: usize = k.parse().map_err(|e| invalid(format!("knn:K: {e}")))?;
                train(&LearnerSpec::knn(k, seed), &s)?; // validates m >= K
                ModelFile::Knn { spec: LearnerSpec::knn(k, seed), k, indices: all_indices }
            } else {
                return Err(invalid(format!(
                    "unknown learner {other:?}; expected halfspace|knn:K|table|wr|rlrn-seq|rlrn-hash"
                )));
            }
        }
    };
    fs::write(&a.out, file.to_json()?)?;
    println!("wrote model to {}", a.out.display());
    Ok(ExitCode::SUCCESS)
}

fn load_model(path: &Path) -> Result<ModelFile, Error> {
    ModelFile::from_json(&fs::read(path)?)
}

fn cmd_attack(a: AttackArgs) -> Result<ExitCode, Error> {
    let s = data::load_dataset_csv(&a.data)?;
    let target_set = match &a.test {
        Some(p) => data::load_dataset_csv(p)?,
        None => s.clone(),
    };
    if a.target_index >= target_set.len() {
        return Err(invalid(format!(
            "target index {} out of range 0..{}",
            a.target_index,
            target_set.len()
        )));
    }
    let target = target_set.get(a.target_index).clone();

    let (poisoned, transcript) = match a.kind.as_str() {
        "flip-interval" => {
            let beta = a.budget as f64 / s.len() as f64;
            attacks::flip_interval_attack(&s, &target, beta.min(1.0), a.randomized, sub_seed(a.seed, "attack:flip-interval"))?
        }
        "rotation" => {
            let model = load_model(a.model.as_deref().ok_or_else(|| invalid("rotation needs --model (a halfspace)"))?)?;
            let ModelFile::Halfspace { omega, .. } = model else {
                return Err(invalid("rotation attack needs a halfspace model"));
            };
            attacks::rotation_flip_attack(&s, &target, &omega)?
        }
        "greedy-add" => {
            let model = load_model(a.model.as_deref().ok_or_else(|| invalid("greedy-add needs --model"))?)?;
            let loaded = model.instantiate(&s)?;
            let h = loaded
                .hypothesis()
                .ok_or_else(|| invalid("greedy-add needs a plain (non-ensemble) model"))?;
            attacks::greedy_add_attack(&s, h, &target, a.budget)?
        }
        "brute-force" => {
            let model = load_model(a.model.as_deref().ok_or_else(|| invalid("brute-force needs --model"))?)?;
            let spec = match &model {
                ModelFile::Halfspace { spec, .. } => spec.clone(),
                ModelFile::Knn { spec, .. } => spec.clone(),
                ModelFile::Table { spec, .. } => spec.clone(),
                _ => return Err(invalid("brute-force attacks plain models only")),
            };
            let class: AdversaryClass = a.class.parse()?;
            let pool: Vec<Example> = (0..s.labels().max(2))
                .map(|y| Example::new(target.x.clone(), y))
                .collect::<Result<_, _>>()?;
            match attacks::brute_force_attack(
                &s,
                &spec,
                &target,
                class,
                a.budget,
                &pool,
                attacks::DEFAULT_ENUMERATION_CAP,
            )? {
                Some(hit) => hit,
                None => {
                    println!("no attack within budget {} exists over the pool", a.budget);
                    return Ok(ExitCode::from(1));
                }
            }
        }
        other => return Err(invalid(format!("unknown attack kind {other:?}"))),
    };

    data::save_dataset_csv(&poisoned, &a.out)?;
    let tr_path = a
        .transcript
        .unwrap_or_else(|| PathBuf::from(format!("{}.transcript.json", a.out.display())));
    fs::write(&tr_path, serde_json::to_string_pretty(&transcript)?)?;
    println!(
        "attack changed {} positions; wrote {} and {}",
        transcript.changed_positions.len(),
        a.out.display(),
        tr_path.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_certify(a: CertifyArgs) -> Result<ExitCode, Error> {
    let s = data::load_dataset_csv(&a.data)?;
    let test = data::load_dataset_csv(&a.test)?;
    let class: AdversaryClass = a.class.parse()?;
    let model = load_model(&a.model)?;

    let mut rows = String::from("index,pred,cert\n");
    let mut write_row = |i: usize, cp: poisoncert::core::CertifiedPrediction| {
        rows.push_str(&format!("{i},{},{}\n", cp.pred, cp.cert));
    };

    match &model {
        ModelFile::Knn { k, indices, .. } => {
            let train_set = s.subset(indices)?;
            let certifier = KnnCertifier::new(&train_set, *k, class)?;
            use poisoncert::core::CertifyingPredictor;
            for (i, e) in test.iter().enumerate() {
                write_row(i, certifier.certify(&e.x));
            }
        }
        ModelFile::Halfspace { omega, .. } => {
            if class != AdversaryClass::Replace {
                return Err(invalid("halfspace certificates cover the replacing adversary only"));
            }
            let d = s.dim();
            let rule = a
                .budget_rule
                .as_deref()
                .map(parse_budget_rule)
                .transpose()?
                .ok_or_else(|| invalid("halfspace certify needs --budget-rule for the replaced fraction"))?;
            let m = s.len();
            let beta = rule.eval_clamped(m as u64) as f64 / m as f64;
            let epsilon = a.epsilon.unwrap_or_else(|| vc_epsilon_heuristic(d, m, 0.05));
            let mut truth = vec![0.0; d];
            truth[0] = 1.0; // the task's true normal is not used by the certificate
            let task = SphereTask::new(d, truth, epsilon, beta)?;
            let certifier = HalfspaceCertifier::new(omega.clone(), task, m)?;
            use poisoncert::core::CertifyingPredictor;
            for (i, e) in test.iter().enumerate() {
                write_row(i, certifier.certify(&e.x));
            }
        }
        ModelFile::Ensemble { manifest } => {
            let ensemble = poisoncert::robust::EnsembleModel::from_manifest(manifest, &s)?;
            if ensemble.per_example_factor(class).is_none() {
                eprintln!(
                    "warning: the sequential scheme certifies nothing for class {class}; emitting 0 budgets"
                );
            }
            let certifier = EnsembleCertifier { model: &ensemble, class };
            use poisoncert::core::CertifyingPredictor;
            for (i, e) in test.iter().enumerate() {
                write_row(i, certifier.certify(&e.x));
            }
        }
        ModelFile::Table { .. } | ModelFile::Wr { .. } => {
            return Err(invalid("this model kind provides no certificates"));
        }
    }
    fs::write(&a.out, rows)?;
    println!("wrote certificates for {} points to {}", test.len(), a.out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_eval(a: EvalArgs) -> Result<ExitCode, Error> {
    let s = data::load_dataset_csv(&a.data)?;
    let test = data::load_dataset_csv(&a.test)?;
    let model = load_model(&a.model)?.instantiate(&s)?;
    let accuracy = analytics::accuracy(|x| model.predict(x), &test)?;
    let abstain = test
        .iter()
        .filter(|e| matches!(model.predict(&e.x), Prediction::Abstain))
        .count() as f64
        / test.len() as f64;
    let out = serde_json::json!({
        "n_test": test.len(),
        "accuracy": accuracy,
        "risk": 1.0 - accuracy,
        "abstain_fraction": abstain,
    });
    fs::write(&a.out, serde_json::to_string_pretty(&out)?)?;
    println!("accuracy {accuracy:.4}, risk {:.4}", 1.0 - accuracy);
    Ok(ExitCode::SUCCESS)
}

fn cmd_curve(a: CurveArgs) -> Result<ExitCode, Error> {
    let s = data::load_dataset_csv(&a.data)?;
    let test = data::load_dataset_csv(&a.test)?;
    let class: AdversaryClass = a.class.parse()?;
    let model = load_model(&a.model)?;
    let ModelFile::Knn { k, indices, .. } = &model else {
        return Err(invalid(
            "curve requires a K-NN model (exact robustness is only computed there)",
        ));
    };
    let train_set = s.subset(indices)?;
    let profile = exactcert::knn_profile(&train_set, *k, &test, class, a.b_max)?;
    let certifier = KnnCertifier::new(&train_set, *k, class)?;
    let rows = analytics::curve(&profile, &certifier, &test)?;
    fs::write(&a.out, analytics::curve_to_csv(&rows))?;

    let profile_path = PathBuf::from(format!("{}.profile.json", a.out.display()));
    let summary = serde_json::json!({
        "b_max": profile.b_max(),
        "n_test": profile.n_test(),
        "entries": profile.entries(),
        "histogram": profile.histogram(),
    });
    fs::write(&profile_path, serde_json::to_string_pretty(&summary)?)?;
    println!(
        "wrote {} budget rows to {} (profile: {})",
        rows.len(),
        a.out.display(),
        profile_path.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify_identity(a: VerifyIdentityArgs) -> Result<ExitCode, Error> {
    #[derive(serde::Deserialize)]
    struct ProfileJson {
        b_max: u64,
        entries: Vec<poisoncert::core::Robustness>,
    }
    let pj: ProfileJson = serde_json::from_slice(&fs::read(&a.profile)?)?;
    let profile = analytics::RobustnessProfile::new(pj.entries, pj.b_max)?;
    let dev = analytics::verify_identities(&profile)?;
    let pass = dev <= 1e-12;
    println!(
        "{} identity deviation {dev:.3e} (tolerance 1e-12) over {} entries",
        if pass { "PASS" } else { "FAIL" },
        profile.n_test()
    );
    Ok(if pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn cmd_reproduce(a: ReproduceArgs) -> Result<ExitCode, Error> {
    let source = match (&a.mnist_images, &a.mnist_labels) {
        (Some(i), Some(l)) => ImageSource::Idx { images: i.clone(), labels: l.clone() },
        (None, None) => {
            ImageSource::Surrogate { seed: sub_seed(a.seed, "surrogate") }
        }
        _ => return Err(invalid("supply both --mnist-images and --mnist-labels, or neither")),
    };
    let report = match a.name.as_str() {
        "lemma42" => experiments::knn_oracle_exactness(a.seed, 200)?,
        "thm310" => experiments::halfspace_certification(a.seed)?,
        "thm311" => experiments::rotation_attack_success(a.seed)?,
        "fig2a" => experiments::knn_robustness_trend(&source, 300)?,
        "fig2b" => experiments::knn_accuracy_curve(&source, 200)?,
        other => {
            return Err(invalid(format!(
                "unknown experiment {other:?}; expected fig2a|fig2b|thm310|thm311|lemma42"
            )))
        }
    };
    println!("experiment {}", report.name);
    for line in &report.lines {
        println!("  {line}");
    }
    println!("{}", if report.pass { "PASS" } else { "FAIL" });
    Ok(if report.pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
