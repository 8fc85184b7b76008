//! Subcommands of the `esrn` binary. Each command reads its settings from a
//! [`RunConfig`], writes its outputs into the configured directory and
//! finishes with a JSON manifest echoing the full configuration.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::json;

use esrn::dataset::{self, Column, Sample};
use esrn::dimensional::CandidateSet;
use esrn::evolution::{self, EsrnConfig, GenerationLog};
use esrn::metrics::{self, EvalReport};
use esrn::models::{self, ModelId, SynthSpec};
use esrn::network::{self, Expression, FitData, SymbolicNetwork};
use esrn::split::ssmd_split;

/// Raw variables a recovered power law is expressed in.
pub const VARIABLES: [&str; 4] = ["w", "d", "U", "Ustar"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSettings {
    pub fraction: f64,
    pub seed: u64,
}

impl Default for SplitSettings {
    fn default() -> Self {
        SplitSettings { fraction: 0.7, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveSettings {
    pub train: PathBuf,
    pub test: PathBuf,
    /// Integer-snapping tolerance for the simplified formula.
    pub snap_tol: f64,
    /// Test-score tolerance defining the reported plateau window.
    pub plateau_tol: f64,
    /// Use this generation instead of the automatically selected one.
    pub generation: Option<usize>,
    pub search: EsrnConfig,
}

impl Default for EvolveSettings {
    fn default() -> Self {
        EvolveSettings {
            train: PathBuf::from("train.csv"),
            test: PathBuf::from("test.csv"),
            snap_tol: 0.05,
            plateau_tol: 0.005,
            generation: None,
            search: EsrnConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSettings {
    pub data: PathBuf,
    /// Model ids, or `["all"]`.
    pub models: Vec<String>,
    /// Trained network (as written by `evolve`) to evaluate alongside.
    pub network: Option<PathBuf>,
}

impl Default for BenchSettings {
    fn default() -> Self {
        BenchSettings {
            data: PathBuf::from("data.csv"),
            models: vec!["all".to_string()],
            network: None,
        }
    }
}

impl BenchSettings {
    pub fn model_ids(&self) -> Result<Vec<ModelId>> {
        if self.models.iter().any(|m| m == "all") {
            return Ok(ModelId::ALL.to_vec());
        }
        self.models.iter().map(|m| Ok(m.parse::<ModelId>()?)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: PathBuf,
    pub output_dir: PathBuf,
    /// Columns screened by the IQR fences during `clean`.
    pub iqr_columns: Vec<String>,
    pub split: SplitSettings,
    pub evolve: EvolveSettings,
    pub bench: BenchSettings,
    pub synth: SynthSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input: PathBuf::from("data.csv"),
            output_dir: PathBuf::from("out"),
            iqr_columns: Column::ALL.iter().map(|c| c.name().to_string()).collect(),
            split: SplitSettings::default(),
            evolve: EvolveSettings::default(),
            bench: BenchSettings::default(),
            synth: SynthSpec::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    fn iqr_columns(&self) -> Result<Vec<Column>> {
        self.iqr_columns
            .iter()
            .map(|n| Column::from_name(n).with_context(|| format!("unknown column `{n}`")))
            .collect()
    }
}

// ---------------------------------------------------------------------------
// File helpers

pub fn read_samples(path: &Path) -> Result<Vec<Sample>> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let records = dataset::parse_csv(file).with_context(|| format!("parsing {}", path.display()))?;
    ensure!(!records.is_empty(), "{} holds no data rows", path.display());
    records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            r.to_sample()
                .with_context(|| format!("{} row {}: missing or non-positive value", path.display(), i + 1))
        })
        .collect()
}

pub fn write_samples(path: &Path, samples: &[Sample]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    if samples.is_empty() {
        w.write_record(Column::ALL.iter().map(|c| c.name()))?;
    }
    for s in samples {
        w.serialize(s)?;
    }
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn prepare_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn manifest(command: &str, config: &RunConfig, details: serde_json::Value) -> serde_json::Value {
    json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "config": config,
        "seeds": {
            "split": config.split.seed,
            "evolve": config.evolve.search.seed,
            "synth": config.synth.seed,
        },
        "details": details,
    })
}

// ---------------------------------------------------------------------------
// Commands

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CleanCounts {
    pub parsed: usize,
    pub cleaned: usize,
    pub filtered: usize,
}

/// parse → clean → IQR filter → summary statistics.
pub fn cmd_clean(config: &RunConfig) -> Result<CleanCounts> {
    let file = fs::File::open(&config.input).with_context(|| format!("opening {}", config.input.display()))?;
    let records = dataset::parse_csv(file).with_context(|| format!("parsing {}", config.input.display()))?;
    ensure!(!records.is_empty(), "{} holds no data rows", config.input.display());
    let cleaned = dataset::clean(&records);
    ensure!(!cleaned.is_empty(), "no complete positive rows in {}", config.input.display());
    let columns = config.iqr_columns()?;
    let filtered = dataset::filter_outliers(&cleaned, &columns);
    let stats = dataset::summarize(&filtered)?;
    let spearman = dataset::spearman_matrix(&filtered).ok();

    let dir = &config.output_dir;
    prepare_dir(dir)?;
    write_samples(&dir.join("cleaned.csv"), &filtered)?;
    write_json(&dir.join("stats.json"), &json!({ "columns": stats.columns, "spearman": spearman }))?;
    let counts = CleanCounts {
        parsed: records.len(),
        cleaned: cleaned.len(),
        filtered: filtered.len(),
    };
    write_json(
        &dir.join("manifest_clean.json"),
        &manifest("clean", config, json!({ "row_counts": counts })),
    )?;
    Ok(counts)
}

/// Maximum-dissimilarity split of the input file.
pub fn cmd_split(config: &RunConfig) -> Result<(usize, usize)> {
    let samples = read_samples(&config.input)?;
    let split = ssmd_split(&samples, config.split.fraction, config.split.seed)?;
    let dir = &config.output_dir;
    prepare_dir(dir)?;
    write_samples(&dir.join("train.csv"), &split.train)?;
    write_samples(&dir.join("test.csv"), &split.test)?;
    write_json(
        &dir.join("manifest_split.json"),
        &manifest(
            "split",
            config,
            json!({
                "rows": samples.len(),
                "train_fraction": split.train_fraction,
                "train_indices": split.train_indices,
                "test_indices": split.test_indices,
            }),
        ),
    )?;
    Ok((split.train.len(), split.test.len()))
}

/// Everything `evolve` produces.
#[derive(Debug, Clone)]
pub struct EvolveOutcome {
    pub best_generation: usize,
    pub network: SymbolicNetwork,
    pub expression: Expression,
    pub simplified: Expression,
    pub power_law: Option<(network::PowerLaw, network::PowerLawSource)>,
    pub log: GenerationLog,
    pub plateau: Option<(usize, usize)>,
}

pub fn evolve(settings: &EvolveSettings, train: &[Sample], test: &[Sample]) -> Result<EvolveOutcome> {
    evolve_with_progress(settings, train, test, |_| {})
}

pub fn evolve_with_progress<F: FnMut(&evolution::GenerationRecord)>(
    settings: &EvolveSettings,
    train: &[Sample],
    test: &[Sample],
    progress: F,
) -> Result<EvolveOutcome> {
    let candidates = CandidateSet::ldc();
    let result = evolution::run_with_progress(&settings.search, &candidates, train, test, progress)?;
    let plateau = result.log.plateau(settings.plateau_tol);
    let result = match settings.generation {
        Some(g) => {
            ensure!(result.log.get(g).is_some(), "generation {g} is not in the log");
            evolution::finish(result.log, g)?
        }
        None => result,
    };
    let fit = FitData {
        samples: train,
        output: &result.network.output,
    };
    let simplified = network::simplify(&result.expression, settings.snap_tol, Some(fit));
    let power_law =
        network::extract_power_law(&simplified, &result.network.output, train, &VARIABLES, settings.snap_tol);
    Ok(EvolveOutcome {
        best_generation: result.best_generation,
        network: result.network,
        expression: result.expression,
        simplified,
        power_law,
        log: result.log,
        plateau,
    })
}

/// Runs the evolutionary search on the train/test files.
pub fn cmd_evolve(config: &RunConfig) -> Result<EvolveOutcome> {
    cmd_evolve_with_progress(config, |_| {})
}

pub fn cmd_evolve_with_progress<F: FnMut(&evolution::GenerationRecord)>(
    config: &RunConfig,
    progress: F,
) -> Result<EvolveOutcome> {
    let s = &config.evolve;
    let train = read_samples(&s.train)?;
    let test = read_samples(&s.test)?;
    let out = evolve_with_progress(s, &train, &test, progress)?;

    let dir = &config.output_dir;
    prepare_dir(dir)?;
    fs::write(dir.join("generations.csv"), out.log.to_csv())?;
    write_json(&dir.join("generations.json"), &out.log)?;
    write_json(&dir.join("network.json"), &out.network)?;
    write_json(
        &dir.join("expression.json"),
        &json!({ "decoded": out.expression, "simplified": out.simplified }),
    )?;

    let lhs = out.network.output.to_string();
    let mut text = format!(
        "generation: {}\noutput group: {lhs}\ndecoded: {lhs} = {}\nsimplified: {lhs} = {}\n",
        out.best_generation, out.expression, out.simplified
    );
    match &out.power_law {
        Some((law, source)) => text.push_str(&format!("power law ({source:?}): Dl = {law}\n")),
        None => text.push_str("power law: none\n"),
    }
    fs::write(dir.join("best_expression.txt"), text)?;

    write_json(
        &dir.join("manifest_evolve.json"),
        &manifest(
            "evolve",
            config,
            json!({
                "train_rows": train.len(),
                "test_rows": test.len(),
                "best_generation": out.best_generation,
                "automatic_generation": evolution::select_best_generation(&out.log),
                "plateau": out.plateau,
                "loss": format!("{:?}", network::LossKind::for_network(&out.network)),
                "power_law": out.power_law,
            }),
        ),
    )?;
    Ok(out)
}

/// Scores each requested catalog model (and optionally a trained network)
/// on a dataset.
pub fn cmd_bench(config: &RunConfig) -> Result<Vec<(String, EvalReport)>> {
    let s = &config.bench;
    let data = read_samples(&s.data)?;
    let ids = s.model_ids()?;
    let obs: Vec<f64> = data.iter().map(|x| x.dl).collect();

    let mut predictions: Vec<(String, Vec<f64>)> = ids
        .iter()
        .map(|&id| (id.name().to_string(), data.iter().map(|x| models::predict(id, x).dl).collect()))
        .collect();
    if let Some(path) = &s.network {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let net: SymbolicNetwork = serde_json::from_str(&text)?;
        net.validate(None)?;
        predictions.push(("esrn_network".to_string(), evolution::predict_all(&net, &data)));
    }

    let mut reports = Vec::new();
    for (name, pred) in &predictions {
        let r = metrics::evaluate_pairs(&obs, pred).with_context(|| format!("evaluating {name}"))?;
        reports.push((name.clone(), r));
    }

    let dir = &config.output_dir;
    prepare_dir(dir)?;
    let report_map: serde_json::Map<String, serde_json::Value> = reports
        .iter()
        .map(|(n, r)| Ok((n.clone(), serde_json::to_value(r)?)))
        .collect::<Result<_>>()?;
    write_json(&dir.join("eval_report.json"), &report_map)?;

    let mut taylor = csv::Writer::from_path(dir.join("taylor.csv"))?;
    taylor.write_record(["model", "std", "correlation", "centered_rms"])?;
    for (n, r) in &reports {
        taylor.serialize((n, r.taylor.pred_std, r.taylor.correlation, r.taylor.centered_rms))?;
    }
    taylor.flush()?;

    let mut hist = csv::Writer::from_path(dir.join("dr_hist.csv"))?;
    hist.write_record(["model", "dr_le_-0.3", "dr_-0.3_0", "dr_0_0.3", "dr_gt_0.3", "accuracy_pct", "excluded"])?;
    for (n, r) in &reports {
        let b = r.dr_bins;
        hist.serialize((n, b[0], b[1], b[2], b[3], r.accuracy_pct, r.dr_excluded.len()))?;
    }
    hist.flush()?;

    let mut pred_csv = csv::Writer::from_path(dir.join("predictions.csv"))?;
    pred_csv.write_record(["sample", "model", "Dl_pred"])?;
    for (n, pred) in &predictions {
        for (i, p) in pred.iter().enumerate() {
            pred_csv.serialize((i, n, p))?;
        }
    }
    pred_csv.flush()?;
    write_json(&dir.join("catalog.json"), &models::catalog())?;

    let obs_std = reports.first().map(|(_, r)| r.taylor.obs_std);
    write_json(
        &dir.join("manifest_bench.json"),
        &manifest(
            "bench",
            config,
            json!({ "rows": data.len(), "models": predictions.iter().map(|p| &p.0).collect::<Vec<_>>(), "obs_std": obs_std, "metric_definitions": metrics::DEFINITIONS }),
        ),
    )?;
    Ok(reports)
}

/// Writes a synthetic dataset drawn from a catalog formula.
pub fn cmd_synth(config: &RunConfig) -> Result<Vec<Sample>> {
    let spec = &config.synth;
    if spec.n == 0 {
        bail!("synthetic sample count must be positive");
    }
    ensure!(spec.noise >= 0.0 && spec.noise.is_finite(), "noise must be a finite non-negative number");
    let data = models::synthesize(spec);
    let dir = &config.output_dir;
    prepare_dir(dir)?;
    write_samples(&dir.join("synthetic.csv"), &data)?;
    let negative = data.iter().filter(|s| s.dl <= 0.0 || s.dl.is_nan()).count();
    write_json(
        &dir.join("manifest_synth.json"),
        &manifest(
            "synth",
            config,
            json!({ "rows": data.len(), "non_positive_dl": negative, "noise": "Dl multiplied by exp(noise * z), z ~ N(0, 1)" }),
        ),
    )?;
    Ok(data)
}
