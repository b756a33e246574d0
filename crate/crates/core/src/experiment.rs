//! Simulation campaigns: parameter sweeps under a pump ramp, with streamed
//! ensemble statistics at every sample time.

use std::collections::BTreeSet;
use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    adiabatic_warning, build_system, derive_params, BoundaryRule, DerivedParams, DopoVariant,
    ModelParams,
};
use crate::observables::{
    covariance_matrix, default_grid, distribution_from_modes, fit_gaussian, gaussian_discord,
    quadrature_stats, resolve_discord_convention, ConventionResolution, Estimate, ModeMap, MomentAccumulator,
    MomentSet, QuadratureDistribution, QuadratureTarget,
};
use crate::sde::{run_batch_chunked, IntegrationConfig, Scheme};
use crate::stats::{batch_count, batch_of, DEFAULT_BATCHES};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment: {0}")]
    Invalid(String),
    #[error("could not build thread pool: {0}")]
    ThreadPool(String),
}

/// Per-label replacements for fields of the base [`ModelParams`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zeta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_f: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_f: Option<f64>,
}

impl ParamOverrides {
    pub fn apply(&self, base: &ModelParams) -> ModelParams {
        ModelParams {
            gamma_s: self.gamma_s.unwrap_or(base.gamma_s),
            gamma_c: self.gamma_c.unwrap_or(base.gamma_c),
            gamma_p: self.gamma_p.unwrap_or(base.gamma_p),
            zeta: self.zeta.unwrap_or(base.zeta),
            theta: self.theta.unwrap_or(base.theta),
            delta_s: self.delta_s.unwrap_or(base.delta_s),
            delta_p: self.delta_p.unwrap_or(base.delta_p),
            g: self.g.unwrap_or(base.g),
            lambda_f: self.lambda_f.unwrap_or(base.lambda_f),
            t_f: self.t_f.unwrap_or(base.t_f),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepEntry {
    pub label: String,
    #[serde(default)]
    pub overrides: ParamOverrides,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub points: usize,
    /// Fixed `[lo, hi]`; when absent the grid spans ±5 standard deviations
    /// of the quadrature at that time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<[f64; 2]>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { points: 201, range: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionRequest {
    pub times: Vec<f64>,
    pub targets: Vec<QuadratureTarget>,
    #[serde(default)]
    pub grid: GridSpec,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputRequest {
    #[serde(default)]
    pub photon_number: bool,
    #[serde(default)]
    pub corr_xx: bool,
    #[serde(default)]
    pub corr_pp: bool,
    #[serde(default)]
    pub epr_sum: bool,
    #[serde(default)]
    pub discord: bool,
    #[serde(default)]
    pub var_p: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distributions: Option<DistributionRequest>,
}

impl OutputRequest {
    pub fn all_series() -> Self {
        Self {
            photon_number: true,
            corr_xx: true,
            corr_pp: true,
            epr_sum: true,
            discord: true,
            var_p: true,
            distributions: None,
        }
    }
}

fn default_failure_fraction() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub base: ModelParams,
    pub variant: DopoVariant,
    pub boundary: BoundaryRule,
    pub sweep: Vec<SweepEntry>,
    pub sample_times: Vec<f64>,
    pub n_trajectories: usize,
    pub master_seed: u64,
    pub dt: f64,
    pub scheme: Scheme,
    pub outputs: OutputRequest,
    /// Reuse the same noise realizations for every label.
    #[serde(default)]
    pub common_random_numbers: bool,
    #[serde(default = "default_failure_fraction")]
    pub max_failure_fraction: f64,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Invalid(m));
        if self.n_trajectories == 0 {
            return bad("n_trajectories must be at least 1".into());
        }
        if self.sweep.is_empty() {
            return bad("sweep must contain at least one label".into());
        }
        let mut labels = BTreeSet::new();
        for e in &self.sweep {
            if e.label.is_empty() || !e.label.chars().all(|c| c.is_ascii_alphanumeric() || "._-".contains(c)) {
                return bad(format!("label `{}` must be nonempty and use only [A-Za-z0-9._-]", e.label));
            }
            if !labels.insert(e.label.as_str()) {
                return bad(format!("duplicate sweep label `{}`", e.label));
            }
        }
        if self.sample_times.is_empty() {
            return bad("sample_times must not be empty".into());
        }
        if self.sample_times.windows(2).any(|w| !(w[0] < w[1])) || self.sample_times.iter().any(|t| !(*t >= 0.0)) {
            return bad("sample_times must be non-negative and strictly increasing".into());
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if let Some(d) = &self.outputs.distributions {
            for t in &d.times {
                if !self.sample_times.contains(t) {
                    return bad(format!("distribution time {t} is not one of the sample times"));
                }
            }
            if d.grid.points < 2 {
                return bad("distribution grid needs at least 2 points".into());
            }
            if let Some([lo, hi]) = d.grid.range {
                if !(lo < hi) {
                    return bad(format!("grid range [{lo}, {hi}] is empty"));
                }
            }
        }
        for e in &self.sweep {
            let p = e.overrides.apply(&self.base);
            build_system(&p, self.variant, p.schedule(), self.boundary)
                .map_err(|err| ExperimentError::Invalid(format!("label `{}`: {err}", e.label)))?;
        }
        Ok(())
    }

    pub fn t_final(&self) -> f64 {
        self.sample_times.last().copied().unwrap_or(0.0)
    }

    pub fn label_params(&self, label: &str) -> Option<ModelParams> {
        self.sweep.iter().find(|e| e.label == label).map(|e| e.overrides.apply(&self.base))
    }
}

/// `τ = 0, 1, …, t_f`.
pub fn unit_sample_times(t_f: f64) -> Vec<f64> {
    (0..=t_f.floor() as usize).map(|k| k as f64).collect()
}

fn sweep_spec(name: &str, sweep: Vec<SweepEntry>, n: usize) -> ExperimentSpec {
    let base = ModelParams::default();
    ExperimentSpec {
        name: name.into(),
        base,
        variant: DopoVariant::PumpEliminated6,
        boundary: BoundaryRule::ReflectClassicalSubspace,
        sweep,
        sample_times: unit_sample_times(base.t_f),
        n_trajectories: n,
        master_seed: 1,
        dt: 0.002,
        scheme: Scheme::WeakOrder2Platen,
        outputs: OutputRequest::all_series(),
        common_random_numbers: false,
        max_failure_fraction: default_failure_fraction(),
    }
}

/// Case (a): `γ_s` varied with `γ_c = 2γ_s`.
pub fn case_a_spec() -> ExperimentSpec {
    let sweep = [0.05, 0.1, 0.5, 1.0, 5.0]
        .iter()
        .map(|&gs| SweepEntry {
            label: format!("gs_{gs}"),
            overrides: ParamOverrides { gamma_s: Some(gs), gamma_c: Some(2.0 * gs), ..Default::default() },
        })
        .collect();
    sweep_spec("case-a", sweep, 50_000)
}

/// Case (b): `γ_c` varied with `γ_s = 0.01`.
pub fn case_b_spec() -> ExperimentSpec {
    let sweep = [0.1, 0.5, 1.0, 5.0, 10.0]
        .iter()
        .map(|&gc| SweepEntry {
            label: format!("gc_{gc}"),
            overrides: ParamOverrides { gamma_s: Some(0.01), gamma_c: Some(gc), ..Default::default() },
        })
        .collect();
    sweep_spec("case-b", sweep, 50_000)
}

/// Quadrature distributions around the bifurcation of the
/// `γ_s = 0.1, γ_c = 0.2` system.
pub fn superposition_spec() -> ExperimentSpec {
    let sweep = vec![SweepEntry { label: "superposition".into(), overrides: ParamOverrides::default() }];
    let mut spec = sweep_spec("superposition", sweep, 200_000);
    spec.outputs = OutputRequest {
        photon_number: true,
        var_p: true,
        distributions: Some(DistributionRequest {
            times: vec![29.0, 31.0, 33.0, 35.0],
            targets: QuadratureTarget::ALL.to_vec(),
            grid: GridSpec::default(),
        }),
        ..Default::default()
    };
    spec
}

/// Named presets; the `-desk` variants use fewer trajectories.
pub fn preset(name: &str) -> Option<ExperimentSpec> {
    let (spec, n) = match name {
        "case-a" => (case_a_spec(), None),
        "case-b" => (case_b_spec(), None),
        "superposition" => (superposition_spec(), None),
        "case-a-desk" => (case_a_spec(), Some(5_000)),
        "case-b-desk" => (case_b_spec(), Some(5_000)),
        "superposition-desk" => (superposition_spec(), Some(20_000)),
        _ => return None,
    };
    Some(match n {
        Some(n) => ExperimentSpec { name: name.into(), n_trajectories: n, ..spec },
        None => spec,
    })
}

pub const PRESET_NAMES: [&str; 6] =
    ["case-a", "case-b", "superposition", "case-a-desk", "case-b-desk", "superposition-desk"];

/// Time series of the requested observables for one sweep label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableSeries {
    pub label: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl ObservableSeries {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    /// `(value, standard error)` of `name` at the row whose τ equals `tau`.
    pub fn at(&self, name: &str, tau: f64) -> Option<Estimate> {
        let k = self.columns.iter().position(|c| c == name)?;
        let se = self.columns.iter().position(|c| *c == format!("{name}_se"));
        let row = self.rows.iter().find(|r| r[0] == tau)?;
        Some(Estimate { value: row[k], se: se.map_or(f64::NAN, |s| row[s]) })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDistribution {
    pub label: String,
    pub tau: f64,
    pub distribution: QuadratureDistribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionMeta {
    pub target: QuadratureTarget,
    pub tau: f64,
    pub n_samples: usize,
    pub excluded: usize,
    pub unreliable: bool,
    pub imag_residue: f64,
    pub integral: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelMetadata {
    pub label: String,
    pub seed: u64,
    pub params: ModelParams,
    pub derived: Option<DerivedParams>,
    pub n_trajectories: usize,
    pub n_failed: usize,
    pub error: Option<String>,
    pub warnings: Vec<String>,
    pub discord_negative_rows: usize,
    pub distributions: Vec<DistributionMeta>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub code_version: String,
    pub spec: ExperimentSpec,
    pub threads: usize,
    pub discord_conventions: ConventionResolution,
    pub labels: Vec<LabelMetadata>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub series: Vec<ObservableSeries>,
    pub distributions: Vec<LabeledDistribution>,
    pub metadata: RunMetadata,
}

impl ExperimentResult {
    pub fn series_for(&self, label: &str) -> Option<&ObservableSeries> {
        self.series.iter().find(|s| s.label == label)
    }

    pub fn failed_labels(&self) -> Vec<&LabelMetadata> {
        self.metadata.labels.iter().filter(|l| l.error.is_some()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
    /// Print a progress line per label to stderr.
    pub progress: bool,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Master seed for sweep label `index`.
pub fn label_seed(master_seed: u64, index: usize, common_random_numbers: bool) -> u64 {
    if common_random_numbers {
        master_seed
    } else {
        splitmix64(master_seed ^ splitmix64(index as u64))
    }
}

/// Trajectories whose `Re(α₁ + β₁)/2` are kept for the bimodality check.
const BIMODAL_SUBSAMPLE: usize = 20_000;
/// Histogram bins used for the bimodality check.
const BIMODAL_GRID: usize = 61;
/// Relative fit residual above which the x₁ spread counts as bimodal.
pub const BIMODAL_RESIDUAL: f64 = 0.25;

struct LabelOutput {
    series: ObservableSeries,
    distributions: Vec<LabeledDistribution>,
    meta: LabelMetadata,
}

pub fn run_experiment(spec: &ExperimentSpec, options: &RunOptions) -> Result<ExperimentResult, ExperimentError> {
    spec.validate()?;
    let started = Instant::now();
    let pool = match options.threads {
        Some(n) => Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| ExperimentError::ThreadPool(e.to_string()))?,
        ),
        None => None,
    };
    let threads = pool.as_ref().map_or_else(rayon::current_num_threads, |p| p.current_num_threads());

    let mut series = Vec::new();
    let mut distributions = Vec::new();
    let mut labels = Vec::new();
    for (index, entry) in spec.sweep.iter().enumerate() {
        let seed = label_seed(spec.master_seed, index, spec.common_random_numbers);
        if options.progress {
            eprintln!("[{}/{}] {} ({} trajectories)", index + 1, spec.sweep.len(), entry.label, spec.n_trajectories);
        }
        let out = match &pool {
            Some(p) => p.install(|| run_label(spec, entry, seed)),
            None => run_label(spec, entry, seed),
        };
        series.push(out.series);
        distributions.extend(out.distributions);
        labels.push(out.meta);
    }
    let metadata = RunMetadata {
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        spec: spec.clone(),
        threads,
        discord_conventions: resolve_discord_convention(),
        labels,
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    Ok(ExperimentResult { series, distributions, metadata })
}

fn series_columns(outputs: &OutputRequest) -> Vec<String> {
    let mut cols = vec!["tau".to_string(), "lambda".to_string()];
    let mut push = |on: bool, names: &[&str]| {
        if on {
            for n in names {
                cols.push(n.to_string());
                cols.push(format!("{n}_se"));
            }
        }
    };
    push(outputs.photon_number, &["n1", "n2"]);
    push(outputs.corr_xx, &["corr_xx"]);
    push(outputs.corr_pp, &["corr_pp"]);
    push(outputs.epr_sum, &["epr_sum"]);
    push(outputs.discord, &["discord"]);
    push(outputs.var_p, &["var_p1", "var_p2"]);
    if outputs.discord {
        cols.push("bimodal".into());
    }
    cols
}

fn run_label(spec: &ExperimentSpec, entry: &SweepEntry, seed: u64) -> LabelOutput {
    let started = Instant::now();
    let params = entry.overrides.apply(&spec.base);
    let columns = series_columns(&spec.outputs);
    let mut meta = LabelMetadata {
        label: entry.label.clone(),
        seed,
        params,
        derived: derive_params(&params).ok(),
        n_trajectories: spec.n_trajectories,
        n_failed: 0,
        error: None,
        warnings: Vec::new(),
        discord_negative_rows: 0,
        distributions: Vec::new(),
        wall_time_s: 0.0,
    };
    let empty = |meta: LabelMetadata| LabelOutput {
        series: ObservableSeries { label: entry.label.clone(), columns: columns.clone(), rows: Vec::new() },
        distributions: Vec::new(),
        meta,
    };

    let system = match build_system(&params, spec.variant, params.schedule(), spec.boundary) {
        Ok(s) => s,
        Err(e) => {
            meta.error = Some(e.to_string());
            return empty(meta);
        }
    };
    meta.warnings.extend(adiabatic_warning(&params, &system.derived, spec.variant));
    let map = ModeMap::for_system(&system);
    let config = IntegrationConfig {
        dt: spec.dt,
        t_final: spec.t_final(),
        scheme: spec.scheme,
        sample_times: spec.sample_times.clone(),
        master_seed: seed,
        n_trajectories: spec.n_trajectories,
        max_failure_fraction: spec.max_failure_fraction,
    };

    let n = spec.n_trajectories;
    let n_times = spec.sample_times.len();
    let nb = batch_count(n, DEFAULT_BATCHES);
    let mut accs = vec![vec![MomentAccumulator::new(); nb]; n_times];
    let dist_slots: Vec<Option<usize>> = {
        let times = spec.outputs.distributions.as_ref().map(|d| d.times.as_slice()).unwrap_or(&[]);
        let mut next = 0;
        spec.sample_times
            .iter()
            .map(|t| {
                times.contains(t).then(|| {
                    next += 1;
                    next - 1
                })
            })
            .collect()
    };
    let n_dist = dist_slots.iter().flatten().count();
    let mut dist_samples: Vec<Vec<[Complex64; 4]>> = vec![Vec::with_capacity(n); n_dist];
    let keep_bimodal = spec.outputs.discord;
    let n_bimodal = if keep_bimodal { n.min(BIMODAL_SUBSAMPLE) } else { 0 };
    let mut x_halves: Vec<Vec<f32>> = vec![Vec::with_capacity(n_bimodal); if keep_bimodal { n_times } else { 0 }];

    let outcome = run_batch_chunked(
        &system,
        &config,
        &system.vacuum(),
        256,
        4,
        |x, out| {
            let s = map.extract(x).expect("mode map matches the system");
            out.copy_from_slice(&s);
        },
        |record| {
            let b = batch_of(record.index, n, nb);
            let keep = record.index < n_bimodal;
            for k in 0..n_times {
                let v = record.sample(k);
                let s = [v[0], v[1], v[2], v[3]];
                accs[k][b].push(&s);
                if let Some(slot) = dist_slots[k] {
                    dist_samples[slot].push(s);
                }
                if keep {
                    x_halves[k].push((0.5 * (v[0].re + v[1].re)) as f32);
                }
            }
        },
    );
    match outcome {
        Ok(o) => meta.n_failed = o.failures.len(),
        Err(e) => {
            meta.error = Some(e.to_string());
            meta.wall_time_s = started.elapsed().as_secs_f64();
            return empty(meta);
        }
    }

    let mut rows = Vec::with_capacity(n_times);
    let mut distributions = Vec::new();
    for (k, &tau) in spec.sample_times.iter().enumerate() {
        let moments = match MomentSet::from_batches(&accs[k]) {
            Ok(m) => m,
            Err(e) => {
                meta.error = Some(format!("τ = {tau}: {e}"));
                break;
            }
        };
        let (row, negative) = series_row(&spec.outputs, &moments, tau, system.lambda(tau), keep_bimodal.then(|| &x_halves[k]));
        if negative {
            meta.discord_negative_rows += 1;
        }
        rows.push(row);

        if let (Some(slot), Some(req)) = (dist_slots[k], &spec.outputs.distributions) {
            let q = quadrature_stats(&moments.mean);
            for &target in &req.targets {
                let j = target.mode();
                let (center, var) = if target.is_p() { (q.mean_p[j], q.var_p[j]) } else { (q.mean_x[j], q.var_x[j]) };
                let grid = match req.grid.range {
                    Some([lo, hi]) => {
                        (0..req.grid.points).map(|i| lo + (hi - lo) * i as f64 / (req.grid.points - 1) as f64).collect()
                    }
                    None => default_grid(center, var.max(1e-12).sqrt(), req.grid.points),
                };
                let pairs: Vec<(Complex64, Complex64)> =
                    dist_samples[slot].iter().map(|s| (s[2 * j], s[2 * j + 1])).collect();
                match distribution_from_modes(&pairs, target, &grid) {
                    Ok(d) => {
                        meta.distributions.push(DistributionMeta {
                            target,
                            tau,
                            n_samples: d.n_samples,
                            excluded: d.excluded,
                            unreliable: d.unreliable,
                            imag_residue: d.imag_residue,
                            integral: d.integral(),
                        });
                        distributions.push(LabeledDistribution { label: entry.label.clone(), tau, distribution: d });
                    }
                    Err(e) => meta.warnings.push(format!("distribution {} at τ = {tau}: {e}", target.name())),
                }
            }
        }
    }
    if meta.n_failed > 0 {
        meta.warnings.push(format!("{} trajectories failed and were dropped", meta.n_failed));
    }
    meta.wall_time_s = started.elapsed().as_secs_f64();
    LabelOutput { series: ObservableSeries { label: entry.label.clone(), columns, rows }, distributions, meta }
}

fn series_row(
    outputs: &OutputRequest,
    m: &MomentSet,
    tau: f64,
    lambda: f64,
    x_halves: Option<&Vec<f32>>,
) -> (Vec<f64>, bool) {
    let mut row = vec![tau, lambda];
    let mut push = |e: Estimate| {
        row.push(e.value);
        row.push(e.se);
    };
    if outputs.photon_number {
        push(m.estimate(|m| m.photon_number(0)));
        push(m.estimate(|m| m.photon_number(1)));
    }
    if outputs.corr_xx {
        push(m.estimate(|m| quadrature_stats(m).corr_xx));
    }
    if outputs.corr_pp {
        push(m.estimate(|m| quadrature_stats(m).corr_pp));
    }
    if outputs.epr_sum {
        push(m.estimate(|m| quadrature_stats(m).epr_sum));
    }
    let mut negative = false;
    if outputs.discord {
        let discord = |m: &crate::observables::Moments<Complex64>| {
            gaussian_discord(&covariance_matrix(m)).map(|d| d.value).unwrap_or(f64::NAN)
        };
        negative = gaussian_discord(&covariance_matrix(&m.mean)).is_ok_and(|d| d.negative_warning);
        push(m.estimate(discord));
    }
    if outputs.var_p {
        push(m.estimate(|m| quadrature_stats(m).var_p[0]));
        push(m.estimate(|m| quadrature_stats(m).var_p[1]));
    }
    if outputs.discord {
        let flag = x_halves.is_some_and(|s| is_bimodal(s));
        row.push(if flag { 1.0 } else { 0.0 });
    }
    (row, negative)
}

/// Whether the spread of `Re(α₁ + β₁)/2` deviates from its Gaussian fit by
/// more than [`BIMODAL_RESIDUAL`].
///
/// A histogram is used instead of the kernel estimate: far above threshold
/// the two peaks are about as narrow as the vacuum while their separation
/// grows with the amplitude, so a coarse kernel grid would miss them.
fn is_bimodal(x_halves: &[f32]) -> bool {
    let n = x_halves.len();
    if n < 2 {
        return false;
    }
    let mean = x_halves.iter().map(|&v| v as f64).sum::<f64>() / n as f64;
    let var = x_halves.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    if !(var > 1e-12) {
        return false;
    }
    let grid = default_grid(mean, var.sqrt(), BIMODAL_GRID);
    let width = grid[1] - grid[0];
    let mut counts = vec![0.0; BIMODAL_GRID];
    for &v in x_halves {
        let k = ((v as f64 - grid[0]) / width).round();
        if k >= 0.0 && (k as usize) < BIMODAL_GRID {
            counts[k as usize] += 1.0;
        }
    }
    let density = counts.iter().map(|c| c / (n as f64 * width)).collect();
    let hist = QuadratureDistribution {
        target: QuadratureTarget::X1,
        grid,
        density,
        imag_residue: 0.0,
        n_samples: n,
        excluded: 0,
        unreliable: false,
    };
    fit_gaussian(&hist).is_ok_and(|fit| fit.residual > BIMODAL_RESIDUAL)
}
