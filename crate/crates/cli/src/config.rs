use std::path::Path;

use ambiguity_core::dispatch::BatteryScenario;
use ambiguity_core::distributions::{CompactDistribution, GaussianComponent, GaussianMixture1D, NoiseNormBounds};
use ambiguity_core::montecarlo::{ScenarioSpec, SplitPolicy, DEFAULT_REFERENCE_SIZE};
use ambiguity_core::radius::{ConfidenceSplit, NominalConstants};
use ambiguity_core::system::{design_gain_time_invariant, FilterDesign, LtvSystem, ObserverDesign, Schedule};
use nalgebra::{DMatrix, DVector};
use serde::Deserialize;
use toml::{Table, Value};

use crate::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub battery: Option<BatteryConfig>,
    pub system: Option<SystemConfig>,
    pub observer: Option<ObserverConfig>,
    pub initial: Option<DistributionConfig>,
    pub process_noise: Option<DistributionConfig>,
    #[serde(default)]
    pub measurement_noise: Vec<NoiseConfig>,
    #[serde(default)]
    pub experiment: ExperimentConfig,
    pub dispatch: Option<DispatchConfig>,
}

/// Overrides of the built-in storage dispatch scenario.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatteryConfig {
    pub ell: Option<usize>,
    pub demand: Option<f64>,
    pub penalty: Option<f64>,
    pub ocv_alpha: Option<f64>,
    pub ocv_beta: Option<f64>,
    pub filter_process_cov: Option<[f64; 2]>,
    pub filter_measurement_var: Option<f64>,
    pub noise_mean: Option<f64>,
    pub noise_std: Option<f64>,
}

/// Time-invariant plant, matrices row-major.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub a: Vec<Vec<f64>>,
    pub g: Vec<Vec<f64>>,
    pub h: Vec<Vec<f64>>,
    pub horizon: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserverConfig {
    pub gain: Option<Vec<Vec<f64>>>,
    pub process_cov: Option<Vec<Vec<f64>>>,
    pub measurement_cov: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DistributionConfig {
    Point { at: Vec<f64> },
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Cube { dim: usize, half_width: f64 },
    Product { blocks: Vec<DistributionConfig> },
    Mixture { weights: Vec<f64>, components: Vec<DistributionConfig> },
}

/// Scalar Gaussian mixture given as `[weight, mean, std]` triples.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub components: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, Copy, Default, Deserialize, PartialEq)]
#[serde(rename_all = "kebab-case")]
pub enum SplitConfig {
    #[default]
    Optimal,
    Equal,
}

#[derive(Debug, Clone, Copy, Default, Deserialize, PartialEq)]
#[serde(rename_all = "kebab-case")]
pub enum ConstantsConfig {
    #[default]
    Explicit,
    SingleExponential,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_n_grid")]
    pub n: Vec<usize>,
    #[serde(default = "default_beta_grid")]
    pub beta: Vec<f64>,
    #[serde(default)]
    pub split: SplitConfig,
    /// Fixes `β_nom`; the remainder of each `β` goes to the noise radius.
    pub beta_nom: Option<f64>,
    #[serde(default)]
    pub constants: ConstantsConfig,
    pub ell: Option<usize>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_reference_size")]
    pub reference_size: usize,
    pub psi_override: Option<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n: default_n_grid(),
            beta: default_beta_grid(),
            split: SplitConfig::default(),
            beta_nom: None,
            constants: ConstantsConfig::default(),
            ell: None,
            trials: default_trials(),
            reference_size: default_reference_size(),
            psi_override: None,
        }
    }
}

fn default_n_grid() -> Vec<usize> {
    vec![10, 40, 160]
}

fn default_beta_grid() -> Vec<f64> {
    vec![0.1]
}

fn default_trials() -> usize {
    200
}

fn default_reference_size() -> usize {
    DEFAULT_REFERENCE_SIZE
}

/// Sample sizes paired index by index with ambiguity radii.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DispatchConfig {
    pub n: Vec<usize>,
    pub radius: Vec<f64>,
    #[serde(default = "default_realizations")]
    pub realizations: usize,
    #[serde(default = "default_true_samples")]
    pub true_samples: usize,
}

fn default_realizations() -> usize {
    100
}

fn default_true_samples() -> usize {
    20_000
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, col)
}

fn describe(path: &Path, text: &str, err: &toml::de::Error) -> String {
    match err.span() {
        Some(span) => {
            let (line, col) = line_col(text, span.start);
            format!("{}:{line}:{col}: {}", path.display(), err.message())
        }
        None => format!("{}: {}", path.display(), err.message()),
    }
}

/// Parses `key=value`, reading the value as a TOML literal and falling back
/// to a bare string.
fn parse_override(item: &str) -> Result<(Vec<String>, Value), CliError> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{item}` is not of the form key=value")))?;
    let path: Vec<String> = key.trim().split('.').map(str::to_owned).collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("override key `{key}` has an empty segment")));
    }
    let value = match toml::from_str::<Table>(&format!("v = {}", raw.trim())) {
        Ok(mut t) => t.remove("v").expect("parsed table holds the probe key"),
        Err(_) => Value::String(raw.trim().to_owned()),
    };
    Ok((path, value))
}

fn apply_override(root: &mut Table, path: &[String], value: Value) -> Result<(), CliError> {
    let (last, parents) = path.split_last().expect("override path is nonempty");
    let mut table = root;
    for seg in parents {
        let entry = table.entry(seg.clone()).or_insert_with(|| Value::Table(Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("override `{}`: `{seg}` is not a table", path.join("."))))?;
    }
    table.insert(last.clone(), value);
    Ok(())
}

/// Reads a config file and applies `--set` overrides.
pub fn load(path: &Path, overrides: &[String]) -> Result<Config, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    let mut table: Table = toml::from_str(&text).map_err(|e| CliError::Config(describe(path, &text, &e)))?;
    if overrides.is_empty() {
        let config: Config = toml::from_str(&text).map_err(|e| CliError::Config(describe(path, &text, &e)))?;
        return Ok(config);
    }
    toml::from_str::<Config>(&text).map_err(|e| CliError::Config(describe(path, &text, &e)))?;
    for item in overrides {
        let (key, value) = parse_override(item)?;
        apply_override(&mut table, &key, value)?;
    }
    Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Config(format!("{} after overrides: {}", path.display(), e.message())))
}

fn matrix(name: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>, CliError> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 {
        return Err(CliError::Config(format!("matrix `{name}` is empty")));
    }
    if let Some(i) = rows.iter().position(|r| r.len() != ncols) {
        return Err(CliError::Config(format!(
            "matrix `{name}` row {i} has {} entries, expected {ncols}",
            rows[i].len()
        )));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

impl DistributionConfig {
    pub fn build(&self) -> Result<CompactDistribution, CliError> {
        let law = match self {
            DistributionConfig::Point { at } => CompactDistribution::point_mass(DVector::from_vec(at.clone())),
            DistributionConfig::Box { lower, upper } => {
                CompactDistribution::uniform_box(DVector::from_vec(lower.clone()), DVector::from_vec(upper.clone()))?
            }
            DistributionConfig::Cube { dim, half_width } => CompactDistribution::centered_cube(*dim, *half_width)?,
            DistributionConfig::Product { blocks } => {
                CompactDistribution::product(blocks.iter().map(|b| b.build()).collect::<Result<_, _>>()?)?
            }
            DistributionConfig::Mixture { weights, components } => {
                if weights.len() != components.len() {
                    return Err(CliError::Config(format!(
                        "mixture has {} weights for {} components",
                        weights.len(),
                        components.len()
                    )));
                }
                let parts = weights
                    .iter()
                    .zip(components)
                    .map(|(w, c)| Ok((*w, c.build()?)))
                    .collect::<Result<Vec<_>, CliError>>()?;
                CompactDistribution::mixture(parts)?
            }
        };
        Ok(law)
    }
}

impl NoiseConfig {
    pub fn build(&self) -> Result<GaussianMixture1D, CliError> {
        let components = self
            .components
            .iter()
            .map(|&[weight, mean, std]| GaussianComponent { weight, mean, std })
            .collect();
        Ok(GaussianMixture1D::new(components)?)
    }
}

/// `m_v = min ‖v‖₂`, `M_v = max ‖v‖₂` and `C_v = max ψ₂` bound over the sensors.
fn envelope(laws: &[GaussianMixture1D]) -> Result<NoiseNormBounds, CliError> {
    let mut bounds: Option<NoiseNormBounds> = None;
    for law in laws {
        let b = NoiseNormBounds::from_gaussian_mixture(law)?;
        bounds = Some(match bounds {
            None => b,
            Some(acc) => NoiseNormBounds::new(acc.m_v.min(b.m_v), acc.big_m_v.max(b.big_m_v), acc.c_v.max(b.c_v), 2.0)?,
        });
    }
    bounds.ok_or_else(|| CliError::Config("at least one [[measurement_noise]] entry is required".into()))
}

/// Fully built system, observer and noise model.
pub struct Scenario {
    pub sys: LtvSystem,
    pub obs: ObserverDesign,
    pub initial: CompactDistribution,
    pub process_noise: Option<CompactDistribution>,
    pub measurement_noise: Vec<GaussianMixture1D>,
    pub noise_bounds: NoiseNormBounds,
}

impl Config {
    /// The battery scenario with all overrides applied.
    pub fn battery_scenario(&self) -> Result<BatteryScenario, CliError> {
        let overrides = self
            .battery
            .as_ref()
            .ok_or_else(|| CliError::Config("this command needs a [battery] section".into()))?;
        let mut sc = BatteryScenario::reference()?;
        if let Some(ell) = overrides.ell.or(self.experiment.ell) {
            sc.ell = ell;
        }
        if let Some(x) = overrides.demand {
            sc.demand = x;
        }
        if let Some(x) = overrides.penalty {
            sc.penalty = x;
        }
        for unit in &mut sc.batteries {
            if let Some(x) = overrides.ocv_alpha {
                unit.cell.ocv_alpha = x;
            }
            if let Some(x) = overrides.ocv_beta {
                unit.cell.ocv_beta = x;
            }
        }
        if let Some(q) = overrides.filter_process_cov {
            sc.filter_process_cov = q;
        }
        if let Some(r) = overrides.filter_measurement_var {
            sc.filter_measurement_var = r;
        }
        if overrides.noise_mean.is_some() || overrides.noise_std.is_some() {
            let mean = overrides.noise_mean.unwrap_or(0.01);
            let std = overrides.noise_std.unwrap_or(0.01);
            sc.measurement_noise = GaussianMixture1D::symmetric_pair(mean, std)?;
        }
        Ok(sc)
    }

    pub fn scenario(&self) -> Result<Scenario, CliError> {
        match (&self.battery, &self.system) {
            (Some(_), Some(_)) => Err(CliError::Config("give either [battery] or [system], not both".into())),
            (None, None) => Err(CliError::Config("a [battery] or [system] section is required".into())),
            (Some(_), None) => {
                let sc = self.battery_scenario()?;
                let sys = sc.system()?;
                let obs = sc.observer(&sys)?;
                Ok(Scenario {
                    initial: sc.initial_deviation_law()?,
                    process_noise: None,
                    noise_bounds: sc.noise_bounds()?,
                    measurement_noise: vec![sc.measurement_noise.clone()],
                    sys,
                    obs,
                })
            }
            (None, Some(s)) => {
                let horizon = self.experiment.ell.unwrap_or(s.horizon);
                let sys = LtvSystem::time_invariant(matrix("a", &s.a)?, matrix("g", &s.g)?, matrix("h", &s.h)?, horizon)?;
                let obs = self.observer(&sys)?;
                let initial = self
                    .initial
                    .as_ref()
                    .ok_or_else(|| CliError::Config("a linear scenario needs an [initial] law".into()))?
                    .build()?;
                let process_noise = self.process_noise.as_ref().map(|d| d.build()).transpose()?;
                let measurement_noise = self.measurement_noise.iter().map(|n| n.build()).collect::<Result<Vec<_>, _>>()?;
                Ok(Scenario {
                    noise_bounds: envelope(&measurement_noise)?,
                    sys,
                    obs,
                    initial,
                    process_noise,
                    measurement_noise,
                })
            }
        }
    }

    fn observer(&self, sys: &LtvSystem) -> Result<ObserverDesign, CliError> {
        let cfg = self
            .observer
            .as_ref()
            .ok_or_else(|| CliError::Config("a linear scenario needs an [observer] section".into()))?;
        match (&cfg.gain, &cfg.process_cov, &cfg.measurement_cov) {
            (Some(k), None, None) => Ok(ObserverDesign::new(sys, Schedule::Constant(matrix("observer.gain", k)?))?),
            (None, Some(q), Some(r)) => {
                let design = FilterDesign::new(matrix("observer.process_cov", q)?, matrix("observer.measurement_cov", r)?);
                Ok(design_gain_time_invariant(sys, &design)?)
            }
            _ => Err(CliError::Config(
                "[observer] takes either `gain` or both `process_cov` and `measurement_cov`".into(),
            )),
        }
    }

    pub fn n_grid(&self) -> Result<&[usize], CliError> {
        let n = &self.experiment.n;
        if n.is_empty() {
            return Err(CliError::Config("experiment.n is an empty grid".into()));
        }
        if n.contains(&0) {
            return Err(CliError::Config("experiment.n must contain positive sample sizes".into()));
        }
        Ok(n)
    }

    pub fn beta_grid(&self) -> Result<&[f64], CliError> {
        let beta = &self.experiment.beta;
        if beta.is_empty() {
            return Err(CliError::Config("experiment.beta is an empty grid".into()));
        }
        Ok(beta)
    }

    pub fn constants(&self) -> NominalConstants {
        match self.experiment.constants {
            ConstantsConfig::Explicit => NominalConstants::Explicit,
            ConstantsConfig::SingleExponential => NominalConstants::SingleExponential,
        }
    }

    pub fn split_policy(&self, beta: f64) -> Result<SplitPolicy, CliError> {
        Ok(match (self.experiment.beta_nom, self.experiment.split) {
            (Some(b), _) => SplitPolicy::Fixed(ConfidenceSplit::from_nominal(beta, b)?),
            (None, SplitConfig::Optimal) => SplitPolicy::Optimal,
            (None, SplitConfig::Equal) => SplitPolicy::Equal,
        })
    }

    pub fn scenario_spec(&self, scenario: &Scenario, n: usize, beta: f64, seed: u64) -> Result<ScenarioSpec, CliError> {
        Ok(ScenarioSpec {
            sys: scenario.sys.clone(),
            obs: scenario.obs.clone(),
            initial: scenario.initial.clone(),
            process_noise: scenario.process_noise.clone(),
            measurement_noise: scenario.measurement_noise.clone(),
            noise_bounds: scenario.noise_bounds,
            n,
            beta,
            split: self.split_policy(beta)?,
            constants: self.constants(),
            trials: self.experiment.trials,
            seed,
            reference_size: self.experiment.reference_size,
            psi_override: self.experiment.psi_override,
        })
    }
}
