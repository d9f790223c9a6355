//! Experiment spec files.
//!
//! A spec is a flat list of `key = value` lines. `#` starts a comment and
//! blank lines are ignored. List values are comma-separated, and seed lists
//! also accept half-open ranges such as `0..5`. Settings are layered: the
//! named `preset` first, then the file, then command-line overrides. A key
//! may appear only once per layer.
//!
//! | key | value |
//! |-----|-------|
//! | `preset` | `fig1`, `fig2`, `fig3` |
//! | `dataset` | LibSVM path (`.gz` allowed) or `synthetic` |
//! | `dim` | expected LibSVM dimension |
//! | `synthetic.n`, `synthetic.d`, `synthetic.duplication`, `synthetic.noise`, `synthetic.seed` | synthetic family |
//! | `normalize` | scale rows to unit norm radius |
//! | `loss` | `quadratic`, `logistic`, `softmax` |
//! | `classes` | softmax class count |
//! | `mu` | ridge strength |
//! | `solvers` | list of `hsdmpg`, `svrg`, `sgd`, `scsg`, `fgd` |
//! | `seeds` | list of seeds |
//! | `budget_epochs`, `ifo_budget` | IFO budget (epochs count `n` touches each) |
//! | `target_subopt` | suboptimality target; runs stop once it is met |
//! | `max_outer` | cap on outer iterations or epochs |
//! | `output`, `workers`, `record_wall_time` | output directory, worker threads, real timing |
//! | `reference.cache`, `reference.dense_max_d`, `reference.tol`, `reference.max_iters` | reference optimum |
//! | `hsdmpg.anchor` | `power:p`, `fixed:s`, `theory` |
//! | `hsdmpg.gamma` | `experimental`, `theory`, or a number |
//! | `hsdmpg.nu` | a number or `plugin` |
//! | `hsdmpg.schedule`, `hsdmpg.exponent` | `practical`/`theory`, `single`/`doubled` |
//! | `hsdmpg.initial_batch`, `hsdmpg.growth_rate` | practical schedule |
//! | `hsdmpg.inner` | SVRG epochs per subproblem, or `theory` |
//! | `hsdmpg.inner_step` | inner SVRG step size |
//! | `hsdmpg.per_model` | subsolver iterations per majorant, or `theory` |
//! | `hsdmpg.sigma_eff` | `σ` stand-in for the theory outer tolerance |
//! | `svrg.step`, `svrg.epoch_length` | SVRG baseline |
//! | `sgd.step`, `sgd.minibatch` | `invt`, `invt:η₀`, `const:η` |
//! | `scsg.batch`, `scsg.minibatch`, `scsg.step` | SCSG baseline |
//! | `fgd.step` | FGD baseline |

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use hsdmpg_core::{
    AnchorSize, Dataset, ErmProblem, FgdConfig, GammaMode, GenericConfig, HsdmpgConfig,
    InnerStopping, LossKind, LossModel, NuMode, OuterStopping, ScheduleExponent, ScheduleMode,
    ScsgConfig, SgdConfig, StepSize, StopRule, SvrgConfig, SvrgFullConfig,
};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SolverKind {
    Hsdmpg,
    Svrg,
    Sgd,
    Scsg,
    Fgd,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Hsdmpg => "hsdmpg",
            SolverKind::Svrg => "svrg",
            SolverKind::Sgd => "sgd",
            SolverKind::Scsg => "scsg",
            SolverKind::Fgd => "fgd",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "hsdmpg" => Ok(SolverKind::Hsdmpg),
            "svrg" => Ok(SolverKind::Svrg),
            "sgd" => Ok(SolverKind::Sgd),
            "scsg" => Ok(SolverKind::Scsg),
            "fgd" => Ok(SolverKind::Fgd),
            other => Err(format!("unknown solver `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d: usize,
    pub duplication: usize,
    pub noise: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    LibSvm { path: PathBuf, dim: Option<usize> },
    Synthetic(SyntheticSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Target {
    pub budget_epochs: Option<f64>,
    pub ifo_budget: Option<u64>,
    pub subopt: Option<f64>,
    pub max_outer: usize,
}

impl Target {
    /// Stop rule for a problem with `n` samples; the IFO budget is the
    /// smaller of the two budget settings.
    pub fn stop_rule(&self, n: usize) -> StopRule {
        let from_epochs = self.budget_epochs.map(|e| (e * n as f64).ceil() as u64);
        let budget = match (from_epochs, self.ifo_budget) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        StopRule {
            max_outer: Some(self.max_outer),
            ifo_budget: budget,
            grad_norm: None,
            suboptimality: self.subopt,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSettings {
    /// Defaults to `<output>/cache`.
    pub cache: Option<PathBuf>,
    /// Quadratic problems up to this dimension use the normal equations.
    pub dense_max_d: usize,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for ReferenceSettings {
    fn default() -> Self {
        Self {
            cache: None,
            dense_max_d: 2000,
            tol: 1e-10,
            max_iters: 1_000_000,
        }
    }
}

/// Per-solver settings. Seeds and clocks are filled in per run.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverSettings {
    pub hsdmpg: HsdmpgConfig,
    pub per_model: OuterStopping,
    pub sigma_eff: f64,
    pub svrg: SvrgConfig,
    pub sgd: SgdConfig,
    /// `None` uses `round(n^0.75)`.
    pub scsg_batch: Option<usize>,
    pub scsg: ScsgConfig,
    pub fgd: FgdConfig,
}

impl Default for SolverSettings {
    fn default() -> Self {
        let generic = GenericConfig::default();
        Self {
            hsdmpg: HsdmpgConfig::default(),
            per_model: generic.outer_stopping,
            sigma_eff: generic.sigma_eff,
            svrg: SvrgFullConfig::default().svrg,
            sgd: SgdConfig::default(),
            scsg_batch: None,
            scsg: ScsgConfig::default(),
            fgd: FgdConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub preset: Option<String>,
    pub dataset: DatasetSource,
    pub normalize: bool,
    pub loss: LossKind,
    pub classes: Option<usize>,
    pub mu: f64,
    pub solvers: Vec<SolverKind>,
    pub seeds: Vec<u64>,
    pub target: Target,
    pub output: PathBuf,
    pub workers: usize,
    pub record_wall_time: bool,
    pub reference: ReferenceSettings,
    pub settings: SolverSettings,
}

const KEYS: &[&str] = &[
    "dataset",
    "dim",
    "synthetic.n",
    "synthetic.d",
    "synthetic.duplication",
    "synthetic.noise",
    "synthetic.seed",
    "normalize",
    "loss",
    "classes",
    "mu",
    "solvers",
    "seeds",
    "budget_epochs",
    "ifo_budget",
    "target_subopt",
    "max_outer",
    "output",
    "workers",
    "record_wall_time",
    "reference.cache",
    "reference.dense_max_d",
    "reference.tol",
    "reference.max_iters",
    "hsdmpg.anchor",
    "hsdmpg.gamma",
    "hsdmpg.nu",
    "hsdmpg.schedule",
    "hsdmpg.exponent",
    "hsdmpg.initial_batch",
    "hsdmpg.growth_rate",
    "hsdmpg.inner",
    "hsdmpg.inner_step",
    "hsdmpg.per_model",
    "hsdmpg.sigma_eff",
    "svrg.step",
    "svrg.epoch_length",
    "sgd.step",
    "sgd.minibatch",
    "scsg.batch",
    "scsg.minibatch",
    "scsg.step",
    "fgd.step",
];

/// Key-value pairs with the line each came from (0 for overrides and presets).
type Layer = Vec<(String, String, usize)>;

fn preset(name: &str) -> Option<&'static [(&'static str, &'static str)]> {
    const SHARED: [(&str, &str); 4] = [
        ("hsdmpg.anchor", "power:0.75"),
        ("hsdmpg.initial_batch", "50"),
        ("hsdmpg.gamma", "experimental"),
        ("solvers", "hsdmpg,svrg,sgd,scsg"),
    ];
    const FIG1: [(&str, &str); 8] = [
        SHARED[0],
        SHARED[1],
        SHARED[2],
        SHARED[3],
        ("loss", "quadratic"),
        ("mu", "0.01"),
        ("hsdmpg.inner", "3"),
        ("budget_epochs", "1"),
    ];
    const FIG2: [(&str, &str); 8] = [
        SHARED[0],
        SHARED[1],
        SHARED[2],
        SHARED[3],
        ("loss", "quadratic"),
        ("mu", "0.0001"),
        ("hsdmpg.inner", "10"),
        ("budget_epochs", "20"),
    ];
    const FIG3: [(&str, &str); 8] = [
        SHARED[0],
        SHARED[1],
        SHARED[2],
        SHARED[3],
        ("loss", "logistic"),
        ("mu", "0.01"),
        ("hsdmpg.inner", "3"),
        ("budget_epochs", "8"),
    ];
    match name {
        "fig1" => Some(&FIG1),
        "fig2" => Some(&FIG2),
        "fig3" => Some(&FIG3),
        _ => None,
    }
}

fn parse_layer(text: &str) -> Result<Layer> {
    let mut out: Layer = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| Error::Spec {
            line,
            message: format!("expected `key = value`, got `{content}`"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(Error::Spec {
                line,
                message: "empty key".into(),
            });
        }
        if let Some((_, _, first)) = out.iter().find(|(k, _, _)| k == key) {
            return Err(Error::Spec {
                line,
                message: format!("`{key}` already set on line {first}"),
            });
        }
        out.push((key.to_string(), value.to_string(), line));
    }
    Ok(out)
}

/// Parses `key=value` command-line overrides.
pub fn parse_overrides<S: AsRef<str>>(items: &[S]) -> Result<Vec<(String, String)>> {
    items
        .iter()
        .map(|item| {
            let item = item.as_ref();
            item.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .filter(|(k, _)| !k.is_empty())
                .ok_or_else(|| Error::Invalid(format!("override `{item}` is not `key=value`")))
        })
        .collect()
}

struct Values {
    map: BTreeMap<String, (String, usize)>,
}

impl Values {
    fn take(&mut self, key: &str) -> Option<(String, usize)> {
        self.map.remove(key)
    }

    fn parse<T: FromStr>(&mut self, key: &str) -> Result<Option<T>>
    where
        T::Err: fmt::Display,
    {
        match self.take(key) {
            None => Ok(None),
            Some((v, line)) => v.parse::<T>().map(Some).map_err(|e| Error::Spec {
                line,
                message: format!("`{key}`: cannot parse `{v}`: {e}"),
            }),
        }
    }

    fn with<T>(
        &mut self,
        key: &str,
        f: impl FnOnce(&str) -> std::result::Result<T, String>,
    ) -> Result<Option<T>> {
        match self.take(key) {
            None => Ok(None),
            Some((v, line)) => f(&v).map(Some).map_err(|message| Error::Spec {
                line,
                message: format!("`{key}`: {message}"),
            }),
        }
    }
}

fn number<T: FromStr>(s: &str) -> std::result::Result<T, String>
where
    T::Err: fmt::Display,
{
    s.trim().parse::<T>().map_err(|e| format!("cannot parse `{s}`: {e}"))
}

fn parse_bool(s: &str) -> std::result::Result<bool, String> {
    match s {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(format!("expected true or false, got `{other}`")),
    }
}

fn parse_list<T>(s: &str, item: impl Fn(&str) -> std::result::Result<T, String>) -> std::result::Result<Vec<T>, String> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(item)
        .collect()
}

fn parse_seeds(s: &str) -> std::result::Result<Vec<u64>, String> {
    let mut seeds = Vec::new();
    for part in s.split(',').map(str::trim).filter(|x| !x.is_empty()) {
        match part.split_once("..") {
            Some((a, b)) => {
                let (a, b): (u64, u64) = (number(a)?, number(b)?);
                if a >= b {
                    return Err(format!("empty seed range `{part}`"));
                }
                seeds.extend(a..b);
            }
            None => seeds.push(number(part)?),
        }
    }
    Ok(seeds)
}

fn parse_anchor(s: &str) -> std::result::Result<AnchorSize, String> {
    match s.split_once(':') {
        Some(("power", p)) => Ok(AnchorSize::Power(number(p)?)),
        Some(("fixed", v)) => Ok(AnchorSize::Fixed(number(v)?)),
        None if s == "theory" => Ok(AnchorSize::Theory),
        _ => Err(format!("expected power:p, fixed:s or theory, got `{s}`")),
    }
}

fn parse_gamma(s: &str) -> std::result::Result<GammaMode, String> {
    match s {
        "experimental" => Ok(GammaMode::Experimental),
        "theory" => Ok(GammaMode::Theory),
        v => Ok(GammaMode::Explicit(number(v)?)),
    }
}

fn parse_step(s: &str) -> std::result::Result<StepSize, String> {
    match s.split_once(':') {
        None if s == "invt" => Ok(StepSize::InvT(None)),
        Some(("invt", v)) => Ok(StepSize::InvT(Some(number(v)?))),
        Some(("const", v)) => Ok(StepSize::Constant(number(v)?)),
        _ => Err(format!("expected invt, invt:η₀ or const:η, got `{s}`")),
    }
}

impl ExperimentSpec {
    /// Parses spec text. Relative paths are kept as written.
    pub fn parse(text: &str) -> Result<Self> {
        Self::from_layers(parse_layer(text)?, &[])
    }

    /// Parses spec text and applies overrides.
    pub fn parse_with(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        Self::from_layers(parse_layer(text)?, overrides)
    }

    /// Reads a spec file. Relative dataset and output paths are resolved
    /// against the file's directory.
    pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut spec = Self::parse_with(&text, overrides)?;
        let base = path.parent().unwrap_or_else(|| Path::new(""));
        spec.resolve_paths(base);
        Ok(spec)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let DatasetSource::LibSvm { path, .. } = &mut self.dataset {
            fix(path);
        }
        fix(&mut self.output);
        if let Some(cache) = &mut self.reference.cache {
            fix(cache);
        }
    }

    fn from_layers(file: Layer, overrides: &[(String, String)]) -> Result<Self> {
        let preset_name = overrides
            .iter()
            .rev()
            .find(|(k, _)| k == "preset")
            .map(|(_, v)| v.clone())
            .or_else(|| file.iter().find(|(k, _, _)| k == "preset").map(|(_, v, _)| v.clone()));
        let mut map: BTreeMap<String, (String, usize)> = BTreeMap::new();
        if let Some(name) = &preset_name {
            let pairs = preset(name)
                .ok_or_else(|| Error::Invalid(format!("unknown preset `{name}`")))?;
            for (k, v) in pairs {
                map.insert(k.to_string(), (v.to_string(), 0));
            }
        }
        for (k, v, line) in file {
            map.insert(k, (v, line));
        }
        for (k, v) in overrides {
            map.insert(k.clone(), (v.clone(), 0));
        }
        map.remove("preset");
        if let Some((key, (_, line))) = map.iter().find(|(k, _)| !KEYS.contains(&k.as_str())) {
            return Err(Error::Spec {
                line: *line,
                message: format!("unknown key `{key}`"),
            });
        }
        let mut vals = Values { map };

        let dataset = match vals.take("dataset") {
            None => return Err(Error::Invalid("`dataset` is required".into())),
            Some((v, _)) if v == "synthetic" => DatasetSource::Synthetic(SyntheticSpec {
                n: vals.parse("synthetic.n")?.unwrap_or(4096),
                d: vals.parse("synthetic.d")?.unwrap_or(20),
                duplication: vals.parse("synthetic.duplication")?.unwrap_or(1),
                noise: vals.parse("synthetic.noise")?.unwrap_or(0.1),
                seed: vals.parse("synthetic.seed")?.unwrap_or(0),
            }),
            Some((v, _)) => DatasetSource::LibSvm {
                path: PathBuf::from(v),
                dim: vals.parse("dim")?,
            },
        };
        let loss = vals
            .with("loss", |s| match s {
                "quadratic" => Ok(LossKind::Quadratic),
                "logistic" => Ok(LossKind::Logistic),
                "softmax" => Ok(LossKind::Softmax),
                other => Err(format!("unknown loss `{other}`")),
            })?
            .ok_or_else(|| Error::Invalid("`loss` is required".into()))?;
        let mu: f64 = vals
            .parse("mu")?
            .ok_or_else(|| Error::Invalid("`mu` is required".into()))?;
        let solvers = vals
            .with("solvers", |s| parse_list(s, |x| x.parse::<SolverKind>()))?
            .unwrap_or_default();
        let seeds = vals.with("seeds", parse_seeds)?.unwrap_or_else(|| vec![0]);

        let target = Target {
            budget_epochs: vals.parse("budget_epochs")?,
            ifo_budget: vals.parse("ifo_budget")?,
            subopt: vals.parse("target_subopt")?,
            max_outer: vals.parse("max_outer")?.unwrap_or(10_000),
        };

        let mut reference = ReferenceSettings::default();
        reference.cache = vals.take("reference.cache").map(|(v, _)| PathBuf::from(v));
        if let Some(v) = vals.parse("reference.dense_max_d")? {
            reference.dense_max_d = v;
        }
        if let Some(v) = vals.parse("reference.tol")? {
            reference.tol = v;
        }
        if let Some(v) = vals.parse("reference.max_iters")? {
            reference.max_iters = v;
        }

        let mut settings = SolverSettings::default();
        let h = &mut settings.hsdmpg;
        if let Some(v) = vals.with("hsdmpg.anchor", parse_anchor)? {
            h.anchor = v;
        }
        if let Some(v) = vals.with("hsdmpg.gamma", parse_gamma)? {
            h.gamma = v;
        }
        if let Some(v) = vals.with("hsdmpg.nu", |s| match s {
            "plugin" => Ok(NuMode::PlugIn),
            v => Ok(NuMode::Fixed(number(v)?)),
        })? {
            h.nu = v;
        }
        if let Some(v) = vals.with("hsdmpg.schedule", |s| match s {
            "practical" => Ok(ScheduleMode::Practical),
            "theory" => Ok(ScheduleMode::Theory),
            other => Err(format!("expected practical or theory, got `{other}`")),
        })? {
            h.schedule = v;
        }
        if let Some(v) = vals.with("hsdmpg.exponent", |s| match s {
            "single" => Ok(ScheduleExponent::Single),
            "doubled" => Ok(ScheduleExponent::Doubled),
            other => Err(format!("expected single or doubled, got `{other}`")),
        })? {
            h.exponent = v;
        }
        if let Some(v) = vals.parse("hsdmpg.initial_batch")? {
            h.initial_batch = v;
        }
        if let Some(v) = vals.parse("hsdmpg.growth_rate")? {
            h.growth_rate = v;
        }
        if let Some(v) = vals.with("hsdmpg.inner", |s| match s {
            "theory" => Ok(InnerStopping::TheoryEps),
            v => Ok(InnerStopping::FixedEpochs(number(v)?)),
        })? {
            h.inner_stopping = v;
        }
        if let Some(v) = vals.parse("hsdmpg.inner_step")? {
            h.inner.step_size = Some(v);
        }
        if let Some(v) = vals.with("hsdmpg.per_model", |s| match s {
            "theory" => Ok(OuterStopping::TheoryEps),
            v => Ok(OuterStopping::FixedInnerBudget(number(v)?)),
        })? {
            settings.per_model = v;
        }
        if let Some(v) = vals.parse("hsdmpg.sigma_eff")? {
            settings.sigma_eff = v;
        }
        if let Some(v) = vals.parse("svrg.step")? {
            settings.svrg.step_size = Some(v);
        }
        if let Some(v) = vals.parse("svrg.epoch_length")? {
            settings.svrg.epoch_length = Some(v);
        }
        if let Some(v) = vals.with("sgd.step", parse_step)? {
            settings.sgd.step = v;
        }
        if let Some(v) = vals.parse("sgd.minibatch")? {
            settings.sgd.minibatch = v;
        }
        settings.scsg_batch = vals.parse("scsg.batch")?;
        if let Some(v) = vals.parse("scsg.minibatch")? {
            settings.scsg.minibatch = v;
        }
        if let Some(v) = vals.parse("scsg.step")? {
            settings.scsg.step_size = Some(v);
        }
        if let Some(v) = vals.parse("fgd.step")? {
            settings.fgd.step_size = Some(v);
        }

        let spec = ExperimentSpec {
            preset: preset_name,
            dataset,
            normalize: vals.with("normalize", parse_bool)?.unwrap_or(false),
            loss,
            classes: vals.parse("classes")?,
            mu,
            solvers,
            seeds,
            target,
            output: vals
                .take("output")
                .map(|(v, _)| PathBuf::from(v))
                .unwrap_or_else(|| PathBuf::from("out")),
            workers: vals.parse("workers")?.unwrap_or(4),
            record_wall_time: vals.with("record_wall_time", parse_bool)?.unwrap_or(false),
            reference,
            settings,
        };
        debug_assert!(vals.map.is_empty(), "unhandled keys {:?}", vals.map.keys());
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::Invalid(format!("mu must be positive, got {}", self.mu)));
        }
        if self.solvers.is_empty() {
            return Err(Error::Invalid("at least one solver is required".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Invalid("at least one seed is required".into()));
        }
        let mut solvers = self.solvers.clone();
        solvers.sort();
        solvers.dedup();
        if solvers.len() != self.solvers.len() {
            return Err(Error::Invalid("solvers are listed more than once".into()));
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != self.seeds.len() {
            return Err(Error::Invalid("seeds are listed more than once".into()));
        }
        if self.workers == 0 {
            return Err(Error::Invalid("workers must be at least 1".into()));
        }
        if let Some(e) = self.target.budget_epochs {
            if !(e > 0.0) {
                return Err(Error::Invalid(format!("budget_epochs must be positive, got {e}")));
            }
        }
        if let Some(eps) = self.target.subopt {
            if !(eps > 0.0) {
                return Err(Error::Invalid(format!("target_subopt must be positive, got {eps}")));
            }
        }
        if let DatasetSource::Synthetic(s) = &self.dataset {
            if s.n == 0 || s.d == 0 || s.duplication == 0 || s.n % s.duplication != 0 {
                return Err(Error::Invalid(format!(
                    "synthetic n = {} must be a positive multiple of duplication = {}",
                    s.n, s.duplication
                )));
            }
        }
        Ok(())
    }

    /// Loads or generates the dataset, with labels shaped for the loss.
    pub fn load_dataset(&self) -> Result<Dataset> {
        let data = match &self.dataset {
            DatasetSource::LibSvm { path, dim } => hsdmpg_core::load_libsvm(path, *dim)?,
            DatasetSource::Synthetic(s) => {
                let raw =
                    hsdmpg_core::synthesize_redundant(s.n, s.d, s.duplication, s.noise, s.seed)?;
                match self.loss {
                    LossKind::Quadratic => raw,
                    LossKind::Logistic => raw.binarized(),
                    LossKind::Softmax => raw.discretized(self.classes.unwrap_or(3))?,
                }
            }
        };
        Ok(if self.normalize {
            data.scaled_to_unit_radius()
        } else {
            data
        })
    }

    pub fn build_problem(&self, data: Dataset) -> Result<ErmProblem> {
        let model = match self.loss {
            LossKind::Quadratic => LossModel::quadratic(),
            LossKind::Logistic => LossModel::logistic(),
            LossKind::Softmax => {
                let k = match self.classes {
                    Some(k) => k,
                    None => data.num_classes()?,
                };
                LossModel::softmax(k)?
            }
        };
        Ok(ErmProblem::new(data, model, self.mu)?)
    }

    /// The cache directory for reference optima.
    pub fn cache_dir(&self) -> PathBuf {
        self.reference
            .cache
            .clone()
            .unwrap_or_else(|| self.output.join("cache"))
    }
}
