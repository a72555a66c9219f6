//! Line-oriented `key = value` run descriptions.
//!
//! Keys are dotted (`optimizer.kind = ikfad`, `hp.dt = 0.005`). Lists are
//! comma separated. `#` starts a comment. Unknown or repeated keys are errors.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use kinopt::{HyperParams, MomentumSchedule, OptimizerConfig, OptimizerKind};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpecError {
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("line {line}: key `{key}` already set on line {first}")]
    Duplicate {
        key: String,
        line: usize,
        first: usize,
    },
    #[error("line {line}: unknown key `{key}`")]
    Unknown { key: String, line: usize },
    #[error("missing key `{0}`")]
    Missing(String),
    #[error("line {line}: bad value {value:?} for `{key}`: {reason}")]
    Value {
        key: String,
        line: usize,
        value: String,
        reason: String,
    },
    #[error("{0}")]
    Invalid(String),
}

type SpecResult<T> = std::result::Result<T, SpecError>;

/// Raw entries of a spec file, consumed key by key.
#[derive(Debug, Clone)]
pub struct Fields {
    map: BTreeMap<String, (usize, String)>,
}

impl Fields {
    pub fn parse(text: &str) -> SpecResult<Self> {
        let mut map: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (k, v) = body.split_once('=').ok_or_else(|| SpecError::Syntax {
                line,
                text: raw.to_string(),
            })?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() || k.contains(char::is_whitespace) {
                return Err(SpecError::Syntax {
                    line,
                    text: raw.to_string(),
                });
            }
            if let Some((first, _)) = map.get(k) {
                return Err(SpecError::Duplicate {
                    key: k.to_string(),
                    line,
                    first: *first,
                });
            }
            map.insert(k.to_string(), (line, v.to_string()));
        }
        Ok(Fields { map })
    }

    pub fn has(&self, key: &str) -> bool {
        self.map.contains_key(key)
    }

    fn take_raw(&mut self, key: &str) -> Option<(usize, String)> {
        self.map.remove(key)
    }

    fn convert<T>(
        key: &str,
        line: usize,
        value: &str,
        f: impl FnOnce(&str) -> Result<T, String>,
    ) -> SpecResult<T> {
        f(value).map_err(|reason| SpecError::Value {
            key: key.to_string(),
            line,
            value: value.to_string(),
            reason,
        })
    }

    pub fn opt_with<T>(
        &mut self,
        key: &str,
        f: impl FnOnce(&str) -> Result<T, String>,
    ) -> SpecResult<Option<T>> {
        match self.take_raw(key) {
            Some((line, v)) => Self::convert(key, line, &v, f).map(Some),
            None => Ok(None),
        }
    }

    pub fn req_with<T>(
        &mut self,
        key: &str,
        f: impl FnOnce(&str) -> Result<T, String>,
    ) -> SpecResult<T> {
        self.opt_with(key, f)?
            .ok_or_else(|| SpecError::Missing(key.to_string()))
    }

    pub fn opt<T: FromStr>(&mut self, key: &str) -> SpecResult<Option<T>>
    where
        T::Err: fmt::Display,
    {
        self.opt_with(key, scalar::<T>)
    }

    pub fn req<T: FromStr>(&mut self, key: &str) -> SpecResult<T>
    where
        T::Err: fmt::Display,
    {
        self.req_with(key, scalar::<T>)
    }

    pub fn opt_list<T: FromStr>(&mut self, key: &str) -> SpecResult<Option<Vec<T>>>
    where
        T::Err: fmt::Display,
    {
        self.opt_with(key, list::<T>)
    }

    pub fn req_list<T: FromStr>(&mut self, key: &str) -> SpecResult<Vec<T>>
    where
        T::Err: fmt::Display,
    {
        self.req_with(key, list::<T>)
    }

    /// Errors on the first leftover key, in line order.
    pub fn finish(self) -> SpecResult<()> {
        match self.map.into_iter().min_by_key(|(_, (line, _))| *line) {
            Some((key, (line, _))) => Err(SpecError::Unknown { key, line }),
            None => Ok(()),
        }
    }
}

fn scalar<T: FromStr>(s: &str) -> Result<T, String>
where
    T::Err: fmt::Display,
{
    s.parse::<T>().map_err(|e| e.to_string())
}

fn list<T: FromStr>(s: &str) -> Result<Vec<T>, String>
where
    T::Err: fmt::Display,
{
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(|v| scalar::<T>(v.trim())).collect()
}

fn opt_u64(s: &str) -> Result<Option<u64>, String> {
    if s == "none" {
        Ok(None)
    } else {
        scalar::<u64>(s).map(Some)
    }
}

fn opt_f64(s: &str) -> Result<Option<f64>, String> {
    if s == "none" {
        Ok(None)
    } else {
        scalar::<f64>(s).map(Some)
    }
}

fn fmt_f(v: f64) -> String {
    format!("{v:?}")
}

fn fmt_list<T: fmt::Debug>(v: &[T]) -> String {
    v.iter()
        .map(|a| format!("{a:?}"))
        .collect::<Vec<_>>()
        .join(", ")
}

fn fmt_opt_u64(v: Option<u64>) -> String {
    v.map_or_else(|| "none".into(), |s| s.to_string())
}

/// Objective plus its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSpec {
    /// `f = 1/2 x^T A x` with the given spectrum.
    Quadratic {
        eigenvalues: Vec<f64>,
        rotation_seed: Option<u64>,
    },
    /// Log-spaced spectrum in `[min_eig, max_eig]`.
    Fig3Quadratic {
        dim: usize,
        min_eig: f64,
        max_eig: f64,
        rotation_seed: Option<u64>,
    },
    Rosenbrock {
        a: f64,
        b: f64,
    },
    ToyClassifier {
        n_examples: usize,
        n_features: usize,
        hidden: usize,
        data_seed: u64,
        batch_size: Option<u64>,
        l2: f64,
    },
}

impl ProblemSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ProblemSpec::Quadratic { .. } => "quadratic",
            ProblemSpec::Fig3Quadratic { .. } => "fig3_quadratic",
            ProblemSpec::Rosenbrock { .. } => "rosenbrock",
            ProblemSpec::ToyClassifier { .. } => "toy_classifier",
        }
    }

    fn parse(f: &mut Fields) -> SpecResult<Self> {
        let kind: String = f.req("problem.kind")?;
        Ok(match kind.as_str() {
            "quadratic" => ProblemSpec::Quadratic {
                eigenvalues: f.req_list("problem.eigenvalues")?,
                rotation_seed: f.opt_with("problem.rotation_seed", opt_u64)?.flatten(),
            },
            "fig3_quadratic" => ProblemSpec::Fig3Quadratic {
                dim: f.opt("problem.dim")?.unwrap_or(200),
                min_eig: f.opt("problem.min_eig")?.unwrap_or(1.0),
                max_eig: f.opt("problem.max_eig")?.unwrap_or(1e4),
                rotation_seed: f.opt_with("problem.rotation_seed", opt_u64)?.flatten(),
            },
            "rosenbrock" => ProblemSpec::Rosenbrock {
                a: f.opt("problem.a")?.unwrap_or(1.0),
                b: f.opt("problem.b")?.unwrap_or(100.0),
            },
            "toy_classifier" => ProblemSpec::ToyClassifier {
                n_examples: f.req("problem.n_examples")?,
                n_features: f.req("problem.n_features")?,
                hidden: f.opt("problem.hidden")?.unwrap_or(0),
                data_seed: f.opt("problem.data_seed")?.unwrap_or(0),
                batch_size: f.opt_with("problem.batch_size", opt_u64)?.flatten(),
                l2: f.opt("problem.l2")?.unwrap_or(0.0),
            },
            other => {
                return Err(SpecError::Invalid(format!(
                    "unknown problem.kind {other:?} (quadratic, fig3_quadratic, rosenbrock, toy_classifier)"
                )))
            }
        })
    }

    fn write(&self, out: &mut String) {
        let _ = writeln!(out, "problem.kind = {}", self.name());
        match self {
            ProblemSpec::Quadratic {
                eigenvalues,
                rotation_seed,
            } => {
                let _ = writeln!(out, "problem.eigenvalues = {}", fmt_list(eigenvalues));
                let _ = writeln!(
                    out,
                    "problem.rotation_seed = {}",
                    fmt_opt_u64(*rotation_seed)
                );
            }
            ProblemSpec::Fig3Quadratic {
                dim,
                min_eig,
                max_eig,
                rotation_seed,
            } => {
                let _ = writeln!(out, "problem.dim = {dim}");
                let _ = writeln!(out, "problem.min_eig = {}", fmt_f(*min_eig));
                let _ = writeln!(out, "problem.max_eig = {}", fmt_f(*max_eig));
                let _ = writeln!(
                    out,
                    "problem.rotation_seed = {}",
                    fmt_opt_u64(*rotation_seed)
                );
            }
            ProblemSpec::Rosenbrock { a, b } => {
                let _ = writeln!(out, "problem.a = {}", fmt_f(*a));
                let _ = writeln!(out, "problem.b = {}", fmt_f(*b));
            }
            ProblemSpec::ToyClassifier {
                n_examples,
                n_features,
                hidden,
                data_seed,
                batch_size,
                l2,
            } => {
                let _ = writeln!(out, "problem.n_examples = {n_examples}");
                let _ = writeln!(out, "problem.n_features = {n_features}");
                let _ = writeln!(out, "problem.hidden = {hidden}");
                let _ = writeln!(out, "problem.data_seed = {data_seed}");
                let _ = writeln!(out, "problem.batch_size = {}", fmt_opt_u64(*batch_size));
                let _ = writeln!(out, "problem.l2 = {}", fmt_f(*l2));
            }
        }
    }
}

/// Initial position.
#[derive(Debug, Clone, PartialEq)]
pub enum X0Spec {
    /// Problem default: all ones for quadratics, `(-1, -1)` for Rosenbrock,
    /// seeded small weights for the classifier.
    Default,
    Explicit(Vec<f64>),
    /// Uniform in the ball of `radius` around `center`, seeded by the run seed.
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    /// Node `cell` of a regular `shape` lattice spanning `[lower, upper]`.
    GridCell {
        lower: Vec<f64>,
        upper: Vec<f64>,
        shape: Vec<usize>,
        cell: Vec<usize>,
    },
}

impl X0Spec {
    fn parse(f: &mut Fields) -> SpecResult<Self> {
        let kind: String = f.opt("init.x0")?.unwrap_or_else(|| "default".into());
        Ok(match kind.as_str() {
            "default" => X0Spec::Default,
            "explicit" => X0Spec::Explicit(f.req_list("init.x0.values")?),
            "ball" => X0Spec::Ball {
                center: f.req_list("init.x0.center")?,
                radius: f.req("init.x0.radius")?,
            },
            "grid_cell" => {
                let g = X0Spec::GridCell {
                    lower: f.req_list("init.x0.lower")?,
                    upper: f.req_list("init.x0.upper")?,
                    shape: f.req_list("init.x0.shape")?,
                    cell: f.req_list("init.x0.cell")?,
                };
                g.check()?;
                g
            }
            other => {
                return Err(SpecError::Invalid(format!(
                    "unknown init.x0 {other:?} (default, explicit, ball, grid_cell)"
                )))
            }
        })
    }

    fn check(&self) -> SpecResult<()> {
        if let X0Spec::GridCell {
            lower,
            upper,
            shape,
            cell,
        } = self
        {
            let n = lower.len();
            if upper.len() != n || shape.len() != n || cell.len() != n {
                return Err(SpecError::Invalid(
                    "grid_cell lower/upper/shape/cell lengths differ".into(),
                ));
            }
            if shape.iter().zip(cell).any(|(s, c)| *s == 0 || c >= s) {
                return Err(SpecError::Invalid("grid_cell index outside shape".into()));
            }
        }
        Ok(())
    }

    fn write(&self, out: &mut String) {
        match self {
            X0Spec::Default => {
                let _ = writeln!(out, "init.x0 = default");
            }
            X0Spec::Explicit(v) => {
                let _ = writeln!(out, "init.x0 = explicit");
                let _ = writeln!(out, "init.x0.values = {}", fmt_list(v));
            }
            X0Spec::Ball { center, radius } => {
                let _ = writeln!(out, "init.x0 = ball");
                let _ = writeln!(out, "init.x0.center = {}", fmt_list(center));
                let _ = writeln!(out, "init.x0.radius = {}", fmt_f(*radius));
            }
            X0Spec::GridCell {
                lower,
                upper,
                shape,
                cell,
            } => {
                let _ = writeln!(out, "init.x0 = grid_cell");
                let _ = writeln!(out, "init.x0.lower = {}", fmt_list(lower));
                let _ = writeln!(out, "init.x0.upper = {}", fmt_list(upper));
                let _ = writeln!(out, "init.x0.shape = {}", fmt_list(shape));
                let _ = writeln!(out, "init.x0.cell = {}", fmt_list(cell));
            }
        }
    }
}

/// Lattice node coordinates; a single-node axis sits at `lower`.
pub fn lattice_point(lower: &[f64], upper: &[f64], shape: &[usize], cell: &[usize]) -> Vec<f64> {
    lower
        .iter()
        .zip(upper)
        .zip(shape.iter().zip(cell))
        .map(|((lo, hi), (&n, &k))| {
            if n <= 1 {
                *lo
            } else {
                lo + (hi - lo) * k as f64 / (n - 1) as f64
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Output {
    TrajectoryCsv,
    SummaryCsv,
    SpectrumCsv,
    PortraitCsv,
}

impl Output {
    pub fn as_str(self) -> &'static str {
        match self {
            Output::TrajectoryCsv => "trajectory_csv",
            Output::SummaryCsv => "summary_csv",
            Output::SpectrumCsv => "spectrum_csv",
            Output::PortraitCsv => "portrait_csv",
        }
    }
}

impl FromStr for Output {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "trajectory_csv" => Output::TrajectoryCsv,
            "summary_csv" => Output::SummaryCsv,
            "spectrum_csv" => Output::SpectrumCsv,
            "portrait_csv" => Output::PortraitCsv,
            _ => return Err(format!("unknown output {s:?}")),
        })
    }
}

/// Projection direction for `spectrum_csv`.
#[derive(Debug, Clone, PartialEq)]
pub enum Direction {
    /// Eigenvector of the largest eigenvalue (quadratics only).
    TopEigenvector,
    Explicit(Vec<f64>),
}

/// One fully materialized run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub spec_id: String,
    pub problem: ProblemSpec,
    /// Standard deviation of additive Gaussian gradient noise.
    pub noise_sigma: f64,
    pub optimizer: OptimizerConfig,
    pub hp: HyperParams,
    pub x0: X0Spec,
    /// Fill value for the initial adaptive friction (iKFAD only).
    pub xi0: f64,
    pub steps: u64,
    pub seed: u64,
    pub record_stride: u64,
    pub sample_stride: Option<u64>,
    /// Trailing fraction for the rate fit; `None` leaves `kappa` blank.
    pub fit_tail: Option<f64>,
    /// Distance to the minimizer (or gradient norm when unknown) counted as converged.
    pub tol: f64,
    pub outputs: Vec<Output>,
    pub spectrum_direction: Direction,
}

impl RunSpec {
    pub fn new(problem: ProblemSpec, kind: OptimizerKind, hp: HyperParams, steps: u64) -> Self {
        RunSpec {
            spec_id: "run".into(),
            problem,
            noise_sigma: 0.0,
            optimizer: OptimizerConfig::new(kind),
            hp,
            x0: X0Spec::Default,
            xi0: 0.0,
            steps,
            seed: 0,
            record_stride: 1,
            sample_stride: None,
            fit_tail: None,
            tol: 1e-2,
            outputs: vec![Output::SummaryCsv],
            spectrum_direction: Direction::TopEigenvector,
        }
    }

    pub fn kind(&self) -> OptimizerKind {
        self.optimizer.kind
    }

    pub fn parse(text: &str) -> SpecResult<Self> {
        let mut f = Fields::parse(text)?;
        let spec = Self::from_fields(&mut f)?;
        f.finish()?;
        Ok(spec)
    }

    /// Consumes the run keys of `f`, leaving any others in place.
    pub fn from_fields(f: &mut Fields) -> SpecResult<Self> {
        let spec_id: String = f.opt("spec_id")?.unwrap_or_else(|| "run".into());
        if spec_id.is_empty() || spec_id.contains(',') {
            return Err(SpecError::Invalid(format!(
                "spec_id {spec_id:?} must be non-empty without commas"
            )));
        }
        let problem = ProblemSpec::parse(f)?;
        let noise_sigma = f.opt("problem.sigma")?.unwrap_or(0.0);

        let kind: OptimizerKind = f.req_with("optimizer.kind", |s| {
            s.parse().map_err(|e: kinopt::Error| e.to_string())
        })?;
        let schedule: String = f
            .opt("optimizer.schedule")?
            .unwrap_or_else(|| "none".into());
        let schedule = match schedule.as_str() {
            "none" => None,
            "constant" => Some(MomentumSchedule::Constant),
            "nesterov" => Some(MomentumSchedule::Nesterov),
            "sutskever" => Some(MomentumSchedule::Sutskever {
                mu_max: f.req("optimizer.mu_max")?,
            }),
            other => {
                return Err(SpecError::Invalid(format!(
                    "unknown optimizer.schedule {other:?}"
                )))
            }
        };
        let optimizer = match schedule {
            Some(s) => OptimizerConfig::with_schedule(kind, s)
                .map_err(|e| SpecError::Invalid(e.to_string()))?,
            None => OptimizerConfig::new(kind),
        };

        let mut hp = HyperParams::new(f.req("hp.dt")?);
        hp.gamma = f.opt("hp.gamma")?;
        hp.alpha = f.opt("hp.alpha")?;
        hp.rho = f.opt("hp.rho")?;
        hp.c = f.opt("hp.c")?;
        if let Some(e) = f.opt_with("hp.eps_div", opt_f64)? {
            hp.eps_div = e;
        }
        hp.mu = f.opt("hp.mu")?;
        hp.beta1 = f.opt("hp.beta1")?;
        hp.beta2 = f.opt("hp.beta2")?;

        let x0 = X0Spec::parse(f)?;
        let xi0 = f.opt("init.xi0")?.unwrap_or(0.0);

        let steps = f.req("run.steps")?;
        let seed = f.opt("run.seed")?.unwrap_or(0);
        let record_stride = f.opt("run.record_stride")?.unwrap_or(1);
        let sample_stride = f.opt_with("run.sample_stride", opt_u64)?.flatten();
        let fit_tail = f.opt_with("run.fit_tail", opt_f64)?.flatten();
        let tol = f.opt("run.tol")?.unwrap_or(1e-2);
        let mut outputs: Vec<Output> = f
            .opt_list("outputs")?
            .unwrap_or_else(|| vec![Output::SummaryCsv]);
        outputs.sort();
        outputs.dedup();
        let direction: String = f
            .opt("spectrum.direction")?
            .unwrap_or_else(|| "top_eigenvector".into());
        let spectrum_direction = match direction.as_str() {
            "top_eigenvector" => Direction::TopEigenvector,
            "explicit" => Direction::Explicit(f.req_list("spectrum.values")?),
            other => {
                return Err(SpecError::Invalid(format!(
                    "unknown spectrum.direction {other:?}"
                )))
            }
        };

        let spec = RunSpec {
            spec_id,
            problem,
            noise_sigma,
            optimizer,
            hp,
            x0,
            xi0,
            steps,
            seed,
            record_stride,
            sample_stride,
            fit_tail,
            tol,
            outputs,
            spectrum_direction,
        };
        spec.check()?;
        Ok(spec)
    }

    fn check(&self) -> SpecResult<()> {
        if self.record_stride == 0 || self.sample_stride == Some(0) {
            return Err(SpecError::Invalid("strides must be positive".into()));
        }
        if !(self.noise_sigma >= 0.0) || !(self.xi0 >= 0.0) || !(self.tol > 0.0) {
            return Err(SpecError::Invalid(
                "problem.sigma, init.xi0 must be >= 0 and run.tol > 0".into(),
            ));
        }
        if let Some(t) = self.fit_tail {
            if !(t > 0.0 && t <= 1.0) {
                return Err(SpecError::Invalid(format!(
                    "run.fit_tail {t} outside (0, 1]"
                )));
            }
        }
        if self.outputs.contains(&Output::SpectrumCsv) && self.sample_stride.is_none() {
            return Err(SpecError::Invalid(
                "spectrum_csv needs run.sample_stride".into(),
            ));
        }
        self.x0.check()
    }

    /// Serialized form; parsing it gives back `self`.
    pub fn to_spec_string(&self) -> String {
        let mut out = String::new();
        self.write_fields(&mut out);
        out
    }

    pub fn write_fields(&self, out: &mut String) {
        let _ = writeln!(out, "spec_id = {}", self.spec_id);
        self.problem.write(out);
        let _ = writeln!(out, "problem.sigma = {}", fmt_f(self.noise_sigma));
        let _ = writeln!(out, "optimizer.kind = {}", self.optimizer.kind);
        match self.optimizer.schedule {
            None => {
                let _ = writeln!(out, "optimizer.schedule = none");
            }
            Some(MomentumSchedule::Constant) => {
                let _ = writeln!(out, "optimizer.schedule = constant");
            }
            Some(MomentumSchedule::Nesterov) => {
                let _ = writeln!(out, "optimizer.schedule = nesterov");
            }
            Some(MomentumSchedule::Sutskever { mu_max }) => {
                let _ = writeln!(out, "optimizer.schedule = sutskever");
                let _ = writeln!(out, "optimizer.mu_max = {}", fmt_f(mu_max));
            }
        }
        let hp = &self.hp;
        let _ = writeln!(out, "hp.dt = {}", fmt_f(hp.dt));
        for (name, v) in [
            ("gamma", hp.gamma),
            ("alpha", hp.alpha),
            ("rho", hp.rho),
            ("c", hp.c),
            ("mu", hp.mu),
            ("beta1", hp.beta1),
            ("beta2", hp.beta2),
        ] {
            if let Some(v) = v {
                let _ = writeln!(out, "hp.{name} = {}", fmt_f(v));
            }
        }
        let _ = writeln!(
            out,
            "hp.eps_div = {}",
            hp.eps_div.map_or_else(|| "none".into(), fmt_f)
        );
        self.x0.write(out);
        let _ = writeln!(out, "init.xi0 = {}", fmt_f(self.xi0));
        let _ = writeln!(out, "run.steps = {}", self.steps);
        let _ = writeln!(out, "run.seed = {}", self.seed);
        let _ = writeln!(out, "run.record_stride = {}", self.record_stride);
        let _ = writeln!(
            out,
            "run.sample_stride = {}",
            fmt_opt_u64(self.sample_stride)
        );
        let _ = writeln!(
            out,
            "run.fit_tail = {}",
            self.fit_tail.map_or_else(|| "none".into(), fmt_f)
        );
        let _ = writeln!(out, "run.tol = {}", fmt_f(self.tol));
        let outputs: Vec<&str> = self.outputs.iter().map(|o| o.as_str()).collect();
        let _ = writeln!(out, "outputs = {}", outputs.join(", "));
        match &self.spectrum_direction {
            Direction::TopEigenvector => {
                let _ = writeln!(out, "spectrum.direction = top_eigenvector");
            }
            Direction::Explicit(v) => {
                let _ = writeln!(out, "spectrum.direction = explicit");
                let _ = writeln!(out, "spectrum.values = {}", fmt_list(v));
            }
        }
    }
}

impl fmt::Display for RunSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_spec_string())
    }
}

/// Value reported per grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridMetric {
    FinalLoss,
    BestLoss,
    /// Held-out accuracy of the toy classifier.
    TestAccuracyProxy,
}

impl GridMetric {
    pub fn as_str(self) -> &'static str {
        match self {
            GridMetric::FinalLoss => "final_loss",
            GridMetric::BestLoss => "best_loss",
            GridMetric::TestAccuracyProxy => "test_accuracy_proxy",
        }
    }
}

impl FromStr for GridMetric {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "final_loss" => GridMetric::FinalLoss,
            "best_loss" => GridMetric::BestLoss,
            "test_accuracy_proxy" => GridMetric::TestAccuracyProxy,
            _ => return Err(format!("unknown metric {s:?}")),
        })
    }
}

/// Cartesian sweep over friction and step size around a base run.
///
/// `dt_values` are steps of the continuous-time schemes. mSGD cells use the
/// matching learning rate `dt^2` and momentum `1 - gamma dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub gamma_values: Vec<f64>,
    pub dt_values: Vec<f64>,
    pub base: RunSpec,
    pub metric: GridMetric,
}

impl GridSpec {
    pub fn parse(text: &str) -> SpecResult<Self> {
        let mut f = Fields::parse(text)?;
        let gamma_values: Vec<f64> = f.req_list("grid.gamma")?;
        let dt_values: Vec<f64> = f.req_list("grid.dt")?;
        let metric = f.opt("grid.metric")?.unwrap_or(GridMetric::FinalLoss);
        let base = RunSpec::from_fields(&mut f)?;
        f.finish()?;
        let g = GridSpec {
            gamma_values,
            dt_values,
            base,
            metric,
        };
        g.check()?;
        Ok(g)
    }

    fn check(&self) -> SpecResult<()> {
        if self.gamma_values.is_empty() || self.dt_values.is_empty() {
            return Err(SpecError::Invalid("grid axes must be non-empty".into()));
        }
        if self.metric == GridMetric::TestAccuracyProxy
            && !matches!(self.base.problem, ProblemSpec::ToyClassifier { .. })
        {
            return Err(SpecError::Invalid(
                "test_accuracy_proxy needs problem.kind = toy_classifier".into(),
            ));
        }
        Ok(())
    }

    pub fn to_spec_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "grid.gamma = {}", fmt_list(&self.gamma_values));
        let _ = writeln!(out, "grid.dt = {}", fmt_list(&self.dt_values));
        let _ = writeln!(out, "grid.metric = {}", self.metric.as_str());
        self.base.write_fields(&mut out);
        out
    }
}

/// Lattice of initial positions for a two-dimensional problem.
#[derive(Debug, Clone, PartialEq)]
pub struct PortraitSpec {
    pub base: RunSpec,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub shape: Vec<usize>,
}

impl PortraitSpec {
    pub fn parse(text: &str) -> SpecResult<Self> {
        let mut f = Fields::parse(text)?;
        let lower = f.req_list("portrait.lower")?;
        let upper = f.req_list("portrait.upper")?;
        let shape = f.req_list("portrait.shape")?;
        let base = RunSpec::from_fields(&mut f)?;
        f.finish()?;
        let p = PortraitSpec {
            base,
            lower,
            upper,
            shape,
        };
        p.check()?;
        Ok(p)
    }

    pub fn check(&self) -> SpecResult<()> {
        if self.lower.len() != 2 || self.upper.len() != 2 || self.shape.len() != 2 {
            return Err(SpecError::Invalid(
                "portrait bounds and shape must be two-dimensional".into(),
            ));
        }
        if self.shape.contains(&0) {
            return Err(SpecError::Invalid("portrait shape must be positive".into()));
        }
        Ok(())
    }

    pub fn to_spec_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "portrait.lower = {}", fmt_list(&self.lower));
        let _ = writeln!(out, "portrait.upper = {}", fmt_list(&self.upper));
        let _ = writeln!(out, "portrait.shape = {}", fmt_list(&self.shape));
        self.base.write_fields(&mut out);
        out
    }
}

/// Repeats a run over consecutive seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSpec {
    pub base: RunSpec,
    pub n_seeds: u64,
}

impl EnsembleSpec {
    pub fn parse(text: &str) -> SpecResult<Self> {
        let mut f = Fields::parse(text)?;
        let n_seeds = f.req("ensemble.n_seeds")?;
        let base = RunSpec::from_fields(&mut f)?;
        f.finish()?;
        if n_seeds == 0 {
            return Err(SpecError::Invalid("ensemble.n_seeds must be >= 1".into()));
        }
        Ok(EnsembleSpec { base, n_seeds })
    }

    pub fn to_spec_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "ensemble.n_seeds = {}", self.n_seeds);
        self.base.write_fields(&mut out);
        out
    }
}
