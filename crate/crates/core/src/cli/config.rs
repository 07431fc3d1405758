//! Experiment configuration: a strict TOML schema with one table per
//! concern. Unknown keys are rejected outright; numeric ranges are checked
//! against the owning modules before anything runs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::graph::Graph;
use crate::noise::{NoiseSpec, NoiseTarget};
use crate::search::{default_coupling, optimal_time, TargetPlacement};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    LineSpread,
    Wavepacket,
    Search,
    ScalingSweep,
    TwoParticle,
    NoiseCheck,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::LineSpread => "line-spread",
            ExperimentKind::Wavepacket => "wavepacket",
            ExperimentKind::Search => "search",
            ExperimentKind::ScalingSweep => "scaling-sweep",
            ExperimentKind::TwoParticle => "two-particle",
            ExperimentKind::NoiseCheck => "noise-check",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GraphKind {
    Line,
    Ring,
    Complete,
    Star,
    Custom,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphConfig {
    pub kind: GraphKind,
    #[serde(default)]
    pub n: Option<usize>,
    /// Edge-list file, for `kind = "custom"`.
    #[serde(default)]
    pub path: Option<PathBuf>,
}

impl GraphConfig {
    pub fn build(&self, base_dir: &Path) -> Result<Graph> {
        match self.kind {
            GraphKind::Custom => {
                let rel = self.path.as_ref().ok_or_else(|| {
                    Error::Config("graph.path is required for a custom graph".into())
                })?;
                let path = if rel.is_absolute() {
                    rel.clone()
                } else {
                    base_dir.join(rel)
                };
                Graph::from_edge_list_path(path)
            }
            kind => {
                let n = self.n.ok_or_else(|| {
                    Error::Config(format!("graph.n is required for kind `{kind:?}`"))
                })?;
                match kind {
                    GraphKind::Line => Graph::line(n, false),
                    GraphKind::Ring => Graph::line(n, true),
                    GraphKind::Complete => Graph::complete(n),
                    GraphKind::Star => Graph::star(n),
                    GraphKind::Custom => unreachable!(),
                }
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default)]
    pub nu: f64,
    #[serde(default = "one")]
    pub gamma: f64,
    /// Neighbor-edge correlation probability for spatial domains.
    #[serde(default)]
    pub p: f64,
    #[serde(default = "tunneling")]
    pub target: NoiseTarget,
}

fn one() -> f64 {
    1.0
}

fn tunneling() -> NoiseTarget {
    NoiseTarget::Tunneling
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            nu: 0.0,
            gamma: 1.0,
            p: 0.0,
            target: NoiseTarget::Tunneling,
        }
    }
}

impl NoiseConfig {
    pub fn to_spec(&self, seed: u64) -> Result<NoiseSpec> {
        let spec = NoiseSpec {
            nu: self.nu,
            gamma: self.gamma,
            correlation_p: self.p,
            target: self.target,
            seed,
        };
        spec.validate(1.0)?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub t_max: f64,
    pub samples: usize,
}

impl TimeConfig {
    pub fn grid(&self) -> Vec<f64> {
        crate::search::uniform_grid(self.t_max, self.samples)
    }
}

/// Target node: an explicit index, or `"central"`/`"external"` for stars.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TargetConfig {
    Index(usize),
    Named(String),
}

impl TargetConfig {
    pub fn placement(&self) -> Result<TargetPlacement> {
        match self {
            TargetConfig::Index(w) => Ok(TargetPlacement::Node(*w)),
            TargetConfig::Named(s) => match s.as_str() {
                "central" | "center" => Ok(TargetPlacement::Central),
                "external" | "leaf" => Ok(TargetPlacement::External),
                other => Err(Error::Config(format!(
                    "search.target must be a node index, `central` or `external`, got `{other}`"
                ))),
            },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    #[serde(default = "central")]
    pub target: TargetConfig,
    /// Tunneling amplitude `J`; defaults to `1/N`, or `1` for the star's
    /// external target.
    #[serde(default)]
    pub coupling: Option<f64>,
    /// Re-optimize `J` over 10 log-spaced values around the default.
    #[serde(default)]
    pub coupling_sweep: bool,
    #[serde(default = "grid_points")]
    pub grid_points: usize,
}

fn central() -> TargetConfig {
    TargetConfig::Named("central".into())
}

fn grid_points() -> usize {
    400
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            target: central(),
            coupling: None,
            coupling_sweep: false,
            grid_points: grid_points(),
        }
    }
}

impl SearchConfig {
    /// Resolve `(target node, coupling)` against a graph.
    pub fn resolve(&self, kind: GraphKind, n: usize) -> Result<(usize, f64)> {
        let placement = self.target.placement()?;
        let target = placement.resolve(n)?;
        let coupling = match self.coupling {
            Some(j) => j,
            None => match kind {
                GraphKind::Complete => default_coupling(n, false),
                GraphKind::Star => default_coupling(n, target != 0),
                _ => {
                    return Err(Error::Config(
                        "search.coupling must be given explicitly for line/custom graphs".into(),
                    ))
                }
            },
        };
        Ok((target, coupling))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WavepacketConfig {
    pub delta: f64,
    #[serde(default)]
    pub p0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InteractionKind {
    None,
    OnSite,
    NearestNeighbor,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoParticleConfig {
    pub statistics: crate::multiparticle::Statistics,
    #[serde(default = "onsite")]
    pub interaction: InteractionKind,
    #[serde(default)]
    pub strength: f64,
    /// Initial product positions `(j, k)`; defaults to a co-located pair at
    /// the chain center.
    #[serde(default)]
    pub start: Option<[usize; 2]>,
}

fn onsite() -> InteractionKind {
    InteractionKind::OnSite
}

impl TwoParticleConfig {
    pub fn interaction_spec(&self) -> crate::multiparticle::InteractionSpec {
        use crate::multiparticle::InteractionSpec;
        match self.interaction {
            InteractionKind::None => InteractionSpec::none(),
            InteractionKind::OnSite => InteractionSpec::on_site(self.strength),
            InteractionKind::NearestNeighbor => InteractionSpec::nearest_neighbor(self.strength),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub n: Vec<usize>,
    #[serde(default)]
    pub nu: Vec<f64>,
    #[serde(default)]
    pub gamma: Vec<f64>,
}

impl SweepConfig {
    pub fn is_empty(&self) -> bool {
        self.n.is_empty() && self.nu.is_empty() && self.gamma.is_empty()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub trajectories: usize,
    /// Worker threads; 0 means one per core. The `PERQWALK_THREADS`
    /// environment variable overrides this.
    #[serde(default)]
    pub threads: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub graph: Option<GraphConfig>,
    #[serde(default)]
    pub noise: Option<NoiseConfig>,
    #[serde(default)]
    pub time: Option<TimeConfig>,
    #[serde(default)]
    pub search: Option<SearchConfig>,
    #[serde(default)]
    pub wavepacket: Option<WavepacketConfig>,
    #[serde(default)]
    pub two_particle: Option<TwoParticleConfig>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("perqwalk-out")
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(&path)?;
        Self::from_toml_str(&text)
    }

    fn require<'a, T>(field: &'a Option<T>, name: &str, kind: ExperimentKind) -> Result<&'a T> {
        field.as_ref().ok_or_else(|| {
            Error::Config(format!(
                "[{name}] section is required for kind `{}`",
                kind.name()
            ))
        })
    }

    fn forbid<T>(field: &Option<T>, name: &str, kind: ExperimentKind) -> Result<()> {
        if field.is_some() {
            return Err(Error::Config(format!(
                "[{name}] section is not allowed for kind `{}`",
                kind.name()
            )));
        }
        Ok(())
    }

    /// Full semantic validation. `sweeping` is true under `perqwalk sweep`,
    /// which requires grid axes; `perqwalk run` forbids them.
    pub fn validate(&self, sweeping: bool) -> Result<()> {
        if self.trajectories < 1 {
            return Err(Error::Config("trajectories must be at least 1".into()));
        }
        let kind = self.kind;
        let noise = self.noise.clone().unwrap_or_default();

        if let Some(time) = &self.time {
            if !(time.t_max > 0.0) || !time.t_max.is_finite() {
                return Err(Error::Config(format!(
                    "time.t_max must be positive, got {}",
                    time.t_max
                )));
            }
            if time.samples < 2 {
                return Err(Error::Config("time.samples must be at least 2".into()));
            }
        }

        match kind {
            ExperimentKind::LineSpread | ExperimentKind::Wavepacket => {
                let graph = Self::require(&self.graph, "graph", kind)?;
                if !matches!(graph.kind, GraphKind::Line | GraphKind::Ring) {
                    return Err(Error::Config(format!(
                        "graph.kind must be line or ring for kind `{}`",
                        kind.name()
                    )));
                }
                Self::require(&self.time, "time", kind)?;
                Self::forbid(&self.search, "search", kind)?;
                Self::forbid(&self.two_particle, "two_particle", kind)?;
                if kind == ExperimentKind::Wavepacket {
                    let wp = Self::require(&self.wavepacket, "wavepacket", kind)?;
                    if !(wp.delta > 0.0) {
                        return Err(Error::Config("wavepacket.delta must be positive".into()));
                    }
                } else {
                    Self::forbid(&self.wavepacket, "wavepacket", kind)?;
                }
            }
            ExperimentKind::Search | ExperimentKind::ScalingSweep => {
                let graph = Self::require(&self.graph, "graph", kind)?;
                Self::forbid(&self.wavepacket, "wavepacket", kind)?;
                Self::forbid(&self.two_particle, "two_particle", kind)?;
                let search = self.search.clone().unwrap_or_default();
                if kind == ExperimentKind::Search {
                    if let (Some(n), Some(time)) = (graph.n, &self.time) {
                        let needed = 2.0 * optimal_time(n);
                        if time.t_max + 1e-9 < needed {
                            return Err(Error::Config(format!(
                                "time.t_max must span at least 2 (pi/2) sqrt(N) = {needed:.3}"
                            )));
                        }
                    }
                }
                if search.grid_points < 2 {
                    return Err(Error::Config("search.grid_points must be at least 2".into()));
                }
                if kind == ExperimentKind::ScalingSweep {
                    let sweep = Self::require(&self.sweep, "sweep", kind)?;
                    if sweep.n.len() < 3 {
                        return Err(Error::Config(
                            "sweep.n needs at least 3 sizes for a scaling fit".into(),
                        ));
                    }
                    if !matches!(graph.kind, GraphKind::Complete | GraphKind::Star) {
                        return Err(Error::Config(
                            "scaling-sweep requires a complete or star graph".into(),
                        ));
                    }
                }
            }
            ExperimentKind::TwoParticle => {
                let graph = Self::require(&self.graph, "graph", kind)?;
                if !matches!(graph.kind, GraphKind::Line | GraphKind::Ring) {
                    return Err(Error::Config(
                        "graph.kind must be line or ring for two-particle runs".into(),
                    ));
                }
                if let Some(n) = graph.n {
                    if n > 64 {
                        return Err(Error::Config(
                            "two-particle runs are limited to n <= 64 sites".into(),
                        ));
                    }
                }
                Self::require(&self.time, "time", kind)?;
                Self::require(&self.two_particle, "two_particle", kind)?;
                Self::forbid(&self.search, "search", kind)?;
                Self::forbid(&self.wavepacket, "wavepacket", kind)?;
                if noise.p > 0.0 {
                    return Err(Error::Config(
                        "noise.p (spatial domains) is not supported for two-particle runs".into(),
                    ));
                }
            }
            ExperimentKind::NoiseCheck => {
                Self::require(&self.time, "time", kind)?;
                Self::forbid(&self.search, "search", kind)?;
                Self::forbid(&self.wavepacket, "wavepacket", kind)?;
                Self::forbid(&self.two_particle, "two_particle", kind)?;
                if !(noise.gamma > 0.0) || !noise.gamma.is_finite() {
                    return Err(Error::Config("noise.gamma must be positive".into()));
                }
            }
        }

        // ranges owned by the noise module
        noise.to_spec(self.seed)?;

        match (sweeping, kind, &self.sweep) {
            (_, ExperimentKind::ScalingSweep, _) => {}
            (false, _, Some(_)) => {
                return Err(Error::Config(
                    "[sweep] axes are only consumed by `perqwalk sweep`".into(),
                ))
            }
            (false, _, None) => {}
            (true, _, sweep) => {
                let empty = sweep.as_ref().map(SweepConfig::is_empty).unwrap_or(true);
                if empty {
                    return Err(Error::Config(
                        "`perqwalk sweep` needs a non-empty [sweep] axis (n, nu or gamma)".into(),
                    ));
                }
                if !matches!(kind, ExperimentKind::Search | ExperimentKind::LineSpread) {
                    return Err(Error::Config(format!(
                        "[sweep] is supported for search and line-spread, not `{}`",
                        kind.name()
                    )));
                }
            }
        }
        if sweeping {
            if let Some(sweep) = &self.sweep {
                if sweep.n.iter().any(|&n| n < 2) {
                    return Err(Error::Config("sweep.n entries must be >= 2".into()));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL_SEARCH: &str = r#"
kind = "search"
seed = 1
trajectories = 10

[graph]
kind = "complete"
n = 8
"#;

    #[test]
    fn parses_minimal_search() {
        let cfg = ExperimentConfig::from_toml_str(MINIMAL_SEARCH).unwrap();
        cfg.validate(false).unwrap();
        assert_eq!(cfg.kind, ExperimentKind::Search);
        assert_eq!(cfg.output_dir, PathBuf::from("perqwalk-out"));
    }

    #[test]
    fn rejects_unknown_keys() {
        let bad = format!("{MINIMAL_SEARCH}\nbogus_key = 3\n");
        let err = ExperimentConfig::from_toml_str(&bad).unwrap_err();
        assert!(err.to_string().contains("bogus_key"), "{err}");
        let bad_nested = MINIMAL_SEARCH.replace("n = 8", "n = 8\nwhatever = 1");
        assert!(ExperimentConfig::from_toml_str(&bad_nested).is_err());
    }

    #[test]
    fn rejects_wrong_sections_for_kind() {
        let cfg = ExperimentConfig::from_toml_str(&format!(
            "{MINIMAL_SEARCH}\n[wavepacket]\ndelta = 2.0\n"
        ))
        .unwrap();
        let err = cfg.validate(false).unwrap_err();
        assert!(err.to_string().contains("wavepacket"));
    }

    #[test]
    fn rejects_out_of_range_noise() {
        let cfg = ExperimentConfig::from_toml_str(&format!(
            "{MINIMAL_SEARCH}\n[noise]\nnu = 1.5\n"
        ))
        .unwrap();
        assert!(cfg.validate(false).is_err());
    }

    #[test]
    fn sweep_axes_gated_by_subcommand() {
        let cfg = ExperimentConfig::from_toml_str(&format!(
            "{MINIMAL_SEARCH}\n[sweep]\nn = [8, 16, 32]\n"
        ))
        .unwrap();
        assert!(cfg.validate(false).is_err());
        cfg.validate(true).unwrap();
    }

    #[test]
    fn scaling_sweep_requires_sizes() {
        let text = r#"
kind = "scaling-sweep"
seed = 1
trajectories = 10

[graph]
kind = "star"

[search]
target = "external"

[sweep]
n = [8, 16]
"#;
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        assert!(cfg.validate(true).is_err());
    }

    #[test]
    fn search_coupling_defaults() {
        let sc = SearchConfig::default();
        let (w, j) = sc.resolve(GraphKind::Complete, 16).unwrap();
        assert_eq!(w, 0);
        assert!((j - 1.0 / 16.0).abs() < 1e-15);
        let external = SearchConfig {
            target: TargetConfig::Named("external".into()),
            ..Default::default()
        };
        let (w, j) = external.resolve(GraphKind::Star, 16).unwrap();
        assert_eq!(w, 1);
        assert_eq!(j, 1.0);
    }

    #[test]
    fn two_particle_size_cap() {
        let text = r#"
kind = "two-particle"
seed = 1
trajectories = 4

[graph]
kind = "line"
n = 128

[time]
t_max = 2.0
samples = 5

[two_particle]
statistics = "bosonic"
"#;
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        assert!(cfg.validate(false).is_err());
    }
}
