//! Run configuration: a flat `key = value` text format with dotted section
//! keys, a canonical serialization, and a stable content hash.
//!
//! The format is line-oriented so configs diff cleanly: blank lines and
//! full-line `#` comments are ignored, every other line must be
//! `section.key = value`.  Unknown and duplicate keys are errors.  Every key
//! has a default, so a config file only states what it overrides.
//!
//! [`RunConfig::canonical_text`] renders all keys (except `output_dir`, which
//! only says where artifacts land) in a fixed order with round-trip float
//! formatting; [`RunConfig::config_hash`] is the SHA-256 of that text and is
//! what reports embed for provenance.  Parsing the canonical text recovers an
//! equal `RunConfig`.
//!
//! The `build_*` methods translate the plain-data sections into the domain
//! objects of the library (grid, model parameters, covariance, initial state,
//! run setup, probe), performing all numeric validation through the domain
//! constructors so the CLI has a single error path.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::diagnostics::{AbsorbingProbe, Psi1Schedule};
use crate::dynamics::{ForcingSpec, ModelParams};
use crate::error::{Error, Result};
use crate::integrator::{BlowupGuard, RecordingLevel, RunSetup, SchemeId, SnapshotSchedule};
use crate::noise::CovarianceSpec;
use crate::scalar::Cplx;
use crate::spectral::{
    inverse_transform, read_snapshot, Grid, SpaceTag, SpectralField, TransformPlan,
};

/// Equation coefficients: dimension, dispersion exponent, nonlinearity
/// power, damping.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSection {
    pub n: usize,
    pub alpha: f64,
    pub sigma: f64,
    pub gamma: f64,
}

/// Spatial lattice: points per dimension and box period.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSection {
    pub points: usize,
    pub length: f64,
}

/// Forcing family selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForcingKind {
    None,
    LinearPhase,
    Additive,
}

/// Forcing term: family, growth constant, and spatial profile.
///
/// `profile` is either `builtin:cosine` (a raised cosine in the first
/// coordinate, scaled to `[0, beta]`), `builtin:uniform` (constant `beta`),
/// or a path to a field snapshot sampled on the run's grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ForcingSection {
    pub family: ForcingKind,
    pub beta: f64,
    pub profile: String,
}

/// Noise covariance: `scale = 0` disables the noise entirely; otherwise the
/// built-in diagonal family with amplitude decay `(1 + |xi|^2)^(-decay/2)`
/// over the first `cutoff` modes of the canonical basis ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSection {
    pub scale: f64,
    pub decay: f64,
    pub cutoff: usize,
}

/// Snapshot schedule selector (`none`, `every:K`, `times:a,b,c`).
#[derive(Debug, Clone, PartialEq)]
pub enum SnapshotKey {
    None,
    Every(usize),
    Times(Vec<f64>),
}

/// Time stepping window, scheme, and per-step recording depth.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSection {
    pub t0: f64,
    pub t1: f64,
    pub dt: f64,
    pub scheme: SchemeId,
    pub snapshots: SnapshotKey,
    pub recording: RecordingLevel,
}

/// Blow-up guard knobs; `mass_threshold = none` means the default relative
/// threshold (1e6 x initial mass).
#[derive(Debug, Clone, PartialEq)]
pub struct GuardSection {
    pub mass_threshold: Option<f64>,
    pub growth_limit: usize,
}

/// Initial state family selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitKind {
    Gaussian,
    Band,
    Constant,
    Snapshot,
}

/// Initial state: one of the built-in families or a snapshot file, with an
/// optional exact mass normalization (`mass = 0` keeps the raw field).
#[derive(Debug, Clone, PartialEq)]
pub struct InitSection {
    pub kind: InitKind,
    pub amplitude: f64,
    pub width: f64,
    pub support: usize,
    pub mass: f64,
    pub path: String,
}

/// Pullback absorption probe: moment exponent, anchor/horizon grids, and the
/// per-family target masses (each applied to the `init` field shape).
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSection {
    pub rho: f64,
    pub reference_moment: f64,
    pub anchors: Vec<f64>,
    pub horizons: Vec<f64>,
    pub dt: f64,
    pub paths: usize,
    pub family_masses: Vec<f64>,
}

/// Coupled dt-refinement study: strides of the fine step and the ledger
/// moment order.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifySection {
    pub strides: Vec<usize>,
    pub order: usize,
}

/// Mixed space-time norm exponents; `auto` takes the admissible pair of the
/// model, `inf` forces the sup-in-time norm.
#[derive(Debug, Clone, PartialEq)]
pub struct StrichartzSection {
    /// `None` = auto (admissible pair), `Some(None)` = inf, `Some(Some(r))`.
    pub r: Option<Option<f64>>,
    pub p: Option<f64>,
}

/// Ensemble diagnostics: which mass-moment orders to bound.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSection {
    pub moment_orders: Vec<usize>,
}

/// A full run configuration.
///
/// Plain data only: everything is `f64`/`usize`/`String`, validation happens
/// when the sections are turned into domain objects via the `build_*`
/// methods.  `output_dir` is deliberately excluded from the canonical text
/// and the hash: it determines where artifacts are written, never what is
/// computed.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelSection,
    pub grid: GridSection,
    pub forcing: ForcingSection,
    pub noise: NoiseSection,
    pub run: RunSection,
    pub guard: GuardSection,
    pub init: InitSection,
    pub probe: ProbeSection,
    pub verify: VerifySection,
    pub strichartz: StrichartzSection,
    pub ensemble: EnsembleSection,
    pub seed: u64,
    pub paths: usize,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelSection {
                n: 2,
                alpha: 0.75,
                sigma: 1.0,
                gamma: 1.0,
            },
            grid: GridSection {
                points: 32,
                length: std::f64::consts::TAU,
            },
            forcing: ForcingSection {
                family: ForcingKind::None,
                beta: 0.0,
                profile: "builtin:cosine".into(),
            },
            noise: NoiseSection {
                scale: 0.0,
                decay: 3.0,
                cutoff: 8,
            },
            run: RunSection {
                t0: 0.0,
                t1: 1.0,
                dt: 1e-3,
                scheme: SchemeId::ExpEuler,
                snapshots: SnapshotKey::None,
                recording: RecordingLevel::Ledger,
            },
            guard: GuardSection {
                mass_threshold: None,
                growth_limit: 10,
            },
            init: InitSection {
                kind: InitKind::Gaussian,
                amplitude: 1.0,
                width: 0.8,
                support: 3,
                mass: 0.0,
                path: String::new(),
            },
            probe: ProbeSection {
                rho: 2.0,
                reference_moment: 0.0,
                anchors: vec![0.0],
                horizons: vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0],
                dt: 4e-3,
                paths: 100,
                family_masses: vec![1.0],
            },
            verify: VerifySection {
                strides: vec![4, 2, 1],
                order: 1,
            },
            strichartz: StrichartzSection { r: None, p: None },
            ensemble: EnsembleSection {
                moment_orders: vec![1, 2],
            },
            seed: 1,
            paths: 1,
            output_dir: PathBuf::from("out"),
        }
    }
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

/// Raw entries keyed by dotted name, remembering source lines for
/// diagnostics.
struct Bag {
    entries: BTreeMap<String, (usize, String)>,
}

impl Bag {
    fn from_text(text: &str) -> Result<Self> {
        let mut entries: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some(eq) = line.find('=') else {
                return Err(Error::ConfigParse {
                    line: line_no,
                    message: format!("expected `key = value`, got `{line}`"),
                });
            };
            let key = line[..eq].trim();
            let value = line[eq + 1..].trim();
            if key.is_empty()
                || !key
                    .chars()
                    .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '.' || c == '_')
            {
                return Err(Error::ConfigParse {
                    line: line_no,
                    message: format!("malformed key `{key}`"),
                });
            }
            if entries
                .insert(key.into(), (line_no, value.into()))
                .is_some()
            {
                return Err(Error::ConfigParse {
                    line: line_no,
                    message: format!("duplicate key `{key}`"),
                });
            }
        }
        Ok(Self { entries })
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key).map(|(_, v)| v)
    }

    fn f64(&mut self, key: &str, default: f64) -> Result<f64> {
        match self.take(key) {
            None => Ok(default),
            Some(v) => parse_f64(key, &v),
        }
    }

    fn usize(&mut self, key: &str, default: usize) -> Result<usize> {
        match self.take(key) {
            None => Ok(default),
            Some(v) => v.parse::<usize>().map_err(|_| Error::ConfigValue {
                key: key.into(),
                message: format!("`{v}` is not a nonnegative integer"),
            }),
        }
    }

    fn u64(&mut self, key: &str, default: u64) -> Result<u64> {
        match self.take(key) {
            None => Ok(default),
            Some(v) => v.parse::<u64>().map_err(|_| Error::ConfigValue {
                key: key.into(),
                message: format!("`{v}` is not a nonnegative integer"),
            }),
        }
    }

    fn f64_list(&mut self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.take(key) {
            None => Ok(default.to_vec()),
            Some(v) => parse_f64_list(key, &v),
        }
    }

    fn usize_list(&mut self, key: &str, default: &[usize]) -> Result<Vec<usize>> {
        match self.take(key) {
            None => Ok(default.to_vec()),
            Some(v) => {
                let mut out = Vec::new();
                for item in v.split(',') {
                    let item = item.trim();
                    if item.is_empty() {
                        continue;
                    }
                    out.push(item.parse::<usize>().map_err(|_| Error::ConfigValue {
                        key: key.into(),
                        message: format!("`{item}` is not a nonnegative integer"),
                    })?);
                }
                Ok(out)
            }
        }
    }

    /// Error out on any key that no section claimed.
    fn finish(self) -> Result<()> {
        if let Some((key, (line, _))) = self.entries.into_iter().min_by_key(|(_, (l, _))| *l) {
            return Err(Error::ConfigParse {
                line,
                message: format!("unrecognized key `{key}`"),
            });
        }
        Ok(())
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.parse::<f64>().map_err(|_| Error::ConfigValue {
        key: key.into(),
        message: format!("`{v}` is not a number"),
    })
}

/// Comma-separated floats; each item may also be an inclusive range
/// `start:stop:step` which is expanded on parse.
fn parse_f64_list(key: &str, v: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for item in v.split(',') {
        let item = item.trim();
        if item.is_empty() {
            continue;
        }
        let parts: Vec<&str> = item.split(':').collect();
        match parts.len() {
            1 => out.push(parse_f64(key, item)?),
            3 => {
                let start = parse_f64(key, parts[0])?;
                let stop = parse_f64(key, parts[1])?;
                let step = parse_f64(key, parts[2])?;
                if !(step > 0.0 && step.is_finite() && stop >= start) {
                    return Err(Error::ConfigValue {
                        key: key.into(),
                        message: format!("range `{item}` needs stop >= start and step > 0"),
                    });
                }
                let count = ((stop - start) / step).round() as usize;
                for j in 0..=count {
                    let t = start + step * j as f64;
                    if t <= stop + 1e-9 * step {
                        out.push(t);
                    }
                }
            }
            _ => {
                return Err(Error::ConfigValue {
                    key: key.into(),
                    message: format!("`{item}` is neither a number nor `start:stop:step`"),
                })
            }
        }
    }
    Ok(out)
}

impl RunConfig {
    /// Parse a configuration text; missing keys take their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut bag = Bag::from_text(text)?;
        let d = RunConfig::default();

        let model = ModelSection {
            n: bag.usize("model.n", d.model.n)?,
            alpha: bag.f64("model.alpha", d.model.alpha)?,
            sigma: bag.f64("model.sigma", d.model.sigma)?,
            gamma: bag.f64("model.gamma", d.model.gamma)?,
        };
        let grid = GridSection {
            points: bag.usize("grid.points", d.grid.points)?,
            length: bag.f64("grid.length", d.grid.length)?,
        };
        let forcing = ForcingSection {
            family: match bag.take("forcing.family") {
                None => d.forcing.family,
                Some(v) => match v.as_str() {
                    "none" => ForcingKind::None,
                    "linear_phase" => ForcingKind::LinearPhase,
                    "additive" => ForcingKind::Additive,
                    other => {
                        return Err(Error::ConfigValue {
                            key: "forcing.family".into(),
                            message: format!(
                                "`{other}` is not one of none, linear_phase, additive"
                            ),
                        })
                    }
                },
            },
            beta: bag.f64("forcing.beta", d.forcing.beta)?,
            profile: bag.take("forcing.profile").unwrap_or(d.forcing.profile),
        };
        let noise = NoiseSection {
            scale: bag.f64("noise.scale", d.noise.scale)?,
            decay: bag.f64("noise.decay", d.noise.decay)?,
            cutoff: bag.usize("noise.cutoff", d.noise.cutoff)?,
        };
        let run = RunSection {
            t0: bag.f64("run.t0", d.run.t0)?,
            t1: bag.f64("run.t1", d.run.t1)?,
            dt: bag.f64("run.dt", d.run.dt)?,
            scheme: match bag.take("run.scheme") {
                None => d.run.scheme,
                Some(v) => match v.as_str() {
                    "exp_euler" => SchemeId::ExpEuler,
                    "strang" => SchemeId::Strang,
                    other => {
                        return Err(Error::ConfigValue {
                            key: "run.scheme".into(),
                            message: format!("`{other}` is not one of exp_euler, strang"),
                        })
                    }
                },
            },
            snapshots: match bag.take("run.snapshots") {
                None => d.run.snapshots,
                Some(v) => parse_snapshots(&v)?,
            },
            recording: match bag.take("run.recording") {
                None => d.run.recording,
                Some(v) => match v.as_str() {
                    "mass" => RecordingLevel::MassOnly,
                    "ledger" => RecordingLevel::Ledger,
                    "ledger_modes" => RecordingLevel::LedgerWithModes,
                    other => {
                        return Err(Error::ConfigValue {
                            key: "run.recording".into(),
                            message: format!("`{other}` is not one of mass, ledger, ledger_modes"),
                        })
                    }
                },
            },
        };
        let guard = GuardSection {
            mass_threshold: match bag.take("guard.mass_threshold") {
                None => d.guard.mass_threshold,
                Some(v) if v == "none" => None,
                Some(v) => Some(parse_f64("guard.mass_threshold", &v)?),
            },
            growth_limit: bag.usize("guard.growth_limit", d.guard.growth_limit)?,
        };
        let init = InitSection {
            kind: match bag.take("init.kind") {
                None => d.init.kind,
                Some(v) => match v.as_str() {
                    "gaussian" => InitKind::Gaussian,
                    "band" => InitKind::Band,
                    "constant" => InitKind::Constant,
                    "snapshot" => InitKind::Snapshot,
                    other => {
                        return Err(Error::ConfigValue {
                            key: "init.kind".into(),
                            message: format!(
                                "`{other}` is not one of gaussian, band, constant, snapshot"
                            ),
                        })
                    }
                },
            },
            amplitude: bag.f64("init.amplitude", d.init.amplitude)?,
            width: bag.f64("init.width", d.init.width)?,
            support: bag.usize("init.support", d.init.support)?,
            mass: bag.f64("init.mass", d.init.mass)?,
            path: bag.take("init.path").unwrap_or(d.init.path),
        };
        let probe = ProbeSection {
            rho: bag.f64("probe.rho", d.probe.rho)?,
            reference_moment: bag.f64("probe.reference_moment", d.probe.reference_moment)?,
            anchors: bag.f64_list("probe.anchors", &d.probe.anchors)?,
            horizons: bag.f64_list("probe.horizons", &d.probe.horizons)?,
            dt: bag.f64("probe.dt", d.probe.dt)?,
            paths: bag.usize("probe.paths", d.probe.paths)?,
            family_masses: bag.f64_list("probe.family_masses", &d.probe.family_masses)?,
        };
        let verify = VerifySection {
            strides: bag.usize_list("verify.strides", &d.verify.strides)?,
            order: bag.usize("verify.order", d.verify.order)?,
        };
        let strichartz = StrichartzSection {
            r: match bag.take("strichartz.r") {
                None => d.strichartz.r,
                Some(v) if v == "auto" => None,
                Some(v) if v == "inf" => Some(None),
                Some(v) => Some(Some(parse_f64("strichartz.r", &v)?)),
            },
            p: match bag.take("strichartz.p") {
                None => d.strichartz.p,
                Some(v) if v == "auto" => None,
                Some(v) => Some(parse_f64("strichartz.p", &v)?),
            },
        };
        let ensemble = EnsembleSection {
            moment_orders: bag.usize_list("ensemble.moment_orders", &d.ensemble.moment_orders)?,
        };
        let seed = bag.u64("seed", d.seed)?;
        let paths = bag.usize("paths", d.paths)?;
        let output_dir = bag
            .take("output_dir")
            .map(PathBuf::from)
            .unwrap_or(d.output_dir);

        bag.finish()?;
        Ok(Self {
            model,
            grid,
            forcing,
            noise,
            run,
            guard,
            init,
            probe,
            verify,
            strichartz,
            ensemble,
            seed,
            paths,
            output_dir,
        })
    }

    /// Read and parse a configuration file.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// All key/value pairs in canonical (alphabetical) order, including
    /// `output_dir`.
    fn pairs(&self) -> Vec<(String, String)> {
        let fmt_f64_list = |xs: &[f64]| {
            xs.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let fmt_usize_list = |xs: &[usize]| {
            xs.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let mut pairs: Vec<(String, String)> = vec![
            (
                "ensemble.moment_orders".into(),
                fmt_usize_list(&self.ensemble.moment_orders),
            ),
            ("forcing.beta".into(), self.forcing.beta.to_string()),
            (
                "forcing.family".into(),
                match self.forcing.family {
                    ForcingKind::None => "none",
                    ForcingKind::LinearPhase => "linear_phase",
                    ForcingKind::Additive => "additive",
                }
                .into(),
            ),
            ("forcing.profile".into(), self.forcing.profile.clone()),
            ("grid.length".into(), self.grid.length.to_string()),
            ("grid.points".into(), self.grid.points.to_string()),
            (
                "guard.growth_limit".into(),
                self.guard.growth_limit.to_string(),
            ),
            (
                "guard.mass_threshold".into(),
                match self.guard.mass_threshold {
                    None => "none".into(),
                    Some(v) => v.to_string(),
                },
            ),
            ("init.amplitude".into(), self.init.amplitude.to_string()),
            (
                "init.kind".into(),
                match self.init.kind {
                    InitKind::Gaussian => "gaussian",
                    InitKind::Band => "band",
                    InitKind::Constant => "constant",
                    InitKind::Snapshot => "snapshot",
                }
                .into(),
            ),
            ("init.mass".into(), self.init.mass.to_string()),
            ("init.path".into(), self.init.path.clone()),
            ("init.support".into(), self.init.support.to_string()),
            ("init.width".into(), self.init.width.to_string()),
            ("model.alpha".into(), self.model.alpha.to_string()),
            ("model.gamma".into(), self.model.gamma.to_string()),
            ("model.n".into(), self.model.n.to_string()),
            ("model.sigma".into(), self.model.sigma.to_string()),
            ("noise.cutoff".into(), self.noise.cutoff.to_string()),
            ("noise.decay".into(), self.noise.decay.to_string()),
            ("noise.scale".into(), self.noise.scale.to_string()),
            ("output_dir".into(), self.output_dir.display().to_string()),
            ("paths".into(), self.paths.to_string()),
            ("probe.anchors".into(), fmt_f64_list(&self.probe.anchors)),
            ("probe.dt".into(), self.probe.dt.to_string()),
            (
                "probe.family_masses".into(),
                fmt_f64_list(&self.probe.family_masses),
            ),
            ("probe.horizons".into(), fmt_f64_list(&self.probe.horizons)),
            ("probe.paths".into(), self.probe.paths.to_string()),
            (
                "probe.reference_moment".into(),
                self.probe.reference_moment.to_string(),
            ),
            ("probe.rho".into(), self.probe.rho.to_string()),
            ("run.dt".into(), self.run.dt.to_string()),
            (
                "run.recording".into(),
                match self.run.recording {
                    RecordingLevel::MassOnly => "mass",
                    RecordingLevel::Ledger => "ledger",
                    RecordingLevel::LedgerWithModes => "ledger_modes",
                }
                .into(),
            ),
            ("run.scheme".into(), self.run.scheme.name().into()),
            (
                "run.snapshots".into(),
                match &self.run.snapshots {
                    SnapshotKey::None => "none".into(),
                    SnapshotKey::Every(k) => format!("every:{k}"),
                    SnapshotKey::Times(ts) => format!("times:{}", fmt_f64_list(ts)),
                },
            ),
            ("run.t0".into(), self.run.t0.to_string()),
            ("run.t1".into(), self.run.t1.to_string()),
            ("seed".into(), self.seed.to_string()),
            (
                "strichartz.p".into(),
                match self.strichartz.p {
                    None => "auto".into(),
                    Some(v) => v.to_string(),
                },
            ),
            (
                "strichartz.r".into(),
                match self.strichartz.r {
                    None => "auto".into(),
                    Some(None) => "inf".into(),
                    Some(Some(v)) => v.to_string(),
                },
            ),
            ("verify.order".into(), self.verify.order.to_string()),
            (
                "verify.strides".into(),
                fmt_usize_list(&self.verify.strides),
            ),
        ];
        pairs.sort();
        pairs
    }

    /// Full serialization, one `key = value` per line; parses back to an
    /// equal config.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.pairs() {
            out.push_str(&k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        }
        out
    }

    /// The hash input: `to_text` minus the `output_dir` line.
    pub fn canonical_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.pairs() {
            if k == "output_dir" {
                continue;
            }
            out.push_str(&k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        }
        out
    }

    /// Hex SHA-256 of the canonical text.  Stable across platforms because
    /// the canonical text uses round-trip float formatting and a fixed key
    /// order.
    pub fn config_hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_text().as_bytes());
        let mut hex = String::with_capacity(64);
        for byte in digest {
            hex.push_str(&format!("{byte:02x}"));
        }
        hex
    }

    // -- builders ----------------------------------------------------------

    pub fn build_grid(&self) -> Result<Grid<f64>> {
        Grid::new(self.model.n, self.grid.points, self.grid.length)
    }

    pub fn build_forcing(&self, grid: &Grid<f64>) -> Result<ForcingSpec<f64>> {
        let beta = self.forcing.beta;
        match self.forcing.family {
            ForcingKind::None => Ok(ForcingSpec::zero(grid.clone())),
            ForcingKind::LinearPhase => {
                let profile = self.real_profile(grid)?;
                ForcingSpec::linear_phase(grid.clone(), |x| profile[index_of(grid, x)], beta)
            }
            ForcingKind::Additive => {
                let profile = self.complex_profile(grid)?;
                ForcingSpec::additive(grid.clone(), |x| profile[index_of(grid, x)], beta)
            }
        }
    }

    /// The forcing profile as a real lattice sample (for `linear_phase`).
    fn real_profile(&self, grid: &Grid<f64>) -> Result<Vec<f64>> {
        let complex = self.complex_profile(grid)?;
        for v in &complex {
            if v.im != 0.0 {
                return Err(Error::ConfigValue {
                    key: "forcing.profile".into(),
                    message: "linear_phase needs a real profile, snapshot has imaginary parts"
                        .into(),
                });
            }
        }
        Ok(complex.into_iter().map(|v| v.re).collect())
    }

    fn complex_profile(&self, grid: &Grid<f64>) -> Result<Vec<Cplx<f64>>> {
        let beta = self.forcing.beta;
        let length = grid.box_length();
        match self.forcing.profile.as_str() {
            "builtin:cosine" => Ok((0..grid.total_points())
                .map(|flat| {
                    let x = grid.coords(flat);
                    let c = 0.5 * beta * (1.0 + (std::f64::consts::TAU * x[0] / length).cos());
                    Cplx::new(c, 0.0)
                })
                .collect()),
            "builtin:uniform" => Ok(vec![Cplx::new(beta, 0.0); grid.total_points()]),
            path => {
                let field: SpectralField<f64> = read_snapshot(Path::new(path))?;
                if field.grid() != grid {
                    return Err(Error::ConfigValue {
                        key: "forcing.profile".into(),
                        message: format!("snapshot `{path}` is sampled on a different grid"),
                    });
                }
                Ok(field.into_values())
            }
        }
    }

    pub fn build_params(&self) -> Result<ModelParams<f64>> {
        let grid = self.build_grid()?;
        let forcing = self.build_forcing(&grid)?;
        ModelParams::new(
            self.model.alpha,
            self.model.sigma,
            self.model.gamma,
            forcing,
        )
    }

    /// `None` when `noise.scale = 0` (a noiseless run).
    pub fn build_covariance(&self, grid: &Grid<f64>) -> Result<Option<CovarianceSpec<f64>>> {
        if self.noise.scale == 0.0 {
            return Ok(None);
        }
        CovarianceSpec::builtin(
            grid.clone(),
            self.noise.scale,
            self.noise.decay,
            self.noise.cutoff,
        )
        .map(Some)
    }

    /// Realize the configured initial state on the grid, applying the
    /// optional exact mass normalization.
    pub fn build_initial(&self, grid: &Grid<f64>) -> Result<SpectralField<f64>> {
        let mut field = match self.init.kind {
            InitKind::Gaussian => {
                let half = 0.5 * grid.box_length();
                let w2 = 2.0 * self.init.width * self.init.width;
                if !(self.init.width > 0.0) {
                    return Err(Error::ConfigValue {
                        key: "init.width".into(),
                        message: "gaussian width must be > 0".into(),
                    });
                }
                let amp = self.init.amplitude;
                let dim = grid.dim();
                SpectralField::from_fn_physical(grid.clone(), |x| {
                    let r2: f64 = x[..dim].iter().map(|&c| (c - half) * (c - half)).sum();
                    Cplx::new(amp * (-r2 / w2).exp(), 0.0)
                })
            }
            InitKind::Constant => {
                let amp = self.init.amplitude;
                SpectralField::from_fn_physical(grid.clone(), |_| Cplx::new(amp, 0.0))
            }
            InitKind::Band => band_limited_field(grid, self.init.support, self.init.amplitude)?,
            InitKind::Snapshot => {
                let field: SpectralField<f64> = read_snapshot(Path::new(&self.init.path))?;
                if field.grid() != grid {
                    return Err(Error::ConfigValue {
                        key: "init.path".into(),
                        message: format!(
                            "snapshot `{}` is sampled on a different grid",
                            self.init.path
                        ),
                    });
                }
                field
            }
        };
        if self.init.mass != 0.0 {
            rescale_to_mass(&mut field, self.init.mass)?;
        }
        Ok(field)
    }

    pub fn build_guard(&self) -> BlowupGuard<f64> {
        BlowupGuard {
            mass_threshold: self.guard.mass_threshold,
            consecutive_growth_limit: self.guard.growth_limit,
        }
    }

    pub fn build_setup(&self) -> Result<RunSetup<f64>> {
        let snapshots = match &self.run.snapshots {
            SnapshotKey::None => SnapshotSchedule::None,
            SnapshotKey::Every(k) => SnapshotSchedule::EveryKSteps(*k),
            SnapshotKey::Times(ts) => SnapshotSchedule::AtTimes(ts.clone()),
        };
        let setup = RunSetup::over(self.run.scheme, self.run.t0, self.run.t1, self.run.dt)
            .with_recording(self.run.recording)
            .with_snapshots(snapshots)
            .with_guard(self.build_guard());
        // Surface span/step problems at build time rather than mid-run.
        setup.step_count()?;
        Ok(setup)
    }

    /// Assemble the absorption probe; the forcing decides the growth-offset
    /// schedule (`psi1`), here always autonomous.
    pub fn build_probe(&self, forcing: &ForcingSpec<f64>) -> AbsorbingProbe<f64> {
        let l1 = forcing.psi1_l1();
        let schedule = if l1 > 0.0 {
            Psi1Schedule::Constant { l1 }
        } else {
            Psi1Schedule::Zero
        };
        AbsorbingProbe {
            rho: self.probe.rho,
            reference_moment: self.probe.reference_moment,
            varrho_grid: self.probe.anchors.clone(),
            t_grid: self.probe.horizons.clone(),
            schedule,
            paths: self.probe.paths,
            dt: self.probe.dt,
            scheme: self.run.scheme,
            guard: self.build_guard(),
            seed: self.seed,
        }
    }
}

fn parse_snapshots(v: &str) -> Result<SnapshotKey> {
    if v == "none" {
        return Ok(SnapshotKey::None);
    }
    if let Some(rest) = v.strip_prefix("every:") {
        let k = rest.parse::<usize>().map_err(|_| Error::ConfigValue {
            key: "run.snapshots".into(),
            message: format!("`{rest}` is not a step interval"),
        })?;
        return Ok(SnapshotKey::Every(k));
    }
    if let Some(rest) = v.strip_prefix("times:") {
        return Ok(SnapshotKey::Times(parse_f64_list("run.snapshots", rest)?));
    }
    Err(Error::ConfigValue {
        key: "run.snapshots".into(),
        message: format!("`{v}` is not one of none, every:K, times:a,b,c"),
    })
}

/// Exact lattice index of a coordinate vector (grid points only).
fn index_of(grid: &Grid<f64>, x: &[f64]) -> usize {
    let spacing = grid.spacing();
    let n = grid.points_per_dim();
    let mut idx = [0usize; 3];
    for (j, &c) in x.iter().enumerate() {
        idx[j] = ((c / spacing).round() as usize) % n;
    }
    grid.flatten(&idx[..x.len()])
}

/// Deterministic band-limited field: frequency support `|m_j| <= support`
/// per axis, smoothly decaying coefficients with a fixed phase pattern.
fn band_limited_field(
    grid: &Grid<f64>,
    support: usize,
    amplitude: f64,
) -> Result<SpectralField<f64>> {
    let limit = grid.dealias_limit();
    if support as i64 > limit {
        return Err(Error::ConfigValue {
            key: "init.support".into(),
            message: format!(
                "support {support} exceeds the dealias band limit {limit} of a {}-point grid",
                grid.points_per_dim()
            ),
        });
    }
    let golden = 2.399_963_229_728_653; // 2 pi (1 - 1/phi), decorrelates phases
    let mut values = vec![Cplx::new(0.0, 0.0); grid.total_points()];
    let mut in_band = 0usize;
    for (flat, slot) in values.iter_mut().enumerate() {
        let m = grid.freq_coords(flat);
        let dim = grid.dim();
        if m[..dim]
            .iter()
            .all(|&mj| mj.unsigned_abs() as usize <= support)
        {
            let m2: f64 = m[..dim].iter().map(|&mj| (mj * mj) as f64).sum();
            let theta = golden * in_band as f64;
            let mag = amplitude / (1.0 + m2);
            *slot = Cplx::new(mag * theta.cos(), mag * theta.sin());
            in_band += 1;
        }
    }
    let freq = SpectralField::from_values(grid.clone(), SpaceTag::Frequency, values)?;
    let plan = TransformPlan::new(grid);
    inverse_transform(&freq, &plan)
}

/// Scale a field so its discrete mass equals `target` exactly.
pub(crate) fn rescale_to_mass(field: &mut SpectralField<f64>, target: f64) -> Result<()> {
    if !(target > 0.0 && target.is_finite()) {
        return Err(Error::ConfigValue {
            key: "init.mass".into(),
            message: format!("target mass {target} must be positive and finite"),
        });
    }
    let current = field.l2_norm_sq();
    if current == 0.0 {
        return Err(Error::ConfigValue {
            key: "init.mass".into(),
            message: "cannot normalize the zero field to a positive mass".into(),
        });
    }
    let factor = (target / current).sqrt();
    field.scale(Cplx::new(factor, 0.0));
    Ok(())
}
