use std::path::{Path, PathBuf};

use bdris::circuits::{dris_slc, group_connected, pi_network, t_network, LoadBank, StaticLoadCircuit};
use bdris::environment::{read_matrix_file, read_touchstone};
use bdris::estimation::FitConfig;
use bdris::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const DEFAULT_CONFIG: &str = include_str!("../default.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Scenario,
    #[serde(default)]
    pub estimation: Estimation,
    #[serde(default)]
    pub optimization: Optimization,
    /// Left out of manifests so a run reproduces byte-for-byte in any directory.
    #[serde(default, skip_serializing)]
    pub io: Io,
    /// Directory that relative paths inside the file are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub n_t: usize,
    pub n_r: usize,
    pub n_s: usize,
    pub groups: Vec<Group>,
    pub bank: Bank,
    #[serde(default = "default_loss")]
    pub loss_factor: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_loss() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Group {
    T,
    Pi,
    /// One independent load per element.
    Dris { n: usize },
    /// Static circuit read from a native `smatrix` file or a Touchstone `.sNp` file;
    /// the first `n_s` ports face the RIS elements.
    File {
        path: PathBuf,
        n_s: usize,
        n_c: usize,
        frequency_hz: Option<f64>,
    },
}

impl Group {
    fn n_s(&self) -> usize {
        match self {
            Group::T | Group::Pi => 2,
            Group::Dris { n } => *n,
            Group::File { n_s, .. } => *n_s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum Bank {
    /// Load impedances in ohms as `[re, im]`; `z_on` drives bit 0, `z_off` bit 1.
    Impedances {
        z_on: [f64; 2],
        z_off: [f64; 2],
        #[serde(default = "default_z0")]
        z0: f64,
    },
    Reflections { r_a: [f64; 2], r_b: [f64; 2] },
}

fn default_z0() -> f64 {
    50.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Estimation {
    pub n_train: usize,
    pub n_test: usize,
    pub snr_db: Option<f64>,
    /// Any `FitConfig` field; unset fields keep the library defaults.
    #[serde(flatten)]
    pub fit: FitConfig,
}

impl Default for Estimation {
    fn default() -> Self {
        Self { n_train: 2000, n_test: 100, snr_db: None, fit: FitConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Optimization {
    pub seed: u64,
    pub restarts: usize,
    /// Flips per coordinate-ascent run; `10 * N_C` when unset.
    pub budget: Option<usize>,
    /// Also run the exhaustive ground-truth search (skipped above 24 loads).
    pub exhaustive: bool,
    pub histogram_samples: usize,
    pub histogram_bins: usize,
}

impl Default for Optimization {
    fn default() -> Self {
        Self { seed: 0, restarts: 10, budget: None, exhaustive: true, histogram_samples: 10_000, histogram_bins: 60 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Io {
    pub out: PathBuf,
}

impl Default for Io {
    fn default() -> Self {
        Self { out: PathBuf::from("out") }
    }
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl RunConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, CliError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Self::parse(DEFAULT_CONFIG, Path::new(".")),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| bad(format!("{}: {e}", p.display())))?;
                let dir = p.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
                Self::parse(&text, dir)
            }
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let sc = &self.scenario;
        if sc.n_t == 0 || sc.n_r == 0 || sc.n_s == 0 {
            return Err(bad("scenario.n_t, n_r and n_s must be positive"));
        }
        if !(sc.loss_factor > 0.0 && sc.loss_factor < 1.0) {
            return Err(bad("scenario.loss_factor must lie in (0, 1)"));
        }
        if sc.groups.is_empty() {
            return Err(bad("scenario.groups is empty"));
        }
        let total: usize = sc.groups.iter().map(Group::n_s).sum();
        if total != sc.n_s {
            return Err(bad(format!("groups cover {total} RIS elements but scenario.n_s = {}", sc.n_s)));
        }
        for g in &sc.groups {
            match g {
                Group::Dris { n: 0 } => return Err(bad("dris group with n = 0")),
                Group::File { path, n_s, n_c, .. } => {
                    if *n_s == 0 || *n_c == 0 {
                        return Err(bad("file group needs positive n_s and n_c"));
                    }
                    let p = self.resolve(path);
                    if !p.is_file() {
                        return Err(bad(format!("group file {} does not exist", p.display())));
                    }
                }
                _ => {}
            }
        }
        let est = &self.estimation;
        if est.n_train < 2 || est.n_test == 0 {
            return Err(bad("estimation needs n_train >= 2 and n_test >= 1"));
        }
        let opt = &self.optimization;
        if opt.restarts == 0 || opt.budget == Some(0) || opt.histogram_samples == 0 || opt.histogram_bins == 0 {
            return Err(bad("optimization restarts, budget, histogram_samples and histogram_bins must be positive"));
        }
        self.bank()?;
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn bank(&self) -> Result<LoadBank, CliError> {
        let c = |v: [f64; 2]| Complex64::new(v[0], v[1]);
        let bank = match &self.scenario.bank {
            Bank::Impedances { z_on, z_off, z0 } => LoadBank::from_impedances(c(*z_on), c(*z_off), *z0),
            Bank::Reflections { r_a, r_b } => LoadBank::new(c(*r_a), c(*r_b)),
        };
        bank.map_err(|e| bad(format!("scenario.bank: {e}")))
    }

    pub fn slc(&self) -> Result<StaticLoadCircuit, CliError> {
        let mut parts = Vec::with_capacity(self.scenario.groups.len());
        for g in &self.scenario.groups {
            parts.push(match g {
                Group::T => t_network(),
                Group::Pi => pi_network(),
                Group::Dris { n } => dris_slc(*n)?,
                Group::File { path, n_s, n_c, frequency_hz } => {
                    let p = self.resolve(path);
                    let touchstone = p
                        .extension()
                        .and_then(|e| e.to_str())
                        .is_some_and(|e| e.len() >= 3 && e.starts_with(['s', 'S']) && e.ends_with(['p', 'P']));
                    let s = if touchstone {
                        let f = frequency_hz.ok_or_else(|| bad(format!("{}: Touchstone group needs frequency_hz", p.display())))?;
                        read_touchstone(&p, f)?
                    } else {
                        read_matrix_file(&p)?
                    };
                    StaticLoadCircuit::new(s, *n_s, *n_c)?
                }
            });
        }
        Ok(group_connected(&parts)?)
    }

    pub fn out_dir(&self) -> &Path {
        &self.io.out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_the_paper_shape() {
        let cfg = RunConfig::load(None).unwrap();
        let slc = cfg.slc().unwrap();
        assert_eq!((slc.n_s(), slc.n_c()), (6, 9));
        let bank = cfg.bank().unwrap();
        assert!((bank.r_a.re + 0.81).abs() < 0.005);
        assert_eq!(cfg.estimation.fit, FitConfig { seed: 1, ..FitConfig::default() });
    }

    #[test]
    fn fit_fields_sit_in_the_estimation_section() {
        let text = DEFAULT_CONFIG.replace("seed = 1", "seed = 1\noptimizer = \"adam\"\nrestarts = 2");
        let cfg = RunConfig::parse(&text, Path::new(".")).unwrap();
        assert_eq!(cfg.estimation.fit.restarts, 2);
        assert_eq!(cfg.estimation.fit.optimizer, bdris::estimation::Optimizer::Adam);
    }

    #[test]
    fn rejects_bad_configs() {
        let cases = [
            DEFAULT_CONFIG.replace("n_s = 6", "n_s = 5"),
            DEFAULT_CONFIG.replace("{ kind = \"pi\" }]", "{ kind = \"file\", path = \"missing.smatrix\", n_s = 2, n_c = 3 }]"),
            DEFAULT_CONFIG.replace("n_train = 2000", "n_train = 2000\nwhatever = 1"),
            DEFAULT_CONFIG.replace("loss_factor = 0.1", "loss_factor = 1.5"),
            DEFAULT_CONFIG.replace("z_on = [5.2, 0.0]", "z_on = [-50.0, 0.0]"),
            DEFAULT_CONFIG.replace("kind = \"pi\"", "kind = \"delta\""),
        ];
        for text in cases {
            assert!(matches!(RunConfig::parse(&text, Path::new(".")), Err(CliError::Config(_))), "{text}");
        }
    }

    #[test]
    fn reflection_bank_and_mixed_groups() {
        let text = DEFAULT_CONFIG
            .replace("z_on = [5.2, 0.0]\nz_off = [0.0, -7960.0]\nz0 = 50.0", "r_a = [-0.8, 0.0]\nr_b = [1.0, 0.0]")
            .replace("n_s = 6", "n_s = 7")
            .replace("[{ kind = \"pi\" }, { kind = \"pi\" }, { kind = \"pi\" }]", "[{ kind = \"t\" }, { kind = \"dris\", n = 3 }, { kind = \"pi\" }]");
        let cfg = RunConfig::parse(&text, Path::new(".")).unwrap();
        let slc = cfg.slc().unwrap();
        assert_eq!((slc.n_s(), slc.n_c()), (7, 9));
        assert_eq!(cfg.bank().unwrap().r_b, Complex64::new(1.0, 0.0));
    }
}
