//! Run configuration: TOML on disk, or assembled from `--builtin` flags.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use hnn_core::britton::HnnGroupData;
use hnn_core::builtins::{
    builtin, builtin_group_data, function_algebra_quotient_family, group_algebra_family, ExplicitFamily, BUILTINS,
};
use hnn_core::fock::DEFAULT_DIM_CAP;
use hnn_core::group::{FiniteGroup, GroupFile, SubgroupData, SubgroupFile};
use hnn_core::qgroup::HnnInput;
use hnn_core::suites::{RunOptions, Suite, Tolerances};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const DIM_CAP_ENV: &str = "HNN_FORGE_DIM_CAP";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    FunctionAlgebraQuotient,
    GroupAlgebraSubgroup,
    Explicit,
    Builtin,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceOverrides {
    pub alg: Option<f64>,
    pub gram: Option<f64>,
}

/// Contents of a config file. Paths are relative to the file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub family: Family,
    pub name: Option<String>,
    /// Builtin name (family `builtin`).
    pub builtin: Option<String>,
    /// Group file (families `group_algebra_subgroup`, `function_algebra_quotient`).
    pub group: Option<PathBuf>,
    /// Subgroup and θ file (family `group_algebra_subgroup`).
    pub subgroup: Option<PathBuf>,
    /// Labels of the normal subgroup (family `function_algebra_quotient`).
    pub normal: Option<Vec<String>>,
    /// Endomorphism `α` by labels; identity when absent (family `function_algebra_quotient`).
    pub alpha: Option<HashMap<String, String>>,
    /// JSON file of [`ExplicitFamily`] (family `explicit`).
    pub explicit: Option<PathBuf>,
    #[serde(rename = "L")]
    pub l: Option<usize>,
    pub suites: Option<Vec<Suite>>,
    pub seed: Option<u64>,
    pub dim_cap: Option<usize>,
    #[serde(default)]
    pub tolerances: ToleranceOverrides,
}

/// Resolved configuration, echoed into the report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub name: String,
    pub family: Family,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub files: Vec<String>,
    #[serde(rename = "L")]
    pub l: usize,
    pub suites: Vec<Suite>,
    pub seed: u64,
    pub dim_cap: usize,
    pub tolerances: Tolerances,
}

impl RunConfig {
    pub fn options(&self) -> RunOptions {
        let mut o = RunOptions::new(self.l, self.seed);
        o.suites = self.suites.clone();
        o.dim_cap = self.dim_cap;
        o.tolerances = self.tolerances;
        o
    }
}

/// A loaded problem: the HNN input plus the group data when the oracle applies.
pub struct Problem {
    pub config: RunConfig,
    pub input: HnnInput,
    pub group: Option<HnnGroupData>,
}

pub const DEFAULT_SEED: u64 = 20240229;

fn dim_cap(configured: Option<usize>) -> Result<usize> {
    match std::env::var(DIM_CAP_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| CliError::Config(format!("{DIM_CAP_ENV} must be a positive integer, got '{v}'"))),
        Err(_) => Ok(configured.unwrap_or(DEFAULT_DIM_CAP)),
    }
}

fn check_common(l: usize, suites: &[Suite], tol: &Tolerances) -> Result<()> {
    if l == 0 {
        return Err(CliError::Config("L must be at least 1".into()));
    }
    if suites.is_empty() {
        return Err(CliError::Config("at least one suite must be enabled".into()));
    }
    if !(tol.alg > 0.0 && tol.gram > 0.0) {
        return Err(CliError::Config("tolerances must be positive".into()));
    }
    Ok(())
}

fn builtin_default_l(name: &str) -> Result<usize> {
    BUILTINS
        .iter()
        .find(|b| b.name == name)
        .map(|b| b.default_l)
        .ok_or_else(|| CliError::Config(format!("unknown builtin '{name}' (see `hnn-forge list`)")))
}

/// Problem for `run --builtin`.
pub fn builtin_problem(name: &str, l: Option<usize>, suites: Vec<Suite>, seed: Option<u64>) -> Result<Problem> {
    let default_l = builtin_default_l(name)?;
    let l = l.unwrap_or(default_l);
    let config = RunConfig {
        name: name.to_string(),
        family: Family::Builtin,
        files: Vec::new(),
        l,
        suites: if suites.is_empty() { Suite::ALL.to_vec() } else { suites },
        seed: seed.unwrap_or(DEFAULT_SEED),
        dim_cap: dim_cap(None)?,
        tolerances: Tolerances::default(),
    };
    check_common(config.l, &config.suites, &config.tolerances)?;
    Ok(Problem { input: builtin(name)?, group: builtin_group_data(name)?, config })
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn required<'a, T>(v: &'a Option<T>, key: &str, family: &str) -> Result<&'a T> {
    v.as_ref().ok_or_else(|| CliError::Config(format!("family {family} needs `{key}`")))
}

fn label_index(g: &FiniteGroup, l: &str) -> Result<usize> {
    g.index_of(l).ok_or_else(|| CliError::Config(format!("unknown group label '{l}'")))
}

/// Problem for `run --config`.
pub fn load_config(path: &Path) -> Result<Problem> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))?;
    let file: ConfigFile = toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let resolve = |p: &PathBuf| base.join(p);
    let mut files = Vec::new();
    let name = file.name.clone().unwrap_or_else(|| {
        path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "config".into())
    });
    let (input, group, default_l) = match file.family {
        Family::Builtin => {
            let b = required(&file.builtin, "builtin", "builtin")?;
            (builtin(b)?, builtin_group_data(b)?, builtin_default_l(b)?)
        }
        Family::GroupAlgebraSubgroup => {
            let gp = required(&file.group, "group", "group_algebra_subgroup")?;
            let sp = required(&file.subgroup, "subgroup", "group_algebra_subgroup")?;
            files.extend([gp.display().to_string(), sp.display().to_string()]);
            let h = FiniteGroup::from_file(&read_json::<GroupFile>(&resolve(gp))?)?;
            let data = SubgroupData::from_file(&h, &read_json::<SubgroupFile>(&resolve(sp))?)?;
            let input = group_algebra_family(&name, &h, &data)?;
            (input, Some(HnnGroupData::new(h, data)?), 2)
        }
        Family::FunctionAlgebraQuotient => {
            let gp = required(&file.group, "group", "function_algebra_quotient")?;
            let normal = required(&file.normal, "normal", "function_algebra_quotient")?;
            files.push(gp.display().to_string());
            let g = FiniteGroup::from_file(&read_json::<GroupFile>(&resolve(gp))?)?;
            let normal = normal.iter().map(|l| label_index(&g, l)).collect::<Result<Vec<_>>>()?;
            let alpha = match &file.alpha {
                None => (0..g.order()).collect(),
                Some(map) => {
                    let mut a = vec![usize::MAX; g.order()];
                    for (k, v) in map {
                        a[label_index(&g, k)?] = label_index(&g, v)?;
                    }
                    if a.contains(&usize::MAX) {
                        return Err(CliError::Config("alpha must be defined on every group element".into()));
                    }
                    a
                }
            };
            (function_algebra_quotient_family(&name, &g, &normal, &alpha)?, None, 1)
        }
        Family::Explicit => {
            let ep = required(&file.explicit, "explicit", "explicit")?;
            files.push(ep.display().to_string());
            (read_json::<ExplicitFamily>(&resolve(ep))?.build(&name)?, None, 1)
        }
    };
    let tolerances = Tolerances {
        alg: file.tolerances.alg.unwrap_or(Tolerances::default().alg),
        gram: file.tolerances.gram.unwrap_or(Tolerances::default().gram),
    };
    let config = RunConfig {
        name,
        family: file.family,
        files,
        l: file.l.unwrap_or(default_l),
        suites: file.suites.unwrap_or_else(|| Suite::ALL.to_vec()),
        seed: file.seed.unwrap_or(DEFAULT_SEED),
        dim_cap: dim_cap(file.dim_cap)?,
        tolerances,
    };
    check_common(config.l, &config.suites, &config.tolerances)?;
    Ok(Problem { config, input, group })
}
