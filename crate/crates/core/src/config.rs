//! Flat `key = value` run configuration.
//!
//! ```text
//! # comment
//! flux.kind = burgers
//! grid.L = 2
//! grid.nx = 256
//! init.breakpoints = 0, 1
//! init.values = 1, 0, 1
//! ```
//!
//! Values given on the command line as `--key=value` override the file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::cone::FlatTolerance;
use crate::error::{Error, Result};
use crate::flux::{FluxKind, FluxModel};
use crate::kinetic::{lift_function, lift_measure, mollify_x, Atom, Grid, KineticField, MollifierKernel};
use crate::reference::ScalarProfile;

pub const KNOWN_KEYS: &[&str] = &[
    "flux.kind",
    "flux.coeffs",
    "flux.table",
    "grid.L",
    "grid.nx",
    "grid.nv",
    "init.kind",
    "init.breakpoints",
    "init.values",
    "init.mixtures",
    "mollify.eps",
    "mollify.kernel",
    "time.T",
    "time.cfl",
    "time.outputs",
    "output.dir",
    "solver.tau_flat",
    "compare.refinements",
];

/// Raw entries with the line they came from (0 for overrides).
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigMap {
    allowed: &'static [&'static str],
    entries: BTreeMap<String, (String, usize)>,
}

impl Default for ConfigMap {
    fn default() -> Self {
        Self::with_keys(KNOWN_KEYS)
    }
}

impl ConfigMap {
    /// Empty map accepting only `allowed` keys.
    pub fn with_keys(allowed: &'static [&'static str]) -> Self {
        ConfigMap {
            allowed,
            entries: BTreeMap::new(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut map = ConfigMap::default();
        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config(line, line_no, "expected `key = value`"))?;
            map.insert(key.trim(), value.trim(), line_no)?;
        }
        Ok(map)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(path.display().to_string(), 0, format!("cannot read config: {e}")))?;
        Self::parse(&text)
    }

    pub fn insert(&mut self, key: &str, value: &str, line: usize) -> Result<()> {
        if !self.allowed.contains(&key) {
            return Err(Error::config(key, line, "unknown key"));
        }
        self.entries.insert(key.to_string(), (value.to_string(), line));
        Ok(())
    }

    /// Applies `key=value` overrides; a leading `--` is accepted.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<()> {
        for o in overrides {
            let o = o.as_ref().trim_start_matches("--");
            let (key, value) = o
                .split_once('=')
                .ok_or_else(|| Error::config(o, 0, "override must look like --key=value"))?;
            self.insert(key.trim(), value.trim(), 0)?;
        }
        Ok(())
    }

    /// Flux from `flux.kind` (default burgers) with its resolved keys.
    pub fn flux(&self) -> Result<(FluxModel, Vec<(&'static str, String)>)> {
        let kind = self.get("flux.kind").unwrap_or("burgers").to_string();
        let flux_kind = match kind.as_str() {
            "burgers" => FluxKind::Burgers,
            "shifted_square" => FluxKind::ShiftedSquare,
            "polynomial" => FluxKind::Polynomial {
                coeffs: self
                    .list("flux.coeffs")?
                    .ok_or_else(|| self.err("flux.coeffs", "required for polynomial flux"))?,
            },
            "tabulated" => FluxKind::Tabulated {
                values: self
                    .list("flux.table")?
                    .ok_or_else(|| self.err("flux.table", "required for tabulated flux"))?,
            },
            other => return Err(self.err("flux.kind", format!("unknown flux `{other}`"))),
        };
        let mut keys = Vec::new();
        match &flux_kind {
            FluxKind::Polynomial { coeffs } => keys.push(("flux.coeffs", fmt_list(coeffs))),
            FluxKind::Tabulated { values } => keys.push(("flux.table", fmt_list(values))),
            _ => {}
        }
        keys.push(("flux.kind", kind));
        let flux = FluxModel::new(flux_kind).map_err(|e| match e {
            Error::Config { key, msg, .. } => self.err(&key, msg),
            other => other,
        })?;
        Ok((flux, keys))
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(v, _)| v.as_str())
    }

    fn line(&self, key: &str) -> usize {
        self.entries.get(key).map_or(0, |(_, l)| *l)
    }

    pub fn err(&self, key: &str, msg: impl Into<String>) -> Error {
        Error::config(key, self.line(key), msg)
    }

    pub fn parse_value<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)
            .map(|v| v.parse::<T>().map_err(|e| self.err(key, format!("cannot parse `{v}`: {e}"))))
            .transpose()
    }

    pub fn list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.get(key)
            .map(|v| {
                v.split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse::<f64>().map_err(|e| self.err(key, format!("cannot parse `{s}`: {e}"))))
                    .collect()
            })
            .transpose()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialData {
    /// `values[k]` on `[breakpoints[k-1], breakpoints[k])`, with `-L` and `L` as outer ends.
    Piecewise { breakpoints: Vec<f64>, values: Vec<f64> },
    /// Same pieces, each carrying an atomic probability measure.
    Mixture { breakpoints: Vec<f64>, mixtures: Vec<Vec<Atom>> },
}

impl InitialData {
    fn piece(breakpoints: &[f64], x: f64) -> usize {
        breakpoints.iter().take_while(|&&b| x >= b).count()
    }

    pub fn lift(&self, grid: &Grid) -> Result<KineticField> {
        match self {
            InitialData::Piecewise { breakpoints, values } => {
                let u: Vec<f64> = grid.xs().iter().map(|&x| values[Self::piece(breakpoints, x)]).collect();
                lift_function(&u, grid)
            }
            InitialData::Mixture { breakpoints, mixtures } => {
                let m: Vec<Vec<Atom>> = grid
                    .xs()
                    .iter()
                    .map(|&x| mixtures[Self::piece(breakpoints, x)].clone())
                    .collect();
                lift_measure(&m, grid)
            }
        }
    }

    /// The scalar profile, or `None` for genuine mixtures.
    pub fn profile(&self, grid: &Grid) -> Option<ScalarProfile> {
        match self {
            InitialData::Piecewise { breakpoints, values } => {
                ScalarProfile::from_fn(*grid, 0.0, |x| values[Self::piece(breakpoints, x)]).ok()
            }
            InitialData::Mixture { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mollification {
    pub eps: f64,
    pub kernel: MollifierKernel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub flux: FluxModel,
    pub grid: Grid,
    pub init: InitialData,
    pub mollify: Option<Mollification>,
    pub horizon: f64,
    pub cfl: f64,
    pub outputs: Vec<f64>,
    pub output_dir: PathBuf,
    /// Relative flat-block tolerance.
    pub tau_flat: f64,
    pub refinements: usize,
    resolved: BTreeMap<String, String>,
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

fn parse_atoms(map: &ConfigMap, piece: &str) -> Result<Vec<Atom>> {
    piece
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|atom| {
            let (w, v) = atom
                .split_once('@')
                .ok_or_else(|| map.err("init.mixtures", format!("atom `{atom}` must look like weight@value")))?;
            let num = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| map.err("init.mixtures", format!("cannot parse `{s}`: {e}")))
            };
            Ok(Atom {
                weight: num(w)?,
                value: num(v)?,
            })
        })
        .collect()
}

impl RunConfig {
    pub fn from_map(map: &ConfigMap) -> Result<Self> {
        let mut resolved = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            resolved.insert(k.to_string(), v);
        };

        let (flux, flux_keys) = map.flux()?;
        for (k, v) in flux_keys {
            put(k, v);
        }

        let l: f64 = map.parse_value("grid.L")?.unwrap_or(2.0);
        let nx: usize = map.parse_value("grid.nx")?.unwrap_or(256);
        let nv: usize = map.parse_value("grid.nv")?.unwrap_or(nx);
        let grid = Grid::new(l, nx, nv).map_err(|e| map.err("grid", e.to_string()))?;
        put("grid.L", l.to_string());
        put("grid.nx", nx.to_string());
        put("grid.nv", nv.to_string());

        let breakpoints = map.list("init.breakpoints")?.unwrap_or_default();
        if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(map.err("init.breakpoints", "breakpoints must be strictly increasing"));
        }
        if breakpoints.iter().any(|b| !(-l..=l).contains(b)) {
            return Err(map.err("init.breakpoints", format!("breakpoints must lie in [-{l}, {l}]")));
        }
        put("init.breakpoints", fmt_list(&breakpoints));
        let init_kind = map.get("init.kind").unwrap_or("piecewise").to_string();
        let init = match init_kind.as_str() {
            "piecewise" => {
                let values = map
                    .list("init.values")?
                    .ok_or_else(|| map.err("init.values", "initial values are required"))?;
                if values.len() != breakpoints.len() + 1 {
                    return Err(map.err(
                        "init.values",
                        format!("{} breakpoints need {} values, got {}", breakpoints.len(), breakpoints.len() + 1, values.len()),
                    ));
                }
                if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
                    return Err(map.err("init.values", "values must lie in [0, 1]"));
                }
                put("init.values", fmt_list(&values));
                InitialData::Piecewise { breakpoints, values }
            }
            "mixture" => {
                let raw = map
                    .get("init.mixtures")
                    .ok_or_else(|| map.err("init.mixtures", "required for mixture data"))?;
                let mixtures = raw
                    .split('|')
                    .map(|p| parse_atoms(map, p))
                    .collect::<Result<Vec<_>>>()?;
                if mixtures.len() != breakpoints.len() + 1 {
                    return Err(map.err(
                        "init.mixtures",
                        format!("{} breakpoints need {} mixtures, got {}", breakpoints.len(), breakpoints.len() + 1, mixtures.len()),
                    ));
                }
                for atoms in &mixtures {
                    let total: f64 = atoms.iter().map(|a| a.weight).sum();
                    if (total - 1.0).abs() > 1e-9 || atoms.iter().any(|a| a.weight < 0.0 || !(0.0..=1.0).contains(&a.value)) {
                        return Err(map.err(
                            "init.mixtures",
                            "each mixture needs non-negative weights summing to 1 and values in [0, 1]",
                        ));
                    }
                }
                put("init.mixtures", raw.to_string());
                InitialData::Mixture { breakpoints, mixtures }
            }
            other => return Err(map.err("init.kind", format!("unknown initial data kind `{other}`"))),
        };
        put("init.kind", init_kind);

        let kernel_name = map.get("mollify.kernel").unwrap_or("cosine_bump");
        let kernel: MollifierKernel = kernel_name
            .parse()
            .map_err(|e: Error| map.err("mollify.kernel", e.to_string()))?;
        put("mollify.kernel", kernel_name.to_string());
        let mollify = match map.parse_value::<f64>("mollify.eps")? {
            None => None,
            Some(eps) => {
                if !(eps > 0.0 && eps < l / 8.0) {
                    return Err(map.err("mollify.eps", format!("need 0 < eps < L/8 = {}", l / 8.0)));
                }
                if eps < 2.0 * grid.dx() {
                    return Err(map.err("mollify.eps", format!("eps = {eps} is below two cells (dx = {})", grid.dx())));
                }
                put("mollify.eps", eps.to_string());
                Some(Mollification { eps, kernel })
            }
        };

        let horizon: f64 = map.parse_value("time.T")?.unwrap_or(0.5);
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(map.err("time.T", "horizon must be positive"));
        }
        let cfl: f64 = map.parse_value("time.cfl")?.unwrap_or(0.5);
        if !(cfl > 0.0 && cfl <= 1.0) {
            return Err(map.err("time.cfl", "cfl must lie in (0, 1]"));
        }
        let outputs = map.list("time.outputs")?.unwrap_or_else(|| vec![horizon]);
        if outputs.iter().any(|t| !(0.0..=horizon).contains(t)) {
            return Err(map.err("time.outputs", format!("output times must lie in [0, {horizon}]")));
        }
        put("time.T", horizon.to_string());
        put("time.cfl", cfl.to_string());
        put("time.outputs", fmt_list(&outputs));

        let output_dir = PathBuf::from(map.get("output.dir").unwrap_or("out"));
        put("output.dir", output_dir.display().to_string());
        let tau_flat: f64 = map.parse_value("solver.tau_flat")?.unwrap_or(1e-10);
        if !(tau_flat >= 0.0) {
            return Err(map.err("solver.tau_flat", "tolerance must be non-negative"));
        }
        put("solver.tau_flat", tau_flat.to_string());
        let refinements: usize = map.parse_value("compare.refinements")?.unwrap_or(3);
        if refinements == 0 {
            return Err(map.err("compare.refinements", "need at least one level"));
        }
        put("compare.refinements", refinements.to_string());

        Ok(RunConfig {
            flux,
            grid,
            init,
            mollify,
            horizon,
            cfl,
            outputs,
            output_dir,
            tau_flat,
            refinements,
            resolved,
        })
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let mut map = ConfigMap::load(path)?;
        map.apply_overrides(overrides)?;
        Self::from_map(&map)
    }

    /// Every key with its resolved value, defaults included.
    pub fn resolved(&self) -> &BTreeMap<String, String> {
        &self.resolved
    }

    pub fn flat_tolerance(&self) -> FlatTolerance {
        FlatTolerance::RelativeToRange(self.tau_flat)
    }

    /// Same configuration on `grid` (used for refinement studies).
    pub fn with_grid(&self, grid: Grid) -> Self {
        let mut c = self.clone();
        c.grid = grid;
        c.resolved.insert("grid.nx".into(), grid.nx().to_string());
        c.resolved.insert("grid.nv".into(), grid.nv().to_string());
        c
    }

    /// Lifted and, if requested, mollified initial field.
    pub fn initial_field(&self) -> Result<KineticField> {
        let y = self.init.lift(&self.grid)?;
        match &self.mollify {
            Some(m) => mollify_x(&y, m.eps, m.kernel),
            None => Ok(y),
        }
    }
}
