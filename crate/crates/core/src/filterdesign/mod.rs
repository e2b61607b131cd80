//! Receive filter banks for a waveform alphabet.
//!
//! The coherent designs minimize `||X h - e||^2` subject to `X~ h = 0`, so
//! every waveform/filter pair produces the same output. Two uncoherent
//! baselines are provided for comparison, along with an independent
//! nullspace solver used to verify the closed forms.

mod baseline;
mod closed_form;
mod oracle;
mod report;

use std::fmt;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::convmat::{assemble_block_system, BlockSystem, Dims, Feasibility, Flavor};
use crate::error::{invalid, Error, Result};
use crate::export::{atomic_write, csv_rows_bytes, fmt_f64, write_json};
use crate::scalar::{lit, to_f64, Cx, Real};
use crate::waveform::WaveformAlphabet;

pub use baseline::{design_penalized_iterative_baseline, design_uncoherent_ls_baseline, penalized_objective};
pub use closed_form::{solve_circular, solve_linear};
pub use oracle::{constraint_nullspace, kkt_residual, solve_constrained_ls_oracle};
pub use report::{coherence_error_against, evaluate_filterbank, filter_outputs, sidelobe_levels, DesignReport, PSL_FLOOR_DB};

/// Condition numbers at or above this value are treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DesignKind {
    CoherentLinear,
    CoherentCircular,
    #[serde(rename = "baseline-ls")]
    BaselineLs,
    BaselinePenalized,
}

impl DesignKind {
    pub fn is_coherent(self) -> bool {
        matches!(self, DesignKind::CoherentLinear | DesignKind::CoherentCircular)
    }

    pub fn flavor(self) -> Flavor {
        match self {
            DesignKind::CoherentCircular => Flavor::Circular,
            _ => Flavor::Linear,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            DesignKind::CoherentLinear => "coherent-linear",
            DesignKind::CoherentCircular => "coherent-circular",
            DesignKind::BaselineLs => "baseline-ls",
            DesignKind::BaselinePenalized => "baseline-penalized",
        }
    }
}

impl fmt::Display for DesignKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for DesignKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "coherent-linear" => DesignKind::CoherentLinear,
            "coherent-circular" => DesignKind::CoherentCircular,
            "baseline-ls" | "baseline" => DesignKind::BaselineLs,
            "baseline-penalized" => DesignKind::BaselinePenalized,
            _ => return invalid(format!("unknown design `{s}`")),
        })
    }
}

/// Numerical side information gathered while solving.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    /// Condition estimate of each `Psi_k^H Psi_k`.
    pub gram_condition: Vec<f64>,
    /// Condition estimate of `D = X~ (X^H X)^-1 X~^H`; infinite when `D` is
    /// exactly rank deficient.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_condition: Option<f64>,
    /// Numerical rank and order of `D`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_rank: Option<(usize, usize)>,
    /// Penalized objective after each sweep (penalized baseline only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub objective_history: Vec<f64>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl SolveDiagnostics {
    pub(crate) fn warn(&mut self, msg: String) {
        log::warn!("{msg}");
        self.warnings.push(msg);
    }
}

/// `K` receive filters, one per alphabet waveform.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterBank<T: Real> {
    pub filters: Vec<Vec<Cx<T>>>,
    pub flavor: Flavor,
    pub peak_index: usize,
    pub design: DesignKind,
    pub dims: Dims,
    pub diagnostics: SolveDiagnostics,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct BankMeta {
    design: DesignKind,
    flavor: Flavor,
    peak_index: usize,
    dims: Dims,
    taps: usize,
    diagnostics: SolveDiagnostics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    config_hash: Option<String>,
}

impl<T: Real> FilterBank<T> {
    pub fn k(&self) -> usize {
        self.filters.len()
    }

    pub fn taps(&self) -> usize {
        self.filters.first().map(Vec::len).unwrap_or(0)
    }

    /// Stacked filter vector `[h_1; ...; h_K]`.
    pub fn stacked(&self) -> Vec<Cx<T>> {
        self.filters.iter().flatten().copied().collect()
    }

    pub fn cast<U: Real>(&self) -> FilterBank<U> {
        FilterBank {
            filters: self
                .filters
                .iter()
                .map(|h| h.iter().map(|z| Cx::new(lit(to_f64(z.re)), lit(to_f64(z.im)))).collect())
                .collect(),
            flavor: self.flavor,
            peak_index: self.peak_index,
            design: self.design,
            dims: self.dims,
            diagnostics: self.diagnostics.clone(),
        }
    }

    /// Writes `<stem>.json` (metadata) and `<stem>.csv` (`filter,index,real,imag`).
    pub fn save(&self, dir: &Path, stem: &str, config_hash: Option<&str>) -> Result<()> {
        let header: Vec<String> = ["filter", "index", "real", "imag"].iter().map(|s| s.to_string()).collect();
        let rows = self.filters.iter().enumerate().flat_map(|(k, h)| {
            h.iter()
                .enumerate()
                .map(move |(i, z)| vec![k.to_string(), i.to_string(), fmt_f64(to_f64(z.re)), fmt_f64(to_f64(z.im))])
        });
        atomic_write(&dir.join(format!("{stem}.csv")), &csv_rows_bytes(&header, rows)?)?;
        write_json(
            &dir.join(format!("{stem}.json")),
            &BankMeta {
                design: self.design,
                flavor: self.flavor,
                peak_index: self.peak_index,
                dims: self.dims,
                taps: self.taps(),
                diagnostics: self.diagnostics.clone(),
                config_hash: config_hash.map(str::to_string),
            },
        )
    }

    pub fn load(dir: &Path, stem: &str) -> Result<Self> {
        let meta: BankMeta = serde_json::from_slice(&std::fs::read(dir.join(format!("{stem}.json")))?)?;
        let mut filters = vec![vec![Cx::new(T::zero(), T::zero()); meta.taps]; meta.dims.k];
        let mut rdr = csv::Reader::from_path(dir.join(format!("{stem}.csv")))?;
        for rec in rdr.records() {
            let rec = rec?;
            let field = |i: usize| rec.get(i).ok_or_else(|| Error::Serialization("short CSV row".into()));
            let parse_u = |s: &str| s.parse::<usize>().map_err(|e| Error::Serialization(e.to_string()));
            let parse_f = |s: &str| s.parse::<f64>().map_err(|e| Error::Serialization(e.to_string()));
            let (k, i) = (parse_u(field(0)?)?, parse_u(field(1)?)?);
            if k >= meta.dims.k || i >= meta.taps {
                return Err(Error::Serialization(format!("tap ({k}, {i}) out of range")));
            }
            filters[k][i] = Cx::new(lit(parse_f(field(2)?)?), lit(parse_f(field(3)?)?));
        }
        Ok(Self {
            filters,
            flavor: meta.flavor,
            peak_index: meta.peak_index,
            design: meta.design,
            dims: meta.dims,
            diagnostics: meta.diagnostics,
        })
    }
}

/// Rough complex flop count of a closed-form solve.
pub fn flop_estimate(kind: DesignKind, dims: &Dims) -> f64 {
    let (k, n, l_f) = (dims.k as f64, dims.n() as f64, dims.l_f as f64);
    match kind.flavor() {
        // Gram products and factors, then the (K-1)n order D factor
        Flavor::Linear => k * (n * l_f * l_f + l_f.powi(3) / 3.0) + ((k - 1.0) * n).powi(3) / 3.0 + 2.0 * (k - 1.0) * n * n * l_f,
        // K+1 FFTs plus K inverse FFTs, and a Thomas sweep per bin
        Flavor::Circular => (2.0 * k + 1.0) * 5.0 * n * n.log2().max(1.0) + 8.0 * k * n,
    }
}

fn log_cost(kind: DesignKind, dims: &Dims, start: Instant) {
    log::info!(
        "{kind} design: {:.3} s wall clock, ~{:.2e} flops (K={}, L={}, L_f={})",
        start.elapsed().as_secs_f64(),
        flop_estimate(kind, dims),
        dims.k,
        dims.l,
        dims.l_f
    );
}

fn bank_from_solution<T: Real>(sys: &BlockSystem<T>, design: DesignKind, filters: Vec<Vec<Cx<T>>>, diagnostics: SolveDiagnostics) -> FilterBank<T> {
    FilterBank {
        filters,
        flavor: sys.flavor,
        peak_index: sys.peak_index,
        design,
        dims: sys.dims,
        diagnostics,
    }
}

/// Closed-form coherent design with linear-convolution filters of length `L_f`.
///
/// At the lower feasibility bound the constraint consumes every degree of
/// freedom; the design still succeeds but records a warning.
pub fn design_coherent_linear<T: Real>(alphabet: &WaveformAlphabet<T>, l_f: usize, peak_index: usize) -> Result<FilterBank<T>> {
    let start = Instant::now();
    let sys = assemble_block_system(alphabet, l_f, peak_index, Flavor::Linear)?;
    let (filters, mut diag) = solve_linear(&sys, &sys.e_block())?;
    log_cost(DesignKind::CoherentLinear, &sys.dims, start);
    if let Feasibility::Feasible { lower_tight: true } = crate::convmat::check_feasibility(sys.k(), sys.dims.l, l_f) {
        diag.warn(format!(
            "L_f = {l_f} sits on the lower feasibility bound (K-1)(L+L_f-1) = K*L_f; the constraint leaves no free directions beyond shared waveform structure"
        ));
    }
    Ok(bank_from_solution(&sys, DesignKind::CoherentLinear, filters, diag))
}

/// Closed-form coherent design with circular filters of length `L + L_f - 1`.
pub fn design_coherent_circular<T: Real>(alphabet: &WaveformAlphabet<T>, l_f: usize, peak_index: usize) -> Result<FilterBank<T>> {
    let start = Instant::now();
    let sys = assemble_block_system(alphabet, l_f, peak_index, Flavor::Circular)?;
    let (filters, diag) = solve_circular(&sys, &sys.e_block())?;
    log_cost(DesignKind::CoherentCircular, &sys.dims, start);
    Ok(bank_from_solution(&sys, DesignKind::CoherentCircular, filters, diag))
}

/// Runs one of the designs with default penalized-baseline settings.
pub fn design<T: Real>(kind: DesignKind, alphabet: &WaveformAlphabet<T>, l_f: usize, peak_index: usize) -> Result<FilterBank<T>> {
    match kind {
        DesignKind::CoherentLinear => design_coherent_linear(alphabet, l_f, peak_index),
        DesignKind::CoherentCircular => design_coherent_circular(alphabet, l_f, peak_index),
        DesignKind::BaselineLs => design_uncoherent_ls_baseline(alphabet, l_f, peak_index),
        DesignKind::BaselinePenalized => design_penalized_iterative_baseline(alphabet, l_f, peak_index, 1.0, 50),
    }
}

/// Coherent closed form on an already assembled system.
pub fn design_from_system<T: Real>(sys: &BlockSystem<T>) -> Result<FilterBank<T>> {
    let e = sys.e_block();
    Ok(match sys.flavor {
        Flavor::Linear => {
            let (f, d) = solve_linear(sys, &e)?;
            bank_from_solution(sys, DesignKind::CoherentLinear, f, d)
        }
        Flavor::Circular => {
            let (f, d) = solve_circular(sys, &e)?;
            bank_from_solution(sys, DesignKind::CoherentCircular, f, d)
        }
    })
}

/// Residual tolerance relative to `||e||` for the constraint postcondition.
pub(crate) fn constraint_tolerance<T: Real>() -> f64 {
    1e-8f64.max(T::eps_f64().sqrt())
}
