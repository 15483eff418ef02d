//! `J → chain coefficients → residual densities → report`, then files.

use std::fs;
use std::path::{Path, PathBuf};

use chaincast_core::chainmap::measure_from_sd;
use chaincast_core::convergence::convergence_report_from;
use chaincast_core::orthopoly::recurrence_coefficients;
use chaincast_core::stieltjes::find_gap_zero;
use chaincast_core::{ChainCoefficients, MappingKernel, OutOfClassReason, ResidualFamily, SpectralDensity, SzegoVerdict};

use crate::config::{ConfigError, GridSpec, ValidJob};
use crate::density;
use crate::error::CliError;
use crate::output::{self, Report, ResidualSection, Tool};

/// What a run produced.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub written: Vec<PathBuf>,
    pub warnings: Vec<String>,
    pub report: Report,
}

/// Relative drop of `J` that ends the residual grid on unbounded support.
const TAIL_DROP: f64 = 1e-12;

pub fn run(job: &ValidJob, out_dir: &Path) -> Result<RunSummary, CliError> {
    let c = &job.config;
    let q = c.mapping_q;
    let j = density::build(&c.spectral_density, job.table.as_ref())?;
    let m = measure_from_sd(&j, q)?;
    if !c.residual_orders.is_empty() && !j.is_gapless() {
        let z0 = find_gap_zero(&m)?.unwrap_or(f64::NAN);
        let w0 = MappingKernel::new(q)?.g_inv(z0);
        return Err(CliError::Unsupported(format!(
            "residual densities need a gapless spectral density; the Stieltjes transform of the mapped \
             measure vanishes in the gap at z0 = {z0} (omega = {w0})"
        )));
    }
    let rc = recurrence_coefficients(&m, c.sites + 1)?;
    let chain = ChainCoefficients::from_recurrence(q, rc.clone())?;
    let conv = convergence_report_from(&j, q, &rc)?;

    let mut warnings = Vec::new();
    let mut notes = Vec::new();
    match conv.verdict {
        SzegoVerdict::InClass => {}
        SzegoVerdict::OutOfClass(OutOfClassReason::Unbounded) => notes.push(
            "support is unbounded: coefficients and residual densities are not expected to converge; \
             deviations are replaced by the raw coefficients"
                .to_string(),
        ),
        SzegoVerdict::OutOfClass(OutOfClassReason::Gapped) => {
            notes.push("support is gapped: no limits exist and residual densities are unavailable".to_string())
        }
        SzegoVerdict::OutOfClass(OutOfClassReason::LogDivergent) => {
            notes.push("log integral of the mapped density diverges: no limits are reported".to_string())
        }
    }
    if q != 0.0 && q != 1.0 && conv.verdict.is_in_class() {
        notes.push("moment gaps need residual densities, which exist only for q = 0 and q = 1".to_string());
    }

    let mut residual = None;
    let mut residual_text = None;
    if !c.residual_orders.is_empty() {
        let mut orders = c.residual_orders.clone();
        orders.push(0);
        orders.sort_unstable();
        orders.dedup();
        let top = *orders.last().unwrap();
        let mapping = chaincast_core::Mapping::from_q(q)?;
        let fam = if top < rc.len() {
            ResidualFamily::with_coefficients(&j, mapping, rc.truncated(top + 1)?)?
        } else {
            ResidualFamily::new(&j, q, top)?
        };
        let (lo, hi) = grid_range(&fam, &j, &c.grid, &mut warnings)?;
        let p = c.grid.points;
        let omega: Vec<f64> = (0..p)
            .map(|i| if i + 1 == p { hi } else { lo + (hi - lo) * i as f64 / (p - 1) as f64 })
            .collect();
        let mut columns = Vec::with_capacity(orders.len());
        for &n in &orders {
            let col = omega.iter().map(|&w| fam.eval(n, w)).collect::<Result<Vec<f64>, _>>()?;
            columns.push(col);
        }
        residual_text = Some(output::residual_csv(&omega, &orders, &columns));
        residual = Some(ResidualSection { orders, grid_range: [lo, hi], points: p });
    }

    let report = Report {
        tool: Tool::default(),
        mapping_q: q,
        sites: c.sites,
        support: j.support().iter().map(|i| [i.lo, i.hi]).collect(),
        e5: chain.e5,
        szego: conv.verdict.as_str().to_string(),
        alpha_limit: conv.alpha_limit,
        beta_limit: conv.beta_limit,
        alpha: conv.alpha.clone(),
        beta: conv.beta.clone(),
        alpha_deviation: conv.alpha_deviation.clone(),
        beta_deviation: conv.beta_deviation.clone(),
        alpha_over_sqrt_beta: conv.ratio.clone(),
        terminal_moment_gap: conv.terminal_moment_gap.clone(),
        residual,
        warnings: warnings.clone(),
        notes,
    };

    fs::create_dir_all(out_dir).map_err(|e| CliError::Io { path: out_dir.to_path_buf(), source: e })?;
    let mut written = Vec::new();
    let mut put = |rel: &Path, text: &str| -> Result<(), CliError> {
        let path = out_dir.join(rel);
        fs::write(&path, text).map_err(|e| CliError::Io { path: path.clone(), source: e })?;
        written.push(path);
        Ok(())
    };
    put(&c.outputs.chain_csv, &output::chain_csv(&chain, j.support()))?;
    if let Some(t) = &residual_text {
        put(&c.outputs.residual_csv, t)?;
    }
    put(&c.outputs.report_json, &report.to_json())?;
    Ok(RunSummary { written, warnings, report })
}

fn grid_range(
    fam: &ResidualFamily,
    j: &SpectralDensity,
    spec: &GridSpec,
    warnings: &mut Vec<String>,
) -> Result<(f64, f64), CliError> {
    let (lo, mut hi) = fam.band();
    if !hi.is_finite() {
        hi = tail_cutoff(j, lo);
    }
    let Some([rlo, rhi]) = spec.range else { return Ok((lo, hi)) };
    let (clo, chi) = (rlo.max(lo), rhi.min(hi));
    if clo >= chi {
        return Err(ConfigError::new("grid.range", format!("no overlap with the usable range [{lo}, {hi}]")).into());
    }
    if clo != rlo || chi != rhi {
        warnings.push(format!("grid.range [{rlo}, {rhi}] clipped to [{clo}, {chi}]"));
    }
    Ok((clo, chi))
}

/// Frequency beyond the peak where `J` has dropped below `TAIL_DROP` of its
/// maximum.
fn tail_cutoff(j: &SpectralDensity, lo: f64) -> f64 {
    let scale = j.tail_scale();
    let mut w = lo.max(1e-3 * scale);
    let mut peak = 0.0f64;
    let mut prev = w;
    for _ in 0..2000 {
        let v = j.eval(w);
        peak = peak.max(v);
        if peak > 0.0 && v < TAIL_DROP * peak {
            break;
        }
        prev = w;
        w *= 1.05;
    }
    let (mut a, mut b) = (prev, w);
    for _ in 0..100 {
        let mid = 0.5 * (a + b);
        if j.eval(mid) < TAIL_DROP * peak {
            b = mid;
        } else {
            a = mid;
        }
    }
    b
}
