use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, bail, Context};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::format::{fmt_num, fmt_opt};
use super::{env_seed, DmeArgs};
use crate::accountant::NormMode;
use crate::dme::{run_dme, DmeConfig, DmeResult};

/// Fixed CSV column order.
pub const CSV_COLUMNS: [&str; 17] = [
    "eps",
    "delta",
    "B",
    "k",
    "norm_mode",
    "n",
    "d",
    "c",
    "gamma",
    "sigma",
    "mse_ddgauss_mean",
    "mse_ddgauss_ci",
    "mse_baseline_mean",
    "mse_baseline_ci",
    "wraparound_rate",
    "theory_bound",
    "status",
];

/// The configuration file schema. `n`, `d` and `c` are required (from the
/// file or from flags); everything else falls back to [`DmeConfig::default`].
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub n: Option<usize>,
    pub d: Option<usize>,
    pub c: Option<f64>,
    pub eps_targets: Option<Vec<f64>>,
    pub delta: Option<f64>,
    pub bit_widths: Option<Vec<u32>>,
    pub k_values: Option<Vec<f64>>,
    pub norm_mode: Option<NormMode>,
    pub trials: Option<usize>,
    pub beta: Option<f64>,
    pub master_seed: Option<u64>,
}

/// Sidecar describing how a CSV was produced.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub master_seed: u64,
    pub config: DmeConfig,
    pub baseline_calibration: String,
    pub started_unix_seconds: u64,
    pub elapsed_seconds: f64,
    pub csv: String,
    pub csv_sha256: String,
}

pub fn manifest_path(csv: &Path) -> PathBuf {
    let mut name = csv.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

fn require<T>(v: Option<T>, name: &str) -> anyhow::Result<T> {
    v.ok_or_else(|| anyhow!("missing required field `{name}`"))
}

/// Merges flags over a file over the defaults.
pub fn resolve_config(args: &DmeArgs) -> anyhow::Result<DmeConfig> {
    let base = if let Some(path) = &args.manifest {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let m: RunManifest =
            serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))?;
        m.config
    } else {
        let file = match &args.config {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                toml::from_str::<ConfigFile>(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            None => ConfigFile::default(),
        };
        let def = DmeConfig::default();
        DmeConfig {
            n: require(args.n.or(file.n), "n")?,
            d: require(args.d.or(file.d), "d")?,
            c: require(args.c.or(file.c), "c")?,
            eps_targets: file.eps_targets.unwrap_or(def.eps_targets),
            delta: file.delta.unwrap_or(def.delta),
            bit_widths: file.bit_widths.unwrap_or(def.bit_widths),
            k_values: file.k_values.unwrap_or(def.k_values),
            norm_mode: file.norm_mode.unwrap_or(def.norm_mode),
            trials: file.trials.unwrap_or(def.trials),
            beta: file.beta.unwrap_or(def.beta),
            master_seed: match file.master_seed {
                Some(s) => s,
                None => env_seed()?.unwrap_or(def.master_seed),
            },
        }
    };
    let mut cfg = base;
    if let Some(v) = args.n {
        cfg.n = v;
    }
    if let Some(v) = args.d {
        cfg.d = v;
    }
    if let Some(v) = args.c {
        cfg.c = v;
    }
    if let Some(v) = &args.eps {
        cfg.eps_targets = v.clone();
    }
    if let Some(v) = args.delta {
        cfg.delta = v;
    }
    if let Some(v) = &args.bits {
        cfg.bit_widths = v.clone();
    }
    if let Some(v) = &args.k {
        cfg.k_values = v.clone();
    }
    if let Some(v) = &args.norm_mode {
        cfg.norm_mode = v.parse()?;
    }
    if let Some(v) = args.trials {
        cfg.trials = v;
    }
    if let Some(v) = args.beta {
        cfg.beta = v;
    }
    if let Some(v) = args.seed {
        cfg.master_seed = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Renders the result rows as CSV bytes.
pub fn to_csv(rows: &[DmeResult]) -> anyhow::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_COLUMNS)?;
    for r in rows {
        w.write_record([
            fmt_num(r.eps),
            fmt_num(r.delta),
            r.bit_width.to_string(),
            fmt_num(r.k),
            r.norm_mode.as_str().to_string(),
            r.n.to_string(),
            r.d.to_string(),
            fmt_num(r.c),
            fmt_opt(r.gamma),
            fmt_opt(r.sigma),
            fmt_opt(r.mse_ddgauss.map(|m| m.mean)),
            fmt_opt(r.mse_ddgauss.and_then(|m| m.ci)),
            fmt_opt(r.mse_baseline.map(|m| m.mean)),
            fmt_opt(r.mse_baseline.and_then(|m| m.ci)),
            fmt_opt(r.wraparound_rate),
            fmt_opt(r.theory_bound),
            r.status.as_str().to_string(),
        ])?;
    }
    w.into_inner().map_err(|e| anyhow!("flushing CSV: {e}"))
}

pub fn cmd_dme(args: &DmeArgs) -> anyhow::Result<()> {
    let cfg = resolve_config(args)?;
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let clock = Instant::now();
    let rows = run_dme(&cfg)?;
    let bytes = to_csv(&rows)?;
    fs::write(&args.out, &bytes).with_context(|| format!("writing {}", args.out.display()))?;

    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        master_seed: cfg.master_seed,
        config: cfg,
        baseline_calibration: "central Gaussian with sigma = c/eps (same zCDP rho as the mechanism)".into(),
        started_unix_seconds: started,
        elapsed_seconds: clock.elapsed().as_secs_f64(),
        csv: args
            .out
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
        csv_sha256: Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect(),
    };
    let mpath = manifest_path(&args.out);
    fs::write(&mpath, serde_json::to_string_pretty(&manifest)?)
        .with_context(|| format!("writing {}", mpath.display()))?;

    if args.json {
        println!("{}", serde_json::to_string_pretty(&rows)?);
    } else {
        let failed = rows.iter().filter(|r| r.status != crate::dme::PointStatus::Ok).count();
        println!(
            "wrote {} rows to {} ({} not ok); manifest {}",
            rows.len(),
            args.out.display(),
            failed,
            mpath.display()
        );
    }
    if rows.iter().any(|r| r.status == crate::dme::PointStatus::Failed) {
        bail!("some sweep points failed; see the status column");
    }
    Ok(())
}
