use std::path::{Path, PathBuf};

use anyhow::Result;
use cardiorecon::reconnet::{report_complexity, Family, ModelConfig, Module, Tier};
use serde_json::json;

use crate::util::{create_dir, provenance, write_snapshot};

pub const HEADER: &str = "family,tier,views,params,macs,decoder_macs,refiner_macs";

#[derive(clap::Args)]
pub struct Args {
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
    views: Vec<usize>,
    #[arg(long, default_value_t = 64)]
    resolution: usize,
    /// Restrict to one family.
    #[arg(long)]
    family: Option<Family>,
    /// Restrict to one tier.
    #[arg(long)]
    tier: Option<Tier>,
    /// Only echoed; the counts do not depend on it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Defaults to `<out-root>/complexity.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(a: Args, root: &Path) -> Result<()> {
    let out = a.out.unwrap_or_else(|| root.join("complexity.csv"));
    let families = a.family.map_or(vec![Family::Efficient, Family::Baseline], |f| vec![f]);
    let tiers = a.tier.map_or(vec![Tier::Fast, Tier::Accurate], |t| vec![t]);
    let mut csv = provenance(a.seed) + HEADER + "\n";
    for &family in &families {
        for &tier in &tiers {
            for &v in &a.views {
                let rep = report_complexity(&ModelConfig::preset(family, tier, v, a.resolution)?)?;
                let (dec, refi) = (rep.module(Module::Decoder).macs, rep.module(Module::Refiner).macs);
                csv.push_str(&format!("{family},{tier},{v},{},{},{dec},{refi}\n", rep.total.params, rep.total.macs));
            }
        }
    }
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    std::fs::write(&out, &csv)?;
    let dir = out.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    write_snapshot(dir, "complexity", &json!({ "seed": a.seed, "views": a.views, "resolution": a.resolution }))?;
    print!("{csv}");
    Ok(())
}
