//! Cross-run comparison tables.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

/// Final score and identity of one finished run directory.
#[derive(Debug, Clone, PartialEq)]
pub struct RunEntry {
    pub scheme: String,
    pub env: String,
    pub master_seed: u64,
    pub final_score: f64,
}

/// Load a run directory written by the runner. The final score is
/// recomputed from eval.csv so the table never trusts a stale meta file.
pub fn load_run_dir(dir: &Path) -> Result<RunEntry> {
    let meta_path = dir.join("run_meta.json");
    let meta_text = std::fs::read_to_string(&meta_path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", meta_path.display())))?;
    let meta: serde_json::Value = serde_json::from_str(&meta_text)
        .map_err(|e| Error::Config(format!("bad run_meta.json in {}: {e}", dir.display())))?;
    let eval_path = dir.join("eval.csv");
    let eval_text = std::fs::read_to_string(&eval_path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", eval_path.display())))?;
    let maxima = parse_max_column(&eval_text)?;
    let tail = maxima.len().min(10);
    if tail == 0 {
        return Err(Error::Config(format!("{} has no evaluation rows", dir.display())));
    }
    let final_score = maxima[maxima.len() - tail..].iter().sum::<f64>() / tail as f64;
    Ok(RunEntry {
        scheme: meta["scheme"].as_str().unwrap_or("?").to_string(),
        env: meta["env"].as_str().unwrap_or("?").to_string(),
        master_seed: meta["master_seed"].as_u64().unwrap_or(0),
        final_score,
    })
}

fn parse_max_column(csv: &str) -> Result<Vec<f64>> {
    let mut lines = csv.lines();
    let header = lines.next().ok_or_else(|| Error::Config("empty eval.csv".into()))?;
    let col = header
        .split(',')
        .position(|c| c == "max_return")
        .ok_or_else(|| Error::Config("eval.csv lacks a max_return column".into()))?;
    lines
        .filter(|l| !l.is_empty())
        .map(|line| {
            line.split(',')
                .nth(col)
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| Error::Config("malformed eval.csv row".into()))
        })
        .collect()
}

/// Group runs by (scheme, env) and produce mean and standard deviation of
/// the per-run final scores, as an aligned text table and a CSV.
pub fn comparison_table(entries: &[RunEntry]) -> (String, String) {
    let mut groups: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
    for e in entries {
        groups
            .entry((e.scheme.clone(), e.env.clone()))
            .or_default()
            .push(e.final_score);
    }
    let mut text = format!(
        "{:<12} {:<34} {:>5} {:>14} {:>14}\n",
        "scheme", "env", "runs", "mean", "std"
    );
    let mut csv = String::from("scheme,env,runs,mean,std\n");
    for ((scheme, env), scores) in groups {
        let n = scores.len() as f64;
        let mean = scores.iter().sum::<f64>() / n;
        let var = scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n;
        let std = var.sqrt();
        text.push_str(&format!(
            "{scheme:<12} {env:<34} {:>5} {mean:>14.4} {std:>14.4}\n",
            scores.len()
        ));
        csv.push_str(&format!("{scheme},{env},{},{mean},{std}\n", scores.len()));
    }
    (text, csv)
}

/// `summarize` entry point: read run directories, write the comparison
/// files, and return the rendered text table.
pub fn export_summary(dirs: &[std::path::PathBuf], out: Option<&Path>) -> Result<String> {
    let entries: Vec<RunEntry> = dirs
        .iter()
        .map(|d| load_run_dir(d))
        .collect::<Result<_>>()?;
    let (text, csv) = comparison_table(&entries);
    if let Some(out) = out {
        std::fs::write(out, &text)?;
        std::fs::write(out.with_extension("csv"), &csv)?;
    }
    Ok(text)
}
