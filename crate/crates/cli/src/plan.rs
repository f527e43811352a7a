use std::fmt::Write;
use std::path::Path;

use serde::Serialize;
use visionfuse_core::fusion::{apply_pruning, budget_check, estimate_flops, BudgetVerdict, FusionConfig};
use visionfuse_core::{FlopsReport, TokenSequence};

use crate::error::{Classify, CmdResult};
use crate::io::{read_json, to_json};
use crate::{require_seed, Format};

fn load_config(path: &Path) -> CmdResult<FusionConfig> {
    let config: FusionConfig = read_json(path)?;
    config.validate().invalid_ctx(format!("config {}", path.display()))?;
    Ok(config)
}

#[derive(Serialize)]
struct Plan {
    sequence: TokenSequence,
    pruned: TokenSequence,
    budget: BudgetVerdict,
    pruned_budget: BudgetVerdict,
    flops: FlopsReport,
}

fn verdict_line(v: &BudgetVerdict) -> String {
    match *v {
        BudgetVerdict::Ok { fused_len, cap } => format!("ok ({fused_len} <= {cap})"),
        BudgetVerdict::OverBudget { fused_len, cap, overflow, suggested_drop, restorable } => {
            if restorable {
                format!("over budget ({fused_len} > {cap} by {overflow}); drop {suggested_drop} vision tokens")
            } else {
                format!("over budget ({fused_len} > {cap} by {overflow}); dropping all {suggested_drop} vision tokens is not enough")
            }
        }
    }
}

pub fn fuse_plan(path: &Path, seed: Option<u64>, format: Format) -> CmdResult {
    let mut config = load_config(path)?;
    if config.pruning.is_randomized() {
        config.pruning.seed = require_seed(seed, "for random-drop pruning");
    } else if let Some(s) = seed {
        config.pruning.seed = s;
    }
    let sequence = config.fused_sequence();
    let pruned = apply_pruning(&sequence, &config.pruning).invalid_ctx("pruning")?;
    let plan = Plan {
        budget: budget_check(&config, sequence.total_len),
        pruned_budget: budget_check(&config, pruned.total_len),
        flops: estimate_flops(&config, pruned.total_len),
        sequence,
        pruned,
    };

    let spans = plan.sequence.spans();
    match format {
        Format::Json => print!("{}", to_json(&plan)),
        Format::Csv => {
            let mut s = String::from("segment,start,end,len,kept\n");
            for ((src, start, end), kept) in spans.iter().zip(&plan.pruned.segments) {
                let _ = writeln!(s, "{},{start},{end},{},{}", src.name(), end - start, kept.len());
            }
            print!("{s}");
        }
        Format::Table => {
            let mut s = format!("{:<16} {:>8} {:>8} {:>8} {:>8}\n", "segment", "start", "end", "len", "kept");
            for ((src, start, end), kept) in spans.iter().zip(&plan.pruned.segments) {
                let _ = writeln!(s, "{:<16} {start:>8} {end:>8} {:>8} {:>8}", src.name(), end - start, kept.len());
            }
            let _ = writeln!(s, "fused length  {} -> {} after pruning", plan.sequence.total_len, plan.pruned.total_len);
            let _ = writeln!(s, "budget        {}", verdict_line(&plan.budget));
            let _ = writeln!(s, "after pruning {}", verdict_line(&plan.pruned_budget));
            let _ = writeln!(s, "total FLOPs   {}", plan.flops.total);
            print!("{s}");
        }
    }
    Ok(())
}

pub fn flops(path: &Path, format: Format) -> CmdResult {
    let config = load_config(path)?;
    // The drop count fixes the length; which tokens go does not matter here.
    let pruned = apply_pruning(&config.fused_sequence(), &config.pruning).invalid_ctx("pruning")?;
    let report = estimate_flops(&config, pruned.total_len);
    match format {
        Format::Json => print!("{}", to_json(&report)),
        Format::Csv => print!("{}", report.to_csv()),
        Format::Table => print!("{}", report.to_table()),
    }
    Ok(())
}
