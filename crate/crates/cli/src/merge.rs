use std::fmt::Write;
use std::path::{Path, PathBuf};

use visionfuse_core::merge::{
    compute_delta, compute_delta_partial, grid_search_par, merge_deltas, merge_report, DeltaSet, GridResult,
    MergeGrid, MergeRecipe,
};
use visionfuse_core::{validate_compatibility, ModelWeights};

use crate::error::{invalid, Classify, CmdResult, Failure};
use crate::io::{load_model, read_json, relative_to, save_model, to_json, write_text};
use crate::{require_seed, Format};

struct Loaded {
    recipe: MergeRecipe,
    base: ModelWeights,
    deltas: Vec<DeltaSet>,
    skipped: Vec<String>,
}

fn load_recipe(path: &Path, seed: Option<u64>) -> CmdResult<MergeRecipe> {
    let mut recipe: MergeRecipe = read_json(path)?;
    if recipe.method.is_randomized() {
        recipe.seed = require_seed(seed, &format!("for {} recipes", recipe.method));
    } else if let Some(s) = seed {
        recipe.seed = s;
    }
    recipe.validate().invalid_ctx(format!("recipe {}", path.display()))?;
    Ok(recipe)
}

fn load_sources(recipe_path: &Path, recipe: MergeRecipe, force: bool) -> CmdResult<Loaded> {
    let base = load_model(&relative_to(recipe_path, &recipe.base))?;
    let mut deltas = Vec::with_capacity(recipe.sources.len());
    let mut skipped = Vec::new();
    for source in &recipe.sources {
        let model = load_model(&relative_to(recipe_path, &source.model))?;
        if force {
            let (d, s) = compute_delta_partial(&model, &base, &source.label);
            if !s.is_empty() {
                log::warn!("{}: {} tensors skipped", source.label, s.len());
            }
            skipped.extend(s);
            deltas.push(d);
        } else {
            let d = compute_delta(&model, &base, &source.label)
                .invalid_ctx(format!("source {:?} (pass --force to skip mismatched tensors)", source.label))?;
            deltas.push(d);
        }
    }
    skipped.sort();
    skipped.dedup();
    Ok(Loaded { recipe, base, deltas, skipped })
}

fn report_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".report.json");
    PathBuf::from(name)
}

pub fn merge(recipe_path: &Path, out: &Path, seed: Option<u64>, force: bool, format: Format) -> CmdResult {
    let recipe = load_recipe(recipe_path, seed)?;
    let loaded = load_sources(recipe_path, recipe, force)?;
    let params = loaded.recipe.params();
    let merged = merge_deltas(&loaded.base, &loaded.deltas, &params).invalid_ctx("merge")?;
    save_model(&merged, out)?;

    let labels = loaded.recipe.sources.iter().map(|s| s.label.clone()).collect();
    let report = merge_report(&params, labels, &loaded.base, &merged, loaded.skipped);
    let sidecar = report_path(out);
    write_text(&sidecar, &to_json(&report))?;

    match format {
        Format::Json => print!("{}", to_json(&report)),
        Format::Table | Format::Csv => {
            let mut s = String::new();
            let _ = writeln!(s, "method      {params}");
            let _ = writeln!(s, "sources     {}", report.sources.join(", "));
            let _ = writeln!(s, "base        {}", report.base_fingerprint);
            let _ = writeln!(s, "output      {} -> {}", report.output_fingerprint, out.display());
            let _ = writeln!(s, "report      {}", sidecar.display());
            if !report.skipped_tensors.is_empty() {
                let _ = writeln!(s, "skipped     {}", report.skipped_tensors.join(", "));
            }
            print!("{s}");
        }
    }
    Ok(())
}

pub fn delta(model: &Path, base: &Path, out: &Path, label: Option<String>) -> CmdResult {
    let label = label.unwrap_or_else(|| {
        model.file_stem().map_or_else(|| "model".to_string(), |s| s.to_string_lossy().into_owned())
    });
    let m = load_model(model)?;
    let b = load_model(base)?;
    let d = compute_delta(&m, &b, &label).invalid_ctx("delta")?;
    let weights = d.to_weights().invalid_ctx("delta")?;
    save_model(&weights, out)?;
    println!("{label}: {} tensors, base {:016x} -> {}", d.len(), d.base_fingerprint(), out.display());
    Ok(())
}

pub fn validate(a: &Path, b: &Path, format: Format) -> CmdResult {
    let ma = load_model(a)?;
    let mb = load_model(b)?;
    let report = validate_compatibility(&ma, &mb);
    match format {
        Format::Json => print!("{}", to_json(&report)),
        Format::Table | Format::Csv => println!("{report}"),
    }
    if report.is_compatible() {
        Ok(())
    } else {
        Err(invalid(format!("{} and {} are incompatible", a.display(), b.display())))
    }
}

/// Negative L2 distance between two checkpoints with identical structure.
fn neg_distance(model: &ModelWeights, target: &ModelWeights) -> Result<f64, String> {
    let mut sum = 0.0f64;
    for (name, t) in model.iter() {
        let other = target.get(name).ok_or_else(|| format!("target lacks {name}"))?;
        sum += t
            .values()
            .iter()
            .zip(other.values())
            .map(|(&x, &y)| (f64::from(x) - f64::from(y)).powi(2))
            .sum::<f64>();
    }
    Ok(-sum.sqrt())
}

fn results_csv(results: &[GridResult]) -> String {
    let mut s = String::from("rank,method,lambda,alpha,retain_ratio,drop_rate,t,score\n");
    for (i, r) in results.iter().enumerate() {
        let p = &r.params;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            i + 1,
            p.method,
            p.lambda,
            p.alpha,
            p.retain_ratio,
            p.drop_rate,
            p.t,
            r.score
        );
    }
    s
}

pub fn grid_search(
    recipe_path: &Path,
    target_path: &Path,
    grid_path: Option<&Path>,
    seed: Option<u64>,
    format: Format,
) -> CmdResult {
    let recipe = load_recipe(recipe_path, seed)?;
    let grid = match grid_path {
        Some(p) => read_json::<MergeGrid>(p)?,
        None => MergeGrid::searched_ranges(recipe.method),
    };
    let loaded = load_sources(recipe_path, recipe, false)?;
    let target = load_model(target_path)?;
    let compat = validate_compatibility(&loaded.base, &target);
    if !compat.is_compatible() {
        return Err(invalid(format!("target does not match the base: {compat}")));
    }
    let results = grid_search_par(&loaded.base, &loaded.deltas, &grid, &loaded.recipe.params(), |m| {
        neg_distance(m, &target)
    })
    .map_err(|e| Failure::Invalid(anyhow::Error::new(e).context("grid search")))?;

    match format {
        Format::Json => print!("{}", to_json(&results)),
        Format::Csv => print!("{}", results_csv(&results)),
        Format::Table => {
            let mut s = format!("{:>4}  {:<48} {:>14}\n", "rank", "params", "score");
            for (i, r) in results.iter().enumerate() {
                let _ = writeln!(s, "{:>4}  {:<48} {:>14.6e}", i + 1, r.params.to_string(), r.score);
            }
            print!("{s}");
        }
    }
    Ok(())
}
