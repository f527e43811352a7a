use std::fmt::Write;
use std::path::Path;

use serde::Serialize;
use visionfuse_core::analysis::average_attention;
use visionfuse_core::rng::SplitMix64;
use visionfuse_core::toy::{build_toy_family, run_pipeline, FlopsComparison, Matrix, ToyConfig};
use visionfuse_core::MergeRecipe;

use crate::error::{Classify, CmdResult};
use crate::io::{read_json, to_json, write_text};
use crate::Format;

const DEFAULT_TEXT_LEN: usize = 4;

#[derive(Serialize)]
struct Demo {
    seed: u64,
    recipe: String,
    text: Vec<u32>,
    prediction: Vec<u32>,
    flops: FlopsComparison,
    vision_scores: Vec<f64>,
}

fn attention_csv(m: &Matrix) -> String {
    let mut s = String::from("text_pos,vision_pos,attention\n");
    for r in 0..m.rows {
        for (c, v) in m.row(r).iter().enumerate() {
            let _ = writeln!(s, "{r},{c},{v}");
        }
    }
    s
}

pub fn toy_demo(
    config_path: &Path,
    recipe_path: &Path,
    seed: u64,
    text: Option<Vec<u32>>,
    attention_out: Option<&Path>,
    format: Format,
) -> CmdResult {
    let config: ToyConfig = read_json(config_path)?;
    config.validate().invalid_ctx(format!("config {}", config_path.display()))?;
    let mut recipe: MergeRecipe = read_json(recipe_path)?;
    recipe.seed = seed;
    recipe.validate().invalid_ctx(format!("recipe {}", recipe_path.display()))?;

    let family = build_toy_family(&config, config.encoders.len(), seed).invalid_ctx("building toy family")?;
    let mut rng = SplitMix64::for_key(seed, &["image"]);
    let image: Vec<f32> = (0..config.image_dim).map(|_| rng.uniform(-1.0, 1.0) as f32).collect();
    let text = text.unwrap_or_else(|| {
        let mut rng = SplitMix64::for_key(seed, &["text"]);
        (0..DEFAULT_TEXT_LEN).map(|_| rng.below(config.vocab_size as u64) as u32).collect()
    });

    let out = run_pipeline(&family, &recipe, &image, &text).invalid_ctx("pipeline")?;
    let scores = average_attention(&out.attention, "merged").invalid_ctx("attention")?;
    let demo = Demo {
        seed,
        recipe: recipe.params().to_string(),
        text,
        prediction: out.prediction.clone(),
        flops: out.flops_comparison(),
        vision_scores: scores.scores().to_vec(),
    };
    let csv = attention_csv(&out.attention.averaged);
    if let Some(path) = attention_out {
        write_text(path, &csv)?;
    }

    match format {
        Format::Json => print!("{}", to_json(&demo)),
        Format::Csv => print!("{csv}"),
        Format::Table => {
            let join = |v: &[u32]| v.iter().map(u32::to_string).collect::<Vec<_>>().join(" ");
            let mut s = String::new();
            let _ = writeln!(s, "recipe      {}", demo.recipe);
            let _ = writeln!(s, "text        {}", join(&demo.text));
            let _ = writeln!(s, "prediction  {}", join(&demo.prediction));
            for (src, start, end) in out.sequence.spans() {
                let mass = if src.is_text() { None } else { Some(out.attention.mass(start, end)) };
                match mass {
                    Some(m) => {
                        let _ = writeln!(s, "segment     {:<8} [{start}, {end})  attention mass {m:.6}", src.name());
                    }
                    None => {
                        let _ = writeln!(s, "segment     {:<8} [{start}, {end})", src.name());
                    }
                }
            }
            let f = demo.flops;
            let _ = writeln!(
                s,
                "flops       measured {} estimated {} (relative error {:.2e})",
                f.measured, f.estimated, f.relative_error
            );
            if attention_out.is_none() {
                let _ = write!(s, "\n{csv}");
            }
            print!("{s}");
        }
    }
    Ok(())
}
