use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use seeksolve::eval::{self, RunConfig};
use seeksolve::gateway::BackendSpec;
use seeksolve::parse::parse_seek;
use seeksolve::prompt::{
    build_seek_prompt, build_solve_prompt, build_tqa_prompt, DemoCotKind, Demonstration, Materials, Prompt,
    SolveVariant,
};
use seeksolve::table::interchange::read_table;
use seeksolve::tree::{build_tree, linearize, merged_tuple_list, render_tuple, Axis};

#[derive(Parser)]
#[command(
    name = "seeksolve",
    version,
    about = "Two-stage question answering over hierarchical tables"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a dataset through the pipeline and write report.json and trace.jsonl.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Use an OpenAI-compatible endpoint for both stages.
        #[arg(long)]
        endpoint: Option<String>,
        /// Model name sent to the endpoint.
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        run_dir: Option<PathBuf>,
        #[arg(long)]
        parallelism: Option<usize>,
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Re-score an existing trace and rewrite its report.
    Eval {
        #[arg(long)]
        run_dir: PathBuf,
    },
    /// Print a prompt without calling any backend.
    RenderPrompt {
        /// Table in the JSON interchange format.
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        question: String,
        /// Demonstration fixture; the built-in hierarchical one by default.
        #[arg(long)]
        demo: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "seek")]
        kind: PromptKind,
        /// Solve variant as table/info/cot.
        #[arg(long, default_value = "full_table/full_list/consecutive")]
        variant: SolveVariant,
        /// File holding a Seek response, needed by most Solve variants.
        #[arg(long)]
        seek_response: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "ss-cot")]
        demo_cot: DemoCot,
    },
    /// Print a header tree and its tuples.
    BuildTree {
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        axis: Axis,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PromptKind {
    Seek,
    Solve,
    Tqa,
}

#[derive(Clone, Copy, ValueEnum)]
enum DemoCot {
    Vanilla,
    SsCot,
}

impl From<DemoCot> for DemoCotKind {
    fn from(d: DemoCot) -> Self {
        match d {
            DemoCot::Vanilla => DemoCotKind::Vanilla,
            DemoCot::SsCot => DemoCotKind::SsCot,
        }
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Run {
            config,
            endpoint,
            model,
            run_dir,
            parallelism,
            limit,
        } => {
            let mut cfg = RunConfig::from_file(&config)?;
            apply_overrides(&mut cfg, endpoint, model);
            if let Some(dir) = run_dir {
                cfg.run_dir = dir;
            }
            if let Some(p) = parallelism {
                cfg.parallelism = p;
            }
            if limit.is_some() {
                cfg.limit = limit;
            }
            let (_, summary) = eval::run(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
        Command::Eval { run_dir } => {
            let summary = eval::rescore_trace(&run_dir)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
        Command::RenderPrompt {
            table,
            question,
            demo,
            kind,
            variant,
            seek_response,
            demo_cot,
        } => {
            let prompt = render_prompt(
                &table,
                &question,
                demo.as_deref(),
                kind,
                variant,
                seek_response.as_deref(),
                demo_cot,
            )?;
            println!("[system]\n{}\n\n[user]\n{}", prompt.system_text, prompt.user_text);
        }
        Command::BuildTree { table, axis } => {
            let table = read_table(&table)?;
            let tree = build_tree(&table, axis)?;
            println!("{tree}");
            for t in linearize(&tree) {
                println!("{}", render_tuple(&t));
            }
        }
    }
    Ok(())
}

fn apply_overrides(cfg: &mut RunConfig, endpoint: Option<String>, model: Option<String>) {
    if let Some(endpoint) = endpoint {
        let model_name = model.unwrap_or_else(|| cfg.stage2_backend.model_name().to_string());
        cfg.stage2_backend = BackendSpec::HttpOpenaiCompatible { endpoint, model_name };
        cfg.stage1_backend = None;
        return;
    }
    if let Some(model) = model {
        for spec in [cfg.stage1_backend.as_mut(), Some(&mut cfg.stage2_backend)]
            .into_iter()
            .flatten()
        {
            match spec {
                BackendSpec::HttpOpenaiCompatible { model_name, .. } | BackendSpec::ScriptedMock { model_name, .. } => {
                    *model_name = model.clone()
                }
            }
        }
    }
}

fn render_prompt(
    table_path: &Path,
    question: &str,
    demo: Option<&Path>,
    kind: PromptKind,
    variant: SolveVariant,
    seek_response: Option<&Path>,
    demo_cot: DemoCot,
) -> Result<Prompt> {
    let table = read_table(table_path)?;
    let demo = match demo {
        Some(path) => Demonstration::from_file(path)?,
        None => Demonstration::from_json(eval::DEMO_HITAB)?,
    }
    .prepare()?;
    let rows = build_tree(&table, Axis::Row)?;
    let cols = build_tree(&table, Axis::Column)?;
    let tuples = merged_tuple_list(&rows, &cols);
    let prompt = match kind {
        PromptKind::Seek => build_seek_prompt(question, table.title(), &tuples, &demo)?,
        PromptKind::Tqa => build_tqa_prompt(question, &table, &tuples, &demo, demo_cot.into())?,
        PromptKind::Solve => {
            let seek = match seek_response {
                Some(path) => {
                    let text = std::fs::read_to_string(path).with_context(|| path.display().to_string())?;
                    Some(parse_seek(&text, &tuples)?)
                }
                None if variant.needs_seek_result() || variant.cot_slot == seeksolve::prompt::CotSlot::Consecutive => {
                    bail!("variant {variant} needs --seek-response")
                }
                None => None,
            };
            let materials = Materials::derive(&table, seek.as_ref().map(|s| &s.result))?;
            build_solve_prompt(question, &table, variant, seek.as_ref(), &materials, &demo)?
        }
    };
    Ok(prompt)
}
