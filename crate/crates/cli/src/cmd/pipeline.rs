use std::collections::BTreeSet;
use std::path::PathBuf;

use assembly_core::graph::PartId;
use assembly_core::item::FurnitureItem;
use assembly_vlm::{
    plan_from_manual, write_transcript, EndpointConfig, HttpClient, ManualDocument, MockClient,
    PipelineOptions, PipelineOutput, ReplayClient, VlmClient,
};
use serde::Serialize;

use crate::output::{print_json, usage, Ctx, OrUsage};

#[derive(clap::Args)]
pub struct Args {
    /// Item file with scene image and manual pages.
    item: PathBuf,
    /// Live endpoint settings (TOML); the API key comes from the environment.
    #[arg(long, group = "source")]
    endpoint_config: Option<PathBuf>,
    /// Replay a recorded transcript instead of calling a model.
    #[arg(long, group = "source")]
    transcript: Option<PathBuf>,
    /// Canned responses per stage (JSON), for offline runs.
    #[arg(long, group = "source")]
    mock: Option<PathBuf>,
    /// Independent repeats; defaults to the number recorded when replaying,
    /// otherwise 1.
    #[arg(long)]
    repeats: Option<usize>,
    /// Accept replayed responses even when the request differs.
    #[arg(long)]
    lenient: bool,
    /// Write the transcript of this run (JSON lines plus a blob directory).
    #[arg(long)]
    record: Option<PathBuf>,
    /// Write the resulting graph file here as well as to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct RunLine {
    run: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    canonical: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Serialize)]
struct GraphFile {
    item: String,
    model: String,
    /// Selected graph as a canonical nested list.
    tree: String,
    equivalences: Vec<(PartId, PartId)>,
    selected_run: usize,
    votes: usize,
    repeats: usize,
    /// Canonical form of every successful run, in run order.
    candidates: Vec<String>,
    runs: Vec<RunLine>,
}

fn graph_file(item: String, model: &str, out: &PipelineOutput) -> GraphFile {
    let sel = out.selected_run();
    GraphFile {
        item,
        model: model.to_string(),
        tree: sel.canonical.clone(),
        equivalences: out.equivalences.clone(),
        selected_run: out.selected,
        votes: out.votes,
        repeats: out.runs.len(),
        candidates: out
            .runs
            .iter()
            .filter_map(|r| r.as_ref().ok())
            .map(|r| r.canonical.clone())
            .collect(),
        runs: out
            .runs
            .iter()
            .enumerate()
            .map(|(i, r)| match r {
                Ok(o) => RunLine {
                    run: i,
                    canonical: Some(o.canonical.clone()),
                    error: None,
                },
                Err(e) => RunLine {
                    run: i,
                    canonical: None,
                    error: Some(e.to_string()),
                },
            })
            .collect(),
    }
}

pub fn run(ctx: &Ctx, args: Args) -> anyhow::Result<u8> {
    let item =
        FurnitureItem::load(&args.item).or_usage(format!("cannot load {}", args.item.display()))?;
    let doc = ManualDocument::from_item(&item).or_usage(format!("{}", args.item.display()))?;
    let mut temperature = 0.0;
    let mut recorded_runs = None;
    let client: Box<dyn VlmClient> = match (&args.endpoint_config, &args.transcript, &args.mock) {
        (Some(cfg), None, None) => {
            let config = EndpointConfig::load(cfg).map_err(usage)?;
            temperature = config.temperature;
            Box::new(HttpClient::new(config).map_err(usage)?)
        }
        (None, Some(t), None) => {
            let c = ReplayClient::open(t, !args.lenient).map_err(usage)?;
            recorded_runs = Some(c.runs());
            Box::new(c)
        }
        (None, None, Some(m)) => {
            let text =
                std::fs::read_to_string(m).or_usage(format!("cannot read {}", m.display()))?;
            Box::new(MockClient::from_json(&text).map_err(usage)?)
        }
        _ => {
            return Err(usage(
                "give one of --endpoint-config, --transcript or --mock",
            ))
        }
    };
    let repeats = args.repeats.or(recorded_runs).unwrap_or(1);
    if repeats == 0 {
        return Err(usage("--repeats must be at least 1"));
    }
    let parts: BTreeSet<PartId> = item.item.part_ids();
    let opts = PipelineOptions {
        repeats,
        temperature,
        parts: Some(parts),
    };
    let result = plan_from_manual(&doc, client.as_ref(), &opts);
    let out = match result {
        Ok(o) => o,
        Err(e) => {
            eprintln!("pipeline failed: {e}");
            return Ok(1);
        }
    };
    if let Some(path) = &args.record {
        write_transcript(path, &out.transcript, &PipelineOutput::images(&doc))
            .map_err(|e| anyhow::anyhow!("cannot write transcript: {e}"))?;
    }
    let id = item.item.id.clone().unwrap_or_else(|| {
        args.item
            .parent()
            .and_then(|p| p.file_name())
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    let file = graph_file(id, client.model(), &out);
    eprintln!(
        "selected run {} ({} of {} runs agree)",
        file.selected_run, file.votes, file.repeats
    );
    for r in file.runs.iter().filter(|r| r.error.is_some()) {
        eprintln!(
            "run {} failed: {}",
            r.run,
            r.error.as_deref().unwrap_or_default()
        );
    }
    let text = serde_json::to_string_pretty(&file).expect("graph file serializes");
    if let Some(path) = &args.out {
        std::fs::write(path, format!("{text}\n"))
            .map_err(|e| anyhow::anyhow!("cannot write {}: {e}", path.display()))?;
    }
    if ctx.json {
        print_json(&file);
    } else {
        println!("{}", file.tree);
        if !file.equivalences.is_empty() {
            let eq: Vec<String> = file
                .equivalences
                .iter()
                .map(|(a, b)| format!("{a}={b}"))
                .collect();
            println!("equivalent: {}", eq.join(", "));
        }
    }
    Ok(0)
}
