//! Manual + scene to hierarchical assembly graph, prompts 1 through 4.

use std::collections::{BTreeMap, BTreeSet};

use assembly_core::graph::{validate, AssemblyGraph, PartId};
use serde::Serialize;

use crate::client::{ClientError, VlmClient};
use crate::parse::{
    derive_equivalences, parse_step_plan, parse_tree_response, parse_triplets, PartTriplet,
    PlanParseError, StepAssignment, TreeParseError, TripletError,
};
use crate::prompts::{render_prompt, Bindings, MissingBinding};
use crate::request::{ImageRef, ManualDocument, Stage, VlmRequest};
use crate::transcript::TranscriptRecord;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StageErrorKind {
    #[error(transparent)]
    Prompt(#[from] MissingBinding),
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error(transparent)]
    Triplets(#[from] TripletError),
    #[error(transparent)]
    Plan(#[from] PlanParseError),
    #[error(transparent)]
    Tree(#[from] TreeParseError),
    #[error("graph is invalid: {}", .0.join("; "))]
    InvalidGraph(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("run {run}, stage {stage}: {kind}")]
pub struct PipelineError {
    pub run: usize,
    pub stage: Stage,
    pub kind: StageErrorKind,
}

#[derive(Debug, Clone, Default)]
pub struct PipelineOptions {
    /// Independent repeats of the whole pipeline.
    pub repeats: usize,
    pub temperature: f64,
    /// Scene labels the final tree must cover exactly.
    pub parts: Option<BTreeSet<PartId>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunOutput {
    pub run: usize,
    pub part_list: Vec<PartTriplet>,
    pub part_roles: Vec<PartTriplet>,
    pub steps: Vec<StepAssignment>,
    /// Nested list as extracted from the last response.
    pub tree: String,
    pub equivalences: Vec<(PartId, PartId)>,
    #[serde(skip)]
    pub graph: AssemblyGraph,
    pub canonical: String,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub runs: Vec<Result<RunOutput, PipelineError>>,
    /// Index into `runs` of the selected graph.
    pub selected: usize,
    pub graph: AssemblyGraph,
    pub equivalences: Vec<(PartId, PartId)>,
    /// Requests and responses of all runs, ordered by run then stage.
    pub transcript: Vec<TranscriptRecord>,
    /// How many successful runs produced the selected canonical form.
    pub votes: usize,
}

impl PipelineOutput {
    pub fn selected_run(&self) -> &RunOutput {
        self.runs[self.selected]
            .as_ref()
            .expect("selected run succeeded")
    }

    /// Every image referenced by the transcript, for the blob store.
    pub fn images(doc: &ManualDocument) -> Vec<ImageRef> {
        let mut v = vec![doc.scene.clone(), doc.cover.clone()];
        v.extend(doc.pages.iter().cloned());
        v.extend(doc.cropped.iter().cloned());
        v
    }
}

struct Runner<'a> {
    client: &'a dyn VlmClient,
    run: usize,
    temperature: f64,
    log: Vec<TranscriptRecord>,
}

impl Runner<'_> {
    fn ask(&mut self, stage: Stage, b: &Bindings) -> Result<String, PipelineError> {
        let err = |kind: StageErrorKind| PipelineError {
            run: self.run,
            stage,
            kind,
        };
        let mut req: VlmRequest =
            render_prompt(stage, b, self.client.model()).map_err(|e| err(e.into()))?;
        req.run = self.run;
        req.temperature = self.temperature;
        let resp = self.client.complete(&req).map_err(|e| err(e.into()))?;
        let text = resp.text.clone();
        self.log.push(TranscriptRecord::new(&req, resp));
        Ok(text)
    }
}

fn tagged<E: Into<StageErrorKind>>(run: usize, stage: Stage) -> impl Fn(E) -> PipelineError {
    move |e| PipelineError {
        run,
        stage,
        kind: e.into(),
    }
}

fn run_once(
    doc: &ManualDocument,
    client: &dyn VlmClient,
    run: usize,
    opts: &PipelineOptions,
) -> (Result<RunOutput, PipelineError>, Vec<TranscriptRecord>) {
    let mut r = Runner {
        client,
        run,
        temperature: opts.temperature,
        log: Vec::new(),
    };
    let out = (|| {
        let mut b = Bindings {
            scene: Some(doc.scene.clone()),
            cover: Some(doc.cover.clone()),
            ..Bindings::default()
        };
        let text = r.ask(Stage::PartList, &b)?;
        let part_list = parse_triplets(&text).map_err(tagged(run, Stage::PartList))?;

        b.part_list = Some(serde_json::to_string_pretty(&part_list).expect("triplets serialize"));
        b.pages = doc.pages.clone();
        let text = r.ask(Stage::PartRoles, &b)?;
        let part_roles = parse_triplets(&text).map_err(tagged(run, Stage::PartRoles))?;

        b.part_roles = Some(serde_json::to_string_pretty(&part_roles).expect("triplets serialize"));
        b.pages = doc.plan_pages();
        let plan = r.ask(Stage::Plan, &b)?;
        let steps = parse_step_plan(&plan).map_err(tagged(run, Stage::Plan))?;

        b.plan = Some(plan);
        let text = r.ask(Stage::Tree, &b)?;
        let tree_text = parse_tree_response(&text).map_err(tagged(run, Stage::Tree))?;
        let tree = assembly_core::graph::parse_tree(&tree_text).map_err(|e| PipelineError {
            run,
            stage: Stage::Tree,
            kind: StageErrorKind::Tree(TreeParseError::Invalid {
                text: tree_text.clone(),
                reason: e.to_string(),
            }),
        })?;
        let leaves: BTreeSet<PartId> = tree.leaves().into_iter().collect();
        let equivalences: Vec<(PartId, PartId)> = derive_equivalences(&part_roles)
            .into_iter()
            .filter(|(a, b)| leaves.contains(a) && leaves.contains(b))
            .collect();
        let graph = AssemblyGraph::from_tree(&tree, equivalences.iter().copied());
        let mut problems: Vec<String> = validate(&graph).iter().map(|v| v.to_string()).collect();
        if let Some(expected) = &opts.parts {
            let missing: Vec<String> = expected
                .difference(&leaves)
                .map(|p| p.to_string())
                .collect();
            let extra: Vec<String> = leaves.difference(expected).map(|p| p.to_string()).collect();
            if !missing.is_empty() {
                problems.push(format!("tree lacks parts {}", missing.join(",")));
            }
            if !extra.is_empty() {
                problems.push(format!("tree names unknown parts {}", extra.join(",")));
            }
        }
        if !problems.is_empty() {
            return Err(PipelineError {
                run,
                stage: Stage::Tree,
                kind: StageErrorKind::InvalidGraph(problems),
            });
        }
        let canonical = graph.canonical_form().expect("valid graph");
        Ok(RunOutput {
            run,
            part_list,
            part_roles,
            steps,
            tree: tree_text,
            equivalences,
            graph,
            canonical,
        })
    })();
    (out, r.log)
}

/// Index of the most frequent canonical form among successful runs; ties go
/// to the form seen first. Returns the index and its vote count.
pub fn modal_selection(runs: &[Result<RunOutput, PipelineError>]) -> Option<(usize, usize)> {
    let mut counts: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for (i, r) in runs.iter().enumerate() {
        if let Ok(o) = r {
            counts.entry(o.canonical.as_str()).or_insert((0, i)).0 += 1;
        }
    }
    counts
        .values()
        .max_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)))
        .map(|&(n, i)| (i, n))
}

/// Runs the four prompts `repeats` times (at least once). Repeats run
/// concurrently, each strictly stage by stage. Fails only when no repeat
/// produced a valid graph, with the first repeat's error.
pub fn plan_from_manual(
    doc: &ManualDocument,
    client: &dyn VlmClient,
    opts: &PipelineOptions,
) -> Result<PipelineOutput, PipelineError> {
    let k = opts.repeats.max(1);
    let mut results: Vec<(Result<RunOutput, PipelineError>, Vec<TranscriptRecord>)> =
        std::thread::scope(|s| {
            let handles: Vec<_> = (0..k)
                .map(|run| s.spawn(move || run_once(doc, client, run, opts)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("pipeline run panicked"))
                .collect()
        });
    let transcript: Vec<TranscriptRecord> = results
        .iter_mut()
        .flat_map(|(_, log)| std::mem::take(log))
        .collect();
    let runs: Vec<Result<RunOutput, PipelineError>> = results.into_iter().map(|(r, _)| r).collect();
    let Some((selected, votes)) = modal_selection(&runs) else {
        return Err(runs.into_iter().next().expect("k >= 1").unwrap_err());
    };
    let chosen = runs[selected].as_ref().expect("selected run succeeded");
    Ok(PipelineOutput {
        graph: chosen.graph.clone(),
        equivalences: chosen.equivalences.clone(),
        selected,
        votes,
        runs,
        transcript,
    })
}
