//! Turns an assembly manual and a labeled scene image into a hierarchical
//! assembly graph by querying a vision-language model with four prompts.
//! Every exchange can be recorded and replayed.

pub mod client;
pub mod crop;
pub mod parse;
pub mod pipeline;
pub mod prompts;
pub mod request;
pub mod transcript;

pub use client::{ClientError, EndpointConfig, HttpClient, MockClient, ReplayClient, VlmClient};
pub use crop::{crop_image, crop_manual_pages, CropBox, CropError};
pub use parse::{
    derive_equivalences, parse_step_plan, parse_tree_response, parse_triplets, plan_from_graph,
    plan_to_tree, render_step_plan, PartTriplet, PlanParseError, StepAssignment, TreeParseError,
    TripletError,
};
pub use pipeline::{
    modal_selection, plan_from_manual, PipelineError, PipelineOptions, PipelineOutput, RunOutput,
    StageErrorKind,
};
pub use prompts::{render_prompt, Bindings, MissingBinding};
pub use request::{DocumentError, ImageRef, ManualDocument, Stage, VlmRequest, VlmResponse};
pub use transcript::{
    blob_dir, load_blob, read_transcript, write_transcript, TranscriptError, TranscriptRecord,
};
