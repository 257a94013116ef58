//! The four prompt templates and their rendering.

use crate::request::{ImageRef, Stage, VlmRequest};

pub const PART_LIST_TEMPLATE: &str = include_str!("../templates/prompt1.txt");
pub const PART_ROLES_TEMPLATE: &str = include_str!("../templates/prompt2.txt");
pub const PLAN_TEMPLATE: &str = include_str!("../templates/prompt3.txt");
pub const TREE_TEMPLATE: &str = include_str!("../templates/prompt4.txt");

pub fn template(stage: Stage) -> &'static str {
    match stage {
        Stage::PartList => PART_LIST_TEMPLATE,
        Stage::PartRoles => PART_ROLES_TEMPLATE,
        Stage::Plan => PLAN_TEMPLATE,
        Stage::Tree => TREE_TEMPLATE,
    }
}

/// Inputs a prompt may draw on. Which fields are required depends on the
/// stage.
#[derive(Debug, Clone, Default)]
pub struct Bindings {
    pub scene: Option<ImageRef>,
    pub cover: Option<ImageRef>,
    pub pages: Vec<ImageRef>,
    /// Part list JSON, appended to the roles prompt.
    pub part_list: Option<String>,
    /// Part table with roles, appended to the plan prompt.
    pub part_roles: Option<String>,
    /// Text plan, appended to the tree prompt.
    pub plan: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("prompt {stage} is missing binding `{binding}`")]
pub struct MissingBinding {
    pub stage: Stage,
    pub binding: &'static str,
}

/// Renders a request for `stage`. The template text is used unchanged and
/// earlier outputs are appended after it; images come scene first, then
/// manual pages.
pub fn render_prompt(
    stage: Stage,
    b: &Bindings,
    model: &str,
) -> Result<VlmRequest, MissingBinding> {
    let need = |binding| MissingBinding { stage, binding };
    let scene = || b.scene.clone().ok_or(need("scene"));
    let pages = || {
        if b.pages.is_empty() {
            Err(need("pages"))
        } else {
            Ok(b.pages.clone())
        }
    };
    let tpl = template(stage).trim_end();
    let (text, images) = match stage {
        Stage::PartList => (
            tpl.to_string(),
            vec![scene()?, b.cover.clone().ok_or(need("cover"))?],
        ),
        Stage::PartRoles => {
            let json = b.part_list.as_deref().ok_or(need("part_list"))?;
            let mut imgs = vec![scene()?];
            imgs.extend(pages()?);
            (format!("{tpl}\n\n{}", json.trim()), imgs)
        }
        Stage::Plan => {
            let json = b.part_roles.as_deref().ok_or(need("part_roles"))?;
            let mut imgs = vec![scene()?];
            imgs.extend(pages()?);
            (format!("{tpl}\n{}", json.trim()), imgs)
        }
        Stage::Tree => {
            let plan = b.plan.as_deref().ok_or(need("plan"))?;
            (format!("{tpl}\n{}", plan.trim()), Vec::new())
        }
    };
    Ok(VlmRequest {
        stage,
        run: 0,
        model: model.to_string(),
        temperature: 0.0,
        text,
        images,
    })
}
