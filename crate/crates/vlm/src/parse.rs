//! Parsers for the four kinds of model responses.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use assembly_core::graph::{parse_tree, AssemblyGraph, EquivalenceClasses, NodeId, PartId, Tree};
use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// One Stage-I record: a part name, the scene labels it covers and its role.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartTriplet {
    pub name: String,
    pub label: Vec<PartId>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub role: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TripletError {
    #[error("no JSON array found in response")]
    NoJson,
    #[error("entry {index}: {reason}")]
    BadEntry { index: usize, reason: String },
}

fn fence_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?s)(```|''')[A-Za-z0-9_+-]*[ \t]*\n?(.*?)(```|''')").unwrap())
}

/// Contents of fenced code blocks (``` or ''').
pub fn fenced_blocks(text: &str) -> Vec<&str> {
    fence_re()
        .captures_iter(text)
        .filter(|c| c[1] == c[3])
        .map(|c| c.get(2).unwrap().as_str())
        .collect()
}

fn first_json_array(text: &str) -> Option<Vec<Value>> {
    for (i, ch) in text.char_indices() {
        if ch != '[' && ch != '{' {
            continue;
        }
        let mut it = serde_json::Deserializer::from_str(&text[i..]).into_iter::<Value>();
        match it.next() {
            Some(Ok(Value::Array(a))) if a.iter().all(|e| e.is_object()) => return Some(a),
            Some(Ok(Value::Object(o))) => {
                let arrays: Vec<&Vec<Value>> = o.values().filter_map(|v| v.as_array()).collect();
                if let [a] = arrays.as_slice() {
                    if a.iter().all(|e| e.is_object()) {
                        return Some((*a).clone());
                    }
                }
            }
            _ => {}
        }
    }
    None
}

fn label_list(v: &Value) -> Result<Vec<PartId>, String> {
    let one = |v: &Value| -> Result<PartId, String> {
        match v {
            Value::Number(n) => n
                .as_u64()
                .and_then(|n| u32::try_from(n).ok())
                .map(PartId)
                .ok_or_else(|| format!("label {n} is not a part number")),
            Value::String(s) => s
                .trim()
                .parse::<u32>()
                .map(PartId)
                .map_err(|_| format!("label {s:?} is not a part number")),
            other => Err(format!("label {other} is not a part number")),
        }
    };
    let labels = match v {
        Value::Array(a) => a.iter().map(one).collect::<Result<Vec<_>, _>>()?,
        other => vec![one(other)?],
    };
    if labels.is_empty() {
        return Err("empty label list".into());
    }
    Ok(labels)
}

/// Parses a JSON array of part records, fenced or bare. Labels may be given
/// under `label` or `number` (the key the part-list prompt asks for), as an
/// integer, a numeric string or a list. The role comes from `role`, or
/// failing that `explanation` or `description`.
pub fn parse_triplets(text: &str) -> Result<Vec<PartTriplet>, TripletError> {
    let blocks = fenced_blocks(text);
    let array = blocks
        .iter()
        .find_map(|b| first_json_array(b))
        .or_else(|| first_json_array(text))
        .ok_or(TripletError::NoJson)?;
    array
        .iter()
        .enumerate()
        .map(|(index, v)| {
            let bad = |reason: String| TripletError::BadEntry { index, reason };
            let o = v.as_object().ok_or_else(|| bad("not an object".into()))?;
            let name = o
                .get("name")
                .and_then(|n| n.as_str())
                .map(str::trim)
                .filter(|n| !n.is_empty())
                .ok_or_else(|| bad("missing name".into()))?;
            let label = o
                .get("label")
                .or_else(|| o.get("number"))
                .or_else(|| o.get("labels"))
                .ok_or_else(|| bad("missing label".into()))
                .and_then(|l| label_list(l).map_err(bad))?;
            let role = ["role", "explanation", "description"]
                .iter()
                .find_map(|k| o.get(*k).and_then(|r| r.as_str()))
                .unwrap_or("")
                .to_string();
            Ok(PartTriplet {
                name: name.to_string(),
                label,
                role,
            })
        })
        .collect()
}

/// Lowercase, trimmed, inner whitespace collapsed to single spaces.
pub fn normalize(s: &str) -> String {
    s.split_whitespace()
        .map(|w| w.to_lowercase())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Parts whose triplets agree on normalized name and role are equivalent,
/// as are several labels listed in one triplet; the relation is closed
/// transitively. Returns every pair `(a, b)` with `a < b`, sorted.
pub fn derive_equivalences(triplets: &[PartTriplet]) -> Vec<(PartId, PartId)> {
    let mut groups: BTreeMap<(String, String), BTreeSet<PartId>> = BTreeMap::new();
    for t in triplets {
        groups
            .entry((normalize(&t.name), normalize(&t.role)))
            .or_default()
            .extend(t.label.iter().copied());
    }
    let mut pairs = EquivalenceClasses::from_classes(groups.into_values()).pairs();
    pairs.sort();
    pairs
}

/// Parts named in one step of a text plan.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepAssignment {
    pub step: usize,
    pub parts: Vec<PartId>,
    /// Earlier steps whose subassemblies join this step.
    pub subassemblies: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PlanParseError {
    #[error("no steps found")]
    NoSteps,
    #[error("expected step {expected}, found step {found}")]
    NonContiguous { expected: usize, found: usize },
    #[error("step {0} names no parts")]
    EmptyStep(usize),
    #[error("step {step} refers to the subassembly from step {target}, which does not precede it")]
    DanglingReference { step: usize, target: usize },
    #[error("the subassembly from step {0} is used more than once")]
    ReusedSubassembly(usize),
    #[error("part {0} appears in more than one step")]
    RepeatedPart(PartId),
    #[error("steps {0:?} are never joined into one assembly")]
    Disconnected(Vec<usize>),
}

fn step_header_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?im)^[ \t]*(?:#{1,6}[ \t]*|\*\*[ \t]*)step[ \t]+(\d+)\b").unwrap()
    })
}

fn parts_line_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)parts[ \t]+(?:needed|involved)").unwrap())
}

fn reference_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)sub-?assembl(?:y|ies)[ \t]+from[ \t]+step[ \t]+(\d+)").unwrap()
    })
}

fn paren_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\(([^()]*)\)").unwrap())
}

fn int_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\d+").unwrap())
}

/// Parses a plan written as `### Step k:` sections. Parts are the integers
/// in parentheses on the step's "Parts Needed/Involved" line (the whole
/// section when there is no such line); "subassembly from Step j" marks a
/// reference to an earlier step.
pub fn parse_step_plan(text: &str) -> Result<Vec<StepAssignment>, PlanParseError> {
    let headers: Vec<(usize, usize, usize)> = step_header_re()
        .captures_iter(text)
        .map(|c| {
            let m = c.get(0).unwrap();
            (m.start(), m.end(), c[1].parse().unwrap_or(usize::MAX))
        })
        .collect();
    if headers.is_empty() {
        return Err(PlanParseError::NoSteps);
    }
    let mut out = Vec::new();
    for (i, &(_, body_start, number)) in headers.iter().enumerate() {
        let expected = i + 1;
        if number != expected {
            return Err(PlanParseError::NonContiguous {
                expected,
                found: number,
            });
        }
        let body_end = headers.get(i + 1).map_or(text.len(), |h| h.0);
        let body = &text[body_start..body_end];
        let line = body
            .lines()
            .find(|l| parts_line_re().is_match(l))
            .map(|l| {
                let m = parts_line_re().find(l).unwrap();
                &l[m.end()..]
            })
            .unwrap_or(body);

        let mut subassemblies = Vec::new();
        for c in reference_re().captures_iter(line) {
            let target: usize = c[1].parse().unwrap_or(usize::MAX);
            if target == 0 || target >= number {
                return Err(PlanParseError::DanglingReference {
                    step: number,
                    target,
                });
            }
            if !subassemblies.contains(&target) {
                subassemblies.push(target);
            }
        }
        let stripped = reference_re().replace_all(line, "");
        let mut parts = Vec::new();
        for c in paren_re().captures_iter(&stripped) {
            for n in int_re().find_iter(&c[1]) {
                if let Ok(v) = n.as_str().parse::<u32>() {
                    if !parts.contains(&PartId(v)) {
                        parts.push(PartId(v));
                    }
                }
            }
        }
        if parts.is_empty() && subassemblies.is_empty() {
            return Err(PlanParseError::EmptyStep(number));
        }
        out.push(StepAssignment {
            step: number,
            parts,
            subassemblies,
        });
    }
    Ok(out)
}

/// Writes steps in the style of the plan prompt's example.
pub fn render_step_plan(steps: &[StepAssignment]) -> String {
    let mut s = String::new();
    for st in steps {
        let mut items: Vec<String> = st
            .subassemblies
            .iter()
            .map(|j| format!("Subassembly from Step {j}"))
            .collect();
        items.extend(st.parts.iter().map(|p| format!("Part ({p})")));
        s.push_str(&format!(
            "### Step {}:\n- **Parts Needed:** {}\n",
            st.step,
            items.join(", ")
        ));
        s.push_str("- **Instructions:**\n  - Join the listed parts.\n\n");
    }
    s
}

/// One step per non-leaf node, in the given order of node ids.
pub fn plan_from_graph(graph: &AssemblyGraph, order: &[NodeId]) -> Vec<StepAssignment> {
    let step_of: BTreeMap<NodeId, usize> =
        order.iter().enumerate().map(|(i, n)| (*n, i + 1)).collect();
    order
        .iter()
        .enumerate()
        .map(|(i, id)| {
            let node = graph.node(*id).expect("order nodes exist");
            let mut parts = Vec::new();
            let mut subassemblies = Vec::new();
            for c in &node.children {
                let child = graph.node(*c).expect("children exist");
                if child.is_leaf() {
                    parts.extend(child.part_set.iter().copied());
                } else {
                    subassemblies.push(step_of[c]);
                }
            }
            StepAssignment {
                step: i + 1,
                parts,
                subassemblies,
            }
        })
        .collect()
}

/// Tree implied by a parsed plan: every step is a node over its parts and
/// the subassemblies it consumes; the one unconsumed step is the root.
pub fn plan_to_tree(steps: &[StepAssignment]) -> Result<Tree, PlanParseError> {
    let mut built: Vec<Option<Tree>> = Vec::with_capacity(steps.len());
    let mut seen_parts = BTreeSet::new();
    for st in steps {
        let mut children = Vec::new();
        for &j in &st.subassemblies {
            let t = built
                .get_mut(j - 1)
                .ok_or(PlanParseError::DanglingReference {
                    step: st.step,
                    target: j,
                })?
                .take()
                .ok_or(PlanParseError::ReusedSubassembly(j))?;
            children.push(t);
        }
        for p in &st.parts {
            if !seen_parts.insert(*p) {
                return Err(PlanParseError::RepeatedPart(*p));
            }
            children.push(Tree::Leaf(*p));
        }
        built.push(Some(Tree::Node(children)));
    }
    let left: Vec<usize> = built
        .iter()
        .enumerate()
        .filter(|(_, t)| t.is_some())
        .map(|(i, _)| i + 1)
        .collect();
    match left.as_slice() {
        [i] => Ok(built[i - 1].take().expect("present")),
        [] => Err(PlanParseError::NoSteps),
        _ => Err(PlanParseError::Disconnected(left)),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TreeParseError {
    #[error("no nested list found in response")]
    NotFound,
    #[error("response contains several different nested lists: {0:?}")]
    Ambiguous(Vec<String>),
    #[error("nested list {text} does not parse: {reason}")]
    Invalid { text: String, reason: String },
}

fn missing_comma_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"([\]\d])(\s+)([\[\d])").unwrap())
}

/// Balanced bracket spans made only of digits, commas, whitespace and
/// brackets, containing at least one digit.
fn bracket_candidates(text: &str) -> Vec<&str> {
    let b = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        if b[i] != b'[' {
            i += 1;
            continue;
        }
        let mut depth = 0usize;
        let mut j = i;
        let mut end = None;
        while j < b.len() {
            match b[j] {
                b'[' => depth += 1,
                b']' => {
                    depth -= 1;
                    if depth == 0 {
                        end = Some(j);
                        break;
                    }
                }
                c if c.is_ascii_digit() || c == b',' || c.is_ascii_whitespace() => {}
                _ => break,
            }
            j += 1;
        }
        match end {
            Some(e) => {
                let span = &text[i..=e];
                if span.bytes().any(|c| c.is_ascii_digit()) {
                    out.push(span);
                }
                i = e + 1;
            }
            None => i += 1,
        }
    }
    out
}

/// Extracts the nested list from a tree-prompt response and returns it
/// without whitespace. Fenced blocks are searched first. A comma missing
/// between adjacent elements separated only by whitespace is inserted.
pub fn parse_tree_response(text: &str) -> Result<String, TreeParseError> {
    let blocks = fenced_blocks(text);
    let mut spans: Vec<&str> = blocks.iter().flat_map(|b| bracket_candidates(b)).collect();
    if spans.is_empty() {
        spans = bracket_candidates(text);
    }
    let mut found: Vec<String> = Vec::new();
    for s in spans {
        let mut repaired = s.to_string();
        loop {
            let next = missing_comma_re()
                .replace_all(&repaired, "$1,$2$3")
                .into_owned();
            if next == repaired {
                break;
            }
            repaired = next;
        }
        let compact: String = repaired.chars().filter(|c| !c.is_whitespace()).collect();
        if !found.contains(&compact) {
            found.push(compact);
        }
    }
    match found.len() {
        0 => Err(TreeParseError::NotFound),
        1 => {
            let t = found.pop().unwrap();
            parse_tree(&t).map_err(|e| TreeParseError::Invalid {
                text: t.clone(),
                reason: e.to_string(),
            })?;
            Ok(t)
        }
        _ => Err(TreeParseError::Ambiguous(found)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use assembly_core::graph::feasible_orders;

    const PLAN_EXAMPLE: &str = "### Step 1:
- **Parts Needed:** Backrest Frame (1), Seat Cushion (5)
- **Instructions:**
  - **Align Frame and Seat:** Connect the backrest frame (1) next to the seat cushion (5).

### Step 2:
- **Parts Needed:** Subassembly from Step 1, Side Leg Frame (2)

### Step 3:
- **Parts Needed:** Subassembly from Step 2, Support Beam (3), Support Beam (4), Side Leg Frame (6)
";

    fn ids(v: &[u32]) -> Vec<PartId> {
        v.iter().map(|&i| PartId(i)).collect()
    }

    #[test]
    fn plan_example_parses() {
        let s = parse_step_plan(PLAN_EXAMPLE).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s[0].parts, ids(&[1, 5]));
        assert_eq!(s[1].parts, ids(&[2]));
        assert_eq!(s[1].subassemblies, vec![1]);
        assert_eq!(s[2].parts, ids(&[3, 4, 6]));
        assert_eq!(s[2].subassemblies, vec![2]);
        assert_eq!(
            plan_to_tree(&s).unwrap().canonical().to_string(),
            "[[[1,5],2],3,4,6]"
        );
    }

    #[test]
    fn plan_errors() {
        assert_eq!(
            parse_step_plan("no plan here"),
            Err(PlanParseError::NoSteps)
        );
        assert_eq!(
            parse_step_plan(
                "### Step 1:\nParts Needed: A (1), B (2)\n### Step 3:\nParts Needed: C (3)"
            ),
            Err(PlanParseError::NonContiguous {
                expected: 2,
                found: 3
            })
        );
        assert_eq!(
            parse_step_plan("### Step 1:\nParts Needed: subassembly from Step 2, A (1)"),
            Err(PlanParseError::DanglingReference { step: 1, target: 2 })
        );
    }

    #[test]
    fn single_step_plan() {
        let s =
            parse_step_plan("### Step 1: Join\n**Parts Involved:** Board (0), Board (1)").unwrap();
        assert_eq!(
            s,
            vec![StepAssignment {
                step: 1,
                parts: ids(&[0, 1]),
                subassemblies: vec![]
            }]
        );
    }

    #[test]
    fn render_round_trip_on_graph() {
        let g = AssemblyGraph::from_tree(&parse_tree("[[[[1,5],2],7],3,4]").unwrap(), []);
        let order = feasible_orders(&g, 1).unwrap().orders.remove(0);
        let plan = plan_from_graph(&g, &order.0);
        assert_eq!(parse_step_plan(&render_step_plan(&plan)).unwrap(), plan);
        assert_eq!(
            plan_to_tree(&plan).unwrap().canonical().to_string(),
            "[[[[1,5],2],7],3,4]"
        );
    }

    #[test]
    fn tree_responses() {
        assert_eq!(
            parse_tree_response("'''python\n[[1,5],2]\n'''").unwrap(),
            "[[1,5],2]"
        );
        assert_eq!(parse_tree_response("[0,1]").unwrap(), "[0,1]");
        assert_eq!(parse_tree_response("[[0, 1]\n 2]").unwrap(), "[[0,1],2]");
        assert_eq!(
            parse_tree_response("nothing"),
            Err(TreeParseError::NotFound)
        );
        assert!(matches!(
            parse_tree_response("[0,1] or [1,2]"),
            Err(TreeParseError::Ambiguous(_))
        ));
    }

    #[test]
    fn triplets_and_equivalences() {
        let t = parse_triplets(
            "```json\n[{\"name\": \"Side  Frame\", \"label\": [0], \"role\": \"holds\"},\
             {\"name\": \"side frame\", \"label\": \"1\", \"role\": \"Holds\"},\
             {\"name\": \"seat\", \"number\": [2]}]\n```",
        )
        .unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t[1].label, ids(&[1]));
        assert_eq!(derive_equivalences(&t), vec![(PartId(0), PartId(1))]);
        assert_eq!(parse_triplets("[]").unwrap(), vec![]);
        assert_eq!(parse_triplets("none"), Err(TripletError::NoJson));
        assert!(matches!(
            parse_triplets("[{\"name\":\"a\",\"label\":[0]},{\"name\":\"b\"}]"),
            Err(TripletError::BadEntry { index: 1, .. })
        ));
    }

    #[test]
    fn three_identical_names_give_three_pairs() {
        let t: Vec<PartTriplet> = (0..3)
            .map(|i| PartTriplet {
                name: "leg".into(),
                label: vec![PartId(i)],
                role: String::new(),
            })
            .collect();
        assert_eq!(derive_equivalences(&t).len(), 3);
    }
}
