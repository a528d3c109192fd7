//! Prop chains: the ordered list of keys, boxes, notes, passwords and the
//! exit that defines the logic of a single room.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PropKind {
    Key,
    Box,
    Paper,
    Password,
    Exit,
    Door,
}

impl PropKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PropKind::Key => "key",
            PropKind::Box => "box",
            PropKind::Paper => "paper",
            PropKind::Password => "password",
            PropKind::Exit => "exit",
            PropKind::Door => "door",
        }
    }

    /// Items that end up in the bag once obtained.
    pub fn is_collectible(self) -> bool {
        matches!(self, PropKind::Key | PropKind::Paper)
    }

    pub fn is_door(self) -> bool {
        matches!(self, PropKind::Exit | PropKind::Door)
    }
}

impl fmt::Display for PropKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How a node is obtained or opened.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum UnlockMethod {
    Free,
    Key(String),
    Password(String),
}

impl UnlockMethod {
    pub fn required_id(&self) -> Option<&str> {
        match self {
            UnlockMethod::Free => None,
            UnlockMethod::Key(id) | UnlockMethod::Password(id) => Some(id),
        }
    }

    pub fn is_free(&self) -> bool {
        matches!(self, UnlockMethod::Free)
    }
}

impl fmt::Display for UnlockMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UnlockMethod::Free => f.write_str("free"),
            UnlockMethod::Key(id) => write!(f, "key({id})"),
            UnlockMethod::Password(id) => write!(f, "password({id})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid unlock method `{0}`: expected free, key(<id>) or password(<id>)")]
pub struct UnlockParseError(pub String);

impl FromStr for UnlockMethod {
    type Err = UnlockParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        if t == "free" || t == "-" || t.is_empty() {
            return Ok(UnlockMethod::Free);
        }
        let parse_arg = |prefix: &str| -> Option<String> {
            let rest = t.strip_prefix(prefix)?.trim_start();
            let inner = rest.strip_prefix('(')?.strip_suffix(')')?.trim();
            (!inner.is_empty()).then(|| inner.to_string())
        };
        if let Some(id) = parse_arg("key") {
            Ok(UnlockMethod::Key(id))
        } else if let Some(id) = parse_arg("password") {
            Ok(UnlockMethod::Password(id))
        } else {
            Err(UnlockParseError(s.to_string()))
        }
    }
}

impl Serialize for UnlockMethod {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for UnlockMethod {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One row of a prop chain: id, type, unlock method, contents, show.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropNode {
    pub id: String,
    #[serde(rename = "type")]
    pub kind: PropKind,
    pub unlock: UnlockMethod,
    #[serde(default)]
    pub contents: Vec<String>,
    pub show: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl PropNode {
    pub fn new(id: impl Into<String>, kind: PropKind, unlock: UnlockMethod, show: bool) -> Self {
        Self {
            id: id.into(),
            kind,
            unlock,
            contents: Vec::new(),
            show,
            detail: None,
        }
    }

    pub fn with_contents<I, S>(mut self, contents: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.contents = contents.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DifficultyLabel {
    #[serde(rename = "d1")]
    D1,
    #[serde(rename = "d2-key")]
    D2Key,
    #[serde(rename = "d2-password")]
    D2Password,
    #[serde(rename = "d3-note-key")]
    D3NoteKey,
    #[serde(rename = "d3-key-note")]
    D3KeyNote,
    #[serde(rename = "custom")]
    Custom,
}

impl DifficultyLabel {
    pub const STANDARD: [DifficultyLabel; 5] = [
        DifficultyLabel::D1,
        DifficultyLabel::D2Key,
        DifficultyLabel::D2Password,
        DifficultyLabel::D3NoteKey,
        DifficultyLabel::D3KeyNote,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DifficultyLabel::D1 => "d1",
            DifficultyLabel::D2Key => "d2-key",
            DifficultyLabel::D2Password => "d2-password",
            DifficultyLabel::D3NoteKey => "d3-note-key",
            DifficultyLabel::D3KeyNote => "d3-key-note",
            DifficultyLabel::Custom => "custom",
        }
    }

    /// Number of reasoning hops (1, 2 or 3); `None` for custom chains.
    pub fn hops(self) -> Option<u8> {
        match self {
            DifficultyLabel::D1 => Some(1),
            DifficultyLabel::D2Key | DifficultyLabel::D2Password => Some(2),
            DifficultyLabel::D3NoteKey | DifficultyLabel::D3KeyNote => Some(3),
            DifficultyLabel::Custom => None,
        }
    }

    /// Default step budget for a single room of this difficulty.
    pub fn step_limit(self) -> Option<u32> {
        match self.hops()? {
            1 => Some(50),
            2 => Some(75),
            _ => Some(100),
        }
    }
}

impl fmt::Display for DifficultyLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DifficultyLabel {
    type Err = ChainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        Ok(match norm.as_str() {
            "d1" => DifficultyLabel::D1,
            "d2-key" => DifficultyLabel::D2Key,
            "d2-password" => DifficultyLabel::D2Password,
            "d3-note-key" => DifficultyLabel::D3NoteKey,
            "d3-key-note" => DifficultyLabel::D3KeyNote,
            "custom" => DifficultyLabel::Custom,
            _ => return Err(ChainError::UnknownLabel(s.to_string())),
        })
    }
}

/// A requested level, possibly generic (`d2`, `d3`) and resolved by seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Level {
    Exact(DifficultyLabel),
    D2,
    D3,
}

impl Level {
    pub fn resolve(self, seed: u64) -> DifficultyLabel {
        match self {
            Level::Exact(label) => label,
            Level::D2 if seed % 2 == 0 => DifficultyLabel::D2Key,
            Level::D2 => DifficultyLabel::D2Password,
            Level::D3 if seed % 2 == 0 => DifficultyLabel::D3NoteKey,
            Level::D3 => DifficultyLabel::D3KeyNote,
        }
    }
}

impl FromStr for Level {
    type Err = ChainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "d2" => Ok(Level::D2),
            "d3" => Ok(Level::D3),
            _ => s.parse().map(Level::Exact),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropChain {
    pub difficulty: DifficultyLabel,
    pub nodes: Vec<PropNode>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChainError {
    #[error("unknown difficulty label `{0}`")]
    UnknownLabel(String),
    #[error("invalid chain: {0}")]
    Invalid(String),
}

/// One broken rule, attributed to a node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub node: String,
    pub rule: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.node, self.rule)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    fn from_violations(violations: Vec<Violation>) -> Self {
        Self {
            ok: violations.is_empty(),
            violations,
        }
    }
}

impl PropChain {
    pub fn new(difficulty: DifficultyLabel, nodes: Vec<PropNode>) -> Self {
        Self { difficulty, nodes }
    }

    pub fn node(&self, id: &str) -> Option<&PropNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn tail(&self) -> Option<&PropNode> {
        self.nodes.last()
    }

    /// The node whose contents list `id`, if any.
    pub fn container_of(&self, id: &str) -> Option<&PropNode> {
        self.nodes.iter().find(|n| n.contents.iter().any(|c| c == id))
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.nodes.iter().map(|n| n.id.as_str())
    }

    /// Password string carried by a password node.
    pub fn password_text(&self, id: &str) -> Option<&str> {
        self.node(id)
            .filter(|n| n.kind == PropKind::Password)
            .and_then(|n| n.detail.as_deref())
    }

    pub fn validate(&self) -> ValidationReport {
        validate_chain(self)
    }

    pub fn required_interaction_count(&self) -> Result<usize, ChainError> {
        required_interaction_count(self)
    }

    /// Rename node ids, rewriting every reference.
    pub fn renamed(&self, map: &BTreeMap<String, String>) -> PropChain {
        let rn = |id: &str| map.get(id).cloned().unwrap_or_else(|| id.to_string());
        let nodes = self
            .nodes
            .iter()
            .map(|n| PropNode {
                id: rn(&n.id),
                kind: n.kind,
                unlock: match &n.unlock {
                    UnlockMethod::Free => UnlockMethod::Free,
                    UnlockMethod::Key(k) => UnlockMethod::Key(rn(k)),
                    UnlockMethod::Password(p) => UnlockMethod::Password(rn(p)),
                },
                contents: n.contents.iter().map(|c| rn(c)).collect(),
                show: n.show,
                detail: n.detail.clone(),
            })
            .collect();
        PropChain::new(self.difficulty, nodes)
    }

    /// Ids in an order where each node follows everything it depends on.
    /// `None` when the dependency relation has a cycle or dangling reference.
    pub fn dependency_order(&self) -> Option<Vec<String>> {
        let deps = self.dependencies().ok()?;
        let mut indeg: BTreeMap<&str, usize> = self.ids().map(|id| (id, 0)).collect();
        let mut out_edges: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for (node, reqs) in &deps {
            for r in reqs {
                *indeg.get_mut(node.as_str())? += 1;
                out_edges.entry(r.as_str()).or_default().push(node.as_str());
            }
        }
        // Kahn's algorithm in chain order for stable output.
        let mut order = Vec::with_capacity(self.nodes.len());
        let mut ready: Vec<&str> = self
            .nodes
            .iter()
            .map(|n| n.id.as_str())
            .filter(|id| indeg[id] == 0)
            .collect();
        ready.reverse();
        while let Some(id) = ready.pop() {
            order.push(id.to_string());
            if let Some(next) = out_edges.get(id) {
                for &n in next {
                    let d = indeg.get_mut(n)?;
                    *d -= 1;
                    if *d == 0 {
                        ready.insert(0, n);
                    }
                }
            }
        }
        (order.len() == self.nodes.len()).then_some(order)
    }

    /// Node -> prerequisites: its unlock credential and its container.
    fn dependencies(&self) -> Result<BTreeMap<String, BTreeSet<String>>, String> {
        let mut deps: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for n in &self.nodes {
            deps.entry(n.id.clone()).or_default();
        }
        for n in &self.nodes {
            if let Some(req) = n.unlock.required_id() {
                if self.node(req).is_none() {
                    return Err(req.to_string());
                }
                deps.get_mut(&n.id).unwrap().insert(req.to_string());
            }
            for c in &n.contents {
                match deps.get_mut(c) {
                    Some(set) => {
                        set.insert(n.id.clone());
                    }
                    None => return Err(c.clone()),
                }
            }
        }
        Ok(deps)
    }
}

/// Checks every structural invariant of a chain. Violations are data.
pub fn validate_chain(chain: &PropChain) -> ValidationReport {
    let mut v = Vec::new();
    let mut push = |node: &str, rule: String| {
        v.push(Violation {
            node: node.to_string(),
            rule,
        })
    };

    if chain.nodes.is_empty() {
        push("-", "chain is empty".into());
        return ValidationReport::from_violations(v);
    }

    let mut seen = BTreeSet::new();
    for n in &chain.nodes {
        if !seen.insert(n.id.as_str()) {
            push(&n.id, "duplicate id".into());
        }
    }

    let exits: Vec<&PropNode> = chain.nodes.iter().filter(|n| n.kind == PropKind::Exit).collect();
    if exits.len() != 1 {
        push(
            &chain.tail().unwrap().id,
            format!("chain must contain exactly one exit, found {}", exits.len()),
        );
    }
    let tail = chain.tail().unwrap();
    if tail.kind != PropKind::Exit {
        push(&tail.id, "tail node must be the exit".into());
    }

    for n in &chain.nodes {
        if n.kind == PropKind::Password && n.show {
            push(&n.id, "password nodes must have show=false".into());
        }
        if n.kind == PropKind::Exit && !n.contents.is_empty() {
            push(&n.id, "exit must have empty contents".into());
        }
        match &n.unlock {
            UnlockMethod::Free => {}
            UnlockMethod::Key(k) => match chain.node(k) {
                None => push(&n.id, format!("unlock references missing node {k}")),
                Some(req) if req.kind != PropKind::Key => {
                    push(&n.id, format!("key unlock references {k} of type {}", req.kind))
                }
                _ => {}
            },
            UnlockMethod::Password(p) => match chain.node(p) {
                None => push(&n.id, format!("unlock references missing node {p}")),
                Some(req) if req.kind != PropKind::Password => push(
                    &n.id,
                    format!("password unlock references {p} of type {}", req.kind),
                ),
                _ => {}
            },
        }
        for c in &n.contents {
            match chain.node(c) {
                None => push(&n.id, format!("contents reference missing node {c}")),
                Some(inner) => {
                    if !matches!(inner.kind, PropKind::Key | PropKind::Paper | PropKind::Password) {
                        push(&n.id, format!("contents may only hold keys, papers or passwords, not {c}"));
                    }
                    if inner.show {
                        push(c, format!("contained in {} but marked show=true", n.id));
                    }
                }
            }
        }
    }

    for n in &chain.nodes {
        let holders: Vec<&str> = chain
            .nodes
            .iter()
            .filter(|h| h.contents.iter().any(|c| c == &n.id))
            .map(|h| h.id.as_str())
            .collect();
        if holders.len() > 1 {
            push(&n.id, format!("contained in more than one node: {}", holders.join(", ")));
        }
        if !n.show && holders.is_empty() && !n.kind.is_door() {
            push(&n.id, "hidden node is not contained anywhere and can never be obtained".into());
        }
    }

    if let Ok(deps) = chain.dependencies() {
        if let Some(cycle) = find_cycle(&deps) {
            let node = cycle.first().cloned().unwrap_or_default();
            push(&node, format!("dependency cycle on {{{}}}", cycle.join(", ")));
        } else if let Some(stuck) = unobtainable(chain) {
            for id in stuck {
                push(&id, "prerequisite is never obtainable".into());
            }
        }
    }

    ValidationReport::from_violations(v)
}

fn find_cycle(deps: &BTreeMap<String, BTreeSet<String>>) -> Option<Vec<String>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    fn visit(
        id: &str,
        deps: &BTreeMap<String, BTreeSet<String>>,
        marks: &mut BTreeMap<String, Mark>,
        stack: &mut Vec<String>,
    ) -> Option<Vec<String>> {
        match marks.get(id).copied().unwrap_or(Mark::New) {
            Mark::Done => return None,
            Mark::Active => {
                let start = stack.iter().position(|s| s == id).unwrap_or(0);
                let mut cycle: Vec<String> = stack[start..].to_vec();
                cycle.sort();
                return Some(cycle);
            }
            Mark::New => {}
        }
        marks.insert(id.to_string(), Mark::Active);
        stack.push(id.to_string());
        if let Some(reqs) = deps.get(id) {
            for r in reqs {
                if let Some(c) = visit(r, deps, marks, stack) {
                    return Some(c);
                }
            }
        }
        stack.pop();
        marks.insert(id.to_string(), Mark::Done);
        None
    }
    let mut marks = BTreeMap::new();
    for id in deps.keys() {
        let mut stack = Vec::new();
        if let Some(c) = visit(id, deps, &mut marks, &mut stack) {
            return Some(c);
        }
    }
    None
}

/// Forward fixpoint over what a player can obtain. Returns the nodes that
/// stay out of reach, or `None` when everything is obtainable.
fn unobtainable(chain: &PropChain) -> Option<Vec<String>> {
    let reached = obtainable_set(chain);
    let stuck: Vec<String> = chain
        .nodes
        .iter()
        .filter(|n| !reached.contains(n.id.as_str()))
        .map(|n| n.id.clone())
        .collect();
    (!stuck.is_empty()).then_some(stuck)
}

/// Ids a player can eventually obtain or open, starting from nothing.
pub fn obtainable_set(chain: &PropChain) -> BTreeSet<String> {
    let mut have: BTreeSet<String> = BTreeSet::new();
    loop {
        let mut grew = false;
        for n in &chain.nodes {
            if have.contains(&n.id) {
                continue;
            }
            let accessible = n.show || n.kind.is_door() || chain.container_of(&n.id).is_some_and(|c| have.contains(&c.id));
            let unlocked = n.unlock.required_id().is_none_or(|r| have.contains(r));
            // Contained nodes are granted when their container opens.
            let contained = chain.container_of(&n.id).is_some();
            let ok = if contained { accessible } else { accessible && unlocked };
            if ok {
                have.insert(n.id.clone());
                grew = true;
            }
        }
        if !grew {
            return have;
        }
    }
}

/// Number of nodes a player must successfully interact with to escape:
/// every placed node plus the exit. Contents granted on unlock and pure
/// password knowledge are excluded.
pub fn required_interaction_count(chain: &PropChain) -> Result<usize, ChainError> {
    let report = validate_chain(chain);
    if !report.ok {
        let msg = report
            .violations
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join("; ");
        return Err(ChainError::Invalid(msg));
    }
    Ok(chain
        .nodes
        .iter()
        .filter(|n| n.kind.is_door() || (n.show && n.kind != PropKind::Password))
        .count())
}

/// Builds the chain for a standard difficulty. The seed picks id suffixes
/// and the password digits.
pub fn build_difficulty_chain(label: DifficultyLabel, seed: u64) -> Result<PropChain, ChainError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_c4a1_0000_0000);
    let n: u32 = rng.random_range(1..=9);
    let password = format!("{:04}", rng.random_range(0..10_000u32));
    let key = format!("key_{n}");
    let boxed = format!("box_{n}");
    let note = format!("note_{n}");
    let note2 = format!("note_{}", n + 1);
    let pw = format!("password_{n}");
    let exit = || PropNode::new("exit", PropKind::Exit, UnlockMethod::Free, true);

    let nodes = match label {
        DifficultyLabel::D1 => vec![exit()],
        DifficultyLabel::D2Key => vec![
            PropNode::new(&key, PropKind::Key, UnlockMethod::Free, true),
            PropNode {
                unlock: UnlockMethod::Key(key.clone()),
                ..exit()
            },
        ],
        DifficultyLabel::D2Password => vec![
            PropNode::new(&note, PropKind::Paper, UnlockMethod::Free, true).with_contents([pw.clone()]),
            PropNode::new(&pw, PropKind::Password, UnlockMethod::Free, false).with_detail(&password),
            PropNode {
                unlock: UnlockMethod::Password(pw.clone()),
                ..exit()
            },
        ],
        DifficultyLabel::D3NoteKey => vec![
            PropNode::new(&boxed, PropKind::Box, UnlockMethod::Password(pw.clone()), true)
                .with_contents([key.clone(), note2.clone()]),
            PropNode::new(&key, PropKind::Key, UnlockMethod::Free, false),
            PropNode::new(&note, PropKind::Paper, UnlockMethod::Free, true).with_contents([pw.clone()]),
            PropNode::new(&note2, PropKind::Paper, UnlockMethod::Free, false),
            PropNode::new(&pw, PropKind::Password, UnlockMethod::Free, false).with_detail(&password),
            PropNode {
                unlock: UnlockMethod::Key(key.clone()),
                ..exit()
            },
        ],
        DifficultyLabel::D3KeyNote => vec![
            PropNode::new(&key, PropKind::Key, UnlockMethod::Free, true),
            PropNode::new(&boxed, PropKind::Box, UnlockMethod::Key(key.clone()), true)
                .with_contents([note.clone()]),
            PropNode::new(&note, PropKind::Paper, UnlockMethod::Free, false).with_contents([pw.clone()]),
            PropNode::new(&pw, PropKind::Password, UnlockMethod::Free, false).with_detail(&password),
            PropNode {
                unlock: UnlockMethod::Password(pw.clone()),
                ..exit()
            },
        ],
        DifficultyLabel::Custom => return Err(ChainError::UnknownLabel("custom".into())),
    };
    Ok(PropChain::new(label, nodes))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn note_key_example() -> PropChain {
        PropChain::new(
            DifficultyLabel::D3NoteKey,
            vec![
                PropNode::new("box_1", PropKind::Box, UnlockMethod::Password("password_1".into()), true)
                    .with_contents(["key_1", "note_2"]),
                PropNode::new("key_1", PropKind::Key, UnlockMethod::Free, false),
                PropNode::new("note_1", PropKind::Paper, UnlockMethod::Free, true).with_contents(["password_1"]),
                PropNode::new("note_2", PropKind::Paper, UnlockMethod::Free, false).with_detail("some story"),
                PropNode::new("password_1", PropKind::Password, UnlockMethod::Free, false).with_detail("9926"),
                PropNode::new("exit", PropKind::Exit, UnlockMethod::Key("key_1".into()), true),
            ],
        )
    }

    #[test]
    fn note_key_example_is_valid() {
        let r = validate_chain(&note_key_example());
        assert!(r.ok, "{:?}", r.violations);
        assert_eq!(required_interaction_count(&note_key_example()).unwrap(), 3);
    }

    #[test]
    fn lone_free_exit_is_valid() {
        let chain = build_difficulty_chain(DifficultyLabel::D1, 3).unwrap();
        assert_eq!(chain.nodes.len(), 1);
        assert!(chain.nodes[0].unlock.is_free());
        assert!(validate_chain(&chain).ok);
        assert_eq!(required_interaction_count(&chain).unwrap(), 1);
    }

    #[test]
    fn key_inside_its_own_box_is_a_cycle() {
        let chain = PropChain::new(
            DifficultyLabel::Custom,
            vec![
                PropNode::new("box_a", PropKind::Box, UnlockMethod::Key("key_a".into()), true)
                    .with_contents(["key_a"]),
                PropNode::new("key_a", PropKind::Key, UnlockMethod::Free, false),
                PropNode::new("exit", PropKind::Exit, UnlockMethod::Free, true),
            ],
        );
        let r = validate_chain(&chain);
        assert!(!r.ok);
        let cyc = r.violations.iter().find(|v| v.rule.contains("cycle")).expect("cycle violation");
        assert!(cyc.rule.contains("box_a") && cyc.rule.contains("key_a"), "{cyc}");
    }

    #[test]
    fn dangling_references_are_named() {
        let chain = PropChain::new(
            DifficultyLabel::Custom,
            vec![PropNode::new("exit", PropKind::Exit, UnlockMethod::Key("key_9".into()), true)],
        );
        let r = validate_chain(&chain);
        assert!(!r.ok);
        assert!(r.violations.iter().any(|v| v.node == "exit" && v.rule.contains("key_9")));
    }

    #[test]
    fn visible_password_and_non_tail_exit_rejected() {
        let chain = PropChain::new(
            DifficultyLabel::Custom,
            vec![
                PropNode::new("exit", PropKind::Exit, UnlockMethod::Free, true),
                PropNode::new("password_1", PropKind::Password, UnlockMethod::Free, true),
            ],
        );
        let r = validate_chain(&chain);
        assert!(r.violations.iter().any(|v| v.rule.contains("show=false")));
        assert!(r.violations.iter().any(|v| v.rule.contains("tail")));
    }

    #[test]
    fn key_note_chain_counts_three() {
        let chain = build_difficulty_chain(DifficultyLabel::D3KeyNote, 7).unwrap();
        assert!(validate_chain(&chain).ok);
        assert_eq!(required_interaction_count(&chain).unwrap(), 3);
    }

    #[test]
    fn d2_counts() {
        for seed in 0..5 {
            let k = build_difficulty_chain(DifficultyLabel::D2Key, seed).unwrap();
            let p = build_difficulty_chain(DifficultyLabel::D2Password, seed).unwrap();
            assert_eq!(required_interaction_count(&k).unwrap(), 2);
            assert_eq!(required_interaction_count(&p).unwrap(), 2);
        }
    }

    #[test]
    fn custom_label_cannot_be_built() {
        assert!(matches!(
            build_difficulty_chain(DifficultyLabel::Custom, 0),
            Err(ChainError::UnknownLabel(_))
        ));
        assert!("d4".parse::<DifficultyLabel>().is_err());
    }

    #[test]
    fn unlock_method_text_roundtrip() {
        for s in ["free", "key(key_1)", "password(password_1)"] {
            let m: UnlockMethod = s.parse().unwrap();
            assert_eq!(m.to_string(), s);
        }
        assert_eq!("password (password_1)".parse::<UnlockMethod>().unwrap(), UnlockMethod::Password("password_1".into()));
        assert!("lockpick(x)".parse::<UnlockMethod>().is_err());
    }

    #[test]
    fn dependency_order_puts_prerequisites_first() {
        let order = note_key_example().dependency_order().unwrap();
        let pos = |id: &str| order.iter().position(|o| o == id).unwrap();
        assert!(pos("note_1") < pos("password_1"));
        assert!(pos("password_1") < pos("box_1"));
        assert!(pos("box_1") < pos("key_1"));
        assert!(pos("key_1") < pos("exit"));
    }

    #[test]
    fn generic_levels_resolve_by_seed() {
        assert_eq!(Level::D2.resolve(0), DifficultyLabel::D2Key);
        assert_eq!(Level::D2.resolve(1), DifficultyLabel::D2Password);
        assert_eq!("d3".parse::<Level>().unwrap().resolve(3), DifficultyLabel::D3KeyNote);
    }
}
