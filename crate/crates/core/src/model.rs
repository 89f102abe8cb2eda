//! The program model: compilation units, methods and an element-indexed
//! statement tree.
//!
//! Every method and every statement node carries an [`ElementId`]. Ids are
//! assigned densely, in the order the frontend adds elements, so rebuilding
//! from unchanged sources yields identical ids. The model is immutable once
//! [`ModelBuilder::finish`] returns; refactorings work on text edits, never
//! on the model itself.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

/// Stable identity of a method or statement node within one model build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ElementId(pub u32);

impl ElementId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ElementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SourceLocation {
    /// Path relative to the project root, `/`-separated.
    pub file: String,
    /// 1-based.
    pub line: u32,
    /// 1-based, counted in characters.
    pub column: u32,
    pub element_id: ElementId,
}

/// Half-open byte range into a unit's source text.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ByteSpan {
    pub start: usize,
    pub end: usize,
}

impl ByteSpan {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn contains(&self, other: &ByteSpan) -> bool {
        self.start <= other.start && other.end <= self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StmtKind {
    Call,
    Conditional,
    Loop,
    Return,
    Block,
    Other,
}

/// Where a node sits relative to its parent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeRole {
    /// A statement (or tail expression) of a block.
    Statement,
    /// Then-branch of an `if`.
    Then,
    /// Else-branch of an `if` (a block or a nested `if`), or the diverging
    /// block of a `let ... else`.
    Else,
    /// Body of a `match` arm.
    Arm,
    /// Body of a loop.
    LoopBody,
    /// Closure defined inside the method body.
    Closure,
    /// Structural expression found inside another expression.
    Nested,
}

/// How the instrumenter can attach a hit counter to an element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Probe {
    /// Not instrumentable (e.g. an `else if` head).
    None,
    /// Insert a probe statement at this byte offset, right before the
    /// statement.
    Before(usize),
    /// Insert a probe statement right after the opening brace at this offset.
    BlockEntry(usize),
    /// Wrap this expression as `{ probe; expr }`.
    Wrap(ByteSpan),
}

impl Probe {
    pub fn is_some(&self) -> bool {
        !matches!(self, Probe::None)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Literal {
    Bool(bool),
    Int(i128),
    Float(f64),
    Str(String),
    Char(char),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

/// Literal-only view of a call argument. Anything that is not built from
/// literals, `!` and comparisons is [`ConstExpr::Opaque`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ConstExpr {
    Lit(Literal),
    Not(Box<ConstExpr>),
    Compare(CmpOp, Box<ConstExpr>, Box<ConstExpr>),
    Opaque,
}

impl ConstExpr {
    pub fn literal(&self) -> Option<&Literal> {
        match self {
            ConstExpr::Lit(l) => Some(l),
            _ => None,
        }
    }

    /// Folds the expression to a boolean when it is made only of literals.
    pub fn eval_bool(&self) -> Option<bool> {
        match self {
            ConstExpr::Lit(Literal::Bool(b)) => Some(*b),
            ConstExpr::Lit(_) | ConstExpr::Opaque => None,
            ConstExpr::Not(inner) => inner.eval_bool().map(|b| !b),
            ConstExpr::Compare(op, lhs, rhs) => {
                let ord = compare_literals(lhs.literal()?, rhs.literal()?)?;
                Some(match op {
                    CmpOp::Eq => ord.is_eq(),
                    CmpOp::Ne => !ord.is_eq(),
                    CmpOp::Lt => ord.is_lt(),
                    CmpOp::Le => ord.is_le(),
                    CmpOp::Gt => ord.is_gt(),
                    CmpOp::Ge => ord.is_ge(),
                })
            }
        }
    }
}

/// Orders two literals of the same kind; `None` for mixed kinds or NaN.
pub fn compare_literals(a: &Literal, b: &Literal) -> Option<core::cmp::Ordering> {
    match (a, b) {
        (Literal::Bool(x), Literal::Bool(y)) => Some(x.cmp(y)),
        (Literal::Int(x), Literal::Int(y)) => Some(x.cmp(y)),
        (Literal::Float(x), Literal::Float(y)) => x.partial_cmp(y),
        (Literal::Str(x), Literal::Str(y)) => Some(x.cmp(y)),
        (Literal::Char(x), Literal::Char(y)) => Some(x.cmp(y)),
        _ => None,
    }
}

/// One call along a statement's call spine.
#[derive(Debug, Clone, PartialEq)]
pub struct CallRef {
    /// Last path segment of the callee, or the method/macro name.
    pub name: String,
    /// Path segments before the name (`Self`, a type, a module).
    pub qualifier: Vec<String>,
    /// `x.name(..)` form.
    pub receiver: bool,
    pub is_macro: bool,
    pub args: Vec<ConstExpr>,
    pub span: ByteSpan,
    /// Project-local method this call resolves to, filled by
    /// [`ModelBuilder::finish`].
    pub resolved: Option<ElementId>,
}

/// Calls found on the spine of a statement expression, outermost first.
///
/// For `let v = parse(x).unwrap();` the spine is `[unwrap, parse]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CallInfo {
    pub spine: Vec<CallRef>,
    /// Span of the whole expression the node stands for.
    pub expr_span: ByteSpan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: ElementId,
    pub method: ElementId,
    pub parent: Option<ElementId>,
    pub kind: StmtKind,
    pub role: NodeRole,
    pub span: ByteSpan,
    pub location: SourceLocation,
    /// Pre-order index within the method body.
    pub order: u32,
    pub children: Vec<ElementId>,
    pub probe: Probe,
    pub call: Option<CallInfo>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TargetKind {
    Lib,
    Bin(String),
    Test(String),
}

impl fmt::Display for TargetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TargetKind::Lib => f.write_str("lib"),
            TargetKind::Bin(n) => write!(f, "bin:{n}"),
            TargetKind::Test(n) => write!(f, "test:{n}"),
        }
    }
}

/// A compilation target a unit is compiled into, and the unit's module path
/// inside it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Membership {
    pub target: TargetKind,
    pub module_path: Vec<String>,
    pub is_root: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Unit {
    pub path: String,
    pub source: String,
    pub memberships: Vec<Membership>,
    line_starts: Vec<usize>,
}

impl Unit {
    pub fn new(path: impl Into<String>, source: impl Into<String>, memberships: Vec<Membership>) -> Self {
        let source = source.into();
        let mut line_starts = Vec::with_capacity(source.len() / 32 + 1);
        line_starts.push(0);
        line_starts.extend(source.match_indices('\n').map(|(i, _)| i + 1));
        Self { path: path.into(), source, memberships, line_starts }
    }

    pub fn is_crate_root(&self) -> bool {
        self.memberships.iter().any(|m| m.is_root)
    }

    /// 1-based line and character column of a byte offset.
    pub fn line_col(&self, offset: usize) -> (u32, u32) {
        let line = self.line_starts.partition_point(|&s| s <= offset) - 1;
        let start = self.line_starts[line];
        let end = offset.min(self.source.len());
        let col = self.source.get(start..end).map_or(end - start, |s| s.chars().count());
        (line as u32 + 1, col as u32 + 1)
    }

    /// Byte range of a 1-based line, without its line terminator.
    pub fn line_span(&self, line: u32) -> Option<ByteSpan> {
        let idx = (line as usize).checked_sub(1)?;
        let start = *self.line_starts.get(idx)?;
        let mut end = self.line_starts.get(idx + 1).map_or(self.source.len(), |&n| n - 1);
        if end > start && self.source.as_bytes()[end - 1] == b'\r' {
            end -= 1;
        }
        Some(ByteSpan::new(start, end))
    }

    pub fn text(&self, span: ByteSpan) -> Option<&str> {
        self.source.get(span.start..span.end)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Method {
    pub id: ElementId,
    pub name: String,
    /// Inline module path inside the unit (`tests` for `mod tests { .. }`).
    pub path: Vec<String>,
    /// Impl or trait the method belongs to.
    pub owner: Option<String>,
    pub signature: String,
    /// Attribute paths on the item (`test`, `should_panic`, ...).
    pub markers: Vec<String>,
    pub unit: usize,
    pub location: SourceLocation,
    pub span: ByteSpan,
    pub has_receiver: bool,
    /// Declared inside another function body.
    pub nested: bool,
    pub entry_probe: Probe,
    /// Top-level statements of the body.
    pub roots: Vec<ElementId>,
    /// Every node of the body in pre-order.
    pub nodes: Vec<ElementId>,
}

/// Either kind of model element.
#[derive(Debug, Clone, Copy)]
pub enum Element<'a> {
    Method(&'a Method),
    Node(&'a Node),
}

impl<'a> Element<'a> {
    pub fn location(&self) -> &'a SourceLocation {
        match self {
            Element::Method(m) => &m.location,
            Element::Node(n) => &n.location,
        }
    }

    pub fn probe(&self) -> Probe {
        match self {
            Element::Method(m) => m.entry_probe,
            Element::Node(n) => n.probe,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Method(u32),
    Node(u32),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProgramModel {
    pub package: String,
    units: Vec<Unit>,
    methods: Vec<Method>,
    nodes: Vec<Node>,
    slots: Vec<Slot>,
}

impl ProgramModel {
    pub fn units(&self) -> &[Unit] {
        &self.units
    }

    pub fn methods(&self) -> &[Method] {
        &self.methods
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn element_count(&self) -> usize {
        self.slots.len()
    }

    pub fn element(&self, id: ElementId) -> Option<Element<'_>> {
        match *self.slots.get(id.index())? {
            Slot::Method(i) => Some(Element::Method(&self.methods[i as usize])),
            Slot::Node(i) => Some(Element::Node(&self.nodes[i as usize])),
        }
    }

    pub fn method(&self, id: ElementId) -> Option<&Method> {
        match self.element(id)? {
            Element::Method(m) => Some(m),
            Element::Node(_) => None,
        }
    }

    pub fn node(&self, id: ElementId) -> Option<&Node> {
        match self.element(id)? {
            Element::Node(n) => Some(n),
            Element::Method(_) => None,
        }
    }

    pub fn unit_of(&self, method: &Method) -> &Unit {
        &self.units[method.unit]
    }

    pub fn unit_by_path(&self, path: &str) -> Option<&Unit> {
        self.units.iter().find(|u| u.path == path)
    }

    /// Strict ancestors of a node, nearest first.
    pub fn ancestors(&self, id: ElementId) -> impl Iterator<Item = &Node> + '_ {
        let mut cur = self.node(id).and_then(|n| n.parent);
        core::iter::from_fn(move || {
            let node = self.node(cur?)?;
            cur = node.parent;
            Some(node)
        })
    }

    /// The node and all nodes below it, in pre-order.
    pub fn subtree(&self, id: ElementId) -> Vec<&Node> {
        let mut out = Vec::new();
        let mut stack = Vec::new();
        stack.push(id);
        while let Some(cur) = stack.pop() {
            if let Some(node) = self.node(cur) {
                out.push(node);
                stack.extend(node.children.iter().rev().copied());
            }
        }
        out
    }

    /// Whether the node sits inside a closure of its method.
    pub fn in_closure(&self, id: ElementId) -> bool {
        self.ancestors(id).any(|a| a.role == NodeRole::Closure)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("unknown element {0}")]
    UnknownElement(ElementId),
    #[error("unit index {0} out of range")]
    UnknownUnit(usize),
    #[error("element {child} added under {parent} which belongs to another method")]
    ForeignParent { parent: ElementId, child: ElementId },
    #[error("span {start}..{end} is outside of unit {unit}")]
    SpanOutOfRange { unit: String, start: usize, end: usize },
}

pub struct MethodSpec {
    pub unit: usize,
    pub name: String,
    pub path: Vec<String>,
    pub owner: Option<String>,
    pub signature: String,
    pub markers: Vec<String>,
    pub span: ByteSpan,
    pub has_receiver: bool,
    pub nested: bool,
    pub entry_probe: Probe,
}

pub struct NodeSpec {
    pub method: ElementId,
    pub parent: Option<ElementId>,
    pub kind: StmtKind,
    pub role: NodeRole,
    pub span: ByteSpan,
    pub probe: Probe,
    pub call: Option<CallInfo>,
}

/// Incremental construction of a [`ProgramModel`].
///
/// Nodes must be added in pre-order: a parent before its children, siblings
/// in source order.
pub struct ModelBuilder {
    model: ProgramModel,
}

impl ModelBuilder {
    pub fn new(package: impl Into<String>) -> Self {
        Self {
            model: ProgramModel {
                package: package.into(),
                units: Vec::new(),
                methods: Vec::new(),
                nodes: Vec::new(),
                slots: Vec::new(),
            },
        }
    }

    pub fn add_unit(&mut self, unit: Unit) -> usize {
        self.model.units.push(unit);
        self.model.units.len() - 1
    }

    pub fn unit(&self, idx: usize) -> Option<&Unit> {
        self.model.units.get(idx)
    }

    fn next_id(&self) -> ElementId {
        ElementId(self.model.slots.len() as u32)
    }

    fn locate(&self, unit: usize, span: ByteSpan, id: ElementId) -> Result<SourceLocation, ModelError> {
        let u = self.model.units.get(unit).ok_or(ModelError::UnknownUnit(unit))?;
        if span.start > span.end || span.end > u.source.len() {
            return Err(ModelError::SpanOutOfRange { unit: u.path.clone(), start: span.start, end: span.end });
        }
        let (line, column) = u.line_col(span.start);
        Ok(SourceLocation { file: u.path.clone(), line, column, element_id: id })
    }

    pub fn add_method(&mut self, spec: MethodSpec) -> Result<ElementId, ModelError> {
        let id = self.next_id();
        let location = self.locate(spec.unit, spec.span, id)?;
        self.model.slots.push(Slot::Method(self.model.methods.len() as u32));
        self.model.methods.push(Method {
            id,
            name: spec.name,
            path: spec.path,
            owner: spec.owner,
            signature: spec.signature,
            markers: spec.markers,
            unit: spec.unit,
            location,
            span: spec.span,
            has_receiver: spec.has_receiver,
            nested: spec.nested,
            entry_probe: spec.entry_probe,
            roots: Vec::new(),
            nodes: Vec::new(),
        });
        Ok(id)
    }

    pub fn add_node(&mut self, spec: NodeSpec) -> Result<ElementId, ModelError> {
        let id = self.next_id();
        let midx = match self.model.slots.get(spec.method.index()) {
            Some(Slot::Method(i)) => *i as usize,
            _ => return Err(ModelError::UnknownElement(spec.method)),
        };
        if let Some(parent) = spec.parent {
            match self.model.slots.get(parent.index()) {
                Some(Slot::Node(p)) if self.model.nodes[*p as usize].method == spec.method => {}
                Some(Slot::Node(_)) => return Err(ModelError::ForeignParent { parent, child: id }),
                _ => return Err(ModelError::UnknownElement(parent)),
            }
        }
        let unit = self.model.methods[midx].unit;
        let location = self.locate(unit, spec.span, id)?;
        let order = self.model.methods[midx].nodes.len() as u32;
        let nidx = self.model.nodes.len() as u32;
        self.model.slots.push(Slot::Node(nidx));
        self.model.nodes.push(Node {
            id,
            method: spec.method,
            parent: spec.parent,
            kind: spec.kind,
            role: spec.role,
            span: spec.span,
            location,
            order,
            children: Vec::new(),
            probe: spec.probe,
            call: spec.call,
        });
        let method = &mut self.model.methods[midx];
        method.nodes.push(id);
        match spec.parent {
            Some(parent) => {
                if let Slot::Node(p) = self.model.slots[parent.index()] {
                    self.model.nodes[p as usize].children.push(id);
                }
            }
            None => method.roots.push(id),
        }
        Ok(id)
    }

    /// Resolves call spines against project-local methods and freezes the
    /// model.
    pub fn finish(mut self) -> ProgramModel {
        let mut by_name: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, m) in self.model.methods.iter().enumerate() {
            by_name.entry(m.name.as_str()).or_default().push(i);
        }
        let mut resolutions = Vec::new();
        for (ni, node) in self.model.nodes.iter().enumerate() {
            let Some(call) = &node.call else { continue };
            let caller = match self.model.slots[node.method.index()] {
                Slot::Method(i) => &self.model.methods[i as usize],
                Slot::Node(_) => continue,
            };
            for (ci, cref) in call.spine.iter().enumerate() {
                if cref.is_macro {
                    continue;
                }
                let Some(cands) = by_name.get(cref.name.as_str()) else { continue };
                if let Some(target) = resolve(&self.model.methods, caller, cref, cands) {
                    resolutions.push((ni, ci, self.model.methods[target].id));
                }
            }
        }
        for (ni, ci, target) in resolutions {
            if let Some(call) = &mut self.model.nodes[ni].call {
                call.spine[ci].resolved = Some(target);
            }
        }
        self.model
    }
}

fn is_type_segment(seg: &str) -> bool {
    seg.chars().next().is_some_and(|c| c.is_ascii_uppercase())
}

// Picks the best project-local candidate for a call by name, or `None` when
// the qualifier rules every candidate out.
fn resolve(methods: &[Method], caller: &Method, cref: &CallRef, cands: &[usize]) -> Option<usize> {
    let wanted_owner: Option<&str> = match cref.qualifier.last().map(String::as_str) {
        Some("Self") => Some(caller.owner.as_deref()?),
        Some(seg) if is_type_segment(seg) => Some(seg),
        _ => None,
    };
    cands
        .iter()
        .copied()
        .filter(|&i| {
            let m = &methods[i];
            if cref.receiver && !m.has_receiver {
                return false;
            }
            match wanted_owner {
                Some(owner) => m.owner.as_deref() == Some(owner),
                // Plain or module-qualified paths name free functions; a
                // receiver call may land on any method.
                None => cref.receiver || m.owner.is_none(),
            }
        })
        .min_by_key(|&i| {
            let m = &methods[i];
            let owner_rank = u8::from(m.owner.is_some() && m.owner != caller.owner);
            let unit_rank = u8::from(m.unit != caller.unit);
            (owner_rank, unit_rank, m.id)
        })
}
