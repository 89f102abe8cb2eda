//! Lowers one parsed source file into model methods and statement nodes.

use proc_macro2::{LineColumn, Span};
use quote::ToTokens;
use rtj_core::model::{
    ByteSpan, CallInfo, CallRef, CmpOp, ConstExpr, ElementId, Literal, MethodSpec, ModelBuilder, NodeRole, NodeSpec,
    Probe, StmtKind,
};
use syn::punctuated::Punctuated;
use syn::spanned::Spanned;
use syn::visit::Visit;
use syn::{BinOp, Block, Expr, ImplItem, Item, Lit, Macro, Signature, Stmt, TraitItem, UnOp};

use super::FrontendError;

/// Byte offsets from the 1-based line / 0-based char column pairs that
/// `proc_macro2` reports.
pub struct LineIndex<'a> {
    source: &'a str,
    starts: Vec<usize>,
}

impl<'a> LineIndex<'a> {
    pub fn new(source: &'a str) -> Self {
        let mut starts = vec![0];
        starts.extend(source.match_indices('\n').map(|(i, _)| i + 1));
        Self { source, starts }
    }

    pub fn offset(&self, lc: LineColumn) -> usize {
        let Some(&start) = self.starts.get(lc.line.saturating_sub(1)) else { return self.source.len() };
        let rest = &self.source[start..];
        rest.char_indices().nth(lc.column).map_or(self.source.len().min(start + rest.len()), |(i, _)| start + i)
    }

    pub fn span(&self, span: Span) -> ByteSpan {
        ByteSpan::new(self.offset(span.start()), self.offset(span.end()))
    }
}

fn path_string(path: &syn::Path) -> String {
    path.segments.iter().map(|s| s.ident.to_string()).collect::<Vec<_>>().join("::")
}

fn const_expr(expr: &Expr) -> ConstExpr {
    match expr {
        Expr::Lit(l) => match &l.lit {
            Lit::Bool(b) => ConstExpr::Lit(Literal::Bool(b.value)),
            Lit::Int(i) => i.base10_parse::<i128>().map_or(ConstExpr::Opaque, |v| ConstExpr::Lit(Literal::Int(v))),
            Lit::Float(f) => f.base10_parse::<f64>().map_or(ConstExpr::Opaque, |v| ConstExpr::Lit(Literal::Float(v))),
            Lit::Str(s) => ConstExpr::Lit(Literal::Str(s.value())),
            Lit::Char(c) => ConstExpr::Lit(Literal::Char(c.value())),
            _ => ConstExpr::Opaque,
        },
        Expr::Paren(p) => const_expr(&p.expr),
        Expr::Group(g) => const_expr(&g.expr),
        Expr::Unary(u) => match (&u.op, const_expr(&u.expr)) {
            (UnOp::Not(_), inner @ (ConstExpr::Lit(Literal::Bool(_)) | ConstExpr::Not(_) | ConstExpr::Compare(..))) => {
                ConstExpr::Not(Box::new(inner))
            }
            (UnOp::Neg(_), ConstExpr::Lit(Literal::Int(v))) => ConstExpr::Lit(Literal::Int(-v)),
            (UnOp::Neg(_), ConstExpr::Lit(Literal::Float(v))) => ConstExpr::Lit(Literal::Float(-v)),
            _ => ConstExpr::Opaque,
        },
        Expr::Binary(b) => {
            let op = match b.op {
                BinOp::Eq(_) => CmpOp::Eq,
                BinOp::Ne(_) => CmpOp::Ne,
                BinOp::Lt(_) => CmpOp::Lt,
                BinOp::Le(_) => CmpOp::Le,
                BinOp::Gt(_) => CmpOp::Gt,
                BinOp::Ge(_) => CmpOp::Ge,
                _ => return ConstExpr::Opaque,
            };
            match (const_expr(&b.left), const_expr(&b.right)) {
                (l @ ConstExpr::Lit(_), r @ ConstExpr::Lit(_)) => ConstExpr::Compare(op, Box::new(l), Box::new(r)),
                _ => ConstExpr::Opaque,
            }
        }
        _ => ConstExpr::Opaque,
    }
}

struct Ctx<'a, 'b> {
    b: &'a mut ModelBuilder,
    idx: &'a LineIndex<'b>,
    unit: usize,
    /// Inline module path inside the unit.
    path: Vec<String>,
}

impl Ctx<'_, '_> {
    fn macro_ref(&self, mac: &Macro) -> CallRef {
        let name = mac.path.segments.last().map(|s| s.ident.to_string()).unwrap_or_default();
        let qualifier = mac.path.segments.iter().rev().skip(1).rev().map(|s| s.ident.to_string()).collect();
        let args = mac
            .parse_body_with(Punctuated::<Expr, syn::Token![,]>::parse_terminated)
            .map(|p| p.iter().map(const_expr).collect())
            .unwrap_or_default();
        CallRef { name, qualifier, receiver: false, is_macro: true, args, span: self.idx.span(mac.span()), resolved: None }
    }

    /// Calls met walking down from `expr` through receivers, operands of
    /// `?`/`.await`/casts/references and assignment right-hand sides.
    fn spine(&self, expr: &Expr) -> Vec<CallRef> {
        let mut out = Vec::new();
        let mut cur = expr;
        loop {
            cur = match cur {
                Expr::Call(c) => {
                    if let Expr::Path(p) = &*c.func {
                        let segs: Vec<String> = p.path.segments.iter().map(|s| s.ident.to_string()).collect();
                        if let Some((name, qualifier)) = segs.split_last() {
                            out.push(CallRef {
                                name: name.clone(),
                                qualifier: qualifier.to_vec(),
                                receiver: false,
                                is_macro: false,
                                args: c.args.iter().map(const_expr).collect(),
                                span: self.idx.span(c.span()),
                                resolved: None,
                            });
                        }
                    }
                    break;
                }
                Expr::MethodCall(m) => {
                    out.push(CallRef {
                        name: m.method.to_string(),
                        qualifier: Vec::new(),
                        receiver: true,
                        is_macro: false,
                        args: m.args.iter().map(const_expr).collect(),
                        span: self.idx.span(m.span()),
                        resolved: None,
                    });
                    &m.receiver
                }
                Expr::Macro(m) => {
                    out.push(self.macro_ref(&m.mac));
                    break;
                }
                Expr::Try(t) => &t.expr,
                Expr::Await(a) => &a.base,
                Expr::Paren(p) => &p.expr,
                Expr::Group(g) => &g.expr,
                Expr::Reference(r) => &r.expr,
                Expr::Unary(u) => &u.expr,
                Expr::Cast(c) => &c.expr,
                Expr::Field(f) => &f.base,
                Expr::Assign(a) => &a.right,
                _ => break,
            };
        }
        out
    }

    fn call_info(&self, expr: &Expr, expr_span: ByteSpan) -> Option<CallInfo> {
        let spine = self.spine(expr);
        (!spine.is_empty()).then_some(CallInfo { spine, expr_span })
    }

    fn method(
        &mut self,
        sig: &Signature,
        attrs: &[syn::Attribute],
        owner: Option<&str>,
        body: &Block,
        nested: bool,
    ) -> Result<(), FrontendError> {
        let instrument = sig.constness.is_none();
        let span = ByteSpan::new(self.idx.span(sig.span()).start, self.idx.span(body.span()).end);
        let brace = self.idx.span(body.brace_token.span.open()).start;
        let has_receiver = sig.receiver().is_some();
        let id = self.b.add_method(MethodSpec {
            unit: self.unit,
            name: sig.ident.to_string(),
            path: self.path.clone(),
            owner: owner.map(str::to_string),
            signature: signature_text(sig),
            markers: attrs.iter().map(|a| path_string(a.path())).collect(),
            span,
            has_receiver,
            nested,
            entry_probe: if instrument { Probe::BlockEntry(brace) } else { Probe::None },
        })?;
        let mut body_walk = Body { ctx: self, method: id, instrument, nested_fns: Vec::new() };
        body_walk.stmts(None, &body.stmts)?;
        let nested_fns = std::mem::take(&mut body_walk.nested_fns);
        for f in nested_fns {
            self.method(&f.sig, &f.attrs, None, &f.block, true)?;
        }
        Ok(())
    }

    fn items(&mut self, items: &[Item]) -> Result<(), FrontendError> {
        for item in items {
            match item {
                Item::Fn(f) => self.method(&f.sig, &f.attrs, None, &f.block, false)?,
                Item::Impl(imp) => {
                    let owner = type_name(&imp.self_ty);
                    for it in &imp.items {
                        if let ImplItem::Fn(f) = it {
                            self.method(&f.sig, &f.attrs, owner.as_deref(), &f.block, false)?;
                        }
                    }
                }
                Item::Trait(t) => {
                    let owner = t.ident.to_string();
                    for it in &t.items {
                        if let TraitItem::Fn(f) = it {
                            if let Some(block) = &f.default {
                                self.method(&f.sig, &f.attrs, Some(&owner), block, false)?;
                            }
                        }
                    }
                }
                Item::Mod(m) => {
                    if let Some((_, inner)) = &m.content {
                        self.path.push(m.ident.to_string());
                        self.items(inner)?;
                        self.path.pop();
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }
}

fn type_name(ty: &syn::Type) -> Option<String> {
    match ty {
        syn::Type::Path(p) => p.path.segments.last().map(|s| s.ident.to_string()),
        syn::Type::Reference(r) => type_name(&r.elem),
        syn::Type::Group(g) => type_name(&g.elem),
        syn::Type::Paren(p) => type_name(&p.elem),
        _ => None,
    }
}

fn signature_text(sig: &Signature) -> String {
    sig.to_token_stream().to_string()
}

struct Body<'c, 'a, 'b> {
    ctx: &'c mut Ctx<'a, 'b>,
    method: ElementId,
    instrument: bool,
    nested_fns: Vec<syn::ItemFn>,
}

impl Body<'_, '_, '_> {
    fn add(
        &mut self,
        parent: Option<ElementId>,
        kind: StmtKind,
        role: NodeRole,
        span: ByteSpan,
        probe: Probe,
        call: Option<CallInfo>,
    ) -> Result<ElementId, FrontendError> {
        let probe = if self.instrument { probe } else { Probe::None };
        Ok(self.ctx.b.add_node(NodeSpec { method: self.method, parent, kind, role, span, probe, call })?)
    }

    fn span(&self, s: Span) -> ByteSpan {
        self.ctx.idx.span(s)
    }

    fn open_brace(&self, block: &Block) -> usize {
        self.span(block.brace_token.span.open()).start
    }

    fn stmts(&mut self, parent: Option<ElementId>, stmts: &[Stmt]) -> Result<(), FrontendError> {
        for s in stmts {
            self.stmt(parent, s)?;
        }
        Ok(())
    }

    fn stmt(&mut self, parent: Option<ElementId>, stmt: &Stmt) -> Result<(), FrontendError> {
        let span = self.span(stmt.span());
        match stmt {
            Stmt::Local(local) => {
                let init = local.init.as_ref();
                let call = init.and_then(|i| self.ctx.call_info(&i.expr, self.span(i.expr.span())));
                match init.and_then(|i| i.diverge.as_ref()) {
                    Some((_, diverge)) => {
                        let id = self.add(parent, StmtKind::Conditional, NodeRole::Statement, span, Probe::Before(span.start), call)?;
                        if let Some(i) = init {
                            self.nested(id, &i.expr, true)?;
                        }
                        self.branch(id, NodeRole::Else, diverge)?;
                    }
                    None => {
                        let kind = if call.is_some() { StmtKind::Call } else { StmtKind::Other };
                        let id = self.add(parent, kind, NodeRole::Statement, span, Probe::Before(span.start), call)?;
                        if let Some(i) = init {
                            self.nested(id, &i.expr, true)?;
                        }
                    }
                }
            }
            Stmt::Item(Item::Fn(f)) => self.nested_fns.push(f.clone()),
            Stmt::Item(_) => {}
            Stmt::Macro(m) => {
                let mac_span = self.span(m.mac.span());
                let call = CallInfo { spine: vec![self.ctx.macro_ref(&m.mac)], expr_span: mac_span };
                self.add(parent, StmtKind::Call, NodeRole::Statement, span, Probe::Before(span.start), Some(call))?;
            }
            Stmt::Expr(expr, _) => {
                let espan = self.span(expr.span());
                self.expr_node(parent, NodeRole::Statement, Probe::Before(espan.start), expr)?;
            }
        }
        Ok(())
    }

    /// Block-valued branch (then, else, arm, loop body) with a probe right
    /// after its opening brace.
    fn branch(&mut self, parent: ElementId, role: NodeRole, expr: &Expr) -> Result<ElementId, FrontendError> {
        match expr {
            Expr::Block(b) if b.label.is_none() => {
                let id = self.block(Some(parent), role, &b.block, self.span(expr.span()))?;
                Ok(id)
            }
            _ => {
                let span = self.span(expr.span());
                self.expr_node(Some(parent), role, Probe::Wrap(span), expr)
            }
        }
    }

    fn block(&mut self, parent: Option<ElementId>, role: NodeRole, block: &Block, span: ByteSpan) -> Result<ElementId, FrontendError> {
        let id = self.add(parent, StmtKind::Block, role, span, Probe::BlockEntry(self.open_brace(block)), None)?;
        self.stmts(Some(id), &block.stmts)?;
        Ok(id)
    }

    /// Adds the node an expression stands for, then its children.
    fn expr_node(&mut self, parent: Option<ElementId>, role: NodeRole, probe: Probe, expr: &Expr) -> Result<ElementId, FrontendError> {
        let span = self.span(expr.span());
        match expr {
            Expr::If(e) => {
                let id = self.add(parent, StmtKind::Conditional, role, span, probe, None)?;
                self.nested(id, &e.cond, true)?;
                let then_span = self.span(e.then_branch.span());
                self.block(Some(id), NodeRole::Then, &e.then_branch, then_span)?;
                if let Some((_, els)) = &e.else_branch {
                    match &**els {
                        Expr::If(_) => {
                            self.expr_node(Some(id), NodeRole::Else, Probe::None, els)?;
                        }
                        other => {
                            self.branch(id, NodeRole::Else, other)?;
                        }
                    }
                }
                Ok(id)
            }
            Expr::Match(e) => {
                let id = self.add(parent, StmtKind::Conditional, role, span, probe, None)?;
                self.nested(id, &e.expr, true)?;
                for arm in &e.arms {
                    self.branch(id, NodeRole::Arm, &arm.body)?;
                }
                Ok(id)
            }
            Expr::ForLoop(e) => {
                let id = self.add(parent, StmtKind::Loop, role, span, probe, None)?;
                self.nested(id, &e.expr, true)?;
                self.block(Some(id), NodeRole::LoopBody, &e.body, self.span(e.body.span()))?;
                Ok(id)
            }
            Expr::While(e) => {
                let id = self.add(parent, StmtKind::Loop, role, span, probe, None)?;
                self.nested(id, &e.cond, true)?;
                self.block(Some(id), NodeRole::LoopBody, &e.body, self.span(e.body.span()))?;
                Ok(id)
            }
            Expr::Loop(e) => {
                let id = self.add(parent, StmtKind::Loop, role, span, probe, None)?;
                self.block(Some(id), NodeRole::LoopBody, &e.body, self.span(e.body.span()))?;
                Ok(id)
            }
            Expr::Block(e) => {
                let id = self.add(parent, StmtKind::Block, role, span, probe, None)?;
                self.stmts(Some(id), &e.block.stmts)?;
                Ok(id)
            }
            Expr::Unsafe(e) => {
                let id = self.add(parent, StmtKind::Block, role, span, probe, None)?;
                self.stmts(Some(id), &e.block.stmts)?;
                Ok(id)
            }
            Expr::Closure(c) => {
                let id = match &*c.body {
                    Expr::Block(b) if b.label.is_none() => {
                        let entry = Probe::BlockEntry(self.open_brace(&b.block));
                        let id = self.add(parent, StmtKind::Block, NodeRole::Closure, span, entry, None)?;
                        self.stmts(Some(id), &b.block.stmts)?;
                        id
                    }
                    body => {
                        let id = self.add(parent, StmtKind::Block, NodeRole::Closure, span, Probe::None, None)?;
                        let bspan = self.span(body.span());
                        self.expr_node(Some(id), NodeRole::Statement, Probe::Wrap(bspan), body)?;
                        id
                    }
                };
                Ok(id)
            }
            Expr::Return(r) => {
                let id = self.add(parent, StmtKind::Return, role, span, probe, None)?;
                if let Some(v) = &r.expr {
                    self.nested(id, v, true)?;
                }
                Ok(id)
            }
            Expr::Macro(m) => {
                let call = CallInfo { spine: vec![self.ctx.macro_ref(&m.mac)], expr_span: span };
                self.add(parent, StmtKind::Call, role, span, probe, Some(call))
            }
            _ => {
                let call = self.ctx.call_info(expr, span);
                let kind = if call.is_some() { StmtKind::Call } else { StmtKind::Other };
                let id = self.add(parent, kind, role, span, probe, call)?;
                self.nested(id, expr, false)?;
                Ok(id)
            }
        }
    }

    /// Structural expressions (conditionals, loops, blocks, closures) inside
    /// `expr` become `Nested` children of `parent`. With `include_self`,
    /// `expr` itself is considered.
    fn nested(&mut self, parent: ElementId, expr: &Expr, include_self: bool) -> Result<(), FrontendError> {
        let mut finder = Finder { found: Vec::new() };
        if include_self {
            finder.visit_expr(expr);
        } else {
            syn::visit::visit_expr(&mut finder, expr);
        }
        for e in finder.found {
            match e {
                Expr::Block(b) => {
                    let span = self.span(e.span());
                    self.block(Some(parent), NodeRole::Nested, &b.block, span)?;
                }
                Expr::Unsafe(b) => {
                    let span = self.span(e.span());
                    self.block(Some(parent), NodeRole::Nested, &b.block, span)?;
                }
                Expr::Async(b) => {
                    let span = self.span(e.span());
                    self.block(Some(parent), NodeRole::Nested, &b.block, span)?;
                }
                _ => {
                    self.expr_node(Some(parent), NodeRole::Nested, Probe::None, e)?;
                }
            }
        }
        Ok(())
    }
}

/// Collects the outermost structural sub-expressions, skipping const
/// contexts (array lengths, const blocks, types) where probes cannot go.
struct Finder<'e> {
    found: Vec<&'e Expr>,
}

impl<'e> Visit<'e> for Finder<'e> {
    fn visit_expr(&mut self, e: &'e Expr) {
        match e {
            Expr::If(_)
            | Expr::Match(_)
            | Expr::ForLoop(_)
            | Expr::While(_)
            | Expr::Loop(_)
            | Expr::Closure(_)
            | Expr::Async(_)
            | Expr::Unsafe(_) => self.found.push(e),
            Expr::Block(b) if b.label.is_none() => self.found.push(e),
            Expr::Const(_) => {}
            _ => syn::visit::visit_expr(self, e),
        }
    }

    fn visit_expr_repeat(&mut self, e: &'e syn::ExprRepeat) {
        self.visit_expr(&e.expr);
    }

    fn visit_type(&mut self, _: &'e syn::Type) {}

    fn visit_item(&mut self, _: &'e syn::Item) {}

    fn visit_generic_argument(&mut self, _: &'e syn::GenericArgument) {}
}

/// Adds every function of one file to the builder.
pub fn walk_unit(b: &mut ModelBuilder, unit: usize, path: &str, source: &str) -> Result<(), FrontendError> {
    let file = syn::parse_file(source).map_err(|e| FrontendError::parse(path, &e))?;
    let idx = LineIndex::new(source);
    let mut ctx = Ctx { b, idx: &idx, unit, path: Vec::new() };
    ctx.items(&file.items)
}
