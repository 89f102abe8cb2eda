//! Recognition rules for tests, assertion primitives and the explicit
//! failure primitive of the host test framework.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::model::{compare_literals, CallRef};
use crate::pattern::NamePattern;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RulesError {
    #[error("at least one test marker rule is required")]
    NoMarkerRules,
    #[error("at least one assertion name rule is required")]
    NoAssertionRules,
    #[error("fail primitive name is empty")]
    EmptyFailPrimitive,
}

const TRUTH: &[&str] = &["assert", "debug_assert", "assert_true"];
const FALSITY: &[&str] = &["assert_false"];
const EQUALITY: &[&str] = &["assert_eq", "debug_assert_eq", "assert_equals"];
const INEQUALITY: &[&str] = &["assert_ne", "debug_assert_ne", "assert_not_equals"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rules {
    test_markers: Vec<NamePattern>,
    assertion_names: Vec<NamePattern>,
    fail_primitive: String,
}

impl Default for Rules {
    /// Rules for the built-in Rust test harness.
    fn default() -> Self {
        Self {
            test_markers: alloc::vec![NamePattern::new("test")],
            assertion_names: alloc::vec![NamePattern::new("assert*"), NamePattern::new("debug_assert*")],
            fail_primitive: "panic!".to_string(),
        }
    }
}

impl Rules {
    /// `fail_primitive` ending in `!` names a macro.
    pub fn new(
        test_markers: Vec<NamePattern>,
        assertion_names: Vec<NamePattern>,
        fail_primitive: impl Into<String>,
    ) -> Result<Self, RulesError> {
        let fail_primitive = fail_primitive.into();
        if test_markers.is_empty() {
            return Err(RulesError::NoMarkerRules);
        }
        if assertion_names.is_empty() {
            return Err(RulesError::NoAssertionRules);
        }
        if fail_primitive.trim_end_matches('!').is_empty() {
            return Err(RulesError::EmptyFailPrimitive);
        }
        Ok(Self { test_markers, assertion_names, fail_primitive })
    }

    pub fn test_markers(&self) -> &[NamePattern] {
        &self.test_markers
    }

    pub fn assertion_names(&self) -> &[NamePattern] {
        &self.assertion_names
    }

    pub fn fail_primitive(&self) -> &str {
        &self.fail_primitive
    }

    /// First marker on an item that identifies it as a test.
    pub fn test_marker<'a>(&self, markers: &'a [String]) -> Option<&'a str> {
        markers
            .iter()
            .find(|m| self.test_markers.iter().any(|p| p.matches(m)))
            .map(String::as_str)
    }

    pub fn is_assertion(&self, callee: &str) -> bool {
        self.assertion_names.iter().any(|p| p.matches(callee))
    }

    /// Whether an assertion call can never pass, judged from literal
    /// arguments only.
    pub fn is_forced_fail(&self, call: &CallRef) -> bool {
        if !self.is_assertion(&call.name) {
            return false;
        }
        let name = call.name.as_str();
        let args = &call.args;
        if TRUTH.contains(&name) {
            args.first().and_then(|a| a.eval_bool()) == Some(false)
        } else if FALSITY.contains(&name) {
            args.first().and_then(|a| a.eval_bool()) == Some(true)
        } else if EQUALITY.contains(&name) || INEQUALITY.contains(&name) {
            let (Some(a), Some(b)) = (args.first().and_then(|a| a.literal()), args.get(1).and_then(|b| b.literal()))
            else {
                return false;
            };
            match compare_literals(a, b) {
                Some(ord) => ord.is_eq() != EQUALITY.contains(&name),
                None => false,
            }
        } else {
            false
        }
    }

    /// Argument-free call to the fail primitive, e.g. `panic!()`.
    pub fn fail_call(&self) -> String {
        let mut s = self.fail_primitive.clone();
        s.push_str("()");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ByteSpan, CmpOp, ConstExpr, Literal};
    use alloc::boxed::Box;
    use alloc::vec;

    fn call(name: &str, args: Vec<ConstExpr>) -> CallRef {
        CallRef {
            name: name.to_string(),
            qualifier: vec![],
            receiver: false,
            is_macro: true,
            args,
            span: ByteSpan::default(),
            resolved: None,
        }
    }

    fn lit(l: Literal) -> ConstExpr {
        ConstExpr::Lit(l)
    }

    #[test]
    fn default_rules_recognize_rust_harness() {
        let r = Rules::default();
        let markers = vec!["should_panic".to_string(), "test".to_string()];
        assert_eq!(r.test_marker(&markers), Some("test"));
        assert_eq!(r.test_marker(&["ignore".to_string()]), None);
        for name in ["assert", "assert_eq", "assert_ne", "assert_matches", "debug_assert_eq"] {
            assert!(r.is_assertion(name), "{name}");
        }
        for name in ["panic", "check_all", "unreachable", "println"] {
            assert!(!r.is_assertion(name), "{name}");
        }
        assert_eq!(r.fail_call(), "panic!()");
    }

    #[test]
    fn empty_rule_lists_are_rejected() {
        assert_eq!(Rules::new(vec![], vec!["assert*".into()], "panic!"), Err(RulesError::NoMarkerRules));
        assert_eq!(Rules::new(vec!["test".into()], vec![], "panic!"), Err(RulesError::NoAssertionRules));
        assert_eq!(Rules::new(vec!["test".into()], vec!["a".into()], "!"), Err(RulesError::EmptyFailPrimitive));
        let r = Rules::new(vec!["test".into()], vec!["check*".into()], "fail").unwrap();
        assert_eq!(r.fail_call(), "fail()");
    }

    #[test]
    fn forced_fail_truth_assertions() {
        let r = Rules::default();
        assert!(r.is_forced_fail(&call("assert", vec![lit(Literal::Bool(false))])));
        assert!(r.is_forced_fail(&call("assert", vec![lit(Literal::Bool(false)), ConstExpr::Opaque])));
        assert!(r.is_forced_fail(&call("assert", vec![ConstExpr::Not(Box::new(lit(Literal::Bool(true))))])));
        assert!(!r.is_forced_fail(&call("assert", vec![lit(Literal::Bool(true))])));
        assert!(!r.is_forced_fail(&call("assert", vec![ConstExpr::Opaque])));
        assert!(!r.is_forced_fail(&call("assert", vec![])));
        let one_eq_two =
            ConstExpr::Compare(CmpOp::Eq, Box::new(lit(Literal::Int(1))), Box::new(lit(Literal::Int(2))));
        assert!(r.is_forced_fail(&call("debug_assert", vec![one_eq_two])));
    }

    #[test]
    fn forced_fail_equality_assertions() {
        let r = Rules::default();
        let ints = |a, b| vec![lit(Literal::Int(a)), lit(Literal::Int(b))];
        assert!(r.is_forced_fail(&call("assert_eq", ints(1, 2))));
        assert!(!r.is_forced_fail(&call("assert_eq", ints(2, 2))));
        assert!(r.is_forced_fail(&call("assert_ne", ints(3, 3))));
        assert!(!r.is_forced_fail(&call("assert_ne", ints(3, 4))));
        let strs = vec![lit(Literal::Str("ok".to_string())), lit(Literal::Str("err".to_string()))];
        assert!(r.is_forced_fail(&call("assert_eq", strs)));
        // Mixed literal kinds and non-literals never fold.
        assert!(!r.is_forced_fail(&call("assert_eq", vec![lit(Literal::Int(1)), lit(Literal::Str("1".into()))])));
        assert!(!r.is_forced_fail(&call("assert_eq", vec![lit(Literal::Int(1)), ConstExpr::Opaque])));
        // Not an assertion under the rules.
        assert!(!r.is_forced_fail(&call("check_eq", ints(1, 2))));
    }
}
