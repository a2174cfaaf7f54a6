use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::expr::{HolomorphicExpr, NodeKind};
use super::C;

/// One node of a serialized expression graph. Operands refer to earlier
/// entries of [`ExprGraph::nodes`] by index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum SerialNode {
    Const { re: f64, im: f64 },
    Var,
    Sum { a: usize, b: usize },
    Product { a: usize, b: usize },
    Quotient { a: usize, b: usize },
    Power { a: usize, k: i32 },
    Exp { a: usize },
    Compose { outer: usize, inner: usize },
}

/// Shared-node serialization of a list of expressions.
///
/// Nodes are listed in dependency order and every shared subexpression is
/// written once, so identity between roots (such as a third coordinate kept
/// unchanged by a deformation) survives a round trip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExprGraph {
    pub nodes: Vec<SerialNode>,
    pub roots: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GraphError {
    #[error("node {node} refers to {operand}, which is not an earlier node")]
    ForwardReference { node: usize, operand: usize },
    #[error("root {0} is out of range")]
    BadRoot(usize),
}

fn children(kind: &NodeKind) -> Vec<&HolomorphicExpr> {
    match kind {
        NodeKind::Const(_) | NodeKind::Var => vec![],
        NodeKind::Sum(a, b) | NodeKind::Product(a, b) | NodeKind::Quotient(a, b) | NodeKind::Compose(a, b) => {
            vec![a, b]
        }
        NodeKind::Power(a, _) | NodeKind::Exp(a) => vec![a],
    }
}

impl ExprGraph {
    pub fn from_exprs(roots: &[HolomorphicExpr]) -> Self {
        let mut index: HashMap<usize, usize> = HashMap::new();
        let mut nodes = Vec::new();
        let mut out_roots = Vec::with_capacity(roots.len());
        for root in roots {
            // Iterative post-order: deep chains must not exhaust the stack.
            let mut stack: Vec<(HolomorphicExpr, bool)> = vec![(root.clone(), false)];
            while let Some((e, expanded)) = stack.pop() {
                let id = e.node_id();
                if index.contains_key(&id) {
                    continue;
                }
                if !expanded {
                    stack.push((e.clone(), true));
                    for c in children(e.kind()) {
                        if !index.contains_key(&c.node_id()) {
                            stack.push((c.clone(), false));
                        }
                    }
                    continue;
                }
                let at = |x: &HolomorphicExpr| index[&x.node_id()];
                let node = match e.kind() {
                    NodeKind::Const(c) => SerialNode::Const { re: c.re, im: c.im },
                    NodeKind::Var => SerialNode::Var,
                    NodeKind::Sum(a, b) => SerialNode::Sum { a: at(a), b: at(b) },
                    NodeKind::Product(a, b) => SerialNode::Product { a: at(a), b: at(b) },
                    NodeKind::Quotient(a, b) => SerialNode::Quotient { a: at(a), b: at(b) },
                    NodeKind::Power(a, k) => SerialNode::Power { a: at(a), k: *k },
                    NodeKind::Exp(a) => SerialNode::Exp { a: at(a) },
                    NodeKind::Compose(o, i) => SerialNode::Compose { outer: at(o), inner: at(i) },
                };
                index.insert(id, nodes.len());
                nodes.push(node);
            }
            out_roots.push(index[&root.node_id()]);
        }
        ExprGraph { nodes, roots: out_roots }
    }

    pub fn to_exprs(&self) -> Result<Vec<HolomorphicExpr>, GraphError> {
        let mut built: Vec<HolomorphicExpr> = Vec::with_capacity(self.nodes.len());
        for (k, node) in self.nodes.iter().enumerate() {
            let get = |j: usize| -> Result<HolomorphicExpr, GraphError> {
                built.get(j).cloned().ok_or(GraphError::ForwardReference { node: k, operand: j })
            };
            let kind = match *node {
                SerialNode::Const { re, im } => NodeKind::Const(C::new(re, im)),
                SerialNode::Var => NodeKind::Var,
                SerialNode::Sum { a, b } => NodeKind::Sum(get(a)?, get(b)?),
                SerialNode::Product { a, b } => NodeKind::Product(get(a)?, get(b)?),
                SerialNode::Quotient { a, b } => NodeKind::Quotient(get(a)?, get(b)?),
                SerialNode::Power { a, k } => NodeKind::Power(get(a)?, k),
                SerialNode::Exp { a } => NodeKind::Exp(get(a)?),
                SerialNode::Compose { outer, inner } => NodeKind::Compose(get(outer)?, get(inner)?),
            };
            built.push(HolomorphicExpr::from_kind(kind));
        }
        self.roots
            .iter()
            .map(|&r| built.get(r).cloned().ok_or(GraphError::BadRoot(r)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shared_nodes_survive_a_round_trip() {
        let z = HolomorphicExpr::var();
        let h = (&z - &HolomorphicExpr::real(0.5)).powi(-1) + HolomorphicExpr::real(1.0);
        let a = &h * &z;
        let b = z.try_div(&h).unwrap();
        let g = ExprGraph::from_exprs(&[a.clone(), b.clone(), a.clone()]);
        let text = serde_json::to_string(&g).unwrap();
        let back: ExprGraph = serde_json::from_str(&text).unwrap();
        let e = back.to_exprs().unwrap();
        assert!(e[0].ptr_eq(&e[2]));
        for w in [C::new(0.1, 0.2), C::new(-0.7, 0.3)] {
            assert_eq!(e[0].eval(w).unwrap(), a.eval(w).unwrap());
            assert_eq!(e[1].eval(w).unwrap(), b.eval(w).unwrap());
        }
        assert_eq!(e[1].poles(), b.poles());
    }

    #[test]
    fn forward_references_are_rejected() {
        let g = ExprGraph {
            nodes: vec![SerialNode::Exp { a: 0 }],
            roots: vec![0],
        };
        assert!(matches!(g.to_exprs(), Err(GraphError::ForwardReference { .. })));
    }
}
