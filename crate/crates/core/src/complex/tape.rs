use std::collections::HashMap;

use super::expr::{HolomorphicExpr, NodeKind};
use super::{ComplexError, Result, C};

/// Radius around each declared pole inside which evaluation is refused:
/// `rel · max(1, |pole|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoleExclusion {
    pub rel: f64,
}

impl Default for PoleExclusion {
    fn default() -> Self {
        PoleExclusion { rel: 1e-13 }
    }
}

impl PoleExclusion {
    pub fn radius(&self, pole: C) -> f64 {
        self.rel * pole.norm().max(1.0)
    }
}

#[derive(Debug, Clone, Copy)]
enum Ins {
    Const(C),
    Var,
    Add(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    Pow(usize, i32),
    Exp(usize),
}

/// Straight-line program evaluating several expressions at once.
///
/// Shared subtrees are evaluated once, so expression DAGs that would be
/// exponential as trees evaluate in time linear in their distinct nodes.
#[derive(Debug, Clone)]
pub struct Tape {
    ins: Vec<Ins>,
    outputs: Vec<usize>,
    poles: Vec<C>,
    exclusion: PoleExclusion,
}

impl Tape {
    pub fn compile(roots: &[HolomorphicExpr]) -> Tape {
        let mut ins = vec![Ins::Var];
        // Key: (node address, register currently bound to the variable).
        let mut memo: HashMap<(usize, usize), usize> = HashMap::new();
        let mut outputs = Vec::with_capacity(roots.len());
        for root in roots {
            outputs.push(compile_iter(root, 0, &mut ins, &mut memo));
        }
        let mut poles: Vec<C> = roots.iter().flat_map(|r| r.poles().iter().copied()).collect();
        poles.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        poles.dedup();
        Tape {
            ins,
            outputs,
            poles,
            exclusion: PoleExclusion::default(),
        }
    }

    pub fn with_exclusion(mut self, exclusion: PoleExclusion) -> Tape {
        self.exclusion = exclusion;
        self
    }

    pub fn len(&self) -> usize {
        self.ins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ins.is_empty()
    }

    pub fn outputs(&self) -> usize {
        self.outputs.len()
    }

    /// Declared poles of all roots.
    pub fn poles(&self) -> &[C] {
        &self.poles
    }

    pub fn registers(&self) -> Vec<C> {
        vec![C::new(0.0, 0.0); self.ins.len()]
    }

    /// Nearest declared pole within the exclusion radius of `z`, if any.
    pub fn pole_near(&self, z: C) -> Option<C> {
        self.poles
            .iter()
            .copied()
            .find(|p| (z - p).norm() <= self.exclusion.radius(*p))
    }

    pub fn eval(&self, z: C) -> Result<Vec<C>> {
        let mut regs = self.registers();
        let mut out = vec![C::new(0.0, 0.0); self.outputs.len()];
        self.eval_into(z, &mut regs, &mut out)?;
        Ok(out)
    }

    /// Evaluate into caller-provided buffers; `regs` must come from [`Tape::registers`].
    pub fn eval_into(&self, z: C, regs: &mut [C], out: &mut [C]) -> Result<()> {
        if let Some(pole) = self.pole_near(z) {
            return Err(ComplexError::PoleHit { pole, z });
        }
        for (k, ins) in self.ins.iter().enumerate() {
            regs[k] = match *ins {
                Ins::Const(c) => c,
                Ins::Var => z,
                Ins::Add(a, b) => regs[a] + regs[b],
                Ins::Mul(a, b) => regs[a] * regs[b],
                Ins::Div(a, b) => regs[a] / regs[b],
                Ins::Pow(a, k) => regs[a].powi(k),
                Ins::Exp(a) => regs[a].exp(),
            };
        }
        for (o, &r) in out.iter_mut().zip(&self.outputs) {
            let v = regs[r];
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(ComplexError::NonFinite { z });
            }
            *o = v;
        }
        Ok(())
    }
}

enum Frame {
    Enter(HolomorphicExpr, usize),
    Exit(HolomorphicExpr, usize),
}

fn compile_iter(
    root: &HolomorphicExpr,
    var: usize,
    ins: &mut Vec<Ins>,
    memo: &mut HashMap<(usize, usize), usize>,
) -> usize {
    let mut stack = vec![Frame::Enter(root.clone(), var)];
    while let Some(frame) = stack.pop() {
        match frame {
            Frame::Enter(e, v) => {
                if memo.contains_key(&(e.node_id(), v)) {
                    continue;
                }
                stack.push(Frame::Exit(e.clone(), v));
                match e.kind() {
                    NodeKind::Const(_) | NodeKind::Var => {}
                    NodeKind::Sum(a, b) | NodeKind::Product(a, b) | NodeKind::Quotient(a, b) => {
                        stack.push(Frame::Enter(b.clone(), v));
                        stack.push(Frame::Enter(a.clone(), v));
                    }
                    NodeKind::Power(a, _) | NodeKind::Exp(a) => {
                        stack.push(Frame::Enter(a.clone(), v));
                    }
                    // The outer expression needs the inner register, so only the
                    // inner one is scheduled here; the outer is compiled on exit.
                    NodeKind::Compose(_, inner) => stack.push(Frame::Enter(inner.clone(), v)),
                }
            }
            Frame::Exit(e, v) => {
                if memo.contains_key(&(e.node_id(), v)) {
                    continue;
                }
                let r = |x: &HolomorphicExpr, memo: &HashMap<(usize, usize), usize>| memo[&(x.node_id(), v)];
                let reg = match e.kind() {
                    NodeKind::Var => v,
                    NodeKind::Const(c) => push(ins, Ins::Const(*c)),
                    NodeKind::Sum(a, b) => {
                        let i = Ins::Add(r(a, memo), r(b, memo));
                        push(ins, i)
                    }
                    NodeKind::Product(a, b) => {
                        let i = Ins::Mul(r(a, memo), r(b, memo));
                        push(ins, i)
                    }
                    NodeKind::Quotient(a, b) => {
                        let i = Ins::Div(r(a, memo), r(b, memo));
                        push(ins, i)
                    }
                    NodeKind::Power(a, k) => {
                        let i = Ins::Pow(r(a, memo), *k);
                        push(ins, i)
                    }
                    NodeKind::Exp(a) => {
                        let i = Ins::Exp(r(a, memo));
                        push(ins, i)
                    }
                    NodeKind::Compose(outer, inner) => {
                        let iv = r(inner, memo);
                        compile_iter(outer, iv, ins, memo)
                    }
                };
                memo.insert((e.node_id(), v), reg);
            }
        }
    }
    memo[&(root.node_id(), var)]
}

fn push(ins: &mut Vec<Ins>, i: Ins) -> usize {
    ins.push(i);
    ins.len() - 1
}
