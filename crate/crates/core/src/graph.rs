//! Treatment / mediator / outcome DAGs.
//!
//! A [`CausalDag`] is validated once at construction and immutable afterwards:
//! treatments are roots, the single outcome is a sink, and mediator-to-mediator
//! edges respect a fixed total order over the mediators. Covariates may sit
//! anywhere else in the graph as long as it stays acyclic.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::fmt;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest edge-count exponent enumerated without an explicit limit.
pub const ENUMERATION_GUARD: u64 = 24;

/// Largest exponent [`count_dag_configurations`] will materialise.
const COUNT_EXPONENT_CAP: u64 = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeRole {
    Treatment,
    Mediator,
    Outcome,
    Covariate,
}

impl fmt::Display for NodeRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            NodeRole::Treatment => "treatment",
            NodeRole::Mediator => "mediator",
            NodeRole::Outcome => "outcome",
            NodeRole::Covariate => "covariate",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub name: String,
    pub role: NodeRole,
}

/// A validated causal graph. Node indices follow declaration order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CausalDag {
    nodes: Vec<Node>,
    index: BTreeMap<String, usize>,
    edges: Vec<(usize, usize)>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    topo: Vec<usize>,
    mediator_order: Vec<usize>,
    outcome: usize,
}

/// The four permitted edge categories between treatments (roots), mediators
/// and the outcome.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EdgeCatalog {
    pub root_to_mediator: BTreeSet<(String, String)>,
    pub root_to_outcome: BTreeSet<(String, String)>,
    pub mediator_to_mediator: BTreeSet<(String, String)>,
    pub mediator_to_outcome: BTreeSet<(String, String)>,
}

impl EdgeCatalog {
    pub fn len(&self) -> usize {
        self.root_to_mediator.len()
            + self.root_to_outcome.len()
            + self.mediator_to_mediator.len()
            + self.mediator_to_outcome.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Builds a DAG whose mediator order is the mediators' declaration order.
pub fn build_dag<N, E, S>(nodes: N, edges: E) -> Result<CausalDag>
where
    N: IntoIterator<Item = (S, NodeRole)>,
    E: IntoIterator<Item = (S, S)>,
    S: Into<String>,
{
    build_dag_with_order(nodes, edges, None::<Vec<String>>)
}

/// Builds a DAG with an explicit mediator order. The order must list every
/// mediator exactly once.
pub fn build_dag_with_order<N, E, S, O, T>(nodes: N, edges: E, mediator_order: Option<O>) -> Result<CausalDag>
where
    N: IntoIterator<Item = (S, NodeRole)>,
    E: IntoIterator<Item = (S, S)>,
    S: Into<String>,
    O: IntoIterator<Item = T>,
    T: Into<String>,
{
    let nodes: Vec<Node> = nodes
        .into_iter()
        .map(|(name, role)| Node {
            name: name.into(),
            role,
        })
        .collect();

    let mut index = BTreeMap::new();
    for (i, node) in nodes.iter().enumerate() {
        if index.insert(node.name.clone(), i).is_some() {
            return Err(Error::DuplicateNode(node.name.clone()));
        }
    }

    let outcomes: Vec<usize> = (0..nodes.len())
        .filter(|&i| nodes[i].role == NodeRole::Outcome)
        .collect();
    let outcome = match outcomes.as_slice() {
        [] => return Err(Error::NoOutcome),
        [o] => *o,
        many => return Err(Error::MultipleOutcomes(many.len())),
    };

    let declared_mediators: Vec<usize> = (0..nodes.len())
        .filter(|&i| nodes[i].role == NodeRole::Mediator)
        .collect();
    let mediator_order = match mediator_order {
        None => declared_mediators,
        Some(order) => {
            let mut seen = BTreeSet::new();
            let mut out = Vec::new();
            for name in order {
                let name: String = name.into();
                let &i = index.get(&name).ok_or_else(|| Error::UnknownNode(name.clone()))?;
                if nodes[i].role != NodeRole::Mediator {
                    return Err(Error::InvalidMediatorOrder(format!("`{name}` is not a mediator")));
                }
                if !seen.insert(i) {
                    return Err(Error::InvalidMediatorOrder(format!("`{name}` listed twice")));
                }
                out.push(i);
            }
            if out.len() != declared_mediators.len() {
                return Err(Error::InvalidMediatorOrder(
                    "order must list every mediator exactly once".into(),
                ));
            }
            out
        }
    };
    let mut rank = vec![usize::MAX; nodes.len()];
    for (r, &m) in mediator_order.iter().enumerate() {
        rank[m] = r;
    }

    let mut edge_set = BTreeSet::new();
    for (s, t) in edges {
        let (s, t): (String, String) = (s.into(), t.into());
        let lookup = |name: &String| {
            index.get(name).copied().ok_or_else(|| Error::DanglingEdge {
                from: s.clone(),
                target: t.clone(),
                missing: name.clone(),
            })
        };
        let si = lookup(&s)?;
        let ti = lookup(&t)?;
        let forbid = |reason: &str| Error::ForbiddenEdge {
            from: s.clone(),
            target: t.clone(),
            reason: reason.to_string(),
        };
        if nodes[ti].role == NodeRole::Treatment {
            return Err(forbid("treatments are root nodes and take no incoming edges"));
        }
        if nodes[si].role == NodeRole::Outcome {
            return Err(forbid("the outcome is a sink and takes no outgoing edges"));
        }
        if nodes[si].role == NodeRole::Mediator && nodes[ti].role == NodeRole::Mediator && rank[si] >= rank[ti] {
            return Err(forbid(
                "mediator edges must run from earlier to later in the mediator order",
            ));
        }
        edge_set.insert((si, ti));
    }
    let edges: Vec<(usize, usize)> = edge_set.into_iter().collect();

    let mut parents = vec![Vec::new(); nodes.len()];
    let mut children = vec![Vec::new(); nodes.len()];
    for &(s, t) in &edges {
        parents[t].push(s);
        children[s].push(t);
    }
    for list in parents.iter_mut().chain(children.iter_mut()) {
        list.sort_unstable();
    }

    let topo = kahn_order(&parents, &children)
        .map_err(|stuck| Error::CycleDetected(stuck.into_iter().map(|i| nodes[i].name.clone()).collect()))?;

    Ok(CausalDag {
        nodes,
        index,
        edges,
        parents,
        children,
        topo,
        mediator_order,
        outcome,
    })
}

/// Kahn's algorithm with the smallest ready declaration index first. On a
/// cycle, returns the nodes that could not be ordered.
fn kahn_order(parents: &[Vec<usize>], children: &[Vec<usize>]) -> std::result::Result<Vec<usize>, Vec<usize>> {
    let n = parents.len();
    let mut indegree: Vec<usize> = parents.iter().map(Vec::len).collect();
    let mut ready: BinaryHeap<Reverse<usize>> = (0..n).filter(|&i| indegree[i] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse(i)) = ready.pop() {
        order.push(i);
        for &c in &children[i] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.push(Reverse(c));
            }
        }
    }
    if order.len() == n {
        Ok(order)
    } else {
        Err((0..n).filter(|&i| indegree[i] > 0).collect())
    }
}

impl CausalDag {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn name(&self, idx: usize) -> &str {
        &self.nodes[idx].name
    }

    pub fn role(&self, idx: usize) -> NodeRole {
        self.nodes[idx].role
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownNode(name.to_string()))
    }

    /// Looks a node up and checks its role.
    pub fn expect_role(&self, name: &str, role: NodeRole) -> Result<usize> {
        let idx = self.index_of(name)?;
        if self.nodes[idx].role != role {
            return Err(Error::WrongRole {
                node: name.to_string(),
                expected: role.to_string(),
                actual: self.nodes[idx].role.to_string(),
            });
        }
        Ok(idx)
    }

    /// Edges as index pairs, sorted.
    pub fn edge_indices(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edges(&self) -> impl Iterator<Item = (&str, &str)> + '_ {
        self.edges.iter().map(|&(s, t)| (self.name(s), self.name(t)))
    }

    pub fn parents(&self, idx: usize) -> &[usize] {
        &self.parents[idx]
    }

    pub fn children(&self, idx: usize) -> &[usize] {
        &self.children[idx]
    }

    pub fn parent_names(&self, idx: usize) -> Vec<&str> {
        self.parents[idx].iter().map(|&p| self.name(p)).collect()
    }

    /// Node indices in topological order.
    pub fn topo_indices(&self) -> &[usize] {
        &self.topo
    }

    pub fn outcome(&self) -> usize {
        self.outcome
    }

    pub fn treatments(&self) -> Vec<usize> {
        self.with_role(NodeRole::Treatment)
    }

    /// Mediator indices in mediator order.
    pub fn mediators(&self) -> &[usize] {
        &self.mediator_order
    }

    pub fn with_role(&self, role: NodeRole) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].role == role).collect()
    }

    /// `true` if a directed path of length ≥ 0 leads from `from` to `to`.
    pub fn has_path(&self, from: usize, to: usize) -> bool {
        self.descendants(from)[to]
    }

    /// Reachability mask: `mask[i]` is true when `i` is `from` or downstream of it.
    pub fn descendants(&self, from: usize) -> Vec<bool> {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![from];
        seen[from] = true;
        while let Some(i) = stack.pop() {
            for &c in &self.children[i] {
                if !seen[c] {
                    seen[c] = true;
                    stack.push(c);
                }
            }
        }
        seen
    }
}

/// Node names in topological order, ties broken by declaration order.
pub fn topological_order(dag: &CausalDag) -> Vec<String> {
    dag.topo.iter().map(|&i| dag.nodes[i].name.clone()).collect()
}

pub fn classify_edges(dag: &CausalDag) -> Result<EdgeCatalog> {
    use NodeRole::*;
    let mut catalog = EdgeCatalog::default();
    for &(s, t) in &dag.edges {
        let pair = (dag.name(s).to_string(), dag.name(t).to_string());
        let bucket = match (dag.role(s), dag.role(t)) {
            (Treatment, Mediator) => &mut catalog.root_to_mediator,
            (Treatment, Outcome) => &mut catalog.root_to_outcome,
            (Mediator, Mediator) => &mut catalog.mediator_to_mediator,
            (Mediator, Outcome) => &mut catalog.mediator_to_outcome,
            _ => {
                return Err(Error::UnclassifiableEdge {
                    from: pair.0,
                    target: pair.1,
                })
            }
        };
        bucket.insert(pair);
    }
    Ok(catalog)
}

/// Number of optional edges for `i` treatments and `j` mediators:
/// `i·j + j(j−1)/2 + j + i`.
pub fn configuration_exponent(i: u64, j: u64) -> Result<u64> {
    if i < 1 {
        return Err(Error::InvalidCount(format!("need at least one treatment, got {i}")));
    }
    let overflow = || Error::TooLarge(format!("edge count for I={i}, J={j} overflows"));
    let ij = i.checked_mul(j).ok_or_else(overflow)?;
    let jj = (j.checked_mul(j.saturating_sub(1)).ok_or_else(overflow)?) / 2;
    ij.checked_add(jj)
        .and_then(|x| x.checked_add(j))
        .and_then(|x| x.checked_add(i))
        .ok_or_else(overflow)
}

/// Exact count of distinct DAG structures: `2^(i·j + j(j−1)/2 + j + i)`.
pub fn count_dag_configurations(i: u64, j: u64) -> Result<BigUint> {
    let exp = configuration_exponent(i, j)?;
    if exp > COUNT_EXPONENT_CAP {
        return Err(Error::TooLarge(format!("2^{exp} is too large to materialise")));
    }
    Ok(BigUint::from(1u8) << exp)
}

/// Every optional edge for `i` treatments and `j` mediators, in a fixed order:
/// root→mediator, root→outcome, mediator→mediator, mediator→outcome.
pub fn permitted_edges(i: usize, j: usize) -> Vec<(String, String)> {
    let t = |k: usize| format!("T{}", k + 1);
    let m = |k: usize| format!("M{}", k + 1);
    let o = || "O".to_string();
    let mut edges = Vec::new();
    for a in 0..i {
        for b in 0..j {
            edges.push((t(a), m(b)));
        }
    }
    for a in 0..i {
        edges.push((t(a), o()));
    }
    for a in 0..j {
        for b in (a + 1)..j {
            edges.push((m(a), m(b)));
        }
    }
    for b in 0..j {
        edges.push((m(b), o()));
    }
    edges
}

/// Iterator over every subset of [`permitted_edges`], each as a validated DAG.
#[derive(Debug, Clone)]
pub struct DagEnumeration {
    nodes: Vec<(String, NodeRole)>,
    edges: Vec<(String, String)>,
    next: u64,
    end: u64,
}

impl Iterator for DagEnumeration {
    type Item = CausalDag;

    fn next(&mut self) -> Option<CausalDag> {
        if self.next >= self.end {
            return None;
        }
        let mask = self.next;
        self.next += 1;
        let chosen = self
            .edges
            .iter()
            .enumerate()
            .filter(|(bit, _)| *bit < 64 && mask >> bit & 1 == 1)
            .map(|(_, e)| e.clone());
        let dag = build_dag(self.nodes.iter().cloned(), chosen)
            .expect("subsets of the permitted edge set are always valid DAGs");
        Some(dag)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.end - self.next) as usize;
        (left, Some(left))
    }
}

impl ExactSizeIterator for DagEnumeration {}

/// Enumerates DAG configurations. Without a `limit`, refuses when the edge
/// exponent exceeds [`ENUMERATION_GUARD`]; with one, yields at most `limit`
/// graphs.
pub fn enumerate_dag_configurations(i: usize, j: usize, limit: Option<u64>) -> Result<DagEnumeration> {
    let exp = configuration_exponent(i as u64, j as u64)?;
    let full = if exp < 64 { Some(1u64 << exp) } else { None };
    let end = match (limit, full) {
        (None, _) if exp > ENUMERATION_GUARD => {
            return Err(Error::TooLarge(format!(
                "2^{exp} configurations; pass a limit or keep the exponent at or below {ENUMERATION_GUARD}"
            )))
        }
        (None, Some(full)) => full,
        (Some(limit), Some(full)) => limit.min(full),
        (Some(limit), None) => limit,
        (None, None) => unreachable!("guard rejects exponents >= 64"),
    };
    let mut nodes: Vec<(String, NodeRole)> = (0..i).map(|k| (format!("T{}", k + 1), NodeRole::Treatment)).collect();
    nodes.extend((0..j).map(|k| (format!("M{}", k + 1), NodeRole::Mediator)));
    nodes.push(("O".to_string(), NodeRole::Outcome));
    Ok(DagEnumeration {
        nodes,
        edges: permitted_edges(i, j),
        next: 0,
        end,
    })
}

/// True iff a directed path runs treatment → mediator and mediator → outcome.
pub fn mediation_relevant(dag: &CausalDag, treatment: &str, mediator: &str) -> Result<bool> {
    let t = dag.expect_role(treatment, NodeRole::Treatment)?;
    let m = dag.expect_role(mediator, NodeRole::Mediator)?;
    Ok(dag.has_path(t, m) && dag.has_path(m, dag.outcome))
}
