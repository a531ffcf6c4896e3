//! Literal/clause factor graphs and their edge-splitting decomposition.
//!
//! Node indexing: literal nodes come first, `2 * v` for the positive literal
//! of 0-based variable `v` and `2 * v + 1` for its negation; clause node `j`
//! is `2 * n + j`. Every undirected literal–clause edge is classified against
//! a BFS spanning forest into one of four directed classes.

use std::collections::VecDeque;
use std::fmt::Write as _;

use thiserror::Error;

use crate::wcnf::{Literal, WcnfFormula};

/// Bipartite literal/clause incidence graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FactorGraph {
    num_vars: usize,
    num_clauses: usize,
    /// `(literal_node, clause_index)` in clause order.
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
}

pub fn literal_node(lit: Literal) -> usize {
    2 * lit.var_index() + usize::from(lit.is_negated())
}

impl FactorGraph {
    pub fn build(formula: &WcnfFormula) -> Self {
        let n = formula.num_vars();
        let m = formula.num_clauses();
        let mut edges = Vec::with_capacity(formula.num_literals());
        let mut adjacency = vec![Vec::new(); 2 * n + m];
        for (j, clause) in formula.clauses().iter().enumerate() {
            for &lit in clause.literals() {
                let l = literal_node(lit);
                edges.push((l, j));
                adjacency[l].push(2 * n + j);
                adjacency[2 * n + j].push(l);
            }
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Self { num_vars: n, num_clauses: m, edges, adjacency }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_literal_nodes(&self) -> usize {
        2 * self.num_vars
    }

    pub fn num_clause_nodes(&self) -> usize {
        self.num_clauses
    }

    pub fn num_nodes(&self) -> usize {
        2 * self.num_vars + self.num_clauses
    }

    pub fn clause_node(&self, clause: usize) -> usize {
        2 * self.num_vars + clause
    }

    pub fn is_clause_node(&self, node: usize) -> bool {
        node >= 2 * self.num_vars
    }

    /// `(literal_node, clause_index)` pairs, one per literal occurrence.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Neighbours in ascending node order.
    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    /// Human-readable node label: signed DIMACS literal or `c<j>` (1-based).
    pub fn node_label(&self, node: usize) -> String {
        if self.is_clause_node(node) {
            format!("c{}", node - 2 * self.num_vars + 1)
        } else {
            let var = (node / 2 + 1) as i64;
            if node % 2 == 1 {
                (-var).to_string()
            } else {
                var.to_string()
            }
        }
    }
}

/// How each connected component picks its BFS root.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RootPolicy {
    /// Midpoint of a double-BFS longest path (approximate center).
    #[default]
    PseudoCenter,
    /// Lowest-indexed node of the component.
    LowestIndex,
}

/// A BFS spanning forest, one tree per connected component.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpanningForest {
    parent: Vec<Option<usize>>,
    depth: Vec<usize>,
    roots: Vec<usize>,
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum ForestError {
    #[error("forest covers {forest} nodes but the graph has {graph}")]
    SizeMismatch { forest: usize, graph: usize },
    #[error("parent link {child} -> {parent} is not a graph edge")]
    NotAnEdge { child: usize, parent: usize },
    #[error("parent links starting at node {0} contain a cycle")]
    Cycle(usize),
    #[error("tree edge {0} - {1} joins nodes of equal depth")]
    TreeEdgeEqualDepth(usize, usize),
    #[error("non-tree edge {0} - {1} joins nodes of equal depth")]
    NonTreeEdgeEqualDepth(usize, usize),
}

fn bfs(graph: &FactorGraph, start: usize) -> (Vec<usize>, Vec<Option<usize>>, Vec<usize>) {
    let mut dist = vec![usize::MAX; graph.num_nodes()];
    let mut parent = vec![None; graph.num_nodes()];
    let mut order = Vec::new();
    let mut queue = VecDeque::from([start]);
    dist[start] = 0;
    while let Some(u) = queue.pop_front() {
        order.push(u);
        for &w in graph.neighbors(u) {
            if dist[w] == usize::MAX {
                dist[w] = dist[u] + 1;
                parent[w] = Some(u);
                queue.push_back(w);
            }
        }
    }
    (dist, parent, order)
}

/// Farthest visited node, lowest index on ties.
fn farthest(dist: &[usize], order: &[usize]) -> usize {
    let mut best = order[0];
    for &u in order {
        if dist[u] > dist[best] || (dist[u] == dist[best] && u < best) {
            best = u;
        }
    }
    best
}

fn pseudo_center(graph: &FactorGraph, start: usize) -> usize {
    let (dist, _, order) = bfs(graph, start);
    let u = farthest(&dist, &order);
    let (dist_u, parent_u, order_u) = bfs(graph, u);
    let v = farthest(&dist_u, &order_u);
    let mut path = vec![v];
    let mut cur = v;
    while let Some(p) = parent_u[cur] {
        path.push(p);
        cur = p;
    }
    path.reverse();
    // path runs u..=v; an odd edge count has two middle nodes
    let len = path.len() - 1;
    if len % 2 == 0 {
        path[len / 2]
    } else {
        path[len / 2].min(path[len / 2 + 1])
    }
}

impl SpanningForest {
    pub fn build(graph: &FactorGraph, policy: RootPolicy) -> Self {
        let n = graph.num_nodes();
        let mut parent = vec![None; n];
        let mut depth = vec![usize::MAX; n];
        let mut roots = Vec::new();
        for start in 0..n {
            if depth[start] != usize::MAX {
                continue;
            }
            let root = match policy {
                RootPolicy::LowestIndex => start,
                RootPolicy::PseudoCenter => pseudo_center(graph, start),
            };
            roots.push(root);
            let (dist, par, order) = bfs(graph, root);
            for u in order {
                depth[u] = dist[u];
                parent[u] = par[u];
            }
        }
        Self { parent, depth, roots }
    }

    /// Rebuilds a forest from explicit parent links, recomputing depths.
    pub fn from_parents(graph: &FactorGraph, parent: Vec<Option<usize>>) -> Result<Self, ForestError> {
        let n = graph.num_nodes();
        if parent.len() != n {
            return Err(ForestError::SizeMismatch { forest: parent.len(), graph: n });
        }
        for (child, p) in parent.iter().enumerate() {
            if let Some(p) = *p {
                if graph.neighbors(child).binary_search(&p).is_err() {
                    return Err(ForestError::NotAnEdge { child, parent: p });
                }
            }
        }
        let mut depth = vec![usize::MAX; n];
        let mut chain = Vec::new();
        for start in 0..n {
            let mut cur = start;
            chain.clear();
            while depth[cur] == usize::MAX {
                if chain.len() > n {
                    return Err(ForestError::Cycle(start));
                }
                chain.push(cur);
                match parent[cur] {
                    Some(p) => cur = p,
                    None => {
                        depth[cur] = 0;
                        chain.pop();
                        break;
                    }
                }
            }
            let mut d = depth[cur];
            while let Some(u) = chain.pop() {
                d += 1;
                depth[u] = d;
            }
        }
        let roots = (0..n).filter(|&u| parent[u].is_none()).collect();
        Ok(Self { parent, depth, roots })
    }

    pub fn parent(&self, node: usize) -> Option<usize> {
        self.parent[node]
    }

    pub fn parents(&self) -> &[Option<usize>] {
        &self.parent
    }

    pub fn depth(&self, node: usize) -> usize {
        self.depth[node]
    }

    pub fn depths(&self) -> &[usize] {
        &self.depth
    }

    pub fn roots(&self) -> &[usize] {
        &self.roots
    }

    pub fn num_components(&self) -> usize {
        self.roots.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.parent.len()
    }

    pub fn is_tree_edge(&self, a: usize, b: usize) -> bool {
        self.parent[a] == Some(b) || self.parent[b] == Some(a)
    }
}

/// The four directed edge classes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeClass {
    /// Tree edge from the shallower to the deeper endpoint.
    Parent,
    /// Tree edge from the deeper to the shallower endpoint.
    Child,
    /// Non-tree edge from the deeper to the shallower endpoint.
    NtUp,
    /// Non-tree edge from the shallower to the deeper endpoint.
    NtDown,
}

impl EdgeClass {
    pub const ALL: [EdgeClass; 4] = [EdgeClass::Parent, EdgeClass::Child, EdgeClass::NtUp, EdgeClass::NtDown];

    /// Class of the same undirected edge traversed the other way.
    pub fn reverse(self) -> Self {
        match self {
            EdgeClass::Parent => EdgeClass::Child,
            EdgeClass::Child => EdgeClass::Parent,
            EdgeClass::NtUp => EdgeClass::NtDown,
            EdgeClass::NtDown => EdgeClass::NtUp,
        }
    }

    pub fn tag(self) -> char {
        match self {
            EdgeClass::Parent => 'P',
            EdgeClass::Child => 'C',
            EdgeClass::NtUp => 'U',
            EdgeClass::NtDown => 'D',
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// Edge-splitting factor graph.
///
/// For each class the literal→clause edges are kept as `(clause, literal_node)`
/// pairs: entry `(c, l)` of the `|V_C| x |V_L|` matrix `M_class` is one iff
/// the directed edge `(l, c)` belongs to that class. The clause→literal
/// direction of the same edge belongs to the reversed class.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeSplitGraph {
    num_vars: usize,
    num_clauses: usize,
    classes: [Vec<(usize, usize)>; 4],
}

impl EdgeSplitGraph {
    pub fn split(graph: &FactorGraph, forest: &SpanningForest) -> Result<Self, ForestError> {
        if forest.num_nodes() != graph.num_nodes() {
            return Err(ForestError::SizeMismatch {
                forest: forest.num_nodes(),
                graph: graph.num_nodes(),
            });
        }
        let mut classes: [Vec<(usize, usize)>; 4] = Default::default();
        for &(l, j) in graph.edges() {
            let c = graph.clause_node(j);
            let (dl, dc) = (forest.depth(l), forest.depth(c));
            let tree = forest.is_tree_edge(l, c);
            let class = match (tree, dl.cmp(&dc)) {
                (_, std::cmp::Ordering::Equal) if tree => {
                    return Err(ForestError::TreeEdgeEqualDepth(l, c))
                }
                (_, std::cmp::Ordering::Equal) => return Err(ForestError::NonTreeEdgeEqualDepth(l, c)),
                (true, std::cmp::Ordering::Less) => EdgeClass::Parent,
                (true, std::cmp::Ordering::Greater) => EdgeClass::Child,
                (false, std::cmp::Ordering::Greater) => EdgeClass::NtUp,
                (false, std::cmp::Ordering::Less) => EdgeClass::NtDown,
            };
            classes[class.index()].push((j, l));
        }
        for list in &mut classes {
            list.sort_unstable();
        }
        Ok(Self { num_vars: graph.num_vars(), num_clauses: graph.num_clause_nodes(), classes })
    }

    /// Builds the factor graph and default forest in one go.
    pub fn from_formula(formula: &WcnfFormula) -> Self {
        let graph = FactorGraph::build(formula);
        let forest = SpanningForest::build(&graph, RootPolicy::default());
        Self::split(&graph, &forest).expect("BFS forest of a bipartite graph is consistent")
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_literal_nodes(&self) -> usize {
        2 * self.num_vars
    }

    pub fn num_clauses(&self) -> usize {
        self.num_clauses
    }

    /// Non-zero `(clause, literal_node)` entries of `M_class`, sorted.
    pub fn matrix(&self, class: EdgeClass) -> &[(usize, usize)] {
        &self.classes[class.index()]
    }

    /// All directed edges of `class` as global `(from, to)` node pairs.
    pub fn directed_edges(&self, class: EdgeClass) -> Vec<(usize, usize)> {
        let base = 2 * self.num_vars;
        let mut out: Vec<(usize, usize)> = self.classes[class.index()]
            .iter()
            .map(|&(c, l)| (l, base + c))
            .chain(self.classes[class.reverse().index()].iter().map(|&(c, l)| (base + c, l)))
            .collect();
        out.sort_unstable();
        out
    }

    /// Number of directed edges in `class`.
    pub fn class_len(&self, class: EdgeClass) -> usize {
        self.classes[class.index()].len() + self.classes[class.reverse().index()].len()
    }

    /// Debug edge list: one directed edge per line, `<tag> <from> <to>`.
    pub fn to_edge_list(&self, graph: &FactorGraph) -> String {
        let mut out = String::new();
        for class in EdgeClass::ALL {
            for (a, b) in self.directed_edges(class) {
                let _ = writeln!(out, "{} {} {}", class.tag(), graph.node_label(a), graph.node_label(b));
            }
        }
        out
    }
}
