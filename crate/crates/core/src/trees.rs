//! Stable labelled trees, their stabilization, and the forgetful maps.
//!
//! A stable tree with tail set `S` is determined by its edge splits: each
//! edge cuts `S` into two parts of size at least two, and distinct edges give
//! pairwise compatible splits. [`StableTree`] stores exactly this data, with
//! every split normalized to the side avoiding the smallest label, which makes
//! structural equality the isomorphism test.
//!
//! [`Tree`] is the flag-level description `(F, V, ∂, j)` used for trees that
//! may be unstable, e.g. after forgetting a tail.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub type Label = u32;

pub const MAX_LABEL: Label = 63;

fn bit(l: Label) -> u64 {
    1u64 << l
}

fn min_label(mask: u64) -> Label {
    mask.trailing_zeros()
}

fn labels_of(mask: u64) -> Vec<Label> {
    (0..64).filter(|&l| mask & bit(l) != 0).collect()
}

/// Normalizes a split side to the side avoiding the smallest label.
pub fn normalize_split(labels: u64, side: u64) -> u64 {
    if side & bit(min_label(labels)) != 0 {
        labels & !side
    } else {
        side
    }
}

/// Two splits of the same label set are compatible when one of the four
/// intersections of their sides is empty.
pub fn compatible(labels: u64, a: u64, b: u64) -> bool {
    let (ac, bc) = (labels & !a, labels & !b);
    a & b == 0 || a & bc == 0 || ac & b == 0 || ac & bc == 0
}

/// Stable tree in canonical form.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct StableTree {
    labels: u64,
    splits: Vec<u64>,
}

impl PartialOrd for StableTree {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for StableTree {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.labels, self.splits.len(), &self.splits).cmp(&(other.labels, other.splits.len(), &other.splits))
    }
}

/// Flag of a vertex in a [`Layout`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Flag {
    Tail(Label),
    /// Half-edge of edge `edge`; `toward_root` marks the half on the child
    /// vertex, pointing back to its parent.
    Half { edge: usize, toward_root: bool },
}

/// Vertices of a stable tree in depth-first order from the vertex carrying
/// the smallest label. Edge `k` corresponds to split `k` of the tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layout {
    pub vertices: Vec<Vec<Flag>>,
}

impl Layout {
    pub fn valence(&self, v: usize) -> usize {
        self.vertices[v].len()
    }

    pub fn vertex_of_tail(&self, s: Label) -> Option<usize> {
        self.vertices.iter().position(|fl| fl.contains(&Flag::Tail(s)))
    }
}

impl StableTree {
    /// Builds a tree from split sides (either side of each split).
    pub fn from_splits(labels: &[Label], sides: &[u64]) -> Result<Self> {
        let mut mask = 0u64;
        for &l in labels {
            if l > MAX_LABEL {
                return Err(Error::Invalid(format!("label {l} exceeds {MAX_LABEL}")));
            }
            if mask & bit(l) != 0 {
                return Err(Error::LabelCollision(l));
            }
            mask |= bit(l);
        }
        Self::from_mask(mask, sides)
    }

    fn from_mask(labels: u64, sides: &[u64]) -> Result<Self> {
        let n = labels.count_ones() as usize;
        if n < 3 {
            return Err(Error::TooFewTails(n));
        }
        let mut set = BTreeSet::new();
        for &s in sides {
            if s & !labels != 0 {
                return Err(Error::Invalid("split uses unknown labels".into()));
            }
            let x = normalize_split(labels, s);
            if x.count_ones() < 2 || (labels & !x).count_ones() < 2 {
                return Err(Error::Invalid(format!("split {:?} is not stable", labels_of(x))));
            }
            set.insert(x);
        }
        let splits: Vec<u64> = set.into_iter().collect();
        for (i, &a) in splits.iter().enumerate() {
            for &b in &splits[i + 1..] {
                if !compatible(labels, a, b) {
                    return Err(Error::Invalid("splits are not compatible".into()));
                }
            }
        }
        Ok(StableTree { labels, splits })
    }

    /// One-vertex tree on the given labels.
    pub fn corolla(labels: &[Label]) -> Result<Self> {
        Self::from_splits(labels, &[])
    }

    /// One-vertex tree on `1..=n`.
    pub fn corolla_n(n: usize) -> Self {
        Self::corolla(&(1..=n as Label).collect::<Vec<_>>()).expect("n >= 3")
    }

    /// One-edge tree on `1..=n` with `side` on one end.
    pub fn divisor(n: usize, side: &[Label]) -> Result<Self> {
        let labels: Vec<Label> = (1..=n as Label).collect();
        let s = side.iter().fold(0u64, |m, &l| m | bit(l));
        Self::from_splits(&labels, &[s])
    }

    pub fn label_mask(&self) -> u64 {
        self.labels
    }

    pub fn labels(&self) -> Vec<Label> {
        labels_of(self.labels)
    }

    pub fn num_tails(&self) -> usize {
        self.labels.count_ones() as usize
    }

    pub fn splits(&self) -> &[u64] {
        &self.splits
    }

    pub fn edge_count(&self) -> usize {
        self.splits.len()
    }

    pub fn vertex_count(&self) -> usize {
        self.splits.len() + 1
    }

    /// Index of the smallest split strictly containing split `k`.
    fn parents(&self) -> Vec<Option<usize>> {
        let s = &self.splits;
        (0..s.len())
            .map(|k| {
                (0..s.len())
                    .filter(|&j| j != k && s[j] & s[k] == s[k] && s[j] != s[k])
                    .min_by_key(|&j| s[j].count_ones())
            })
            .collect()
    }

    /// Depth-first vertex layout. Vertex 0 carries the smallest label; the
    /// vertex below edge `k` collects the labels of split `k` not covered by
    /// smaller splits.
    pub fn layout(&self) -> Layout {
        let parents = self.parents();
        let e = self.splits.len();
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); e + 1];
        for k in 0..e {
            let p = parents[k].map_or(0, |j| j + 1);
            children[p].push(k);
        }
        for ch in &mut children {
            ch.sort_by_key(|&k| min_label(self.splits[k]));
        }
        let mut vertices = Vec::with_capacity(e + 1);
        let mut stack = vec![(0usize, None::<usize>)];
        while let Some((node, via)) = stack.pop() {
            let covered = children[node].iter().fold(0u64, |m, &k| m | self.splits[k]);
            let own = if node == 0 { self.labels } else { self.splits[node - 1] };
            let mut flags: Vec<Flag> = labels_of(own & !covered).into_iter().map(Flag::Tail).collect();
            if let Some(k) = via {
                flags.push(Flag::Half { edge: k, toward_root: true });
            }
            for &k in &children[node] {
                flags.push(Flag::Half { edge: k, toward_root: false });
            }
            vertices.push(flags);
            for &k in children[node].iter().rev() {
                stack.push((k + 1, Some(k)));
            }
        }
        Layout { vertices }
    }

    /// Flag-level description of the tree.
    pub fn to_tree(&self) -> Tree {
        let layout = self.layout();
        let mut t = Tree::default();
        t.vertex_count = layout.vertices.len();
        let mut half: Vec<[usize; 2]> = vec![[usize::MAX; 2]; self.splits.len()];
        for (v, flags) in layout.vertices.iter().enumerate() {
            for f in flags {
                let id = t.vertex_of.len();
                t.vertex_of.push(v);
                match *f {
                    Flag::Tail(l) => {
                        t.involution.push(id);
                        t.tail_label.push(Some(l));
                    }
                    Flag::Half { edge, toward_root } => {
                        t.involution.push(id);
                        t.tail_label.push(None);
                        half[edge][toward_root as usize] = id;
                    }
                }
            }
        }
        for [a, b] in half {
            t.involution[a] = b;
            t.involution[b] = a;
        }
        t
    }

    /// Relabels tails with an injective map.
    pub fn relabel(&self, map: impl Fn(Label) -> Label) -> Result<Self> {
        let old = self.labels();
        let new: Vec<Label> = old.iter().map(|&l| map(l)).collect();
        let sides: Vec<u64> = self
            .splits
            .iter()
            .map(|&x| labels_of(x).iter().fold(0u64, |m, &l| m | bit(map(l))))
            .collect();
        Self::from_splits(&new, &sides)
    }

    /// Relabels the tails order-preservingly onto `1..=n`.
    pub fn standardized(&self) -> Self {
        let old = self.labels();
        self.relabel(|l| old.iter().position(|&x| x == l).unwrap() as Label + 1)
            .expect("order-preserving relabelling is injective")
    }

    /// Forgets tail `s`. Returns the stabilized tree when the vertex carrying
    /// `s` becomes unstable, and `None` (the zero class) otherwise.
    pub fn pushforward(&self, s: Label) -> Result<Option<StableTree>> {
        if s > MAX_LABEL || self.labels & bit(s) == 0 {
            return Err(Error::NotATail(s));
        }
        if self.num_tails() <= 3 {
            return Err(Error::TooFewTails(self.num_tails() - 1));
        }
        let mut tree = self.to_tree();
        let f = tree.tail_flag(s).expect("tail present");
        let v = tree.vertex_of[f];
        tree.remove_flag(f);
        if tree.valence(v) >= 3 {
            return Ok(None);
        }
        tree.stabilize().map(Some)
    }

    /// Adds tail `s`, returning one tree per vertex it can be attached to,
    /// in layout order.
    pub fn pullback(&self, s: Label) -> Result<Vec<StableTree>> {
        if s > MAX_LABEL {
            return Err(Error::Invalid(format!("label {s} exceeds {MAX_LABEL}")));
        }
        if self.labels & bit(s) != 0 {
            return Err(Error::LabelCollision(s));
        }
        let layout = self.layout();
        let new_labels = self.labels | bit(s);
        // For vertex v, the edges whose child side contains v.
        let parents = self.parents();
        let mut out = Vec::with_capacity(layout.vertices.len());
        for flags in &layout.vertices {
            let own_edge = flags.iter().find_map(|f| match f {
                Flag::Half { edge, toward_root: true } => Some(*edge),
                _ => None,
            });
            let mut above = BTreeSet::new();
            let mut cur = own_edge;
            while let Some(k) = cur {
                above.insert(k);
                cur = parents[k];
            }
            let sides: Vec<u64> = self
                .splits
                .iter()
                .enumerate()
                .map(|(k, &x)| if above.contains(&k) { x | bit(s) } else { x })
                .collect();
            out.push(Self::from_mask(new_labels, &sides)?);
        }
        Ok(out)
    }
}

impl fmt::Display for StableTree {
    /// Nested parentheses rooted at the vertex with the smallest label, e.g.
    /// `(1 2 (3 4))`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let layout = self.layout();
        let mut child_vertex = vec![0usize; self.splits.len()];
        for (v, flags) in layout.vertices.iter().enumerate() {
            for fl in flags {
                if let Flag::Half { edge, toward_root: true } = fl {
                    child_vertex[*edge] = v;
                }
            }
        }
        fn write(layout: &Layout, child_vertex: &[usize], v: usize, out: &mut String) {
            out.push('(');
            let mut first = true;
            for fl in &layout.vertices[v] {
                let piece = match fl {
                    Flag::Tail(l) => Some(l.to_string()),
                    Flag::Half { edge, toward_root: false } => {
                        let mut s = String::new();
                        write(layout, child_vertex, child_vertex[*edge], &mut s);
                        Some(s)
                    }
                    _ => None,
                };
                if let Some(p) = piece {
                    if !first {
                        out.push(' ');
                    }
                    out.push_str(&p);
                    first = false;
                }
            }
            out.push(')');
        }
        let mut s = String::new();
        write(&layout, &child_vertex, 0, &mut s);
        f.write_str(&s)
    }
}

impl FromStr for StableTree {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let tokens: Vec<String> = s
            .replace('(', " ( ")
            .replace(')', " ) ")
            .split_whitespace()
            .map(str::to_string)
            .collect();
        let mut pos = 0;
        let mut labels = Vec::new();
        let mut sides = Vec::new();
        fn parse_vertex(
            tokens: &[String],
            pos: &mut usize,
            labels: &mut Vec<Label>,
            sides: &mut Vec<u64>,
        ) -> Result<u64> {
            if tokens.get(*pos).map(String::as_str) != Some("(") {
                return Err(Error::Parse(format!("expected '(' at token {}", *pos)));
            }
            *pos += 1;
            let mut below = 0u64;
            loop {
                match tokens.get(*pos).map(String::as_str) {
                    Some(")") => {
                        *pos += 1;
                        return Ok(below);
                    }
                    Some("(") => {
                        let sub = parse_vertex(tokens, pos, labels, sides)?;
                        sides.push(sub);
                        below |= sub;
                    }
                    Some(t) => {
                        let l: Label = t.parse().map_err(|_| Error::Parse(format!("bad label '{t}'")))?;
                        if l > MAX_LABEL {
                            return Err(Error::Parse(format!("label {l} exceeds {MAX_LABEL}")));
                        }
                        labels.push(l);
                        below |= bit(l);
                        *pos += 1;
                    }
                    None => return Err(Error::Parse("unbalanced parentheses".into())),
                }
            }
        }
        parse_vertex(&tokens, &mut pos, &mut labels, &mut sides)?;
        if pos != tokens.len() {
            return Err(Error::Parse("trailing input after tree".into()));
        }
        StableTree::from_splits(&labels, &sides)
    }
}

/// Tree given by flags: `vertex_of` is `∂`, `involution` is `j`, and tails
/// (fixed points of `j`) carry labels. Vertices may be unstable.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Tree {
    pub vertex_of: Vec<usize>,
    pub involution: Vec<usize>,
    pub tail_label: Vec<Option<Label>>,
    pub vertex_count: usize,
}

impl Tree {
    /// Builds a tree from per-vertex tails and a list of edges between vertices.
    pub fn from_parts(tails: &[Vec<Label>], edges: &[(usize, usize)]) -> Result<Self> {
        let mut t = Tree { vertex_count: tails.len(), ..Tree::default() };
        for (v, ls) in tails.iter().enumerate() {
            for &l in ls {
                let id = t.vertex_of.len();
                t.vertex_of.push(v);
                t.involution.push(id);
                t.tail_label.push(Some(l));
            }
        }
        for &(a, b) in edges {
            if a >= tails.len() || b >= tails.len() || a == b {
                return Err(Error::Invalid(format!("bad edge ({a}, {b})")));
            }
            let id = t.vertex_of.len();
            t.vertex_of.extend([a, b]);
            t.involution.extend([id + 1, id]);
            t.tail_label.extend([None, None]);
        }
        t.validate()?;
        Ok(t)
    }

    fn validate(&self) -> Result<()> {
        let v = self.vertex_count;
        let e = self.edge_count();
        if v == 0 || e + 1 != v {
            return Err(Error::Invalid("graph is not a tree".into()));
        }
        // Connectivity via union-find over edges.
        let mut parent: Vec<usize> = (0..v).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            p[x] = r;
            r
        }
        for f in 0..self.vertex_of.len() {
            let g = self.involution[f];
            if g > f {
                let (a, b) = (find(&mut parent, self.vertex_of[f]), find(&mut parent, self.vertex_of[g]));
                if a == b {
                    return Err(Error::Invalid("graph has a cycle".into()));
                }
                parent[a] = b;
            }
        }
        let mut seen = 0u64;
        for l in self.tail_label.iter().flatten() {
            if *l > MAX_LABEL {
                return Err(Error::Invalid(format!("label {l} exceeds {MAX_LABEL}")));
            }
            if seen & bit(*l) != 0 {
                return Err(Error::LabelCollision(*l));
            }
            seen |= bit(*l);
        }
        Ok(())
    }

    pub fn edge_count(&self) -> usize {
        (0..self.involution.len()).filter(|&f| self.involution[f] > f).count()
    }

    pub fn valence(&self, v: usize) -> usize {
        self.vertex_of.iter().filter(|&&w| w == v).count()
    }

    pub fn tail_flag(&self, s: Label) -> Option<usize> {
        self.tail_label.iter().position(|&l| l == Some(s))
    }

    pub fn is_stable(&self) -> bool {
        (0..self.vertex_count).all(|v| self.valence(v) >= 3)
    }

    /// Removes flag `f` (a tail) and renumbers the remaining flags.
    pub fn remove_flag(&mut self, f: usize) {
        debug_assert_eq!(self.involution[f], f);
        self.vertex_of.remove(f);
        self.tail_label.remove(f);
        self.involution.remove(f);
        for j in self.involution.iter_mut() {
            if *j > f {
                *j -= 1;
            }
        }
    }

    /// Contracts the edge through half-edge `f`, merging its two vertices.
    pub fn contract(&mut self, f: usize) {
        let g = self.involution[f];
        assert_ne!(f, g, "cannot contract a tail");
        let keep = self.vertex_of[f].min(self.vertex_of[g]);
        let gone = self.vertex_of[f].max(self.vertex_of[g]);
        let (hi, lo) = (f.max(g), f.min(g));
        for flag in [hi, lo] {
            self.vertex_of.remove(flag);
            self.tail_label.remove(flag);
            self.involution.remove(flag);
        }
        for j in self.involution.iter_mut() {
            *j -= (*j > lo) as usize + (*j > hi) as usize;
        }
        for v in self.vertex_of.iter_mut() {
            if *v == gone {
                *v = keep;
            } else if *v > gone {
                *v -= 1;
            }
        }
        self.vertex_count -= 1;
    }

    /// Contracts an edge at each unstable vertex until every vertex has
    /// valence at least three.
    pub fn stabilize(mut self) -> Result<StableTree> {
        let tails = self.tail_label.iter().flatten().count();
        if tails < 3 {
            return Err(Error::TooFewTails(tails));
        }
        loop {
            let unstable = (0..self.vertex_count).find(|&v| self.valence(v) < 3);
            let Some(v) = unstable else { break };
            let f = (0..self.vertex_of.len())
                .find(|&f| self.vertex_of[f] == v && self.involution[f] != f)
                .ok_or(Error::TooFewTails(tails))?;
            self.contract(f);
        }
        self.to_stable()
    }

    /// Canonical form of a tree whose vertices are all stable.
    pub fn to_stable(&self) -> Result<StableTree> {
        if !self.is_stable() {
            return Err(Error::Invalid("tree has unstable vertices".into()));
        }
        let labels = self.tail_label.iter().flatten().fold(0u64, |m, &l| m | bit(l));
        let mut sides = Vec::new();
        for f in 0..self.vertex_of.len() {
            let g = self.involution[f];
            if g <= f {
                continue;
            }
            // Tails reachable from the vertex of g without crossing (f, g).
            let mut side = 0u64;
            let mut stack = vec![self.vertex_of[g]];
            let mut visited = vec![false; self.vertex_count];
            visited[self.vertex_of[g]] = true;
            visited[self.vertex_of[f]] = true;
            while let Some(v) = stack.pop() {
                for h in 0..self.vertex_of.len() {
                    if self.vertex_of[h] != v {
                        continue;
                    }
                    if let Some(l) = self.tail_label[h] {
                        side |= bit(l);
                    } else if h != g {
                        let w = self.vertex_of[self.involution[h]];
                        if !visited[w] {
                            visited[w] = true;
                            stack.push(w);
                        }
                    }
                }
            }
            sides.push(side);
        }
        StableTree::from_mask(labels, &sides)
    }
}

/// Stable trees on tails `1..=n` with exactly `edges` edges, sorted.
pub fn enumerate_stable_trees(n: usize, edges: usize) -> Result<Vec<StableTree>> {
    if n < 3 {
        return Err(Error::TooFewTails(n));
    }
    if n > 10 {
        return Err(Error::TooLarge { n, max: 10 });
    }
    if edges > n - 3 {
        return Ok(Vec::new());
    }
    let labels: u64 = (1..=n as Label).fold(0, |m, l| m | bit(l));
    let all = all_splits(labels);
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(edges);
    fn rec(labels: u64, all: &[u64], start: usize, k: usize, cur: &mut Vec<u64>, out: &mut Vec<StableTree>) {
        if cur.len() == k {
            out.push(StableTree { labels, splits: cur.clone() });
            return;
        }
        for i in start..all.len() {
            if cur.iter().all(|&c| compatible(labels, c, all[i])) {
                cur.push(all[i]);
                rec(labels, all, i + 1, k, cur, out);
                cur.pop();
            }
        }
    }
    rec(labels, &all, 0, edges, &mut cur, &mut out);
    out.sort();
    Ok(out)
}

/// All normalized stable splits of a label set, ascending.
pub fn all_splits(labels: u64) -> Vec<u64> {
    let root = bit(min_label(labels));
    let rest = labels & !root;
    let ls = labels_of(rest);
    let mut out = Vec::new();
    for m in 1u64..(1u64 << ls.len()) {
        let side = ls.iter().enumerate().fold(0u64, |acc, (i, &l)| if m & (1 << i) != 0 { acc | bit(l) } else { acc });
        if side.count_ones() >= 2 && (labels & !side).count_ones() >= 2 {
            out.push(side);
        }
    }
    out.sort();
    out
}

/// Linear combination of stable trees with coefficients in `R`, keyed by
/// canonical form.
pub type TreeSum<R> = std::collections::BTreeMap<StableTree, R>;
