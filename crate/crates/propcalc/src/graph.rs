//! Directed (m,n)-graphs: vertices with partitioned half-edges, internal edges,
//! and injectively labelled legs. Includes validation, genus, connectivity,
//! family classification, automorphisms, contraction and a canonical form.

use crate::{Error, Result, SizeLimits};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// In/out valence of a single vertex. Slots are indexed 0..ins and 0..outs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VertexShape {
    pub ins: usize,
    pub outs: usize,
}

/// An internal edge: tail is an out-slot of `from`, head is an in-slot of `to`.
/// Self-edges (`from == to`) are wheels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub from: usize,
    pub from_slot: usize,
    pub to: usize,
    pub to_slot: usize,
}

/// The nine graph families of the classification table, ordered by restriction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FamilyTag {
    WheeledProp,
    WheeledProperad,
    WheeledOperad,
    Prop,
    Properad,
    Dioperad,
    HalfProp,
    Operad,
    AssocLine,
}

impl FamilyTag {
    pub const ALL: [FamilyTag; 9] = [
        FamilyTag::WheeledProp,
        FamilyTag::WheeledProperad,
        FamilyTag::WheeledOperad,
        FamilyTag::Prop,
        FamilyTag::Properad,
        FamilyTag::Dioperad,
        FamilyTag::HalfProp,
        FamilyTag::Operad,
        FamilyTag::AssocLine,
    ];

    /// Families whose graphs may contain directed cycles. Weight counts
    /// vertices plus genus exactly for these.
    pub fn has_wheels(self) -> bool {
        matches!(
            self,
            FamilyTag::WheeledProp | FamilyTag::WheeledProperad | FamilyTag::WheeledOperad
        )
    }

    /// Families whose graphs may be disconnected.
    pub fn allows_disconnected(self) -> bool {
        matches!(self, FamilyTag::WheeledProp | FamilyTag::Prop)
    }
}

/// A directed graph with m labelled output legs and n labelled input legs.
/// Leg labels are 1-based (label k is stored at index k-1); vertices and
/// slots are 0-based.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DirectedGraph {
    vertices: Vec<VertexShape>,
    edges: Vec<Edge>,
    /// in_legs[k-1] = (vertex, in-slot) carrying input leg k.
    in_legs: Vec<(usize, usize)>,
    /// out_legs[k-1] = (vertex, out-slot) carrying output leg k.
    out_legs: Vec<(usize, usize)>,
}

impl DirectedGraph {
    /// Build and validate. Every in-slot must be used by exactly one edge head
    /// or one input leg; every out-slot by exactly one edge tail or one output
    /// leg.
    pub fn new(
        vertices: Vec<VertexShape>,
        mut edges: Vec<Edge>,
        in_legs: Vec<(usize, usize)>,
        out_legs: Vec<(usize, usize)>,
    ) -> Result<Self> {
        let check_vertex = |v: usize| {
            if v >= vertices.len() {
                Err(Error::OrientationMismatch(format!("vertex {v} out of range")))
            } else {
                Ok(())
            }
        };
        let mut in_used: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut out_used: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for e in &edges {
            check_vertex(e.from)?;
            check_vertex(e.to)?;
            if e.from_slot >= vertices[e.from].outs {
                return Err(Error::OrientationMismatch(format!(
                    "edge tail slot {} exceeds out-valence of vertex {}",
                    e.from_slot, e.from
                )));
            }
            if e.to_slot >= vertices[e.to].ins {
                return Err(Error::OrientationMismatch(format!(
                    "edge head slot {} exceeds in-valence of vertex {}",
                    e.to_slot, e.to
                )));
            }
            *out_used.entry((e.from, e.from_slot)).or_insert(0) += 1;
            *in_used.entry((e.to, e.to_slot)).or_insert(0) += 1;
        }
        for (k, &(v, s)) in in_legs.iter().enumerate() {
            check_vertex(v)?;
            if s >= vertices[v].ins {
                return Err(Error::OrientationMismatch(format!(
                    "input leg {} attaches to missing in-slot {s} of vertex {v}",
                    k + 1
                )));
            }
            *in_used.entry((v, s)).or_insert(0) += 1;
        }
        for (k, &(v, s)) in out_legs.iter().enumerate() {
            check_vertex(v)?;
            if s >= vertices[v].outs {
                return Err(Error::OrientationMismatch(format!(
                    "output leg {} attaches to missing out-slot {s} of vertex {v}",
                    k + 1
                )));
            }
            *out_used.entry((v, s)).or_insert(0) += 1;
        }
        for (v, shape) in vertices.iter().enumerate() {
            for s in 0..shape.ins {
                match in_used.get(&(v, s)).copied().unwrap_or(0) {
                    0 => {
                        return Err(Error::DanglingHalfEdge(format!(
                            "in-slot {s} of vertex {v} is unused"
                        )))
                    }
                    1 => {}
                    _ => {
                        return Err(Error::DuplicateLabel(format!(
                            "in-slot {s} of vertex {v} is used more than once"
                        )))
                    }
                }
            }
            for s in 0..shape.outs {
                match out_used.get(&(v, s)).copied().unwrap_or(0) {
                    0 => {
                        return Err(Error::DanglingHalfEdge(format!(
                            "out-slot {s} of vertex {v} is unused"
                        )))
                    }
                    1 => {}
                    _ => {
                        return Err(Error::DuplicateLabel(format!(
                            "out-slot {s} of vertex {v} is used more than once"
                        )))
                    }
                }
            }
        }
        edges.sort();
        Ok(DirectedGraph {
            vertices,
            edges,
            in_legs,
            out_legs,
        })
    }

    /// The single-vertex graph with m output legs and n input legs, leg k on
    /// slot k-1.
    pub fn corolla(m: usize, n: usize) -> DirectedGraph {
        DirectedGraph {
            vertices: vec![VertexShape { ins: n, outs: m }],
            edges: Vec::new(),
            in_legs: (0..n).map(|s| (0, s)).collect(),
            out_legs: (0..m).map(|s| (0, s)).collect(),
        }
    }

    /// The empty (0,0)-graph.
    pub fn empty() -> DirectedGraph {
        DirectedGraph {
            vertices: Vec::new(),
            edges: Vec::new(),
            in_legs: Vec::new(),
            out_legs: Vec::new(),
        }
    }

    pub fn vertices(&self) -> &[VertexShape] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn in_legs(&self) -> &[(usize, usize)] {
        &self.in_legs
    }

    pub fn out_legs(&self) -> &[(usize, usize)] {
        &self.out_legs
    }

    /// Number of input legs n.
    pub fn n_in(&self) -> usize {
        self.in_legs.len()
    }

    /// Number of output legs m.
    pub fn n_out(&self) -> usize {
        self.out_legs.len()
    }

    /// What occupies in-slot `slot` of vertex `v`: either an edge index or an
    /// input leg label.
    pub fn in_slot_occupant(&self, v: usize, slot: usize) -> SlotOccupant {
        for (i, e) in self.edges.iter().enumerate() {
            if e.to == v && e.to_slot == slot {
                return SlotOccupant::Edge(i);
            }
        }
        for (k, &(w, s)) in self.in_legs.iter().enumerate() {
            if w == v && s == slot {
                return SlotOccupant::Leg(k + 1);
            }
        }
        unreachable!("validated graph has no dangling slots")
    }

    /// What occupies out-slot `slot` of vertex `v`.
    pub fn out_slot_occupant(&self, v: usize, slot: usize) -> SlotOccupant {
        for (i, e) in self.edges.iter().enumerate() {
            if e.from == v && e.from_slot == slot {
                return SlotOccupant::Edge(i);
            }
        }
        for (k, &(w, s)) in self.out_legs.iter().enumerate() {
            if w == v && s == slot {
                return SlotOccupant::Leg(k + 1);
            }
        }
        unreachable!("validated graph has no dangling slots")
    }

    /// Connected components of the vertex set (legs never join components).
    pub fn component_count(&self) -> usize {
        let p = self.vertices.len();
        let mut parent: Vec<usize> = (0..p).collect();
        fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for e in &self.edges {
            let (a, b) = (find(&mut parent, e.from), find(&mut parent, e.to));
            if a != b {
                parent[a] = b;
            }
        }
        (0..p).filter(|&v| find(&mut parent, v) == v).count()
    }

    /// A graph is connected when it has at most one component (the empty
    /// graph counts as connected).
    pub fn is_connected(&self) -> bool {
        self.component_count() <= 1
    }

    /// First Betti number: edges - vertices + components. Legs are excluded.
    pub fn genus(&self) -> usize {
        self.edges.len() + self.component_count() - self.vertices.len()
    }

    /// Directed-cycle detection ("wheels").
    pub fn has_wheel(&self) -> bool {
        let p = self.vertices.len();
        let mut succ: Vec<Vec<usize>> = vec![Vec::new(); p];
        for e in &self.edges {
            if e.from == e.to {
                return true;
            }
            succ[e.from].push(e.to);
        }
        // Colors: 0 unvisited, 1 on stack, 2 done.
        let mut color = vec![0u8; p];
        for start in 0..p {
            if color[start] != 0 {
                continue;
            }
            let mut stack = vec![(start, 0usize)];
            color[start] = 1;
            while let Some(&mut (v, ref mut i)) = stack.last_mut() {
                if *i < succ[v].len() {
                    let w = succ[v][*i];
                    *i += 1;
                    match color[w] {
                        0 => {
                            color[w] = 1;
                            stack.push((w, 0));
                        }
                        1 => return true,
                        _ => {}
                    }
                } else {
                    color[v] = 2;
                    stack.pop();
                }
            }
        }
        false
    }

    /// Number of directed paths from input legs to output legs. Only sensible
    /// for wheel-free graphs (panics on cycles via the acyclicity assumption).
    pub fn leg_path_count(&self) -> u128 {
        assert!(!self.has_wheel(), "path counting requires a wheel-free graph");
        let p = self.vertices.len();
        // paths_from[v] = number of directed edge-paths from v ending at any
        // vertex with an output leg, weighted by that vertex's out-leg count.
        // A path through a vertex may leave through any out half-edge.
        let mut out_leg_count = vec![0u128; p];
        for &(v, _) in &self.out_legs {
            out_leg_count[v] += 1;
        }
        let mut succ: Vec<Vec<usize>> = vec![Vec::new(); p];
        let mut indeg_edges = vec![0usize; p];
        for e in &self.edges {
            succ[e.from].push(e.to);
            indeg_edges[e.to] += 1;
        }
        // Reverse topological order via Kahn on the reversed graph is easiest:
        // process vertices whose successors are all done.
        let mut outdeg = vec![0usize; p];
        let mut pred: Vec<Vec<usize>> = vec![Vec::new(); p];
        for e in &self.edges {
            outdeg[e.from] += 1;
            pred[e.to].push(e.from);
        }
        let mut paths = vec![0u128; p];
        let mut ready: Vec<usize> = (0..p).filter(|&v| outdeg[v] == 0).collect();
        let mut done = 0;
        while let Some(v) = ready.pop() {
            done += 1;
            paths[v] = out_leg_count[v] + succ[v].iter().map(|&w| paths[w]).sum::<u128>();
            for &u in &pred[v] {
                outdeg[u] -= 1;
                if outdeg[u] == 0 {
                    ready.push(u);
                }
            }
        }
        assert_eq!(done, p);
        self.in_legs.iter().map(|&(v, _)| paths[v]).sum()
    }

    /// Membership test for one family.
    pub fn admits(&self, tag: FamilyTag) -> bool {
        match tag {
            FamilyTag::WheeledProp => true,
            FamilyTag::WheeledProperad => self.is_connected(),
            FamilyTag::WheeledOperad => {
                self.is_connected() && self.vertices.iter().all(|v| v.outs <= 1)
            }
            FamilyTag::Prop => !self.has_wheel(),
            FamilyTag::Properad => !self.has_wheel() && self.is_connected(),
            FamilyTag::Dioperad => !self.has_wheel() && self.is_connected() && self.genus() == 0,
            FamilyTag::HalfProp => {
                self.admits(FamilyTag::Dioperad)
                    && self.leg_path_count() == (self.n_out() as u128) * (self.n_in() as u128)
            }
            FamilyTag::Operad => {
                self.admits(FamilyTag::Dioperad) && self.vertices.iter().all(|v| v.outs == 1)
            }
            FamilyTag::AssocLine => {
                self.admits(FamilyTag::Operad) && self.vertices.iter().all(|v| v.ins == 1)
            }
        }
    }

    /// Every family containing this graph.
    pub fn classify(&self) -> BTreeSet<FamilyTag> {
        FamilyTag::ALL.iter().copied().filter(|&t| self.admits(t)).collect()
    }

    /// Weight of the graph: vertices plus genus for wheel-carrying families,
    /// vertex count otherwise.
    pub fn weight(&self, family: FamilyTag) -> usize {
        if family.has_wheels() {
            self.vertices.len() + self.genus()
        } else {
            self.vertices.len()
        }
    }

    /// The induced subgraph on a vertex subset: edges with both endpoints
    /// inside stay internal; all boundary half-edges become fresh legs,
    /// labelled deterministically by (vertex, slot) order.
    pub fn induced_subgraph(&self, verts: &BTreeSet<usize>) -> DirectedGraph {
        let order: Vec<usize> = verts.iter().copied().collect();
        let new_index: BTreeMap<usize, usize> =
            order.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let vertices: Vec<VertexShape> = order.iter().map(|&v| self.vertices[v]).collect();
        let mut edges = Vec::new();
        let mut in_legs = Vec::new();
        let mut out_legs = Vec::new();
        for &v in &order {
            for s in 0..self.vertices[v].ins {
                match self.in_slot_occupant(v, s) {
                    SlotOccupant::Edge(i) => {
                        let e = self.edges[i];
                        if verts.contains(&e.from) {
                            // Internal edge; record once, from the head side.
                            edges.push(Edge {
                                from: new_index[&e.from],
                                from_slot: e.from_slot,
                                to: new_index[&e.to],
                                to_slot: e.to_slot,
                            });
                        } else {
                            in_legs.push((new_index[&v], s));
                        }
                    }
                    SlotOccupant::Leg(_) => in_legs.push((new_index[&v], s)),
                }
            }
            for s in 0..self.vertices[v].outs {
                match self.out_slot_occupant(v, s) {
                    SlotOccupant::Edge(i) => {
                        if !verts.contains(&self.edges[i].to) {
                            out_legs.push((new_index[&v], s));
                        }
                    }
                    SlotOccupant::Leg(_) => out_legs.push((new_index[&v], s)),
                }
            }
        }
        DirectedGraph::new(vertices, edges, in_legs, out_legs)
            .expect("induced subgraph of a valid graph is valid")
    }

    /// Shrink the subgraph spanned by `verts` to a single vertex. The new
    /// vertex inherits all boundary half-edges, ordered by (old vertex, slot).
    /// Both the subgraph and the contracted graph must belong to `family`.
    pub fn contract_subgraph(
        &self,
        verts: &BTreeSet<usize>,
        family: FamilyTag,
    ) -> Result<DirectedGraph> {
        if verts.is_empty() || verts.iter().any(|&v| v >= self.vertices.len()) {
            return Err(Error::NotAdmissible("empty or out-of-range vertex subset".into()));
        }
        let sub = self.induced_subgraph(verts);
        if !sub.admits(family) {
            return Err(Error::NotAdmissible(format!(
                "induced subgraph is not a {family:?} graph"
            )));
        }
        // Boundary half-edges of the blob, in deterministic order.
        let mut blob_in: Vec<(usize, usize)> = Vec::new(); // (old vertex, in slot)
        let mut blob_out: Vec<(usize, usize)> = Vec::new();
        for &v in verts.iter() {
            for s in 0..self.vertices[v].ins {
                let internal = matches!(self.in_slot_occupant(v, s), SlotOccupant::Edge(i)
                    if verts.contains(&self.edges[i].from));
                if !internal {
                    blob_in.push((v, s));
                }
            }
            for s in 0..self.vertices[v].outs {
                let internal = matches!(self.out_slot_occupant(v, s), SlotOccupant::Edge(i)
                    if verts.contains(&self.edges[i].to));
                if !internal {
                    blob_out.push((v, s));
                }
            }
        }
        let keep: Vec<usize> =
            (0..self.vertices.len()).filter(|v| !verts.contains(v)).collect();
        let mut new_index: BTreeMap<usize, usize> =
            keep.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let blob = keep.len();
        for &v in verts.iter() {
            new_index.insert(v, blob);
        }
        let mut vertices: Vec<VertexShape> = keep.iter().map(|&v| self.vertices[v]).collect();
        vertices.push(VertexShape {
            ins: blob_in.len(),
            outs: blob_out.len(),
        });
        let map_in = |v: usize, s: usize| -> (usize, usize) {
            if verts.contains(&v) {
                (blob, blob_in.iter().position(|&x| x == (v, s)).unwrap())
            } else {
                (new_index[&v], s)
            }
        };
        let map_out = |v: usize, s: usize| -> (usize, usize) {
            if verts.contains(&v) {
                (blob, blob_out.iter().position(|&x| x == (v, s)).unwrap())
            } else {
                (new_index[&v], s)
            }
        };
        let mut edges = Vec::new();
        for e in &self.edges {
            if verts.contains(&e.from) && verts.contains(&e.to) {
                continue; // swallowed by the blob
            }
            let (fv, fs) = map_out(e.from, e.from_slot);
            let (tv, ts) = map_in(e.to, e.to_slot);
            edges.push(Edge {
                from: fv,
                from_slot: fs,
                to: tv,
                to_slot: ts,
            });
        }
        let in_legs = self.in_legs.iter().map(|&(v, s)| map_in(v, s)).collect();
        let out_legs = self.out_legs.iter().map(|&(v, s)| map_out(v, s)).collect();
        let contracted = DirectedGraph::new(vertices, edges, in_legs, out_legs)?;
        if !contracted.admits(family) {
            return Err(Error::NotAdmissible(format!(
                "contracted graph leaves the {family:?} family"
            )));
        }
        Ok(contracted)
    }

    /// All leg-fixing automorphisms: vertex permutations plus per-parallel-edge
    /// bundle permutations. Slot bijections are recoverable from the edge
    /// mapping since each slot holds exactly one attachment.
    pub fn automorphisms(&self, limits: SizeLimits) -> Result<Vec<Automorphism>> {
        let p = self.vertices.len();
        if p > limits.max_vertices || self.edges.len() > limits.max_edges {
            return Err(Error::SizeLimitExceeded(format!(
                "{p} vertices / {} edges exceeds automorphism search limits",
                self.edges.len()
            )));
        }
        // Vertices carrying legs are fixed pointwise (legs are fixed cells and
        // drag their endpoint along).
        let mut pinned = vec![false; p];
        for &(v, _) in self.in_legs.iter().chain(self.out_legs.iter()) {
            pinned[v] = true;
        }
        // Leg attachment profile per vertex: which in-leg labels at which
        // relative position is irrelevant for bare graphs, but the label SET
        // must match for a vertex to map to itself... pinned vertices only map
        // to themselves anyway.
        let shapes: Vec<VertexShape> = self.vertices.clone();
        // Edge bundles: (from, to) -> list of edge indices.
        let mut bundles: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for (i, e) in self.edges.iter().enumerate() {
            bundles.entry((e.from, e.to)).or_default().push(i);
        }
        let bundle_count = |a: usize, b: usize| bundles.get(&(a, b)).map_or(0, |v| v.len());

        let mut result = Vec::new();
        let mut vmap = vec![usize::MAX; p];
        let mut used = vec![false; p];
        // Backtracking over vertex maps.
        fn backtrack(
            v: usize,
            p: usize,
            pinned: &[bool],
            shapes: &[VertexShape],
            bundle_count: &dyn Fn(usize, usize) -> usize,
            vmap: &mut Vec<usize>,
            used: &mut Vec<bool>,
            out: &mut Vec<Vec<usize>>,
        ) {
            if v == p {
                out.push(vmap.clone());
                return;
            }
            let candidates: Vec<usize> = if pinned[v] {
                vec![v]
            } else {
                (0..p).filter(|&w| !pinned[w]).collect()
            };
            'cand: for w in candidates {
                if used[w] || shapes[w] != shapes[v] {
                    continue;
                }
                // Check bundle multiplicities against already assigned vertices.
                for u in 0..v {
                    let mu = vmap[u];
                    if bundle_count(v, u) != bundle_count(w, mu)
                        || bundle_count(u, v) != bundle_count(mu, w)
                    {
                        continue 'cand;
                    }
                }
                if bundle_count(v, v) != bundle_count(w, w) {
                    continue;
                }
                vmap[v] = w;
                used[w] = true;
                backtrack(v + 1, p, pinned, shapes, bundle_count, vmap, used, out);
                used[w] = false;
                vmap[v] = usize::MAX;
            }
        }
        let mut vmaps = Vec::new();
        backtrack(
            0,
            p,
            &pinned,
            &shapes,
            &|a, b| bundle_count(a, b),
            &mut vmap,
            &mut used,
            &mut vmaps,
        );

        // For each vertex map, enumerate per-bundle edge bijections. An edge
        // e: v->w maps to some edge of the bundle vmap[v]->vmap[w]; within the
        // bundle all assignments are valid. Legs must land on themselves,
        // which is automatic since leg slots are untouched by edge bijections
        // and pinned vertices are fixed.
        for vm in vmaps {
            // Group the bundles and produce all products of permutations.
            let bundle_list: Vec<(&(usize, usize), &Vec<usize>)> = bundles.iter().collect();
            let mut edge_maps: Vec<BTreeMap<usize, usize>> = vec![BTreeMap::new()];
            for (key, edges_here) in &bundle_list {
                let target = bundles
                    .get(&(vm[key.0], vm[key.1]))
                    .expect("bundle multiplicities were matched");
                let mut next = Vec::new();
                for assignment in permutations(edges_here.len()) {
                    for base in &edge_maps {
                        let mut m = base.clone();
                        for (i, &ei) in edges_here.iter().enumerate() {
                            m.insert(ei, target[assignment[i]]);
                        }
                        next.push(m);
                    }
                }
                edge_maps = next;
            }
            for em in edge_maps {
                // Build slot maps from the edge bijection; identity on leg slots.
                let mut in_slot_maps: Vec<Vec<usize>> =
                    self.vertices.iter().map(|sh| (0..sh.ins).collect()).collect();
                let mut out_slot_maps: Vec<Vec<usize>> =
                    self.vertices.iter().map(|sh| (0..sh.outs).collect()).collect();
                for (&ei, &fi) in &em {
                    let e = self.edges[ei];
                    let f = self.edges[fi];
                    out_slot_maps[e.from][e.from_slot] = f.from_slot;
                    in_slot_maps[e.to][e.to_slot] = f.to_slot;
                }
                result.push(Automorphism {
                    vertex_map: vm.clone(),
                    in_slot_maps,
                    out_slot_maps,
                });
            }
        }
        Ok(result)
    }

    /// Canonical encoding for leg-fixing isomorphism together with one vertex
    /// relabelling achieving it. Slot orderings drop out of the invariant:
    /// bare-graph isomorphisms permute half-edges within a vertex freely, so
    /// the complete data is shapes + leg attachment vertices + the edge
    /// multiset with multiplicities.
    pub fn canonical_form(&self, limits: SizeLimits) -> Result<(Vec<i64>, Vec<usize>)> {
        let p = self.vertices.len();
        if p > limits.max_vertices || self.edges.len() > limits.max_edges {
            return Err(Error::SizeLimitExceeded(format!(
                "{p} vertices / {} edges exceeds canonical form limits",
                self.edges.len()
            )));
        }
        // order[i] = old vertex placed at new index i.
        let mut best: Option<(Vec<i64>, Vec<usize>)> = None;
        let mut order: Vec<usize> = Vec::with_capacity(p);
        let mut used = vec![false; p];
        self.search_order(&mut order, &mut used, &mut best);
        let (enc, order) = best.expect("at least one ordering exists");
        let mut relabel = vec![0usize; p];
        for (new, &old) in order.iter().enumerate() {
            relabel[old] = new;
        }
        Ok((enc, relabel))
    }

    fn encode_with_order(&self, order: &[usize]) -> Vec<i64> {
        let mut pos = vec![usize::MAX; self.vertices.len()];
        for (i, &v) in order.iter().enumerate() {
            pos[v] = i;
        }
        let mut enc: Vec<i64> = vec![
            self.n_out() as i64,
            self.n_in() as i64,
            self.vertices.len() as i64,
        ];
        for &v in order {
            enc.push(self.vertices[v].outs as i64);
            enc.push(self.vertices[v].ins as i64);
        }
        for &(v, _) in &self.out_legs {
            enc.push(pos[v] as i64);
        }
        for &(v, _) in &self.in_legs {
            enc.push(pos[v] as i64);
        }
        let mut counts: BTreeMap<(usize, usize), i64> = BTreeMap::new();
        for e in &self.edges {
            *counts.entry((pos[e.from], pos[e.to])).or_insert(0) += 1;
        }
        for ((a, b), c) in counts {
            enc.push(a as i64);
            enc.push(b as i64);
            enc.push(c);
        }
        enc
    }

    fn search_order(
        &self,
        order: &mut Vec<usize>,
        used: &mut Vec<bool>,
        best: &mut Option<(Vec<i64>, Vec<usize>)>,
    ) {
        let p = self.vertices.len();
        if order.len() == p {
            let enc = self.encode_with_order(order);
            if best.as_ref().map_or(true, |(b, _)| enc < *b) {
                *best = Some((enc, order.clone()));
            }
            return;
        }
        for v in 0..p {
            if !used[v] {
                used[v] = true;
                order.push(v);
                self.search_order(order, used, best);
                order.pop();
                used[v] = false;
            }
        }
    }

    /// Serialize to the wire format.
    pub fn to_json(&self) -> GraphJson {
        GraphJson {
            vertices: self
                .vertices
                .iter()
                .map(|v| VertexJson {
                    r#in: v.ins,
                    out: v.outs,
                })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|e| [e.from, e.from_slot, e.to, e.to_slot])
                .collect(),
            in_legs: self
                .in_legs
                .iter()
                .enumerate()
                .map(|(k, &(v, s))| [k + 1, v, s])
                .collect(),
            out_legs: self
                .out_legs
                .iter()
                .enumerate()
                .map(|(k, &(v, s))| [k + 1, v, s])
                .collect(),
        }
    }

    /// Parse and validate the wire format. Leg labels must form 1..=n and
    /// 1..=m with no duplicates.
    pub fn from_json(j: &GraphJson) -> Result<DirectedGraph> {
        let vertices: Vec<VertexShape> = j
            .vertices
            .iter()
            .map(|v| VertexShape {
                ins: v.r#in,
                outs: v.out,
            })
            .collect();
        let edges: Vec<Edge> = j
            .edges
            .iter()
            .map(|&[a, b, c, d]| Edge {
                from: a,
                from_slot: b,
                to: c,
                to_slot: d,
            })
            .collect();
        let collect_legs = |raw: &Vec<[usize; 3]>, side: &str| -> Result<Vec<(usize, usize)>> {
            let mut legs = vec![None; raw.len()];
            for &[label, v, s] in raw {
                if label == 0 || label > raw.len() {
                    return Err(Error::DuplicateLabel(format!(
                        "{side} leg label {label} outside 1..={}",
                        raw.len()
                    )));
                }
                if legs[label - 1].replace((v, s)).is_some() {
                    return Err(Error::DuplicateLabel(format!(
                        "{side} leg label {label} appears twice"
                    )));
                }
            }
            Ok(legs.into_iter().map(|x| x.unwrap()).collect())
        };
        DirectedGraph::new(
            vertices,
            edges,
            collect_legs(&j.in_legs, "input")?,
            collect_legs(&j.out_legs, "output")?,
        )
    }
}

/// What sits in a half-edge slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotOccupant {
    /// Index into the edge list.
    Edge(usize),
    /// 1-based leg label.
    Leg(usize),
}

/// A leg-fixing symmetry: vertex permutation plus per-vertex slot bijections.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Automorphism {
    /// vertex_map[v] = image vertex.
    pub vertex_map: Vec<usize>,
    /// in_slot_maps[v][s] = image slot at vertex vertex_map[v].
    pub in_slot_maps: Vec<Vec<usize>>,
    pub out_slot_maps: Vec<Vec<usize>>,
}

impl Automorphism {
    pub fn identity(g: &DirectedGraph) -> Automorphism {
        Automorphism {
            vertex_map: (0..g.vertices().len()).collect(),
            in_slot_maps: g.vertices().iter().map(|v| (0..v.ins).collect()).collect(),
            out_slot_maps: g.vertices().iter().map(|v| (0..v.outs).collect()).collect(),
        }
    }

    /// self followed by other.
    pub fn compose(&self, other: &Automorphism) -> Automorphism {
        let p = self.vertex_map.len();
        let mut vertex_map = vec![0; p];
        let mut in_slot_maps = Vec::with_capacity(p);
        let mut out_slot_maps = Vec::with_capacity(p);
        for v in 0..p {
            let mid = self.vertex_map[v];
            vertex_map[v] = other.vertex_map[mid];
            in_slot_maps.push(
                self.in_slot_maps[v]
                    .iter()
                    .map(|&s| other.in_slot_maps[mid][s])
                    .collect(),
            );
            out_slot_maps.push(
                self.out_slot_maps[v]
                    .iter()
                    .map(|&s| other.out_slot_maps[mid][s])
                    .collect(),
            );
        }
        Automorphism {
            vertex_map,
            in_slot_maps,
            out_slot_maps,
        }
    }
}

/// JSON wire format for graphs. Labels 1-based, vertices/slots 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphJson {
    pub vertices: Vec<VertexJson>,
    pub edges: Vec<[usize; 4]>,
    pub in_legs: Vec<[usize; 3]>,
    pub out_legs: Vec<[usize; 3]>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VertexJson {
    pub r#in: usize,
    pub out: usize,
}

/// All permutations of 0..n in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..n).collect();
    loop {
        out.push(cur.clone());
        // next_permutation
        let mut i = n.wrapping_sub(1);
        loop {
            if i == 0 || i == usize::MAX {
                return out;
            }
            if cur[i - 1] < cur[i] {
                break;
            }
            i -= 1;
        }
        let mut j = n - 1;
        while cur[j] <= cur[i - 1] {
            j -= 1;
        }
        cur.swap(i - 1, j);
        cur[i..].reverse();
    }
}

/// Parity of a permutation given as image vector; true = odd.
pub fn permutation_is_odd(perm: &[usize]) -> bool {
    let mut seen = vec![false; perm.len()];
    let mut odd = false;
    for start in 0..perm.len() {
        if seen[start] {
            continue;
        }
        let mut len = 0;
        let mut x = start;
        while !seen[x] {
            seen[x] = true;
            x = perm[x];
            len += 1;
        }
        if len % 2 == 0 {
            odd = !odd;
        }
    }
    odd
}

#[cfg(test)]
mod tests {
    use super::*;

    /// The four-vertex, four-leg, five-edge example: a chain of three vertices
    /// feeding upward with a side wheel. Vertices: 0 = bottom (1,2) with input
    /// legs 1,2; 1 = left (1,1); 2 = right mid (2,1)... we reconstruct the
    /// displayed combinatorics: 4 vertices, 4 legs (2 in + 2 out), 5 edges,
    /// one directed cycle, genus 2.
    fn display_graph() -> DirectedGraph {
        // v0: bottom vertex, ins 2 (legs 1,2), outs 2 (edges to v1 and v3)
        // v1: top vertex, ins 2 (edge from v0, edge from v3), outs 2 (out legs 1,2)
        // v3: middle-left vertex, ins 1 (edge from v0), outs 2 (edge to v1, edge to wheel v2... )
        // v2: side vertex on the wheel: ins 1 (edge from v3), outs 1 (edge back to v3).
        // Edge count: v0->v1, v0->v3, v3->v1, v3->v2, v2->v3 = 5. Genus 5-4+1 = 2.
        DirectedGraph::new(
            vec![
                VertexShape { ins: 2, outs: 2 },
                VertexShape { ins: 2, outs: 2 },
                VertexShape { ins: 1, outs: 1 },
                VertexShape { ins: 2, outs: 2 },
            ],
            vec![
                Edge { from: 0, from_slot: 0, to: 1, to_slot: 0 },
                Edge { from: 0, from_slot: 1, to: 3, to_slot: 0 },
                Edge { from: 3, from_slot: 0, to: 1, to_slot: 1 },
                Edge { from: 3, from_slot: 1, to: 2, to_slot: 0 },
                Edge { from: 2, from_slot: 0, to: 3, to_slot: 1 },
            ],
            vec![(0, 0), (0, 1)],
            vec![(1, 0), (1, 1)],
        )
        .unwrap()
    }

    #[test]
    fn display_graph_counts() {
        let g = display_graph();
        assert_eq!(g.vertices().len(), 4);
        assert_eq!(g.n_in() + g.n_out(), 4);
        assert_eq!(g.edges().len(), 5);
        assert_eq!(g.genus(), 2);
        assert!(g.has_wheel());
        assert!(g.is_connected());
    }

    #[test]
    fn corolla_and_empty_validate() {
        let c = DirectedGraph::corolla(2, 3);
        assert_eq!(c.n_out(), 2);
        assert_eq!(c.n_in(), 3);
        assert_eq!(c.genus(), 0);
        let e = DirectedGraph::empty();
        assert_eq!(e.genus(), 0);
        assert!(e.is_connected());
    }

    #[test]
    fn validation_rejects_bad_graphs() {
        // Dangling: vertex with an unused slot.
        let r = DirectedGraph::new(
            vec![VertexShape { ins: 1, outs: 1 }],
            vec![],
            vec![(0, 0)],
            vec![],
        );
        assert!(matches!(r, Err(Error::DanglingHalfEdge(_))));
        // Doubly used slot.
        let r = DirectedGraph::new(
            vec![VertexShape { ins: 1, outs: 1 }],
            vec![],
            vec![(0, 0), (0, 0)],
            vec![(0, 0)],
        );
        assert!(matches!(r, Err(Error::DuplicateLabel(_))));
        // Out-of-range slot.
        let r = DirectedGraph::new(
            vec![VertexShape { ins: 1, outs: 1 }],
            vec![],
            vec![(0, 5)],
            vec![(0, 0)],
        );
        assert!(matches!(r, Err(Error::OrientationMismatch(_))));
    }

    #[test]
    fn classify_corolla_12() {
        let g = DirectedGraph::corolla(1, 2);
        let tags = g.classify();
        assert!(tags.contains(&FamilyTag::Operad));
        assert!(tags.contains(&FamilyTag::HalfProp));
        assert!(tags.contains(&FamilyTag::WheeledProp));
        assert!(!tags.contains(&FamilyTag::AssocLine));
        assert_eq!(tags.len(), 8);
    }

    #[test]
    fn classify_self_loop() {
        // Single vertex (1,1) with its output wheeled into its input, no legs.
        let g = DirectedGraph::new(
            vec![VertexShape { ins: 1, outs: 1 }],
            vec![Edge { from: 0, from_slot: 0, to: 0, to_slot: 0 }],
            vec![],
            vec![],
        )
        .unwrap();
        assert_eq!(g.genus(), 1);
        let tags = g.classify();
        assert!(tags.contains(&FamilyTag::WheeledOperad));
        assert!(!tags.contains(&FamilyTag::Prop));
    }

    /// Two-vertex (1,3) tree: bottom (1,2) vertex with a (1,2) vertex grafted
    /// into its first input.
    fn two_vertex_13_tree() -> DirectedGraph {
        DirectedGraph::new(
            vec![VertexShape { ins: 2, outs: 1 }, VertexShape { ins: 2, outs: 1 }],
            vec![Edge { from: 1, from_slot: 0, to: 0, to_slot: 0 }],
            vec![(1, 0), (1, 1), (0, 1)],
            vec![(0, 0)],
        )
        .unwrap()
    }

    #[test]
    fn classify_two_vertex_tree() {
        let g = two_vertex_13_tree();
        assert_eq!(g.leg_path_count(), 3);
        let tags = g.classify();
        assert!(tags.contains(&FamilyTag::HalfProp));
        assert!(tags.contains(&FamilyTag::Operad));
    }

    #[test]
    fn genus_additivity_under_contraction() {
        let g = display_graph();
        let h: BTreeSet<usize> = [2usize, 3].into_iter().collect();
        let sub = g.induced_subgraph(&h);
        let contracted = g.contract_subgraph(&h, FamilyTag::WheeledProp).unwrap();
        assert_eq!(sub.genus() + contracted.genus(), g.genus());
    }

    #[test]
    fn contract_full_vertex_set_gives_corolla() {
        let g = display_graph();
        let all: BTreeSet<usize> = (0..4).collect();
        let c = g.contract_subgraph(&all, FamilyTag::WheeledProp).unwrap();
        assert_eq!(c.vertices().len(), 1);
        assert_eq!(c.edges().len(), 0);
        assert_eq!(c.n_in(), 2);
        assert_eq!(c.n_out(), 2);
    }

    #[test]
    fn contraction_can_leave_family() {
        // Two vertices joined by two parallel edges: contracting one vertex of
        // a wheel-free pair is fine for props, but the /induced subgraph/ of
        // both vertices has genus 1, so dioperad contraction must fail.
        let g = DirectedGraph::new(
            vec![VertexShape { ins: 1, outs: 2 }, VertexShape { ins: 2, outs: 1 }],
            vec![
                Edge { from: 0, from_slot: 0, to: 1, to_slot: 0 },
                Edge { from: 0, from_slot: 1, to: 1, to_slot: 1 },
            ],
            vec![(0, 0)],
            vec![(1, 0)],
        )
        .unwrap();
        let both: BTreeSet<usize> = [0usize, 1].into_iter().collect();
        assert!(g.contract_subgraph(&both, FamilyTag::Prop).is_ok());
        assert!(matches!(
            g.contract_subgraph(&both, FamilyTag::Dioperad),
            Err(Error::NotAdmissible(_))
        ));
    }

    /// The two-vertex graph with a (1,2) vertex atop a (2,2) vertex, joined by
    /// two parallel edges: automorphism group of order 2.
    fn parallel_pair() -> DirectedGraph {
        DirectedGraph::new(
            vec![VertexShape { ins: 2, outs: 1 }, VertexShape { ins: 2, outs: 2 }],
            vec![
                Edge { from: 1, from_slot: 0, to: 0, to_slot: 0 },
                Edge { from: 1, from_slot: 1, to: 0, to_slot: 1 },
            ],
            vec![(1, 0), (1, 1)],
            vec![(0, 0)],
        )
        .unwrap()
    }

    #[test]
    fn automorphisms_of_parallel_pair() {
        let g = parallel_pair();
        let auts = g.automorphisms(SizeLimits::default()).unwrap();
        assert_eq!(auts.len(), 2);
        // Closure and inverses: the group axioms on a complete listing.
        for a in &auts {
            for b in &auts {
                let c = a.compose(b);
                assert!(auts.contains(&c));
            }
            let inv_exists = auts.iter().any(|b| {
                a.compose(b) == Automorphism::identity(&g)
            });
            assert!(inv_exists);
        }
    }

    #[test]
    fn automorphisms_of_corolla_trivial() {
        let g = DirectedGraph::corolla(3, 4);
        let auts = g.automorphisms(SizeLimits::default()).unwrap();
        assert_eq!(auts.len(), 1);
    }

    #[test]
    fn canonical_form_invariant_under_relabelling() {
        let g = display_graph();
        // Re-index vertices by the permutation (0 1 2 3) -> (2 0 3 1).
        let perm = [2usize, 0, 3, 1];
        let vertices: Vec<VertexShape> = {
            let mut v = vec![VertexShape { ins: 0, outs: 0 }; 4];
            for old in 0..4 {
                v[perm[old]] = g.vertices()[old];
            }
            v
        };
        let edges: Vec<Edge> = g
            .edges()
            .iter()
            .map(|e| Edge {
                from: perm[e.from],
                from_slot: e.from_slot,
                to: perm[e.to],
                to_slot: e.to_slot,
            })
            .collect();
        let in_legs = g.in_legs().iter().map(|&(v, s)| (perm[v], s)).collect();
        let out_legs = g.out_legs().iter().map(|&(v, s)| (perm[v], s)).collect();
        let h = DirectedGraph::new(vertices, edges, in_legs, out_legs).unwrap();
        let lim = SizeLimits::default();
        assert_eq!(g.canonical_form(lim).unwrap().0, h.canonical_form(lim).unwrap().0);
    }

    #[test]
    fn canonical_form_separates_corollas() {
        let lim = SizeLimits::default();
        let a = DirectedGraph::corolla(1, 2).canonical_form(lim).unwrap().0;
        let b = DirectedGraph::corolla(2, 1).canonical_form(lim).unwrap().0;
        assert_ne!(a, b);
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let g = display_graph();
        let j = g.to_json();
        let s1 = serde_json::to_string(&j).unwrap();
        let g2 = DirectedGraph::from_json(&serde_json::from_str(&s1).unwrap()).unwrap();
        let s2 = serde_json::to_string(&g2.to_json()).unwrap();
        assert_eq!(s1, s2);
        assert_eq!(g, g2);
    }

    #[test]
    fn permutation_helpers() {
        assert_eq!(permutations(3).len(), 6);
        assert!(!permutation_is_odd(&[0, 1, 2]));
        assert!(permutation_is_odd(&[1, 0, 2]));
        assert!(permutation_is_odd(&[1, 2, 3, 0])); // 4-cycle is odd
    }
}
