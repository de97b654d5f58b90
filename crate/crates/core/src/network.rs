//! Segment graphs: chains, Y-junctions, the AND-gate junction and tapers.
//!
//! Every segment is an L-section hung off its *input* node: the shunt
//! capacitance, the leakage to the rest battery and both switched sources
//! sit on `from`, and the axial resistance runs from `from` to `to`. The
//! far end of a chain is therefore an open resistor end carrying no
//! membrane of its own, and the merge node of a junction is the input of
//! the first trunk segment and holds that segment's membrane.
//!
//! Node labels follow the figure numbering: `v(k)` is the input node of
//! segment `k`, `A` / `B` are the input terminals, `Z` the output terminal
//! and `J` the junction.

use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::membrane::SegmentSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct NodeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Node {
    /// Extra shunt capacitance on this node, F.
    pub extra_c: f64,
    /// Multiplier on the membrane capacitance accumulated at this node.
    pub c_scale: f64,
}

impl Default for Node {
    fn default() -> Self {
        Self {
            extra_c: 0.0,
            c_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Segment {
    /// Figure number of the segment (1-based; branch B starts at 21).
    pub number: usize,
    pub from: NodeId,
    pub to: NodeId,
    pub spec: SegmentSpec,
}

impl Segment {
    /// Node carrying this segment's membrane (shunt side).
    pub fn shunt_node(&self) -> NodeId {
        self.from
    }
}

/// Immutable node/segment graph.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Topology {
    nodes: Vec<Node>,
    segments: Vec<Segment>,
    labels: BTreeMap<String, NodeId>,
}

impl Topology {
    /// Assembles and validates a topology from raw parts.
    pub fn new(
        nodes: Vec<Node>,
        segments: Vec<Segment>,
        labels: BTreeMap<String, NodeId>,
    ) -> Result<Self> {
        let topo = Self {
            nodes,
            segments,
            labels,
        };
        topo.validate()?;
        Ok(topo)
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn labels(&self) -> &BTreeMap<String, NodeId> {
        &self.labels
    }

    pub fn node(&self, label: &str) -> Result<NodeId> {
        self.labels
            .get(label)
            .copied()
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    /// Canonical `v(k)` label of a node, falling back to its index.
    pub fn node_name(&self, id: NodeId) -> String {
        self.labels
            .iter()
            .find(|(k, v)| **v == id && k.starts_with("v("))
            .map(|(k, _)| k.clone())
            .unwrap_or_else(|| id.to_string())
    }

    pub fn segment_by_number(&self, number: usize) -> Option<&Segment> {
        self.segments.iter().find(|s| s.number == number)
    }

    /// True when every segment links consecutive node indices, so the nodal
    /// matrix is tridiagonal in natural order.
    pub fn is_linear_chain(&self) -> bool {
        self.segments
            .iter()
            .all(|s| s.from.0.abs_diff(s.to.0) == 1)
    }

    /// Adds extra shunt capacitance to a node.
    pub fn with_extra_capacitance(mut self, node: NodeId, farads: f64) -> Result<Self> {
        self.nodes
            .get_mut(node.0)
            .ok_or(Error::UnknownNode(node.0))?
            .extra_c += farads;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        if n < 2 {
            return Err(Error::InvalidTopology("need at least two nodes".into()));
        }
        if self.segments.is_empty() {
            return Err(Error::InvalidTopology("no segments".into()));
        }
        for node in &self.nodes {
            if !(node.extra_c.is_finite() && node.extra_c >= 0.0) {
                return Err(Error::InvalidTopology(format!(
                    "extra capacitance must be non-negative, got {}",
                    node.extra_c
                )));
            }
            if !(node.c_scale.is_finite() && node.c_scale > 0.0) {
                return Err(Error::InvalidTopology(format!(
                    "capacitance scale must be positive, got {}",
                    node.c_scale
                )));
            }
        }
        for seg in &self.segments {
            seg.spec.validate()?;
            if seg.from.0 >= n || seg.to.0 >= n {
                return Err(Error::InvalidTopology(format!(
                    "segment {} references a missing node",
                    seg.number
                )));
            }
            if seg.from == seg.to {
                return Err(Error::InvalidTopology(format!(
                    "segment {} is a self-loop",
                    seg.number
                )));
            }
        }
        for (label, id) in &self.labels {
            if id.0 >= n {
                return Err(Error::InvalidTopology(format!("label {label} out of range")));
            }
        }
        // Connectivity by union-find.
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut i: usize) -> usize {
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        for seg in &self.segments {
            let a = find(&mut parent, seg.from.0);
            let b = find(&mut parent, seg.to.0);
            parent[a] = b;
        }
        let root = find(&mut parent, 0);
        if (1..n).any(|i| find(&mut parent, i) != root) {
            return Err(Error::InvalidTopology("graph is not connected".into()));
        }
        Ok(())
    }
}

/// A rectangular current pulse injected at a node over `[t_start, t_start + duration)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stimulus {
    pub node: NodeId,
    /// Amperes; positive depolarizes.
    pub amplitude: f64,
    /// Seconds.
    pub t_start: f64,
    /// Seconds.
    pub duration: f64,
}

impl Stimulus {
    pub fn new(node: NodeId, amplitude: f64, t_start: f64, duration: f64) -> Self {
        Self {
            node,
            amplitude,
            t_start,
            duration,
        }
    }

    /// Stimulus at a labelled node.
    pub fn at(
        topology: &Topology,
        label: &str,
        amplitude: f64,
        t_start: f64,
        duration: f64,
    ) -> Result<Self> {
        Ok(Self::new(topology.node(label)?, amplitude, t_start, duration))
    }

    /// The standard trigger: 10 nA for 0.2 ms starting at t = 0.
    pub fn standard(topology: &Topology, label: &str) -> Result<Self> {
        Self::at(topology, label, 10e-9, 0.0, 0.2e-3)
    }

    pub fn validate(&self, topology: &Topology) -> Result<()> {
        if !self.amplitude.is_finite() {
            return Err(Error::InvalidStimulus("amplitude must be finite".into()));
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::InvalidStimulus(format!(
                "duration must be positive, got {}",
                self.duration
            )));
        }
        if !(self.t_start.is_finite() && self.t_start >= 0.0) {
            return Err(Error::InvalidStimulus(format!(
                "start time must be non-negative, got {}",
                self.t_start
            )));
        }
        if self.node.0 >= topology.node_count() {
            return Err(Error::UnknownNode(self.node.0));
        }
        Ok(())
    }
}

struct Builder {
    nodes: Vec<Node>,
    segments: Vec<Segment>,
    labels: BTreeMap<String, NodeId>,
}

impl Builder {
    fn new() -> Self {
        Self {
            nodes: Vec::new(),
            segments: Vec::new(),
            labels: BTreeMap::new(),
        }
    }

    fn node(&mut self, number: usize) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node::default());
        self.labels.insert(format!("v({number})"), id);
        id
    }

    fn alias(&mut self, label: &str, id: NodeId) {
        self.labels.insert(label.to_string(), id);
    }

    fn segment(&mut self, number: usize, from: NodeId, to: NodeId, spec: SegmentSpec) {
        self.segments.push(Segment {
            number,
            from,
            to,
            spec,
        });
    }

    fn finish(self) -> Result<Topology> {
        Topology::new(self.nodes, self.segments, self.labels)
    }
}

fn chain_with_specs(specs: &[SegmentSpec], terminal_extra_c: f64) -> Result<Topology> {
    if specs.is_empty() {
        return Err(Error::InvalidTopology("chain needs at least one segment".into()));
    }
    let mut b = Builder::new();
    let ids: Vec<NodeId> = (1..=specs.len() + 1).map(|k| b.node(k)).collect();
    for (k, spec) in specs.iter().enumerate() {
        b.segment(k + 1, ids[k], ids[k + 1], *spec);
    }
    b.alias("A", ids[0]);
    b.alias("Z", ids[specs.len()]);
    // The load sits on the membrane node of the last segment.
    b.nodes[ids[specs.len() - 1].0].extra_c = terminal_extra_c;
    b.finish()
}

/// Straight chain of `n_segments` identical segments, nodes `v(1)..v(n+1)`.
///
/// `terminal_extra_c` (farads) loads the last segment's membrane node, leaving
/// every resistance unchanged.
pub fn build_chain(n_segments: usize, spec: SegmentSpec, terminal_extra_c: f64) -> Result<Topology> {
    if n_segments == 0 {
        return Err(Error::InvalidTopology("chain needs at least one segment".into()));
    }
    spec.validate()?;
    chain_with_specs(&vec![spec; n_segments], terminal_extra_c)
}

fn junction_with_trunk_head(
    branch_len: usize,
    trunk_len: usize,
    spec: SegmentSpec,
    head: SegmentSpec,
    junction_c_scale: f64,
) -> Result<Topology> {
    if branch_len == 0 || trunk_len == 0 {
        return Err(Error::InvalidTopology(
            "branch and trunk lengths must be at least one".into(),
        ));
    }
    if !(junction_c_scale.is_finite() && junction_c_scale > 0.0) {
        return Err(Error::InvalidTopology(format!(
            "junction capacitance scale must be positive, got {junction_c_scale}"
        )));
    }
    spec.validate()?;
    head.validate()?;

    let mut b = Builder::new();
    // Branch A and trunk share the main numbering 1..=branch_len + trunk_len + 1.
    let main: Vec<NodeId> = (1..=branch_len + trunk_len + 1).map(|k| b.node(k)).collect();
    let junction = main[branch_len];
    for k in 0..branch_len {
        b.segment(k + 1, main[k], main[k + 1], spec);
    }
    for j in 0..trunk_len {
        let k = branch_len + j;
        let s = if j == 0 { head } else { spec };
        b.segment(k + 1, main[k], main[k + 1], s);
    }
    // Branch B numbering starts at 21, or at the next free multiple of ten.
    let offset = (branch_len + trunk_len + 1).div_ceil(10).max(2) * 10;
    let branch_b: Vec<NodeId> = (1..=branch_len).map(|k| b.node(offset + k)).collect();
    for k in 0..branch_len {
        let to = if k + 1 < branch_len {
            branch_b[k + 1]
        } else {
            junction
        };
        b.segment(offset + k + 1, branch_b[k], to, spec);
    }
    b.alias("A", main[0]);
    b.alias("B", branch_b[0]);
    b.alias("J", junction);
    b.alias("Z", main[branch_len + trunk_len]);
    b.nodes[junction.0].c_scale = junction_c_scale;
    b.finish()
}

/// Two input branches `A` and `B` merging into one trunk ending at `Z`.
///
/// The merge node is the input of the first trunk segment; its accumulated
/// membrane capacitance is multiplied by `junction_c_scale`.
pub fn build_junction(
    branch_len: usize,
    trunk_len: usize,
    spec: SegmentSpec,
    junction_c_scale: f64,
) -> Result<Topology> {
    junction_with_trunk_head(branch_len, trunk_len, spec, spec, junction_c_scale)
}

/// Length of the shortened, inhibited trunk head in the AND gate, cm.
pub const AND_GATE_HEAD_LENGTH: f64 = 0.05;

/// The 5/5 junction with its first trunk segment halved in length and its
/// sources removed.
pub fn build_and_gate(spec: SegmentSpec) -> Result<Topology> {
    let head = spec.with_length(AND_GATE_HEAD_LENGTH).passive();
    junction_with_trunk_head(5, 5, spec, head, 1.0)
}

/// Chain whose segment diameters interpolate linearly from `d_start` to
/// `d_end`, each segment taking the diameter at its midpoint.
pub fn build_taper(
    n_segments: usize,
    d_start: f64,
    d_end: f64,
    spec_template: SegmentSpec,
) -> Result<Topology> {
    if n_segments < 2 {
        return Err(Error::InvalidTopology("taper needs at least two segments".into()));
    }
    if !(d_start.is_finite() && d_end.is_finite() && d_start > 0.0 && d_end > 0.0) {
        return Err(Error::InvalidSpec(format!(
            "taper diameters must be positive, got {d_start} and {d_end}"
        )));
    }
    let n = n_segments as f64;
    let specs: Vec<SegmentSpec> = (0..n_segments)
        .map(|k| {
            let frac = (k as f64 + 0.5) / n;
            spec_template.with_diameter(d_start + (d_end - d_start) * frac)
        })
        .collect();
    chain_with_specs(&specs, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::membrane::{derive_elements, MembraneParams};
    use approx::assert_relative_eq;

    #[test]
    fn ten_segment_chain() {
        let t = build_chain(10, SegmentSpec::default(), 0.0).unwrap();
        assert_eq!(t.node_count(), 11);
        assert_eq!(t.segments().len(), 10);
        assert_eq!(t.node("A").unwrap(), t.node("v(1)").unwrap());
        assert_eq!(t.node("Z").unwrap(), t.node("v(11)").unwrap());
        assert!(t.nodes().iter().all(|n| n.extra_c == 0.0));
        assert!(t.is_linear_chain());
    }

    #[test]
    fn loaded_chain_puts_load_on_last_membrane() {
        let t = build_chain(10, SegmentSpec::default(), 60e-12).unwrap();
        let last = t.segment_by_number(10).unwrap().shunt_node();
        assert_eq!(last, t.node("v(10)").unwrap());
        assert_eq!(t.nodes()[last.0].extra_c, 60e-12);
        assert_eq!(
            t.nodes().iter().filter(|n| n.extra_c > 0.0).count(),
            1
        );
    }

    #[test]
    fn minimal_chain() {
        let t = build_chain(1, SegmentSpec::default(), 0.0).unwrap();
        assert_eq!(t.node_count(), 2);
        assert_eq!(t.segments().len(), 1);
        assert!(matches!(
            build_chain(0, SegmentSpec::default(), 0.0),
            Err(Error::InvalidTopology(_))
        ));
    }

    #[test]
    fn or_junction_layout() {
        let t = build_junction(5, 5, SegmentSpec::default(), 1.0).unwrap();
        // 11 main-line nodes plus five on branch B.
        assert_eq!(t.node_count(), 16);
        assert_eq!(t.segments().len(), 15);
        let j = t.node("J").unwrap();
        assert_eq!(j, t.node("v(6)").unwrap());
        assert_eq!(t.segment_by_number(5).unwrap().to, j);
        assert_eq!(t.segment_by_number(25).unwrap().to, j);
        assert_eq!(t.segment_by_number(6).unwrap().from, j);
        assert_eq!(t.node("B").unwrap(), t.node("v(21)").unwrap());
        assert!(t.node("v(22)").is_ok());
        assert_eq!(t.node("Z").unwrap(), t.node("v(11)").unwrap());
        assert!(!t.is_linear_chain());
    }

    #[test]
    fn xor_junction_scales_only_the_merge_node() {
        let t = build_junction(5, 5, SegmentSpec::default(), 0.67).unwrap();
        let j = t.node("J").unwrap();
        for (i, n) in t.nodes().iter().enumerate() {
            let expected = if i == j.0 { 0.67 } else { 1.0 };
            assert_eq!(n.c_scale, expected);
        }
    }

    #[test]
    fn minimal_junction() {
        let t = build_junction(1, 1, SegmentSpec::default(), 1.0).unwrap();
        assert_eq!(t.segments().len(), 3);
        assert_eq!(t.node_count(), 4);
        assert!(build_junction(0, 1, SegmentSpec::default(), 1.0).is_err());
        assert!(build_junction(1, 0, SegmentSpec::default(), 1.0).is_err());
        assert!(build_junction(1, 1, SegmentSpec::default(), 0.0).is_err());
    }

    #[test]
    fn and_gate_differs_only_in_trunk_head() {
        let spec = SegmentSpec::default();
        let or = build_junction(5, 5, spec, 1.0).unwrap();
        let and = build_and_gate(spec).unwrap();
        assert_eq!(or.labels(), and.labels());
        assert_eq!(or.nodes(), and.nodes());
        let diffs: Vec<usize> = or
            .segments()
            .iter()
            .zip(and.segments())
            .filter(|(a, b)| a != b)
            .map(|(a, _)| a.number)
            .collect();
        assert_eq!(diffs, vec![6]);
        let head = and.segment_by_number(6).unwrap();
        assert!(!head.spec.active);
        let el = derive_elements(&head.spec, &MembraneParams::default()).unwrap();
        assert_relative_eq!(el.r_axial, 100e6, max_relative = 0.01);
        assert_relative_eq!(el.c_shunt, 15.7e-12, max_relative = 0.01);
        assert_eq!(el.i_na, 0.0);
    }

    #[test]
    fn taper_is_monotone() {
        let p = MembraneParams::default();
        let t = build_taper(10, 1e-4, 0.5e-4, SegmentSpec::default()).unwrap();
        let els: Vec<_> = t
            .segments()
            .iter()
            .map(|s| derive_elements(&s.spec, &p).unwrap())
            .collect();
        for w in els.windows(2) {
            assert!(w[1].c_shunt < w[0].c_shunt);
            assert!(w[1].i_na < w[0].i_na);
            assert!(w[1].r_axial > w[0].r_axial);
        }
        assert_relative_eq!(t.segments()[0].spec.diameter, 0.975e-4, max_relative = 1e-12);
        assert_relative_eq!(t.segments()[9].spec.diameter, 0.525e-4, max_relative = 1e-12);
    }

    #[test]
    fn degenerate_taper_is_a_chain() {
        let spec = SegmentSpec::default();
        assert_eq!(
            build_taper(10, 1e-4, 1e-4, spec).unwrap(),
            build_chain(10, spec, 0.0).unwrap()
        );
        assert!(build_taper(1, 1e-4, 1e-4, spec).is_err());
        assert!(build_taper(10, 0.0, 1e-4, spec).is_err());
    }

    #[test]
    fn builders_are_deterministic() {
        let spec = SegmentSpec::default();
        assert_eq!(
            build_junction(4, 3, spec, 0.8).unwrap(),
            build_junction(4, 3, spec, 0.8).unwrap()
        );
    }

    #[test]
    fn long_junction_labels_do_not_collide() {
        let t = build_junction(12, 12, SegmentSpec::default(), 1.0).unwrap();
        // 25 main-line nodes, branch B moves to 31.. so labels stay unique.
        assert_eq!(t.node("B").unwrap(), t.node("v(31)").unwrap());
        assert_eq!(t.node_count(), 25 + 12);
        let numbered = t.labels().keys().filter(|k| k.starts_with("v(")).count();
        assert_eq!(numbered, t.node_count());
    }

    #[test]
    fn rejects_bad_graphs() {
        let spec = SegmentSpec::default();
        let nodes = vec![Node::default(); 3];
        let seg = |n, a, b| Segment {
            number: n,
            from: NodeId(a),
            to: NodeId(b),
            spec,
        };
        let disconnected = Topology::new(nodes.clone(), vec![seg(1, 0, 1)], BTreeMap::new());
        assert!(matches!(disconnected, Err(Error::InvalidTopology(_))));
        let self_loop = Topology::new(
            nodes.clone(),
            vec![seg(1, 0, 1), seg(2, 2, 2)],
            BTreeMap::new(),
        );
        assert!(matches!(self_loop, Err(Error::InvalidTopology(_))));
        let dangling = Topology::new(nodes, vec![seg(1, 0, 1), seg(2, 1, 7)], BTreeMap::new());
        assert!(dangling.is_err());
    }

    #[test]
    fn stimulus_validation() {
        let t = build_chain(2, SegmentSpec::default(), 0.0).unwrap();
        let s = Stimulus::standard(&t, "A").unwrap();
        assert!(s.validate(&t).is_ok());
        assert!(Stimulus::standard(&t, "nope").is_err());
        assert!(Stimulus { duration: 0.0, ..s }.validate(&t).is_err());
        assert!(Stimulus {
            amplitude: f64::NAN,
            ..s
        }
        .validate(&t)
        .is_err());
        assert!(Stimulus {
            node: NodeId(99),
            ..s
        }
        .validate(&t)
        .is_err());
    }
}
