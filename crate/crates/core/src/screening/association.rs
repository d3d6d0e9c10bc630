use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use rayon::prelude::*;

use super::{neutral_n_db, partition_subsets, ScreeningError, ScreeningHit, TargetRecord};
use crate::stats::{raw_score_unchecked, ModelSet, Purpose};

/// Edge `k` of a target must have an E-value strictly below `EDGE_CUTOFFS[k]`.
pub const EDGE_CUTOFFS: [f64; 3] = [1e-10, 1e-50, 1e-100];

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub partner: String,
    pub e_value: f64,
}

/// Precomputed target-to-target links, at most three per source.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AssociationGraph {
    edges: BTreeMap<String, Vec<Edge>>,
}

impl AssociationGraph {
    /// Checks out-degree, tier cutoffs and self-edges.
    pub fn from_edges(edges: BTreeMap<String, Vec<Edge>>) -> Result<AssociationGraph, String> {
        for (source, list) in &edges {
            if list.len() > EDGE_CUTOFFS.len() {
                return Err(format!("{source} has {} edges", list.len()));
            }
            for (k, e) in list.iter().enumerate() {
                if &e.partner == source {
                    return Err(format!("{source} links to itself"));
                }
                if !(e.e_value < EDGE_CUTOFFS[k]) {
                    return Err(format!("{source} edge {k} has E = {:e}", e.e_value));
                }
            }
        }
        Ok(AssociationGraph { edges })
    }

    pub fn neighbors(&self, target_id: &str) -> &[Edge] {
        self.edges.get(target_id).map_or(&[], Vec::as_slice)
    }

    pub fn edges(&self) -> impl Iterator<Item = (&str, &[Edge])> {
        self.edges.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn edge_count(&self) -> usize {
        self.edges.values().map(Vec::len).sum()
    }
}

/// Scores every unordered target pair within each subset with the subset's
/// clustering model (`S = |A|·|B|`), then keeps for each source the best
/// partners that pass the tiered cutoffs. Partners are ranked by E-value,
/// then by descending Z (which stays resolved after P saturates), then by id.
pub fn build_association_graph(targets: &[TargetRecord], models: &ModelSet) -> Result<AssociationGraph, ScreeningError> {
    let mut scored: BTreeMap<String, Vec<(f64, f64, String)>> = BTreeMap::new();
    for (subset, group) in partition_subsets(targets) {
        if group.len() < 2 {
            continue;
        }
        let model = models
            .get(subset, Purpose::Clustering)
            .ok_or(ScreeningError::MissingModel { subset, purpose: Purpose::Clustering })?;
        let sets: Vec<_> = group.iter().map(|t| t.screening_fps()).collect();
        let pairs: Vec<(usize, usize)> =
            (0..group.len()).flat_map(|a| (a + 1..group.len()).map(move |b| (a, b))).collect();
        let results: Vec<(usize, usize, f64, f64)> = pairs
            .par_iter()
            .map(|&(a, b)| {
                let raw = raw_score_unchecked(&sets[a], &sets[b], model.ts);
                let sig = model.significance(raw, (sets[a].len() * sets[b].len()) as f64)?;
                Ok((a, b, sig.e, sig.z))
            })
            .collect::<Result<_, ScreeningError>>()?;
        for (a, b, e, z) in results {
            let (ta, tb) = (&group[a].target_id, &group[b].target_id);
            scored.entry(ta.clone()).or_default().push((e, z, tb.clone()));
            scored.entry(tb.clone()).or_default().push((e, z, ta.clone()));
        }
    }
    let mut edges = BTreeMap::new();
    for (source, mut partners) in scored {
        partners.sort_by(|x, y| x.0.total_cmp(&y.0).then(y.1.total_cmp(&x.1)).then_with(|| x.2.cmp(&y.2)));
        let kept: Vec<Edge> = partners
            .into_iter()
            .zip(EDGE_CUTOFFS)
            .take_while(|((e, _, _), cutoff)| e < cutoff)
            .map(|((e, _, partner), _)| Edge { partner, e_value: e })
            .collect();
        if !kept.is_empty() {
            edges.insert(source, kept);
        }
    }
    Ok(AssociationGraph::from_edges(edges).expect("construction respects graph invariants"))
}

/// Graph neighbours of `hits` that are not themselves hits, flagged as
/// association hits with neutral statistics. A neighbour reached from
/// several hits keeps the parent with the lowest edge E-value.
pub fn associate_targets(
    hits: &[ScreeningHit],
    graph: &AssociationGraph,
    targets: &[TargetRecord],
    models: &ModelSet,
) -> Vec<ScreeningHit> {
    let direct: BTreeSet<&str> = hits.iter().map(|h| h.target_id.as_str()).collect();
    let by_id: BTreeMap<&str, &TargetRecord> = targets.iter().map(|t| (t.target_id.as_str(), t)).collect();
    let mut out: BTreeMap<String, ScreeningHit> = BTreeMap::new();
    for hit in hits {
        for edge in graph.neighbors(&hit.target_id) {
            if direct.contains(edge.partner.as_str()) {
                continue;
            }
            let Some(target) = by_id.get(edge.partner.as_str()) else { continue };
            let replace = out.get(&edge.partner).is_none_or(|cur| {
                let cur_e = cur.parent_e.expect("association hits carry parent E");
                edge.e_value < cur_e || (edge.e_value == cur_e && Some(&hit.target_id) < cur.association_parent.as_ref())
            });
            if replace {
                out.insert(
                    edge.partner.clone(),
                    ScreeningHit {
                        via_association: true,
                        association_parent: Some(hit.target_id.clone()),
                        parent_e: Some(edge.e_value),
                        ..ScreeningHit::neutral(target, neutral_n_db(models, target.subset))
                    },
                );
            }
        }
    }
    out.into_values().collect()
}

const TSV_HEADER: &str = "source_id\trank\tpartner_id\te_value";

pub fn write_association_tsv<W: Write>(mut out: W, graph: &AssociationGraph) -> std::io::Result<()> {
    writeln!(out, "{TSV_HEADER}")?;
    for (source, edges) in graph.edges() {
        for (rank, e) in edges.iter().enumerate() {
            writeln!(out, "{source}\t{rank}\t{}\t{:e}", e.partner, e.e_value)?;
        }
    }
    Ok(())
}

pub fn read_association_tsv<R: BufRead>(input: R) -> Result<AssociationGraph, ScreeningError> {
    let err = |line: usize, message: String| ScreeningError::Format { line, message };
    let mut edges: BTreeMap<String, Vec<Edge>> = BTreeMap::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        let lineno = n + 1;
        if n == 0 {
            if line != TSV_HEADER {
                return Err(err(lineno, format!("expected header {TSV_HEADER:?}")));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let [source, rank, partner, e] = cols[..] else {
            return Err(err(lineno, format!("expected 4 columns, found {}", cols.len())));
        };
        let rank: usize = rank.parse().map_err(|_| err(lineno, format!("bad rank {rank:?}")))?;
        let e_value: f64 = e.parse().map_err(|_| err(lineno, format!("bad e-value {e:?}")))?;
        let list = edges.entry(source.to_string()).or_default();
        if rank != list.len() {
            return Err(err(lineno, format!("rank {rank} out of order for {source}")));
        }
        list.push(Edge { partner: partner.to_string(), e_value });
    }
    AssociationGraph::from_edges(edges).map_err(|m| err(0, m))
}
