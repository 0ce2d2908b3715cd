//! JSON file formats shared by the command line tool and the FFI layer.

use std::collections::BTreeMap;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::bits::BitWord;
use crate::codes::ReceivedWord;
use crate::error::{Error, Result};
use crate::local_lists::{local_word_to_bits, LocalList};
use crate::sampler::{parse_rational, rational_to_f64, DoubleSampler};
use crate::ug_instance::{ConstraintGraph, UgInstance};
use crate::graph::WeightedGraph;

/// Reads and parses a JSON file; parse errors carry line and column.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// An edge weight written either as a JSON number or as a decimal or
/// fraction string.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Weight {
    Number(f64),
    Text(String),
}

impl Weight {
    pub fn value(&self) -> Result<f64> {
        let w = match self {
            Weight::Number(x) => *x,
            Weight::Text(s) => rational_to_f64(&parse_rational(s)?),
        };
        if !w.is_finite() || w < 0.0 {
            return Err(Error::invalid(format!("edge weight {w} must be finite and non-negative")));
        }
        Ok(w)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphFile {
    pub vertices: usize,
    pub edges: Vec<(usize, usize, Weight)>,
}

impl GraphFile {
    pub fn from_graph(g: &WeightedGraph) -> Self {
        GraphFile { vertices: g.vertex_count(), edges: g.edges().iter().map(|e| (e.u, e.v, Weight::Number(e.w))).collect() }
    }

    pub fn to_graph(&self) -> Result<WeightedGraph> {
        let edges = self.edges.iter().map(|(u, v, w)| Ok((*u, *v, w.value()?))).collect::<Result<Vec<_>>>()?;
        WeightedGraph::new(self.vertices, edges)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerFile {
    pub n: usize,
    pub m1: usize,
    pub m2: usize,
    #[serde(rename = "V1")]
    pub middle: Vec<Vec<usize>>,
    #[serde(rename = "V2")]
    pub top: Vec<Vec<usize>>,
    /// Law on the top layer as rational strings; uniform when absent.
    #[serde(rename = "W", default, skip_serializing_if = "Option::is_none")]
    pub law: Option<Vec<String>>,
}

impl SamplerFile {
    pub fn from_sampler(ds: &DoubleSampler) -> Self {
        SamplerFile {
            n: ds.n(),
            m1: ds.m1(),
            m2: ds.m2(),
            middle: ds.middle_sets().to_vec(),
            top: ds.top_sets().to_vec(),
            law: Some(ds.top_law_exact().iter().map(|r| r.to_string()).collect()),
        }
    }

    pub fn to_sampler(&self) -> Result<DoubleSampler> {
        let law = match &self.law {
            Some(w) => Some(w.iter().map(|s| parse_rational(s)).collect::<Result<Vec<_>>>()?),
            None => None,
        };
        DoubleSampler::new(self.n, self.m1, self.m2, self.middle.clone(), self.top.clone(), law)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MessageFile {
    pub n: usize,
    pub g: BitWord,
}

impl MessageFile {
    pub fn new(g: BitWord) -> Self {
        MessageFile { n: g.len(), g }
    }

    pub fn word(&self) -> Result<BitWord> {
        if self.g.len() != self.n {
            return Err(Error::invalid(format!("word has {} bits but n = {}", self.g.len(), self.n)));
        }
        Ok(self.g.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CopyValue {
    #[serde(rename = "S")]
    pub set: Vec<usize>,
    pub bits: BitWord,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReceivedFile {
    pub f: Vec<CopyValue>,
}

impl ReceivedFile {
    pub fn from_word(ds: &DoubleSampler, w: &ReceivedWord) -> Self {
        ReceivedFile {
            f: ds.middle_sets().iter().zip(&w.values).map(|(s, bits)| CopyValue { set: s.clone(), bits: bits.clone() }).collect(),
        }
    }

    /// Checks the copies against the sampler's middle layer, in order.
    pub fn to_word(&self, ds: &DoubleSampler) -> Result<ReceivedWord> {
        let middle = ds.middle_sets();
        if self.f.len() != middle.len() {
            return Err(Error::invalid(format!("received word has {} copies, sampler has {}", self.f.len(), middle.len())));
        }
        for (i, (copy, s)) in self.f.iter().zip(middle).enumerate() {
            if &copy.set != s {
                return Err(Error::invalid(format!("copy {i} is {:?}, expected {s:?}", copy.set)));
            }
            if copy.bits.len() != s.len() {
                return Err(Error::invalid(format!("copy {i} carries {} bits for a set of size {}", copy.bits.len(), s.len())));
            }
        }
        Ok(ReceivedWord { values: self.f.iter().map(|c| c.bits.clone()).collect() })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ListFile {
    #[serde(rename = "T")]
    pub top: Vec<usize>,
    pub r: f64,
    pub i: usize,
    pub entries: Vec<BitWord>,
}

impl ListFile {
    pub fn from_list(ds: &DoubleSampler, list: &LocalList) -> Self {
        ListFile {
            top: ds.top_sets()[list.top].clone(),
            r: list.radius,
            i: list.ladder,
            entries: list.entries.iter().map(|c| local_word_to_bits(c.word, list.width)).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub l: usize,
    pub edges: Vec<(usize, usize, Weight, Vec<usize>)>,
    /// Vertex ids per radius ladder index.
    #[serde(default)]
    pub groups: BTreeMap<String, Vec<usize>>,
    /// Vertex count; inferred from the edges and groups when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vertices: Option<usize>,
}

impl InstanceFile {
    pub fn from_instance(inst: &UgInstance) -> Self {
        let g = inst.graph();
        InstanceFile {
            l: inst.labels(),
            edges: g.edges().iter().enumerate().map(|(id, e)| (e.u, e.v, Weight::Number(e.w), inst.constraint(id).to_vec())).collect(),
            groups: BTreeMap::new(),
            vertices: Some(inst.vertex_count()),
        }
    }

    pub fn from_constraint_graph(cg: &ConstraintGraph) -> Self {
        let mut file = Self::from_instance(&cg.instance);
        file.groups = cg.groups.iter().map(|g| (g.ladder.to_string(), g.vertices.clone())).collect();
        file
    }

    pub fn to_instance(&self) -> Result<UgInstance> {
        let inferred = self
            .edges
            .iter()
            .map(|(u, v, _, _)| u.max(v) + 1)
            .chain(self.groups.values().flatten().map(|v| v + 1))
            .max()
            .unwrap_or(0);
        let vertices = self.vertices.unwrap_or(inferred);
        let edges = self.edges.iter().map(|(u, v, w, p)| Ok((*u, *v, w.value()?, p.clone()))).collect::<Result<Vec<_>>>()?;
        UgInstance::new(vertices, self.l, edges)
    }

    /// Groups keyed by ladder index.
    pub fn groups(&self) -> Result<BTreeMap<usize, Vec<usize>>> {
        self.groups
            .iter()
            .map(|(k, v)| Ok((k.parse().map_err(|_| Error::invalid(format!("group key {k:?} is not an index")))?, v.clone())))
            .collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionFile {
    pub assignments: Vec<Vec<usize>>,
    pub values: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::encode;
    use crate::local_lists::{decode_all, ListConfig};
    use crate::ug_instance::build_constraint_graph;

    #[test]
    fn graph_weights_accept_numbers_and_strings() {
        let file: GraphFile = serde_json::from_str(r#"{"vertices": 3, "edges": [[0, 1, "1/3"], [1, 2, 0.5], [2, 2, "2"]]}"#).unwrap();
        let g = file.to_graph().unwrap();
        assert!((g.edges()[0].w - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(g.edges()[2].w, 2.0);
        let back: GraphFile = serde_json::from_str(&serde_json::to_string(&GraphFile::from_graph(&g)).unwrap()).unwrap();
        assert_eq!(back.to_graph().unwrap().edges(), g.edges());
    }

    #[test]
    fn negative_weights_are_rejected() {
        for text in [r#"{"vertices": 2, "edges": [[0, 1, -1.0]]}"#, r#"{"vertices": 2, "edges": [[0, 1, "-0.5"]]}"#] {
            let file: GraphFile = serde_json::from_str(text).unwrap();
            assert!(file.to_graph().is_err());
        }
    }

    #[test]
    fn sampler_round_trip_is_exact() {
        let ds = DoubleSampler::complete(6, 2, 3, 100_000).unwrap();
        let file = SamplerFile::from_sampler(&ds);
        let text = serde_json::to_string(&file).unwrap();
        assert!(text.contains("\"V1\"") && text.contains("\"W\""));
        let back = serde_json::from_str::<SamplerFile>(&text).unwrap().to_sampler().unwrap();
        assert_eq!(back.top_sets(), ds.top_sets());
        assert_eq!(back.middle_sets(), ds.middle_sets());
        assert_eq!(back.top_law_exact(), ds.top_law_exact());
        let uniform = SamplerFile { law: None, ..file };
        assert_eq!(uniform.to_sampler().unwrap().top_law_exact(), ds.top_law_exact());
    }

    #[test]
    fn received_words_must_follow_the_middle_layer() {
        let ds = DoubleSampler::complete(5, 2, 3, 100_000).unwrap();
        let w = encode(&ds, &"01101".parse().unwrap()).unwrap();
        let file = ReceivedFile::from_word(&ds, &w);
        assert_eq!(file.to_word(&ds).unwrap(), w);
        let mut swapped = file.clone();
        swapped.f.swap(0, 1);
        assert!(swapped.to_word(&ds).is_err());
        let message: MessageFile = serde_json::from_str(r#"{"n": 3, "g": "0101"}"#).unwrap();
        assert!(message.word().is_err());
    }

    #[test]
    fn instances_round_trip() {
        let ds = DoubleSampler::complete(6, 2, 3, 100_000).unwrap();
        let w = encode(&ds, &"011010".parse().unwrap()).unwrap();
        let lists = decode_all(&ds, &w, &ListConfig::new(0.5, 0.01).unwrap()).unwrap();
        let cg = build_constraint_graph(&ds, &lists, None, 2).unwrap();
        let file = InstanceFile::from_constraint_graph(&cg);
        let back: InstanceFile = serde_json::from_str(&serde_json::to_string(&file).unwrap()).unwrap();
        let inst = back.to_instance().unwrap();
        assert_eq!(inst.vertex_count(), cg.instance.vertex_count());
        for id in 0..inst.graph().edges().len() {
            assert_eq!(inst.constraint(id), cg.instance.constraint(id));
        }
        assert_eq!(back.groups().unwrap()[&0], cg.groups[0].vertices);
        let list = ListFile::from_list(&ds, &lists[0]);
        assert_eq!(list.top, ds.top_sets()[0]);
        assert!(list.entries.iter().all(|e| e.len() == 3));
    }
}
