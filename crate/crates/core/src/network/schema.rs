//! JSON network description files.
//!
//! ```json
//! {
//!   "n": 2, "K": 2,
//!   "arrival": {"rate": "7/30", "production": [{"offspring": [1, 0], "prob": "1"}]},
//!   "queues": [
//!     {"rate": "5/12", "actions": [{"id": "a", "production": [...]}]}
//!   ]
//! }
//! ```
//!
//! Rationals are `"p/q"` strings or JSON numbers. An action may carry its own
//! `rate`; such files describe a [`RatedNetwork`] to be uniformized.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::One;
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{
    Action, Network, Production, ProductionEntry, Queue, RatedAction, RatedNetwork, StaticScheduler,
};
use crate::scalar::{format_ratio, parse_ratio, ratio_from_f64, Ratio};

/// A rational in a description file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileRatio(pub Ratio);

impl Serialize for FileRatio {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_ratio(&self.0))
    }
}

impl<'de> Deserialize<'de> for FileRatio {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct RatioVisitor;
        impl Visitor<'_> for RatioVisitor {
            type Value = FileRatio;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a rational as \"p/q\" or a number")
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<FileRatio, E> {
                parse_ratio(v).map(FileRatio).map_err(E::custom)
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<FileRatio, E> {
                Ok(FileRatio(Ratio::from_integer(v.into())))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<FileRatio, E> {
                Ok(FileRatio(Ratio::from_integer(v.into())))
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<FileRatio, E> {
                ratio_from_f64(v)
                    .map(FileRatio)
                    .ok_or_else(|| E::custom(format!("non-finite number {v}")))
            }
        }
        d.deserialize_any(RatioVisitor)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntryFile {
    pub offspring: Vec<u32>,
    pub prob: FileRatio,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrivalFile {
    pub rate: FileRatio,
    pub production: Vec<EntryFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionFile {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<FileRatio>,
    pub production: Vec<EntryFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueueFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<FileRatio>,
    pub actions: Vec<ActionFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    pub n: usize,
    #[serde(rename = "K")]
    pub branching: u32,
    pub arrival: ArrivalFile,
    pub queues: Vec<QueueFile>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParsedNetwork {
    Plain(Network),
    /// At least one action declared its own rate.
    Rated(RatedNetwork),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{}", self.render())]
pub struct ParseError {
    /// Field path such as `queues[0].actions[1].production[0].prob`.
    pub path: String,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl ParseError {
    fn render(&self) -> String {
        let mut out = String::new();
        if !self.path.is_empty() && self.path != "." {
            out.push_str(&format!("at {}: ", self.path));
        }
        if self.line > 0 {
            out.push_str(&format!("line {}, column {}: ", self.line, self.column));
        }
        out.push_str(&self.message);
        out
    }

    fn semantic(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            line: 0,
            column: 0,
            message: message.into(),
        }
    }
}

fn from_json<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T, ParseError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|err| {
        let path = err.path().to_string();
        let inner = err.into_inner();
        // serde_json appends " at line L column C" to the message.
        let message = inner.to_string();
        let message = message
            .rsplit_once(" at line ")
            .map(|(m, _)| m.to_string())
            .unwrap_or(message);
        ParseError {
            path,
            line: inner.line(),
            column: inner.column(),
            message,
        }
    })
}

fn production(entries: &[EntryFile]) -> Production {
    Production::new(
        entries
            .iter()
            .map(|e| ProductionEntry::new(e.offspring.clone(), e.prob.0.clone()))
            .collect(),
    )
}

fn entries(p: &Production) -> Vec<EntryFile> {
    p.entries
        .iter()
        .map(|e| EntryFile {
            offspring: e.offspring.clone(),
            prob: FileRatio(e.prob.clone()),
        })
        .collect()
}

impl NetworkFile {
    pub fn into_parsed(self) -> Result<ParsedNetwork, ParseError> {
        let rated = self
            .queues
            .iter()
            .any(|q| q.actions.iter().any(|a| a.rate.is_some()));
        let arrival_rate = self.arrival.rate.0.clone();
        let arrival = production(&self.arrival.production);
        if rated {
            let queues = self
                .queues
                .iter()
                .enumerate()
                .map(|(i, q)| {
                    q.actions
                        .iter()
                        .enumerate()
                        .map(|(a, action)| {
                            let rate =
                                action.rate.as_ref().or(q.rate.as_ref()).ok_or_else(|| {
                                    ParseError::semantic(
                                        format!("queues[{i}].actions[{a}].rate"),
                                        "missing rate for action and queue",
                                    )
                                })?;
                            Ok(RatedAction {
                                id: action.id.clone(),
                                rate: rate.0.clone(),
                                production: production(&action.production),
                            })
                        })
                        .collect::<Result<Vec<_>, ParseError>>()
                })
                .collect::<Result<Vec<_>, ParseError>>()?;
            return Ok(ParsedNetwork::Rated(RatedNetwork {
                n: self.n,
                branching: self.branching,
                arrival_rate,
                arrival,
                queues,
            }));
        }
        let queues = self
            .queues
            .iter()
            .enumerate()
            .map(|(i, q)| {
                let rate = q.rate.as_ref().ok_or_else(|| {
                    ParseError::semantic(format!("queues[{i}].rate"), "missing field `rate`")
                })?;
                Ok(Queue::new(
                    rate.0.clone(),
                    q.actions
                        .iter()
                        .map(|a| Action::new(a.id.clone(), production(&a.production)))
                        .collect(),
                ))
            })
            .collect::<Result<Vec<_>, ParseError>>()?;
        Ok(ParsedNetwork::Plain(Network {
            n: self.n,
            branching: self.branching,
            arrival_rate,
            arrival,
            queues,
        }))
    }
}

impl From<&Network> for NetworkFile {
    fn from(net: &Network) -> Self {
        NetworkFile {
            n: net.n,
            branching: net.branching,
            arrival: ArrivalFile {
                rate: FileRatio(net.arrival_rate.clone()),
                production: entries(&net.arrival),
            },
            queues: net
                .queues
                .iter()
                .map(|q| QueueFile {
                    rate: Some(FileRatio(q.rate.clone())),
                    actions: q
                        .actions
                        .iter()
                        .map(|a| ActionFile {
                            id: a.id.clone(),
                            rate: None,
                            production: entries(&a.production),
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

impl Network {
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&NetworkFile::from(self)).expect("network serializes")
    }
}

pub fn parse_network(text: &str) -> Result<ParsedNetwork, ParseError> {
    from_json::<NetworkFile>(text)?.into_parsed()
}

/// Reads `{"1": {"a": "1/2", "b": "1/2"}, ...}` (1-based queue labels).
/// Queues with a single action may be omitted.
pub fn parse_scheduler(text: &str, net: &Network) -> Result<StaticScheduler, ParseError> {
    let raw: BTreeMap<String, BTreeMap<String, FileRatio>> = from_json(text)?;
    let mut queues = vec![None; net.n];
    for (label, dist) in raw {
        let index = label
            .parse::<usize>()
            .ok()
            .filter(|&q| q >= 1 && q <= net.n)
            .ok_or_else(|| {
                ParseError::semantic(label.clone(), format!("unknown queue label {label:?}"))
            })?;
        queues[index - 1] = Some(dist.into_iter().map(|(k, v)| (k, v.0)).collect());
    }
    let queues = queues
        .into_iter()
        .zip(&net.queues)
        .enumerate()
        .map(|(i, (dist, queue))| match dist {
            Some(d) => Ok(d),
            None if queue.actions.len() == 1 => Ok(BTreeMap::from([(
                queue.actions[0].id.clone(),
                Ratio::one(),
            )])),
            None => Err(ParseError::semantic(
                (i + 1).to_string(),
                format!("no distribution given for queue {}", i + 1),
            )),
        })
        .collect::<Result<Vec<_>, ParseError>>()?;
    Ok(StaticScheduler::new(queues))
}
