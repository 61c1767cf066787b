//! Per-state verdicts and the JSON policy document shared by every learner.

use std::collections::BTreeMap;
use std::fmt;

use serde::de::{self, Deserializer, Visitor};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use crate::baselines::{BaselineKind, BaselineParams, BaselinePolicy};
use crate::discrete::DecisionPointPolicy;
use crate::error::{config_err, Result};

/// What a decision-point policy does in a state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Verdict {
    /// Execute the behavior policy.
    Defer,
    Act(usize),
}

impl Verdict {
    pub fn is_defer(&self) -> bool {
        matches!(self, Verdict::Defer)
    }

    pub fn action(&self) -> Option<usize> {
        match *self {
            Verdict::Defer => None,
            Verdict::Act(a) => Some(a),
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Defer => f.write_str("DEFER"),
            Verdict::Act(a) => write!(f, "{a}"),
        }
    }
}

impl Serialize for Verdict {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            Verdict::Defer => serializer.serialize_str("DEFER"),
            Verdict::Act(a) => serializer.serialize_u64(a as u64),
        }
    }
}

impl<'de> Deserialize<'de> for Verdict {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct VerdictVisitor;

        impl<'de> Visitor<'de> for VerdictVisitor {
            type Value = Verdict;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("\"DEFER\" or an action index")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Verdict, E> {
                if v == "DEFER" {
                    Ok(Verdict::Defer)
                } else {
                    Err(E::invalid_value(de::Unexpected::Str(v), &self))
                }
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Verdict, E> {
                Ok(Verdict::Act(v as usize))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Verdict, E> {
                usize::try_from(v).map(Verdict::Act).map_err(|_| E::invalid_value(de::Unexpected::Signed(v), &self))
            }
        }

        deserializer.deserialize_any(VerdictVisitor)
    }
}

/// Serialized form of a learned policy.
///
/// Decision-point policies map states to `"DEFER"` or an action index;
/// baselines map states to action distributions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicyDocument {
    Dprl {
        n_wedge: u64,
        num_states: usize,
        num_actions: usize,
        #[serde(with = "state_keys")]
        verdicts: BTreeMap<usize, Verdict>,
        decision_states: Vec<usize>,
        iterations: usize,
    },
    Spibb {
        params: BaselineParams,
        num_states: usize,
        num_actions: usize,
        #[serde(with = "state_keys")]
        verdicts: BTreeMap<usize, Vec<f64>>,
    },
    Pqi {
        params: BaselineParams,
        num_states: usize,
        num_actions: usize,
        #[serde(with = "state_keys")]
        verdicts: BTreeMap<usize, Vec<f64>>,
    },
    BehaviorClone {
        params: BaselineParams,
        num_states: usize,
        num_actions: usize,
        #[serde(with = "state_keys")]
        verdicts: BTreeMap<usize, Vec<f64>>,
    },
}

/// State-indexed maps as JSON objects. Internally tagged enums buffer their
/// content, which turns integer keys into strings, so keys are parsed here.
mod state_keys {
    use std::collections::BTreeMap;

    use serde::de::{Deserialize, Deserializer, Error};
    use serde::ser::{Serialize, Serializer};

    pub fn serialize<V: Serialize, S: Serializer>(
        map: &BTreeMap<usize, V>,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        map.serialize(serializer)
    }

    pub fn deserialize<'de, V: Deserialize<'de>, D: Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<BTreeMap<usize, V>, D::Error> {
        BTreeMap::<String, V>::deserialize(deserializer)?
            .into_iter()
            .map(|(k, v)| k.parse().map(|s| (s, v)).map_err(|_| D::Error::custom(format!("bad state key {k:?}"))))
            .collect()
    }
}

/// A learned policy of either family.
#[derive(Clone, Debug, PartialEq)]
pub enum LearnedPolicy {
    DecisionPoint(DecisionPointPolicy),
    Baseline(BaselinePolicy),
}

impl LearnedPolicy {
    pub fn to_document(&self) -> PolicyDocument {
        match self {
            LearnedPolicy::DecisionPoint(p) => PolicyDocument::Dprl {
                n_wedge: p.n_wedge,
                num_states: p.num_states(),
                num_actions: p.num_actions,
                verdicts: p.verdicts().iter().copied().enumerate().collect(),
                decision_states: p.decision_states.clone(),
                iterations: p.iterations,
            },
            LearnedPolicy::Baseline(b) => {
                let verdicts = (0..b.num_states).map(|s| (s, b.row(s).to_vec())).collect();
                let (params, num_states, num_actions) = (b.params.clone(), b.num_states, b.num_actions);
                match b.kind {
                    BaselineKind::Spibb => PolicyDocument::Spibb { params, num_states, num_actions, verdicts },
                    BaselineKind::Pqi => PolicyDocument::Pqi { params, num_states, num_actions, verdicts },
                    BaselineKind::BehaviorClone => {
                        PolicyDocument::BehaviorClone { params, num_states, num_actions, verdicts }
                    }
                }
            }
        }
    }

    pub fn from_document(doc: &PolicyDocument) -> Result<Self> {
        match doc {
            PolicyDocument::Dprl { n_wedge, num_states, num_actions, verdicts, decision_states, iterations } => {
                let mut table = vec![Verdict::Defer; *num_states];
                for (&s, &v) in verdicts {
                    if s >= *num_states {
                        return Err(config_err(format!("verdict for state {s} beyond {num_states} states")));
                    }
                    if let Verdict::Act(a) = v {
                        if a >= *num_actions {
                            return Err(config_err(format!("action {a} beyond {num_actions} actions")));
                        }
                    }
                    table[s] = v;
                }
                Ok(LearnedPolicy::DecisionPoint(DecisionPointPolicy::from_parts(
                    *n_wedge,
                    *num_actions,
                    table,
                    decision_states.clone(),
                    *iterations,
                )))
            }
            PolicyDocument::Spibb { params, num_states, num_actions, verdicts }
            | PolicyDocument::Pqi { params, num_states, num_actions, verdicts }
            | PolicyDocument::BehaviorClone { params, num_states, num_actions, verdicts } => {
                let kind = match doc {
                    PolicyDocument::Spibb { .. } => BaselineKind::Spibb,
                    PolicyDocument::Pqi { .. } => BaselineKind::Pqi,
                    _ => BaselineKind::BehaviorClone,
                };
                let uniform = 1.0 / *num_actions as f64;
                let mut probs = vec![uniform; num_states * num_actions];
                for (&s, row) in verdicts {
                    if s >= *num_states || row.len() != *num_actions {
                        return Err(config_err(format!("malformed distribution for state {s}")));
                    }
                    probs[s * num_actions..(s + 1) * num_actions].copy_from_slice(row);
                }
                BaselinePolicy::new(kind, params.clone(), *num_states, *num_actions, probs).map(LearnedPolicy::Baseline)
            }
        }
    }

    /// Fraction of `states` where the policy defers; baselines never defer.
    pub fn defer_fraction(&self, states: &[usize]) -> f64 {
        match self {
            LearnedPolicy::DecisionPoint(p) if !states.is_empty() => {
                states.iter().filter(|&&s| p.act(s).is_defer()).count() as f64 / states.len() as f64
            }
            _ => 0.0,
        }
    }
}
