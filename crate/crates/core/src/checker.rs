//! Model checking of a network formula against a conjunction of properties.
//!
//! Three verdicts are collected in one solver session: the network formula
//! alone, the properties alone, and both together. The report's
//! classification is a pure function of those three verdicts.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoder::{encode_network, encode_property, structure_assertions, vocabulary, EncodeError};
use crate::formula::{parse_term, Term, TermParseError};
use crate::model::{CmpOp, DynamicNetwork};
use crate::solver::{SatResult, SolverConfig, SolverError, SolverSession};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PropertyBody {
    /// Every parameter of every edge is `>= 0`.
    NonNegative,
    /// Every node has at least one outgoing and one incoming edge.
    DegreeAtLeastOne,
    /// `param op value` on every edge.
    ParamBound { param: String, op: CmpOp, value: i64 },
    /// Any closed Bool term over the network vocabulary.
    Raw(Term),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Property {
    pub name: String,
    pub body: PropertyBody,
}

impl Property {
    pub fn new(name: impl Into<String>, body: PropertyBody) -> Self {
        Property {
            name: name.into(),
            body,
        }
    }
}

#[derive(Debug, Error)]
pub enum CheckError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error("property name `{0}` used more than once")]
    DuplicateProperty(String),
    #[error("property file: {0}")]
    PropertyFile(String),
}

/// Declarations visible while the properties are checked on their own.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropertiesScope {
    /// Sorts, functions and constants only.
    #[default]
    Vocabulary,
    /// Also the node and edge array contents, but not the parameter
    /// constraints.
    FullModelDecls,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Classification {
    ModelInconsistent,
    PropertiesInconsistent,
    Holds,
    Conflict,
    Inconclusive,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Classification::ModelInconsistent => "ModelInconsistent",
            Classification::PropertiesInconsistent => "PropertiesInconsistent",
            Classification::Holds => "Holds",
            Classification::Conflict => "Conflict",
            Classification::Inconclusive => "Inconclusive",
        })
    }
}

/// Maps the three verdicts to a classification.
///
/// An unsatisfiable model or property set is reported as such even if another
/// verdict is undecided; any other undecided verdict in a deciding position
/// yields `Inconclusive`.
pub fn classify(model: &SatResult, properties: &SatResult, joint: &SatResult) -> Classification {
    match (model, properties, joint) {
        (SatResult::Unsat, _, _) => Classification::ModelInconsistent,
        (_, SatResult::Unsat, _) => Classification::PropertiesInconsistent,
        (SatResult::Sat, SatResult::Sat, SatResult::Sat) => Classification::Holds,
        (SatResult::Sat, SatResult::Sat, SatResult::Unsat) => Classification::Conflict,
        _ => Classification::Inconclusive,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckReport {
    pub model_verdict: SatResult,
    pub properties_verdict: SatResult,
    pub joint_verdict: SatResult,
    pub classification: Classification,
}

impl CheckReport {
    pub fn new(model: SatResult, properties: SatResult, joint: SatResult) -> Self {
        let classification = classify(&model, &properties, &joint);
        CheckReport {
            model_verdict: model,
            properties_verdict: properties,
            joint_verdict: joint,
            classification,
        }
    }
}

/// Verdict of the network formula alone.
pub fn check_consistency(net: &DynamicNetwork, cfg: &SolverConfig) -> Result<SatResult, CheckError> {
    let mut session = SolverSession::open(cfg.clone())?;
    session.assert_script(&encode_network(net))?;
    let verdict = session.check_sat()?;
    session.close();
    Ok(verdict)
}

fn scoped_check(session: &mut SolverSession, terms: &[Term]) -> Result<SatResult, SolverError> {
    session.push()?;
    for t in terms {
        session.assert_term(t)?;
    }
    let verdict = session.check_sat()?;
    session.pop()?;
    Ok(verdict)
}

/// Runs the three checks and classifies the outcome. An empty property list
/// stands for `true`.
pub fn check_properties(
    net: &DynamicNetwork,
    props: &[Property],
    cfg: &SolverConfig,
    scope: PropertiesScope,
) -> Result<CheckReport, CheckError> {
    let mut names = HashSet::new();
    for p in props {
        if !names.insert(p.name.as_str()) {
            return Err(CheckError::DuplicateProperty(p.name.clone()));
        }
    }
    let prop_terms = props
        .iter()
        .map(|p| encode_property(p, net))
        .collect::<Result<Vec<_>, _>>()?;
    let model_terms: Vec<Term> = encode_network(net).assertions().cloned().collect();

    let mut session = SolverSession::open(cfg.clone())?;
    session.assert_script(&vocabulary(net))?;

    let model = scoped_check(&mut session, &model_terms)?;

    let mut alone = match scope {
        PropertiesScope::Vocabulary => Vec::new(),
        PropertiesScope::FullModelDecls => structure_assertions(net),
    };
    alone.extend(prop_terms.iter().cloned());
    let properties = scoped_check(&mut session, &alone)?;

    let mut joint_terms = model_terms;
    joint_terms.extend(prop_terms);
    let joint = scoped_check(&mut session, &joint_terms)?;
    session.close();

    Ok(CheckReport::new(model, properties, joint))
}

#[derive(Deserialize)]
#[serde(tag = "template", rename_all = "snake_case", deny_unknown_fields)]
enum PropertyDoc {
    NonNegative {
        name: String,
    },
    DegreeAtLeastOne {
        name: String,
    },
    ParamBound {
        name: String,
        param: String,
        op: CmpOp,
        value: i64,
    },
    RawSmtlib {
        name: String,
        term: String,
    },
}

/// Parses a property file: a JSON list of
/// `{"name", "template": "non_negative" | "degree_at_least_one" |
/// "param_bound" (+ "param", "op", "value") | "raw_smtlib" (+ "term")}`.
pub fn parse_properties(text: &str) -> Result<Vec<Property>, CheckError> {
    let docs: Vec<PropertyDoc> =
        serde_json::from_str(text).map_err(|e| CheckError::PropertyFile(e.to_string()))?;
    docs.into_iter()
        .map(|d| {
            Ok(match d {
                PropertyDoc::NonNegative { name } => Property::new(name, PropertyBody::NonNegative),
                PropertyDoc::DegreeAtLeastOne { name } => {
                    Property::new(name, PropertyBody::DegreeAtLeastOne)
                }
                PropertyDoc::ParamBound {
                    name,
                    param,
                    op,
                    value,
                } => Property::new(name, PropertyBody::ParamBound { param, op, value }),
                PropertyDoc::RawSmtlib { name, term } => {
                    let t = parse_term(&term).map_err(|e: TermParseError| {
                        CheckError::PropertyFile(format!("property `{name}`: {e}"))
                    })?;
                    Property::new(name, PropertyBody::Raw(t))
                }
            })
        })
        .collect()
}
