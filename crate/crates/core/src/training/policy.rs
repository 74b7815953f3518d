//! Named parameter-freeze policies and their resolution against a model.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::model::Seq2SeqModel;

use super::fisher::EwcState;

/// The ablation grid: hard-freeze variants plus EWC regularization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PolicyName {
    None,
    We,
    WeEnc,
    WeDec,
    WeSubset,
    Ewc,
}

impl PolicyName {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "NONE" => Ok(PolicyName::None),
            "WE" => Ok(PolicyName::We),
            "WE_ENC" => Ok(PolicyName::WeEnc),
            "WE_DEC" => Ok(PolicyName::WeDec),
            "WE_SUBSET" => Ok(PolicyName::WeSubset),
            "EWC" => Ok(PolicyName::Ewc),
            other => Err(CoreError::InvalidArgument(format!(
                "unknown freeze policy {other:?}"
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            PolicyName::None => "NONE",
            PolicyName::We => "WE",
            PolicyName::WeEnc => "WE_ENC",
            PolicyName::WeDec => "WE_DEC",
            PolicyName::WeSubset => "WE_SUBSET",
            PolicyName::Ewc => "EWC",
        }
    }
}

/// Layer indices frozen by `WE_SUBSET`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetSpec {
    pub encoder_layers: Vec<usize>,
    pub decoder_layers: Vec<usize>,
}

impl SubsetSpec {
    /// Default subset: the bottom half of each stack.
    pub fn bottom_half(n_layers: usize) -> Self {
        let bottom: Vec<usize> = (0..n_layers / 2).collect();
        SubsetSpec {
            encoder_layers: bottom.clone(),
            decoder_layers: bottom,
        }
    }
}

/// A named parameter-group mask plus optional EWC state.
///
/// Group names address the model's parameter namespace: a group freezes
/// every parameter whose name equals it or starts with it plus `"."`.
/// `WE` freezes `{word_embeddings}`; `WE_DEC` freezes `{word_embeddings,
/// decoder}` (the whole decoder stack: its layers, positions, and norms);
/// `WE_ENC` the encoder analog; `EWC` freezes nothing and attaches a
/// quadratic penalty instead.
#[derive(Debug, Clone)]
pub struct FreezePolicy {
    pub name: PolicyName,
    pub frozen_groups: BTreeSet<String>,
    pub subset_spec: Option<SubsetSpec>,
    pub ewc: Option<EwcState>,
}

impl FreezePolicy {
    pub fn none() -> Self {
        FreezePolicy {
            name: PolicyName::None,
            frozen_groups: BTreeSet::new(),
            subset_spec: None,
            ewc: None,
        }
    }

    pub fn we() -> Self {
        FreezePolicy {
            name: PolicyName::We,
            frozen_groups: ["word_embeddings"].map(String::from).into(),
            subset_spec: None,
            ewc: None,
        }
    }

    pub fn we_enc() -> Self {
        FreezePolicy {
            name: PolicyName::WeEnc,
            frozen_groups: ["word_embeddings", "encoder"].map(String::from).into(),
            subset_spec: None,
            ewc: None,
        }
    }

    pub fn we_dec() -> Self {
        FreezePolicy {
            name: PolicyName::WeDec,
            frozen_groups: ["word_embeddings", "decoder"].map(String::from).into(),
            subset_spec: None,
            ewc: None,
        }
    }

    pub fn we_subset(spec: SubsetSpec) -> Self {
        let mut groups: BTreeSet<String> = BTreeSet::new();
        groups.insert("word_embeddings".to_string());
        for i in &spec.encoder_layers {
            groups.insert(format!("encoder.layers.{i}"));
        }
        for i in &spec.decoder_layers {
            groups.insert(format!("decoder.layers.{i}"));
        }
        FreezePolicy {
            name: PolicyName::WeSubset,
            frozen_groups: groups,
            subset_spec: Some(spec),
            ewc: None,
        }
    }

    pub fn ewc(state: EwcState) -> Self {
        FreezePolicy {
            name: PolicyName::Ewc,
            frozen_groups: BTreeSet::new(),
            subset_spec: None,
            ewc: Some(state),
        }
    }

    /// Standard policy for a name; `WE_SUBSET` uses the bottom-half default
    /// and `EWC` must be built via [`FreezePolicy::ewc`].
    pub fn by_name(name: PolicyName, n_layers: usize) -> Self {
        match name {
            PolicyName::None => FreezePolicy::none(),
            PolicyName::We => FreezePolicy::we(),
            PolicyName::WeEnc => FreezePolicy::we_enc(),
            PolicyName::WeDec => FreezePolicy::we_dec(),
            PolicyName::WeSubset => FreezePolicy::we_subset(SubsetSpec::bottom_half(n_layers)),
            PolicyName::Ewc => FreezePolicy {
                name: PolicyName::Ewc,
                frozen_groups: BTreeSet::new(),
                subset_spec: None,
                ewc: None,
            },
        }
    }
}

/// The resolved trainable mask: the set of fully-qualified parameter names
/// the optimizer must leave untouched.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FreezeMask {
    frozen: BTreeSet<String>,
}

impl FreezeMask {
    pub fn none() -> Self {
        FreezeMask::default()
    }

    pub fn is_trainable(&self, param_name: &str) -> bool {
        !self.frozen.contains(param_name)
    }

    pub fn frozen_names(&self) -> impl Iterator<Item = &str> {
        self.frozen.iter().map(String::as_str)
    }

    pub fn n_frozen(&self) -> usize {
        self.frozen.len()
    }
}

fn group_matches(group: &str, param_name: &str) -> bool {
    param_name == group || param_name.starts_with(&format!("{group}."))
}

/// Resolves a policy's groups into per-parameter trainability. Errors on a
/// group matching no model parameter.
pub fn apply_freeze(model: &Seq2SeqModel, policy: &FreezePolicy) -> Result<FreezeMask> {
    let names = model.param_names();
    let mut frozen = BTreeSet::new();
    for group in &policy.frozen_groups {
        let mut matched = false;
        for name in &names {
            if group_matches(group, name) {
                frozen.insert(name.clone());
                matched = true;
            }
        }
        if !matched {
            return Err(CoreError::UnknownGroup(group.clone()));
        }
    }
    Ok(FreezeMask { frozen })
}
