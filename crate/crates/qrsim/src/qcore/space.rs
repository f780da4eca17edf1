use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use super::state::StateError;

/// An ordered finite basis of distinct string labels.
///
/// The label at index 0 of a message space is always the empty word ε,
/// written as the empty string.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledSpace {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl LabeledSpace {
    pub fn new<I, S>(labels: I) -> Result<Self, StateError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(StateError::EmptySpace);
        }
        let mut index = HashMap::with_capacity(labels.len());
        for (i, l) in labels.iter().enumerate() {
            if index.insert(l.clone(), i).is_some() {
                return Err(StateError::DuplicateLabel { label: l.clone() });
            }
        }
        Ok(LabeledSpace { labels, index })
    }

    pub fn shared<I, S>(labels: I) -> Result<Arc<Self>, StateError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::new(labels).map(Arc::new)
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn contains(&self, label: &str) -> bool {
        self.index.contains_key(label)
    }

    /// Index lookup that reports the offending label on failure.
    pub fn require(&self, label: &str) -> Result<usize, StateError> {
        self.index_of(label).ok_or_else(|| StateError::UnknownLabel {
            label: label.to_string(),
            space: self.describe(),
        })
    }

    /// Short human-readable description used in error messages.
    pub fn describe(&self) -> String {
        const SHOWN: usize = 6;
        let mut parts: Vec<String> = self
            .labels
            .iter()
            .take(SHOWN)
            .map(|l| display_label(l).into_owned())
            .collect();
        if self.labels.len() > SHOWN {
            parts.push(format!("… ({} labels)", self.labels.len()));
        }
        format!("{{{}}}", parts.join(", "))
    }

    /// The product space of `a` and `b`, ordered a-major so that the pair
    /// with indices (i, j) sits at flat index `i * b.dim() + j`.
    pub fn product(a: &LabeledSpace, b: &LabeledSpace) -> Self {
        let mut labels = Vec::with_capacity(a.dim() * b.dim());
        for la in &a.labels {
            for lb in &b.labels {
                labels.push(pair_label(la, lb));
            }
        }
        Self::new(labels).expect("product labels are distinct by construction")
    }
}

impl fmt::Display for LabeledSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}

/// Reversible pair encoding for product-space labels.
pub fn pair_label(a: &str, b: &str) -> String {
    format!("({a}|{b})")
}

/// Splits a label produced by [`pair_label`] back into its components.
pub fn split_pair_label(label: &str) -> Option<(&str, &str)> {
    let inner = label.strip_prefix('(')?.strip_suffix(')')?;
    let mut depth = 0usize;
    for (i, c) in inner.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth = depth.checked_sub(1)?,
            '|' if depth == 0 => return Some((&inner[..i], &inner[i + 1..])),
            _ => {}
        }
    }
    None
}

/// Renders the empty word visibly.
pub fn display_label(label: &str) -> std::borrow::Cow<'_, str> {
    if label.is_empty() {
        "ε".into()
    } else {
        label.into()
    }
}
