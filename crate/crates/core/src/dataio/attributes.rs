use std::collections::HashMap;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{AttributeLabels, DataError, Result};

/// Layout of a raw user-attribute file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttrFormat {
    /// MovieLens 100K `u.user`: `id|age|gender|occupation|zip`.
    Ml100kUser,
    /// MovieLens 1M `users.dat`: `id::gender::age::occupation::zip`.
    Ml1mUser,
    /// `user_id<TAB>class`.
    Tsv,
}

impl FromStr for AttrFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "ml100k" | "ml100k_user" | "ml-100k" => Ok(AttrFormat::Ml100kUser),
            "ml1m" | "ml1m_user" | "ml-1m" => Ok(AttrFormat::Ml1mUser),
            "tsv" | "generic_tsv" => Ok(AttrFormat::Tsv),
            other => Err(format!(
                "unknown attribute format {other:?} (expected ml100k, ml1m or tsv)"
            )),
        }
    }
}

impl AttrFormat {
    fn split_line(self, line: &str) -> Option<(&str, &str)> {
        let fields: Vec<&str> = match self {
            AttrFormat::Ml100kUser => line.split('|').collect(),
            AttrFormat::Ml1mUser => line.split("::").collect(),
            AttrFormat::Tsv => line.split('\t').collect(),
        };
        match self {
            AttrFormat::Ml100kUser if fields.len() >= 3 => Some((fields[0], fields[2])),
            AttrFormat::Ml1mUser if fields.len() >= 2 => Some((fields[0], fields[1])),
            AttrFormat::Tsv if fields.len() == 2 => Some((fields[0], fields[1])),
            _ => None,
        }
    }
}

/// Reads a user → class file and aligns it to `user_ids` (dense order).
///
/// Classes are numbered in order of first appearance in the file unless
/// `classes` fixes the vocabulary, in which case any other class string is
/// rejected. Users in the file but not in `user_ids` are ignored.
pub fn load_attributes(
    path: &Path,
    format: AttrFormat,
    user_ids: &[String],
    classes: Option<&[String]>,
) -> Result<AttributeLabels> {
    let text = std::fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_attributes(&text, format, user_ids, classes)
}

pub fn parse_attributes(
    text: &str,
    format: AttrFormat,
    user_ids: &[String],
    classes: Option<&[String]>,
) -> Result<AttributeLabels> {
    let mut class_names: Vec<String> = classes.map(<[String]>::to_vec).unwrap_or_default();
    let mut by_user: HashMap<String, String> = HashMap::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            continue;
        }
        let (user, class) = format.split_line(line).ok_or_else(|| DataError::Parse {
            line: k + 1,
            message: format!("unexpected attribute line layout for {format:?}"),
        })?;
        let (user, class) = (user.trim(), class.trim());
        if class.is_empty() {
            return Err(DataError::UnknownClass {
                user: user.into(),
                class: class.into(),
            });
        }
        if !class_names.iter().any(|c| c == class) {
            if classes.is_some() {
                return Err(DataError::UnknownClass {
                    user: user.into(),
                    class: class.into(),
                });
            }
            class_names.push(class.to_string());
        }
        match by_user.get(user) {
            Some(prev) if prev != class => {
                return Err(DataError::ConflictingLabel {
                    user: user.into(),
                    first: prev.clone(),
                    second: class.into(),
                })
            }
            Some(_) => {}
            None => {
                by_user.insert(user.to_string(), class.to_string());
            }
        }
    }

    let mut missing = Vec::new();
    let mut labels = Vec::with_capacity(user_ids.len());
    for id in user_ids {
        match by_user.get(id) {
            Some(class) => labels.push(
                class_names
                    .iter()
                    .position(|c| c == class)
                    .expect("class registered while reading"),
            ),
            None => missing.push(id.clone()),
        }
    }
    if !missing.is_empty() {
        return Err(DataError::MissingUsers(missing));
    }
    AttributeLabels::new(labels, class_names)
}
