use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One co-scheduled workload set, e.g. `mix1: gcc mcf lbm namd`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mix {
    pub name: String,
    pub members: Vec<String>,
}

/// Parses a mix manifest: one `name: member member ...` per line, `#`
/// starts a comment. Every mix must have the same number of members.
pub fn parse_mix_manifest(text: &str) -> Result<Vec<Mix>> {
    let mut mixes: Vec<Mix> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse { line: i + 1, message };
        let (name, rest) = line
            .split_once(':')
            .ok_or_else(|| err("expected `name: member ...`".into()))?;
        let name = name.trim();
        if name.is_empty() || name.contains(char::is_whitespace) {
            return Err(err(format!("bad mix name `{name}`")));
        }
        let members: Vec<String> = rest.split_whitespace().map(str::to_string).collect();
        if members.is_empty() || members.len() > 8 {
            return Err(err(format!("a mix needs 1 to 8 members, got {}", members.len())));
        }
        if let Some(first) = mixes.first() {
            if first.members.len() != members.len() {
                return Err(err(format!(
                    "mix `{name}` has {} members, earlier mixes have {}",
                    members.len(),
                    first.members.len()
                )));
            }
        }
        if mixes.iter().any(|m| m.name == name) {
            return Err(err(format!("mix `{name}` defined twice")));
        }
        mixes.push(Mix {
            name: name.into(),
            members,
        });
    }
    if mixes.is_empty() {
        return Err(Error::Parse {
            line: 0,
            message: "manifest defines no mixes".into(),
        });
    }
    Ok(mixes)
}
