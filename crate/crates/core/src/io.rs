//! JSON state files:
//! `{"subsystems":[{"label":"A","dim":2},...],"re":[[...]],"im":[[...]]}`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::quantum::{from_re_im, to_re_im, State, Subsystem, SystemSpec};

#[derive(Debug, Serialize, Deserialize)]
pub struct StateFile {
    pub subsystems: Vec<Subsystem>,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl StateFile {
    pub fn from_state(s: &State) -> Self {
        let (re, im) = to_re_im(s.matrix());
        Self {
            subsystems: s.spec().subsystems().to_vec(),
            re,
            im,
        }
    }

    /// Validates every state invariant.
    pub fn into_state(self) -> Result<State> {
        let spec = SystemSpec::new(self.subsystems)?;
        let m = from_re_im(&self.re, &self.im)?;
        State::new(spec, m)
    }
}

/// Parses and validates a state. Syntax errors carry line and column.
pub fn parse_state(text: &str) -> Result<State> {
    let file: StateFile = serde_json::from_str(text)?;
    file.into_state()
}

pub fn read_state(path: impl AsRef<Path>) -> Result<State> {
    parse_state(&fs::read_to_string(path)?)
}

pub fn state_to_json(s: &State) -> String {
    serde_json::to_string_pretty(&StateFile::from_state(s)).expect("state serializes")
}

pub fn write_state(path: impl AsRef<Path>, s: &State) -> Result<()> {
    let mut text = state_to_json(s);
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}
