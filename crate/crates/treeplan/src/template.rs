//! Minimal placeholder substitution for prompt templates.
//!
//! Templates are plain text files with `<name>` placeholders. Rendering is a
//! literal string replacement; there is no escaping or logic.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// A loaded prompt template.
#[derive(Debug, Clone)]
pub struct Template {
    text: String,
}

impl Template {
    pub fn new(text: impl Into<String>) -> Self {
        Self { text: text.into() }
    }

    /// Load a template from an external text file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(Self::new(fs::read_to_string(path)?))
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    /// Substitute `<key>` placeholders. Errors if a named placeholder is absent.
    pub fn render(&self, bindings: &[(&str, &str)]) -> Result<String> {
        let mut out = self.text.clone();
        for (key, value) in bindings {
            let needle = format!("<{key}>");
            if !out.contains(&needle) {
                return Err(Error::Config(format!(
                    "template has no placeholder {needle}"
                )));
            }
            out = out.replace(&needle, value);
        }
        Ok(out)
    }
}
