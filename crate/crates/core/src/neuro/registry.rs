use std::collections::BTreeMap;

use super::DecoderState;
use crate::error::{Error, Result};

/// Named, independently adapted copies of the decoder.
#[derive(Clone, Debug, Default)]
pub struct DecoderRegistry {
    decoders: BTreeMap<String, DecoderState>,
}

impl DecoderRegistry {
    pub const DEFAULT: &'static str = "default";

    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_default(state: DecoderState) -> Self {
        let mut reg = Self::new();
        reg.decoders.insert(Self::DEFAULT.to_string(), state);
        reg
    }

    pub fn insert(&mut self, name: &str, state: DecoderState) -> Result<()> {
        if self.decoders.contains_key(name) {
            return Err(Error::NameCollision(name.to_string()));
        }
        self.decoders.insert(name.to_string(), state);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&DecoderState> {
        self.decoders
            .get(name)
            .ok_or_else(|| Error::UnknownName(name.to_string()))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut DecoderState> {
        self.decoders
            .get_mut(name)
            .ok_or_else(|| Error::UnknownName(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.decoders.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.decoders.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.decoders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.decoders.is_empty()
    }

    /// Deep copy of `from` under the new name `to`.
    pub fn clone_decoder(&mut self, from: &str, to: &str) -> Result<()> {
        let copy = self.get(from)?.clone();
        self.insert(to, copy)
    }
}
