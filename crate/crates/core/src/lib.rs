//! Sparse audio coding with the Locally Competitive Algorithm over strided
//! gammachirp dictionaries, with gradient-based adaptation of the filter
//! parameters.
//!
//! The usual flow is
//! [`Filterbank`] → [`FilterSet`] → [`StridedDictionary`] + [`GramTable`] →
//! [`encode`]. Training goes through [`adaptation::train`]; corpus-level
//! evaluation and exports live in [`metrics`].

pub mod adaptation;
pub mod audio_io;
pub mod cli;
pub mod dictionary;
pub mod error;
pub mod filterbank;
pub mod lca;
pub mod metrics;

pub use dictionary::{GramTable, StridedDictionary};
pub use error::{Error, Result};
pub use filterbank::{ChannelParams, FilterSet, Filterbank, FilterbankConfig, Preset};
pub use lca::{encode, encode_traced, EncodeResult, LcaConfig};
