//! Operational shell around `seqtrial-core`: batch simulation commands, a
//! JSON design document format, and an HTTP service that monitors live
//! trials from an append-only outcome log.

pub mod api;
pub mod cli;
pub mod document;
pub mod session;
pub mod store;
