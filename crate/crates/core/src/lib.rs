pub mod affinity;
pub mod chem;
pub mod datastore;
pub mod eval;
pub mod fingerprint;
pub mod hash;
pub mod ranking;
pub mod scaffold;
pub mod screening;
pub mod stats;
pub mod synth;
