//! Slow, dense reference implementations. Each one is written against the
//! textbook definition so it shares no code with the library it checks.

pub mod dft;
pub mod kmeans;
pub mod lsq;
pub mod qp;
