//! Association rule mining over horizontally partitioned data, where sites
//! learn global support counts through a semi-trusted mixer that only ever
//! sees masked values.

pub mod arith;
pub mod cli;
pub mod cost;
pub mod keystream;
pub mod mining;
pub mod oracle;
pub mod protocol;
pub mod secure_sum;
pub mod transport;
