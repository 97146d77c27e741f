#![allow(dead_code)]

pub mod couplings;
pub mod rates;
