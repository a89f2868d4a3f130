#![allow(dead_code)]

pub mod fixture;
pub mod gradcheck;
pub mod http;
