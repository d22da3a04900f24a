//! Hybrid quantum-classical style-based GAN toolkit.
//!
//! A classical style-based generator produces feature maps that are amplitude
//! encoded into density matrices and scored by a simulated quantum progressive
//! discriminator. Genome utilities turn aligned sequences into mutation vectors
//! and decode generated maps back into mutation positions.

pub mod autodiff;
pub mod config;
pub mod densmat;
pub mod discriminator;
pub mod error;
pub mod generator;
pub mod genomics;
pub mod qlayers;
pub mod training;

pub use error::{Error, Result};
