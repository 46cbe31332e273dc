//! Core library for privacy-protective joint source-channel coding of images
//! over an AWGN wiretap channel.
//!
//! The pipeline: a disentangling encoder splits each image into a public
//! subcodeword `y_t` and a private subcodeword `y_s`, a password-conditioned
//! encryptor scrambles `y_s` before transmission, and a decoder at the
//! legitimate receiver reconstructs the image while adversarially trained
//! eavesdropper classifiers measure how much private information leaks.
//!
//! Everything here is pure computation over heap tensors: no IO, no threads,
//! no global state. The crate is `no_std` + `alloc` compatible; the companion
//! CLI crate carries file formats and orchestration.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod channel;
pub mod data;
pub mod dib;
mod error;
pub mod eval;
pub mod fdcheck;
pub mod model;
pub mod nn;
pub mod pp;
pub mod rng;
pub mod tape;
pub mod tensor;

pub use error::{Error, Result};
