//! Training-free lighting control for latent text-to-image diffusion.
//!
//! A user places a light source (a point or a segment) with a falloff radius.
//! [`mask`] turns that into a linear-falloff light mask, [`latent`] applies it
//! multiplicatively to the first channel of the initial latent noise, and the
//! result is handed to any [`backend::Backend`] unchanged. The crate also
//! carries the channel-scaling sweep used to find the brightness channel
//! ([`sensitivity`]) and the shadow-direction light-accuracy metric ([`eval`]).
//!
//! The crate is `no_std` + `alloc`. File formats, the CLI and the HTTP service
//! live in the `lgtm` companion crate.

#![cfg_attr(not(feature = "std"), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod backend;
mod error;
pub mod eval;
pub mod fixtures;
mod grid;
pub mod image;
pub mod latent;
pub mod mask;
pub mod sensitivity;

pub use backend::{
    generate, generate_with_noise, latent_dims, prepare_initial_noise, Backend, GeneratedImage,
    GenerationRequest, MockBackend, OutputSize, StructuralCondition,
};
pub use error::{Error, Result};
pub use image::RgbImage;
pub use latent::{
    apply_light_guidance, apply_light_guidance_with, sample_initial_noise, scale_channel, Channel,
    ChannelPerturbation, GuidanceOptions, LatentNoise,
};
pub use mask::{distance_field, make_light_mask, resample_mask, LightMask, LightSource, LightSpec, Point};
