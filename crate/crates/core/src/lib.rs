//! Stick-breaking construction of the Dirichlet process and its exact
//! posterior given a single observation.
//!
//! The crate is organised bottom-up:
//!
//! * [`distmath`] holds the beta/geometric/Dirichlet samplers and the
//!   closed-form moment arithmetic everything else leans on.
//! * [`stickbreak`] samples prior stick sequences, weights and truncated
//!   discrete measures `P = Σ w_j δ_{θ_j}`.
//! * [`posterior`] samples the latent index `J`, the posterior stick laws
//!   given `J = j`, and derives `w_x`, the renormalised weights `q`, the
//!   recovered sticks `h` and the auxiliary products `ψ`.
//! * [`verify`] checks the distributional claims about those quantities by
//!   exact algebra where possible and seeded Monte Carlo otherwise.
//!
//! ```
//! use rand::SeedableRng;
//! use rand_chacha::ChaCha8Rng;
//! use stickpost::distmath::Concentration;
//! use stickpost::posterior::{compute_h_closed_form, sample_posterior_draw};
//! use stickpost::stickbreak::TruncationPolicy;
//!
//! let c = Concentration::new(2.0)?;
//! let policy = TruncationPolicy::new(1e-10, 1_000_000)?;
//! let mut rng = ChaCha8Rng::seed_from_u64(1);
//! let draw = sample_posterior_draw(c, &policy, &mut rng)?;
//!
//! // The sticks recovered from the renormalised weights agree with their
//! // closed form.
//! let h1 = compute_h_closed_form(&draw.sticks, 1)?;
//! assert!((draw.h[0] - h1).abs() <= 1e-10 * h1);
//! # Ok::<(), stickpost::Error>(())
//! ```

pub mod distmath;
pub mod error;
pub mod posterior;
pub mod stickbreak;
pub mod verify;

pub use error::{Error, Result};
