pub mod accountant;
pub mod cli;
pub mod dgauss;
pub mod dme;
pub mod error;
pub mod flatten;
pub mod modular;
pub mod numeric;
pub mod protocol;
pub mod rounding;
pub mod seeds;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/discrete-gaussian.md")]
    mod discrete_gaussian {}
    #[doc = include_str!("../../../book/src/rounding.md")]
    mod rounding {}
    #[doc = include_str!("../../../book/src/flattening.md")]
    mod flattening {}
    #[doc = include_str!("../../../book/src/modular.md")]
    mod modular {}
    #[doc = include_str!("../../../book/src/protocol.md")]
    mod protocol {}
    #[doc = include_str!("../../../book/src/accounting.md")]
    mod accounting {}
    #[doc = include_str!("../../../book/src/dme.md")]
    mod dme {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
