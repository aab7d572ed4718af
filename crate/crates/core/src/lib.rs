//! Expansions of real numbers over stochastic vectors `Q∞`, Cantor-type
//! constructions, product measures and dimension estimation.

pub mod codec;
pub mod constructions;
pub mod digit;
pub mod dimest;
pub mod error;
pub mod faithful;
pub mod measures;
pub mod numeric;
pub mod precise;
pub mod qvector;
pub mod real;
pub mod stats;

pub use codec::{Cylinder, DigitSequence, SequenceTail};
pub use digit::Digit;
pub use error::{Error, Result};
pub use qvector::{DigitSampler, Family, PolynomialBounds, PowerSum, RatioLimit, StochasticVector, TailRule};
pub use real::Real;
pub use constructions::{CantorMode, CantorScheme, FreeLaw, Slot, TslScheme};
pub use dimest::{DimensionReport, GapReport, GapSettings, Method, Trend};
pub use faithful::{FaithfulSettings, FaithfulnessReport, Verdict};
pub use measures::{DigitLaw, EntropyDimensionReport, MeasureKind, ProductMeasure};
pub use stats::{FrequencyReport, LlnReport, SamplingMode};
