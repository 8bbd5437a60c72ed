//! Parser learning and design search for technical drawings.
//!
//! Drawings are turned into relational facts, parsers for their tabular
//! layout are learned as logic programs, noisy OCR text is corrected against
//! dictionaries and type priors, and a design database is ranked by combined
//! tabular and visual similarity.
pub mod bootstrap;
pub mod drawing;
pub mod ilp;
pub mod index;
pub mod logic;
pub mod mining;
pub mod probtext;
pub mod segmentation;
pub mod similarity;
pub mod synth;
