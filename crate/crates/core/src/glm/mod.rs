//! Weighted binomial / quasi-binomial regression engine used by every
//! nuisance fit and both targeting steps.

mod design;
mod logistic;
mod multinomial;
pub mod spline;

pub use design::{DesignBasis, DesignMatrix, Feature, FeatureData, FeatureFrame, Interactions, TermSpec, Transform};
pub use logistic::{fit_logistic, linear_predictor, log_likelihood, predict, score, GlmFit, GlmOptions};
pub use multinomial::{fit_multinomial, predict_multinomial, MultinomialFit};
