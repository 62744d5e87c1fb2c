//! Simulation study: synthetic data, scheme comparison and ANOVA screening.

pub mod anova;
pub mod config;
pub mod generate;
pub mod output;
pub mod study;

pub use anova::{anova, AnovaRow, AnovaTable, FactorialData};
pub use config::{FactorGrid, LambdaSetting, StudyScheme};
pub use generate::{
    gen_covariates, gen_outcome, gen_raw_covariates, nested_submatrix, BetaChoice, OutcomeModel, Surface,
};
pub use study::{run_study, BalanceRecord, MseRecord, SimReport, SpecialRecord, TimingRecord};
