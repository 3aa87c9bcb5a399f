mod controls;
pub mod infogain;
pub mod neldermead;
pub mod oed;
pub mod sampling;
pub mod scenario;

pub use controls::ControlDesign;
pub use infogain::{gamma_curves, gamma_scaling, info_gain, kkt_report, GammaCurves, InfoGainCurves, KktReport, SvdLadder};
pub use oed::{optimize_controls, OedConfig, OedSolution};
pub use sampling::{optimize_sampling, SamplingDesign, SamplingOptions, SamplingResult};
pub use scenario::{parse_scenario, ControlPolicy, SamplingPolicy, Scenario};
