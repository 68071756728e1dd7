//! Behavioral simulator for a sampling front end that splits every sampling
//! period into an acquisition phase feeding a SAR ADC and a hold phase that
//! harvests energy from the input into a storage capacitor.
//!
//! All numerical code is generic over [`Real`]; the aliases below pin the
//! common double-precision instantiations.

pub mod analysis;
pub mod clocking;
pub mod config;
pub mod eh_branch;
pub mod engine;
pub mod frontend;
pub mod sar_adc;
pub mod scalar;
pub mod signal;

pub use scalar::Real;

pub type SineSource = signal::SineSource<f64>;
pub type Stimulus = signal::Stimulus<f64>;
pub type InputPowerSpec = signal::InputPowerSpec<f64>;
pub type ClockPlan = clocking::ClockPlan<f64>;
pub type PhaseSegment = clocking::PhaseSegment<f64>;
pub type SwitchModel = frontend::SwitchModel<f64>;
pub type RcState = frontend::RcState<f64>;
pub type AdcConfig = sar_adc::AdcConfig<f64>;
pub type RectifierModel = eh_branch::RectifierModel<f64>;
pub type EhConfig = eh_branch::EhConfig<f64>;
pub type EhMetrics = eh_branch::EhMetrics<f64>;
pub type Spectrum = analysis::Spectrum<f64>;
pub type Scenario = engine::Scenario<f64>;
pub type TransientTrace = engine::TransientTrace<f64>;
pub type SimulationResult = engine::SimulationResult<f64>;

pub use clocking::PhaseKind;
pub use sar_adc::AdcCode;
