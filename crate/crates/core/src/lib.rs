//! PPG morphology analysis toolkit.
//!
//! Processing chain for finger photoplethysmography recordings:
//!
//! 1. [`dsp`] — denoising (Chebyshev type-II lowpass + moving average),
//!    centred-moving-average detrending, Hilbert-envelope demodulation and
//!    z-score normalization.
//! 2. [`beats`] — beat onset detection, segmentation to a canonical length,
//!    quality gating and template averaging.
//! 3. [`fiducials`] — the four derivative waveforms (VPG/APG/JPG/SPG) and
//!    derivative-marker detection of the O/S/N/D, u/v/w and a–e points.
//! 4. [`features`] — the 60-entry morphological + demographic feature vector,
//!    Pearson-correlation ranking and Gaussian data augmentation.
//! 5. [`learn`] — from-scratch training of linear/logistic heads and the
//!    shallow FFNN/CNN with Adam, plus evaluation metrics.
//!
//! [`synth`] generates parameterized cohorts with closed-form ground truth
//! and is the oracle used by the test and acceptance suites. [`io`] holds the
//! on-disk formats (recording CSV + metadata sidecar, feature matrices).

pub mod beats;
pub mod dsp;
pub mod features;
pub mod fiducials;
pub mod io;
pub mod learn;
pub mod synth;
