#pragma once

#include <vector>

#include "tgrasp/types.hpp"

namespace tgrasp {

// Rational digital filter b(z)/a(z), a[0] == 1.
struct FilterBA {
  std::vector<double> b, a;
  int order() const { return static_cast<int>(a.size()) - 1; }
};

// Lowpass Butterworth digitized by impulse invariance and normalized to
// unit DC gain. Unlike the bilinear transform this keeps the digital
// magnitude on the analog prototype curve through the transition band
// (about 0.4% off at 2x the cutoff for order 4 at fs = 10 fc), so a
// 10 Hz design at 100 Hz sampling attenuates a 20 Hz probe by the
// textbook 1/sqrt(1 + (f/fc)^(2n)) factor. Even orders only.
FilterBA butterworth_lowpass(int order, double cutoff_hz, double fs_hz);

// Steady-state direct-form II transposed state for a unit-amplitude
// constant input; scale by the first sample to suppress edge transients.
std::vector<double> lfilter_zi(const FilterBA& f);

// Single-pass IIR filter, direct form II transposed, with initial state.
std::vector<double> lfilter(const FilterBA& f, const std::vector<double>& x,
                            std::vector<double> z);

// Forward-backward zero-phase filtering with odd-reflection edge padding
// of length 3 x filter order. The effective magnitude response is the
// squared single-pass response and the phase is zero. Throws
// ValidationError when the input is shorter than the padding requires.
std::vector<double> filtfilt(const FilterBA& f, const std::vector<double>& x);

}  // namespace tgrasp
