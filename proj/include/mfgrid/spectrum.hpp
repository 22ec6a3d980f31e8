#pragma once

#include <cstddef>
#include <vector>

#include "mfgrid/model.hpp"

namespace mfgrid {

struct LineSpec {
  std::vector<double> start;
  std::vector<double> end;
  std::size_t count = 100;
};

struct SpectrumReport {
  RowMatrix positions;             ///< n_s x D sample points
  std::vector<double> profile;     ///< p(delta), delta = 0..n_s-1
  std::vector<double> magnitude;   ///< |DFT(p)|, bins 0..n_s/2
  std::vector<double> cumulative;  ///< cumulative energy fraction per bin
  std::size_t cutoff_bin = 0;      ///< bins strictly above this count as high frequency
  double high_frequency_fraction = 0.0;
};

/// `count` evenly spaced points from start to end inclusive.
RowMatrix line_points(const LineSpec& line);

/// Averages G_ij over all pairs with |i - j| = delta.
std::vector<double> toeplitz_profile(const Matrix& g);

/// Magnitudes of the DFT of a real sequence, bins 0..n/2.
std::vector<double> dft_magnitude(const std::vector<double>& signal);

/// Energy share of bins strictly above n/8.
double high_frequency_fraction(const std::vector<double>& magnitude, std::size_t signal_length);

/// GTK of n_s evenly spaced points on a segment, max-normalized, reduced to a
/// Toeplitz profile and transformed.
SpectrumReport gtk_spectrum(const GridModel& model, const LineSpec& line);

}  // namespace mfgrid
