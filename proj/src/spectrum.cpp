#include "mfgrid/spectrum.hpp"

#include <fftw3.h>

#include <cmath>

#include "mfgrid/errors.hpp"
#include "mfgrid/gtk.hpp"

namespace mfgrid {

std::vector<double> toeplitz_profile(const Matrix& g) {
  const auto n = g.rows();
  std::vector<double> p(static_cast<std::size_t>(n), 0.0);
  for (Eigen::Index delta = 0; delta < n; ++delta) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i + delta < n; ++i) acc += g(i, i + delta);
    p[static_cast<std::size_t>(delta)] = acc / static_cast<double>(n - delta);
  }
  return p;
}

std::vector<double> dft_magnitude(const std::vector<double>& signal) {
  const int n = static_cast<int>(signal.size());
  if (n == 0) return {};
  std::vector<double> in(signal);
  auto* out = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * static_cast<std::size_t>(n / 2 + 1)));
  if (!out) throw std::bad_alloc();
  // FFTW_ESTIMATE keeps the plan (and so the rounding) independent of timing.
  fftw_plan plan = fftw_plan_dft_r2c_1d(n, in.data(), out, FFTW_ESTIMATE);
  fftw_execute(plan);
  std::vector<double> mag(static_cast<std::size_t>(n / 2 + 1));
  for (std::size_t k = 0; k < mag.size(); ++k) mag[k] = std::hypot(out[k][0], out[k][1]);
  fftw_destroy_plan(plan);
  fftw_free(out);
  return mag;
}

double high_frequency_fraction(const std::vector<double>& magnitude, std::size_t signal_length) {
  double total = 0.0;
  double high = 0.0;
  for (std::size_t k = 0; k < magnitude.size(); ++k) {
    const double e = magnitude[k] * magnitude[k];
    total += e;
    if (8 * k > signal_length) high += e;
  }
  return total > 0.0 ? high / total : 0.0;
}

RowMatrix line_points(const LineSpec& line) {
  const auto n = static_cast<Eigen::Index>(line.count);
  const auto dim = static_cast<Eigen::Index>(line.start.size());
  RowMatrix pts(n, dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t = n > 1 ? static_cast<double>(i) / static_cast<double>(n - 1) : 0.0;
    for (Eigen::Index a = 0; a < dim; ++a) pts(i, a) = line.start[a] + t * (line.end[a] - line.start[a]);
  }
  return pts;
}

SpectrumReport gtk_spectrum(const GridModel& model, const LineSpec& line) {
  const auto dim = static_cast<std::size_t>(model.dim());
  if (line.start.size() != dim || line.end.size() != dim)
    throw ConfigError("spectrum: line endpoints must match the geometry dimension");
  if (line.count < 8 || line.count % 2 != 0) throw ConfigError("spectrum: sample count must be even and >= 8");
  SpectrumReport report;
  report.positions = line_points(line);
  Matrix g = gtk_compute(model, report.positions).matrix();
  const double peak = g.maxCoeff();
  if (peak > 0.0) g /= peak;
  report.profile = toeplitz_profile(g);
  report.magnitude = dft_magnitude(report.profile);
  double total = 0.0;
  for (double m : report.magnitude) total += m * m;
  double running = 0.0;
  for (double m : report.magnitude) {
    running += m * m;
    report.cumulative.push_back(total > 0.0 ? running / total : 0.0);
  }
  report.cutoff_bin = line.count / 8;
  report.high_frequency_fraction = high_frequency_fraction(report.magnitude, line.count);
  return report;
}

}  // namespace mfgrid
