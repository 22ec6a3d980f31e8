#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "mfgrid/batch.hpp"
#include "mfgrid/model.hpp"

namespace mfgrid {

struct TrainHistory;

/// n x n Grid Tangent Kernel: G_ij = <dg(X_i)/dw, dg(X_j)/dw>.
class GtkMatrix {
 public:
  GtkMatrix() = default;
  GtkMatrix(Matrix g, std::string provenance = {}) : g_(std::move(g)), provenance_(std::move(provenance)) {}

  const Matrix& matrix() const noexcept { return g_; }
  Eigen::Index size() const noexcept { return g_.rows(); }
  double operator()(Eigen::Index i, Eigen::Index j) const { return g_(i, j); }
  const std::string& provenance() const noexcept { return provenance_; }

  /// Ascending eigenvalues, computed on first use. Not safe to call
  /// concurrently on the same object before the first call completes.
  const Vector& eigenvalues() const;
  const Matrix& eigenvectors() const;
  double lambda_min() const { return eigenvalues()(0); }
  double lambda_max() const { return eigenvalues()(eigenvalues().size() - 1); }
  double symmetry_residual() const;
  /// max(0, -lambda_min).
  double psd_residual() const;

 private:
  void decompose() const;
  Matrix g_;
  std::string provenance_;
  mutable std::optional<Vector> eigenvalues_;
  mutable std::optional<Matrix> eigenvectors_;
};

/// m x n matrix Z whose column i is dg(X_i)/dw.
Matrix gradient_matrix(const GridModel& model, const RowMatrix& points);

/// G from precomputed stencil weights; parallel over rows, sparse merge of
/// the per-sample index sets.
Matrix gtk_from_weights(const SampleStencil& stencil, const RowMatrix& weights);

/// Parallel GTK.
GtkMatrix gtk_compute(const GridModel& model, const RowMatrix& points);
/// Serial reference: Z^T Z from the dense gradient matrix.
GtkMatrix gtk_compute_reference(const GridModel& model, const RowMatrix& points);

struct ClosedFormResult {
  RowMatrix outputs;  ///< n x d predicted O(t)
  double spectral_radius = 0.0;  ///< of I - eta G
  bool divergent = false;        ///< spectral radius > 1
};

/// O(t) = Y - (I - eta G)^t Y for zero-initialized feature-only GD,
/// computed through the eigendecomposition of G, per output channel.
ClosedFormResult closed_form_outputs(const GtkMatrix& g, const RowMatrix& targets, double eta, std::size_t steps);

/// Same quantity by repeated multiplication (O(t n^2)).
RowMatrix closed_form_outputs_iterated(const GtkMatrix& g, const RowMatrix& targets, double eta, std::size_t steps);

inline constexpr double kDefaultRidge = 1e-8;
inline constexpr double kLambdaMinFlag = 1e-6;

struct BoundReport {
  double delta = 0.0;  ///< sum over channels of Y^T (G + ridge I)^-1 Y
  double lambda_min = 0.0;
  double condition_number = 0.0;
  double ridge = 0.0;
  bool ill_conditioned = false;  ///< lambda_min < kLambdaMinFlag
};

BoundReport generalization_delta(const GtkMatrix& g, const RowMatrix& targets, double ridge = kDefaultRidge);

/// Delta for many target vectors against one eigendecomposed kernel.
class DeltaSolver {
 public:
  DeltaSolver(const GtkMatrix& g, double ridge);
  double delta(const Vector& y) const;
  const BoundReport& report() const noexcept { return report_; }

 private:
  Vector eigenvalues_;
  Matrix eigenvectors_;
  BoundReport report_;
};

struct BoundMap {
  std::size_t resolution = 0;
  double y_lo = -1.0;
  double y_hi = 1.0;
  std::vector<double> y_values;
  RowMatrix points;              ///< the two fixed inputs
  std::vector<double> delta_a;   ///< row-major, row = Y1, column = Y2
  std::vector<double> delta_b;
  std::vector<double> difference;
  bool ill_conditioned_a = false;
  bool ill_conditioned_b = false;
};

/// Delta_A - Delta_B over (Y1, Y2) in [y_lo, y_hi]^2 for two-point datasets.
BoundMap bound_difference_map(const GridModel& model_a, const GridModel& model_b, const RowMatrix& points,
                              double y_lo, double y_hi, std::size_t resolution, double ridge = kDefaultRidge);

/// Evenly spaced values from lo to hi, built so that v[n-1-k] == -v[k]
/// holds exactly when lo == -hi.
std::vector<double> symmetric_linspace(double lo, double hi, std::size_t count);

struct WeightBoundCheck {
  bool holds = false;
  double bound = 0.0;         ///< sqrt(Delta)
  double worst_margin = 0.0;  ///< min over snapshots of bound - ||w(t) - w(0)||_F
};

/// ||w(t) - w(0)||_F <= sqrt(Y^T G^-1 Y) + 1e-6 at every recorded snapshot.
/// Throws PreconditionError when Θ was trained or lambda_min <= 1e-6.
WeightBoundCheck weight_change_bound_check(const TrainHistory& history, const GtkMatrix& g, const RowMatrix& targets);

}  // namespace mfgrid
