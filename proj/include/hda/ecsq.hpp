#pragma once

#include <cstddef>
#include <vector>

#include "hda/huffman.hpp"

namespace hda {

/// Symmetric entropy-constrained scalar quantizer for a zero-mean real
/// Gaussian, with a Huffman code over its cells.
struct EcsqCodebook {
  std::vector<double> thresholds;  // ascending, one fewer than levels
  std::vector<double> levels;      // ascending reproduction values
  std::vector<int> codeword_lengths;
  std::vector<double> probabilities;  // cell probabilities under the design density
  double measured_entropy = 0.0;      // bits per real dimension
  double huffman_rate = 0.0;          // expected codeword length, bits per real dimension
  double expected_distortion = 0.0;   // MSE under the design density
  double lagrange_multiplier = 0.0;
  double variance = 0.0;

  std::size_t cell_count() const { return levels.size(); }
  /// Cell index of x; a sample exactly on a threshold belongs to the upper cell.
  std::size_t cell_of(double x) const;
  void validate() const;
};

struct EcsqDesignConfig {
  std::size_t max_levels = 64;
  double rate_tolerance = 0.05;  // bits
  int bisection_iters = 60;
  double lambda_lo = 1e-6;       // relative to the variance
  double lambda_hi = 10.0;
  int max_lloyd_iters = 2000;
  // Match the cell entropy instead of the scalar Huffman rate, for callers
  // that entropy-code blocks of cells jointly.
  bool match_entropy = false;
};

/// Lagrangian fixed-point (Lloyd) design of the ECSQ for N(0, variance),
/// with lambda bisected so the Huffman rate meets target_rate. Targets
/// within tolerance of one bit return the two-cell quantizer (Huffman
/// matching only).
EcsqCodebook design_ecsq(double variance, double target_rate, const EcsqDesignConfig& cfg = {});

/// Fixed-lambda design. The midtread layout has an odd cell count with a
/// zero level; the midrise layout has a threshold at zero.
EcsqCodebook design_ecsq_for_lambda(double variance, double lambda, bool midtread,
                                    const EcsqDesignConfig& cfg = {});

/// Two-cell quantizer with levels at the half-normal means +-sqrt(2/pi) sigma.
EcsqCodebook binary_quantizer(double variance);

struct QuantizedBlock {
  std::vector<std::size_t> indices;
  std::vector<double> reconstruction;
  double empirical_rate = 0.0;  // mean codeword length, bits per sample
};

QuantizedBlock quantize(const EcsqCodebook& codebook, const std::vector<double>& samples);

}  // namespace hda
