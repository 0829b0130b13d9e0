#include "hda/ecsq.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "hda/types.hpp"

namespace hda {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double density(double x) { return std::isinf(x) ? 0.0 : kInvSqrt2Pi * std::exp(-0.5 * x * x); }

// P(a <= X < b) for X ~ N(0, 1), 0 <= a < b <= inf.
double mass(double a, double b) {
  const double upper = std::isinf(b) ? 0.0 : std::erfc(b * kInvSqrt2);
  return 0.5 * (std::erfc(a * kInvSqrt2) - upper);
}

struct HalfCell {
  double probability;
  double centroid;
  double distortion;  // integral over the cell of (x - centroid)^2 phi(x)
};

HalfCell cell_stats(double a, double b) {
  HalfCell c{};
  c.probability = mass(a, b);
  const double first = density(a) - density(b);
  const double b_term = std::isinf(b) ? 0.0 : b * density(b);
  const double second = a * density(a) - b_term + c.probability;
  c.centroid = c.probability > 0.0 ? first / c.probability : a;
  c.distortion = std::max(0.0, second - 2.0 * c.centroid * first +
                                   c.centroid * c.centroid * c.probability);
  return c;
}

// Interior positive thresholds t_1 < ... < t_{n-1}; cell j spans [t_j, t_{j+1})
// with t_0 = 0 and t_n = inf. In the midtread layout cell 0 is the positive
// half of the zero-level cell, so its level is pinned at 0 and its
// probability is doubled.
std::vector<HalfCell> half_cells(const std::vector<double>& interior, bool midtread) {
  std::vector<HalfCell> cells;
  double lower = 0.0;
  for (double t : interior) {
    cells.push_back(cell_stats(lower, t));
    lower = t;
  }
  cells.push_back(cell_stats(lower, std::numeric_limits<double>::infinity()));
  if (midtread) {
    HalfCell& zero = cells.front();
    zero.distortion += zero.centroid * zero.centroid * zero.probability;
    zero.centroid = 0.0;
    zero.probability *= 2.0;
  }
  return cells;
}

EcsqCodebook assemble(const std::vector<double>& interior, bool midtread, double variance,
                      double lambda) {
  const double sigma = std::sqrt(variance);
  const auto cells = half_cells(interior, midtread);
  const std::size_t n = cells.size();
  EcsqCodebook cb;
  cb.variance = variance;
  cb.lagrange_multiplier = lambda * variance;
  for (std::size_t k = n; k-- > 1;) cb.thresholds.push_back(-interior[k - 1] * sigma);
  if (!midtread) cb.thresholds.push_back(0.0);
  for (double t : interior) cb.thresholds.push_back(t * sigma);
  const std::size_t mirrored = midtread ? 1 : 0;
  for (std::size_t k = n; k-- > mirrored;) {
    cb.levels.push_back(-cells[k].centroid * sigma);
    cb.probabilities.push_back(cells[k].probability);
  }
  double distortion = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    cb.levels.push_back(cells[k].centroid * sigma);
    cb.probabilities.push_back(cells[k].probability);
    distortion += 2.0 * cells[k].distortion;
  }
  const auto code = build_huffman(cb.probabilities);
  cb.codeword_lengths = code.lengths;
  cb.huffman_rate = code.expected_length(cb.probabilities);
  cb.measured_entropy = entropy_bits(cb.probabilities);
  cb.expected_distortion = distortion * variance;
  return cb;
}

// start_cells = 0 picks the starting cell count from the high-rate step.
EcsqCodebook lloyd(double variance, double lambda, bool midtread, const EcsqDesignConfig& cfg,
                   std::size_t start_cells = 0) {
  const double lam = lambda / variance;  // unit-variance design
  const std::size_t max_half = midtread ? (cfg.max_levels + 1) / 2 : cfg.max_levels / 2;

  // High-rate start: uniform cells of width sqrt(6 lambda / ln 2).
  const double step = std::sqrt(6.0 * lam / std::log(2.0));
  const double offset = midtread ? 0.5 : 0.0;
  const auto wanted = static_cast<std::size_t>(std::ceil(5.0 / step + offset));
  const std::size_t n_half =
      std::clamp<std::size_t>(start_cells > 0 ? start_cells : wanted, 1, max_half);
  std::vector<double> interior;
  for (std::size_t k = 1; k < n_half; ++k) {
    interior.push_back((static_cast<double>(k) - offset) * step);
  }

  // Ideal lengths -log2 p first, then the actual Huffman lengths (averaged
  // over each mirrored pair to keep the layout symmetric).
  const int phases = cfg.match_entropy ? 1 : 2;
  for (int phase = 0; phase < phases; ++phase) {
    for (int it = 0; it < cfg.max_lloyd_iters && !interior.empty(); ++it) {
      const auto cells = half_cells(interior, midtread);
      std::vector<double> lengths(cells.size());
      if (phase == 0) {
        for (std::size_t j = 0; j < cells.size(); ++j) {
          lengths[j] = -std::log2(std::max(cells[j].probability, 1e-300));
        }
      } else {
        const auto cb = assemble(interior, midtread, 1.0, lam);
        const std::size_t centre = cb.cell_count() - cells.size();
        for (std::size_t j = 0; j < cells.size(); ++j) {
          const std::size_t up = centre + j;
          const std::size_t down = cb.cell_count() - 1 - up;
          lengths[j] = 0.5 * (cb.codeword_lengths[up] + cb.codeword_lengths[down]);
        }
      }
      std::vector<double> next;
      double lower = 0.0;
      for (std::size_t j = 0; j + 1 < cells.size(); ++j) {
        const double y0 = cells[j].centroid;
        const double y1 = cells[j + 1].centroid;
        const double t = 0.5 * (y0 + y1) + lam * (lengths[j + 1] - lengths[j]) / (2.0 * (y1 - y0));
        // A boundary that crosses its neighbour empties a cell; drop it.
        if (t > lower && std::isfinite(t)) {
          next.push_back(t);
          lower = t;
        }
      }
      double change = next.size() == interior.size() ? 0.0 : 1.0;
      if (next.size() == interior.size()) {
        for (std::size_t k = 0; k < next.size(); ++k) {
          change = std::max(change, std::abs(next[k] - interior[k]));
        }
      }
      interior = std::move(next);
      if (change < 1e-12) break;
    }
  }
  return assemble(interior, midtread, variance, lam);
}

double design_rate(const EcsqCodebook& cb, const EcsqDesignConfig& cfg) {
  return cfg.match_entropy ? cb.measured_entropy : cb.huffman_rate;
}

// Bisection on log lambda for one layout; returns the codebook whose Huffman
// rate lands closest to the target.
EcsqCodebook bisect_lambda(double variance, double target, bool midtread,
                           const EcsqDesignConfig& cfg, std::size_t start_cells) {
  double lo = std::log(cfg.lambda_lo);
  double hi = std::log(cfg.lambda_hi);
  EcsqCodebook best = lloyd(variance, cfg.lambda_lo * variance, midtread, cfg, start_cells);
  if (design_rate(best, cfg) < target - cfg.rate_tolerance) return best;
  for (int it = 0; it < cfg.bisection_iters; ++it) {
    const double mid = 0.5 * (lo + hi);
    auto cb = lloyd(variance, std::exp(mid) * variance, midtread, cfg, start_cells);
    const double gap = std::abs(design_rate(cb, cfg) - target);
    if (gap < std::abs(design_rate(best, cfg) - target)) best = cb;
    if (gap <= 0.2 * cfg.rate_tolerance) break;
    if (design_rate(cb, cfg) > target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return best;
}

}  // namespace

std::size_t EcsqCodebook::cell_of(double x) const {
  return static_cast<std::size_t>(std::upper_bound(thresholds.begin(), thresholds.end(), x) -
                                  thresholds.begin());
}

void EcsqCodebook::validate() const {
  if (levels.size() < 2 || thresholds.size() + 1 != levels.size()) {
    throw ValidationError("EcsqCodebook: need at least two cells and one fewer threshold");
  }
  if (codeword_lengths.size() != levels.size()) {
    throw ValidationError("EcsqCodebook: one codeword length per cell required");
  }
  for (std::size_t i = 1; i < thresholds.size(); ++i) {
    if (!(thresholds[i] > thresholds[i - 1])) {
      throw ValidationError("EcsqCodebook: thresholds must be strictly ascending");
    }
  }
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (i > 0 && !(levels[i] > levels[i - 1])) {
      throw ValidationError("EcsqCodebook: levels must be strictly ascending");
    }
    if ((i > 0 && levels[i] < thresholds[i - 1]) ||
        (i < thresholds.size() && levels[i] >= thresholds[i])) {
      throw ValidationError("EcsqCodebook: level outside its cell");
    }
  }
}

EcsqCodebook design_ecsq_for_lambda(double variance, double lambda, bool midtread,
                                    const EcsqDesignConfig& cfg) {
  if (!(variance > 0.0)) throw ValidationError("design_ecsq: variance must be positive");
  if (!(lambda > 0.0)) throw ValidationError("design_ecsq: lambda must be positive");
  if (cfg.max_levels < 2) throw ValidationError("design_ecsq: need at least two levels");
  return lloyd(variance, lambda, midtread, cfg);
}

EcsqCodebook binary_quantizer(double variance) {
  if (!(variance > 0.0)) throw ValidationError("binary_quantizer: variance must be positive");
  return assemble({}, false, variance, 0.0);
}

EcsqCodebook design_ecsq(double variance, double target_rate, const EcsqDesignConfig& cfg) {
  if (!(variance > 0.0)) throw ValidationError("design_ecsq: variance must be positive");
  if (!(target_rate > 0.0)) throw ValidationError("design_ecsq: target rate must be positive");
  if (!(cfg.lambda_lo > 0.0 && cfg.lambda_hi > cfg.lambda_lo)) {
    throw ValidationError("design_ecsq: bad lambda bracket");
  }
  if (cfg.max_levels < 2) throw ValidationError("design_ecsq: need at least two levels");
  // Huffman spends at least one bit per symbol, so nothing beats two cells
  // at or below that rate.
  if (!cfg.match_entropy && target_rate <= 1.0 + cfg.rate_tolerance) {
    return binary_quantizer(variance);
  }

  // Both symmetric layouts (even cell count with a threshold at zero, odd
  // count with a zero level). At low rates the Huffman redundancy depends
  // strongly on the cell count, so small fixed starting counts are tried
  // alongside the step-derived one.
  constexpr std::size_t kSmallCounts = 8;
  std::vector<EcsqCodebook> candidates;
  for (bool midtread : {false, true}) {
    if (midtread && cfg.max_levels < 3) continue;
    candidates.push_back(bisect_lambda(variance, target_rate, midtread, cfg, 0));
    for (std::size_t n = 2; n <= kSmallCounts; ++n) {
      candidates.push_back(bisect_lambda(variance, target_rate, midtread, cfg, n));
    }
  }
  auto rate_gap = [&](const EcsqCodebook& cb, double target) {
    return std::abs(design_rate(cb, cfg) - target);
  };
  const EcsqCodebook* best = nullptr;
  for (const auto& cb : candidates) {
    if (cb.cell_count() < 2 || rate_gap(cb, target_rate) > cfg.rate_tolerance) continue;
    if (best == nullptr || cb.expected_distortion < best->expected_distortion) best = &cb;
  }
  if (best != nullptr) return *best;
  double highest = 0.0;
  for (const auto& cb : candidates) highest = std::max(highest, design_rate(cb, cfg));
  if (highest < target_rate) {
    throw InfeasibleError("design_ecsq: target rate not reachable with the allowed cell count");
  }
  for (const auto& cb : candidates) {
    if (cb.cell_count() < 2) continue;
    if (best == nullptr || rate_gap(cb, target_rate) < rate_gap(*best, target_rate)) best = &cb;
  }
  if (best == nullptr) throw ConvergenceError("design_ecsq: no usable codebook");
  return *best;
}

QuantizedBlock quantize(const EcsqCodebook& codebook, const std::vector<double>& samples) {
  QuantizedBlock out;
  out.indices.reserve(samples.size());
  out.reconstruction.reserve(samples.size());
  double bits = 0.0;
  for (double x : samples) {
    const std::size_t k = codebook.cell_of(x);
    out.indices.push_back(k);
    out.reconstruction.push_back(codebook.levels[k]);
    bits += codebook.codeword_lengths[k];
  }
  out.empirical_rate = samples.empty() ? 0.0 : bits / static_cast<double>(samples.size());
  return out;
}

}  // namespace hda
