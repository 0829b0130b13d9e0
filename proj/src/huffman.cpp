#include "hda/huffman.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <tuple>

#include "hda/types.hpp"

namespace hda {

double HuffmanCode::expected_length(const std::vector<double>& probabilities) const {
  if (probabilities.size() != lengths.size()) {
    throw ValidationError("HuffmanCode: probability count does not match alphabet");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < lengths.size(); ++i) sum += probabilities[i] * lengths[i];
  return sum;
}

double HuffmanCode::kraft_sum() const {
  double sum = 0.0;
  for (int l : lengths) sum += std::ldexp(1.0, -l);
  return sum;
}

HuffmanCode build_huffman(const std::vector<double>& weights) {
  if (weights.empty()) throw ValidationError("build_huffman: empty alphabet");
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ValidationError("build_huffman: bad weight");
  }
  const std::size_t n = weights.size();
  HuffmanCode code;
  code.lengths.assign(n, 0);
  if (n == 1) {
    code.lengths[0] = 1;
    code.codewords = {0};
    return code;
  }

  // Node: (weight, smallest symbol index, node id).
  using Node = std::tuple<double, std::size_t, std::size_t>;
  std::priority_queue<Node, std::vector<Node>, std::greater<Node>> heap;
  std::vector<std::size_t> parent(2 * n - 1, 0);
  for (std::size_t i = 0; i < n; ++i) heap.emplace(weights[i], i, i);
  std::size_t next_id = n;
  while (heap.size() > 1) {
    const auto [wa, ka, a] = heap.top();
    heap.pop();
    const auto [wb, kb, b] = heap.top();
    heap.pop();
    parent[a] = next_id;
    parent[b] = next_id;
    heap.emplace(wa + wb, std::min(ka, kb), next_id);
    ++next_id;
  }
  const std::size_t root = next_id - 1;
  for (std::size_t i = 0; i < n; ++i) {
    int depth = 0;
    for (std::size_t v = i; v != root; v = parent[v]) ++depth;
    code.lengths[i] = depth;
  }

  // Canonical assignment: sort by (length, symbol index).
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return code.lengths[x] < code.lengths[y];
  });
  code.codewords.assign(n, 0);
  std::uint64_t value = 0;
  int previous = code.lengths[order[0]];
  for (std::size_t k = 0; k < n; ++k) {
    const int l = code.lengths[order[k]];
    if (k > 0) value = (value + 1) << (l - previous);
    code.codewords[order[k]] = value;
    previous = l;
  }
  return code;
}

double entropy_bits(const std::vector<double>& probabilities) {
  double h = 0.0;
  for (double p : probabilities) {
    if (p > 0.0) h -= p * std::log2(p);
  }
  return h;
}

}  // namespace hda
