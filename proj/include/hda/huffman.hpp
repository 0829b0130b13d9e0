#pragma once

#include <cstdint>
#include <vector>

namespace hda {

/// Canonical Huffman code over a finite alphabet. Ties in the merge order are
/// broken by the smallest symbol index in each subtree, so lengths are a
/// deterministic function of the probabilities.
struct HuffmanCode {
  std::vector<int> lengths;
  std::vector<std::uint64_t> codewords;  // canonical, MSB first

  double expected_length(const std::vector<double>& probabilities) const;
  /// Sum of 2^-l over all symbols; 1 for a complete prefix code.
  double kraft_sum() const;
};

/// Builds the code for the given weights. Zero-weight symbols still receive
/// a codeword. A single-symbol alphabet gets a 1-bit code.
HuffmanCode build_huffman(const std::vector<double>& weights);

/// Shannon entropy in bits; zero-probability terms contribute nothing.
double entropy_bits(const std::vector<double>& probabilities);

}  // namespace hda
