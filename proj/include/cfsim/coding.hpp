#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cfsim/common.hpp"
#include "cfsim/detectors.hpp"

namespace cfsim {

// Rate-1/n feedforward convolutional code with zero-tail termination.
// Generator masks are octal, MSB tapping the current input bit
// (the default is the constraint-length-7 code 133/171/165).
struct CodeConfig {
  int info_block_bits = 100;
  int constraint_length = 7;
  std::vector<std::uint32_t> generators;  // tap masks
  bool zero_tail = true;

  int rate_den() const { return static_cast<int>(generators.size()); }
  int tail_bits() const { return zero_tail ? constraint_length - 1 : 0; }
  int trellis_steps() const { return info_block_bits + tail_bits(); }
  int coded_bits() const { return rate_den() * trellis_steps(); }
  int symbols_per_frame() const { return coded_bits() / 2; }

  void validate() const;

  static CodeConfig make(int info_bits, int constraint_length,
                         const std::vector<std::string>& generators_octal,
                         bool zero_tail = true);
};

// Zero-padded feedforward convolution of each generator; output interleaves
// the generators per input bit. Zero-tail termination appends
// constraint_length - 1 zeros before encoding.
std::vector<int> conv_encode(const std::vector<int>& info_bits,
                             const CodeConfig& code);

// Pairs (b_I, b_Q) -> a(b_I) + j a(b_Q); unit average symbol energy.
CVec qpsk_map(const std::vector<int>& coded_bits, const BitMapping& map);

// Max-sum Viterbi over per-coded-bit LLRs (log P(b=1)/P(b=0)); the zero tail
// forces the traceback to start in state 0. Returns the info bits.
std::vector<int> viterbi_decode(const Vec& llrs, const CodeConfig& code);

}  // namespace cfsim
