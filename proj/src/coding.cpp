#include "cfsim/coding.hpp"

#include <bit>
#include <limits>

namespace cfsim {

namespace {

int parity(std::uint32_t x) { return std::popcount(x) & 1; }

}  // namespace

void CodeConfig::validate() const {
  if (info_block_bits < 1) throw ConfigError("info_block_bits must be >= 1");
  if (constraint_length < 2 || constraint_length > 16) {
    throw ConfigError("constraint_length must be in [2, 16]");
  }
  if (generators.empty()) throw ConfigError("code needs >= 1 generator");
  for (std::uint32_t g : generators) {
    if (g == 0) throw ConfigError("all-zero generator polynomial");
    if (g >> constraint_length) {
      throw ConfigError("generator polynomial exceeds constraint length");
    }
  }
}

CodeConfig CodeConfig::make(int info_bits, int constraint_length,
                            const std::vector<std::string>& generators_octal,
                            bool zero_tail) {
  CodeConfig code;
  code.info_block_bits = info_bits;
  code.constraint_length = constraint_length;
  code.zero_tail = zero_tail;
  for (const std::string& s : generators_octal) {
    if (s.empty()) throw ConfigError("empty generator polynomial");
    std::uint32_t g = 0;
    for (char c : s) {
      if (c < '0' || c > '7') {
        throw ConfigError("generator polynomial '" + s + "' is not octal");
      }
      g = g * 8 + static_cast<std::uint32_t>(c - '0');
    }
    code.generators.push_back(g);
  }
  code.validate();
  return code;
}

std::vector<int> conv_encode(const std::vector<int>& info_bits,
                             const CodeConfig& code) {
  code.validate();
  if (static_cast<int>(info_bits.size()) != code.info_block_bits) {
    throw ValidationError("conv_encode: expected " +
                          std::to_string(code.info_block_bits) +
                          " info bits, got " +
                          std::to_string(info_bits.size()));
  }
  const int k = code.constraint_length;
  std::vector<int> out;
  out.reserve(code.coded_bits());
  // Register bit (k-1) is the current input, bit (k-1-l) the input l steps ago.
  std::uint32_t reg = 0;
  for (int t = 0; t < code.trellis_steps(); ++t) {
    const int bit = t < code.info_block_bits ? (info_bits[t] & 1) : 0;
    reg = (reg >> 1) | (static_cast<std::uint32_t>(bit) << (k - 1));
    for (std::uint32_t g : code.generators) out.push_back(parity(reg & g));
  }
  return out;
}

CVec qpsk_map(const std::vector<int>& coded_bits, const BitMapping& map) {
  if (coded_bits.size() % 2 != 0) {
    throw ValidationError("qpsk_map: odd bit count, frame needs padding");
  }
  CVec symbols(coded_bits.size() / 2);
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    symbols(i) = cplx(map.amplitude(coded_bits[2 * i] & 1),
                      map.amplitude(coded_bits[2 * i + 1] & 1));
  }
  return symbols;
}

std::vector<int> viterbi_decode(const Vec& llrs, const CodeConfig& code) {
  code.validate();
  if (llrs.size() != code.coded_bits()) {
    throw ValidationError("viterbi_decode: expected " +
                          std::to_string(code.coded_bits()) + " LLRs, got " +
                          std::to_string(llrs.size()));
  }
  const int k = code.constraint_length;
  const int n_states = 1 << (k - 1);
  const int n_gen = code.rate_den();
  const int steps = code.trellis_steps();

  // Branch outputs per (state, input): packed coded bits, generator 0 first.
  std::vector<std::uint32_t> branch(static_cast<std::size_t>(n_states) * 2);
  for (int s = 0; s < n_states; ++s) {
    for (int in = 0; in < 2; ++in) {
      const std::uint32_t reg =
          (static_cast<std::uint32_t>(in) << (k - 1)) |
          static_cast<std::uint32_t>(s);
      std::uint32_t word = 0;
      for (int j = 0; j < n_gen; ++j) {
        word |= static_cast<std::uint32_t>(parity(reg & code.generators[j]))
                << j;
      }
      branch[static_cast<std::size_t>(s) * 2 + in] = word;
    }
  }

  constexpr double kNoPath = -std::numeric_limits<double>::infinity();
  std::vector<double> metric(n_states, kNoPath);
  std::vector<double> next_metric(n_states);
  metric[0] = 0.0;  // encoder starts in the all-zero state
  std::vector<std::uint16_t> from(static_cast<std::size_t>(steps) * n_states);

  for (int t = 0; t < steps; ++t) {
    std::fill(next_metric.begin(), next_metric.end(), kNoPath);
    for (int s = 0; s < n_states; ++s) {
      if (metric[s] == kNoPath) continue;
      for (int in = 0; in < 2; ++in) {
        const std::uint32_t word = branch[static_cast<std::size_t>(s) * 2 + in];
        double m = metric[s];
        for (int j = 0; j < n_gen; ++j) {
          if ((word >> j) & 1u) m += llrs(t * n_gen + j);
        }
        const int ns = (in << (k - 2)) | (s >> 1);
        if (m > next_metric[ns]) {
          next_metric[ns] = m;
          from[static_cast<std::size_t>(t) * n_states + ns] =
              static_cast<std::uint16_t>(s);
        }
      }
    }
    metric.swap(next_metric);
  }

  // Zero-tail forces the survivor through state 0; otherwise take the best.
  int state = 0;
  if (!code.zero_tail) {
    for (int s = 1; s < n_states; ++s) {
      if (metric[s] > metric[state]) state = s;
    }
  }
  std::vector<int> decoded(steps);
  for (int t = steps - 1; t >= 0; --t) {
    const int prev = from[static_cast<std::size_t>(t) * n_states + state];
    decoded[t] = (state >> (k - 2)) & 1;  // input bit that led here
    state = prev;
  }
  decoded.resize(code.info_block_bits);
  return decoded;
}

}  // namespace cfsim
