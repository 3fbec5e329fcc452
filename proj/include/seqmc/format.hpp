#ifndef SEQMC_FORMAT_HPP
#define SEQMC_FORMAT_HPP

#include <charconv>
#include <string>

namespace seqmc {

/// Shortest round-trip decimal representation; identical bytes for identical
/// doubles, which keeps CSV outputs reproducible.
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace seqmc

#endif
