#pragma once
#include <atomic>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace hdrtv {

// Error kinds map to process exit codes at the CLI boundary:
// invalid_argument -> 64, io -> 66, numeric -> 70.
enum class Errc { invalid_argument, io, numeric };

class Error : public std::runtime_error {
 public:
  Error(Errc kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
  Errc kind() const { return kind_; }

 private:
  Errc kind_;
};

[[noreturn]] inline void fail(Errc kind, const std::string& msg) { throw Error(kind, msg); }

// Non-fatal conditions are counted, not thrown. Counters are atomic so
// row-parallel kernels can bump them; counts do not affect pixel results.
struct WarningCounters {
  std::atomic<std::uint64_t> oetf_clamped_low{0};
  std::atomic<std::uint64_t> oetf_clamped_high{0};
  std::atomic<std::uint64_t> alpha_dropped{0};

  void reset() {
    oetf_clamped_low = 0;
    oetf_clamped_high = 0;
    alpha_dropped = 0;
  }
  std::uint64_t total() const {
    return oetf_clamped_low + oetf_clamped_high + alpha_dropped;
  }
};

inline WarningCounters& warnings() {
  static WarningCounters w;
  return w;
}

}  // namespace hdrtv
