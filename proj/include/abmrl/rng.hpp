#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <string_view>

namespace abmrl {

// Counter-based random stream with named sub-streams.
//
// A stream is identified by (seed, label path). The i-th output is a pure
// function of that identity and i, so replay never depends on draw order
// elsewhere in the program, and forked children never overlap or perturb
// the parent. Each stream must be used either sequentially (next_u64 and
// friends) or by explicit index (at/uniform_at/bernoulli_at), not both;
// mixing the two would silently reuse outputs, so it throws.
class RngStream {
 public:
  RngStream() : RngStream(0, "root") {}
  RngStream(uint64_t seed, std::string_view label = "root");

  // Child stream keyed by label. Reusing a label on the same live parent
  // throws; a freshly reconstructed parent yields identical children.
  RngStream fork(std::string_view label);

  uint64_t next_u64();
  double uniform();                 // [0, 1)
  bool bernoulli(double p);
  int bit();                        // uniform {0,1}
  uint64_t below(uint64_t n);       // unbiased uniform in [0, n)

  // Indexed access: value k of this stream, counter untouched. at(k) equals
  // the (k+1)-th sequential draw of the same stream.
  uint64_t at(uint64_t index) const;
  double uniform_at(uint64_t index) const;
  bool bernoulli_at(uint64_t index, double p) const;

  const std::string& label_path() const { return path_; }

 private:
  enum class Mode { kFresh, kSequential, kIndexed };
  RngStream(uint64_t state0, uint64_t gamma, std::string path);
  void want(Mode m) const;

  uint64_t state0_ = 0;
  uint64_t gamma_ = 1;
  uint64_t counter_ = 0;
  std::string path_;
  std::set<std::string, std::less<>> children_;
  mutable Mode mode_ = Mode::kFresh;
};

}  // namespace abmrl
