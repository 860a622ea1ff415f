#pragma once

#include <span>
#include <string>
#include <vector>

namespace mtopt {

enum class UmmKind { identity, clippy, adatask, l2_clip };

std::string to_string(UmmKind k);
UmmKind umm_kind_from_string(const std::string& s);

struct UmmConfig {
  UmmKind kind = UmmKind::identity;
  double sigma_rel = 0.5;  // clippy: relative threshold on |theta_j|
  double sigma_abs = 1e-3;  // clippy: absolute threshold
  double max_norm = 1.0;    // l2_clip
  double beta = 0.9;        // adatask accumulator decay
  double eps = 1e-8;
};

// Update manipulation applied to per-task update columns before the
// bargaining solve. Pure except for the adatask per-task accumulators.
class UmmState {
 public:
  UmmState() = default;
  explicit UmmState(UmmConfig cfg);

  const UmmConfig& config() const { return cfg_; }

  // Transforms task i's column in place. theta and grad are the flattened
  // shared parameters and the raw task gradient.
  // - identity: unchanged
  // - l2_clip:  column scaled by min(1, max_norm/||column||)
  // - clippy:   one scalar bound for the whole column, direction preserved
  // - adatask:  column rebuilt from the task-private accumulator
  void apply(int task, std::span<double> column, std::span<const double> theta,
             std::span<const double> grad);

  const std::vector<double>& accumulator(int task) const;

 private:
  UmmConfig cfg_;
  std::vector<std::vector<double>> accum_;
};

}  // namespace mtopt
