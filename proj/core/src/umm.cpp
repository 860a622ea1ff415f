#include "mtopt/umm.hpp"

#include <algorithm>
#include <cmath>

#include "mtopt/errors.hpp"
#include "mtopt/linalg.hpp"

namespace mtopt {

std::string to_string(UmmKind k) {
  switch (k) {
    case UmmKind::identity: return "identity";
    case UmmKind::clippy: return "clippy";
    case UmmKind::adatask: return "adatask";
    case UmmKind::l2_clip: return "l2_clip";
  }
  return "unknown";
}

UmmKind umm_kind_from_string(const std::string& s) {
  if (s == "identity") return UmmKind::identity;
  if (s == "clippy") return UmmKind::clippy;
  if (s == "adatask") return UmmKind::adatask;
  if (s == "l2_clip") return UmmKind::l2_clip;
  throw ConfigError("unknown umm kind: " + s);
}

UmmState::UmmState(UmmConfig cfg) : cfg_(cfg) {
  if (cfg_.kind == UmmKind::clippy && cfg_.sigma_abs <= 0.0)
    throw ConfigError("umm: clippy requires sigma_abs > 0");
  if (cfg_.kind == UmmKind::l2_clip && cfg_.max_norm <= 0.0)
    throw ConfigError("umm: l2_clip requires max_norm > 0");
}

void UmmState::apply(int task, std::span<double> column, std::span<const double> theta,
                     std::span<const double> grad) {
  switch (cfg_.kind) {
    case UmmKind::identity:
      return;
    case UmmKind::l2_clip: {
      const double nrm = linalg::l2_norm(column);
      if (nrm > cfg_.max_norm) {
        const double s = cfg_.max_norm / nrm;
        for (double& v : column) v *= s;
      }
      return;
    }
    case UmmKind::clippy: {
      if (column.size() != theta.size())
        throw ContractError("umm: column/theta size mismatch");
      double lambda = 1.0;
      for (std::size_t j = 0; j < column.size(); ++j) {
        const double mag = std::abs(column[j]);
        if (mag == 0.0) continue;
        lambda = std::min(lambda, (cfg_.sigma_rel * std::abs(theta[j]) + cfg_.sigma_abs) / mag);
      }
      for (double& v : column) v *= lambda;
      return;
    }
    case UmmKind::adatask: {
      if (column.size() != grad.size())
        throw ContractError("umm: column/grad size mismatch");
      if (static_cast<std::size_t>(task) >= accum_.size())
        accum_.resize(static_cast<std::size_t>(task) + 1);
      auto& acc = accum_[static_cast<std::size_t>(task)];
      if (acc.empty()) acc.assign(grad.size(), 0.0);
      if (acc.size() != grad.size()) throw ContractError("umm: accumulator size changed");
      // same decayed form as the rmsprop column, on task-private history
      for (std::size_t j = 0; j < grad.size(); ++j) {
        const double a = cfg_.beta * acc[j] + (1.0 - cfg_.beta) * grad[j] * grad[j];
        column[j] = grad[j] / (std::sqrt(a) + cfg_.eps);
        acc[j] = a;
      }
      return;
    }
  }
}

const std::vector<double>& UmmState::accumulator(int task) const {
  return accum_.at(static_cast<std::size_t>(task));
}

}  // namespace mtopt
