#include "mtopt/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "mtopt/errors.hpp"
#include "mtopt/linalg.hpp"

namespace mtopt {

double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw ContractError("cosine: length mismatch");
  const double nu = linalg::l2_norm(u);
  const double nv = linalg::l2_norm(v);
  if (nu < 1e-12 || nv < 1e-12) return 0.0;
  return linalg::dot(u, v) / (nu * nv);
}

double diff_metric(double sim_task, double sim_share) {
  const double denom = std::abs(sim_task + sim_share);
  if (denom == 0.0) return std::numeric_limits<double>::infinity();
  return 2.0 * std::abs(sim_task - sim_share) / denom;
}

PairwiseResult pairwise_indicators(const std::vector<ExperimentSummary>& summaries) {
  std::map<std::pair<std::string, std::string>, std::vector<const ExperimentSummary*>> groups;
  for (const auto& s : summaries)
    groups[{s.dataset_id, s.model_kind}].push_back(&s);

  PairwiseResult out;
  for (const auto& [key, group] : groups) {
    const std::size_t k = group.size();
    if (k < 2) continue;
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) {
        if (i == j) continue;
        const auto& a = *group[i];
        const auto& b = *group[j];
        if (a.avg_auc == b.avg_auc || a.diff == b.diff) {
          ++out.dropped;
          continue;
        }
        out.pairs.emplace_back(a.avg_auc > b.avg_auc ? 1 : 0, a.diff > b.diff ? 1 : 0);
      }
  }
  return out;
}

std::string to_string(PBucket b) {
  switch (b) {
    case PBucket::ns: return ">=0.05";
    case PBucket::p05: return "<0.05";
    case PBucket::p01: return "<0.01";
    case PBucket::p001: return "<0.001";
  }
  return "unknown";
}

Chi2Result chi_square_2x2(const std::array<std::array<double, 2>, 2>& t) {
  for (const auto& row : t)
    for (double v : row)
      if (v < 0.0 || !std::isfinite(v))
        throw ContractError("chi_square_2x2: counts must be finite and nonnegative");
  const double r0 = t[0][0] + t[0][1], r1 = t[1][0] + t[1][1];
  const double c0 = t[0][0] + t[1][0], c1 = t[0][1] + t[1][1];
  const double n = r0 + r1;
  if (r0 <= 0.0 || r1 <= 0.0 || c0 <= 0.0 || c1 <= 0.0)
    throw UndefinedStatError("chi_square_2x2: zero marginal");
  Chi2Result res;
  const double rows[2] = {r0, r1}, colsv[2] = {c0, c1};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      const double expected = rows[i] * colsv[j] / n;
      const double d = t[i][j] - expected;
      res.chi2 += d * d / expected;
    }
  if (res.chi2 >= 10.828) res.bucket = PBucket::p001;
  else if (res.chi2 >= 6.635) res.bucket = PBucket::p01;
  else if (res.chi2 >= 3.841) res.bucket = PBucket::p05;
  else res.bucket = PBucket::ns;
  return res;
}

double incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  // continued fraction (modified Lentz)
  auto betacf = [](double aa, double bb, double xx) {
    const int max_iter = 300;
    const double eps = 3e-14, fpmin = 1e-300;
    const double qab = aa + bb, qap = aa + 1.0, qam = aa - 1.0;
    double c = 1.0, d = 1.0 - qab * xx / qap;
    if (std::abs(d) < fpmin) d = fpmin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
      const int m2 = 2 * m;
      double num = m * (bb - m) * xx / ((qam + m2) * (aa + m2));
      d = 1.0 + num * d;
      if (std::abs(d) < fpmin) d = fpmin;
      c = 1.0 + num / c;
      if (std::abs(c) < fpmin) c = fpmin;
      d = 1.0 / d;
      h *= d * c;
      num = -(aa + m) * (qab + m) * xx / ((aa + m2) * (qap + m2));
      d = 1.0 + num * d;
      if (std::abs(d) < fpmin) d = fpmin;
      c = 1.0 + num / c;
      if (std::abs(c) < fpmin) c = fpmin;
      d = 1.0 / d;
      const double del = d * c;
      h *= del;
      if (std::abs(del - 1.0) < eps) break;
    }
    return h;
  };
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

namespace {

double student_t_two_sided_p(double t, double df) {
  if (!std::isfinite(t)) return 0.0;
  if (df <= 0.0) return 1.0;
  const double x = df / (df + t * t);
  return incomplete_beta(0.5 * df, 0.5, x);
}

PBucket p_bucket(double p) {
  if (p < 0.001) return PBucket::p001;
  if (p < 0.01) return PBucket::p01;
  if (p < 0.05) return PBucket::p05;
  return PBucket::ns;
}

}  // namespace

TTestResult t_test_independent(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2)
    throw ContractError("t_test_independent: each sample needs >= 2 values");
  auto stats = [](std::span<const double> s, double& mean, double& var) {
    mean = std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
    var = 0.0;
    for (double v : s) var += (v - mean) * (v - mean);
    var /= static_cast<double>(s.size() - 1);
  };
  double ma, va, mb, vb;
  stats(a, ma, va);
  stats(b, mb, vb);
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double sa = va / na, sb = vb / nb;
  TTestResult res;
  if (sa + sb == 0.0) {
    if (ma == mb) {
      res.t = 0.0;
      res.df = na + nb - 2.0;
      res.bucket = PBucket::ns;
      return res;
    }
    res.t = ma > mb ? std::numeric_limits<double>::infinity()
                    : -std::numeric_limits<double>::infinity();
    res.df = na + nb - 2.0;
    res.bucket = PBucket::p001;
    return res;
  }
  res.t = (ma - mb) / std::sqrt(sa + sb);
  res.df = (sa + sb) * (sa + sb) /
           (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
  res.bucket = p_bucket(student_t_two_sided_p(res.t, res.df));
  return res;
}

namespace {

void check_auc_inputs(std::span<const double> scores, std::span<const double> labels,
                      std::size_t& npos, std::size_t& nneg) {
  if (scores.size() != labels.size()) throw ContractError("auc: length mismatch");
  if (scores.empty()) throw ContractError("auc: empty input");
  npos = nneg = 0;
  for (double y : labels) {
    if (y == 1.0) ++npos;
    else if (y == 0.0) ++nneg;
    else throw ContractError("auc: labels must be 0 or 1");
  }
  if (npos == 0 || nneg == 0)
    throw UndefinedStatError("auc: both classes must be present");
}

}  // namespace

double auc(std::span<const double> scores, std::span<const double> labels) {
  std::size_t npos, nneg;
  check_auc_inputs(scores, labels, npos, nneg);
  const std::size_t k = scores.size();
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t i, std::size_t j) { return scores[i] < scores[j]; });

  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < k) {
    std::size_t j = i;
    while (j + 1 < k && scores[order[j + 1]] == scores[order[i]]) ++j;
    // 1-based average rank of the tie block [i, j]
    const double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t)
      if (labels[order[t]] == 1.0) rank_sum_pos += avg_rank;
    i = j + 1;
  }
  const double np = static_cast<double>(npos), nn = static_cast<double>(nneg);
  return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

double delta_m(std::span<const double> method_metrics,
               std::span<const double> stl_metrics,
               std::span<const int> lower_better, std::span<const int> task_of) {
  const std::size_t p = method_metrics.size();
  if (stl_metrics.size() != p || lower_better.size() != p || task_of.size() != p)
    throw ContractError("delta_m: input lengths differ");
  if (p == 0) throw ContractError("delta_m: no criteria");

  std::map<int, std::pair<double, int>> per_task;  // task -> (sum, count)
  for (std::size_t i = 0; i < p; ++i) {
    if (stl_metrics[i] == 0.0)
      throw UndefinedStatError("delta_m: zero STL metric");
    const double sign = lower_better[i] ? 1.0 : -1.0;  // (-1)^{I_p}, I_p = 0 when lower is better
    const double rel = sign * (method_metrics[i] - stl_metrics[i]) / stl_metrics[i];
    auto& agg = per_task[task_of[i]];
    agg.first += rel;
    agg.second += 1;
  }
  double total = 0.0;
  for (const auto& [task, agg] : per_task) total += agg.first / agg.second;
  return 100.0 * total / static_cast<double>(per_task.size());
}

}  // namespace mtopt
