#include "mtopt/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mtopt/errors.hpp"
#include "mtopt/rng.hpp"

namespace mtopt {

namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double binary_entropy(double p) {
  if (p <= 0.0 || p >= 1.0) return 0.0;
  return -p * std::log(p) - (1.0 - p) * std::log(1.0 - p);
}

}  // namespace

RankingDataset gen_ranking(const RankingDatasetConfig& cfg) {
  if (std::abs(cfg.rho) > 1.0) throw ConfigError("gen_ranking: |rho| must be <= 1");
  if (cfg.dim < 2) throw ConfigError("gen_ranking: dim must be >= 2");
  if (cfg.n_samples < 100) throw ConfigError("gen_ranking: n_samples must be >= 100");

  Rng rng(cfg.seed);
  const int d = cfg.dim;

  // w_ctr = u; w_cv = rho u + sqrt(1-rho^2) v with v orthonormal to u
  std::vector<double> u(d), v(d);
  for (double& x : u) x = rng.normal();
  double nu = 0.0;
  for (double x : u) nu += x * x;
  nu = std::sqrt(nu);
  for (double& x : u) x /= nu;
  double nv = 0.0;
  do {
    for (double& x : v) x = rng.normal();
    double proj = 0.0;
    for (int i = 0; i < d; ++i) proj += v[i] * u[i];
    for (int i = 0; i < d; ++i) v[i] -= proj * u[i];
    nv = 0.0;
    for (double x : v) nv += x * x;
    nv = std::sqrt(nv);
  } while (nv < 1e-9);
  for (double& x : v) x /= nv;

  RankingDataset ds;
  ds.n = cfg.n_samples;
  ds.dim = d;
  ds.w_ctr = u;
  ds.w_cv.resize(d);
  const double c = std::sqrt(std::max(0.0, 1.0 - cfg.rho * cfg.rho));
  for (int i = 0; i < d; ++i) ds.w_cv[i] = cfg.rho * u[i] + c * v[i];

  ds.features.resize(static_cast<std::size_t>(ds.n) * d);
  ds.y_ctr.resize(ds.n);
  ds.y_ctcvr.resize(ds.n);
  std::size_t clicks = 0, conversions = 0;
  for (int r = 0; r < ds.n; ++r) {
    double zc = cfg.click_bias, zv = cfg.conv_bias;
    for (int i = 0; i < d; ++i) {
      const double x = rng.normal();
      ds.features[static_cast<std::size_t>(r) * d + i] = x;
      zc += x * ds.w_ctr[i];
      zv += x * ds.w_cv[i];
    }
    const bool click = rng.bernoulli(sigmoid(zc));
    const bool conv = rng.bernoulli(sigmoid(zv));
    ds.y_ctr[r] = click ? 1.0 : 0.0;
    ds.y_ctcvr[r] = (click && conv) ? 1.0 : 0.0;
    clicks += click;
    conversions += (click && conv);
  }
  ds.rate_ctr = static_cast<double>(clicks) / ds.n;
  ds.rate_ctcvr = static_cast<double>(conversions) / ds.n;
  ds.base_bce_ctr = binary_entropy(ds.rate_ctr);
  ds.base_bce_ctcvr = binary_entropy(ds.rate_ctcvr);
  return ds;
}

void write_ranking_csv(const RankingDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write dataset csv: " + path);
  for (int i = 0; i < ds.dim; ++i) out << "f" << i << ",";
  out << "y_ctr,y_ctcvr\n";
  out.precision(17);
  for (int r = 0; r < ds.n; ++r) {
    for (int i = 0; i < ds.dim; ++i)
      out << ds.features[static_cast<std::size_t>(r) * ds.dim + i] << ",";
    out << ds.y_ctr[r] << "," << ds.y_ctcvr[r] << "\n";
  }
}

RankingDataset read_ranking_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read dataset csv: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("dataset csv is empty: " + path);
  int dim = 0;
  {
    std::stringstream ss(line);
    std::string col;
    std::vector<std::string> cols;
    while (std::getline(ss, col, ',')) cols.push_back(col);
    if (cols.size() < 3 || cols[cols.size() - 2] != "y_ctr" || cols.back() != "y_ctcvr")
      throw ConfigError("dataset csv header is not f0..fk,y_ctr,y_ctcvr");
    dim = static_cast<int>(cols.size()) - 2;
  }
  RankingDataset ds;
  ds.dim = dim;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
    if (static_cast<int>(vals.size()) != dim + 2)
      throw ConfigError("dataset csv row width mismatch");
    ds.features.insert(ds.features.end(), vals.begin(), vals.begin() + dim);
    ds.y_ctr.push_back(vals[dim]);
    ds.y_ctcvr.push_back(vals[dim + 1]);
    ++ds.n;
  }
  std::size_t clicks = 0, conv = 0;
  for (int r = 0; r < ds.n; ++r) {
    clicks += ds.y_ctr[r] == 1.0;
    conv += ds.y_ctcvr[r] == 1.0;
  }
  ds.rate_ctr = ds.n ? static_cast<double>(clicks) / ds.n : 0.0;
  ds.rate_ctcvr = ds.n ? static_cast<double>(conv) / ds.n : 0.0;
  ds.base_bce_ctr = binary_entropy(ds.rate_ctr);
  ds.base_bce_ctcvr = binary_entropy(ds.rate_ctcvr);
  return ds;
}

ToyEval toy_losses(const std::array<double, 2>& theta, const ToyConfig& cfg) {
  if (cfg.c1 == cfg.c2) throw ConfigError("toy: c1 and c2 must differ");
  if (cfg.kappa <= 0.0) throw ConfigError("toy: kappa must be > 0");
  ToyEval e;
  for (int i = 0; i < 2; ++i) {
    const double d1 = theta[i] - cfg.c1[i];
    const double d2 = theta[i] - cfg.c2[i];
    e.l1 += 0.5 * d1 * d1;
    e.l2 += 0.5 * cfg.kappa * d2 * d2;
    e.g1[i] = d1;
    e.g2[i] = cfg.kappa * d2;
  }
  return e;
}

double toy_distance_to_front(const std::array<double, 2>& theta, const ToyConfig& cfg) {
  const double ax = cfg.c2[0] - cfg.c1[0], ay = cfg.c2[1] - cfg.c1[1];
  const double bx = theta[0] - cfg.c1[0], by = theta[1] - cfg.c1[1];
  const double t = std::clamp((ax * bx + ay * by) / (ax * ax + ay * ay), 0.0, 1.0);
  const double dx = bx - t * ax, dy = by - t * ay;
  return std::sqrt(dx * dx + dy * dy);
}

}  // namespace mtopt
