#include "pql3/bench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "pql3/common/error.hpp"

namespace pql3::bench {

double accuracy(std::span<const int> ref_tokens, std::span<const std::vector<int>> candidate_sets) {
  if (ref_tokens.size() != candidate_sets.size())
    throw ShapeError("accuracy: " + std::to_string(ref_tokens.size()) + " reference tokens but " +
                     std::to_string(candidate_sets.size()) + " candidate sets");
  if (ref_tokens.empty()) throw DivisionError("accuracy over zero steps");
  std::size_t hits = 0;
  for (std::size_t t = 0; t < ref_tokens.size(); ++t) {
    const auto& s = candidate_sets[t];
    hits += std::find(s.begin(), s.end(), ref_tokens[t]) != s.end();
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(ref_tokens.size());
}

double throughput(double tokens_per_second, double avg_exec_seconds) {
  if (!(avg_exec_seconds > 0)) throw DivisionError("throughput needs a positive execution time");
  return tokens_per_second / avg_exec_seconds;
}

double pbs_per_token(std::uint64_t pbs_count, std::uint64_t generated_tokens) {
  if (generated_tokens == 0) throw DivisionError("PBS per token over zero tokens");
  return static_cast<double>(pbs_count) / static_cast<double>(generated_tokens);
}

double mem_per_token(std::uint64_t accounted_bytes, std::uint64_t generated_tokens) {
  if (generated_tokens == 0) throw DivisionError("memory per token over zero tokens");
  return static_cast<double>(accounted_bytes) / static_cast<double>(generated_tokens);
}

double epr(double logit_norm, double noise_norm) {
  if (noise_norm <= 0) return std::numeric_limits<double>::infinity();
  return logit_norm / noise_norm;
}

double epr_long(std::span<const double> logit_norms, std::span<const double> noise_norms) {
  if (logit_norms.size() != noise_norms.size()) throw ShapeError("epr_long: step counts differ");
  if (logit_norms.empty()) throw DivisionError("epr_long over zero steps");
  double num = 0, den = 0;
  for (double x : logit_norms) num += x * x;
  for (double x : noise_norms) den += x * x;
  return epr(std::sqrt(num), std::sqrt(den / static_cast<double>(noise_norms.size())));
}

double l2_norm(std::span<const double> v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double index_slope(std::span<const double> y) {
  auto n = static_cast<double>(y.size());
  if (y.size() < 2) throw DivisionError("slope needs at least two points");
  double mx = (n - 1) / 2, my = 0;
  for (double v : y) my += v;
  my /= n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    double dx = static_cast<double>(i) - mx;
    sxy += dx * (y[i] - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

}  // namespace pql3::bench
