#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace pql3::bench {

// Percentage of steps whose reference token is in the candidate set.
// ShapeError on a length mismatch, DivisionError on zero steps.
double accuracy(std::span<const int> ref_tokens, std::span<const std::vector<int>> candidate_sets);

// Tokens per second divided by the average execution time (units tok/s^2).
// DivisionError unless avg_exec_seconds > 0.
double throughput(double tokens_per_second, double avg_exec_seconds);

// DivisionError on zero tokens.
double pbs_per_token(std::uint64_t pbs_count, std::uint64_t generated_tokens);
double mem_per_token(std::uint64_t accounted_bytes, std::uint64_t generated_tokens);

// Ratio of a logit norm to a noise norm; +inf when there is no noise.
double epr(double logit_norm, double noise_norm);
// Frobenius norm of all step logits over the RMS of the per-step noise norms.
double epr_long(std::span<const double> logit_norms, std::span<const double> noise_norms);

double l2_norm(std::span<const double> v);
// Least-squares slope of y against its index.
double index_slope(std::span<const double> y);

}  // namespace pql3::bench
