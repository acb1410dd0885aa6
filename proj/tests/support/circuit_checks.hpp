#pragma once

#include <functional>

#include "check_result.hpp"
#include "pql3/circuit/graph.hpp"
#include "pql3/fhe/keys.hpp"

namespace pql3::checks {

// Largest k with E0 * 2^k < Delta / 2, from the raw parameter fields.
int refresh_free_depth(const fhe::CryptoParams& p);

// One input in [0, 0] doubled `depth` times by x + x.
circuit::Graph doubling_chain(int depth);

// Random multi-segment graph whose ranges fit the parameter set, plus the
// table functions needed to evaluate it independently of the compiler.
struct RandomGraph {
  circuit::Graph graph;
  std::vector<std::function<std::int64_t(std::int64_t)>> tables;  // per node; empty unless Lut
};
RandomGraph random_graph(const fhe::CryptoParams& p, std::uint64_t seed);

// Direct integer evaluation of a graph (no residues, no compiler output).
std::vector<std::int64_t> evaluate_graph(const RandomGraph& g, const std::vector<std::int64_t>& inputs);

// Compiles random graphs and checks that the clear executor, and with keys
// the encrypted executor, reproduce the integer oracle on every segment
// output; that the runtime PBS tally equals the static count; and that no
// execution hits budget exhaustion.
CheckResult random_plans(const fhe::CryptoParams& p, int graphs, std::uint64_t seed, fhe::KeyMaterial* km = nullptr);

}  // namespace pql3::checks
