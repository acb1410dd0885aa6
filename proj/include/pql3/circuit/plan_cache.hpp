#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "pql3/circuit/plan.hpp"

namespace pql3::circuit {

// Compile-once store keyed by (configuration key, seq_len). With a directory
// set, plans persist across processes as <dir>/<sha256(key)>-<seq_len>.pqpl.
class PlanCache {
 public:
  explicit PlanCache(std::string dir = {}) : dir_(std::move(dir)) {}

  std::shared_ptr<const ExecutionPlan> get(const std::string& key, std::uint32_t seq_len,
                                           const fhe::CryptoParams& params, const std::function<Graph()>& build);

  // Number of times a graph was actually compiled (cache misses on disk too).
  std::uint64_t compile_count() const { return compiles_; }
  std::uint64_t disk_hits() const { return disk_hits_; }
  std::string path_for(const std::string& key, std::uint32_t seq_len) const;

 private:
  std::string dir_;
  std::mutex mu_;
  std::map<std::pair<std::string, std::uint32_t>, std::shared_ptr<const ExecutionPlan>> plans_;
  std::uint64_t compiles_ = 0, disk_hits_ = 0;
};

}  // namespace pql3::circuit
