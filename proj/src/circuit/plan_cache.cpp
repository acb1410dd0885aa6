#include "pql3/circuit/plan_cache.hpp"

#include <openssl/sha.h>

#include <cstdio>
#include <filesystem>

#include "pql3/common/error.hpp"

namespace pql3::circuit {

std::string PlanCache::path_for(const std::string& key, std::uint32_t seq_len) const {
  unsigned char h[SHA256_DIGEST_LENGTH];
  SHA256(reinterpret_cast<const unsigned char*>(key.data()), key.size(), h);
  std::string hex;
  char buf[3];
  for (int i = 0; i < 12; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", h[i]);
    hex += buf;
  }
  return (std::filesystem::path(dir_) / (hex + "-" + std::to_string(seq_len) + ".pqpl")).string();
}

std::shared_ptr<const ExecutionPlan> PlanCache::get(const std::string& key, std::uint32_t seq_len,
                                                    const fhe::CryptoParams& params,
                                                    const std::function<Graph()>& build) {
  std::lock_guard lock(mu_);
  auto slot = std::make_pair(key, seq_len);
  if (auto it = plans_.find(slot); it != plans_.end()) return it->second;
  std::shared_ptr<const ExecutionPlan> plan;
  if (!dir_.empty()) {
    auto path = path_for(key, seq_len);
    if (std::filesystem::exists(path)) {
      try {
        auto p = ExecutionPlan::deserialize(read_file(path), params);
        if (p.label == key && p.seq_len == seq_len) {
          plan = std::make_shared<const ExecutionPlan>(std::move(p));
          ++disk_hits_;
        }
      } catch (const PlanError&) {
        // Stale plan from other parameters: recompile and overwrite.
      } catch (const IoError&) {
        // Truncated or corrupt file: same treatment.
      }
    }
  }
  if (!plan) {
    plan = std::make_shared<const ExecutionPlan>(compile(build(), params, seq_len, key));
    ++compiles_;
    if (!dir_.empty()) {
      std::filesystem::create_directories(dir_);
      write_file(path_for(key, seq_len), plan->serialize());
    }
  }
  plans_.emplace(slot, plan);
  return plan;
}

}  // namespace pql3::circuit
