#pragma once

#include <memory>

#include "pql3/attn/calibration.hpp"
#include "pql3/circuit/plan_cache.hpp"

namespace pql3::attn {

// Cache key: configuration, weights and calibration digests.
std::string plan_key(const EncAttnConfig& cfg, const model::Weights& w, const CalibrationRecord& rec);

// Builds and compiles the circuit for positions [0, seq_len), through the
// cache when one is given.
std::shared_ptr<const circuit::ExecutionPlan> compile_attention(const EncAttnConfig& cfg, const model::Weights& w,
                                                                const CalibrationRecord& rec, std::uint32_t seq_len,
                                                                circuit::PlanCache* cache = nullptr);

}  // namespace pql3::attn
