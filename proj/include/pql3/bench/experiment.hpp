#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "pql3/attn/config.hpp"
#include "pql3/model/generate.hpp"

namespace pql3::bench {

enum class OutputFormat { Csv, Json };

struct ExperimentSpec {
  std::string prompt_file;
  std::string weights_file;  // empty: random toy weights from weight_seed
  std::uint64_t weight_seed = 1;
  attn::EncAttnConfig cfg;   // mode is taken from `modes` per cell
  std::vector<attn::FheMode> modes = {attn::FheMode::Simulate};
  std::vector<int> top_k = {1};
  std::vector<int> max_new_tokens = {3};
  int repetitions = 5;
  std::size_t prompt_tokens = 4;  // prompts are cut to this many tokens
  std::size_t max_prompts = 0;    // 0 = all prompts in the file
  std::string plan_dir;           // compiled plans are cached here when set
  bool timing = true;             // false: timing columns are written as NA
  unsigned threads = 1;           // execute-mode worker threads
  OutputFormat format = OutputFormat::Csv;

  // ConfigError on an empty grid or fewer than one repetition.
  void validate() const;
  // Longest sequence any cell processes: prompt plus new tokens minus one.
  std::uint32_t max_seq_len() const;
};

struct StepRecord {
  int ref_token = 0;
  std::vector<int> candidates;  // encrypted model's top-k set
  int chosen = 0;
  double seconds = 0.0;
  double logit_norm = 0.0;
  double noise_norm = 0.0;  // ledger noise of the step's attention outputs, real units
};

struct RunRecord {
  std::size_t prompt = 0;
  int repetition = 0;
  double seconds = 0.0;
  std::uint64_t pbs = 0;         // runtime tally
  std::uint64_t static_pbs = 0;  // plan count for the positions processed
  std::uint64_t ciphertexts = 0;
  std::vector<StepRecord> steps;
};

struct Row {
  int top_k = 0;
  attn::FheMode mode = attn::FheMode::Disable;
  attn::HeadScope scope = attn::HeadScope::Single;
  double accuracy_pct = 0, avg_infer_s = 0, compile_s = 0, tokens_per_s = 0, throughput = 0;
  double pbs_count = 0, pbs_per_token = 0, mem_per_token_bytes = 0, epr_short = 0, epr_long = 0;
};

struct CellReport {
  attn::FheMode mode = attn::FheMode::Disable;
  attn::HeadScope scope = attn::HeadScope::Single;
  int top_k = 0;  // as requested; the candidate set is capped at the vocabulary
  int max_new_tokens = 0;
  double compile_s = 0.0;
  std::uint64_t ciphertext_bytes = 0;  // serialized size of one ciphertext
  std::uint64_t plan_bytes = 0;
  std::uint64_t key_bytes = 0;  // evaluation key
  std::vector<RunRecord> runs;
  Row row;
};

struct GenerationReport {
  std::vector<CellReport> cells;
  std::uint64_t compilations = 0;
  std::uint32_t plan_seq_len = 0;
};

// Recomputes a cell's aggregate row from its records.
Row aggregate(const CellReport& cell);

// Runs every (mode, max_new_tokens, top_k) cell over all prompts and
// repetitions. The circuit is compiled once per configuration and maximum
// sequence length.
GenerationReport run_experiment(const ExperimentSpec& spec);

inline constexpr const char* kCsvSchema = "pql3-bench/1";
std::string to_csv(const GenerationReport& r, bool timing = true);
std::string to_json(const GenerationReport& r, bool timing = true, bool with_steps = false);

std::vector<std::string> load_prompts(const std::string& path);

// Per-token wall times of cached and recomputing generation on one prompt,
// each the median over repetitions.
struct KvTiming {
  std::vector<double> cached, recompute;
  double cached_slope = 0, recompute_slope = 0;
  double max_logit_diff = 0;  // between the two, over all steps
};
KvTiming measure_kv_timing(const model::Model& m, std::span<const int> prompt, int new_tokens, int repetitions);

}  // namespace pql3::bench
