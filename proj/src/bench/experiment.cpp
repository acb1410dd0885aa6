#include "pql3/bench/experiment.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "pql3/attn/calibration.hpp"
#include "pql3/attn/compile.hpp"
#include "pql3/attn/evaluator.hpp"
#include "pql3/attn/hybrid.hpp"
#include "pql3/bench/metrics.hpp"
#include "pql3/circuit/plan_cache.hpp"
#include "pql3/common/error.hpp"

namespace pql3::bench {

void ExperimentSpec::validate() const {
  if (modes.empty() || top_k.empty() || max_new_tokens.empty()) throw ConfigError("experiment grid is empty");
  if (repetitions < 1) throw ConfigError("repetitions must be at least 1");
  if (prompt_tokens < 1) throw ConfigError("prompt_tokens must be at least 1");
  for (int k : top_k)
    if (k < 1) throw ConfigError("top_k must be at least 1");
  for (int n : max_new_tokens)
    if (n < 1) throw ConfigError("max_new_tokens must be at least 1");
}

std::uint32_t ExperimentSpec::max_seq_len() const {
  int n = *std::max_element(max_new_tokens.begin(), max_new_tokens.end());
  return static_cast<std::uint32_t>(prompt_tokens + static_cast<std::size_t>(n) - 1);
}

std::vector<std::string> load_prompts(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open prompt file " + path);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) out.push_back(line);
  if (out.empty()) throw IoError("prompt file " + path + " has no prompts");
  return out;
}

Row aggregate(const CellReport& cell) {
  Row r;
  r.top_k = cell.top_k;
  r.mode = cell.mode;
  r.scope = cell.scope;
  r.compile_s = cell.compile_s;
  if (cell.runs.empty()) throw DivisionError("cell has no runs");
  std::vector<int> refs;
  std::vector<std::vector<int>> sets;
  double seconds = 0, epr_sum = 0, epr_long_sum = 0;
  std::uint64_t pbs = 0, tokens = 0, bytes = 0;
  for (const auto& run : cell.runs) {
    std::vector<double> ln, nn;
    for (const auto& s : run.steps) {
      refs.push_back(s.ref_token);
      sets.push_back(s.candidates);
      epr_sum += epr(s.logit_norm, s.noise_norm);
      ln.push_back(s.logit_norm);
      nn.push_back(s.noise_norm);
    }
    seconds += run.seconds;
    pbs += run.pbs;
    tokens += run.steps.size();
    bytes += run.ciphertexts * cell.ciphertext_bytes + (run.ciphertexts ? cell.plan_bytes + cell.key_bytes : 0);
    epr_long_sum += epr_long(ln, nn);
  }
  auto runs = static_cast<double>(cell.runs.size());
  r.accuracy_pct = accuracy(refs, sets);
  r.avg_infer_s = seconds / runs;
  r.tokens_per_s = static_cast<double>(tokens) / seconds;
  r.throughput = throughput(r.tokens_per_s, r.avg_infer_s);
  r.pbs_count = static_cast<double>(pbs) / runs;
  r.pbs_per_token = pbs_per_token(pbs, tokens);
  r.mem_per_token_bytes = mem_per_token(bytes, tokens);
  r.epr_short = epr_sum / static_cast<double>(refs.size());
  r.epr_long = epr_long_sum / runs;
  return r;
}

namespace {

std::uint64_t ciphertexts_for(const circuit::ExecutionPlan& plan, std::size_t positions) {
  std::uint64_t n = 0;
  for (const auto& s : plan.segments)
    if (static_cast<std::size_t>(s.pos) < positions) n += s.end - s.begin;
  return n;
}

std::unique_ptr<attn::SegmentEvaluator> make_evaluator(attn::FheMode mode,
                                                       const std::shared_ptr<const circuit::ExecutionPlan>& plan,
                                                       const fhe::KeyMaterial* keys, unsigned threads) {
  switch (mode) {
    case attn::FheMode::Disable: return nullptr;
    case attn::FheMode::Simulate: return std::make_unique<attn::SimulateEvaluator>(plan);
    case attn::FheMode::Execute: return std::make_unique<attn::LocalExecuteEvaluator>(plan, *keys, threads);
  }
  return nullptr;
}

}  // namespace

GenerationReport run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  auto lines = load_prompts(spec.prompt_file);
  if (spec.max_prompts && lines.size() > spec.max_prompts) lines.resize(spec.max_prompts);

  std::shared_ptr<const model::Weights> w;
  if (!spec.weights_file.empty()) {
    w = std::make_shared<const model::Weights>(model::Weights::load(spec.weights_file));
  } else {
    model::ModelConfig mc;
    mc.weight_seed = spec.weight_seed;
    w = std::make_shared<const model::Weights>(model::Weights::random(mc));
  }
  const auto& mc = w->config;
  auto cfg = spec.cfg;
  cfg.validate(mc);

  GenerationReport report;
  report.plan_seq_len = spec.max_seq_len();
  if (report.plan_seq_len > static_cast<std::uint32_t>(mc.max_seq_len))
    throw ConfigError("prompt plus new tokens exceeds the model's maximum sequence length");

  std::vector<std::vector<int>> prompts, calib;
  for (const auto& line : lines) {
    auto t = model::encode_text(line);
    calib.emplace_back(t.begin(), t.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(t.size(), report.plan_seq_len)));
    t.resize(std::min(t.size(), spec.prompt_tokens));
    prompts.push_back(std::move(t));
  }

  bool any_circuit = !cfg.target_layers.empty() &&
                     std::any_of(spec.modes.begin(), spec.modes.end(), [](auto m) { return m != attn::FheMode::Disable; });
  circuit::PlanCache cache(spec.plan_dir);
  std::shared_ptr<const circuit::ExecutionPlan> plan;
  std::unique_ptr<fhe::KeyMaterial> keys;
  std::uint64_t plan_bytes = 0, key_bytes = 0;
  if (any_circuit) {
    auto rec = attn::calibrate_block(calib, *w, cfg);
    plan = attn::compile_attention(cfg, *w, rec, report.plan_seq_len, &cache);
    plan_bytes = plan->serialize().size();
    keys = std::make_unique<fhe::KeyMaterial>(fhe::keygen(cfg.crypto));
    key_bytes = keys->server.serialize().size();
  }
  report.compilations = cache.compile_count();

  // Greedy decoding is prefix-consistent, so one reference run per prompt
  // serves every max_new_tokens value.
  model::Model plain(w);
  int longest = *std::max_element(spec.max_new_tokens.begin(), spec.max_new_tokens.end());
  std::vector<std::vector<int>> refs;
  for (const auto& p : prompts) {
    model::GenerationConfig g;
    g.max_new_tokens = longest;
    auto gen = model::generate(plain, p, g);
    std::vector<int> r;
    for (const auto& s : gen.steps) r.push_back(s.selection.token);
    refs.push_back(std::move(r));
  }

  for (auto mode : spec.modes) {
    for (int n_new : spec.max_new_tokens) {
      for (int k : spec.top_k) {
        CellReport cell;
        cell.mode = mode;
        cell.scope = cfg.scope;
        cell.top_k = k;
        cell.max_new_tokens = n_new;
        bool circuit = mode != attn::FheMode::Disable && plan;
        if (circuit) {
          cell.compile_s = plan->compile_seconds;
          cell.ciphertext_bytes = fhe::LweCiphertext::serialized_size(static_cast<std::size_t>(cfg.crypto.lwe_dim));
          cell.plan_bytes = plan_bytes;
          cell.key_bytes = key_bytes;
        }
        auto c = cfg;
        c.mode = circuit ? mode : attn::FheMode::Disable;
        attn::HybridModel hm(w, c, circuit ? plan : nullptr,
                             circuit ? make_evaluator(mode, plan, keys.get(), spec.threads) : nullptr);
        model::GenerationConfig g;
        g.max_new_tokens = n_new;
        g.top_k = std::min(k, mc.vocab_size);
        for (std::size_t p = 0; p < prompts.size(); ++p) {
          for (int rep = 0; rep < spec.repetitions; ++rep) {
            RunRecord run;
            run.prompt = p;
            run.repetition = rep;
            hm.clear_trace();
            auto before = hm.pbs_tally();
            auto t0 = std::chrono::steady_clock::now();
            auto gen = hm.generate(prompts[p], g);
            run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            run.pbs = hm.pbs_tally() - before;
            std::size_t positions = gen.tokens.size() - 1;
            if (circuit) {
              run.static_pbs = plan->pbs_count_for(positions);
              run.ciphertexts = ciphertexts_for(*plan, positions);
            }
            for (std::size_t t = 0; t < gen.steps.size(); ++t) {
              const auto& st = gen.steps[t];
              StepRecord s;
              s.ref_token = refs[p][t];
              s.candidates = st.selection.candidates;
              s.chosen = st.selection.token;
              s.seconds = st.seconds;
              s.logit_norm = l2_norm(st.logits);
              // The logits of step t come from position prompt_len - 1 + t.
              std::size_t pos = prompts[p].size() - 1 + t;
              std::vector<double> noise;
              for (const auto& rec : hm.trace())
                if (rec.pos == pos) noise.insert(noise.end(), rec.noise.begin(), rec.noise.end());
              s.noise_norm = l2_norm(noise);
              run.steps.push_back(std::move(s));
            }
            cell.runs.push_back(std::move(run));
          }
        }
        cell.row = aggregate(cell);
        report.cells.push_back(std::move(cell));
      }
    }
  }
  return report;
}

namespace {

std::string num(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

const char* kColumns[] = {"top_k",          "mode",          "scope",       "accuracy_pct", "avg_infer_s",
                          "compile_s",      "tokens_per_s",  "throughput",  "pbs_count",    "pbs_per_token",
                          "mem_per_token_bytes", "epr_short", "epr_long",   "max_new_tokens"};

std::vector<std::pair<std::string, std::string>> fields(const CellReport& c, bool timing) {
  const Row& r = c.row;
  auto t = [&](double v) { return timing ? num(v) : std::string("NA"); };
  std::vector<std::string> v = {std::to_string(r.top_k), attn::to_string(r.mode), attn::to_string(r.scope),
                                num(r.accuracy_pct),     t(r.avg_infer_s),      t(r.compile_s),
                                t(r.tokens_per_s),       t(r.throughput),       num(r.pbs_count),
                                num(r.pbs_per_token),    num(r.mem_per_token_bytes), num(r.epr_short),
                                num(r.epr_long),         std::to_string(c.max_new_tokens)};
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.emplace_back(kColumns[i], v[i]);
  return out;
}

}  // namespace

std::string to_csv(const GenerationReport& r, bool timing) {
  std::ostringstream os;
  os << "# schema: " << kCsvSchema << "\n";
  for (std::size_t i = 0; i < std::size(kColumns); ++i) os << (i ? "," : "") << kColumns[i];
  os << "\n";
  for (const auto& c : r.cells) {
    auto f = fields(c, timing);
    for (std::size_t i = 0; i < f.size(); ++i) os << (i ? "," : "") << f[i].second;
    os << "\n";
  }
  return os.str();
}

std::string to_json(const GenerationReport& r, bool timing, bool with_steps) {
  using nlohmann::json;
  auto value = [](const std::string& s) -> json {
    if (s == "NA") return nullptr;
    if (s == "inf" || s == "-inf" || s == "nan") return s;  // not representable as JSON numbers
    double d;
    auto res = std::from_chars(s.data(), s.data() + s.size(), d);
    if (res.ec == std::errc() && res.ptr == s.data() + s.size()) return d;
    return s;
  };
  json rows = json::array();
  for (const auto& c : r.cells) {
    json row;
    for (const auto& [k, v] : fields(c, timing)) row[k] = value(v);
    if (with_steps) {
      json runs = json::array();
      for (const auto& run : c.runs) {
        json steps = json::array();
        for (const auto& s : run.steps)
          steps.push_back({{"ref_token", s.ref_token},
                           {"candidates", s.candidates},
                           {"chosen", s.chosen},
                           {"seconds", timing ? json(s.seconds) : json(nullptr)},
                           {"logit_norm", s.logit_norm},
                           {"noise_norm", s.noise_norm}});
        runs.push_back({{"prompt", run.prompt},
                        {"repetition", run.repetition},
                        {"seconds", timing ? json(run.seconds) : json(nullptr)},
                        {"pbs", run.pbs},
                        {"static_pbs", run.static_pbs},
                        {"ciphertexts", run.ciphertexts},
                        {"steps", steps}});
      }
      row["runs"] = runs;
    }
    rows.push_back(row);
  }
  json out = {{"schema", kCsvSchema},
              {"plan_seq_len", r.plan_seq_len},
              {"compilations", r.compilations},
              {"rows", rows}};
  return out.dump(2) + "\n";
}

KvTiming measure_kv_timing(const model::Model& m, std::span<const int> prompt, int new_tokens, int repetitions) {
  model::GenerationConfig g;
  g.max_new_tokens = new_tokens;
  std::vector<std::vector<double>> cached, recompute;
  KvTiming out;
  for (int r = 0; r < repetitions; ++r) {
    auto a = model::generate(m, prompt, g);
    auto b = model::generate_recompute(m, prompt, g);
    if (cached.empty()) {
      cached.resize(a.steps.size());
      recompute.resize(b.steps.size());
    }
    for (std::size_t t = 0; t < a.steps.size(); ++t) {
      cached[t].push_back(a.steps[t].seconds);
      recompute[t].push_back(b.steps[t].seconds);
      for (std::size_t i = 0; i < a.steps[t].logits.size(); ++i)
        out.max_logit_diff = std::max(out.max_logit_diff, std::abs(a.steps[t].logits[i] - b.steps[t].logits[i]));
    }
  }
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
  };
  for (auto& v : cached) out.cached.push_back(median(v));
  for (auto& v : recompute) out.recompute.push_back(median(v));
  out.cached_slope = index_slope(out.cached);
  out.recompute_slope = index_slope(out.recompute);
  return out;
}

}  // namespace pql3::bench
