// One line per acceptance criterion. Exit status is non-zero if any fails.
#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <iostream>
#include <random>
#include <set>
#include <string>

#include "attn_fixture.hpp"
#include "circuit_checks.hpp"
#include "fhe_checks.hpp"
#include "pql3/bench/experiment.hpp"
#include "pql3/protocol/client.hpp"
#include "pql3/protocol/server.hpp"
#include "pql3/protocol/socket.hpp"

using namespace pql3;
using checks::CheckResult;

namespace {

const std::string kPrompts = PQL3_DATA_DIR "/prompts.txt";

fhe::KeyMaterial& micro_keys() {
  static fhe::KeyMaterial km = fhe::keygen(fhe::CryptoParams::micro(2, 3, 101));
  return km;
}
fhe::KeyMaterial& micro_other() {
  static fhe::KeyMaterial km = fhe::keygen(fhe::CryptoParams::micro(2, 3, 202));
  return km;
}

const checks::AttnFixture& single() {
  static checks::AttnFixture f;
  return f;
}

fhe::KeyMaterial& attn_keys() {
  static fhe::KeyMaterial km = fhe::keygen(single().cfg.crypto);
  return km;
}

model::GenerationConfig three_new_tokens() {
  model::GenerationConfig g;
  g.max_new_tokens = 3;
  return g;
}

// Compares two hybrid generations: same tokens and same decrypted outputs
// for every attention call.
void compare_runs(CheckResult& r, attn::HybridModel& a, attn::HybridModel& b, std::span<const int> prompt,
                  const std::string& label) {
  a.clear_trace();
  b.clear_trace();
  auto ga = a.generate(prompt, three_new_tokens());
  auto gb = b.generate(prompt, three_new_tokens());
  r.expect(ga.tokens == gb.tokens, label + ": token sequences differ");
  r.expect(a.trace().size() == b.trace().size(), label + ": different number of attention calls");
  for (std::size_t i = 0; i < std::min(a.trace().size(), b.trace().size()); ++i)
    r.expect(a.trace()[i].outputs == b.trace()[i].outputs,
             label + ": attention outputs differ at position " + std::to_string(a.trace()[i].pos));
}

bench::ExperimentSpec sweep_spec(attn::HeadScope scope) {
  bench::ExperimentSpec s;
  s.prompt_file = kPrompts;
  s.cfg.scope = scope;
  s.repetitions = 1;
  s.modes = {attn::FheMode::Simulate};
  s.max_new_tokens = {3};
  s.timing = false;
  s.top_k.clear();
  for (int k = 1; k <= 10; ++k) s.top_k.push_back(k);
  for (int k = 70; k <= 500; k += 43) s.top_k.push_back(k);
  s.top_k.push_back(256);
  s.top_k.push_back(500);
  std::sort(s.top_k.begin(), s.top_k.end());
  s.top_k.erase(std::unique(s.top_k.begin(), s.top_k.end()), s.top_k.end());
  return s;
}

// 1
CheckResult fhe_exhaustive() {
  auto t0 = std::chrono::steady_clock::now();
  auto r = checks::fhe_exhaustive(micro_keys(), micro_other());
  double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.expect(s < 60.0, "suite took " + std::to_string(s) + " s");
  return r;
}

// 2
CheckResult backend_oracle() { return checks::pbs_backend_agreement(micro_keys(), 100, 7); }

// 3
CheckResult ledger() { return checks::ledger_soundness(micro_keys(), micro_other(), 10000, 11); }

// 4
CheckResult mode_equivalence() {
  CheckResult r;
  const auto& f = single();
  auto plan = f.plan(6);
  auto sim = f.simulate(plan);
  auto exe = f.execute(plan, attn_keys());
  auto prompts = checks::prompt_tokens(4);
  const std::size_t n = 20;
  for (std::size_t i = 0; i < n; ++i) compare_runs(r, sim, exe, prompts[i], "prompt " + std::to_string(i));
  r.expect(sim.pbs_tally() == exe.pbs_tally(), "simulated and executed PBS tallies differ");
  r.note = std::to_string(n) + " prompts, " + std::to_string(exe.pbs_tally()) + " bootstraps executed";
  return r;
}

// 5
CheckResult accuracy_monotone() {
  CheckResult r;
  std::string note;
  for (auto scope : {attn::HeadScope::Single, attn::HeadScope::All}) {
    auto report = bench::run_experiment(sweep_spec(scope));
    double prev = -1;
    for (const auto& c : report.cells) {
      r.expect(c.row.accuracy_pct >= prev, std::string(attn::to_string(scope)) + ": accuracy drops at k=" + std::to_string(c.top_k));
      prev = c.row.accuracy_pct;
      if (c.top_k >= 256) r.expect(c.row.accuracy_pct == 100.0, "k=" + std::to_string(c.top_k) + " below 100%");
    }
    char buf[96];
    std::snprintf(buf, sizeof buf, "%s %.1f%%->%.1f%% ", attn::to_string(scope), report.cells.front().row.accuracy_pct,
                  report.cells.back().row.accuracy_pct);
    note += buf;
  }
  r.note = note + "over " + std::to_string(sweep_spec(attn::HeadScope::Single).top_k.size()) + " k values";
  return r;
}

// 6
CheckResult pbs_accounting() {
  CheckResult r;
  auto s = sweep_spec(attn::HeadScope::Single);
  s.modes = {attn::FheMode::Simulate, attn::FheMode::Execute};
  s.top_k = {1, 5, 10};
  s.max_prompts = 3;
  std::uint64_t runs = 0;
  for (auto scope : {attn::HeadScope::Single, attn::HeadScope::All}) {
    s.cfg.scope = scope;
    if (scope == attn::HeadScope::All) s.modes = {attn::FheMode::Simulate};
    auto report = bench::run_experiment(s);
    std::map<attn::FheMode, std::set<double>> per_token;
    for (const auto& c : report.cells) {
      per_token[c.mode].insert(c.row.pbs_per_token);
      for (const auto& run : c.runs) {
        ++runs;
        r.expect(run.pbs == run.static_pbs, "runtime tally " + std::to_string(run.pbs) + " != static " +
                                                std::to_string(run.static_pbs));
      }
    }
    for (const auto& [mode, v] : per_token)
      r.expect(v.size() == 1, std::string(attn::to_string(mode)) + ": pbs_per_token varies with top-k");
  }
  auto full = sweep_spec(attn::HeadScope::Single);
  for (const auto& c : bench::run_experiment(full).cells)
    for (const auto& run : c.runs) {
      ++runs;
      r.expect(run.pbs == run.static_pbs, "simulate sweep: runtime tally differs from static count");
    }
  r.note = std::to_string(runs) + " runs";
  return r;
}

// 7
CheckResult compile_once() {
  CheckResult r;
  auto s = sweep_spec(attn::HeadScope::Single);
  s.top_k = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  s.max_prompts = 10;
  s.timing = true;
  auto report = bench::run_experiment(s);
  r.expect(report.cells.size() == 10, "expected 10 cells");
  r.expect(report.compilations == 1, std::to_string(report.compilations) + " compilations");
  for (const auto& c : report.cells) r.expect(c.row.compile_s > 0, "compile time missing");
  r.note = "10 cells, " + std::to_string(report.compilations) + " compilation, compile_s=" +
           std::to_string(report.cells.front().row.compile_s);
  return r;
}

// 8
CheckResult kv_cache() {
  CheckResult r;
  model::ModelConfig mc;
  model::Model m(std::make_shared<const model::Weights>(model::Weights::random(mc)));
  auto t = bench::measure_kv_timing(m, model::encode_text("kv"), 60, 7);
  r.expect(t.max_logit_diff <= 1e-9, "cached and recomputed logits differ by " + std::to_string(t.max_logit_diff));
  double ratio = t.cached_slope / t.recompute_slope;
  r.expect(t.recompute_slope > 0 && ratio <= 0.25, "slope ratio " + std::to_string(ratio));
  char buf[128];
  std::snprintf(buf, sizeof buf, "max |dlogit| %.2e, slope ratio %.4f", t.max_logit_diff, ratio);
  r.note = buf;
  return r;
}

// 9
CheckResult protocol_loopback() {
  CheckResult r;
  const auto& f = single();
  auto plan = f.plan(6);
  auto prompts = checks::prompt_tokens(4);
  auto local = f.execute(plan, attn_keys());
  auto cfg = f.cfg;
  cfg.mode = attn::FheMode::Execute;

  protocol::ServerSession session;
  protocol::LoopbackTransport loop(session);
  attn::HybridModel in_process(f.weights, cfg, plan,
                               std::make_unique<protocol::RemoteEvaluator>(plan, attn_keys(), loop));
  protocol::SocketServer server(0, nullptr);
  auto conn = protocol::connect_tcp("127.0.0.1:" + std::to_string(server.port()));
  {
    attn::HybridModel over_socket(f.weights, cfg, plan,
                                  std::make_unique<protocol::RemoteEvaluator>(plan, attn_keys(), *conn));
    for (std::size_t i = 0; i < 3; ++i) {
      compare_runs(r, local, in_process, prompts[i], "in-process prompt " + std::to_string(i));
      compare_runs(r, local, over_socket, prompts[i], "socket prompt " + std::to_string(i));
    }
    // local ran every prompt once per transport
    r.expect(2 * in_process.pbs_tally() == local.pbs_tally(), "in-process PBS tally differs");
    r.expect(2 * over_socket.pbs_tally() == local.pbs_tally(), "socket PBS tally differs");
    r.expect(local.pbs_tally() == 6 * plan->pbs_count(), "tally differs from the static count");
  }
  conn->shutdown_write();
  server.stop();

  // Fuzz: corrupt a valid Result frame; nothing may reach decryption.
  protocol::ServerSession fs;
  protocol::LoopbackTransport ft(fs);
  protocol::ClientSession client(ft, attn_keys().client);
  client.install(attn_keys().server, plan);
  auto seg = plan->segment_index(0, 0);
  std::vector<std::int64_t> codes;
  for (auto id : plan->segments[seg].inputs) codes.push_back(plan->nodes[id].lo);
  auto good = fs.handle(client.encrypt_step(seg, codes, true));
  std::mt19937_64 rng(99);
  int rejected = 0;
  const int frames = 1000;
  for (int i = 0; i < frames; ++i) {
    auto bad = good;
    switch (i % 4) {
      case 0:  // random byte anywhere
        bad[rng() % bad.size()] ^= static_cast<std::uint8_t>(1 + rng() % 255);
        break;
      case 1:  // payload burst
        for (int k = 0; k < 8; ++k)
          bad[protocol::kHeaderSize + rng() % (bad.size() - protocol::kHeaderSize - protocol::kTrailerSize)] ^=
              static_cast<std::uint8_t>(1 + rng() % 255);
        break;
      case 2:  // truncation
        bad.resize(rng() % bad.size());
        break;
      default:  // header field
        bad[rng() % protocol::kHeaderSize] ^= static_cast<std::uint8_t>(1 + rng() % 255);
        break;
    }
    try {
      client.decrypt_result(bad, seg);
    } catch (const Error&) {
      ++rejected;
    }
  }
  r.expect(rejected == frames, std::to_string(frames - rejected) + " corrupted frames accepted");
  r.expect(client.decrypt_calls() == 0, std::to_string(client.decrypt_calls()) + " decryptions on corrupted frames");
  r.note = "3 prompts x 2 transports, " + std::to_string(rejected) + "/" + std::to_string(frames) + " fuzzed frames rejected";
  return r;
}

// 10
CheckResult quantization_bound() {
  CheckResult r;
  std::uint64_t acts = 0;
  for (auto scope : {attn::HeadScope::Single, attn::HeadScope::All}) {
    checks::AttnFixture f(scope);
    auto plan = f.plan(6);
    auto c = checks::quantization_bound(f, *plan, 167, scope == attn::HeadScope::Single ? 1 : 2);
    r.merge(c);
    acts += 167 * 6;
  }
  r.note = std::to_string(acts) + " activations per scope total, " + std::to_string(r.cases) + " node checks";
  return r;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<CheckResult()> run;
  };
  std::vector<Criterion> all = {
      {"fhe exhaustive correctness (micro profile)", fhe_exhaustive},
      {"blind-rotate vs reference PBS on 100 random tables", backend_oracle},
      {"noise-ledger soundness over 10^4 random sequences", ledger},
      {"simulate/execute equivalence on 20 prompts", mode_equivalence},
      {"accuracy monotone in top-k, 100% at k=vocab", accuracy_monotone},
      {"runtime PBS tally equals static count; per-token PBS independent of top-k", pbs_accounting},
      {"one compilation for a 10-cell top-k sweep", compile_once},
      {"kv-cache equivalence and timing slope", kv_cache},
      {"protocol loopback (in-process, socket) and 1000-frame fuzz", protocol_loopback},
      {"quantization error within plan bound on 10^3 activations", quantization_bound},
  };
  int failed = 0;
  for (std::size_t i = 0; i < all.size(); ++i) {
    auto t0 = std::chrono::steady_clock::now();
    CheckResult r;
    try {
      r = all[i].run();
    } catch (const std::exception& e) {
      r.fail(std::string("exception: ") + e.what());
    }
    double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    bool ok = r.ok();
    failed += !ok;
    std::printf("%s  criterion %2zu: %s [%llu cases, %.1f s]%s%s\n", ok ? "PASS" : "FAIL", i + 1, all[i].name,
                static_cast<unsigned long long>(r.cases), s, r.note.empty() ? "" : " ", r.note.c_str());
    if (!ok) std::printf("      first failure: %s\n", r.first_failure.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(all.size()) - failed, all.size());
  return failed ? 1 : 0;
}
