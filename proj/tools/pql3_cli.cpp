#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "pql3/attn/calibration.hpp"
#include "pql3/attn/compile.hpp"
#include "pql3/attn/hybrid.hpp"
#include "pql3/bench/experiment.hpp"
#include "pql3/protocol/client.hpp"
#include "pql3/protocol/server.hpp"
#include "pql3/protocol/socket.hpp"

namespace fs = std::filesystem;
using namespace pql3;

namespace {

// Options shared by every subcommand that builds the encrypted block.
struct ModelOptions {
  std::string weights;  // empty: random toy weights
  std::uint64_t weight_seed = 1;
  std::string prompts = "data/prompts.txt";
  std::vector<int> layers = {0};
  std::string scope = "single";
  int n_bits = 2;
  std::uint64_t crypto_seed = 1;
  std::size_t calib_tokens = 6;

  void add(CLI::App* app) {
    app->add_option("--weights", weights, "Weights file (default: random toy weights)");
    app->add_option("--weight-seed", weight_seed, "Seed for random toy weights");
    app->add_option("--prompts", prompts, "Prompt file, one prompt per line (also used for calibration)");
    app->add_option("--layers", layers, "Target layers")->delimiter(',');
    app->add_option("--scope", scope, "Heads to encrypt: single or all");
    app->add_option("--n-bits", n_bits, "Activation bit width");
    app->add_option("--crypto-seed", crypto_seed, "Key generation seed");
    app->add_option("--calib-tokens", calib_tokens, "Tokens per prompt used for calibration");
  }

  std::shared_ptr<const model::Weights> load_weights() const {
    if (!weights.empty()) return std::make_shared<const model::Weights>(model::Weights::load(weights));
    model::ModelConfig mc;
    mc.weight_seed = weight_seed;
    return std::make_shared<const model::Weights>(model::Weights::random(mc));
  }

  attn::EncAttnConfig config(attn::FheMode mode) const {
    attn::EncAttnConfig c;
    c.target_layers = layers;
    c.scope = attn::parse_scope(scope);
    c.mode = mode;
    c.n_bits = n_bits;
    c.crypto = fhe::CryptoParams::micro(n_bits, 5, crypto_seed);
    return c;
  }

  attn::CalibrationRecord calibrate(const model::Weights& w, const attn::EncAttnConfig& c) const {
    std::vector<std::vector<int>> seqs;
    for (const auto& line : bench::load_prompts(prompts)) {
      auto t = model::encode_text(line);
      t.resize(std::min(t.size(), calib_tokens));
      seqs.push_back(std::move(t));
    }
    return attn::calibrate_block(seqs, w, c);
  }
};

fhe::KeyMaterial load_or_make_keys(const std::string& dir, const fhe::CryptoParams& p) {
  if (dir.empty()) return fhe::keygen(p);
  fhe::KeyMaterial km{fhe::ClientKey::deserialize(read_file(dir + "/client.key")),
                      fhe::ServerKey::deserialize(read_file(dir + "/server.key"))};
  if (!km.client.params().same_scheme(p)) throw ConfigError("keys in " + dir + " were made for other parameters");
  return km;
}

std::vector<attn::FheMode> parse_modes(const std::vector<std::string>& names) {
  std::vector<attn::FheMode> out;
  for (const auto& n : names) out.push_back(attn::parse_mode(n));
  return out;
}

// Toy weights produce arbitrary bytes; show non-printable ones as \xNN.
std::string printable(std::span<const int> tokens) {
  std::string out;
  char buf[8];
  for (int t : tokens) {
    if (t >= 0x20 && t < 0x7f) {
      out.push_back(static_cast<char>(t));
    } else {
      std::snprintf(buf, sizeof buf, "\\x%02x", t & 0xff);
      out += buf;
    }
  }
  return out;
}

void print_generation(const model::Generation& g, std::size_t prompt_len, std::uint64_t pbs) {
  std::string prompt = printable(std::span(g.tokens).first(prompt_len));
  std::string added = printable(std::span(g.tokens).subspan(prompt_len));
  std::cout << "prompt:    " << prompt << "\ngenerated: " << added << "\npbs:       " << pbs << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Toy transformer with encrypted attention: keys, circuits, generation, benchmarks, client/server"};
  app.require_subcommand(1);

  // init-weights
  auto* init = app.add_subcommand("init-weights", "Write random toy weights to a file");
  std::string init_out = "weights.bin";
  std::uint64_t init_seed = 1;
  init->add_option("--out", init_out, "Output path");
  init->add_option("--seed", init_seed, "Weight seed");

  // keygen
  auto* keygen = app.add_subcommand("keygen", "Generate a client key and an evaluation key");
  std::string key_dir = "keys";
  int kg_bits = 2;
  std::uint64_t kg_seed = 1;
  keygen->add_option("--out-dir", key_dir, "Directory for client.key and server.key");
  keygen->add_option("--n-bits", kg_bits, "Activation bit width");
  keygen->add_option("--seed", kg_seed, "Key generation seed");

  // compile
  auto* compile = app.add_subcommand("compile", "Calibrate and compile the encrypted attention circuit");
  ModelOptions cmo;
  cmo.add(compile);
  std::uint32_t seq_len = 6;
  std::string plan_out = "attention.pqpl", calib_out;
  compile->add_option("--seq-len", seq_len, "Positions the circuit covers");
  compile->add_option("--out", plan_out, "Plan output path");
  compile->add_option("--calib-out", calib_out, "Also write the calibration record");

  // generate
  auto* gen = app.add_subcommand("generate", "Generate text locally in one mode");
  ModelOptions gmo;
  gmo.add(gen);
  std::string gen_prompt = "hello", gen_mode = "simulate", gen_keys;
  model::GenerationConfig gcfg;
  unsigned gen_threads = 1;
  gen->add_option("--prompt", gen_prompt, "Prompt text");
  gen->add_option("--mode", gen_mode, "disable, simulate or execute");
  gen->add_option("--top-k", gcfg.top_k, "Candidate set size");
  gen->add_option("--max-new", gcfg.max_new_tokens, "New tokens");
  gen->add_option("--keys", gen_keys, "Key directory (execute mode; default: fresh keys)");
  gen->add_option("--threads", gen_threads, "Worker threads for execute mode");

  // bench
  auto* bench_cmd = app.add_subcommand("bench", "Run a top-k / mode sweep and write CSV or JSON");
  ModelOptions bmo;
  bmo.add(bench_cmd);
  std::vector<std::string> bench_modes = {"disable", "simulate"};
  bench::ExperimentSpec spec;
  std::string bench_out = "results.csv", bench_format = "csv";
  bool no_timing = false, with_steps = false;
  bench_cmd->add_option("--modes", bench_modes, "Modes to run")->delimiter(',');
  bench_cmd->add_option("--top-k", spec.top_k, "Top-k values")->delimiter(',');
  bench_cmd->add_option("--max-new", spec.max_new_tokens, "New-token counts")->delimiter(',');
  bench_cmd->add_option("--reps", spec.repetitions, "Repetitions per prompt");
  bench_cmd->add_option("--prompt-tokens", spec.prompt_tokens, "Prompt length in tokens");
  bench_cmd->add_option("--max-prompts", spec.max_prompts, "Use only the first N prompts (0 = all)");
  bench_cmd->add_option("--plan-dir", spec.plan_dir, "Directory for cached compiled plans");
  bench_cmd->add_option("--threads", spec.threads, "Worker threads for execute mode");
  bench_cmd->add_option("--out", bench_out, "Output path ('-' for stdout)");
  bench_cmd->add_option("--format", bench_format, "csv or json");
  bench_cmd->add_flag("--no-timing", no_timing, "Write timing columns as NA (byte-reproducible output)");
  bench_cmd->add_flag("--steps", with_steps, "Include per-step records (json only)");

  // serve
  auto* serve = app.add_subcommand("serve", "Run the server role on a TCP port");
  std::uint16_t port = 7300;
  std::string host = "127.0.0.1";
  unsigned serve_threads = 1;
  serve->add_option("--port", port, "TCP port");
  serve->add_option("--host", host, "IPv4 address to bind");
  serve->add_option("--threads", serve_threads, "Worker threads per session");

  // query
  auto* query = app.add_subcommand("query", "Generate with the attention circuit executed by a remote server");
  ModelOptions qmo;
  qmo.add(query);
  std::string addr = "127.0.0.1:7300", q_prompt = "hello", q_keys;
  model::GenerationConfig qcfg;
  query->add_option("--addr", addr, "Server host:port");
  query->add_option("--prompt", q_prompt, "Prompt text");
  query->add_option("--top-k", qcfg.top_k, "Candidate set size");
  query->add_option("--max-new", qcfg.max_new_tokens, "New tokens");
  query->add_option("--keys", q_keys, "Key directory (default: fresh keys)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*init) {
      model::ModelConfig mc;
      mc.weight_seed = init_seed;
      model::Weights::random(mc).save(init_out);
      std::cout << "wrote " << init_out << "\n";
    } else if (*keygen) {
      auto km = fhe::keygen(fhe::CryptoParams::micro(kg_bits, 5, kg_seed));
      fs::create_directories(key_dir);
      write_file(key_dir + "/client.key", km.client.serialize());
      write_file(key_dir + "/server.key", km.server.serialize());
      std::cout << "wrote " << key_dir << "/client.key (keep private) and " << key_dir << "/server.key\n";
    } else if (*compile) {
      auto w = cmo.load_weights();
      auto cfg = cmo.config(attn::FheMode::Simulate);
      auto rec = cmo.calibrate(*w, cfg);
      auto plan = attn::compile_attention(cfg, *w, rec, seq_len);
      write_file(plan_out, plan->serialize());
      if (!calib_out.empty()) write_file(calib_out, rec.serialize());
      std::cout << "wrote " << plan_out << ": " << plan->nodes.size() << " nodes, " << plan->pbs_count()
                << " PBS, " << plan->refresh_count() << " refreshes, compiled in " << plan->compile_seconds << " s\n";
    } else if (*gen) {
      auto w = gmo.load_weights();
      auto mode = attn::parse_mode(gen_mode);
      auto cfg = gmo.config(mode);
      auto prompt = model::encode_text(gen_prompt);
      std::shared_ptr<const circuit::ExecutionPlan> plan;
      std::unique_ptr<attn::SegmentEvaluator> ev;
      if (mode != attn::FheMode::Disable) {
        auto rec = gmo.calibrate(*w, cfg);
        plan = attn::compile_attention(cfg, *w, rec,
                                       static_cast<std::uint32_t>(prompt.size() + static_cast<std::size_t>(gcfg.max_new_tokens) - 1));
        if (mode == attn::FheMode::Simulate)
          ev = std::make_unique<attn::SimulateEvaluator>(plan);
        else
          ev = std::make_unique<attn::LocalExecuteEvaluator>(plan, load_or_make_keys(gen_keys, cfg.crypto), gen_threads);
      }
      attn::HybridModel hm(w, cfg, plan, std::move(ev));
      auto g = hm.generate(prompt, gcfg);
      print_generation(g, prompt.size(), hm.pbs_tally());
    } else if (*bench_cmd) {
      spec.prompt_file = bmo.prompts;
      spec.weights_file = bmo.weights;
      spec.weight_seed = bmo.weight_seed;
      spec.cfg = bmo.config(attn::FheMode::Simulate);
      spec.modes = parse_modes(bench_modes);
      spec.timing = !no_timing;
      if (bench_format != "csv" && bench_format != "json") throw ConfigError("format must be csv or json");
      auto report = bench::run_experiment(spec);
      std::string text = bench_format == "csv" ? bench::to_csv(report, spec.timing)
                                               : bench::to_json(report, spec.timing, with_steps);
      if (bench_out == "-") {
        std::cout << text;
      } else {
        std::ofstream(bench_out) << text;
        std::cout << "wrote " << report.cells.size() << " rows to " << bench_out << " (" << report.compilations
                  << " compilation(s))\n";
      }
    } else if (*serve) {
      protocol::SocketServer server(port, std::make_shared<protocol::ServerRegistry>(), serve_threads, host);
      std::cout << "listening on " << host << ":" << server.port() << std::endl;
      server.wait();
    } else if (*query) {
      auto w = qmo.load_weights();
      auto cfg = qmo.config(attn::FheMode::Execute);
      auto prompt = model::encode_text(q_prompt);
      auto rec = qmo.calibrate(*w, cfg);
      auto plan = attn::compile_attention(cfg, *w, rec,
                                          static_cast<std::uint32_t>(prompt.size() + static_cast<std::size_t>(qcfg.max_new_tokens) - 1));
      auto conn = protocol::connect_tcp(addr);
      auto remote = std::make_unique<protocol::RemoteEvaluator>(plan, load_or_make_keys(q_keys, cfg.crypto), *conn);
      auto* r = remote.get();
      attn::HybridModel hm(w, cfg, plan, std::move(remote));
      auto g = hm.generate(prompt, qcfg);
      print_generation(g, prompt.size(), hm.pbs_tally());
      std::cout << "sent:      " << r->session().bytes_sent() << " bytes\nreceived:  " << r->session().bytes_received()
                << " bytes\nserver:    " << r->server_seconds() << " s\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
