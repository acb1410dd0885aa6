#include "circuit_checks.hpp"

#include <random>

#include "pql3/circuit/executor.hpp"
#include "pql3/fhe/ops.hpp"

namespace pql3::checks {

using circuit::Graph;
using circuit::NodeId;
using circuit::NodeKind;

int refresh_free_depth(const fhe::CryptoParams& p) {
  const double half_delta = static_cast<double>(p.delta()) / 2;
  int k = -1;
  while (p.fresh_noise * std::ldexp(1.0, k + 1) < half_delta) ++k;
  return k;
}

Graph doubling_chain(int depth) {
  Graph g;
  g.begin_segment(0, 0);
  NodeId x = g.input(0, 0, {});
  for (int i = 0; i < depth; ++i) x = g.add({x, x}, {});
  g.output(x);
  return g;
}

RandomGraph random_graph(const fhe::CryptoParams& p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto pick = [&](std::int64_t lo, std::int64_t hi) { return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng); };
  const std::int64_t pm = static_cast<std::int64_t>(p.plaintext_modulus());
  const std::int64_t max_arg = (std::int64_t{1} << (p.total_bits() - 1)) - 1;  // widest table argument span
  RandomGraph out;
  Graph& g = out.graph;
  auto span = [&](NodeId id) { return g.node(id).hi - g.node(id).lo; };
  auto fits = [&](std::int64_t lo, std::int64_t hi) { return hi - lo < pm; };
  auto push_fn = [&](NodeId id, std::function<std::int64_t(std::int64_t)> f = {}) {
    out.tables.resize(id + 1);
    out.tables[id] = std::move(f);
  };

  int segments = static_cast<int>(pick(1, 3));
  for (int s = 0; s < segments; ++s) {
    g.begin_segment(0, s);
    std::int64_t n_in = pick(1, 3);
    for (std::int64_t i = 0; i < n_in; ++i) {
      std::int64_t lo = pick(-3, 2), w = pick(0, 3);
      push_fn(g.input(lo, lo + w, {}));
    }
    std::int64_t n_ops = pick(4, 12);
    for (std::int64_t k = 0; k < n_ops; ++k) {
      auto any = [&] { return static_cast<NodeId>(pick(0, static_cast<std::int64_t>(g.size()) - 1)); };
      switch (pick(0, 4)) {
        case 0: {  // table lookup with outputs in [-4, 4]
          NodeId a = any();
          if (span(a) > max_arg) break;
          std::int64_t lo = g.node(a).lo;
          std::vector<std::int64_t> t(static_cast<std::size_t>(span(a) + 1));
          for (auto& v : t) v = pick(-4, 4);
          std::function<std::int64_t(std::int64_t)> f = [t, lo](std::int64_t v) { return t[static_cast<std::size_t>(v - lo)]; };
          push_fn(g.lut(a, f, {}), f);
          break;
        }
        case 1: {  // product
          NodeId a = any(), b = any();
          if (span(a) + span(b) > max_arg) break;
          const auto &x = g.node(a), &y = g.node(b);
          std::int64_t c[] = {x.lo * y.lo, x.lo * y.hi, x.hi * y.lo, x.hi * y.hi};
          if (!fits(*std::min_element(c, c + 4), *std::max_element(c, c + 4))) break;
          push_fn(g.ct_mult(a, b, {}));
          break;
        }
        case 2: {  // small linear combination
          std::int64_t n = pick(1, 3), c = pick(-2, 2), lo = c, hi = c;
          std::vector<NodeId> in;
          std::vector<std::int64_t> w;
          for (std::int64_t i = 0; i < n; ++i) {
            NodeId a = any();
            std::int64_t wi = pick(-3, 3);
            in.push_back(a);
            w.push_back(wi);
            lo += std::min(wi * g.node(a).lo, wi * g.node(a).hi);
            hi += std::max(wi * g.node(a).lo, wi * g.node(a).hi);
          }
          if (!fits(lo, hi)) break;
          push_fn(g.linear(in, w, c, {}));
          break;
        }
        case 3: {  // add
          NodeId a = any(), b = any();
          if (!fits(g.node(a).lo + g.node(b).lo, g.node(a).hi + g.node(b).hi)) break;
          push_fn(g.add({a, b}, {}));
          break;
        }
        case 4: {  // noise pump: 2^e x - (2^e - 1) x on a constant-range node keeps the value
          NodeId a = any();
          if (span(a) != 0) break;
          std::int64_t big = std::int64_t{1} << pick(4, 14);
          push_fn(g.linear({a, a}, {big, 1 - big}, 0, {}));
          break;
        }
      }
    }
    g.output(static_cast<NodeId>(g.size() - 1));
    if (g.size() > 1) g.output(static_cast<NodeId>(g.size() - 2));
  }
  out.tables.resize(g.size());
  return out;
}

std::vector<std::int64_t> evaluate_graph(const RandomGraph& rg, const std::vector<std::int64_t>& inputs) {
  const Graph& g = rg.graph;
  std::vector<std::int64_t> v(g.size(), 0);
  std::size_t next_input = 0;
  for (NodeId i = 0; i < g.size(); ++i) {
    const auto& n = g.node(i);
    switch (n.kind) {
      case NodeKind::Input:
        v[i] = inputs.at(next_input++);
        break;
      case NodeKind::Linear:
        v[i] = n.constant;
        for (std::size_t k = 0; k < n.inputs.size(); ++k) v[i] += n.weights[k] * v[n.inputs[k]];
        break;
      case NodeKind::Add:
        for (NodeId in : n.inputs) v[i] += v[in];
        break;
      case NodeKind::CtMult:
        v[i] = v[n.inputs[0]] * v[n.inputs[1]];
        break;
      case NodeKind::Lut:
        v[i] = rg.tables.at(i)(v[n.inputs[0]]);
        break;
    }
  }
  return v;
}

CheckResult random_plans(const fhe::CryptoParams& p, int graphs, std::uint64_t seed, fhe::KeyMaterial* km) {
  CheckResult r;
  std::mt19937_64 rng(seed);
  std::uint64_t refreshes = 0, sites = 0;
  std::unique_ptr<fhe::BlindRotatePbs> engine;
  if (km) engine = std::make_unique<fhe::BlindRotatePbs>(km->server);
  for (int t = 0; t < graphs; ++t) {
    auto rg = random_graph(p, rng());
    const auto& g = rg.graph;
    std::vector<std::int64_t> inputs;
    for (NodeId i = 0; i < g.size(); ++i)
      if (g.node(i).kind == NodeKind::Input)
        inputs.push_back(std::uniform_int_distribution<std::int64_t>(g.node(i).lo, g.node(i).hi)(rng));
    auto expect = evaluate_graph(rg, inputs);
    std::string where = "graph " + std::to_string(t) + ": ";
    try {
      auto plan = circuit::compile(g, p, static_cast<std::uint32_t>(g.segments().size()));
      refreshes += plan.refresh_count();
      sites += plan.pbs_count();
      circuit::ClearExecutor clear(plan, circuit::ClearBackend(plan));
      std::unique_ptr<circuit::CipherExecutor> cipher;
      if (km) cipher = std::make_unique<circuit::CipherExecutor>(plan, circuit::CipherBackend(plan, *engine), 2);
      std::uint64_t engine_before = engine ? engine->count() : 0;
      std::size_t next_input = 0;
      for (std::size_t s = 0; s < plan.segments.size(); ++s) {
        const auto& seg = plan.segments[s];
        const auto& gseg = g.segments()[s];
        for (std::size_t k = 0; k < seg.inputs.size(); ++k) {
          std::int64_t x = inputs.at(next_input++);
          clear.set_input(seg.inputs[k], circuit::encode_residue(x, p));
          if (cipher) cipher->set_input(seg.inputs[k], km->client.encrypt(circuit::encode_residue(x, p), p.total_bits()));
        }
        clear.run_segment(s);
        if (cipher) cipher->run_segment(s);
        for (std::size_t k = 0; k < seg.outputs.size(); ++k) {
          NodeId id = seg.outputs[k];
          std::int64_t want = expect[gseg.outputs[k]];
          const auto& node = plan.nodes[id];
          std::int64_t got = circuit::decode_signed(clear.value(id), node, p);
          r.expect(got == want, where + "clear output " + std::to_string(got) + " != " + std::to_string(want));
          if (cipher) {
            std::int64_t enc = circuit::decode_signed(km->client.decrypt(cipher->value(id)), node, p);
            r.expect(enc == want, where + "encrypted output " + std::to_string(enc) + " != " + std::to_string(want));
          }
        }
      }
      r.expect(clear.pbs_sites() == plan.pbs_count(), where + "clear tally differs from the static count");
      if (cipher) {
        r.expect(cipher->pbs_sites() == plan.pbs_count(), where + "encrypted tally differs from the static count");
        r.expect(engine->count() - engine_before == plan.pbs_count(), where + "engine tally differs from the static count");
      }
    } catch (const std::exception& e) {
      r.fail(where + e.what());
    }
  }
  r.note = std::to_string(graphs) + " graphs, " + std::to_string(sites) + " PBS sites, " + std::to_string(refreshes) +
           " refreshes";
  return r;
}

}  // namespace pql3::checks
