#include "pql3/model/weights.hpp"

#include <cmath>
#include <random>

#include "pql3/common/error.hpp"

namespace pql3::model {

namespace {

constexpr char kMagic[4] = {'P', 'Q', 'L', '3'};
constexpr std::uint32_t kVersion = 1;

double to_f32(double x) { return static_cast<double>(static_cast<float>(x)); }

Matrix gaussian(std::size_t r, std::size_t c, double stddev, std::mt19937_64& g) {
  std::normal_distribution<double> d(0.0, stddev);
  Matrix m(r, c);
  for (auto& v : m.data) v = to_f32(d(g));
  return m;
}

void put(ByteWriter& w, const std::vector<double>& v) {
  for (double x : v) w.f32(static_cast<float>(x));
}

void get(ByteReader& in, std::vector<double>& v) {
  for (auto& x : v) x = static_cast<double>(in.f32());
}

template <typename F>
void for_each_tensor(Weights& w, F&& f) {
  f(w.token_embedding.data);
  for (auto& l : w.layers) {
    f(l.rms_gain_attn);
    f(l.q_proj.data);
    f(l.k_proj.data);
    f(l.v_proj.data);
    f(l.o_proj.data);
    f(l.rms_gain_ffn);
    f(l.gate_proj.data);
    f(l.up_proj.data);
    f(l.down_proj.data);
  }
  f(w.final_rms_gain);
  f(w.lm_head.data);
}

Weights shaped(const ModelConfig& cfg) {
  cfg.validate();
  auto d = static_cast<std::size_t>(cfg.d_emb);
  auto hd = static_cast<std::size_t>(cfg.n_heads * cfg.d_head());
  auto kvd = static_cast<std::size_t>(cfg.n_kv_groups * cfg.d_head());
  auto f = static_cast<std::size_t>(cfg.d_ffn);
  auto v = static_cast<std::size_t>(cfg.vocab_size);
  Weights w;
  w.config = cfg;
  w.token_embedding = Matrix(v, d);
  w.layers.resize(static_cast<std::size_t>(cfg.n_layers));
  for (auto& l : w.layers) {
    l.rms_gain_attn.assign(d, 1.0);
    l.q_proj = Matrix(hd, d);
    l.k_proj = Matrix(kvd, d);
    l.v_proj = Matrix(kvd, d);
    l.o_proj = Matrix(d, hd);
    l.rms_gain_ffn.assign(d, 1.0);
    l.gate_proj = Matrix(f, d);
    l.up_proj = Matrix(f, d);
    l.down_proj = Matrix(d, f);
  }
  w.final_rms_gain.assign(d, 1.0);
  w.lm_head = Matrix(v, d);
  return w;
}

}  // namespace

Weights Weights::random(const ModelConfig& cfg) {
  Weights w = shaped(cfg);
  std::mt19937_64 g(cfg.weight_seed);
  auto s = [](int fan_in) { return 1.0 / std::sqrt(static_cast<double>(fan_in)); };
  auto d = static_cast<std::size_t>(cfg.d_emb);
  w.token_embedding = gaussian(w.token_embedding.rows, d, 1.0, g);
  for (auto& l : w.layers) {
    l.q_proj = gaussian(l.q_proj.rows, d, s(cfg.d_emb), g);
    l.k_proj = gaussian(l.k_proj.rows, d, s(cfg.d_emb), g);
    l.v_proj = gaussian(l.v_proj.rows, d, s(cfg.d_emb), g);
    l.o_proj = gaussian(d, l.o_proj.cols, s(cfg.d_emb), g);
    l.gate_proj = gaussian(l.gate_proj.rows, d, s(cfg.d_emb), g);
    l.up_proj = gaussian(l.up_proj.rows, d, s(cfg.d_emb), g);
    l.down_proj = gaussian(d, l.down_proj.cols, s(cfg.d_ffn), g);
  }
  w.lm_head = gaussian(w.lm_head.rows, d, s(cfg.d_emb), g);
  return w;
}

void Weights::check_shapes() const {
  Weights ref = shaped(config);
  auto same = [](const Matrix& a, const Matrix& b) { return a.rows == b.rows && a.cols == b.cols && a.data.size() == b.data.size(); };
  bool ok = same(token_embedding, ref.token_embedding) && same(lm_head, ref.lm_head) &&
            final_rms_gain.size() == ref.final_rms_gain.size() && layers.size() == ref.layers.size();
  for (std::size_t i = 0; ok && i < layers.size(); ++i) {
    const auto &a = layers[i], &b = ref.layers[i];
    ok = same(a.q_proj, b.q_proj) && same(a.k_proj, b.k_proj) && same(a.v_proj, b.v_proj) &&
         same(a.o_proj, b.o_proj) && same(a.gate_proj, b.gate_proj) && same(a.up_proj, b.up_proj) &&
         same(a.down_proj, b.down_proj) && a.rms_gain_attn.size() == b.rms_gain_attn.size() &&
         a.rms_gain_ffn.size() == b.rms_gain_ffn.size();
  }
  if (!ok) throw ShapeError("weight tensors do not match the model config");
}

Bytes Weights::serialize() const {
  check_shapes();
  ByteWriter w;
  w.raw(std::string_view(kMagic, 4));
  w.u32(kVersion);
  const auto& c = config;
  for (int v : {c.vocab_size, c.d_emb, c.n_layers, c.n_heads, c.n_kv_groups, c.d_ffn, c.max_seq_len})
    w.u32(static_cast<std::uint32_t>(v));
  w.f64(c.rope_base);
  w.u64(c.weight_seed);
  w.u8(c.scale_by_head_dim ? 1 : 0);
  w.f64(c.rms_eps);
  for_each_tensor(const_cast<Weights&>(*this), [&](std::vector<double>& t) { put(w, t); });
  return w.take();
}

Weights Weights::deserialize(std::span<const std::uint8_t> bytes) {
  ByteReader in(bytes);
  auto magic = in.raw(4);
  if (!std::equal(magic.begin(), magic.end(), kMagic)) throw IoError("not a weight file (bad magic)");
  if (auto v = in.u32(); v != kVersion) throw IoError("unsupported weight file version " + std::to_string(v));
  ModelConfig c;
  int* fields[] = {&c.vocab_size, &c.d_emb, &c.n_layers, &c.n_heads, &c.n_kv_groups, &c.d_ffn, &c.max_seq_len};
  for (int* f : fields) *f = static_cast<int>(in.u32());
  c.rope_base = in.f64();
  c.weight_seed = in.u64();
  c.scale_by_head_dim = in.u8() != 0;
  c.rms_eps = in.f64();
  Weights w = shaped(c);
  for_each_tensor(w, [&](std::vector<double>& t) { get(in, t); });
  in.expect_end();
  return w;
}

void Weights::save(const std::string& path) const { write_file(path, serialize()); }

Weights Weights::load(const std::string& path) { return deserialize(read_file(path)); }

}  // namespace pql3::model
