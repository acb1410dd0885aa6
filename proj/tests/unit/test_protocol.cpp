#include <gtest/gtest.h>

#include <cstdlib>
#include <random>
#include <thread>

#include "attn_fixture.hpp"
#include "pql3/protocol/client.hpp"
#include "pql3/protocol/messages.hpp"
#include "pql3/protocol/server.hpp"
#include "pql3/protocol/socket.hpp"

using namespace pql3;
using namespace pql3::protocol;

namespace {

// Bitwise CRC-32 (reflected, polynomial 0xEDB88320), independent of zlib.
std::uint32_t crc32_oracle(std::span<const std::uint8_t> b) {
  std::uint32_t c = 0xFFFFFFFFu;
  for (auto byte : b) {
    c ^= byte;
    for (int k = 0; k < 8; ++k) c = (c >> 1) ^ (0xEDB88320u & (0u - (c & 1u)));
  }
  return ~c;
}

fhe::KeyMaterial& micro_keys() {
  static fhe::KeyMaterial km = fhe::keygen(fhe::CryptoParams::micro(2, 3, 11));
  return km;
}

// Two segments; each output is the identity of its input, so a loopback
// returns exactly what was sent.
std::shared_ptr<const circuit::ExecutionPlan> identity_plan() {
  static auto plan = [] {
    circuit::Graph g;
    for (int pos = 0; pos < 2; ++pos) {
      g.begin_segment(0, pos);
      for (int i = 0; i < 3; ++i) {
        auto in = g.input(-4, 3, {});
        g.output(g.lut(in, [](std::int64_t x) { return x; }, {}));
      }
    }
    return std::make_shared<const circuit::ExecutionPlan>(
        circuit::compile(g, micro_keys().client.params(), 2, "identity"));
  }();
  return plan;
}

// Records everything written through it.
class Recorder final : public Transport {
 public:
  explicit Recorder(Transport& inner) : inner_(inner) {}
  void write(std::span<const std::uint8_t> b) override {
    log.insert(log.end(), b.begin(), b.end());
    inner_.write(b);
  }
  bool read_exact(std::span<std::uint8_t> out) override { return inner_.read_exact(out); }
  Bytes log;

 private:
  Transport& inner_;
};

Frame response(ServerSession& s, MsgType t, std::span<const std::uint8_t> payload) {
  return decode_frame(s.handle(encode_frame(t, payload)));
}

std::string error_text(const Frame& f) {
  EXPECT_EQ(f.type, MsgType::Error);
  return f.type == MsgType::Error ? ErrorMsg::deserialize(f.payload).message : "";
}

}  // namespace

TEST(Frame, LayoutIsBitExact) {
  Bytes payload = {1, 2, 3, 250};
  auto f = encode_frame(MsgType::Plan, payload);
  ASSERT_EQ(f.size(), 4 + 4 + 1 + 8 + payload.size() + 4);
  EXPECT_EQ(std::string(f.begin(), f.begin() + 4), "PQC3");
  EXPECT_EQ(f[4], kProtocolVersion);
  EXPECT_EQ(f[5] | f[6] | f[7], 0);
  EXPECT_EQ(f[8], 2);
  EXPECT_EQ(f[9], payload.size());
  ByteReader r{std::span<const std::uint8_t>(f).subspan(f.size() - 4)};
  EXPECT_EQ(r.u32(), crc32_oracle(payload));
  auto d = decode_frame(f);
  EXPECT_EQ(d.type, MsgType::Plan);
  EXPECT_EQ(d.payload, payload);
}

TEST(Frame, EmptyPayloadCrcMatchesOracle) {
  auto f = encode_frame(MsgType::Error, {});
  ByteReader r{std::span<const std::uint8_t>(f).subspan(kHeaderSize)};
  EXPECT_EQ(r.u32(), crc32_oracle({}));
  EXPECT_EQ(crc32_oracle(Bytes{'1', '2', '3', '4', '5', '6', '7', '8', '9'}), 0xCBF43926u);
}

TEST(Frame, VersionBumpIsAVersionMismatch) {
  auto f = encode_frame(MsgType::Result, Bytes{7}, kProtocolVersion + 1);
  try {
    decode_frame(f);
    FAIL() << "accepted a future version";
  } catch (const ProtocolError& e) {
    EXPECT_NE(std::string(e.what()).find("version mismatch"), std::string::npos);
  }
}

TEST(Frame, UnknownTypeAndBadLengthRejected) {
  auto f = encode_frame(MsgType::Result, Bytes{7, 8});
  auto t = f;
  t[8] = 6;
  EXPECT_THROW(decode_frame(t), ProtocolError);
  t[8] = 0;
  EXPECT_THROW(decode_frame(t), ProtocolError);
  t = f;
  t[9] = 3;
  EXPECT_THROW(decode_frame(t), ProtocolError);
  t = f;
  t.pop_back();
  EXPECT_THROW(decode_frame(t), ProtocolError);
}

TEST(Frame, PayloadLimitFromEnvironment) {
  setenv("PQL3_MAX_PAYLOAD", "16", 1);
  EXPECT_EQ(max_payload(), 16u);
  EXPECT_THROW(encode_frame(MsgType::Plan, Bytes(17)), ProtocolError);
  unsetenv("PQL3_MAX_PAYLOAD");
  auto big = encode_frame(MsgType::Plan, Bytes(17));
  setenv("PQL3_MAX_PAYLOAD", "16", 1);
  EXPECT_THROW(decode_frame(big), FrameDesync);
  unsetenv("PQL3_MAX_PAYLOAD");
  EXPECT_EQ(max_payload(), 256ull << 20);
}

TEST(Messages, BatchHoldsExactlyOneCiphertextPerElement) {
  auto& km = micro_keys();
  auto n = static_cast<std::size_t>(km.client.params().lwe_dim);
  for (std::size_t k : {0u, 1u, 5u}) {
    BatchRequest b;
    b.segment = 3;
    for (std::size_t i = 0; i < k; ++i) b.inputs.push_back(km.client.encrypt(i % 4));
    auto bytes = b.serialize();
    EXPECT_EQ(bytes.size(), 8 + 1 + 4 + k * fhe::LweCiphertext::serialized_size(n));
    auto back = BatchRequest::deserialize(bytes, km.client.params_ptr(), km.client.key_id());
    ASSERT_EQ(back.inputs.size(), k);
    for (std::size_t i = 0; i < k; ++i) EXPECT_EQ(km.client.decrypt(back.inputs[i]), i % 4);
  }
}

TEST(ServerSession, BatchBeforeKeyAndPlanIsAnError) {
  ServerSession s;
  BatchRequest b;
  auto f = response(s, MsgType::CiphertextBatch, b.serialize());
  EXPECT_EQ(f.type, MsgType::Error);
  EXPECT_NE(error_text(f).find("before"), std::string::npos);
  EXPECT_EQ(s.requests_executed(), 0u);
}

TEST(ServerSession, PlanBeforeKeyIsAnError) {
  ServerSession s;
  auto f = response(s, MsgType::Plan, identity_plan()->serialize());
  EXPECT_EQ(f.type, MsgType::Error);
  EXPECT_FALSE(s.state().plan.has_value());
}

TEST(ServerSession, ClientSecretKeyIsRefused) {
  ServerSession s;
  auto f = response(s, MsgType::EvalKey, micro_keys().client.serialize());
  EXPECT_EQ(f.type, MsgType::Error);
  EXPECT_FALSE(s.state().eval_key.has_value());
}

TEST(ServerSession, KeyThenPlanThenBatchAfterKeyOnlyIsAnError) {
  ServerSession s;
  auto kb = micro_keys().server.serialize();
  auto f = response(s, MsgType::EvalKey, kb);
  ASSERT_EQ(f.type, MsgType::Result);
  EXPECT_EQ(*s.state().eval_key, sha256(kb));
  EXPECT_EQ(response(s, MsgType::CiphertextBatch, BatchRequest{}.serialize()).type, MsgType::Error);
}

TEST(Loopback, IdentityPlanReturnsTheInputIntegers) {
  ServerSession server;
  LoopbackTransport t(server);
  ClientSession client(t, micro_keys().client);
  client.install(micro_keys().server, identity_plan());
  std::vector<std::int64_t> codes = {-4, 0, 3};
  auto r = client.round_trip(0, codes, true);
  EXPECT_EQ(r.codes, codes);
  EXPECT_EQ(r.pbs, identity_plan()->segments[0].pbs_count);
  auto r2 = client.round_trip(1, {1, -1, 2}, false);
  EXPECT_EQ(r2.codes, (std::vector<std::int64_t>{1, -1, 2}));
  EXPECT_EQ(server.pbs_executed(), circuit::static_pbs_count(*identity_plan()));
}

TEST(Loopback, CodeOutsideInputRangeIsAPlanError) {
  ServerSession server;
  LoopbackTransport t(server);
  ClientSession client(t, micro_keys().client);
  client.install(micro_keys().server, identity_plan());
  EXPECT_THROW(client.encrypt_step(0, {0, 4, 0}, true), PlanError);
}

TEST(Loopback, IdenticalRequestsDecryptIdentically) {
  ServerSession server;
  LoopbackTransport t(server);
  ClientSession client(t, micro_keys().client);
  client.install(micro_keys().server, identity_plan());
  auto a = client.round_trip(0, {2, -3, 1}, true);
  auto b = client.round_trip(0, {2, -3, 1}, true);
  EXPECT_EQ(a.codes, b.codes);
}

TEST(Loopback, CorruptedResultsAreRejectedBeforeAnyDecrypt) {
  ServerSession server;
  LoopbackTransport t(server);
  ClientSession client(t, micro_keys().client);
  client.install(micro_keys().server, identity_plan());
  auto req = client.encrypt_step(0, {1, 2, 3}, true);
  auto good = server.handle(req);
  std::mt19937_64 rng(17);
  int rejected = 0;
  for (int trial = 0; trial < 300; ++trial) {
    auto bad = good;
    int flips = 1 + static_cast<int>(rng() % 3);
    for (int k = 0; k < flips; ++k) bad[rng() % bad.size()] ^= static_cast<std::uint8_t>(1 + rng() % 255);
    try {
      client.decrypt_result(bad, 0);
    } catch (const Error&) {
      ++rejected;
    }
  }
  EXPECT_EQ(rejected, 300);
  EXPECT_EQ(client.decrypt_calls(), 0u);
  EXPECT_EQ(client.decrypt_result(good, 0).codes, (std::vector<std::int64_t>{1, 2, 3}));
}

TEST(Loopback, CorruptedRequestsNeverExecute) {
  ServerSession server;
  LoopbackTransport t(server);
  ClientSession client(t, micro_keys().client);
  client.install(micro_keys().server, identity_plan());
  auto req = client.encrypt_step(0, {1, 2, 3}, true);
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    auto bad = req;
    bad[rng() % bad.size()] ^= static_cast<std::uint8_t>(1 + rng() % 255);
    EXPECT_EQ(decode_frame(server.handle(bad)).type, MsgType::Error);
  }
  EXPECT_EQ(server.requests_executed(), 0u);
  EXPECT_EQ(server.pbs_executed(), 0u);
}

TEST(Loopback, DesyncedHeaderEndsTheStream) {
  ServerSession server;
  LoopbackTransport t(server);
  auto f = encode_frame(MsgType::EvalKey, Bytes{1});
  f[0] = 'X';
  t.write(f);
  auto resp = read_frame(t);
  EXPECT_EQ(resp.type, MsgType::Error);
}

TEST(Socket, SameFramesAsInProcessAndSameOutputs) {
  auto plan = identity_plan();
  std::vector<std::vector<std::int64_t>> steps = {{-4, 0, 3}, {1, 1, -2}};

  ServerSession local;
  LoopbackTransport lt(local);
  Recorder lrec(lt);
  ClientSession lc(lrec, micro_keys().client);
  lc.install(micro_keys().server, plan);

  SocketServer srv(0, nullptr);
  auto st = connect_tcp("127.0.0.1:" + std::to_string(srv.port()));
  Recorder srec(*st);
  ClientSession sc(srec, micro_keys().client);
  sc.install(micro_keys().server, plan);

  for (std::size_t i = 0; i < steps.size(); ++i) {
    auto a = lc.round_trip(i, steps[i], i == 0);
    auto b = sc.round_trip(i, steps[i], i == 0);
    EXPECT_EQ(a.codes, steps[i]);
    EXPECT_EQ(a.codes, b.codes);
    EXPECT_EQ(a.pbs, b.pbs);
  }
  EXPECT_EQ(lrec.log, srec.log);
  EXPECT_GT(lrec.log.size(), 0u);
  st->shutdown_write();
  srv.stop();
}

TEST(Socket, SessionsShareKeysAndPlans) {
  auto registry = std::make_shared<ServerRegistry>();
  SocketServer srv(0, registry);
  auto run = [&](std::int64_t v) {
    auto t = connect_tcp("127.0.0.1:" + std::to_string(srv.port()));
    ClientSession c(*t, micro_keys().client);
    c.install(micro_keys().server, identity_plan());
    return c.round_trip(0, {v, v, v}, true).codes;
  };
  std::vector<std::int64_t> got1, got2;
  std::thread a([&] { got1 = run(1); });
  std::thread b([&] { got2 = run(-2); });
  a.join();
  b.join();
  EXPECT_EQ(got1, (std::vector<std::int64_t>{1, 1, 1}));
  EXPECT_EQ(got2, (std::vector<std::int64_t>{-2, -2, -2}));
  EXPECT_EQ(registry->keys_loaded(), 1u);
  EXPECT_EQ(registry->plans_loaded(), 1u);
  srv.stop();
  EXPECT_EQ(srv.sessions_served(), 2u);
}

TEST(Remote, AttentionStepMatchesLocalExecution) {
  checks::AttnFixture f;
  auto plan = f.plan(3);
  auto km = fhe::keygen(f.cfg.crypto);
  attn::LocalExecuteEvaluator local(plan, km);
  ServerSession server;
  LoopbackTransport t(server);
  RemoteEvaluator remote(plan, km, t);
  std::mt19937_64 rng(9);
  for (int pos = 0; pos < 3; ++pos) {
    auto seg = plan->segment_index(0, pos);
    std::vector<std::int64_t> codes;
    for (auto id : plan->segments[seg].inputs) {
      const auto& n = plan->nodes[id];
      codes.push_back(n.lo + static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(n.hi - n.lo + 1)));
    }
    EXPECT_EQ(local.evaluate(seg, codes), remote.evaluate(seg, codes)) << "pos " << pos;
  }
  EXPECT_EQ(remote.pbs_tally(), plan->pbs_count());
  EXPECT_EQ(local.pbs_tally(), plan->pbs_count());
}
