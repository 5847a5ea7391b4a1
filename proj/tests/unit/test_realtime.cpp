#include <doctest.h>

#include <cmath>
#include <random>
#include <thread>

#include "json.hpp"
#include "painscope/digest.hpp"
#include "painscope/error.hpp"
#include "painscope/publisher.hpp"
#include "painscope/realtime.hpp"

using namespace painscope;
using nlohmann::json;

namespace {

std::span<const std::uint8_t> bytes(const std::vector<std::uint8_t>& v) { return {v.data(), v.size()}; }
std::span<const std::uint8_t> bytes(const std::string& s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

// A fitted model over random rows; predictions are arbitrary but finite.
std::shared_ptr<const TrainedModel> toy_model(const std::string& manifest_hash) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n01(0.0, 1.0);
  FeatureMatrix fm;
  fm.manifest_hash = manifest_hash;
  fm.values = Matrix(40, kFeatureSlots);
  for (std::size_t i = 0; i < 40; ++i) {
    fm.labels.push_back(i % 2 ? PainLabel::High : PainLabel::Low);
    fm.subjects.push_back("s");
    for (std::size_t j = 0; j < kFeatureSlots; ++j) fm.values(i, j) = n01(rng) + (i % 2 ? 0.3 : 0.0);
  }
  return std::make_shared<TrainedModel>(
      train_model(fm, Hyperparams::defaults(AlgorithmId::LogisticRegression), 1, ExecPolicy::Serial));
}

SynthConfig stream_synth() {
  SynthConfig s;
  s.fs_hz = 128.0;
  return s;
}

WindowPipeline toy_pipeline(const std::vector<std::string>& channels) {
  PipelineConfig cfg;
  WindowPipeline probe(cfg, channels, nullptr);
  return WindowPipeline(cfg, channels, toy_model(probe.manifest().content_hash));
}

class MatrixSource : public StreamSource {
public:
  MatrixSource(std::vector<std::string> ch, double rate, MatrixF data, std::size_t chunk = 8)
      : ch_(std::move(ch)), rate_(rate), data_(std::move(data)), chunk_(chunk) {}
  const std::vector<std::string>& channels() const override { return ch_; }
  double rate_hz() const override { return rate_; }
  std::optional<SourceChunk> next() override {
    if (pos_ >= data_.cols()) return std::nullopt;
    const std::size_t n = std::min(chunk_, data_.cols() - pos_);
    SourceChunk c{pos_, MatrixF(data_.rows(), n)};
    for (std::size_t r = 0; r < data_.rows(); ++r) std::copy_n(data_.row(r).data() + pos_, n, c.samples.row(r).data());
    pos_ += n;
    return c;
  }

private:
  std::vector<std::string> ch_;
  double rate_;
  MatrixF data_;
  std::size_t chunk_;
  std::size_t pos_ = 0;
};

}  // namespace

// ---- ring buffer ---------------------------------------------------------

TEST_CASE("ring buffer keeps the newest samples oldest-first") {
  RingBuffer ring(1, 4);
  for (int v = 1; v <= 6; ++v) {
    Matrix m(1, 1, v);
    ring.push(m);
  }
  const auto w = ring.snapshot();
  CHECK_FALSE(w.partial);
  CHECK(w.end_sample == 6);
  CHECK(std::vector<double>(w.samples.row(0).begin(), w.samples.row(0).end()) == std::vector<double>{3, 4, 5, 6});
}

TEST_CASE("partial ring snapshot is zero-padded at the front") {
  RingBuffer ring(2, 5);
  Matrix m(2, 2);
  m(0, 0) = 1; m(0, 1) = 2; m(1, 0) = 3; m(1, 1) = 4;
  ring.push(m);
  const auto w = ring.snapshot();
  CHECK(w.partial);
  CHECK(std::vector<double>(w.samples.row(0).begin(), w.samples.row(0).end()) == std::vector<double>{0, 0, 0, 1, 2});
  CHECK(std::vector<double>(w.samples.row(1).begin(), w.samples.row(1).end()) == std::vector<double>{0, 0, 0, 3, 4});
  CHECK_THROWS_AS(ring.push(Matrix(3, 1)), Error);
}

TEST_CASE("a chunk larger than the ring keeps its tail") {
  RingBuffer ring(1, 3);
  Matrix m(1, 7);
  for (std::size_t k = 0; k < 7; ++k) m(0, k) = static_cast<double>(k);
  ring.push(m);
  const auto w = ring.snapshot();
  CHECK(std::vector<double>(w.samples.row(0).begin(), w.samples.row(0).end()) == std::vector<double>{4, 5, 6});
}

TEST_CASE("concurrent snapshots never tear") {
  RingBuffer ring(1, 64);
  std::atomic<bool> done{false};
  std::thread writer([&] {
    for (int v = 0; v < 20000; ++v) ring.push(Matrix(1, 8, v));
    done = true;
  });
  std::size_t torn = 0;
  while (!done) {
    const auto w = ring.snapshot();
    if (w.partial) continue;
    // Every sample belongs to one of the last 8 chunks, in non-decreasing order.
    for (std::size_t k = 1; k < 64; ++k) torn += w.samples(0, k) < w.samples(0, k - 1);
    torn += w.samples(0, 63) - w.samples(0, 0) > 7.0;
  }
  writer.join();
  CHECK(torn == 0);
}

// ---- stream frames -------------------------------------------------------

TEST_CASE("EEGS frames round-trip through a byte-at-a-time decoder") {
  const HelloFrame hello{{"Fz", "Cz", "Pz"}, 128.0f};
  MatrixF x(3, 5);
  for (std::size_t i = 0; i < x.storage().size(); ++i) x.storage()[i] = 0.5f * static_cast<float>(i) - 3.0f;
  std::vector<std::uint8_t> stream;
  for (const auto& f : {encode_hello(hello), encode_chunk(42, x), encode_bye()}) stream.insert(stream.end(), f.begin(), f.end());
  CHECK(std::string(stream.begin(), stream.begin() + 4) == "EEGS");

  FrameDecoder dec;
  std::vector<Frame> frames;
  for (auto b : stream) {
    dec.feed({&b, 1});
    while (auto f = dec.next()) frames.push_back(std::move(*f));
  }
  REQUIRE(frames.size() == 3);
  CHECK(frames[0].type == FrameType::Hello);
  CHECK(frames[0].hello == hello);
  CHECK(frames[1].type == FrameType::Chunk);
  CHECK(frames[1].chunk.first_sample == 42);
  CHECK(frames[1].chunk.samples == x);
  CHECK(frames[2].type == FrameType::Bye);
}

TEST_CASE("malformed EEGS input is a protocol error") {
  const auto expect_protocol_error = [](std::vector<std::uint8_t> data) {
    FrameDecoder dec;
    dec.feed(bytes(data));
    try {
      while (dec.next()) {
      }
      FAIL("no error raised");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::ProtocolError);
    }
  };
  auto hello = encode_hello({{"Cz"}, 128.0f});
  auto bad_magic = hello;
  bad_magic[0] = 'X';
  expect_protocol_error(bad_magic);
  auto bad_version = hello;
  bad_version[4] = 9;
  expect_protocol_error(bad_version);
  expect_protocol_error(encode_chunk(0, MatrixF(1, 4)));  // chunk before hello

  auto wrong_width = encode_hello({{"Cz", "Pz"}, 128.0f});
  const auto two_ch = encode_chunk(0, MatrixF(3, 1));
  wrong_width.insert(wrong_width.end(), two_ch.begin(), two_ch.end());
  expect_protocol_error(wrong_width);

  auto unknown = encode_bye();
  unknown[5] = 77;
  expect_protocol_error(unknown);

  auto huge = encode_bye();
  huge[6] = huge[7] = huge[8] = huge[9] = 0xFF;
  expect_protocol_error(huge);
}

// ---- websocket and control -----------------------------------------------

TEST_CASE("websocket accept key matches the RFC example") {
  CHECK(websocket_accept_key("dGhlIHNhbXBsZSBub25jZQ==") == "s3pPLMBiTxaQ9kYGzzhZRbK+xOo=");
  const std::string req =
      "GET /events HTTP/1.1\r\nHost: x\r\nUpgrade: websocket\r\nConnection: Upgrade\r\n"
      "Sec-WebSocket-Key: dGhlIHNhbXBsZSBub25jZQ==\r\nSec-WebSocket-Version: 13\r\n\r\n";
  const auto resp = ws_handshake_response(req);
  REQUIRE(resp);
  CHECK(resp->rfind("HTTP/1.1 101", 0) == 0);
  CHECK(resp->find("Sec-WebSocket-Accept: s3pPLMBiTxaQ9kYGzzhZRbK+xOo=") != std::string::npos);
  CHECK_FALSE(ws_handshake_response(req.substr(0, 40)));
  CHECK_THROWS_AS(ws_handshake_response("GET / HTTP/1.1\r\nHost: x\r\n\r\n"), Error);
}

TEST_CASE("websocket frames round-trip for every length encoding") {
  for (std::size_t n : {0u, 5u, 125u, 126u, 65535u, 65536u, 70000u}) {
    std::string payload(n, 'a');
    for (std::size_t i = 0; i < n; ++i) payload[i] = static_cast<char>('a' + i % 26);
    const auto masked = ws_encode(WsOpcode::Text, payload, std::array<std::uint8_t, 4>{1, 2, 3, 4});
    WsDecoder server(true);
    server.feed(bytes(masked));
    const auto f = server.next();
    REQUIRE(f);
    CHECK(f->opcode == WsOpcode::Text);
    CHECK(f->payload == payload);

    WsDecoder client(false);
    client.feed(bytes(ws_encode(WsOpcode::Binary, payload)));
    const auto g = client.next();
    REQUIRE(g);
    CHECK(g->payload == payload);
  }
  WsDecoder strict(true);
  strict.feed(bytes(ws_encode(WsOpcode::Text, "x")));
  CHECK_THROWS_AS(strict.next(), Error);
}

TEST_CASE("control messages parse and validate") {
  const auto t = parse_control(R"({"type":"control","op":"set_threshold","value":0.7})");
  CHECK(t.op == ControlOp::SetThreshold);
  CHECK(t.value == 0.7);
  CHECK(parse_control(R"({"type":"control","op":"set_sustain","value":5})").value == 5.0);
  CHECK(parse_control(R"({"type":"control","op":"pause"})").op == ControlOp::Pause);
  CHECK(parse_control(R"({"type":"control","op":"resume"})").op == ControlOp::Resume);
  for (const char* bad : {R"({"type":"control","op":"set_threshold","value":1.5})",
                          R"({"type":"control","op":"set_threshold","value":0})",
                          R"({"type":"control","op":"set_sustain","value":-1})",
                          R"({"type":"control","op":"explode"})", R"({"type":"control","op":"set_threshold"})",
                          R"({"type":"hello"})", "not json"})
    CHECK_THROWS_AS(parse_control(bad), Error);
}

// ---- alerting ------------------------------------------------------------

TEST_CASE("alert activates after exactly the sustain period") {
  AlertEngine a;
  std::optional<AlertTransition> on;
  int tick = 0;
  while (!on && tick < 200) {
    ++tick;
    on = a.update(tick * 0.125, 0.9);
  }
  REQUIRE(on);
  CHECK(on->active);
  CHECK(tick == 80);
  CHECK(on->t == doctest::Approx(10.0));
  CHECK(on->since == doctest::Approx(10.0));
}

TEST_CASE("nine seconds above threshold never activates") {
  AlertEngine a;
  int k = 0;
  for (; k < 72; ++k) CHECK_FALSE(a.update((k + 1) * 0.125, 0.9));
  for (; k < 400; ++k) CHECK_FALSE(a.update((k + 1) * 0.125, 0.5));
  CHECK_FALSE(a.active());
}

TEST_CASE("hysteresis holds the alert until the probability clears the band") {
  AlertEngine a;
  int k = 0;
  for (; k < 80; ++k) a.update((k + 1) * 0.125, 0.9);
  REQUIRE(a.active());
  for (int j = 0; j < 40; ++j, ++k) CHECK_FALSE(a.update((k + 1) * 0.125, 0.78));
  CHECK(a.active());
  const auto off = a.update((k + 1) * 0.125, 0.74);
  REQUIRE(off);
  CHECK_FALSE(off->active);
  CHECK(off->since == doctest::Approx(10.0));
  // Re-arming needs a fresh sustained run.
  CHECK_FALSE(a.update(100.0, 0.9));
}

// ---- pipeline and loop ---------------------------------------------------

TEST_CASE("a zero stream produces all-masked events and the loop keeps running") {
  const auto ch = stream_synth().channels;
  auto pipe = toy_pipeline(ch);
  MatrixSource src(ch, 128.0, MatrixF(ch.size(), 128 * 4));
  LoopConfig cfg;
  cfg.clock = ClockMode::Virtual;
  std::vector<PredictionEvent> events;
  const auto stats = run_loop(src, pipe, cfg, {.on_event = [&](const PredictionEvent& e) { events.push_back(e); }});
  CHECK(stats.events == 32);
  CHECK(stats.stop_reason == "source closed");
  std::size_t all_masked = 0;
  for (const auto& e : events) {
    all_masked += e.has_flag("all_masked");
    CHECK(std::isfinite(e.probability));
  }
  CHECK(all_masked >= 24);  // every full window
}

TEST_CASE("non-finite samples are masked without crashing the loop") {
  const auto ch = stream_synth().channels;
  auto pipe = toy_pipeline(ch);
  SyntheticSource synth(stream_synth(), {}, 8, 0.0, 4.0);
  MatrixF data(ch.size(), 128 * 4);
  std::size_t pos = 0;
  while (auto c = synth.next()) {
    for (std::size_t r = 0; r < ch.size(); ++r) std::copy_n(c->samples.row(r).data(), c->samples.cols(), data.row(r).data() + pos);
    pos += c->samples.cols();
  }
  for (std::size_t k = 200; k < 300; ++k) data(3, k) = std::numeric_limits<float>::quiet_NaN();
  MatrixSource src(ch, 128.0, data);
  LoopConfig cfg;
  cfg.clock = ClockMode::Virtual;
  bool saw_mask = false;
  const auto stats = run_loop(src, pipe, cfg, {.on_event = [&](const PredictionEvent& e) {
                                                 CHECK(std::isfinite(e.probability));
                                                 for (const auto& m : e.masked) saw_mask |= m == ch[3];
                                               }});
  CHECK(stats.events == 32);
  CHECK(saw_mask);
}

TEST_CASE("virtual clock emits eight events per second with strictly increasing time") {
  const auto ch = stream_synth().channels;
  auto pipe = toy_pipeline(ch);
  SyntheticSource src(stream_synth(), {}, 8, 0.0);
  LoopConfig cfg;
  cfg.clock = ClockMode::Virtual;
  cfg.max_seconds = 60.0;
  double last_t = 0.0;
  std::uint64_t last_end = 0;
  bool monotonic = true;
  const auto stats = run_loop(src, pipe, cfg, {.on_event = [&](const PredictionEvent& e) {
                                                 monotonic = monotonic && e.t > last_t && e.window_end_sample == last_end + 16;
                                                 last_t = e.t;
                                                 last_end = e.window_end_sample;
                                               }});
  CHECK(stats.events == 480);
  CHECK(stats.dropped_frames == 0);
  CHECK(stats.partial_windows == 7);
  CHECK(monotonic);
}

TEST_CASE("a slow feature stage counts missed deadlines and keeps timestamps monotonic") {
  const auto ch = stream_synth().channels;
  auto pipe = toy_pipeline(ch);
  int n = 0;
  pipe.feature_hook = [&] {
    if (++n % 4 == 0) std::this_thread::sleep_for(std::chrono::milliseconds(140));
  };
  SyntheticSource src(stream_synth(), {}, 8, 1.0);
  LoopConfig cfg;
  cfg.max_seconds = 2.0;
  double last_t = -1.0;
  bool monotonic = true;
  const auto stats = run_loop(src, pipe, cfg, {.on_event = [&](const PredictionEvent& e) {
                                                 monotonic = monotonic && e.t > last_t;
                                                 last_t = e.t;
                                               }});
  CHECK(stats.missed_deadlines >= 3);
  CHECK(monotonic);
  CHECK(stats.events >= 10);
}

TEST_CASE("controls apply at the next tick and pause freezes the alert") {
  const auto ch = stream_synth().channels;
  auto pipe = toy_pipeline(ch);
  SyntheticSource src(stream_synth(), {}, 8, 0.0);
  ControlMailbox mailbox;
  AlertEngine alert;
  LoopConfig cfg;
  cfg.clock = ClockMode::Virtual;
  cfg.max_seconds = 3.0;
  std::vector<std::string> echoes;
  std::size_t paused = 0;
  std::size_t n = 0;
  const auto stats = run_loop(src, pipe, cfg,
                              {.on_event =
                                   [&](const PredictionEvent& e) {
                                     paused += e.has_flag("paused");
                                     if (++n == 8) {
                                       mailbox.post({ControlOp::SetThreshold, 0.6});
                                       mailbox.post({ControlOp::Pause, 0});
                                     }
                                     if (n == 16) mailbox.post({ControlOp::Resume, 0});
                                     if (n > 8) CHECK(e.threshold == 0.6);
                                   },
                               .on_control = [&](const ControlMessage& m,
                                                 const SessionSettings& s) { echoes.push_back(control_echo_json(m, s)); },
                               .mailbox = &mailbox,
                               .alert = &alert});
  CHECK(stats.events == 24);
  CHECK(paused == 8);
  REQUIRE(echoes.size() == 3);
  const auto j = json::parse(echoes[1]);
  CHECK(j["op"] == "pause");
  CHECK(j["settings"]["paused"] == true);
  CHECK(j["settings"]["threshold"] == 0.6);
  CHECK(alert.config().threshold == 0.6);
}

TEST_CASE("a model trained on another manifest is refused") {
  const auto ch = stream_synth().channels;
  CHECK_THROWS_AS(WindowPipeline(PipelineConfig{}, ch, toy_model("deadbeef")), Error);
  WindowPipeline pipe(PipelineConfig{}, ch, nullptr);
  CHECK_THROWS_AS(pipe.tick(RingBuffer(ch.size(), 128).snapshot(), 0.0), Error);
}

TEST_CASE("streamed features equal the offline computation on the same samples") {
  SynthConfig sc = stream_synth();
  const auto rec = synth_recording(sc, 1, 30.0);
  auto pipe = toy_pipeline(rec.header.channel_names);
  OfflineWindowReference ref(pipe.config(), rec.header.channel_names);
  ReplaySource src(rec, 8, 0.0);
  LoopConfig cfg;
  cfg.clock = ClockMode::Virtual;
  double worst = 0.0;
  std::size_t compared = 0;
  run_loop(src, pipe, cfg, {.on_event = [&](const PredictionEvent& e) {
                              if (e.has_flag("partial_window")) return;
                              const auto off = ref.features(rec.samples, e.window_end_sample);
                              const auto& on = pipe.last_features();
                              for (std::size_t j = 0; j < kFeatureSlots; ++j) {
                                const double a = on.values[j], b = off.values[j];
                                if (std::isnan(a) || std::isnan(b)) {
                                  worst = std::max(worst, std::isnan(a) == std::isnan(b) ? 0.0 : 1.0);
                                  continue;
                                }
                                worst = std::max(worst, std::abs(a - b) / std::max(1.0, std::abs(b)));
                              }
                              ++compared;
                            }});
  CHECK(compared == 233);
  CHECK(worst <= 1e-9);
}

TEST_CASE("prediction json carries every stage latency") {
  PredictionEvent e;
  e.t = 1.25;
  e.probability = 0.4;
  e.masked = {"T7"};
  e.flags = {"pad_truncate"};
  const auto j = json::parse(prediction_json(e));
  CHECK(j["type"] == "prediction");
  CHECK(j["label"] == "low_pain");
  for (const char* k : {"resample", "filter", "features", "standardize", "infer", "total"})
    CHECK(j["latency_us"].contains(k));
  CHECK(j["masked"][0] == "T7");
  const auto a = json::parse(alert_json({true, 12.0, 12.0}));
  CHECK(a["type"] == "alert");
  CHECK(a["active"] == true);
}

// ---- sockets -------------------------------------------------------------

TEST_CASE("socket source receives a streamed recording intact") {
  SynthConfig sc = stream_synth();
  SocketSource sink("127.0.0.1", 0);
  const auto rec = synth_recording(sc, 0, 2.0);
  std::thread sender([&] {
    ReplaySource src(rec, 16, 0.0);
    send_stream(src, "127.0.0.1", sink.port());
  });
  sink.open();
  CHECK(sink.channels() == rec.header.channel_names);
  CHECK(sink.rate_hz() == 128.0);
  std::size_t got = 0;
  bool equal = true;
  while (auto c = sink.next()) {
    CHECK(c->first_sample == got);
    for (std::size_t r = 0; r < c->samples.rows(); ++r)
      for (std::size_t k = 0; k < c->samples.cols(); ++k)
        equal = equal && c->samples(r, k) == static_cast<float>(rec.samples(r, got + k));
    got += c->samples.cols();
  }
  sender.join();
  CHECK(got == rec.n_samples());
  CHECK(equal);
}

TEST_CASE("publisher delivers lines, accepts controls and reports errors") {
  Publisher pub({.detect_timeout_ms = 50});
  LineClient client("127.0.0.1", pub.port());
  for (int i = 0; i < 100 && pub.subscriber_count() == 0; ++i) std::this_thread::sleep_for(std::chrono::milliseconds(10));
  std::this_thread::sleep_for(std::chrono::milliseconds(100));
  pub.publish(R"({"type":"prediction","p":0.5})");
  const auto line = client.read_line(2000);
  REQUIRE(line);
  CHECK(json::parse(*line)["p"] == 0.5);

  client.send_raw("{\"type\":\"control\",\"op\":\"set_sustain\",\"value\":4}\n");
  std::vector<ControlMessage> got;
  for (int i = 0; i < 200 && got.empty(); ++i) {
    got = pub.mailbox().drain();
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  REQUIRE(got.size() == 1);
  CHECK(got[0].op == ControlOp::SetSustain);
  CHECK(got[0].value == 4.0);

  client.send_raw("{\"type\":\"control\",\"op\":\"set_threshold\",\"value\":7}\n");
  const auto err = client.read_line(2000);
  REQUIRE(err);
  CHECK(json::parse(*err)["type"] == "error");
}

TEST_CASE("a slow subscriber loses the oldest events behind a gap notice") {
  Publisher pub({.queue_capacity = 4, .detect_timeout_ms = 50});
  LineClient client("127.0.0.1", pub.port());
  // The subscriber does not start draining until its protocol is known.
  for (int i = 0; i < 100 && pub.subscriber_count() == 0; ++i) std::this_thread::sleep_for(std::chrono::milliseconds(10));
  for (int i = 0; i < 10; ++i) pub.publish(json{{"seq", i}}.dump());
  std::vector<json> lines;
  while (auto l = client.read_line(1000)) lines.push_back(json::parse(*l));
  REQUIRE(lines.size() == 5);
  CHECK(lines[0]["type"] == "gap");
  CHECK(lines[0]["dropped"] == 6);
  CHECK(lines[1]["seq"] == 6);
  CHECK(lines[4]["seq"] == 9);
  CHECK(pub.dropped_total() == 6);
}

TEST_CASE("browsers are upgraded to websocket framing") {
  Publisher pub;
  LineClient client("127.0.0.1", pub.port());
  client.send_raw(
      "GET / HTTP/1.1\r\nHost: localhost\r\nUpgrade: websocket\r\nConnection: Upgrade\r\n"
      "Sec-WebSocket-Key: dGhlIHNhbXBsZSBub25jZQ==\r\nSec-WebSocket-Version: 13\r\n\r\n");
  std::string resp;
  while (resp.find("\r\n\r\n") == std::string::npos) {
    const auto part = client.read_some(2000);
    REQUIRE_FALSE(part.empty());
    resp += part;
  }
  CHECK(resp.rfind("HTTP/1.1 101", 0) == 0);
  std::string rest = resp.substr(resp.find("\r\n\r\n") + 4);

  pub.publish(R"({"type":"alert","active":true})");
  WsDecoder dec(false);
  dec.feed(bytes(rest));
  std::optional<WsFrame> f;
  while (!(f = dec.next())) {
    const auto part = client.read_some(2000);
    REQUIRE_FALSE(part.empty());
    dec.feed(bytes(part));
  }
  CHECK(f->opcode == WsOpcode::Text);
  CHECK(json::parse(f->payload)["active"] == true);

  const auto ctl = ws_encode(WsOpcode::Text, R"({"type":"control","op":"pause"})", std::array<std::uint8_t, 4>{9, 8, 7, 6});
  client.send_raw({reinterpret_cast<const char*>(ctl.data()), ctl.size()});
  std::vector<ControlMessage> got;
  for (int i = 0; i < 200 && got.empty(); ++i) {
    got = pub.mailbox().drain();
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  REQUIRE(got.size() == 1);
  CHECK(got[0].op == ControlOp::Pause);
}

TEST_CASE("endpoints parse host and port") {
  CHECK(parse_endpoint("0.0.0.0:8765") == std::pair<std::string, std::uint16_t>{"0.0.0.0", 8765});
  CHECK(parse_endpoint("9000").second == 9000);
  CHECK_THROWS_AS(parse_endpoint("host:port"), Error);
  CHECK_THROWS_AS(parse_endpoint("1:70000"), Error);
}
