#include <csignal>
#include <fstream>
#include <iostream>
#include <memory>

#include "cli.hpp"
#include "painscope/error.hpp"
#include "painscope/ingest.hpp"
#include "painscope/models.hpp"
#include "painscope/publisher.hpp"
#include "painscope/realtime.hpp"

namespace painscope::cli {

namespace {

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop = true; }

struct RtOptions {
  std::string model;
  std::string publish;
  std::string to;
  std::string events_out;
  double threshold = 0.8;
  double sustain = 10.0;
  double speed = 1.0;
  double duration = 0.0;
  double tick_ms = 125.0;
  std::size_t chunk = 8;
  std::size_t queue = 256;
};

void add_pipeline_options(CLI::App* sub, RtOptions& o, bool model_required) {
  auto* m = sub->add_option("--model", o.model, "Trained model file");
  if (model_required) m->required();
  sub->add_option("--publish", o.publish, "Serve events to subscribers on host:port (JSON lines or WebSocket)");
  sub->add_option("--threshold", o.threshold, "Probability threshold for the label and the alert")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  sub->add_option("--sustain", o.sustain, "Seconds above threshold before alerting")->capture_default_str();
  sub->add_option("--duration", o.duration, "Stop after this many seconds of stream time (0 = until the source ends)")
      ->capture_default_str();
  sub->add_option("--tick-ms", o.tick_ms, "Inference period (ms)")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--events-out", o.events_out, "Also append every message to this JSON-lines file");
  sub->add_option("--queue", o.queue, "Per-subscriber queue length")->capture_default_str();
}

void add_source_pacing(CLI::App* sub, RtOptions& o) {
  sub->add_option("--speed", o.speed, "Playback speed × real time (0 = as fast as possible)")->capture_default_str();
  sub->add_option("--chunk", o.chunk, "Samples per chunk")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--to", o.to, "Forward the stream as EEGS frames to host:port instead of processing it");
}

std::shared_ptr<const TrainedModel> load_or_train(const RtOptions& o, const std::vector<std::string>& channels,
                                                  double rate, std::uint64_t seed) {
  if (!o.model.empty()) return std::make_shared<TrainedModel>(load_model(resolve_input(o.model)));
  // Only the synthetic stream can fall back to a model fitted on synthetic windows.
  spdlog::info("no --model given: fitting svm_rbf on synthetic windows (seed {})", seed);
  SynthConfig sc;
  sc.seed = seed;
  sc.channels = channels;
  PipelineConfig pc;
  pc.source_rate_hz = rate;
  const auto fm = synth_window_features(sc, pc);
  return std::make_shared<TrainedModel>(train_model(fm, Hyperparams::defaults(AlgorithmId::SvmRbf), seed));
}

int process(StreamSource& source, const RtOptions& o, std::shared_ptr<const TrainedModel> model, std::uint64_t seed) {
  PipelineConfig pc;
  pc.source_rate_hz = source.rate_hz();
  pc.threshold = o.threshold;
  WindowPipeline pipeline(pc, source.channels(), std::move(model));
  announce(pipeline.manifest().content_hash, seed);
  AlertEngine alert({o.threshold, o.sustain, 0.05, o.tick_ms / 1000.0});

  std::unique_ptr<Publisher> pub;
  if (!o.publish.empty()) {
    const auto [host, port] = parse_endpoint(o.publish);
    pub = std::make_unique<Publisher>(PublisherConfig{host, port, o.queue});
    spdlog::info("publishing on {}:{}", host, pub->port());
  }
  std::ofstream events;
  if (!o.events_out.empty()) {
    events.open(o.events_out, std::ios::app);
    if (!events) throw Error(ErrorKind::IoError, "cannot open " + o.events_out);
  }
  const auto emit = [&](const std::string& line) {
    if (pub) pub->publish(line);
    else std::cout << line << '\n';
    if (events.is_open()) events << line << '\n';
  };

  LoopConfig lc;
  lc.tick_ms = o.tick_ms;
  lc.max_seconds = o.duration;
  lc.clock = o.speed > 0.0 ? ClockMode::Realtime : ClockMode::Virtual;
  lc.speed = o.speed > 0.0 ? o.speed : 1.0;

  LoopHooks hooks;
  hooks.on_event = [&](const PredictionEvent& e) { emit(prediction_json(e)); };
  hooks.on_alert = [&](const AlertTransition& a) {
    spdlog::warn("alert {} at t={:.3f}s (since {:.3f}s)", a.active ? "ON" : "off", a.t, a.since);
    emit(alert_json(a));
  };
  hooks.on_control = [&](const ControlMessage& m, const SessionSettings& s) {
    spdlog::info("control {} applied", to_string(m.op));
    emit(control_echo_json(m, s));
  };
  hooks.mailbox = pub ? &pub->mailbox() : nullptr;
  hooks.alert = &alert;
  hooks.stop = &g_stop;

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  const auto stats = run_loop(source, pipeline, lc, hooks);
  std::cout << std::flush;
  spdlog::info(
      "{} events, {} missed deadlines, {} dropped samples, {} partial, {} flagged, {} alert transitions; "
      "tick latency mean {:.2f} ms p99 {:.2f} ms max {:.2f} ms; stopped: {}",
      stats.events, stats.missed_deadlines, stats.dropped_frames, stats.partial_windows, stats.flagged_events,
      stats.alerts, stats.latency.mean() / 1000.0, stats.latency.quantile(0.99) / 1000.0, stats.latency.max() / 1000.0,
      stats.stop_reason);
  if (pub) spdlog::info("publisher dropped {} queued messages", pub->dropped_total());
  return stats.stop_reason.rfind("source error", 0) == 0 ? 2 : 0;
}

int forward(StreamSource& source, const std::string& to, std::uint64_t seed) {
  const auto [host, port] = parse_endpoint(to);
  announce(build_manifest(source.channels(), FeatureConfig::realtime_default()).content_hash, seed);
  spdlog::info("streaming {} channels at {} Hz to {}:{}", source.channels().size(), source.rate_hz(), host, port);
  send_stream(source, host, port);
  return 0;
}

RawRecording load_bundle(const std::string& prefix) {
  std::filesystem::path p = prefix;
  if (p.extension() != ".vhdr") p += ".vhdr";
  return load_recording(resolve_input(p));
}

}  // namespace

void add_realtime_commands(CLI::App& app, Common& common, Runner& run) {
  // ---- replay ------------------------------------------------------------
  {
    auto* sub = app.add_subcommand("replay", "Replay a recorded bundle through the live pipeline");
    auto o = std::make_shared<RtOptions>();
    auto bundle = std::make_shared<std::string>();
    sub->add_option("--bundle", *bundle, "Recording prefix (<prefix>.vhdr)")->required();
    add_pipeline_options(sub, *o, false);
    add_source_pacing(sub, *o);
    sub->callback([=, &common, &run] {
      run = [=, &common] {
        const auto rec = load_bundle(*bundle);
        ReplaySource src(rec, o->chunk, o->speed);
        if (!o->to.empty()) return forward(src, o->to, common.seed);
        if (o->model.empty()) throw CLI::ValidationError("--model", "required unless --to is given");
        return process(src, *o, load_or_train(*o, src.channels(), src.rate_hz(), common.seed), common.seed);
      };
    });
  }

  // ---- stream ------------------------------------------------------------
  {
    auto* sub = app.add_subcommand("stream", "Accept one EEGS stream over TCP and run the live pipeline on it");
    auto o = std::make_shared<RtOptions>();
    auto listen = std::make_shared<std::string>("127.0.0.1:8764");
    sub->add_option("--listen", *listen, "host:port to accept the stream on")->capture_default_str();
    add_pipeline_options(sub, *o, true);
    sub->callback([=, &common, &run] {
      run = [=, &common] {
        const auto [host, port] = parse_endpoint(*listen);
        SocketSource src(host, port);
        spdlog::info("waiting for a stream on {}:{}", host, src.port());
        src.open();
        spdlog::info("stream: {} channels at {} Hz", src.channels().size(), src.rate_hz());
        return process(src, *o, load_or_train(*o, src.channels(), src.rate_hz(), common.seed), common.seed);
      };
    });
  }

  // ---- serve -------------------------------------------------------------
  {
    auto* sub = app.add_subcommand("serve", "Monitor a source and publish predictions and alerts to subscribers");
    auto o = std::make_shared<RtOptions>();
    o->publish = "127.0.0.1:8765";
    auto listen = std::make_shared<std::string>();
    auto bundle = std::make_shared<std::string>();
    auto synth = std::make_shared<bool>(false);
    add_pipeline_options(sub, *o, true);
    sub->get_option("--publish")->capture_default_str();
    auto* l = sub->add_option("--listen", *listen, "Accept an EEGS stream on host:port (default 127.0.0.1:8764)");
    auto* b = sub->add_option("--bundle", *bundle, "Replay a recording instead");
    auto* s = sub->add_flag("--synth", *synth, "Use the synthetic source instead");
    l->excludes(b)->excludes(s);
    b->excludes(s);
    sub->add_option("--speed", o->speed, "Replay/synthetic speed × real time")->capture_default_str();
    sub->callback([=, &common, &run] {
      run = [=, &common] {
        auto model = std::make_shared<TrainedModel>(load_model(resolve_input(o->model)));
        if (!bundle->empty()) {
          const auto rec = load_bundle(*bundle);
          ReplaySource src(rec, o->chunk, o->speed);
          return process(src, *o, model, common.seed);
        }
        if (*synth) {
          SynthConfig sc;
          sc.seed = common.seed;
          sc.fs_hz = 128.0;
          SyntheticSource src(sc, {}, o->chunk, o->speed);
          return process(src, *o, model, common.seed);
        }
        const auto [host, port] = parse_endpoint(listen->empty() ? "127.0.0.1:8764" : *listen);
        SocketSource src(host, port);
        spdlog::info("waiting for a stream on {}:{}", host, src.port());
        src.open();
        return process(src, *o, model, common.seed);
      };
    });
  }

  // ---- synth-stream ------------------------------------------------------
  {
    auto* sub = app.add_subcommand("synth-stream", "Generate live synthetic EEG with the pain signature on a schedule");
    auto o = std::make_shared<RtOptions>();
    auto sched = std::make_shared<SyntheticSource::Schedule>();
    auto rate = std::make_shared<double>(128.0);
    auto subject = std::make_shared<std::size_t>(0);
    add_pipeline_options(sub, *o, false);
    add_source_pacing(sub, *o);
    sub->add_option("--rate", *rate, "Sampling rate (Hz)")->capture_default_str();
    sub->add_option("--off", sched->off_seconds, "Seconds without the signature per cycle")->capture_default_str();
    sub->add_option("--on", sched->on_seconds, "Seconds with the signature per cycle")->capture_default_str();
    sub->add_option("--subject", *subject, "Synthetic subject index")->capture_default_str();
    sub->callback([=, &common, &run] {
      run = [=, &common] {
        SynthConfig sc;
        sc.seed = common.seed;
        sc.fs_hz = *rate;
        SyntheticSource src(sc, *sched, o->chunk, o->speed, o->to.empty() ? 0.0 : o->duration, *subject);
        if (!o->to.empty()) return forward(src, o->to, common.seed);
        return process(src, *o, load_or_train(*o, src.channels(), src.rate_hz(), common.seed), common.seed);
      };
    });
  }
}

}  // namespace painscope::cli
