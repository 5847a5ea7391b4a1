#include <fstream>
#include <iostream>
#include <memory>

#include "cli.hpp"
#include "painscope/error.hpp"
#include "painscope/evaluation.hpp"
#include "painscope/feature_config.hpp"
#include "painscope/features.hpp"
#include "painscope/ingest.hpp"
#include "painscope/models.hpp"
#include "painscope/preprocess.hpp"

namespace painscope::cli {

namespace {

namespace fs = std::filesystem;

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
}

std::string epoch_manifest_hash(const std::vector<std::string>& channels) {
  return build_manifest(channels, FeatureConfig::epoch_default()).content_hash;
}

// Appends `more` to `into`; both must share the channel table.
void merge(EpochSet& into, EpochSet&& more, const std::string& origin) {
  if (into.channel_names.empty() && into.epochs.empty()) {
    into = std::move(more);
    return;
  }
  if (more.channel_names != into.channel_names)
    throw Error(ErrorKind::ChannelMismatch, origin + " has a different channel table than earlier inputs");
  into.skipped_markers += more.skipped_markers;
  for (auto& e : more.epochs) into.epochs.push_back(std::move(e));
}

bool is_epoch_cache(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  char magic[8] = {};
  in.read(magic, 8);
  return in && std::string_view(magic, 8) == kEpochCacheMagic;
}

void log_set(const EpochSet& set) {
  spdlog::info("{} epochs ({} low, {} high) from {} subjects, {} markers skipped", set.epochs.size(),
               set.count(PainLabel::Low), set.count(PainLabel::High), set.subjects().size(), set.skipped_markers);
}

struct EpochOptions {
  double start = 0.0;
  double seconds = 4.0;
  EpochConfig config() const {
    EpochConfig c;
    c.start_seconds = start;
    c.epoch_seconds = seconds;
    return c;
  }
};

void add_epoch_options(CLI::App* sub, EpochOptions& o) {
  sub->add_option("--epoch-start", o.start, "Epoch start relative to the stimulus (s)")->capture_default_str();
  sub->add_option("--epoch-seconds", o.seconds, "Epoch length (s)")->capture_default_str()->check(CLI::PositiveNumber);
}

}  // namespace

void add_batch_commands(CLI::App& app, Common& common, Runner& run) {
  // ---- ingest ------------------------------------------------------------
  {
    auto* sub = app.add_subcommand("ingest", "Parse BrainVision bundles and cut labelled epochs into an epoch cache");
    auto inputs = std::make_shared<std::vector<std::string>>();
    auto out = std::make_shared<std::string>();
    auto subject = std::make_shared<std::string>();
    auto ep = std::make_shared<EpochOptions>();
    sub->add_option("headers", *inputs, "One .vhdr per recording")->required();
    sub->add_option("-o,--out", *out, "Epoch cache to write")->required();
    sub->add_option("--subject", *subject, "Subject id (single input only; default: file stem)");
    add_epoch_options(sub, *ep);
    sub->callback([=, &common, &run] {
      run = [=, &common] {
        if (!subject->empty() && inputs->size() != 1)
          throw CLI::ValidationError("--subject", "only valid with a single input");
        EpochSet set;
        for (const auto& in : *inputs) {
          const auto rec = load_recording(resolve_input(in), subject->empty() ? std::nullopt : std::optional(*subject));
          spdlog::info("{}: {} channels, {} samples at {} Hz, {} markers", in, rec.header.channel_count,
                       rec.n_samples(), rec.header.sampling_rate_hz, rec.markers.size());
          merge(set, extract_epochs(rec, ep->config()), in);
        }
        announce(epoch_manifest_hash(set.channel_names), common.seed);
        log_set(set);
        write_epoch_cache(set, *out);
        return 0;
      };
    });
  }

  // ---- preprocess --------------------------------------------------------
  {
    auto* sub = app.add_subcommand(
        "preprocess", "Filter, resample, mask bad channels and reject artifacts; writes an epoch cache");
    auto inputs = std::make_shared<std::vector<std::string>>();
    auto out = std::make_shared<std::string>();
    auto cfg = std::make_shared<PreprocessConfig>();
    auto ep = std::make_shared<EpochOptions>();
    sub->add_option("inputs", *inputs, "BrainVision .vhdr files or epoch caches")->required();
    sub->add_option("-o,--out", *out, "Epoch cache to write")->required();
    sub->add_option("--highpass", cfg->filter.highpass_cutoff_hz, "High-pass cutoff (Hz)")->capture_default_str();
    sub->add_option("--notch", cfg->filter.notch_hz, "Notch centre (Hz)")->capture_default_str();
    sub->add_option("--target-rate", cfg->target_rate_hz, "Output sampling rate (Hz)")->capture_default_str();
    sub->add_option("--ptp-threshold", cfg->ptp_threshold_uv, "Artifact peak-to-peak limit (µV)")->capture_default_str();
    sub->add_option("--z-threshold", cfg->z_threshold, "Bad-channel robust z limit")->capture_default_str();
    add_epoch_options(sub, *ep);
    sub->callback([=, &common, &run] {
      run = [=, &common] {
        EpochSet set;
        for (const auto& in_name : *inputs) {
          const auto in = resolve_input(in_name);
          if (is_epoch_cache(in)) {
            // A 4-s epoch is shorter than the high-pass FIR needs, so cached epochs are taken as
            // already filtered; only masking and rejection apply to them.
            EpochSet cached = read_epoch_cache(in);
            spdlog::info("{}: epoch cache input, filters and resampling skipped", in_name);
            for (auto& e : cached.epochs) {
              const auto q = detect_bad_channels(e.samples, cfg->z_threshold);
              for (std::size_t c = 0; c < e.channel_mask.size(); ++c) e.channel_mask[c] = e.channel_mask[c] && !q.bad_mask[c];
            }
            merge(set, std::move(cached), in.string());
            continue;
          }
          const auto rec = load_recording(in);
          auto pre = preprocess_recording(rec, *cfg);
          spdlog::info("{}: {} bad channel(s)", in_name, pre.quality.bad_count());
          auto epochs = extract_epochs(pre.recording, ep->config());
          apply_channel_mask(epochs, pre.quality.bad_mask);
          merge(set, std::move(epochs), in.string());
        }
        const auto rejected = reject_artifact_epochs(set, cfg->ptp_threshold_uv);
        spdlog::info("artifact rejection dropped {} epochs ({:.1f}%)", rejected.rejected, 100.0 * rejected.rejection_rate);
        announce(epoch_manifest_hash(rejected.kept.channel_names), common.seed);
        log_set(rejected.kept);
        write_epoch_cache(rejected.kept, *out);
        return 0;
      };
    });
  }

  // ---- featurize ---------------------------------------------------------
  {
    auto* sub = app.add_subcommand("featurize", "Compute the 537-slot feature matrix from an epoch cache");
    auto in = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto manifest_out = std::make_shared<std::string>();
    auto config = std::make_shared<std::string>();
    auto config_out = std::make_shared<std::string>();
    sub->add_option("epochs", *in, "Epoch cache")->required();
    sub->add_option("-o,--out", *out, "Feature matrix to write")->required();
    sub->add_option("--manifest-out", *manifest_out, "Write the slot manifest (TSV)");
    sub->add_option("--config", *config, "Feature config file (JSON)");
    sub->add_option("--config-out", *config_out, "Write the effective feature config");
    sub->callback([=, &common, &run] {
      run = [=, &common] {
        const FeatureConfig cfg = config->empty() ? FeatureConfig::epoch_default() : load_feature_config(resolve_input(*config));
        const EpochSet set = read_epoch_cache(resolve_input(*in));
        const auto manifest = build_manifest(set.channel_names, cfg);
        announce(manifest.content_hash, common.seed);
        if (manifest.padded() || manifest.truncated())
          spdlog::warn("native slot count {} is padded/truncated to {}", manifest.native_slots, kFeatureSlots);
        const auto fm = featurize(set, cfg, manifest);
        write_feature_matrix(fm, *out);
        if (!manifest_out->empty()) write_text(*manifest_out, manifest.to_text());
        if (!config_out->empty()) write_text(*config_out, feature_config_json(cfg));
        spdlog::info("{} rows × {} slots", fm.rows(), fm.values.cols());
        return 0;
      };
    });
  }

  // Checks a feature matrix against an expected manifest hash or manifest file.
  const auto check_manifest = [](const FeatureMatrix& fm, const std::string& expected) {
    if (expected.empty()) return;
    std::string hash = expected;
    if (fs::exists(expected)) {
      std::ifstream in(expected);
      std::string line;
      hash.clear();
      while (std::getline(in, line))
        if (line.rfind("# content_hash\t", 0) == 0) hash = line.substr(15);
      if (hash.empty()) throw Error(ErrorKind::InvalidArgument, expected + " is not a manifest file");
    }
    if (hash != fm.manifest_hash)
      throw Error(ErrorKind::ManifestMismatch, "feature matrix manifest " + fm.manifest_hash + " differs from expected " + hash);
  };

  // ---- train -------------------------------------------------------------
  {
    auto* sub = app.add_subcommand("train", "Fit one classifier on a whole feature matrix");
    auto in = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto algorithm = std::make_shared<std::string>("svm_rbf");
    auto hyper = std::make_shared<std::vector<std::string>>();
    auto manifest = std::make_shared<std::string>();
    sub->add_option("features", *in, "Feature matrix")->required();
    sub->add_option("-o,--out", *out, "Model file to write")->required();
    sub->add_option("--algorithm", *algorithm, "svm_rbf, knn, random_forest, reg_grad_boost, logistic_regression, "
                                               "linear_discriminant, grad_boost or gaussian_nb")
        ->capture_default_str();
    sub->add_option("--hyper", *hyper, "Hyperparameter override key=value (repeatable)");
    sub->add_option("--manifest", *manifest, "Expected manifest (hash or manifest file)");
    sub->callback([=, &common, &run] {
      run = [=, &common] {
        const auto fm = read_feature_matrix(resolve_input(*in));
        announce(fm.manifest_hash, common.seed);
        check_manifest(fm, *manifest);
        Hyperparams hp = Hyperparams::defaults(parse_algorithm(*algorithm));
        for (const auto& h : *hyper) hp.set_assignment(h);
        const auto model = train_model(fm, hp, common.seed);
        save_model(model, *out);
        spdlog::info("{} trained on {} rows in {:.0f} ms", to_string(model.algorithm), fm.rows(), model.meta.train_ms);
        return 0;
      };
    });
  }

  // ---- evaluate ----------------------------------------------------------
  {
    auto* sub = app.add_subcommand("evaluate", "Leave-one-subject-out evaluation of several classifiers");
    auto in = std::make_shared<std::string>();
    auto algorithms = std::make_shared<std::vector<std::string>>();
    auto report_out = std::make_shared<std::string>();
    auto table_out = std::make_shared<std::string>();
    auto hyper = std::make_shared<std::vector<std::string>>();
    auto manifest = std::make_shared<std::string>();
    auto resamples = std::make_shared<std::size_t>(1000);
    sub->add_option("features", *in, "Feature matrix")->required();
    sub->add_option("--algorithms", *algorithms, "Comma-separated subset (default: all eight)")->delimiter(',');
    sub->add_option("--report-out", *report_out, "Machine-readable report (JSON)");
    sub->add_option("--table-out", *table_out, "Also write the table to a file");
    sub->add_option("--hyper", *hyper, "Override algorithm:key=value (repeatable)");
    sub->add_option("--bootstrap", *resamples, "Bootstrap resamples for the CI")->capture_default_str();
    sub->add_option("--manifest", *manifest, "Expected manifest (hash or manifest file)");
    sub->callback([=, &common, &run] {
      run = [=, &common] {
        const auto fm = read_feature_matrix(resolve_input(*in));
        announce(fm.manifest_hash, common.seed);
        check_manifest(fm, *manifest);
        EvalConfig cfg;
        cfg.seed = common.seed;
        cfg.bootstrap_resamples = *resamples;
        if (!algorithms->empty()) {
          cfg.algorithms.clear();
          for (const auto& a : *algorithms) cfg.algorithms.push_back(parse_algorithm(a));
        }
        for (const auto& h : *hyper) {
          const auto colon = h.find(':');
          if (colon == std::string::npos) throw CLI::ValidationError("--hyper", "expected algorithm:key=value");
          const AlgorithmId id = parse_algorithm(h.substr(0, colon));
          auto [it, fresh] = cfg.hyperparams.try_emplace(id, Hyperparams::defaults(id));
          it->second.set_assignment(h.substr(colon + 1));
        }
        const auto report = run_eval(fm, cfg);
        const auto table = format_report_table(report);
        std::cout << table << std::flush;
        if (!table_out->empty()) write_text(*table_out, table);
        if (!report_out->empty()) write_text(*report_out, report_json(report));
        for (const auto& w : report.warnings) spdlog::warn("{}", w);
        return 0;
      };
    });
  }

  // ---- importance --------------------------------------------------------
  {
    auto* sub = app.add_subcommand("importance", "Rank feature slots by LOPO permutation importance");
    auto in = std::make_shared<std::string>();
    auto algorithm = std::make_shared<std::string>("svm_rbf");
    auto repeats = std::make_shared<std::size_t>(10);
    auto top = std::make_shared<std::size_t>(15);
    auto out = std::make_shared<std::string>();
    sub->add_option("features", *in, "Feature matrix")->required();
    sub->add_option("--algorithm", *algorithm, "Classifier to probe")->capture_default_str();
    sub->add_option("--repeats", *repeats, "Permutations per slot")->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--top", *top, "Rows to print")->capture_default_str();
    sub->add_option("-o,--out", *out, "Write the full ranking (TSV)");
    sub->callback([=, &common, &run] {
      run = [=, &common] {
        const auto fm = read_feature_matrix(resolve_input(*in));
        announce(fm.manifest_hash, common.seed);
        // Slot names come from the default montage when the matrix was built on it.
        const FeatureManifest m = build_manifest(default_channels());
        const FeatureManifest* names = m.content_hash == fm.manifest_hash ? &m : nullptr;
        const auto rep = lopo_importance(fm, Hyperparams::defaults(parse_algorithm(*algorithm)), *repeats, common.seed, names);
        std::cout << format_importance(rep, *top) << std::flush;
        if (!out->empty()) write_text(*out, format_importance(rep, rep.entries.size()));
        return 0;
      };
    });
  }

  // ---- synth -------------------------------------------------------------
  {
    auto* sub = app.add_subcommand("synth", "Generate a synthetic labelled epoch cache with planted signatures");
    auto out = std::make_shared<std::string>();
    auto cfg = std::make_shared<SynthConfig>();
    auto bundle_dir = std::make_shared<std::string>();
    auto seconds = std::make_shared<double>(300.0);
    sub->add_option("-o,--out", *out, "Epoch cache to write")->required();
    sub->add_option("--subjects", cfg->n_subjects, "Number of subjects")->capture_default_str();
    sub->add_option("--epochs-per-class", cfg->epochs_per_class, "Epochs per class per subject")->capture_default_str();
    sub->add_option("--rate", cfg->fs_hz, "Sampling rate (Hz)")->capture_default_str();
    sub->add_option("--bundle-dir", *bundle_dir, "Also write one continuous BrainVision recording per subject here");
    sub->add_option("--recording-seconds", *seconds, "Length of each continuous recording (s)")->capture_default_str();
    sub->callback([=, &common, &run] {
      run = [=, &common] {
        SynthConfig c = *cfg;
        c.seed = common.seed;
        announce(epoch_manifest_hash(c.channels), common.seed);
        const auto set = synth_generate(c);
        write_epoch_cache(set, *out);
        log_set(set);
        if (!bundle_dir->empty()) {
          fs::create_directories(*bundle_dir);
          for (std::size_t s = 0; s < c.n_subjects; ++s) {
            const auto rec = synth_recording(c, s, *seconds);
            write_bundle(rec, *bundle_dir, rec.subject_id);
          }
          spdlog::info("wrote {} recordings to {}", c.n_subjects, *bundle_dir);
        }
        return 0;
      };
    });
  }
}

}  // namespace painscope::cli
