#include <algorithm>

#include "painscope/binary_io.hpp"
#include "painscope/digest.hpp"
#include "painscope/error.hpp"
#include "painscope/models.hpp"

namespace painscope {
namespace {

enum class ParamTag : std::uint8_t { Svm = 1, Knn, Ensemble, Linear, NaiveBayes };

void put_matrix(ByteWriter& w, const Matrix& m) {
  w.put(static_cast<std::uint64_t>(m.rows()));
  w.put(static_cast<std::uint64_t>(m.cols()));
  for (double v : m.storage()) w.put(v);
}

Matrix get_matrix(ByteReader& r) {
  const auto rows = r.get<std::uint64_t>();
  const auto cols = r.get<std::uint64_t>();
  if (cols != 0 && rows > r.remaining() / (cols * sizeof(double)))
    throw Error(ErrorKind::CorruptPayload, "matrix size exceeds payload");
  Matrix m(rows, cols);
  for (auto& v : m.storage()) v = r.get<double>();
  return m;
}

void put_doubles(ByteWriter& w, const std::vector<double>& v) { w.put_vector<double>(v); }

void put_tree(ByteWriter& w, const Tree& t) {
  w.put(static_cast<std::uint64_t>(t.nodes.size()));
  for (const auto& n : t.nodes) {
    w.put(n.feature);
    w.put(n.threshold);
    w.put(n.left);
    w.put(n.right);
    w.put(n.value);
  }
}

Tree get_tree(ByteReader& r) {
  const auto count = r.get<std::uint64_t>();
  constexpr std::size_t node_bytes = 4 + 8 + 4 + 4 + 8;
  if (count > r.remaining() / node_bytes) throw Error(ErrorKind::CorruptPayload, "tree size exceeds payload");
  Tree t;
  t.nodes.resize(count);
  for (auto& n : t.nodes) {
    n.feature = r.get<std::int32_t>();
    n.threshold = r.get<double>();
    n.left = r.get<std::int32_t>();
    n.right = r.get<std::int32_t>();
    n.value = r.get<double>();
  }
  const auto limit = static_cast<std::int32_t>(count);
  for (std::int32_t i = 0; i < limit; ++i) {
    const auto& n = t.nodes[i];
    if (n.feature >= 0 && (n.left <= i || n.right <= i || n.left >= limit || n.right >= limit))
      throw Error(ErrorKind::CorruptPayload, "tree links out of range");
  }
  if (count == 0) throw Error(ErrorKind::CorruptPayload, "empty tree");
  return t;
}

void put_params(ByteWriter& w, const ModelParams& params) {
  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, std::monostate>) {
          throw Error(ErrorKind::NotFitted, "cannot serialize an unfitted model");
        } else if constexpr (std::is_same_v<P, SvmParams>) {
          w.put(static_cast<std::uint8_t>(ParamTag::Svm));
          w.put(static_cast<std::uint64_t>(p.dims));
          put_matrix(w, p.support_vectors);
          put_doubles(w, p.coef);
          w.put(p.bias);
          w.put(p.gamma);
          w.put(p.platt_a);
          w.put(p.platt_b);
          w.put(static_cast<std::uint64_t>(p.iterations));
          w.put(static_cast<std::uint8_t>(p.converged));
        } else if constexpr (std::is_same_v<P, KnnParams>) {
          w.put(static_cast<std::uint8_t>(ParamTag::Knn));
          w.put(static_cast<std::uint64_t>(p.k));
          put_matrix(w, p.train);
          w.put_vector<std::uint8_t>(p.labels);
        } else if constexpr (std::is_same_v<P, EnsembleParams>) {
          w.put(static_cast<std::uint8_t>(ParamTag::Ensemble));
          w.put(static_cast<std::uint8_t>(p.boosted));
          w.put(p.base_score);
          w.put(static_cast<std::uint64_t>(p.trees.size()));
          for (const auto& t : p.trees) put_tree(w, t);
        } else if constexpr (std::is_same_v<P, LinearParams>) {
          w.put(static_cast<std::uint8_t>(ParamTag::Linear));
          put_doubles(w, p.weights);
          w.put(p.bias);
        } else {
          w.put(static_cast<std::uint8_t>(ParamTag::NaiveBayes));
          for (int c = 0; c < 2; ++c) {
            put_doubles(w, p.mean[c]);
            put_doubles(w, p.var[c]);
            w.put(p.log_prior[c]);
          }
          w.put(p.epsilon);
        }
      },
      params);
}

ModelParams get_params(ByteReader& r, AlgorithmId algorithm) {
  const auto tag = static_cast<ParamTag>(r.get<std::uint8_t>());
  const auto expect = [&](ParamTag want) {
    if (tag != want) throw Error(ErrorKind::CorruptPayload, "parameter block does not match the algorithm");
  };
  switch (algorithm) {
    case AlgorithmId::SvmRbf: {
      expect(ParamTag::Svm);
      SvmParams p;
      p.dims = r.get<std::uint64_t>();
      p.support_vectors = get_matrix(r);
      p.coef = r.get_vector<double>();
      p.bias = r.get<double>();
      p.gamma = r.get<double>();
      p.platt_a = r.get<double>();
      p.platt_b = r.get<double>();
      p.iterations = r.get<std::uint64_t>();
      p.converged = r.get<std::uint8_t>() != 0;
      if (p.coef.size() != p.support_vectors.rows() || (p.support_vectors.rows() > 0 && p.support_vectors.cols() != p.dims))
        throw Error(ErrorKind::CorruptPayload, "support vector block inconsistent");
      return p;
    }
    case AlgorithmId::Knn: {
      expect(ParamTag::Knn);
      KnnParams p;
      p.k = r.get<std::uint64_t>();
      p.train = get_matrix(r);
      p.labels = r.get_vector<std::uint8_t>();
      if (p.labels.size() != p.train.rows() || p.k == 0 || p.k > p.train.rows())
        throw Error(ErrorKind::CorruptPayload, "knn block inconsistent");
      return p;
    }
    case AlgorithmId::RandomForest:
    case AlgorithmId::GradBoost:
    case AlgorithmId::RegGradBoost: {
      expect(ParamTag::Ensemble);
      EnsembleParams p;
      p.boosted = r.get<std::uint8_t>() != 0;
      p.base_score = r.get<double>();
      const auto count = r.get<std::uint64_t>();
      if (count > r.remaining() / 8) throw Error(ErrorKind::CorruptPayload, "tree count exceeds payload");
      p.trees.reserve(count);
      for (std::uint64_t t = 0; t < count; ++t) p.trees.push_back(get_tree(r));
      return p;
    }
    case AlgorithmId::LogisticRegression:
    case AlgorithmId::LinearDiscriminant: {
      expect(ParamTag::Linear);
      LinearParams p;
      p.weights = r.get_vector<double>();
      p.bias = r.get<double>();
      return p;
    }
    case AlgorithmId::GaussianNb: {
      expect(ParamTag::NaiveBayes);
      NaiveBayesParams p;
      for (int c = 0; c < 2; ++c) {
        p.mean[c] = r.get_vector<double>();
        p.var[c] = r.get_vector<double>();
        p.log_prior[c] = r.get<double>();
      }
      p.epsilon = r.get<double>();
      if (p.mean[0].size() != p.var[0].size() || p.mean[1].size() != p.mean[0].size() ||
          p.var[1].size() != p.mean[0].size())
        throw Error(ErrorKind::CorruptPayload, "naive Bayes block inconsistent");
      return p;
    }
  }
  throw Error(ErrorKind::CorruptPayload, "unknown algorithm byte");
}

}  // namespace

std::vector<std::uint8_t> serialize(const TrainedModel& model) {
  ByteWriter w;
  w.put_raw(kModelFileMagic);
  w.put(kModelFileVersion);
  w.put(static_cast<std::uint8_t>(model.algorithm));
  const auto& hp = model.hyperparams.values();
  w.put(static_cast<std::uint32_t>(hp.size()));
  for (const auto& [k, v] : hp) {
    w.put_string(k);
    w.put_string(v);
  }
  const auto& st = model.standardization;
  w.put(static_cast<std::uint8_t>(st.fitted));
  w.put(st.sd_floor);
  put_doubles(w, st.mean);
  put_doubles(w, st.sd);
  std::vector<std::uint8_t> constant(st.constant.begin(), st.constant.end());
  w.put_vector<std::uint8_t>(constant);
  w.put_string(model.manifest_hash);
  w.put(model.meta.seed);
  w.put_string(model.meta.fold_id);
  w.put(model.meta.train_ms);
  put_doubles(w, model.meta.loss_history);
  put_params(w, model.params);
  auto bytes = w.take();
  const auto digest = sha256(bytes);
  bytes.insert(bytes.end(), digest.begin(), digest.end());
  return bytes;
}

TrainedModel deserialize(std::span<const std::uint8_t> bytes) {
  constexpr std::size_t header = kModelFileMagic.size() + sizeof(std::uint16_t);
  if (bytes.size() < header + 32) throw Error(ErrorKind::CorruptPayload, "model file too short");
  if (!std::equal(kModelFileMagic.begin(), kModelFileMagic.end(), bytes.begin()))
    throw Error(ErrorKind::CorruptPayload, "not a model file");
  ByteReader head(bytes.subspan(kModelFileMagic.size(), sizeof(std::uint16_t)));
  const auto version = head.get<std::uint16_t>();
  if (version != kModelFileVersion)
    throw Error(ErrorKind::VersionMismatch, "model file version " + std::to_string(version) + ", expected " +
                                                std::to_string(kModelFileVersion));
  const auto body = bytes.first(bytes.size() - 32);
  const auto digest = sha256(body);
  if (!std::equal(digest.begin(), digest.end(), bytes.end() - 32))
    throw Error(ErrorKind::CorruptPayload, "model file digest mismatch");

  ByteReader r(body.subspan(header));
  TrainedModel m;
  const auto algo = r.get<std::uint8_t>();
  if (algo > static_cast<std::uint8_t>(AlgorithmId::GaussianNb))
    throw Error(ErrorKind::CorruptPayload, "unknown algorithm byte");
  m.algorithm = static_cast<AlgorithmId>(algo);
  m.hyperparams = Hyperparams::defaults(m.algorithm);
  const auto n_hp = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_hp; ++i) {
    const auto key = r.get_string();
    const auto value = r.get_string();
    try {
      m.hyperparams.set(key, value);
    } catch (const Error& e) {
      throw Error(ErrorKind::CorruptPayload, e.what());
    }
  }
  auto& st = m.standardization;
  st.fitted = r.get<std::uint8_t>() != 0;
  st.sd_floor = r.get<double>();
  st.mean = r.get_vector<double>();
  st.sd = r.get_vector<double>();
  const auto constant = r.get_vector<std::uint8_t>();
  st.constant.assign(constant.begin(), constant.end());
  if (st.sd.size() != st.mean.size() || st.constant.size() != st.mean.size())
    throw Error(ErrorKind::CorruptPayload, "standardization block inconsistent");
  m.manifest_hash = r.get_string();
  m.meta.seed = r.get<std::uint64_t>();
  m.meta.fold_id = r.get_string();
  m.meta.train_ms = r.get<double>();
  m.meta.loss_history = r.get_vector<double>();
  m.params = get_params(r, m.algorithm);
  if (r.remaining() != 0) throw Error(ErrorKind::CorruptPayload, "trailing bytes in model file");
  return m;
}

void save_model(const TrainedModel& model, const std::filesystem::path& path) {
  write_file_bytes(path.string(), serialize(model));
}

TrainedModel load_model(const std::filesystem::path& path) { return deserialize(read_file_bytes(path.string())); }

}  // namespace painscope
