#include "lsp/learn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lsp/binary_io.hpp"
#include "lsp/random.hpp"

namespace lsp {

namespace {
constexpr char kModelMagic[] = "PHM1";
}

SoftLabelSet::SoftLabelSet(std::uint32_t m, std::uint32_t s,
                           std::vector<std::uint32_t> offsets, std::vector<Entry> entries)
    : m_(m), s_(s), offsets_(std::move(offsets)), entries_(std::move(entries)) {
  require(s_ >= 1, "soft-label S must be positive");
  require(!offsets_.empty() && offsets_.back() == entries_.size(), "bad soft-label offsets");
  for (std::size_t p = 0; p + 1 < offsets_.size(); ++p) {
    std::uint32_t total = 0;
    for (const auto& e : row(p)) {
      require(e.bin < m_, "soft-label bin out of range");
      total += e.count;
    }
    require(total == s_, "soft label of point " + std::to_string(p) + " does not sum to 1");
  }
}

SoftLabelSet SoftLabelSet::one_hot(const Partition& part) {
  std::vector<std::uint32_t> offsets(part.size() + 1);
  std::vector<Entry> entries(part.size());
  for (std::size_t p = 0; p < part.size(); ++p) {
    offsets[p + 1] = std::uint32_t(p + 1);
    entries[p] = {part.labels[p], 1};
  }
  return SoftLabelSet(part.m, 1, std::move(offsets), std::move(entries));
}

std::vector<double> SoftLabelSet::dense(std::size_t p) const {
  std::vector<double> out(m_, 0.0);
  for (const auto& e : row(p)) out[e.bin] = double(e.count) / double(s_);
  return out;
}

std::uint32_t SoftLabelSet::argmax(std::size_t p) const {
  std::uint32_t best = 0, best_count = 0;
  for (const auto& e : row(p)) {
    if (e.count > best_count || (e.count == best_count && e.bin < best)) {
      best = e.bin;
      best_count = e.count;
    }
  }
  return best;
}

SoftLabelSet make_soft_labels(const KnnGraph& g, const Partition& part, std::uint32_t s) {
  require(part.size() == g.size(), "partition size does not match graph");
  require(s >= 1, "soft-label S must be positive");
  if (s > g.k() + 1) {
    fail(ErrorKind::kInvalidArgument,
         "soft labels with S=" + std::to_string(s) + " need a k-NN graph with k >= " +
             std::to_string(s - 1) + " (have k=" + std::to_string(g.k()) + ")");
  }
  std::vector<std::uint32_t> offsets{0};
  std::vector<SoftLabelSet::Entry> entries;
  std::vector<std::uint32_t> window;
  for (std::size_t p = 0; p < g.size(); ++p) {
    window.assign(1, part.labels[p]);
    auto nb = g.neighbors(p);
    for (std::uint32_t i = 0; i + 1 < s; ++i) window.push_back(part.labels[nb[i]]);
    std::sort(window.begin(), window.end());
    for (std::size_t i = 0; i < window.size();) {
      std::size_t j = i;
      while (j < window.size() && window[j] == window[i]) ++j;
      entries.push_back({window[i], std::uint32_t(j - i)});
      i = j;
    }
    offsets.push_back(std::uint32_t(entries.size()));
  }
  return SoftLabelSet(part.m, s, std::move(offsets), std::move(entries));
}

double kl_loss(std::span<const double> target, std::span<const double> predicted) {
  require(target.size() == predicted.size(), "kl_loss: length mismatch (" +
                                                  std::to_string(target.size()) + " vs " +
                                                  std::to_string(predicted.size()) + ")");
  double total = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (target[i] <= 0.0) continue;
    const double q = std::max(predicted[i], nn::kProbabilityFloor);
    total += target[i] * std::log(target[i] / q);
  }
  return std::max(0.0, total);
}

ClassifierKind parse_classifier_kind(const std::string& name) {
  if (name == "mlp" || name == "neural") return ClassifierKind::kMlp;
  if (name == "regression" || name == "logistic") return ClassifierKind::kSoftmaxRegression;
  fail(ErrorKind::kInvalidArgument, "unknown model kind '" + name + "'");
}

const char* classifier_kind_name(ClassifierKind kind) {
  return kind == ClassifierKind::kMlp ? "mlp" : "regression";
}

Classifier::Classifier(ClassifierKind kind, nn::Network<float> net)
    : kind_(kind), net_(std::move(net)) {
  require(kind_ == ClassifierKind::kMlp || net_.block_count() == 0,
          "softmax regression has no hidden blocks");
}

Classifier Classifier::zeros(ClassifierKind kind, std::uint32_t dim, std::uint32_t bins,
                             std::uint32_t blocks, std::uint32_t hidden) {
  if (kind == ClassifierKind::kSoftmaxRegression) blocks = 0;
  return Classifier(kind, nn::Network<float>(int(dim), int(bins), int(blocks), int(hidden), 0.0));
}

nn::Mat<float> Classifier::predict_batch(std::span<const float> rows) const {
  require(dim() > 0 && rows.size() % dim() == 0, "input rows do not match model dimension");
  const Eigen::Index n = Eigen::Index(rows.size() / dim());
  Eigen::Map<const nn::Mat<float>> x(rows.data(), n, dim());
  return net_.predict(x);
}

Classifier train(const PointSet& ps, const SoftLabelSet& labels, ClassifierKind kind,
                 const MlpConfig& cfg, TrainReport* report) {
  const std::size_t n = ps.size(), d = ps.dim();
  const std::uint32_t m = labels.bins();
  if (m < 2) fail(ErrorKind::kInvalidArgument, "training needs at least 2 bins");
  require(labels.size() == n, "labels cover " + std::to_string(labels.size()) +
                                  " points, data has " + std::to_string(n));
  require(cfg.batch_size >= 1 && cfg.epochs >= 1, "batch size and epochs must be positive");
  require(cfg.dropout >= 0.0 && cfg.dropout < 1.0, "dropout rate must lie in [0, 1)");

  const int blocks = kind == ClassifierKind::kMlp ? int(cfg.blocks) : 0;
  const int hidden = blocks > 0 ? int(cfg.hidden) : 0;
  require(blocks == 0 || hidden >= 1, "hidden size must be positive");
  nn::Network<float> net(int(d), int(m), blocks, hidden, cfg.dropout);
  Rng rng(cfg.seed);
  net.glorot(rng);
  auto params = net.params();
  nn::Adam<float> adam(params);

  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  nn::Mat<float> x, target;
  if (report) report->epoch_loss.clear();

  for (std::uint32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr =
        cfg.learning_rate *
        std::pow(cfg.decay, double(cfg.decay_every ? epoch / cfg.decay_every : 0));
    rng.shuffle(std::span<std::uint32_t>(order));
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t count = std::min<std::size_t>(cfg.batch_size, n - start);
      // Batch statistics are undefined for a lone sample in a larger epoch.
      if (count == 1 && n > 1 && blocks > 0) continue;
      x.resize(Eigen::Index(count), Eigen::Index(d));
      target.setZero(Eigen::Index(count), Eigen::Index(m));
      for (std::size_t r = 0; r < count; ++r) {
        const auto p = order[start + r];
        auto row = ps.row(p);
        std::copy(row.begin(), row.end(), x.row(Eigen::Index(r)).data());
        for (const auto& e : labels.row(p)) {
          target(Eigen::Index(r), e.bin) = float(double(e.count) / double(labels.s()));
        }
      }
      const double loss = net.loss_and_gradients(x, target, rng);
      if (!std::isfinite(loss)) {
        fail(ErrorKind::kRuntime, "training diverged (non-finite loss) in epoch " +
                                      std::to_string(epoch + 1));
      }
      adam.step(params, lr);
      loss_sum += loss * double(count);
      seen += count;
    }
    for (const auto& p : params) {
      for (float v : p.value) {
        if (!std::isfinite(v)) {
          fail(ErrorKind::kRuntime, "training diverged (non-finite " + p.name +
                                        ") in epoch " + std::to_string(epoch + 1));
        }
      }
    }
    if (report) report->epoch_loss.push_back(seen ? loss_sum / double(seen) : 0.0);
  }
  return Classifier(kind, std::move(net));
}

std::vector<double> predict_dist(const Classifier& c, std::span<const float> x) {
  require(x.size() == c.dim(), "dimension mismatch: model expects " +
                                   std::to_string(c.dim()) + ", got " +
                                   std::to_string(x.size()));
  const auto q = c.predict_batch(x);
  std::vector<double> out(q.cols());
  for (Eigen::Index i = 0; i < q.cols(); ++i) out[std::size_t(i)] = q(0, i);
  return out;
}

std::vector<std::uint32_t> rank_bins(std::span<const double> dist, std::size_t b) {
  if (b < 1 || b > dist.size()) {
    fail(ErrorKind::kInvalidArgument, "probe count " + std::to_string(b) +
                                          " outside [1, " + std::to_string(dist.size()) + "]");
  }
  std::vector<std::uint32_t> ids(dist.size());
  std::iota(ids.begin(), ids.end(), 0u);
  std::partial_sort(ids.begin(), ids.begin() + std::ptrdiff_t(b), ids.end(),
                    [&](std::uint32_t a, std::uint32_t c) {
                      return dist[a] > dist[c] || (dist[a] == dist[c] && a < c);
                    });
  ids.resize(b);
  return ids;
}

std::vector<std::uint32_t> top_bins(const Classifier& c, std::span<const float> x,
                                    std::size_t b) {
  const auto dist = predict_dist(c, x);
  return rank_bins(dist, b);
}

namespace {

template <typename M>
void put(io::ByteWriter& w, const M& m) {
  w.f32s(std::span<const float>(m.data(), std::size_t(m.size())));
}

template <typename M>
void get(io::ByteReader& r, M& m) {
  auto v = r.f32s(std::size_t(m.size()));
  for (float f : v) {
    if (!std::isfinite(f)) r.format_error("non-finite model parameter");
  }
  std::copy(v.begin(), v.end(), m.data());
}

}  // namespace

std::vector<std::uint8_t> serialize_classifier(const Classifier& c) {
  io::ByteWriter w;
  w.magic(kModelMagic);
  w.u32(static_cast<std::uint32_t>(c.kind()));
  w.u32(c.dim());
  w.u32(c.bins());
  w.u32(c.blocks());
  w.u32(c.hidden());
  const auto& net = c.network();
  for (const auto& b : net.blocks()) {
    put(w, b.dense.weight);
    put(w, b.dense.bias);
    put(w, b.norm.gamma);
    put(w, b.norm.beta);
    put(w, b.norm.running_mean);
    put(w, b.norm.running_var);
  }
  put(w, net.head().weight);
  put(w, net.head().bias);
  return w.release();
}

namespace {

Classifier read_classifier(io::ByteReader& r) {
  r.expect_magic(kModelMagic);
  const std::uint32_t kind = r.u32();
  const std::uint32_t d = r.u32(), m = r.u32(), b = r.u32(), s = r.u32();
  if (kind > 1) r.format_error("unknown model kind tag " + std::to_string(kind));
  if (d == 0 || m == 0) r.format_error("model dimensions must be positive");
  if (kind == 0 && b != 0) r.format_error("regression model with hidden blocks");
  if (b > 0 && s == 0) r.format_error("hidden size must be positive");
  nn::Network<float> net(int(d), int(m), int(b), int(s), 0.0);
  for (auto& blk : net.blocks()) {
    get(r, blk.dense.weight);
    get(r, blk.dense.bias);
    get(r, blk.norm.gamma);
    get(r, blk.norm.beta);
    get(r, blk.norm.running_mean);
    get(r, blk.norm.running_var);
  }
  get(r, net.head().weight);
  get(r, net.head().bias);
  return Classifier(static_cast<ClassifierKind>(kind), std::move(net));
}

}  // namespace

Classifier deserialize_classifier(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes, "model");
  auto c = read_classifier(r);
  r.expect_end();
  return c;
}

void save_classifier(const std::filesystem::path& path, const Classifier& c) {
  io::write_file_atomic(path, serialize_classifier(c));
}

Classifier load_classifier(const std::filesystem::path& path) {
  return deserialize_classifier(io::read_file(path));
}

}  // namespace lsp
