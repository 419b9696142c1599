#pragma once

// Supervised extension of a graph partition to all of R^d: soft labels,
// KL-divergence training, and bin-ranking inference.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "lsp/core.hpp"
#include "lsp/gp.hpp"
#include "lsp/knn.hpp"
#include "lsp/nn.hpp"

namespace lsp {

/// Per point, a sparse distribution over bins whose masses are multiples of 1/S.
class SoftLabelSet {
 public:
  struct Entry {
    std::uint32_t bin;
    std::uint32_t count;  // probability = count / S
  };

  SoftLabelSet() = default;
  SoftLabelSet(std::uint32_t m, std::uint32_t s, std::vector<std::uint32_t> offsets,
               std::vector<Entry> entries);

  /// One-hot labels (S = 1).
  static SoftLabelSet one_hot(const Partition& part);

  std::size_t size() const noexcept { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  std::uint32_t bins() const noexcept { return m_; }
  std::uint32_t s() const noexcept { return s_; }
  std::span<const Entry> row(std::size_t p) const noexcept {
    return {entries_.data() + offsets_[p], offsets_[p + 1] - offsets_[p]};
  }
  /// Dense probability vector for point p.
  std::vector<double> dense(std::size_t p) const;
  /// Bin with the largest mass (ties by lowest id).
  std::uint32_t argmax(std::size_t p) const;

 private:
  std::uint32_t m_ = 0;
  std::uint32_t s_ = 1;
  std::vector<std::uint32_t> offsets_;
  std::vector<Entry> entries_;
};

/// Bin distribution of a point drawn uniformly from {p} and its first S-1
/// graph neighbors.
SoftLabelSet make_soft_labels(const KnnGraph& g, const Partition& part, std::uint32_t s);

/// sum_{i: p_i > 0} p_i log(p_i / max(q_i, 1e-12)).
double kl_loss(std::span<const double> target, std::span<const double> predicted);

enum class ClassifierKind : std::uint32_t { kSoftmaxRegression = 0, kMlp = 1 };

ClassifierKind parse_classifier_kind(const std::string& name);
const char* classifier_kind_name(ClassifierKind kind);

struct MlpConfig {
  std::uint32_t blocks = 3;
  std::uint32_t hidden = 512;
  double dropout = 0.1;
  std::uint32_t epochs = 20;
  double learning_rate = 1e-3;
  double decay = 0.5;
  std::uint32_t decay_every = 5;
  std::uint32_t batch_size = 256;
  std::uint64_t seed = 42;

  static MlpConfig top_level() { return {}; }
  static MlpConfig second_level() {
    MlpConfig c;
    c.blocks = 2;
    c.hidden = 390;
    return c;
  }
};

struct TrainReport {
  std::vector<double> epoch_loss;  // mean KL per epoch
};

class Classifier {
 public:
  Classifier() = default;
  Classifier(ClassifierKind kind, nn::Network<float> net);

  /// Untrained model with all-zero parameters.
  static Classifier zeros(ClassifierKind kind, std::uint32_t dim, std::uint32_t bins,
                          std::uint32_t blocks = 0, std::uint32_t hidden = 0);

  ClassifierKind kind() const noexcept { return kind_; }
  std::uint32_t dim() const noexcept { return std::uint32_t(net_.input_dim()); }
  std::uint32_t bins() const noexcept { return std::uint32_t(net_.output_dim()); }
  std::uint32_t blocks() const noexcept { return std::uint32_t(net_.block_count()); }
  std::uint32_t hidden() const noexcept { return std::uint32_t(net_.hidden()); }
  const nn::Network<float>& network() const noexcept { return net_; }

  /// Inference-mode distributions for every row of `rows` (n x dim, row-major).
  nn::Mat<float> predict_batch(std::span<const float> rows) const;

 private:
  ClassifierKind kind_ = ClassifierKind::kSoftmaxRegression;
  nn::Network<float> net_;
};

Classifier train(const PointSet& ps, const SoftLabelSet& labels, ClassifierKind kind,
                 const MlpConfig& cfg, TrainReport* report = nullptr);

std::vector<double> predict_dist(const Classifier& c, std::span<const float> x);

/// The b most probable bins, ties by ascending id.
std::vector<std::uint32_t> top_bins(const Classifier& c, std::span<const float> x,
                                    std::size_t b);
/// Same ranking from an already computed distribution.
std::vector<std::uint32_t> rank_bins(std::span<const double> dist, std::size_t b);

std::vector<std::uint8_t> serialize_classifier(const Classifier& c);
Classifier deserialize_classifier(std::span<const std::uint8_t> bytes);
void save_classifier(const std::filesystem::path& path, const Classifier& c);
Classifier load_classifier(const std::filesystem::path& path);

}  // namespace lsp
