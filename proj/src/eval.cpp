#include "lsp/eval.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace lsp {

std::string ProbeSetting::str() const {
  std::string s;
  for (std::size_t i = 0; i < per_level.size(); ++i) {
    if (i) s += 'x';
    s += std::to_string(per_level[i]);
  }
  return s;
}

ProbeSetting ProbeSetting::parse(const std::string& text) {
  ProbeSetting s;
  std::string tok;
  auto flush = [&] {
    if (tok.empty()) fail(ErrorKind::kInvalidArgument, "bad probe setting '" + text + "'");
    std::size_t used = 0;
    unsigned long v = 0;
    try {
      v = std::stoul(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size() || v == 0 || v > UINT32_MAX) {
      fail(ErrorKind::kInvalidArgument, "bad probe setting '" + text + "'");
    }
    s.per_level.push_back(std::uint32_t(v));
    tok.clear();
  };
  for (char ch : text) {
    if (ch == 'x' || ch == ';') flush();
    else tok += ch;
  }
  flush();
  return s;
}

bool ProbeSetting::nested_in(const ProbeSetting& other) const {
  if (per_level.size() != other.per_level.size()) return false;
  for (std::size_t i = 0; i < per_level.size(); ++i) {
    if (per_level[i] > other.per_level[i]) return false;
  }
  return true;
}

std::vector<ProbeSetting> parse_probe_list(const std::string& text) {
  std::vector<ProbeSetting> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(ProbeSetting::parse(item));
  if (out.empty()) fail(ErrorKind::kInvalidArgument, "empty probe list");
  return out;
}

namespace {

// Counts hits of one query; `stamp` is scratch sized to the dataset.
std::size_t count_hits(std::span<const std::uint32_t> truth,
                       std::span<const std::uint32_t> cand, std::vector<std::uint32_t>& stamp,
                       std::uint32_t mark) {
  for (auto c : cand) {
    if (c >= stamp.size()) stamp.resize(std::size_t(c) + 1, 0);
    stamp[c] = mark;
  }
  std::size_t hits = 0;
  for (auto t : truth) hits += (t < stamp.size() && stamp[t] == mark) ? 1 : 0;
  return hits;
}

}  // namespace

std::uint64_t knn_hits(const GroundTruth& gt, const std::vector<std::vector<std::uint32_t>>& cand,
                       std::size_t k) {
  if (cand.size() != gt.queries()) {
    fail(ErrorKind::kInvalidArgument, "got " + std::to_string(cand.size()) +
                                          " candidate lists for " +
                                          std::to_string(gt.queries()) + " queries");
  }
  require(k >= 1 && k <= gt.k, "k must lie in [1, " + std::to_string(gt.k) + "]");
  std::vector<std::uint32_t> stamp;
  std::uint64_t hits = 0;
  for (std::size_t q = 0; q < cand.size(); ++q) {
    hits += count_hits(gt.row(q).first(k), cand[q], stamp, std::uint32_t(q + 1));
  }
  return hits;
}

double knn_accuracy(const GroundTruth& gt, const std::vector<std::vector<std::uint32_t>>& cand,
                    std::size_t k) {
  const auto hits = knn_hits(gt, cand, k);
  if (cand.empty()) return 0.0;
  return double(hits) / (double(cand.size()) * double(k));
}

std::size_t quantile_95(std::vector<std::size_t> values) {
  require(!values.empty(), "quantile of an empty list");
  std::sort(values.begin(), values.end());
  // integer form of ceil(0.95 * len)
  const std::size_t idx = (95 * values.size() + 99) / 100;
  return values[idx - 1];
}

// ------------------------------------------------------------ routers

namespace {

std::vector<std::vector<std::uint32_t>> group_by_label(std::span<const std::uint32_t> labels,
                                                       std::uint32_t bins) {
  std::vector<std::vector<std::uint32_t>> out(bins);
  for (std::uint32_t p = 0; p < labels.size(); ++p) out[labels[p]].push_back(p);
  return out;
}

std::vector<std::uint32_t> gather(const std::vector<std::vector<std::uint32_t>>& bins,
                                  std::span<const std::uint32_t> chosen) {
  std::vector<std::uint32_t> out;
  for (auto b : chosen) out.insert(out.end(), bins[b].begin(), bins[b].end());
  return out;
}

void single_level(const ProbeSetting& s, std::uint32_t max, const std::string& method) {
  if (s.per_level.size() != 1 || s.per_level[0] < 1 || s.per_level[0] > max) {
    fail(ErrorKind::kInvalidArgument, "probe setting '" + s.str() + "' is invalid for " +
                                          method + " (expects one count in [1, " +
                                          std::to_string(max) + "])");
  }
}

class TreeRouter final : public CandidateRouter {
 public:
  TreeRouter(const PartitionTree& t, std::string method) : t_(t), method_(std::move(method)) {}
  std::string method() const override { return method_; }
  std::size_t dim() const override { return t_.dim; }
  std::size_t points() const override { return t_.n; }
  void validate(const ProbeSetting& s) const override {
    bool ok = s.per_level.size() == t_.levels();
    for (std::size_t i = 0; ok && i < s.per_level.size(); ++i) {
      ok = s.per_level[i] >= 1 && s.per_level[i] <= t_.branching[i];
    }
    if (!ok) {
      std::string shape;
      for (std::size_t i = 0; i < t_.levels(); ++i) {
        shape += (i ? "x" : "") + std::to_string(t_.branching[i]);
      }
      fail(ErrorKind::kInvalidArgument, "probe setting '" + s.str() + "' is invalid for " +
                                            method_ + " with branching " + shape);
    }
  }
  std::vector<std::uint32_t> candidates(std::span<const float> q, const ProbeSetting& s,
                                        std::size_t) const override {
    return query(t_, q, s.per_level).candidates;
  }

 private:
  const PartitionTree& t_;
  std::string method_;
};

class KMeansCandidates final : public CandidateRouter {
 public:
  KMeansCandidates(const KMeansRouter& r, std::string method)
      : r_(r), method_(std::move(method)), bins_(group_by_label(r.assignment, r.bins())) {}
  std::string method() const override { return method_; }
  std::size_t dim() const override { return r_.dim; }
  std::size_t points() const override { return r_.assignment.size(); }
  void validate(const ProbeSetting& s) const override { single_level(s, r_.bins(), method_); }
  std::vector<std::uint32_t> candidates(std::span<const float> q, const ProbeSetting& s,
                                        std::size_t) const override {
    return gather(bins_, kmeans_top_bins(r_, q, s.per_level[0]));
  }

 private:
  const KMeansRouter& r_;
  std::string method_;
  std::vector<std::vector<std::uint32_t>> bins_;
};

class LshCandidates final : public CandidateRouter {
 public:
  LshCandidates(const LshRouter& r, std::string method)
      : r_(r), method_(std::move(method)), bins_(group_by_label(r.partition.labels, r.bins())) {}
  std::string method() const override { return method_; }
  std::size_t dim() const override { return r_.dim; }
  std::size_t points() const override { return r_.partition.labels.size(); }
  void validate(const ProbeSetting& s) const override { single_level(s, r_.bins(), method_); }
  std::vector<std::uint32_t> candidates(std::span<const float> q, const ProbeSetting& s,
                                        std::size_t) const override {
    return gather(bins_, r_.top_bins(q, s.per_level[0]));
  }

 private:
  const LshRouter& r_;
  std::string method_;
  std::vector<std::vector<std::uint32_t>> bins_;
};

// Probing b = 2^j leaves means stopping j levels above the bottom and taking
// the whole subtree.
class HyperplaneCandidates final : public CandidateRouter {
 public:
  HyperplaneCandidates(const std::vector<HyperplaneTree>& trees, std::string method)
      : trees_(trees), method_(std::move(method)) {
    require(!trees.empty(), "empty tree set");
  }
  std::string method() const override { return method_; }
  std::size_t dim() const override { return trees_.front().dim; }
  std::size_t points() const override {
    std::size_t total = 0;
    for (const auto& n : trees_.front().nodes) total += n.points.size();
    return total;
  }
  std::size_t repetitions() const override { return trees_.size(); }
  void validate(const ProbeSetting& s) const override {
    const std::uint32_t depth = trees_.front().max_depth;
    const bool ok = s.per_level.size() == 1 && s.per_level[0] >= 1 &&
                    std::has_single_bit(s.per_level[0]) &&
                    std::countr_zero(s.per_level[0]) <= int(depth);
    if (!ok) {
      fail(ErrorKind::kInvalidArgument,
           "probe setting '" + s.str() + "' is invalid for " + method_ +
               " (expects a power of two up to " + std::to_string(1ull << depth) + ")");
    }
  }
  std::vector<std::uint32_t> candidates(std::span<const float> q, const ProbeSetting& s,
                                        std::size_t rep) const override {
    const auto& t = trees_[rep];
    const auto up = std::uint32_t(std::countr_zero(s.per_level[0]));
    return tree_points(t, tree_descend(t, q, t.max_depth - up));
  }

 private:
  const std::vector<HyperplaneTree>& trees_;
  std::string method_;
};

}  // namespace

std::unique_ptr<CandidateRouter> make_router(const PartitionTree& t, std::string method) {
  return std::make_unique<TreeRouter>(t, std::move(method));
}

std::unique_ptr<CandidateRouter> make_router(const KMeansRouter& r, std::string method) {
  return std::make_unique<KMeansCandidates>(r, std::move(method));
}

std::unique_ptr<CandidateRouter> make_router(const IndexFile& f) {
  return std::visit(
      [&](const auto& r) -> std::unique_ptr<CandidateRouter> {
        using R = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<R, PartitionTree>) {
          return std::make_unique<TreeRouter>(r, f.method);
        } else if constexpr (std::is_same_v<R, KMeansRouter>) {
          return std::make_unique<KMeansCandidates>(r, f.method);
        } else if constexpr (std::is_same_v<R, LshRouter>) {
          return std::make_unique<LshCandidates>(r, f.method);
        } else {
          return std::make_unique<HyperplaneCandidates>(r, f.method);
        }
      },
      f.router);
}

// ------------------------------------------------------------ sweep

std::vector<EvalRecord> sweep(const CandidateRouter& router, const PointSet& qs,
                              const GroundTruth& gt, const std::vector<ProbeSetting>& settings,
                              const SweepOptions& opt) {
  if (gt.queries() != qs.size()) {
    fail(ErrorKind::kInvalidArgument, "ground truth covers " + std::to_string(gt.queries()) +
                                          " queries but the query set has " +
                                          std::to_string(qs.size()));
  }
  require(opt.k >= 1 && opt.k <= gt.k, "ground truth holds " + std::to_string(gt.k) +
                                           " neighbors per query, fewer than k=" +
                                           std::to_string(opt.k));
  require(qs.dim() == router.dim(), "query dimension " + std::to_string(qs.dim()) +
                                        " does not match the index dimension " +
                                        std::to_string(router.dim()));
  require(!settings.empty(), "no probe settings");
  for (const auto& s : settings) router.validate(s);

  const std::size_t nq = qs.size(), reps = router.repetitions();
  const std::size_t n = router.points();
  std::vector<EvalRecord> out;
  for (const auto& s : settings) {
    std::vector<std::size_t> counts(nq * reps), hits(nq * reps);
    std::vector<double> micros(nq, 0.0);
    parallel_for(nq, opt.workers, [&](std::size_t q) {
      thread_local std::vector<std::uint32_t> stamp;
      thread_local std::uint32_t mark = 0;
      if (stamp.size() < n) stamp.assign(n, 0);
      const auto start = std::chrono::steady_clock::now();
      for (std::size_t r = 0; r < reps; ++r) {
        const auto cand = router.candidates(qs.row(q), s, r);
        if (++mark == 0) {
          std::fill(stamp.begin(), stamp.end(), 0);
          mark = 1;
        }
        counts[q * reps + r] = cand.size();
        hits[q * reps + r] = count_hits(gt.row(q).first(opt.k), cand, stamp, mark);
      }
      if (opt.measure_time) {
        micros[q] = std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() -
                                                              start)
                        .count() /
                    double(reps);
      }
    });
    EvalRecord rec;
    rec.method = router.method();
    rec.probes = s.str();
    std::uint64_t total_hits = 0, total_cands = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
      total_hits += hits[i];
      total_cands += counts[i];
    }
    rec.hits = total_hits;
    const double samples = double(counts.size());
    rec.knn_accuracy = samples > 0 ? double(total_hits) / (samples * double(opt.k)) : 0.0;
    rec.avg_candidates = samples > 0 ? double(total_cands) / samples : 0.0;
    rec.q95_candidates = counts.empty() ? 0 : quantile_95(counts);
    if (opt.measure_time && nq > 0) {
      double sum = 0.0;
      for (double m : micros) sum += m;
      rec.mean_query_us = sum / double(nq);
    }
    out.push_back(std::move(rec));
  }

  for (std::size_t a = 0; a < settings.size(); ++a) {
    for (std::size_t b = 0; b < settings.size(); ++b) {
      if (a == b || !settings[a].nested_in(settings[b])) continue;
      if (out[a].hits > out[b].hits) {
        fail(ErrorKind::kInvariant, "accuracy decreased from probes " + settings[a].str() +
                                        " to " + settings[b].str());
      }
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const EvalRecord& x, const EvalRecord& y) {
    return x.avg_candidates < y.avg_candidates;
  });
  return out;
}

std::vector<EvalRecord> report_view(const std::vector<EvalRecord>& records, double floor) {
  std::vector<EvalRecord> out;
  for (const auto& r : records) {
    if (r.knn_accuracy >= floor) out.push_back(r);
  }
  return out;
}

void write_csv(std::ostream& out, const std::vector<EvalRecord>& records, bool header) {
  if (header) out << "method,probes,knn_accuracy,avg_candidates,q95_candidates,mean_query_us\n";
  char buf[256];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf, "%.6f,%.3f,%zu,%.3f", r.knn_accuracy, r.avg_candidates,
                  r.q95_candidates, r.mean_query_us);
    out << r.method << ',' << r.probes << ',' << buf << '\n';
  }
}

std::vector<std::vector<std::uint32_t>> training_label_candidates(const Partition& part) {
  const auto bins = group_by_label(part.labels, part.m);
  std::vector<std::vector<std::uint32_t>> out(part.labels.size());
  for (std::size_t p = 0; p < out.size(); ++p) out[p] = bins[part.labels[p]];
  return out;
}

std::vector<std::vector<std::uint32_t>> training_label_candidates(const PartitionTree& t) {
  const auto leaves = t.point_leaves();
  std::vector<std::vector<std::uint32_t>> out(t.n);
  for (std::size_t p = 0; p < out.size(); ++p) out[p] = t.nodes[leaves[p]].points;
  return out;
}

}  // namespace lsp
