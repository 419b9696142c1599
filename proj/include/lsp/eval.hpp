#pragma once

// Accuracy versus candidate-count measurement and CSV sweep tables.

#include <cstdint>
#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "lsp/core.hpp"
#include "lsp/gp.hpp"
#include "lsp/index.hpp"

namespace lsp {

/// Probes per level; a flat router uses a single entry. Rendered "2x2".
struct ProbeSetting {
  std::vector<std::uint32_t> per_level;

  std::string str() const;
  /// "4" or "2x2" (also "2;2").
  static ProbeSetting parse(const std::string& text);
  /// Componentwise <= with equal length.
  bool nested_in(const ProbeSetting& other) const;
};

/// Comma-separated settings, e.g. "1,2,4,8" or "1x1,2x2".
std::vector<ProbeSetting> parse_probe_list(const std::string& text);

/// Total |top-k truth ∩ candidates| over all queries.
std::uint64_t knn_hits(const GroundTruth& gt, const std::vector<std::vector<std::uint32_t>>& cand,
                       std::size_t k);
double knn_accuracy(const GroundTruth& gt, const std::vector<std::vector<std::uint32_t>>& cand,
                    std::size_t k);

std::size_t quantile_95(std::vector<std::size_t> values);

/// Candidate generator under evaluation. Routers built from several
/// independent repetitions report the mean over repetitions.
class CandidateRouter {
 public:
  virtual ~CandidateRouter() = default;
  virtual std::string method() const = 0;
  virtual std::size_t dim() const = 0;
  virtual std::size_t points() const = 0;
  virtual std::size_t repetitions() const { return 1; }
  /// Throws kInvalidArgument naming the setting when it does not apply.
  virtual void validate(const ProbeSetting& s) const = 0;
  virtual std::vector<std::uint32_t> candidates(std::span<const float> q, const ProbeSetting& s,
                                                std::size_t rep) const = 0;
};

/// Routers borrow their source, which must outlive them.
std::unique_ptr<CandidateRouter> make_router(const IndexFile& f);
std::unique_ptr<CandidateRouter> make_router(const PartitionTree& t,
                                             std::string method = "neural-lsh");
std::unique_ptr<CandidateRouter> make_router(const KMeansRouter& r,
                                             std::string method = "kmeans");

struct EvalRecord {
  std::string method;
  std::string probes;
  double knn_accuracy = 0.0;
  double avg_candidates = 0.0;
  std::size_t q95_candidates = 0;
  double mean_query_us = 0.0;
  std::uint64_t hits = 0;
};

struct SweepOptions {
  std::size_t k = 10;
  unsigned workers = default_workers();
  bool measure_time = false;  // off keeps the CSV byte-reproducible
};

std::vector<EvalRecord> sweep(const CandidateRouter& router, const PointSet& qs,
                              const GroundTruth& gt, const std::vector<ProbeSetting>& settings,
                              const SweepOptions& opt = {});

/// Records with accuracy >= floor (0.75 for the k=10 report view).
std::vector<EvalRecord> report_view(const std::vector<EvalRecord>& records, double floor = 0.75);

void write_csv(std::ostream& out, const std::vector<EvalRecord>& records, bool header = true);

/// Candidates per dataset point under the stored training labels: each point
/// gets the members of its own bin.
std::vector<std::vector<std::uint32_t>> training_label_candidates(const Partition& part);
std::vector<std::vector<std::uint32_t>> training_label_candidates(const PartitionTree& t);

}  // namespace lsp
